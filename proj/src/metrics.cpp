#include "rave/metrics.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "rave/errors.hpp"

namespace rave {

namespace {

void require_same_shape(const ImageBuffer& a, const ImageBuffer& b) {
    if (!a.same_shape(b)) {
        throw InvalidInput("image dimensions differ: " + std::to_string(a.width()) + "x" +
                           std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                           std::to_string(b.height()));
    }
}

std::vector<double> gaussian_kernel(int size, double sigma) {
    std::vector<double> k(static_cast<std::size_t>(size));
    const int half = size / 2;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - half;
        k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += k[i];
    }
    for (double& v : k) {
        v /= sum;
    }
    return k;
}

/// Single-channel plane helper.
struct Plane2D {
    std::size_t w = 0, h = 0;
    std::vector<double> v;
    Plane2D(std::size_t w_, std::size_t h_) : w(w_), h(h_), v(w_ * h_, 0.0) {}
    double& operator()(std::size_t x, std::size_t y) { return v[y * w + x]; }
    double operator()(std::size_t x, std::size_t y) const { return v[y * w + x]; }
};

/// Valid-mode separable correlation with a symmetric kernel.
Plane2D correlate_valid(const Plane2D& in, const std::vector<double>& k) {
    const std::size_t ks = k.size();
    Plane2D tmp(in.w - ks + 1, in.h);
    for (std::size_t y = 0; y < in.h; ++y) {
        for (std::size_t x = 0; x < tmp.w; ++x) {
            double s = 0.0;
            for (std::size_t i = 0; i < ks; ++i) {
                s += k[i] * in(x + i, y);
            }
            tmp(x, y) = s;
        }
    }
    Plane2D out(tmp.w, in.h - ks + 1);
    for (std::size_t y = 0; y < out.h; ++y) {
        for (std::size_t x = 0; x < out.w; ++x) {
            double s = 0.0;
            for (std::size_t i = 0; i < ks; ++i) {
                s += k[i] * tmp(x, y + i);
            }
            out(x, y) = s;
        }
    }
    return out;
}

/// Adjoint of correlate_valid: scatters each window value back over its footprint.
Plane2D correlate_adjoint(const Plane2D& in, const std::vector<double>& k) {
    const std::size_t ks = k.size();
    Plane2D tmp(in.w, in.h + ks - 1);
    for (std::size_t y = 0; y < in.h; ++y) {
        for (std::size_t x = 0; x < in.w; ++x) {
            const double v = in(x, y);
            for (std::size_t i = 0; i < ks; ++i) {
                tmp(x, y + i) += k[i] * v;
            }
        }
    }
    Plane2D out(in.w + ks - 1, tmp.h);
    for (std::size_t y = 0; y < tmp.h; ++y) {
        for (std::size_t x = 0; x < tmp.w; ++x) {
            const double v = tmp(x, y);
            for (std::size_t i = 0; i < ks; ++i) {
                out(x + i, y) += k[i] * v;
            }
        }
    }
    return out;
}

Plane2D channel(const ImageBuffer& img, int c) {
    Plane2D p(img.width(), img.height());
    for (std::uint32_t y = 0; y < img.height(); ++y) {
        for (std::uint32_t x = 0; x < img.width(); ++x) {
            p(x, y) = img.at(x, y, c);
        }
    }
    return p;
}

ValueAndGrad ssim_impl(const ImageBuffer& a, const ImageBuffer& b, const LossConfig& config,
                       bool want_grad) {
    config.validate();
    require_same_shape(a, b);
    const auto win = static_cast<std::uint32_t>(config.ssim_window);
    if (a.width() < win || a.height() < win) {
        throw InvalidInput("image smaller than the SSIM window");
    }
    const std::vector<double> k = gaussian_kernel(config.ssim_window, config.ssim_sigma);
    const double c1 = config.ssim_c1;
    const double c2 = config.ssim_c2;
    const std::size_t mw = a.width() - win + 1;
    const std::size_t mh = a.height() - win + 1;
    const double norm = 1.0 / (3.0 * static_cast<double>(mw * mh));

    ValueAndGrad out;
    if (want_grad) {
        out.grad = ImageBuffer(a.width(), a.height());
    }
    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        const Plane2D pa = channel(a, c);
        const Plane2D pb = channel(b, c);
        Plane2D aa(pa.w, pa.h), bb(pa.w, pa.h), ab(pa.w, pa.h);
        for (std::size_t i = 0; i < pa.v.size(); ++i) {
            aa.v[i] = pa.v[i] * pa.v[i];
            bb.v[i] = pb.v[i] * pb.v[i];
            ab.v[i] = pa.v[i] * pb.v[i];
        }
        const Plane2D mu_a = correlate_valid(pa, k);
        const Plane2D mu_b = correlate_valid(pb, k);
        const Plane2D m_aa = correlate_valid(aa, k);
        const Plane2D m_bb = correlate_valid(bb, k);
        const Plane2D m_ab = correlate_valid(ab, k);

        Plane2D d_mu(mw, mh), d_aa(mw, mh), d_ab(mw, mh);
        for (std::size_t i = 0; i < mu_a.v.size(); ++i) {
            const double ma = mu_a.v[i];
            const double mb = mu_b.v[i];
            const double var_a = m_aa.v[i] - ma * ma;
            const double var_b = m_bb.v[i] - mb * mb;
            const double cov = m_ab.v[i] - ma * mb;
            const double a1 = 2.0 * ma * mb + c1;
            const double a2 = 2.0 * cov + c2;
            const double b1 = ma * ma + mb * mb + c1;
            const double b2 = var_a + var_b + c2;
            const double den = b1 * b2;
            const double s = a1 * a2 / den;
            total += s;
            if (want_grad) {
                // S = A1 A2 / (B1 B2) as a function of (mu_a, E[a^2], E[ab]).
                const double dn_dmu = 2.0 * mb * (a2 - a1);
                const double dd_dmu = 2.0 * ma * (b2 - b1);
                d_mu.v[i] = norm * (dn_dmu - s * dd_dmu) / den;
                d_aa.v[i] = norm * (-s * b1 / den);
                d_ab.v[i] = norm * (2.0 * a1 / den);
            }
        }
        if (want_grad) {
            const Plane2D g_mu = correlate_adjoint(d_mu, k);
            const Plane2D g_aa = correlate_adjoint(d_aa, k);
            const Plane2D g_ab = correlate_adjoint(d_ab, k);
            for (std::uint32_t y = 0; y < a.height(); ++y) {
                for (std::uint32_t x = 0; x < a.width(); ++x) {
                    out.grad.at(x, y, c) =
                        g_mu(x, y) + 2.0 * pa(x, y) * g_aa(x, y) + pb(x, y) * g_ab(x, y);
                }
            }
        }
    }
    out.value = total * norm;
    return out;
}

}  // namespace

void LossConfig::validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw InvalidParameter("lambda must lie in [0,1]");
    }
    if (ssim_window < 3 || ssim_window % 2 == 0) {
        throw InvalidParameter("ssim_window must be odd and >= 3");
    }
    if (!(ssim_sigma > 0.0)) {
        throw InvalidParameter("ssim_sigma must be positive");
    }
}

ValueAndGrad l1_loss(const ImageBuffer& a, const ImageBuffer& b) {
    require_same_shape(a, b);
    ValueAndGrad out{0.0, ImageBuffer(a.width(), a.height())};
    const double n = static_cast<double>(a.size());
    const auto da = a.data();
    const auto db = b.data();
    auto g = out.grad.data();
    double sum = 0.0;
    for (std::size_t i = 0; i < da.size(); ++i) {
        const double d = da[i] - db[i];
        sum += std::abs(d);
        g[i] = d > 0.0 ? 1.0 / n : (d < 0.0 ? -1.0 / n : 0.0);
    }
    out.value = sum / n;
    return out;
}

ValueAndGrad ssim(const ImageBuffer& a, const ImageBuffer& b, const LossConfig& config) {
    return ssim_impl(a, b, config, true);
}

double ssim_value(const ImageBuffer& a, const ImageBuffer& b, const LossConfig& config) {
    return ssim_impl(a, b, config, false).value;
}

ValueAndGrad combined_loss(const ImageBuffer& render, const ImageBuffer& target,
                           const LossConfig& config) {
    config.validate();
    ValueAndGrad l1 = l1_loss(render, target);
    if (config.lambda == 0.0) {
        return l1;
    }
    const ValueAndGrad s = ssim(render, target, config);
    const double lam = config.lambda;
    ValueAndGrad out{(1.0 - lam) * l1.value + lam * (1.0 - s.value), std::move(l1.grad)};
    auto g = out.grad.data();
    const auto gs = s.grad.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = (1.0 - lam) * g[i] - lam * gs[i];
    }
    return out;
}

double mse(const ImageBuffer& a, const ImageBuffer& b) {
    require_same_shape(a, b);
    const auto da = a.data();
    const auto db = b.data();
    double sum = 0.0;
    for (std::size_t i = 0; i < da.size(); ++i) {
        const double d = da[i] - db[i];
        sum += d * d;
    }
    return sum / static_cast<double>(da.size());
}

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
    const double m = mse(a, b);
    if (m == 0.0) {
        return kPsnrIdentical;
    }
    return 10.0 * std::log10(1.0 / m);
}

}  // namespace rave
