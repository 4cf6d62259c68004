#include "rave/splat.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include "rave/errors.hpp"

namespace rave {

namespace {

constexpr std::uint32_t kTileSize = 16;

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

bool all_finite(std::initializer_list<double> values) {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

/// Per-Gaussian quantities shared by every pixel it touches.
struct Prepared {
    std::uint32_t index = 0;
    double mx = 0.0, my = 0.0;
    double cos_r = 1.0, sin_r = 0.0;
    double inv_a = 1.0, inv_b = 1.0;  // exp(-2 log_scale)
    double opacity = 0.0;
    std::array<double, 3> color{};
    std::array<double, 3> color_mask{};  // d clamp(c) / dc
    std::int64_t x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel bbox
};

struct TileGrid {
    std::uint32_t tiles_x = 0;
    std::uint32_t tiles_y = 0;
    std::vector<std::vector<std::uint32_t>> lists;  // ids into the prepared array
};

std::vector<Prepared> prepare(const GaussianSet& set, std::span<const std::uint32_t> active,
                              const RenderConfig& config) {
    const double k = config.cutoff_radius_sigmas;
    std::vector<Prepared> out;
    out.reserve(active.size());
    for (std::uint32_t i : active) {
        const Gaussian2D g = set.at(i);
        if (!all_finite({g.pos[0], g.pos[1], g.log_scale[0], g.log_scale[1], g.rotation,
                         g.opacity_logit, g.color[0], g.color[1], g.color[2], g.depth_key})) {
            throw InvalidParameter("non-finite parameter on Gaussian " + std::to_string(i));
        }
        Prepared p;
        p.index = i;
        p.mx = g.pos[0];
        p.my = g.pos[1];
        p.cos_r = std::cos(g.rotation);
        p.sin_r = std::sin(g.rotation);
        p.inv_a = std::exp(-2.0 * g.log_scale[0]);
        p.inv_b = std::exp(-2.0 * g.log_scale[1]);
        p.opacity = sigmoid(g.opacity_logit);
        for (int c = 0; c < 3; ++c) {
            p.color[c] = std::clamp(g.color[c], 0.0, 1.0);
            p.color_mask[c] = (g.color[c] >= 0.0 && g.color[c] <= 1.0) ? 1.0 : 0.0;
        }
        const double sa = std::exp(2.0 * g.log_scale[0]);
        const double sb = std::exp(2.0 * g.log_scale[1]);
        const double cxx = p.cos_r * p.cos_r * sa + p.sin_r * p.sin_r * sb;
        const double cyy = p.sin_r * p.sin_r * sa + p.cos_r * p.cos_r * sb;
        const double ex = k * std::sqrt(cxx);
        const double ey = k * std::sqrt(cyy);
        // Pixel centres sit at integer + 0.5.
        const double fx0 = std::ceil(p.mx - ex - 0.5);
        const double fx1 = std::floor(p.mx + ex - 0.5);
        const double fy0 = std::ceil(p.my - ey - 0.5);
        const double fy1 = std::floor(p.my + ey - 0.5);
        const double w = set.canvas_width();
        const double h = set.canvas_height();
        if (fx1 < 0.0 || fy1 < 0.0 || fx0 > w - 1.0 || fy0 > h - 1.0 || fx0 > fx1 || fy0 > fy1) {
            continue;  // no pixel centre inside the support
        }
        p.x0 = static_cast<std::int64_t>(std::max(fx0, 0.0));
        p.x1 = static_cast<std::int64_t>(std::min(fx1, w - 1.0));
        p.y0 = static_cast<std::int64_t>(std::max(fy0, 0.0));
        p.y1 = static_cast<std::int64_t>(std::min(fy1, h - 1.0));
        out.push_back(p);
    }
    std::stable_sort(out.begin(), out.end(), [&set](const Prepared& a, const Prepared& b) {
        const double da = set.value(Plane::DepthKey, a.index);
        const double db = set.value(Plane::DepthKey, b.index);
        if (da != db) {
            return da < db;
        }
        return a.index < b.index;
    });
    return out;
}

TileGrid bin_tiles(const std::vector<Prepared>& prepared, std::uint32_t width,
                   std::uint32_t height) {
    TileGrid grid;
    grid.tiles_x = (width + kTileSize - 1) / kTileSize;
    grid.tiles_y = (height + kTileSize - 1) / kTileSize;
    grid.lists.resize(static_cast<std::size_t>(grid.tiles_x) * grid.tiles_y);
    for (std::uint32_t id = 0; id < prepared.size(); ++id) {
        const Prepared& p = prepared[id];
        const auto tx0 = static_cast<std::uint32_t>(p.x0) / kTileSize;
        const auto tx1 = static_cast<std::uint32_t>(p.x1) / kTileSize;
        const auto ty0 = static_cast<std::uint32_t>(p.y0) / kTileSize;
        const auto ty1 = static_cast<std::uint32_t>(p.y1) / kTileSize;
        for (std::uint32_t ty = ty0; ty <= ty1; ++ty) {
            for (std::uint32_t tx = tx0; tx <= tx1; ++tx) {
                grid.lists[static_cast<std::size_t>(ty) * grid.tiles_x + tx].push_back(id);
            }
        }
    }
    return grid;
}

template <typename Fn>
void for_each_tile(std::size_t tile_count, unsigned threads, Fn&& fn) {
    unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, tile_count));
    if (workers <= 1) {
        for (std::size_t t = 0; t < tile_count; ++t) {
            fn(t);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t t = next.fetch_add(1); t < tile_count; t = next.fetch_add(1)) {
                fn(t);
            }
        });
    }
}

/// Evaluated contribution of one Gaussian at one pixel.
template <typename T>
struct Sample {
    T alpha;
    T gauss;
    T ux, uy;
    bool clamped;
};

template <typename T>
bool sample_at(const Prepared& p, T px, T py, T cutoff_sq, Sample<T>& s) {
    const T dx = px - static_cast<T>(p.mx);
    const T dy = py - static_cast<T>(p.my);
    const T c = static_cast<T>(p.cos_r);
    const T sn = static_cast<T>(p.sin_r);
    s.ux = c * dx + sn * dy;
    s.uy = -sn * dx + c * dy;
    const T q = static_cast<T>(p.inv_a) * s.ux * s.ux + static_cast<T>(p.inv_b) * s.uy * s.uy;
    if (q > cutoff_sq) {
        return false;
    }
    s.gauss = std::exp(T(-0.5) * q);
    const T raw = static_cast<T>(p.opacity) * s.gauss;
    s.clamped = raw > static_cast<T>(kMaxAlpha);
    s.alpha = s.clamped ? static_cast<T>(kMaxAlpha) : raw;
    return true;
}

template <typename T>
ImageBuffer render_impl(const GaussianSet& set, std::span<const std::uint32_t> active,
                        const RenderConfig& config) {
    const std::uint32_t width = set.canvas_width();
    const std::uint32_t height = set.canvas_height();
    ImageBuffer image(width, height, config.background);
    const std::vector<Prepared> prepared = prepare(set, active, config);
    if (prepared.empty()) {
        return image;
    }
    const TileGrid grid = bin_tiles(prepared, width, height);
    const T cutoff_sq = static_cast<T>(config.cutoff_radius_sigmas * config.cutoff_radius_sigmas);

    for_each_tile(grid.lists.size(), config.threads, [&](std::size_t tile) {
        const auto& list = grid.lists[tile];
        if (list.empty()) {
            return;
        }
        const std::uint32_t tx = static_cast<std::uint32_t>(tile % grid.tiles_x) * kTileSize;
        const std::uint32_t ty = static_cast<std::uint32_t>(tile / grid.tiles_x) * kTileSize;
        const std::uint32_t xe = std::min(tx + kTileSize, width);
        const std::uint32_t ye = std::min(ty + kTileSize, height);
        for (std::uint32_t y = ty; y < ye; ++y) {
            for (std::uint32_t x = tx; x < xe; ++x) {
                const T px = static_cast<T>(x) + T(0.5);
                const T py = static_cast<T>(y) + T(0.5);
                T transmittance = 1;
                std::array<T, 3> acc{0, 0, 0};
                for (std::uint32_t id : list) {
                    const Prepared& p = prepared[id];
                    if (x < p.x0 || x > p.x1 || y < p.y0 || y > p.y1) {
                        continue;
                    }
                    Sample<T> s;
                    if (!sample_at(p, px, py, cutoff_sq, s)) {
                        continue;
                    }
                    const T w = s.alpha * transmittance;
                    for (int c = 0; c < 3; ++c) {
                        acc[c] += static_cast<T>(p.color[c]) * w;
                    }
                    transmittance *= T(1) - s.alpha;
                }
                for (int c = 0; c < 3; ++c) {
                    const T v = acc[c] + static_cast<T>(config.background[c]) * transmittance;
                    image.at(x, y, c) = std::clamp(static_cast<double>(v), 0.0, 1.0);
                }
            }
        }
    });
    return image;
}

template <typename T>
GaussianGradients backward_impl(const GaussianSet& set, std::span<const std::uint32_t> active,
                                const RenderConfig& config, const ImageBuffer& upstream) {
    const std::uint32_t width = set.canvas_width();
    const std::uint32_t height = set.canvas_height();
    GaussianGradients grads(set.size());
    const std::vector<Prepared> prepared = prepare(set, active, config);
    if (prepared.empty()) {
        return grads;
    }
    const TileGrid grid = bin_tiles(prepared, width, height);
    const T cutoff_sq = static_cast<T>(config.cutoff_radius_sigmas * config.cutoff_radius_sigmas);

    // Each tile accumulates into its own buffer; buffers are merged in tile
    // order afterwards.
    std::vector<std::vector<double>> tile_grads(grid.lists.size());

    for_each_tile(grid.lists.size(), config.threads, [&](std::size_t tile) {
        const auto& list = grid.lists[tile];
        if (list.empty()) {
            return;
        }
        std::vector<double>& local = tile_grads[tile];
        local.assign(list.size() * kNumTrainablePlanes, 0.0);

        struct Hit {
            std::uint32_t slot;
            Sample<T> s;
            T transmittance;
        };
        std::vector<Hit> hits;
        hits.reserve(list.size());

        const std::uint32_t tx = static_cast<std::uint32_t>(tile % grid.tiles_x) * kTileSize;
        const std::uint32_t ty = static_cast<std::uint32_t>(tile / grid.tiles_x) * kTileSize;
        const std::uint32_t xe = std::min(tx + kTileSize, width);
        const std::uint32_t ye = std::min(ty + kTileSize, height);
        for (std::uint32_t y = ty; y < ye; ++y) {
            for (std::uint32_t x = tx; x < xe; ++x) {
                const std::array<T, 3> up{static_cast<T>(upstream.at(x, y, 0)),
                                          static_cast<T>(upstream.at(x, y, 1)),
                                          static_cast<T>(upstream.at(x, y, 2))};
                if (up[0] == T(0) && up[1] == T(0) && up[2] == T(0)) {
                    continue;
                }
                const T px = static_cast<T>(x) + T(0.5);
                const T py = static_cast<T>(y) + T(0.5);
                hits.clear();
                T transmittance = 1;
                for (std::uint32_t slot = 0; slot < list.size(); ++slot) {
                    const Prepared& p = prepared[list[slot]];
                    if (x < p.x0 || x > p.x1 || y < p.y0 || y > p.y1) {
                        continue;
                    }
                    Sample<T> s;
                    if (!sample_at(p, px, py, cutoff_sq, s)) {
                        continue;
                    }
                    hits.push_back({slot, s, transmittance});
                    transmittance *= T(1) - s.alpha;
                }
                // Colour seen behind the current Gaussian, weighted by the
                // transmittance it is reached with.
                std::array<T, 3> behind{};
                for (int c = 0; c < 3; ++c) {
                    behind[c] = static_cast<T>(config.background[c]) * transmittance;
                }
                for (auto it = hits.rbegin(); it != hits.rend(); ++it) {
                    const Prepared& p = prepared[list[it->slot]];
                    const Sample<T>& s = it->s;
                    double* g = &local[static_cast<std::size_t>(it->slot) * kNumTrainablePlanes];
                    const T weight = s.alpha * it->transmittance;
                    T d_alpha = 0;
                    for (int c = 0; c < 3; ++c) {
                        const T col = static_cast<T>(p.color[c]);
                        g[static_cast<std::size_t>(Plane::ColorR) + c] +=
                            static_cast<double>(up[c] * weight * static_cast<T>(p.color_mask[c]));
                        d_alpha += up[c] * (col * it->transmittance - behind[c] / (T(1) - s.alpha));
                        behind[c] += col * weight;
                    }
                    if (s.clamped) {
                        continue;
                    }
                    const T o = static_cast<T>(p.opacity);
                    g[static_cast<std::size_t>(Plane::OpacityLogit)] +=
                        static_cast<double>(d_alpha * s.gauss * o * (T(1) - o));
                    // dG = -G/2 dq
                    const T d_q = d_alpha * o * s.gauss * T(-0.5);
                    const T ia = static_cast<T>(p.inv_a);
                    const T ib = static_cast<T>(p.inv_b);
                    const T c = static_cast<T>(p.cos_r);
                    const T sn = static_cast<T>(p.sin_r);
                    g[static_cast<std::size_t>(Plane::PosX)] +=
                        static_cast<double>(d_q * T(-2) * (c * ia * s.ux - sn * ib * s.uy));
                    g[static_cast<std::size_t>(Plane::PosY)] +=
                        static_cast<double>(d_q * T(-2) * (sn * ia * s.ux + c * ib * s.uy));
                    g[static_cast<std::size_t>(Plane::LogScaleX)] +=
                        static_cast<double>(d_q * T(-2) * ia * s.ux * s.ux);
                    g[static_cast<std::size_t>(Plane::LogScaleY)] +=
                        static_cast<double>(d_q * T(-2) * ib * s.uy * s.uy);
                    g[static_cast<std::size_t>(Plane::Rotation)] +=
                        static_cast<double>(d_q * T(2) * (ia - ib) * s.ux * s.uy);
                }
            }
        }
    });

    for (std::size_t tile = 0; tile < grid.lists.size(); ++tile) {
        const auto& list = grid.lists[tile];
        const std::vector<double>& local = tile_grads[tile];
        if (local.empty()) {
            continue;
        }
        for (std::size_t slot = 0; slot < list.size(); ++slot) {
            const std::uint32_t index = prepared[list[slot]].index;
            for (std::size_t k = 0; k < kNumTrainablePlanes; ++k) {
                grads.planes[k][index] += local[slot * kNumTrainablePlanes + k];
            }
        }
    }
    return grads;
}

void check_active(const GaussianSet& set, std::span<const std::uint32_t> active) {
    if (!is_strictly_ascending(active) || (!active.empty() && active.back() >= set.size())) {
        throw InvalidInput("active index set must be strictly ascending and within the set");
    }
}

void check_config(const RenderConfig& config) {
    if (!(config.cutoff_radius_sigmas > 0.0) || !std::isfinite(config.cutoff_radius_sigmas)) {
        throw InvalidParameter("cutoff_radius_sigmas must be positive");
    }
}

}  // namespace

const char* plane_name(Plane plane) {
    switch (plane) {
        case Plane::PosX: return "pos.x";
        case Plane::PosY: return "pos.y";
        case Plane::LogScaleX: return "log_scale.x";
        case Plane::LogScaleY: return "log_scale.y";
        case Plane::Rotation: return "rotation";
        case Plane::OpacityLogit: return "opacity_logit";
        case Plane::ColorR: return "color.r";
        case Plane::ColorG: return "color.g";
        case Plane::ColorB: return "color.b";
        case Plane::DepthKey: return "depth_key";
    }
    return "?";
}

double Gaussian2D::opacity() const { return sigmoid(opacity_logit); }

Covariance2D covariance_from_params(const Vec2& log_scale, double rotation) {
    if (!all_finite({log_scale[0], log_scale[1], rotation})) {
        throw InvalidParameter("covariance parameters must be finite");
    }
    const double c = std::cos(rotation);
    const double s = std::sin(rotation);
    const double a = std::exp(2.0 * log_scale[0]);
    const double b = std::exp(2.0 * log_scale[1]);
    Covariance2D out;
    out.sigma = {c * c * a + s * s * b, c * s * (a - b), s * s * a + c * c * b};
    const double ia = 1.0 / a;
    const double ib = 1.0 / b;
    out.inverse = {c * c * ia + s * s * ib, c * s * (ia - ib), s * s * ia + c * c * ib};
    out.det = a * b;
    return out;
}

double eval_gaussian(const Gaussian2D& gaussian, const Vec2& x) {
    const Covariance2D cov = covariance_from_params(gaussian.log_scale, gaussian.rotation);
    const double dx = x[0] - gaussian.pos[0];
    const double dy = x[1] - gaussian.pos[1];
    if (!all_finite({dx, dy})) {
        throw InvalidParameter("evaluation point must be finite");
    }
    const double q = cov.inverse.xx * dx * dx + 2.0 * cov.inverse.xy * dx * dy +
                     cov.inverse.yy * dy * dy;
    return std::exp(-0.5 * q);
}

GaussianSet::GaussianSet(std::uint32_t canvas_width, std::uint32_t canvas_height)
    : width_(canvas_width), height_(canvas_height) {
    if (canvas_width == 0 || canvas_height == 0) {
        throw InvalidParameter("canvas dimensions must be positive");
    }
}

void GaussianSet::push_back(const Gaussian2D& g) {
    planes_[0].push_back(g.pos[0]);
    planes_[1].push_back(g.pos[1]);
    planes_[2].push_back(g.log_scale[0]);
    planes_[3].push_back(g.log_scale[1]);
    planes_[4].push_back(g.rotation);
    planes_[5].push_back(g.opacity_logit);
    planes_[6].push_back(g.color[0]);
    planes_[7].push_back(g.color[1]);
    planes_[8].push_back(g.color[2]);
    planes_[9].push_back(g.depth_key);
}

void GaussianSet::resize(std::size_t count) {
    for (auto& p : planes_) {
        p.resize(count, 0.0);
    }
}

Gaussian2D GaussianSet::at(std::size_t i) const {
    Gaussian2D g;
    g.pos = {planes_[0][i], planes_[1][i]};
    g.log_scale = {planes_[2][i], planes_[3][i]};
    g.rotation = planes_[4][i];
    g.opacity_logit = planes_[5][i];
    g.color = {planes_[6][i], planes_[7][i], planes_[8][i]};
    g.depth_key = planes_[9][i];
    return g;
}

void GaussianSet::set(std::size_t i, const Gaussian2D& g) {
    planes_[0][i] = g.pos[0];
    planes_[1][i] = g.pos[1];
    planes_[2][i] = g.log_scale[0];
    planes_[3][i] = g.log_scale[1];
    planes_[4][i] = g.rotation;
    planes_[5][i] = g.opacity_logit;
    planes_[6][i] = g.color[0];
    planes_[7][i] = g.color[1];
    planes_[8][i] = g.color[2];
    planes_[9][i] = g.depth_key;
}

GaussianSet GaussianSet::subset(std::span<const std::uint32_t> indices) const {
    GaussianSet out(width_, height_);
    for (std::size_t p = 0; p < kNumPlanes; ++p) {
        out.planes_[p].reserve(indices.size());
        for (std::uint32_t i : indices) {
            out.planes_[p].push_back(planes_[p].at(i));
        }
    }
    return out;
}

ImageBuffer::ImageBuffer(std::uint32_t width, std::uint32_t height, const Vec3& fill)
    : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height * 3) {
    if (width == 0 || height == 0) {
        throw InvalidParameter("image dimensions must be positive");
    }
    for (std::size_t i = 0; i < data_.size(); i += 3) {
        data_[i] = fill[0];
        data_[i + 1] = fill[1];
        data_[i + 2] = fill[2];
    }
}

GaussianGradients::GaussianGradients(std::size_t count) {
    for (auto& p : planes) {
        p.assign(count, 0.0);
    }
}

double GaussianGradients::norm(std::size_t i) const {
    double sum = 0.0;
    for (const auto& p : planes) {
        sum += p[i] * p[i];
    }
    return std::sqrt(sum);
}

ImageBuffer render(const GaussianSet& set, const RenderConfig& config) {
    const IndexSet all = full_index_set(set.size());
    return render(set, all, config);
}

ImageBuffer render(const GaussianSet& set, std::span<const std::uint32_t> active,
                   const RenderConfig& config) {
    check_config(config);
    check_active(set, active);
    if (config.precision == Precision::Float) {
        return render_impl<float>(set, active, config);
    }
    return render_impl<double>(set, active, config);
}

GaussianGradients render_backward(const GaussianSet& set, const RenderConfig& config,
                                  const ImageBuffer& upstream) {
    const IndexSet all = full_index_set(set.size());
    return render_backward(set, all, config, upstream);
}

GaussianGradients render_backward(const GaussianSet& set, std::span<const std::uint32_t> active,
                                  const RenderConfig& config, const ImageBuffer& upstream) {
    check_config(config);
    check_active(set, active);
    if (upstream.width() != set.canvas_width() || upstream.height() != set.canvas_height()) {
        throw InvalidInput("upstream gradient dimensions do not match the canvas");
    }
    if (config.precision == Precision::Float) {
        return backward_impl<float>(set, active, config, upstream);
    }
    return backward_impl<double>(set, active, config, upstream);
}

}  // namespace rave
