#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rave/index_set.hpp"

namespace rave {

using Vec2 = std::array<double, 2>;
using Vec3 = std::array<double, 3>;

/// Attribute planes of a GaussianSet, in storage and bitstream order.
enum class Plane : std::uint8_t {
    PosX = 0,
    PosY,
    LogScaleX,
    LogScaleY,
    Rotation,
    OpacityLogit,
    ColorR,
    ColorG,
    ColorB,
    DepthKey,
};

inline constexpr std::size_t kNumPlanes = 10;
/// Every plane except DepthKey receives gradients.
inline constexpr std::size_t kNumTrainablePlanes = 9;

const char* plane_name(Plane plane);

/// One primitive on the image plane. Scale and opacity are stored through
/// exp / sigmoid so every field is unconstrained.
struct Gaussian2D {
    Vec2 pos{0.0, 0.0};        ///< pixels, canvas coordinates
    Vec2 log_scale{0.0, 0.0};  ///< s = exp(log_scale), pixels
    double rotation = 0.0;     ///< radians
    double opacity_logit = 0.0;
    Vec3 color{0.0, 0.0, 0.0};  ///< linear RGB, clamped to [0,1] at render
    double depth_key = 0.0;     ///< smaller = nearer

    double opacity() const;
};

/// Symmetric 2x2 matrix stored as (xx, xy, yy).
struct Sym2 {
    double xx = 0.0;
    double xy = 0.0;
    double yy = 0.0;
};

struct Covariance2D {
    Sym2 sigma;
    Sym2 inverse;
    double det = 0.0;
};

/// Sigma = R S S^T R^T with S = diag(exp(log_scale)).
/// Throws InvalidParameter on non-finite input.
Covariance2D covariance_from_params(const Vec2& log_scale, double rotation);

/// G(x) = exp(-1/2 (x-pos)^T Sigma^-1 (x-pos)). The blending weight is o * G.
double eval_gaussian(const Gaussian2D& gaussian, const Vec2& x);

/// Structure-of-arrays scene. Gaussian i keeps index i for its whole life.
class GaussianSet {
public:
    GaussianSet() = default;
    GaussianSet(std::uint32_t canvas_width, std::uint32_t canvas_height);

    std::size_t size() const { return planes_[0].size(); }
    bool empty() const { return size() == 0; }
    std::uint32_t canvas_width() const { return width_; }
    std::uint32_t canvas_height() const { return height_; }

    void push_back(const Gaussian2D& g);
    void resize(std::size_t count);
    Gaussian2D at(std::size_t i) const;
    void set(std::size_t i, const Gaussian2D& g);

    std::span<double> plane(Plane p) { return planes_[static_cast<std::size_t>(p)]; }
    std::span<const double> plane(Plane p) const { return planes_[static_cast<std::size_t>(p)]; }
    double& value(Plane p, std::size_t i) { return planes_[static_cast<std::size_t>(p)][i]; }
    double value(Plane p, std::size_t i) const {
        return planes_[static_cast<std::size_t>(p)][i];
    }

    /// Copy of the Gaussians in `indices`, renumbered 0..n-1 in ascending order.
    GaussianSet subset(std::span<const std::uint32_t> indices) const;

    friend bool operator==(const GaussianSet&, const GaussianSet&) = default;

private:
    std::uint32_t width_ = 0;
    std::uint32_t height_ = 0;
    std::array<std::vector<double>, kNumPlanes> planes_;
};

/// Row-major RGB image with channels in [0,1].
class ImageBuffer {
public:
    ImageBuffer() = default;
    ImageBuffer(std::uint32_t width, std::uint32_t height, const Vec3& fill = {0.0, 0.0, 0.0});

    std::uint32_t width() const { return width_; }
    std::uint32_t height() const { return height_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
    /// Number of scalar channel values, 3 * width * height.
    std::size_t size() const { return data_.size(); }

    double& at(std::uint32_t x, std::uint32_t y, int c) {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
    }
    double at(std::uint32_t x, std::uint32_t y, int c) const {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
    }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    bool same_shape(const ImageBuffer& other) const {
        return width_ == other.width_ && height_ == other.height_;
    }

    friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

private:
    std::uint32_t width_ = 0;
    std::uint32_t height_ = 0;
    std::vector<double> data_;
};

enum class Precision : std::uint8_t {
    Double,
    Float,  ///< single-precision evaluation; not suitable for gradient checks
};

struct RenderConfig {
    Vec3 background{0.0, 0.0, 0.0};
    double cutoff_radius_sigmas = 3.0;
    Precision precision = Precision::Double;
    /// Worker threads for tile processing; 0 picks hardware concurrency.
    unsigned threads = 1;
};

/// Opacity is clamped to this before compositing.
inline constexpr double kMaxAlpha = 0.999;

/// Per-parameter gradients, one array per trainable plane.
struct GaussianGradients {
    std::array<std::vector<double>, kNumTrainablePlanes> planes;

    explicit GaussianGradients(std::size_t count = 0);
    std::size_t size() const { return planes[0].size(); }
    std::span<double> plane(Plane p) { return planes[static_cast<std::size_t>(p)]; }
    std::span<const double> plane(Plane p) const { return planes[static_cast<std::size_t>(p)]; }
    double value(Plane p, std::size_t i) const { return planes[static_cast<std::size_t>(p)][i]; }
    /// L2 norm over the 9 parameter gradients of Gaussian i.
    double norm(std::size_t i) const;
};

/// Front-to-back alpha compositing of every Gaussian.
ImageBuffer render(const GaussianSet& set, const RenderConfig& config);

/// Same, restricted to the Gaussians in `active` (strictly ascending).
ImageBuffer render(const GaussianSet& set, std::span<const std::uint32_t> active,
                   const RenderConfig& config);

/// Exact gradient of sum(upstream * render(set)) w.r.t. every trainable
/// parameter. `upstream` has the layout of an ImageBuffer of the canvas size.
/// Gaussians outside `active` get zero gradients.
GaussianGradients render_backward(const GaussianSet& set, const RenderConfig& config,
                                  const ImageBuffer& upstream);

GaussianGradients render_backward(const GaussianSet& set, std::span<const std::uint32_t> active,
                                  const RenderConfig& config, const ImageBuffer& upstream);

}  // namespace rave
