#include "test_support.hpp"

#include <cmath>
#include <numbers>

#include "cli.hpp"
#include "rave/image_io.hpp"

namespace rave::testing {

std::filesystem::path data_dir() { return RAVE_TEST_DATA_DIR; }

ImageBuffer fixture_image() { return read_image(data_dir() / "astronaut_64.png"); }

double uniform(std::mt19937_64& rng, double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

GaussianSet random_set(std::mt19937_64& rng, std::size_t count, std::uint32_t width,
                       std::uint32_t height) {
    GaussianSet set(width, height);
    for (std::size_t i = 0; i < count; ++i) {
        Gaussian2D g;
        g.pos = {uniform(rng, 0.0, width), uniform(rng, 0.0, height)};
        g.log_scale = {uniform(rng, 0.0, 1.2), uniform(rng, 0.0, 1.2)};
        g.rotation = uniform(rng, -std::numbers::pi, std::numbers::pi);
        g.opacity_logit = uniform(rng, -2.0, 2.0);
        g.color = {uniform(rng, 0.05, 0.95), uniform(rng, 0.05, 0.95), uniform(rng, 0.05, 0.95)};
        g.depth_key = uniform(rng, 0.0, 100.0);
        set.push_back(g);
    }
    return set;
}

ImageBuffer random_image(std::mt19937_64& rng, std::uint32_t width, std::uint32_t height) {
    ImageBuffer img(width, height);
    for (double& v : img.data()) {
        v = uniform(rng, 0.0, 1.0);
    }
    return img;
}

double relative_error(double a, double b, double floor) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

double central_difference(double& x, const std::function<double()>& f, double h) {
    const double saved = x;
    x = saved + h;
    const double up = f();
    x = saved - h;
    const double down = f();
    x = saved;
    return (up - down) / (2.0 * h);
}

ImageBuffer small_target() {
    const ImageBuffer full = fixture_image();
    ImageBuffer half(32, 32);
    for (std::uint32_t y = 0; y < 32; ++y) {
        for (std::uint32_t x = 0; x < 32; ++x) {
            for (int c = 0; c < 3; ++c) {
                half.at(x, y, c) = 0.25 * (full.at(2 * x, 2 * y, c) + full.at(2 * x + 1, 2 * y, c) +
                                           full.at(2 * x, 2 * y + 1, c) +
                                           full.at(2 * x + 1, 2 * y + 1, c));
            }
        }
    }
    return half;
}

const GaussianSet& small_trained_set() {
    static const GaussianSet set = [] {
        TrainConfig cfg;
        cfg.num_gaussians = 128;
        cfg.iterations = 300;
        return round_to_float(train(small_target(), cfg).set);
    }();
    return set;
}

const Checkpoint& small_pipeline_model() {
    static const Checkpoint model = [] {
        Checkpoint cp;
        cp.set = small_trained_set();
        cp.target = small_target();
        return cli::run_pipeline(std::move(cp), {});
    }();
    return model;
}

GaussianSet golden_set() {
    GaussianSet set(64, 48);
    for (std::uint32_t i = 0; i < 40; ++i) {
        Gaussian2D g;
        g.pos = {(i * 37 % 64) + 0.25, (i * 11 % 48) + 0.5};
        g.log_scale = {(static_cast<double>(i % 9) - 4.0) / 8.0, (static_cast<double>(i % 5) - 2.0) / 4.0};
        g.rotation = (static_cast<double>(i % 13) - 6.0) / 4.0;
        g.opacity_logit = (static_cast<double>(i % 7) - 3.0) / 2.0;
        g.color = {(i % 17) / 16.0, (i % 3) / 2.0, (i * 5 % 11) / 10.0};
        g.depth_key = static_cast<double>(i * 3 % 40);
        set.push_back(g);
    }
    return set;
}

Bytes golden_subset_stream() {
    IndexSet subset;
    for (std::uint32_t i = 0; i < 40; i += 3) {
        subset.push_back(i);
    }
    return encode_subset(golden_set(), subset, QuantSpec::defaults(), {2});
}

Bytes golden_stored_stream() {
    QuantSpec spec = QuantSpec::defaults();
    for (QuantPlane& p : spec.planes) {
        p.min = -8.0f;
        p.max = 72.0f;
    }
    spec.pinned_ranges = true;
    return encode_subset(golden_set(), full_index_set(40), spec, {}, StoreBackend{});
}

std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("rave_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace rave::testing
