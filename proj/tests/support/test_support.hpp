#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>

#include "rave/model_file.hpp"
#include "rave/splat.hpp"

namespace rave::testing {

/// Directory holding the committed fixtures.
std::filesystem::path data_dir();

/// The 64x64 astronaut crop used by the end-to-end checks.
ImageBuffer fixture_image();

/// Uniform double in [lo, hi) built directly from raw engine output.
double uniform(std::mt19937_64& rng, double lo, double hi);

/// Random Gaussians with opacities and colours kept away from the clamps.
GaussianSet random_set(std::mt19937_64& rng, std::size_t count, std::uint32_t width,
                       std::uint32_t height);

ImageBuffer random_image(std::mt19937_64& rng, std::uint32_t width, std::uint32_t height);

/// |a - b| / max(|a|, |b|, floor)
double relative_error(double a, double b, double floor = 1e-6);

/// Central difference of `f` around `x` with step `h`; `x` is restored.
double central_difference(double& x, const std::function<double()>& f, double h = 1e-5);

/// The fixture downsampled 2x2 to 32x32.
ImageBuffer small_target();

/// 128 Gaussians trained for 300 iterations on small_target(), rounded to
/// float. Built once per process.
const GaussianSet& small_trained_set();

/// small_trained_set() with its target, run through the default pipeline.
const Checkpoint& small_pipeline_model();

/// 40 Gaussians on a 64x48 canvas built from integer arithmetic only, so
/// the input is identical on every platform.
GaussianSet golden_set();
/// Every third golden Gaussian, default spec, LZMA, anchor level 2.
Bytes golden_subset_stream();
/// All golden Gaussians on a pinned [-8, 72] grid, stored without compression.
Bytes golden_stored_stream();

/// Fresh scratch directory under the system temp path.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace rave::testing
