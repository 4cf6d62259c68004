#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rave/model_file.hpp"
#include "rave/trainer.hpp"

namespace rave::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitUsage = 2,
    kExitIo = 3,
    kExitFormat = 4,
    kExitDiverged = 5,
    kExitRateOutOfRange = 6,
};

/// Maps a library exception to the process exit code.
int exit_code_for(const std::exception& error);

/// One point of a rate-distortion sweep.
struct SweepRow {
    std::string mode;
    std::uint64_t target_rate_bytes = 0;
    std::uint64_t achieved_rate_bytes = 0;
    std::uint64_t num_gaussians = 0;
    std::uint32_t anchor_level = 0;
    double psnr_db = 0.0;
    double ssim = 0.0;

    friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

inline constexpr std::string_view kCsvHeader =
    "mode,target_rate_bytes,achieved_rate_bytes,num_gaussians,anchor_level,psnr_db,ssim";

/// Header line plus one line per row; reals at 9 significant digits.
std::string format_csv(std::span<const SweepRow> rows);
/// Inverse of format_csv. Throws FormatError on a wrong header or malformed row.
std::vector<SweepRow> parse_csv(std::string_view text);

/// Self-contained SVG line plot, one polyline per mode, rate on x and PSNR on y.
std::string format_svg(std::span<const SweepRow> rows);

/// Consecutive pairs whose PSNR drops by more than `tolerance_db`.
std::size_t count_dips(std::span<const SweepRow> rows, double tolerance_db = 0.2);

/// `points` targets from R(G_1) to R(G_L) inclusive, evenly spaced.
std::vector<std::uint64_t> evenly_spaced_rates(const RateTable& table, std::uint32_t points);
/// `points` targets per adjacent anchor pair, both anchors included, shared
/// endpoints listed once.
std::vector<std::uint64_t> per_pair_rates(const RateTable& table, std::uint32_t points);
std::vector<std::uint64_t> anchor_rate_targets(const RateTable& table);

/// A checkpoint carrying everything the rate-adaptive commands need.
void require_pipeline_outputs(const Checkpoint& checkpoint);

struct PipelineOptions {
    LevelSpec levels;
    FinetuneConfig finetune;
    RenderConfig render;
};

/// Ranks the model, cuts the hierarchy, fine-tunes, measures anchor rates and
/// precomputes the local context scores. Needs `checkpoint.target`.
Checkpoint run_pipeline(Checkpoint checkpoint, const PipelineOptions& options,
                        const ProgressFn& progress = {});

/// encode_at_rate -> decode -> render -> metrics for every target. Rows are
/// handed to `on_row` as they complete, so a failure leaves the earlier ones.
std::vector<SweepRow> run_sweep(Checkpoint& checkpoint, std::span<const std::uint64_t> targets,
                                ContextMode mode, const RenderConfig& render = {},
                                const std::function<void(const SweepRow&)>& on_row = {});

/// Anchor-only sweep over a hierarchy rebuilt with `levels` uniform fractions
/// from the checkpoint's ranking, with a context ordering computed for every
/// anchor.
struct MultiAnchorResult {
    std::vector<SweepRow> rows;
    std::size_t scoring_passes = 0;
};
MultiAnchorResult run_multi_anchor(const Checkpoint& checkpoint, std::uint32_t levels,
                                   const RenderConfig& render = {});

/// Entry point: `args` excludes the program name.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace rave::cli
