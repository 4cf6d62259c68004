#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rave/codec.hpp"
#include "rave/hierarchy.hpp"

namespace rave {

/// Measured bitstream size and Gaussian count of every anchor.
struct RateTable {
    std::vector<std::uint64_t> rates;   ///< R(G_l), bytes
    std::vector<std::uint64_t> counts;  ///< |G_l|

    std::uint32_t num_levels() const { return static_cast<std::uint32_t>(rates.size()); }
    std::uint64_t rate(std::uint32_t l) const { return rates.at(l - 1); }
    std::uint64_t count(std::uint32_t l) const { return counts.at(l - 1); }

    /// Throws InvalidTable unless counts strictly increase and rates are positive.
    void validate() const;

    friend bool operator==(const RateTable&, const RateTable&) = default;
};

/// R(G_l) = measure_rate(set, G_l, spec) for every level.
RateTable anchor_rates(const GaussianSet& set, const AnchorHierarchy& hierarchy,
                       const QuantSpec& spec);

struct AnchorLocation {
    std::uint32_t level = 1;
    /// Target exceeded R(G_L) and was clamped to the top anchor.
    bool clamped_above = false;
    /// Target was below R(G_1) and clamp_below was requested.
    bool clamped_below = false;
};

/// Largest l with R(G_l) <= target. Below R(G_1) throws RateOutOfRange
/// unless `clamp_below`; above R(G_L) clamps to L and flags it.
AnchorLocation locate_anchor(const RateTable& table, std::uint64_t target_rate,
                             bool clamp_below = false);

/// |G_l| + round_half_up((target - R_l) / (R_{l+1} - R_l) * (|G_{l+1}| - |G_l|)),
/// evaluated in exact integer arithmetic and clamped to [|G_l|, |G_{l+1}|].
/// Returns |G_L| for l = L. Throws InvalidTable when R_{l+1} == R_l.
std::uint64_t target_count(const RateTable& table, std::uint32_t l, std::uint64_t target_rate);

/// The first `budget` indices of rank_descending(context_table).
IndexSet select_delta(const ScoreTable& context_table, std::size_t budget);

struct RateReport {
    std::uint64_t target_rate = 0;
    std::uint64_t achieved_rate = 0;
    std::uint32_t level = 0;          ///< anchor l the interpolation starts from
    std::uint64_t count = 0;          ///< Gaussians encoded
    bool interpolated = false;        ///< false when exactly an anchor was sent
    std::optional<std::string> warning;
};

struct RateEncoding {
    Bytes bitstream;
    IndexSet selected;
    RateReport report;
};

struct RateControlOptions {
    ContextMode mode = ContextMode::Local;
    bool clamp_below = false;
    /// Re-interpolate once using the achieved rate as an extra sample.
    bool one_step_correction = false;
};

/// Encodes a fine-tuned set at arbitrary byte rates. Context scores are
/// computed lazily through the hierarchy's cache, so a sweep of any length
/// within one anchor pair costs a single scoring pass.
class RateController {
public:
    RateController(const GaussianSet& set, AnchorHierarchy& hierarchy, QuantSpec spec,
                   const ImageBuffer& target, LossConfig loss = {}, RenderConfig render = {});

    /// Uses a previously measured table instead of measuring anchors.
    RateController(const GaussianSet& set, AnchorHierarchy& hierarchy, QuantSpec spec,
                   const ImageBuffer& target, RateTable table, LossConfig loss = {},
                   RenderConfig render = {});

    const RateTable& table() const { return table_; }
    const QuantSpec& spec() const { return spec_; }

    /// Selection for `target_rate` without encoding.
    IndexSet select(std::uint64_t target_rate, const RateControlOptions& options,
                    RateReport* report = nullptr);

    RateEncoding encode_at_rate(std::uint64_t target_rate, const RateControlOptions& options = {});

    /// Bitstream of anchor l exactly.
    Bytes encode_anchor(std::uint32_t l) const;

private:
    IndexSet select_count(std::uint32_t l, std::uint64_t count, ContextMode mode);

    const GaussianSet& set_;
    AnchorHierarchy& hierarchy_;
    QuantSpec spec_;
    const ImageBuffer& target_;
    LossConfig loss_;
    RenderConfig render_;
    RateTable table_;
};

}  // namespace rave
