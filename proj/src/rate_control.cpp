#include "rave/rate_control.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "rave/errors.hpp"

namespace rave {

namespace {

__extension__ using u128 = unsigned __int128;

/// n0 + round_half_up((t - r0) / (r1 - r0) * (n1 - n0)) with t clamped to [r0, r1].
std::uint64_t interpolate_count(std::uint64_t r0, std::uint64_t n0, std::uint64_t r1,
                                std::uint64_t n1, std::uint64_t t) {
    if (r1 <= r0) {
        throw InvalidTable("degenerate rate table: R(G_{l+1}) must exceed R(G_l)");
    }
    if (n1 < n0) {
        throw InvalidTable("counts must increase with the level");
    }
    t = std::clamp(t, r0, r1);
    const u128 num = static_cast<u128>(t - r0) * (n1 - n0);
    const u128 den = r1 - r0;
    const u128 q = (2 * num + den) / (2 * den);
    return n0 + static_cast<std::uint64_t>(q);
}

}  // namespace

void RateTable::validate() const {
    if (rates.empty() || rates.size() != counts.size()) {
        throw InvalidTable("rate table needs one rate and one count per level");
    }
    for (std::size_t i = 0; i < rates.size(); ++i) {
        if (rates[i] == 0) {
            throw InvalidTable("anchor rates must be positive");
        }
        if (i > 0 && counts[i] <= counts[i - 1]) {
            throw InvalidTable("anchor counts must strictly increase");
        }
    }
}

RateTable anchor_rates(const GaussianSet& set, const AnchorHierarchy& hierarchy,
                       const QuantSpec& spec) {
    RateTable table;
    for (std::uint32_t l = 1; l <= hierarchy.num_levels(); ++l) {
        const IndexSet& g = hierarchy.level(l);
        table.rates.push_back(measure_rate(set, g, spec));
        table.counts.push_back(g.size());
    }
    table.validate();
    return table;
}

AnchorLocation locate_anchor(const RateTable& table, std::uint64_t target_rate, bool clamp_below) {
    table.validate();
    AnchorLocation loc;
    if (target_rate < table.rates.front()) {
        if (!clamp_below) {
            throw RateOutOfRange("target rate " + std::to_string(target_rate) +
                                 " B is below the lowest anchor (" +
                                 std::to_string(table.rates.front()) + " B)");
        }
        loc.level = 1;
        loc.clamped_below = true;
        return loc;
    }
    const auto rit = std::find_if(table.rates.rbegin(), table.rates.rend(),
                                  [target_rate](std::uint64_t r) { return r <= target_rate; });
    loc.level = static_cast<std::uint32_t>(table.rates.rend() - rit);
    loc.clamped_above = target_rate > table.rates.back();
    return loc;
}

std::uint64_t target_count(const RateTable& table, std::uint32_t l, std::uint64_t target_rate) {
    table.validate();
    if (l < 1 || l > table.num_levels()) {
        throw InvalidInput("level " + std::to_string(l) + " out of range");
    }
    if (l == table.num_levels()) {
        return table.count(l);
    }
    return interpolate_count(table.rate(l), table.count(l), table.rate(l + 1), table.count(l + 1),
                             target_rate);
}

IndexSet select_delta(const ScoreTable& context_table, std::size_t budget) {
    const std::size_t n = context_table.scope.size();
    if (budget > n) {
        throw InvalidInput("budget " + std::to_string(budget) + " exceeds context size " +
                           std::to_string(n));
    }
    std::vector<std::size_t> pos(n);
    std::iota(pos.begin(), pos.end(), std::size_t{0});
    std::partial_sort(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(budget), pos.end(),
                      [&context_table](std::size_t a, std::size_t b) {
                          const double sa = context_table.scores[a];
                          const double sb = context_table.scores[b];
                          if (sa != sb) {
                              return sa > sb;
                          }
                          return context_table.scope[a] < context_table.scope[b];
                      });
    IndexSet out;
    out.reserve(budget);
    for (std::size_t k = 0; k < budget; ++k) {
        out.push_back(context_table.scope[pos[k]]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

RateController::RateController(const GaussianSet& set, AnchorHierarchy& hierarchy, QuantSpec spec,
                               const ImageBuffer& target, LossConfig loss, RenderConfig render)
    : RateController(set, hierarchy, spec, target, anchor_rates(set, hierarchy, spec), loss,
                     render) {}

RateController::RateController(const GaussianSet& set, AnchorHierarchy& hierarchy, QuantSpec spec,
                               const ImageBuffer& target, RateTable table, LossConfig loss,
                               RenderConfig render)
    : set_(set),
      hierarchy_(hierarchy),
      spec_(spec),
      target_(target),
      loss_(loss),
      render_(render),
      table_(std::move(table)) {
    table_.validate();
    if (table_.num_levels() != hierarchy_.num_levels()) {
        throw InvalidTable("rate table and hierarchy disagree on the number of levels");
    }
    if (hierarchy_.total_count() != set_.size()) {
        throw InvalidInput("hierarchy was not built over this set");
    }
}

IndexSet RateController::select_count(std::uint32_t l, std::uint64_t count, ContextMode mode) {
    const IndexSet& base = hierarchy_.level(l);
    const std::uint64_t budget = count - base.size();
    if (budget == 0) {
        return base;
    }
    const ScoreTable& ctx = context_scores(hierarchy_, l + 1, set_, target_, loss_, mode, render_);
    return set_union(base, select_delta(ctx, static_cast<std::size_t>(budget)));
}

IndexSet RateController::select(std::uint64_t target_rate, const RateControlOptions& options,
                                RateReport* report) {
    const AnchorLocation loc = locate_anchor(table_, target_rate, options.clamp_below);
    const std::uint32_t l = loc.level;
    RateReport r;
    r.target_rate = target_rate;
    r.level = l;
    if (loc.clamped_above) {
        r.warning = "target above the top anchor rate; clamped to level " + std::to_string(l);
    } else if (loc.clamped_below) {
        r.warning = "target below the lowest anchor rate; clamped to level 1";
    }

    std::uint64_t count = table_.count(l);
    if (!loc.clamped_above && !loc.clamped_below && l < table_.num_levels()) {
        count = target_count(table_, l, target_rate);
    }
    IndexSet selected = select_count(l, count, options.mode);

    if (options.one_step_correction && count > table_.count(l) &&
        count < table_.count(l + 1)) {
        const std::uint64_t achieved = measure_rate(set_, selected, spec_);
        std::uint64_t corrected = count;
        if (achieved > target_rate && achieved > table_.rate(l)) {
            corrected = interpolate_count(table_.rate(l), table_.count(l), achieved, count,
                                          target_rate);
        } else if (achieved < target_rate && achieved < table_.rate(l + 1)) {
            corrected = interpolate_count(achieved, count, table_.rate(l + 1), table_.count(l + 1),
                                          target_rate);
        }
        if (corrected != count) {
            count = corrected;
            selected = select_count(l, count, options.mode);
        }
    }
    r.count = selected.size();
    r.interpolated = count != table_.count(l);
    if (report != nullptr) {
        *report = r;
    }
    return selected;
}

RateEncoding RateController::encode_at_rate(std::uint64_t target_rate,
                                            const RateControlOptions& options) {
    RateEncoding out;
    out.selected = select(target_rate, options, &out.report);
    EncodeMetadata meta;
    meta.anchor_level = out.report.interpolated
                            ? kLevelInterpolated
                            : static_cast<std::uint8_t>(std::min<std::uint32_t>(out.report.level, 254));
    out.bitstream = encode_subset(set_, out.selected, spec_, meta);
    out.report.achieved_rate = out.bitstream.size();
    return out;
}

Bytes RateController::encode_anchor(std::uint32_t l) const {
    return encode_subset(set_, hierarchy_.level(l), spec_,
                         {static_cast<std::uint8_t>(std::min<std::uint32_t>(l, 254))});
}

}  // namespace rave
