#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <utility>
#include <vector>

#include "rave/importance.hpp"

namespace rave {

/// Fractions of the Gaussian count kept at each anchor: strictly ascending in
/// (0,1], last exactly 1.
struct LevelSpec {
    std::vector<double> fractions{0.2, 0.4, 0.6, 0.8, 1.0};

    /// `levels` evenly spaced fractions k / levels.
    static LevelSpec uniform(std::uint32_t levels);
    void validate() const;
};

enum class ContextMode : std::uint8_t {
    Local = 0,   ///< render G_l only
    Global = 1,  ///< render the full model G_L
};

const char* context_mode_name(ContextMode mode);

/// Nested anchors G_1 < G_2 < ... < G_L = all, built from disjoint contexts
/// C_l = G_l \ G_{l-1}. Levels are 1-based throughout.
class AnchorHierarchy {
public:
    AnchorHierarchy() = default;

    /// Validates disjointness, non-empty contexts and full coverage of
    /// 0..total_count-1; throws InvalidSpec otherwise.
    static AnchorHierarchy from_contexts(std::vector<IndexSet> contexts, std::size_t total_count,
                                         std::vector<double> fractions = {});

    AnchorHierarchy(const AnchorHierarchy& other);
    AnchorHierarchy& operator=(const AnchorHierarchy& other);
    AnchorHierarchy(AnchorHierarchy&&) noexcept = default;
    AnchorHierarchy& operator=(AnchorHierarchy&&) noexcept = default;

    std::uint32_t num_levels() const { return static_cast<std::uint32_t>(contexts_.size()); }
    std::size_t total_count() const { return total_count_; }
    const std::vector<double>& fractions() const { return fractions_; }

    const IndexSet& context(std::uint32_t l) const;
    const IndexSet& level(std::uint32_t l) const;

    /// Cached context scores for (l, mode), or nullptr.
    const ScoreTable* cached_scores(std::uint32_t l, ContextMode mode) const;
    /// Returns the cached table, computing it with `compute` on a miss.
    /// Each miss counts as one scoring pass.
    template <typename Fn>
    const ScoreTable& scores_or_compute(std::uint32_t l, ContextMode mode, Fn&& compute);
    void store_scores(std::uint32_t l, ContextMode mode, ScoreTable table);
    std::vector<std::pair<std::pair<std::uint32_t, ContextMode>, const ScoreTable*>> all_cached()
        const;

    /// Context scoring passes run through this hierarchy's cache.
    std::size_t scoring_passes() const;

private:
    struct Cache {
        mutable std::shared_mutex mutex;
        std::map<std::pair<std::uint32_t, ContextMode>, std::unique_ptr<ScoreTable>> tables;
        std::size_t passes = 0;
    };

    void check_level(std::uint32_t l) const;

    std::vector<IndexSet> contexts_;
    std::vector<IndexSet> levels_;
    std::vector<double> fractions_;
    std::size_t total_count_ = 0;
    std::unique_ptr<Cache> cache_ = std::make_unique<Cache>();
};

template <typename Fn>
const ScoreTable& AnchorHierarchy::scores_or_compute(std::uint32_t l, ContextMode mode,
                                                     Fn&& compute) {
    const auto key = std::make_pair(l, mode);
    {
        std::shared_lock lock(cache_->mutex);
        if (auto it = cache_->tables.find(key); it != cache_->tables.end()) {
            return *it->second;
        }
    }
    std::unique_lock lock(cache_->mutex);
    if (auto it = cache_->tables.find(key); it != cache_->tables.end()) {
        return *it->second;
    }
    auto table = std::make_unique<ScoreTable>(compute());
    ++cache_->passes;
    const ScoreTable& ref = *table;
    cache_->tables.emplace(key, std::move(table));
    return ref;
}

/// Hierarchy from a precomputed ranking table: G_l = top ceil(f_l * count)
/// of rank_descending(scores). The table must cover every Gaussian.
AnchorHierarchy build_hierarchy_from_scores(const ScoreTable& scores, std::size_t count,
                                            const LevelSpec& spec);

/// Scores every Gaussian once against `target` with the full set rendered,
/// then nests the top-ranked fractions.
AnchorHierarchy build_hierarchy(const GaussianSet& set, const LevelSpec& spec,
                                const ImageBuffer& target, const LossConfig& loss,
                                const RenderConfig& render = {});

/// Scores C_l with rendering restricted to G_l (Local) or to G_L (Global).
/// Cached in the hierarchy by (l, mode). Requires 2 <= l <= L.
const ScoreTable& context_scores(AnchorHierarchy& hierarchy, std::uint32_t l,
                                 const GaussianSet& set, const ImageBuffer& target,
                                 const LossConfig& loss, ContextMode mode,
                                 const RenderConfig& render = {});

}  // namespace rave
