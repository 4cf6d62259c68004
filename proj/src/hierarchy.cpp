#include "rave/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rave/errors.hpp"

namespace rave {

LevelSpec LevelSpec::uniform(std::uint32_t levels) {
    if (levels == 0) {
        throw InvalidSpec("at least one level is required");
    }
    LevelSpec spec;
    spec.fractions.clear();
    for (std::uint32_t k = 1; k <= levels; ++k) {
        spec.fractions.push_back(static_cast<double>(k) / levels);
    }
    spec.fractions.back() = 1.0;
    return spec;
}

void LevelSpec::validate() const {
    if (fractions.empty()) {
        throw InvalidSpec("level fractions must not be empty");
    }
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        if (!(fractions[i] > 0.0 && fractions[i] <= 1.0)) {
            throw InvalidSpec("level fractions must lie in (0,1]");
        }
        if (i > 0 && !(fractions[i] > fractions[i - 1])) {
            throw InvalidSpec("level fractions must be strictly ascending");
        }
    }
    if (fractions.back() != 1.0) {
        throw InvalidSpec("last level fraction must be exactly 1");
    }
}

const char* context_mode_name(ContextMode mode) {
    return mode == ContextMode::Local ? "local" : "global";
}

AnchorHierarchy AnchorHierarchy::from_contexts(std::vector<IndexSet> contexts,
                                               std::size_t total_count,
                                               std::vector<double> fractions) {
    if (contexts.empty()) {
        throw InvalidSpec("hierarchy needs at least one level");
    }
    AnchorHierarchy h;
    h.total_count_ = total_count;
    IndexSet running;
    for (std::size_t l = 0; l < contexts.size(); ++l) {
        IndexSet& c = contexts[l];
        std::sort(c.begin(), c.end());
        if (c.empty()) {
            throw InvalidSpec("context " + std::to_string(l + 1) + " is empty");
        }
        if (!is_strictly_ascending(c)) {
            throw InvalidSpec("context " + std::to_string(l + 1) + " has duplicate indices");
        }
        if (c.back() >= total_count) {
            throw InvalidSpec("context " + std::to_string(l + 1) + " index out of range");
        }
        IndexSet next = set_union(running, c);
        if (next.size() != running.size() + c.size()) {
            throw InvalidSpec("context " + std::to_string(l + 1) + " overlaps a lower level");
        }
        running = std::move(next);
        h.levels_.push_back(running);
    }
    if (running.size() != total_count) {
        throw InvalidSpec("contexts do not cover every Gaussian");
    }
    h.contexts_ = std::move(contexts);
    if (fractions.empty()) {
        for (const IndexSet& g : h.levels_) {
            fractions.push_back(static_cast<double>(g.size()) / static_cast<double>(total_count));
        }
        fractions.back() = 1.0;
    }
    if (fractions.size() != h.contexts_.size()) {
        throw InvalidSpec("one fraction per level is required");
    }
    h.fractions_ = std::move(fractions);
    return h;
}

AnchorHierarchy::AnchorHierarchy(const AnchorHierarchy& other)
    : contexts_(other.contexts_),
      levels_(other.levels_),
      fractions_(other.fractions_),
      total_count_(other.total_count_) {
    std::shared_lock lock(other.cache_->mutex);
    for (const auto& [key, table] : other.cache_->tables) {
        cache_->tables.emplace(key, std::make_unique<ScoreTable>(*table));
    }
    cache_->passes = other.cache_->passes;
}

AnchorHierarchy& AnchorHierarchy::operator=(const AnchorHierarchy& other) {
    if (this != &other) {
        AnchorHierarchy copy(other);
        *this = std::move(copy);
    }
    return *this;
}

void AnchorHierarchy::check_level(std::uint32_t l) const {
    if (l < 1 || l > contexts_.size()) {
        throw InvalidInput("level " + std::to_string(l) + " out of range 1.." +
                           std::to_string(contexts_.size()));
    }
}

const IndexSet& AnchorHierarchy::context(std::uint32_t l) const {
    check_level(l);
    return contexts_[l - 1];
}

const IndexSet& AnchorHierarchy::level(std::uint32_t l) const {
    check_level(l);
    return levels_[l - 1];
}

const ScoreTable* AnchorHierarchy::cached_scores(std::uint32_t l, ContextMode mode) const {
    std::shared_lock lock(cache_->mutex);
    const auto it = cache_->tables.find({l, mode});
    return it == cache_->tables.end() ? nullptr : it->second.get();
}

void AnchorHierarchy::store_scores(std::uint32_t l, ContextMode mode, ScoreTable table) {
    check_level(l);
    if (table.scope != context(l)) {
        throw InvalidInput("score table scope does not match context " + std::to_string(l));
    }
    std::unique_lock lock(cache_->mutex);
    cache_->tables[{l, mode}] = std::make_unique<ScoreTable>(std::move(table));
}

std::vector<std::pair<std::pair<std::uint32_t, ContextMode>, const ScoreTable*>>
AnchorHierarchy::all_cached() const {
    std::shared_lock lock(cache_->mutex);
    std::vector<std::pair<std::pair<std::uint32_t, ContextMode>, const ScoreTable*>> out;
    for (const auto& [key, table] : cache_->tables) {
        out.emplace_back(key, table.get());
    }
    return out;
}

std::size_t AnchorHierarchy::scoring_passes() const {
    std::shared_lock lock(cache_->mutex);
    return cache_->passes;
}

AnchorHierarchy build_hierarchy_from_scores(const ScoreTable& scores, std::size_t count,
                                            const LevelSpec& spec) {
    spec.validate();
    if (count < spec.fractions.size()) {
        throw InvalidSpec("fewer Gaussians than anchor levels");
    }
    if (scores.scope.size() != count || (count > 0 && scores.scope.back() != count - 1)) {
        throw InvalidInput("ranking table must cover every Gaussian");
    }
    const IndexSet ranked = rank_descending(scores);
    std::vector<IndexSet> contexts;
    std::size_t previous = 0;
    for (std::size_t l = 0; l < spec.fractions.size(); ++l) {
        auto keep = static_cast<std::size_t>(
            std::ceil(spec.fractions[l] * static_cast<double>(count) - 1e-9));
        keep = std::min(keep, count);
        if (keep <= previous) {
            throw InvalidSpec("fraction " + std::to_string(spec.fractions[l]) +
                              " yields an empty context");
        }
        IndexSet c(ranked.begin() + static_cast<std::ptrdiff_t>(previous),
                   ranked.begin() + static_cast<std::ptrdiff_t>(keep));
        std::sort(c.begin(), c.end());
        contexts.push_back(std::move(c));
        previous = keep;
    }
    return AnchorHierarchy::from_contexts(std::move(contexts), count, spec.fractions);
}

AnchorHierarchy build_hierarchy(const GaussianSet& set, const LevelSpec& spec,
                                const ImageBuffer& target, const LossConfig& loss,
                                const RenderConfig& render) {
    spec.validate();
    if (set.size() < spec.fractions.size()) {
        throw InvalidSpec("fewer Gaussians than anchor levels");
    }
    const IndexSet all = full_index_set(set.size());
    ScoreTable table = score_gaussians(set, all, all, target, loss, render);
    table.provenance = "full";
    return build_hierarchy_from_scores(table, set.size(), spec);
}

const ScoreTable& context_scores(AnchorHierarchy& hierarchy, std::uint32_t l,
                                 const GaussianSet& set, const ImageBuffer& target,
                                 const LossConfig& loss, ContextMode mode,
                                 const RenderConfig& render) {
    if (l < 2 || l > hierarchy.num_levels()) {
        throw InvalidInput("context level " + std::to_string(l) + " outside 2.." +
                           std::to_string(hierarchy.num_levels()));
    }
    if (hierarchy.total_count() != set.size()) {
        throw InvalidInput("hierarchy was not built over this set");
    }
    return hierarchy.scores_or_compute(l, mode, [&] {
        const IndexSet& render_subset =
            mode == ContextMode::Local ? hierarchy.level(l) : hierarchy.level(hierarchy.num_levels());
        ScoreTable t =
            score_gaussians(set, render_subset, hierarchy.context(l), target, loss, render);
        t.provenance = std::string(context_mode_name(mode)) + ":" + std::to_string(l);
        return t;
    });
}

}  // namespace rave
