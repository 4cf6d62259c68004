#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "occlusion_fixture.hpp"
#include "rave/errors.hpp"
#include "rave/hierarchy.hpp"
#include "test_support.hpp"

namespace rave {
namespace {

ScoreTable full_table(std::vector<double> scores) {
    ScoreTable t;
    t.scope = full_index_set(scores.size());
    t.scores = std::move(scores);
    t.provenance = "full";
    return t;
}

TEST(level_spec, uniform_fractions) {
    EXPECT_EQ(LevelSpec::uniform(4).fractions, (std::vector<double>{0.25, 0.5, 0.75, 1.0}));
    EXPECT_EQ(LevelSpec::uniform(1).fractions, (std::vector<double>{1.0}));
    EXPECT_EQ(LevelSpec{}.fractions, (std::vector<double>{0.2, 0.4, 0.6, 0.8, 1.0}));
    EXPECT_NO_THROW(LevelSpec::uniform(50).validate());
    EXPECT_THROW(LevelSpec::uniform(0), InvalidSpec);
}

TEST(level_spec, rejects_malformed_fractions) {
    EXPECT_THROW((LevelSpec{{}}).validate(), InvalidSpec);
    EXPECT_THROW((LevelSpec{{0.5, 0.5, 1.0}}).validate(), InvalidSpec);
    EXPECT_THROW((LevelSpec{{0.0, 1.0}}).validate(), InvalidSpec);
    EXPECT_THROW((LevelSpec{{0.3, 0.9}}).validate(), InvalidSpec);
    EXPECT_THROW((LevelSpec{{0.6, 0.4, 1.0}}).validate(), InvalidSpec);
    EXPECT_THROW((LevelSpec{{0.5, 1.2}}).validate(), InvalidSpec);
}

TEST(build_hierarchy_from_scores, cuts_the_ranking_at_each_fraction) {
    // Rank order: 3, 7, 0, 9, 1, 5, 2, 8, 4, 6
    const ScoreTable t =
        full_table({0.8, 0.6, 0.3, 1.0, 0.1, 0.5, 0.05, 0.9, 0.2, 0.7});
    const AnchorHierarchy h = build_hierarchy_from_scores(t, 10, {{0.2, 0.6, 1.0}});
    ASSERT_EQ(h.num_levels(), 3u);
    EXPECT_EQ(h.context(1), (IndexSet{3, 7}));
    EXPECT_EQ(h.context(2), (IndexSet{0, 1, 5, 9}));
    EXPECT_EQ(h.context(3), (IndexSet{2, 4, 6, 8}));
    EXPECT_EQ(h.level(2), (IndexSet{0, 1, 3, 5, 7, 9}));
    EXPECT_EQ(h.level(3), full_index_set(10));
    EXPECT_EQ(h.fractions(), (std::vector<double>{0.2, 0.6, 1.0}));
    EXPECT_EQ(h.total_count(), 10u);
}

TEST(build_hierarchy_from_scores, exact_products_do_not_round_up) {
    const ScoreTable t = full_table(std::vector<double>(10, 1.0));
    const AnchorHierarchy h = build_hierarchy_from_scores(t, 10, {{0.3, 0.6, 0.7, 1.0}});
    EXPECT_EQ(h.level(1).size(), 3u);
    EXPECT_EQ(h.level(2).size(), 6u);
    EXPECT_EQ(h.level(3).size(), 7u);
    // All scores tie, so the ranking is by index.
    EXPECT_EQ(h.context(1), (IndexSet{0, 1, 2}));
}

TEST(build_hierarchy_from_scores, partial_products_round_up) {
    const ScoreTable t = full_table(std::vector<double>(7, 1.0));
    const AnchorHierarchy h = build_hierarchy_from_scores(t, 7, {{0.2, 0.5, 1.0}});
    EXPECT_EQ(h.level(1).size(), 2u);  // ceil(1.4)
    EXPECT_EQ(h.level(2).size(), 4u);  // ceil(3.5)
}

TEST(build_hierarchy_from_scores, rejects_degenerate_inputs) {
    const ScoreTable t = full_table(std::vector<double>(4, 1.0));
    EXPECT_THROW(build_hierarchy_from_scores(t, 4, {{0.1, 0.2, 0.5, 0.8, 1.0}}), InvalidSpec);
    EXPECT_THROW(build_hierarchy_from_scores(t, 4, {{0.1, 0.15, 1.0}}), InvalidSpec);
    EXPECT_THROW(build_hierarchy_from_scores(t, 5, {{0.5, 1.0}}), InvalidInput);
    ScoreTable partial = t;
    partial.scope = {0, 1, 2, 5};
    EXPECT_THROW(build_hierarchy_from_scores(partial, 4, {{0.5, 1.0}}), InvalidInput);
}

TEST(build_hierarchy_from_scores, random_configurations_nest_and_partition) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t levels = 1 + rng() % 8;
        const std::size_t count = levels * 2 + rng() % 300;
        // Distinct, ascending integer cut points turned into fractions.
        std::vector<std::size_t> cuts;
        while (cuts.size() + 1 < levels) {
            const std::size_t c = 1 + rng() % (count - 1);
            if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) {
                cuts.push_back(c);
            }
        }
        std::sort(cuts.begin(), cuts.end());
        LevelSpec spec;
        spec.fractions.clear();
        for (std::size_t c : cuts) {
            spec.fractions.push_back((static_cast<double>(c) - 0.5) / static_cast<double>(count));
        }
        spec.fractions.push_back(1.0);

        std::vector<double> scores(count);
        for (double& s : scores) {
            s = static_cast<double>(rng() % 50);
        }
        const ScoreTable table = full_table(scores);
        const IndexSet ranked = rank_descending(table);
        const AnchorHierarchy h = build_hierarchy_from_scores(table, count, spec);
        ASSERT_EQ(h.num_levels(), levels);

        IndexSet seen;
        for (std::uint32_t l = 1; l <= levels; ++l) {
            const IndexSet& c = h.context(l);
            ASSERT_FALSE(c.empty());
            ASSERT_TRUE(is_strictly_ascending(c));
            EXPECT_TRUE(set_difference(c, seen) == c) << "overlap at level " << l;
            seen = set_union(seen, c);
            EXPECT_EQ(h.level(l), seen);
            if (l > 1) {
                EXPECT_TRUE(is_subset(h.level(l - 1), h.level(l)));
                EXPECT_GT(h.level(l).size(), h.level(l - 1).size());
            }
            const std::size_t expected = l < levels ? cuts[l - 1] : count;
            EXPECT_EQ(h.level(l).size(), expected);
            // G_l is the top of the ranking.
            IndexSet top(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(expected));
            EXPECT_EQ(normalized(top), h.level(l));
        }
        EXPECT_EQ(seen, full_index_set(count)) << "trial " << trial;
    }
}

TEST(build_hierarchy, scores_the_full_set_once) {
    std::mt19937_64 rng(1);
    const GaussianSet set = testing::random_set(rng, 30, 20, 20);
    const ImageBuffer target = testing::random_image(rng, 20, 20);
    const AnchorHierarchy a = build_hierarchy(set, {}, target, {});
    const IndexSet all = full_index_set(30);
    const AnchorHierarchy b =
        build_hierarchy_from_scores(score_gaussians(set, all, all, target, {}), 30, {});
    for (std::uint32_t l = 1; l <= 5; ++l) {
        EXPECT_EQ(a.context(l), b.context(l));
    }
    EXPECT_EQ(a.scoring_passes(), 0u);
    const AnchorHierarchy again = build_hierarchy(set, {}, target, {});
    EXPECT_EQ(again.level(2), a.level(2));
}

TEST(from_contexts, validates_the_partition) {
    EXPECT_NO_THROW(AnchorHierarchy::from_contexts({{1}, {0, 2}}, 3));
    EXPECT_THROW(AnchorHierarchy::from_contexts({}, 3), InvalidSpec);
    EXPECT_THROW(AnchorHierarchy::from_contexts({{0, 1}, {1, 2}}, 3), InvalidSpec);
    EXPECT_THROW(AnchorHierarchy::from_contexts({{0}, {2}}, 3), InvalidSpec);
    EXPECT_THROW(AnchorHierarchy::from_contexts({{0}, {}, {1, 2}}, 3), InvalidSpec);
    EXPECT_THROW(AnchorHierarchy::from_contexts({{0, 1}, {2, 3}}, 3), InvalidSpec);
    EXPECT_THROW(AnchorHierarchy::from_contexts({{0, 0}, {1, 2}}, 3), InvalidSpec);
    EXPECT_THROW(AnchorHierarchy::from_contexts({{0}, {1, 2}}, 3, {0.5}), InvalidSpec);
}

TEST(from_contexts, derives_fractions_and_sorts_contexts) {
    const AnchorHierarchy h = AnchorHierarchy::from_contexts({{3}, {2, 0}, {1}}, 4);
    EXPECT_EQ(h.context(2), (IndexSet{0, 2}));
    EXPECT_EQ(h.fractions(), (std::vector<double>{0.25, 0.75, 1.0}));
    EXPECT_THROW(h.level(0), InvalidInput);
    EXPECT_THROW(h.context(4), InvalidInput);
}

struct ScoringCase {
    GaussianSet set;
    ImageBuffer target;
    AnchorHierarchy hierarchy;
};

ScoringCase scoring_case() {
    std::mt19937_64 rng(9);
    ScoringCase c{testing::random_set(rng, 24, 20, 20), testing::random_image(rng, 20, 20), {}};
    c.hierarchy = build_hierarchy(c.set, {{0.25, 0.5, 0.95, 1.0}}, c.target, {});
    return c;
}

TEST(context_scores, local_and_global_render_the_right_subsets) {
    ScoringCase c = scoring_case();
    AnchorHierarchy& h = c.hierarchy;
    const ScoreTable& local = context_scores(h, 3, c.set, c.target, {}, ContextMode::Local);
    EXPECT_EQ(local.scope, h.context(3));
    EXPECT_EQ(local.provenance, "local:3");
    EXPECT_EQ(local.scores,
              score_gaussians(c.set, h.level(3), h.context(3), c.target, {}).scores);
    const ScoreTable& global = context_scores(h, 3, c.set, c.target, {}, ContextMode::Global);
    EXPECT_EQ(global.provenance, "global:3");
    EXPECT_EQ(global.scores,
              score_gaussians(c.set, h.level(4), h.context(3), c.target, {}).scores);
}

TEST(context_scores, singleton_context_gets_one_score) {
    ScoringCase c = scoring_case();
    ASSERT_EQ(c.hierarchy.context(4).size(), 1u);
    const ScoreTable& t = context_scores(c.hierarchy, 4, c.set, c.target, {}, ContextMode::Local);
    EXPECT_EQ(t.scores.size(), 1u);
    EXPECT_EQ(rank_descending(t), c.hierarchy.context(4));
}

TEST(context_scores, cache_returns_the_same_table_and_counts_passes) {
    ScoringCase c = scoring_case();
    AnchorHierarchy& h = c.hierarchy;
    EXPECT_EQ(h.cached_scores(2, ContextMode::Local), nullptr);
    const ScoreTable* first = &context_scores(h, 2, c.set, c.target, {}, ContextMode::Local);
    EXPECT_EQ(h.scoring_passes(), 1u);
    for (int k = 0; k < 5; ++k) {
        EXPECT_EQ(&context_scores(h, 2, c.set, c.target, {}, ContextMode::Local), first);
    }
    EXPECT_EQ(h.scoring_passes(), 1u);
    EXPECT_EQ(h.cached_scores(2, ContextMode::Local), first);
    context_scores(h, 2, c.set, c.target, {}, ContextMode::Global);
    context_scores(h, 3, c.set, c.target, {}, ContextMode::Local);
    EXPECT_EQ(h.scoring_passes(), 3u);
    EXPECT_EQ(h.all_cached().size(), 3u);
}

TEST(context_scores, stored_tables_are_used_without_scoring) {
    ScoringCase c = scoring_case();
    ScoreTable fake;
    fake.scope = c.hierarchy.context(2);
    fake.scores.assign(fake.scope.size(), 1.0);
    c.hierarchy.store_scores(2, ContextMode::Local, fake);
    EXPECT_EQ(context_scores(c.hierarchy, 2, c.set, c.target, {}, ContextMode::Local), fake);
    EXPECT_EQ(c.hierarchy.scoring_passes(), 0u);
    ScoreTable wrong = fake;
    wrong.scope.pop_back();
    wrong.scores.pop_back();
    EXPECT_THROW(c.hierarchy.store_scores(2, ContextMode::Local, wrong), InvalidInput);
}

TEST(context_scores, copies_carry_an_independent_cache) {
    ScoringCase c = scoring_case();
    context_scores(c.hierarchy, 2, c.set, c.target, {}, ContextMode::Local);
    AnchorHierarchy copy = c.hierarchy;
    ASSERT_NE(copy.cached_scores(2, ContextMode::Local), nullptr);
    EXPECT_NE(copy.cached_scores(2, ContextMode::Local),
              c.hierarchy.cached_scores(2, ContextMode::Local));
    EXPECT_EQ(*copy.cached_scores(2, ContextMode::Local),
              *c.hierarchy.cached_scores(2, ContextMode::Local));
    context_scores(copy, 3, c.set, c.target, {}, ContextMode::Local);
    EXPECT_EQ(c.hierarchy.cached_scores(3, ContextMode::Local), nullptr);
    EXPECT_EQ(c.hierarchy.scoring_passes(), 1u);
    EXPECT_EQ(copy.scoring_passes(), 2u);
}

TEST(context_scores, rejects_bad_levels_and_sets) {
    ScoringCase c = scoring_case();
    EXPECT_THROW(context_scores(c.hierarchy, 1, c.set, c.target, {}, ContextMode::Local),
                 InvalidInput);
    EXPECT_THROW(context_scores(c.hierarchy, 5, c.set, c.target, {}, ContextMode::Local),
                 InvalidInput);
    GaussianSet smaller = c.set.subset(full_index_set(20));
    EXPECT_THROW(context_scores(c.hierarchy, 2, smaller, c.target, {}, ContextMode::Local),
                 InvalidInput);
}

TEST(context_scores, occluded_core_matters_only_in_local_mode) {
    testing::OcclusionFixture f = testing::make_occlusion_fixture();
    const ScoreTable& local =
        context_scores(f.hierarchy, 2, f.set, f.target, {}, ContextMode::Local);
    const ScoreTable& global =
        context_scores(f.hierarchy, 2, f.set, f.target, {}, ContextMode::Global);
    for (std::uint32_t a : f.cores) {
        EXPECT_GT(local.score_of(a), global.score_of(a)) << "core " << a;
    }
    // In global mode every disc outranks every core.
    for (std::uint32_t a : f.cores) {
        for (std::uint32_t d : f.discs) {
            EXPECT_GT(global.score_of(d), global.score_of(a));
        }
    }
}

}  // namespace
}  // namespace rave
