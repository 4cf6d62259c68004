#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rave/entropy.hpp"
#include "rave/metrics.hpp"
#include "rave/splat.hpp"

namespace rave {

/// Per-Gaussian importance for one scored subset.
struct ScoreTable {
    /// Scored indices, strictly ascending.
    IndexSet scope;
    /// scores[k] belongs to scope[k]; non-negative and finite.
    std::vector<double> scores;
    /// Which render subset produced the scores, e.g. "full", "local:3", "global:3".
    std::string provenance;

    double score_of(std::uint32_t index) const;
    friend bool operator==(const ScoreTable&, const ScoreTable&) = default;
};

/// One forward/backward pass over `render_subset` against `target`; each
/// Gaussian of `score_subset` gets the L2 norm of its 9 parameter gradients.
/// Throws InvalidInput unless score_subset is a subset of render_subset, which
/// in turn lies within the set.
ScoreTable score_gaussians(const GaussianSet& set, std::span<const std::uint32_t> render_subset,
                           std::span<const std::uint32_t> score_subset, const ImageBuffer& target,
                           const LossConfig& loss, const RenderConfig& render = {});

/// Scope ordered by score descending, ties by ascending index.
IndexSet rank_descending(const ScoreTable& table);

/// Sidecar: (u32 index, f64 score) pairs, little-endian, in scope order.
Bytes serialize_scores(const ScoreTable& table);
ScoreTable deserialize_scores(std::span<const std::uint8_t> bytes, std::string provenance = {});

void write_score_sidecar(const std::filesystem::path& path, const ScoreTable& table);
ScoreTable read_score_sidecar(const std::filesystem::path& path);

}  // namespace rave
