#include "rave/importance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "byte_io.hpp"
#include "rave/file_io.hpp"
#include "rave/errors.hpp"

namespace rave {

double ScoreTable::score_of(std::uint32_t index) const {
    const auto it = std::lower_bound(scope.begin(), scope.end(), index);
    if (it == scope.end() || *it != index) {
        throw InvalidInput("index " + std::to_string(index) + " not in score table");
    }
    return scores[static_cast<std::size_t>(it - scope.begin())];
}

ScoreTable score_gaussians(const GaussianSet& set, std::span<const std::uint32_t> render_subset,
                           std::span<const std::uint32_t> score_subset, const ImageBuffer& target,
                           const LossConfig& loss, const RenderConfig& render_config) {
    if (!is_strictly_ascending(render_subset) || !is_strictly_ascending(score_subset)) {
        throw InvalidInput("index sets must be strictly ascending");
    }
    if (!render_subset.empty() && render_subset.back() >= set.size()) {
        throw InvalidInput("render subset exceeds the Gaussian set");
    }
    if (!is_subset(score_subset, render_subset)) {
        throw InvalidInput("score subset must be contained in the render subset");
    }
    const ImageBuffer image = render(set, render_subset, render_config);
    const ValueAndGrad l = combined_loss(image, target, loss);
    const GaussianGradients grads = render_backward(set, render_subset, render_config, l.grad);

    ScoreTable table;
    table.scope.assign(score_subset.begin(), score_subset.end());
    table.scores.reserve(score_subset.size());
    for (std::uint32_t i : score_subset) {
        const double s = grads.norm(i);
        if (!std::isfinite(s)) {
            throw InvalidParameter("non-finite importance score for Gaussian " + std::to_string(i));
        }
        table.scores.push_back(s);
    }
    return table;
}

IndexSet rank_descending(const ScoreTable& table) {
    std::vector<std::size_t> order(table.scope.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Scope is ascending, so a stable sort on score alone breaks ties by index.
    std::stable_sort(order.begin(), order.end(), [&table](std::size_t a, std::size_t b) {
        return table.scores[a] > table.scores[b];
    });
    IndexSet out;
    out.reserve(order.size());
    for (std::size_t k : order) {
        out.push_back(table.scope[k]);
    }
    return out;
}

Bytes serialize_scores(const ScoreTable& table) {
    detail::ByteWriter w;
    for (std::size_t k = 0; k < table.scope.size(); ++k) {
        w.put(table.scope[k]);
        w.put_f64(table.scores[k]);
    }
    return std::move(w.bytes());
}

ScoreTable deserialize_scores(std::span<const std::uint8_t> bytes, std::string provenance) {
    if (bytes.size() % 12 != 0) {
        throw TruncatedPayload("score sidecar length is not a multiple of 12 bytes");
    }
    detail::ByteReader r(bytes, "score sidecar");
    ScoreTable table;
    table.provenance = std::move(provenance);
    while (r.remaining() > 0) {
        table.scope.push_back(r.get<std::uint32_t>());
        const double s = r.get_f64();
        if (!std::isfinite(s) || s < 0.0) {
            throw FormatError("score sidecar holds an invalid score");
        }
        table.scores.push_back(s);
    }
    if (!is_strictly_ascending(table.scope)) {
        throw FormatError("score sidecar indices are not strictly ascending");
    }
    return table;
}

void write_score_sidecar(const std::filesystem::path& path, const ScoreTable& table) {
    write_file_atomic(path, serialize_scores(table));
}

ScoreTable read_score_sidecar(const std::filesystem::path& path) {
    return deserialize_scores(read_file(path), path.filename().string());
}

}  // namespace rave
