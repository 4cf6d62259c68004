#pragma once

#include <filesystem>
#include <optional>
#include <span>

#include "rave/codec.hpp"
#include "rave/hierarchy.hpp"
#include "rave/rate_control.hpp"

namespace rave {

/// Everything a CLI stage hands to the next one. Stored in the RAVS container
/// with the model flag set: raw float32 planes followed by tagged sections.
struct Checkpoint {
    GaussianSet set;
    std::optional<ImageBuffer> target;
    std::optional<AnchorHierarchy> hierarchy;  ///< cached context scores included
    std::optional<QuantSpec> pinned_spec;
    std::optional<RateTable> rates;
    /// Full-set ranking the hierarchy was cut from.
    std::optional<ScoreTable> ranking;
};

Bytes serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Parameters rounded to float32, as a checkpoint round trip stores them.
GaussianSet round_to_float(const GaussianSet& set);

}  // namespace rave
