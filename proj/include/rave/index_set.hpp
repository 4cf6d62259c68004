#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rave {

/// Strictly ascending list of Gaussian indices. Subsets are always expressed
/// as index sets so a Gaussian keeps its identity everywhere.
using IndexSet = std::vector<std::uint32_t>;

IndexSet full_index_set(std::size_t count);

bool is_strictly_ascending(std::span<const std::uint32_t> indices);

/// Sorts and removes duplicates.
IndexSet normalized(IndexSet indices);

bool is_subset(std::span<const std::uint32_t> inner, std::span<const std::uint32_t> outer);

IndexSet set_union(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);

IndexSet set_difference(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);

/// FNV-1a over the little-endian bytes of the indices.
std::uint64_t hash_indices(std::span<const std::uint32_t> indices);

}  // namespace rave
