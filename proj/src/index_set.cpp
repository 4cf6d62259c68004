#include "rave/index_set.hpp"

#include <algorithm>
#include <iterator>
#include <numeric>

namespace rave {

IndexSet full_index_set(std::size_t count) {
    IndexSet out(count);
    std::iota(out.begin(), out.end(), std::uint32_t{0});
    return out;
}

bool is_strictly_ascending(std::span<const std::uint32_t> indices) {
    return std::adjacent_find(indices.begin(), indices.end(),
                              [](std::uint32_t a, std::uint32_t b) { return a >= b; }) ==
           indices.end();
}

IndexSet normalized(IndexSet indices) {
    std::sort(indices.begin(), indices.end());
    indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
    return indices;
}

bool is_subset(std::span<const std::uint32_t> inner, std::span<const std::uint32_t> outer) {
    return std::includes(outer.begin(), outer.end(), inner.begin(), inner.end());
}

IndexSet set_union(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
    IndexSet out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

IndexSet set_difference(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
    IndexSet out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

std::uint64_t hash_indices(std::span<const std::uint32_t> indices) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint32_t v : indices) {
        for (int b = 0; b < 4; ++b) {
            h ^= (v >> (8 * b)) & 0xffu;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

}  // namespace rave
