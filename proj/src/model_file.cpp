#include "rave/model_file.hpp"

#include <array>
#include <string>

#include "byte_io.hpp"
#include "rave/file_io.hpp"
#include "rave/errors.hpp"

namespace rave {

namespace {

using Tag = std::array<std::uint8_t, 4>;

constexpr Tag kTargetTag{'T', 'I', 'M', 'G'};
constexpr Tag kHierarchyTag{'H', 'I', 'E', 'R'};
constexpr Tag kSpecTag{'Q', 'S', 'P', 'C'};
constexpr Tag kRateTag{'R', 'A', 'T', 'E'};
constexpr Tag kScoreTag{'S', 'C', 'O', 'R'};
constexpr Tag kRankingTag{'R', 'A', 'N', 'K'};

void put_section(detail::ByteWriter& out, const Tag& tag, detail::ByteWriter& body) {
    out.put_bytes(tag);
    out.put(static_cast<std::uint64_t>(body.size()));
    out.put_bytes(body.bytes());
}

void put_string(detail::ByteWriter& w, const std::string& text) {
    w.put(static_cast<std::uint32_t>(text.size()));
    w.put_bytes({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::string get_string(detail::ByteReader& r) {
    const auto len = r.get<std::uint32_t>();
    const auto bytes = r.get_bytes(len);
    return {bytes.begin(), bytes.end()};
}

void put_table(detail::ByteWriter& w, const ScoreTable& table) {
    put_string(w, table.provenance);
    const Bytes sidecar = serialize_scores(table);
    w.put(static_cast<std::uint64_t>(sidecar.size()));
    w.put_bytes(sidecar);
}

ScoreTable get_table(detail::ByteReader& r) {
    std::string provenance = get_string(r);
    const auto len = r.get<std::uint64_t>();
    return deserialize_scores(r.get_bytes(len), std::move(provenance));
}

void put_spec(detail::ByteWriter& w, const QuantSpec& spec) {
    for (const QuantPlane& p : spec.planes) {
        w.put(p.bits);
        w.put_f32(p.min);
        w.put_f32(p.max);
    }
}

QuantSpec get_spec(detail::ByteReader& r) {
    QuantSpec spec;
    for (QuantPlane& p : spec.planes) {
        p.bits = r.get<std::uint8_t>();
        p.min = r.get_f32();
        p.max = r.get_f32();
    }
    spec.pinned_ranges = true;
    spec.validate();
    return spec;
}

}  // namespace

GaussianSet round_to_float(const GaussianSet& set) {
    GaussianSet out = set;
    for (std::size_t k = 0; k < kNumPlanes; ++k) {
        for (double& v : out.plane(static_cast<Plane>(k))) {
            v = static_cast<float>(v);
        }
    }
    return out;
}

Bytes serialize_checkpoint(const Checkpoint& cp) {
    const GaussianSet& set = cp.set;
    detail::ByteWriter w;
    for (std::size_t k = 0; k < kNumPlanes; ++k) {
        for (double v : set.plane(static_cast<Plane>(k))) {
            w.put_f32(static_cast<float>(v));
        }
    }
    if (cp.target) {
        detail::ByteWriter body;
        body.put(cp.target->width());
        body.put(cp.target->height());
        for (double v : cp.target->data()) {
            body.put_f64(v);
        }
        put_section(w, kTargetTag, body);
    }
    if (cp.hierarchy) {
        const AnchorHierarchy& h = *cp.hierarchy;
        detail::ByteWriter body;
        body.put(h.num_levels());
        for (std::uint32_t l = 1; l <= h.num_levels(); ++l) {
            body.put_f64(h.fractions()[l - 1]);
            const IndexSet& c = h.context(l);
            body.put(static_cast<std::uint32_t>(c.size()));
            for (std::uint32_t i : c) {
                body.put(i);
            }
        }
        put_section(w, kHierarchyTag, body);
        for (const auto& [key, table] : h.all_cached()) {
            detail::ByteWriter sb;
            sb.put(key.first);
            sb.put(static_cast<std::uint8_t>(key.second));
            put_table(sb, *table);
            put_section(w, kScoreTag, sb);
        }
    }
    if (cp.pinned_spec) {
        detail::ByteWriter body;
        put_spec(body, *cp.pinned_spec);
        put_section(w, kSpecTag, body);
    }
    if (cp.rates) {
        detail::ByteWriter body;
        body.put(cp.rates->num_levels());
        for (std::uint32_t l = 1; l <= cp.rates->num_levels(); ++l) {
            body.put(cp.rates->count(l));
            body.put(cp.rates->rate(l));
        }
        put_section(w, kRateTag, body);
    }
    if (cp.ranking) {
        detail::ByteWriter body;
        put_table(body, *cp.ranking);
        put_section(w, kRankingTag, body);
    }

    StreamHeader header;
    header.flags = kFlagModel;
    header.canvas_width = set.canvas_width();
    header.canvas_height = set.canvas_height();
    header.gaussian_count = static_cast<std::uint32_t>(set.size());
    for (QuantPlane& p : header.planes) {
        p = {kRawFloatBits, 0.0f, 0.0f};
    }
    return write_container(header, w.bytes(), default_backend());
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
    auto [header, raw] = read_container(bytes);
    if (!header.is_model()) {
        throw FormatError("stream is a bitstream, not a model checkpoint");
    }
    Checkpoint cp;
    cp.set = GaussianSet(header.canvas_width, header.canvas_height);
    const std::size_t n = header.gaussian_count;
    cp.set.resize(n);
    detail::ByteReader r(raw, "checkpoint");
    for (std::size_t k = 0; k < kNumPlanes; ++k) {
        if (header.planes[k].bits != kRawFloatBits) {
            throw FormatError("model planes must be raw float32");
        }
        for (double& v : cp.set.plane(static_cast<Plane>(k))) {
            v = r.get_f32();
        }
    }
    std::vector<std::pair<std::pair<std::uint32_t, ContextMode>, ScoreTable>> scores;
    while (r.remaining() > 0) {
        Tag tag;
        const auto t = r.get_bytes(4);
        std::copy(t.begin(), t.end(), tag.begin());
        const auto len = r.get<std::uint64_t>();
        detail::ByteReader s(r.get_bytes(len), "checkpoint section");
        if (tag == kTargetTag) {
            const auto w = s.get<std::uint32_t>();
            const auto h = s.get<std::uint32_t>();
            ImageBuffer img(w, h);
            for (double& v : img.data()) {
                v = s.get_f64();
            }
            cp.target = std::move(img);
        } else if (tag == kHierarchyTag) {
            const auto levels = s.get<std::uint32_t>();
            std::vector<IndexSet> contexts(levels);
            std::vector<double> fractions(levels);
            for (std::uint32_t l = 0; l < levels; ++l) {
                fractions[l] = s.get_f64();
                contexts[l].resize(s.get<std::uint32_t>());
                for (std::uint32_t& i : contexts[l]) {
                    i = s.get<std::uint32_t>();
                }
            }
            cp.hierarchy = AnchorHierarchy::from_contexts(std::move(contexts), n, fractions);
        } else if (tag == kScoreTag) {
            const auto level = s.get<std::uint32_t>();
            const auto mode = s.get<std::uint8_t>();
            if (mode > 1) {
                throw FormatError("unknown context mode in score section");
            }
            scores.push_back({{level, static_cast<ContextMode>(mode)}, get_table(s)});
        } else if (tag == kSpecTag) {
            cp.pinned_spec = get_spec(s);
        } else if (tag == kRateTag) {
            const auto levels = s.get<std::uint32_t>();
            RateTable table;
            for (std::uint32_t l = 0; l < levels; ++l) {
                table.counts.push_back(s.get<std::uint64_t>());
                table.rates.push_back(s.get<std::uint64_t>());
            }
            table.validate();
            cp.rates = std::move(table);
        } else if (tag == kRankingTag) {
            cp.ranking = get_table(s);
        }
        // Unknown sections are skipped.
    }
    if (!scores.empty()) {
        if (!cp.hierarchy) {
            throw FormatError("score tables present without a hierarchy");
        }
        for (auto& [key, table] : scores) {
            cp.hierarchy->store_scores(key.first, key.second, std::move(table));
        }
    }
    return cp;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    write_file_atomic(path, serialize_checkpoint(checkpoint));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    return deserialize_checkpoint(read_file(path));
}

}  // namespace rave
