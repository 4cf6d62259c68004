#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "rave/errors.hpp"
#include "rave/file_io.hpp"
#include "rave/image_io.hpp"

namespace rave::cli {

namespace {

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::span<const std::uint8_t> as_bytes(const std::string& text) {
    return {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()};
}

template <typename T>
T parse_field(std::string_view field, std::size_t line) {
    T value{};
    const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || end != field.data() + field.size()) {
        throw FormatError("csv line " + std::to_string(line) + ": bad field '" +
                          std::string(field) + "'");
    }
    return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = text.find(sep, start);
        parts.push_back(text.substr(start, pos - start));
        if (pos == std::string_view::npos) {
            return parts;
        }
        start = pos + 1;
    }
}

ImageBuffer render_stream(const DecodedStream& decoded, const RenderConfig& render) {
    return rave::render(decoded.set, render);
}

SweepRow measure(const Bytes& bitstream, const ImageBuffer& target, const RenderConfig& render,
                 std::string mode, std::uint64_t target_rate, std::uint32_t level) {
    const DecodedStream decoded = decode(bitstream);
    const ImageBuffer image = render_stream(decoded, render);
    SweepRow row;
    row.mode = std::move(mode);
    row.target_rate_bytes = target_rate;
    row.achieved_rate_bytes = bitstream.size();
    row.num_gaussians = decoded.set.size();
    row.anchor_level = level;
    row.psnr_db = psnr(image, target);
    row.ssim = ssim_value(image, target);
    return row;
}

ContextMode parse_mode(const std::string& name) {
    if (name == "local") {
        return ContextMode::Local;
    }
    if (name == "global") {
        return ContextMode::Global;
    }
    throw InvalidParameter("unknown mode '" + name + "' (expected local or global)");
}

void write_text(const std::string& path, const std::string& text) {
    write_file_atomic(path, as_bytes(text));
}

}  // namespace

int exit_code_for(const std::exception& error) {
    if (dynamic_cast<const RateOutOfRange*>(&error)) {
        return kExitRateOutOfRange;
    }
    if (dynamic_cast<const TrainingDiverged*>(&error)) {
        return kExitDiverged;
    }
    if (dynamic_cast<const IoError*>(&error)) {
        return kExitIo;
    }
    if (dynamic_cast<const FormatError*>(&error) || dynamic_cast<const InvalidTable*>(&error)) {
        return kExitFormat;
    }
    if (dynamic_cast<const InvalidParameter*>(&error) || dynamic_cast<const InvalidInput*>(&error) ||
        dynamic_cast<const InvalidSpec*>(&error)) {
        return kExitUsage;
    }
    return kExitFailure;
}

std::string format_csv(std::span<const SweepRow> rows) {
    std::string text(kCsvHeader);
    text += '\n';
    for (const SweepRow& r : rows) {
        text += r.mode + ',' + std::to_string(r.target_rate_bytes) + ',' +
                std::to_string(r.achieved_rate_bytes) + ',' + std::to_string(r.num_gaussians) +
                ',' + std::to_string(r.anchor_level) + ',' + format_real(r.psnr_db) + ',' +
                format_real(r.ssim) + '\n';
    }
    return text;
}

std::vector<SweepRow> parse_csv(std::string_view text) {
    std::vector<std::string_view> lines = split(text, '\n');
    if (!lines.empty() && lines.back().empty()) {
        lines.pop_back();
    }
    if (lines.empty() || lines.front() != kCsvHeader) {
        throw FormatError("csv header mismatch");
    }
    std::vector<SweepRow> rows;
    for (std::size_t n = 1; n < lines.size(); ++n) {
        const auto f = split(lines[n], ',');
        if (f.size() != 7) {
            throw FormatError("csv line " + std::to_string(n + 1) + ": expected 7 fields");
        }
        SweepRow r;
        r.mode = std::string(f[0]);
        r.target_rate_bytes = parse_field<std::uint64_t>(f[1], n + 1);
        r.achieved_rate_bytes = parse_field<std::uint64_t>(f[2], n + 1);
        r.num_gaussians = parse_field<std::uint64_t>(f[3], n + 1);
        r.anchor_level = parse_field<std::uint32_t>(f[4], n + 1);
        r.psnr_db = parse_field<double>(f[5], n + 1);
        r.ssim = parse_field<double>(f[6], n + 1);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string format_svg(std::span<const SweepRow> rows) {
    constexpr double kWidth = 640, kHeight = 400, kLeft = 70, kRight = 20, kTop = 20, kBottom = 50;
    static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    std::map<std::string, std::vector<std::pair<double, double>>> series;
    for (const SweepRow& r : rows) {
        if (!std::isfinite(r.psnr_db)) {
            continue;
        }
        const double x = static_cast<double>(r.achieved_rate_bytes);
        series[r.mode].emplace_back(x, r.psnr_db);
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, r.psnr_db);
        y1 = std::max(y1, r.psnr_db);
    }
    if (series.empty()) {
        x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    }
    if (x1 <= x0) {
        x1 = x0 + 1;
    }
    if (y1 <= y0) {
        y1 = y0 + 1;
    }
    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto sx = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
    auto sy = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw
        << "\" y2=\"" << kTop + ph << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
        << kTop + ph << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double fx = x0 + (x1 - x0) * t / 4.0, fy = y0 + (y1 - y0) * t / 4.0;
        svg << "<text x=\"" << sx(fx) << "\" y=\"" << kTop + ph + 16
            << "\" text-anchor=\"middle\">" << std::lround(fx) << "</text>\n";
        svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << sy(fy) + 4 << "\" text-anchor=\"end\">"
            << format_real(std::round(fy * 100) / 100) << "</text>\n";
    }
    svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 10
        << "\" text-anchor=\"middle\">rate (bytes)</text>\n";
    svg << "<text x=\"16\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << kTop + ph / 2 << ")\">PSNR (dB)</text>\n";
    std::size_t k = 0;
    for (auto& [mode, points] : series) {
        std::sort(points.begin(), points.end());
        const char* color = kColors[k % std::size(kColors)];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : points) {
            svg << sx(x) << ',' << sy(y) << ' ';
        }
        svg << "\"/>\n";
        svg << "<text x=\"" << kLeft + 10 << "\" y=\"" << kTop + 14 + 14 * k << "\" fill=\"" << color
            << "\">" << mode << "</text>\n";
        ++k;
    }
    svg << "</svg>\n";
    return svg.str();
}

std::size_t count_dips(std::span<const SweepRow> rows, double tolerance_db) {
    std::size_t dips = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].psnr_db < rows[i - 1].psnr_db - tolerance_db) {
            ++dips;
        }
    }
    return dips;
}

std::vector<std::uint64_t> evenly_spaced_rates(const RateTable& table, std::uint32_t points) {
    if (points == 0) {
        throw InvalidParameter("sweep needs at least one point");
    }
    const std::uint64_t lo = table.rate(1), hi = table.rate(table.num_levels());
    if (points == 1) {
        return {hi};
    }
    std::vector<std::uint64_t> rates;
    for (std::uint32_t k = 0; k < points; ++k) {
        rates.push_back(lo + static_cast<std::uint64_t>(std::llround(
                                 static_cast<double>(hi - lo) * k / (points - 1))));
    }
    return rates;
}

std::vector<std::uint64_t> per_pair_rates(const RateTable& table, std::uint32_t points) {
    if (points < 2) {
        throw InvalidParameter("per-pair sweeps need at least two points");
    }
    std::vector<std::uint64_t> rates{table.rate(1)};
    for (std::uint32_t l = 1; l < table.num_levels(); ++l) {
        const std::uint64_t lo = table.rate(l), hi = table.rate(l + 1);
        for (std::uint32_t k = 1; k < points; ++k) {
            rates.push_back(lo + (hi - lo) * k / (points - 1));
        }
    }
    return rates;
}

std::vector<std::uint64_t> anchor_rate_targets(const RateTable& table) { return table.rates; }

void require_pipeline_outputs(const Checkpoint& cp) {
    if (!cp.target || !cp.hierarchy || !cp.pinned_spec || !cp.rates) {
        throw InvalidInput("model has not been through the pipeline command");
    }
}

Checkpoint run_pipeline(Checkpoint cp, const PipelineOptions& options,
                        const ProgressFn& progress) {
    if (!cp.target) {
        throw InvalidInput("pipeline needs the training image");
    }
    options.levels.validate();
    const ImageBuffer& target = *cp.target;
    const LossConfig& loss = options.finetune.loss;
    const IndexSet all = full_index_set(cp.set.size());

    ScoreTable ranking = score_gaussians(cp.set, all, all, target, loss, options.render);
    ranking.provenance = "full";
    AnchorHierarchy hierarchy = build_hierarchy_from_scores(ranking, cp.set.size(), options.levels);

    FinetuneConfig fc = options.finetune;
    fc.render = options.render;
    fc.round_result_to_float = true;
    FinetuneResult tuned = finetune_stochastic(cp.set, hierarchy, target, fc, progress);

    cp.set = std::move(tuned.set);
    cp.rates = anchor_rates(cp.set, hierarchy, tuned.pinned_spec);
    for (std::uint32_t l = 2; l <= hierarchy.num_levels(); ++l) {
        context_scores(hierarchy, l, cp.set, target, loss, ContextMode::Local, options.render);
    }
    cp.pinned_spec = tuned.pinned_spec;
    cp.hierarchy = std::move(hierarchy);
    cp.ranking = std::move(ranking);
    return cp;
}

std::vector<SweepRow> run_sweep(Checkpoint& cp, std::span<const std::uint64_t> targets,
                                ContextMode mode, const RenderConfig& render,
                                const std::function<void(const SweepRow&)>& on_row) {
    require_pipeline_outputs(cp);
    RateController controller(cp.set, *cp.hierarchy, *cp.pinned_spec, *cp.target, *cp.rates, {},
                              render);
    std::vector<SweepRow> rows;
    for (const std::uint64_t target : targets) {
        RateControlOptions opts;
        opts.mode = mode;
        const RateEncoding enc = controller.encode_at_rate(target, opts);
        rows.push_back(measure(enc.bitstream, *cp.target, render, context_mode_name(mode), target,
                               enc.report.level));
        if (on_row) {
            on_row(rows.back());
        }
    }
    return rows;
}

MultiAnchorResult run_multi_anchor(const Checkpoint& cp, std::uint32_t levels,
                                   const RenderConfig& render) {
    require_pipeline_outputs(cp);
    MultiAnchorResult result;
    ScoreTable ranking;
    if (cp.ranking) {
        ranking = *cp.ranking;
    } else {
        const IndexSet all = full_index_set(cp.set.size());
        ranking = score_gaussians(cp.set, all, all, *cp.target, {}, render);
    }
    result.scoring_passes = 1;
    AnchorHierarchy h =
        build_hierarchy_from_scores(ranking, cp.set.size(), LevelSpec::uniform(levels));
    for (std::uint32_t l = 2; l <= h.num_levels(); ++l) {
        context_scores(h, l, cp.set, *cp.target, {}, ContextMode::Local, render);
    }
    result.scoring_passes += h.scoring_passes();
    for (std::uint32_t l = 1; l <= h.num_levels(); ++l) {
        EncodeMetadata meta;
        meta.anchor_level = static_cast<std::uint8_t>(std::min<std::uint32_t>(l, kLevelInterpolated - 1));
        const Bytes bits = encode_subset(cp.set, h.level(l), *cp.pinned_spec, meta);
        result.rows.push_back(measure(bits, *cp.target, render, "multi-anchor", bits.size(), l));
    }
    return result;
}

namespace {

struct GlobalFlags {
    std::uint64_t seed = 0;
    unsigned threads = 0;
    bool verbose = false;

    RenderConfig render() const {
        RenderConfig cfg;
        cfg.threads = threads;
        return cfg;
    }
};

ProgressFn progress_printer(const GlobalFlags& flags, std::ostream& err, const char* stage) {
    if (!flags.verbose) {
        return {};
    }
    return [&err, stage](std::uint32_t it, double loss) {
        if (it % 100 == 0) {
            err << stage << " iteration " << it << " loss " << format_real(loss) << '\n';
        }
    };
}

std::vector<double> parse_fractions(const std::string& text) {
    std::vector<double> values;
    for (std::string_view part : split(text, ',')) {
        values.push_back(parse_field<double>(part, 1));
    }
    return values;
}

std::vector<std::uint64_t> parse_rates(const std::string& text) {
    std::vector<std::uint64_t> values;
    for (std::string_view part : split(text, ',')) {
        values.push_back(parse_field<std::uint64_t>(part, 1));
    }
    return values;
}

struct SweepTargets {
    std::string rates;
    std::uint32_t num_points = 0;
    std::uint32_t per_pair = 0;
    bool anchors = false;

    void add_options(CLI::App& cmd) {
        auto* r = cmd.add_option("--rates", rates, "Comma-separated target rates in bytes");
        auto* n = cmd.add_option("--num-points", num_points,
                                 "Targets evenly spaced from the lowest to the highest anchor rate");
        auto* p = cmd.add_option("--per-pair", per_pair,
                                 "Targets per adjacent anchor pair, anchors included");
        auto* a = cmd.add_flag("--anchors", anchors, "Sweep exactly the anchor rates");
        r->excludes(n, p, a);
        n->excludes(p, a);
        p->excludes(a);
    }

    std::vector<std::uint64_t> resolve(const RateTable& table) const {
        if (!rates.empty()) {
            return parse_rates(rates);
        }
        if (num_points > 0) {
            return evenly_spaced_rates(table, num_points);
        }
        if (anchors) {
            return anchor_rate_targets(table);
        }
        return per_pair_rates(table, per_pair > 0 ? per_pair : 10);
    }
};

void write_rows(const std::string& csv, const std::string& svg, std::span<const SweepRow> rows) {
    write_text(csv, format_csv(rows));
    if (!svg.empty()) {
        write_text(svg, format_svg(rows));
    }
}

}  // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Rate-adaptive 2D Gaussian splat codec", "rave"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalFlags flags;
    app.add_option("--seed", flags.seed, "Random seed for training and fine-tuning");
    app.add_option("--threads", flags.threads, "Render threads, 0 for all cores");
    app.add_flag("-v,--verbose", flags.verbose, "Print progress to stderr");

    std::function<void()> action;

    // train
    auto* train_cmd = app.add_subcommand("train", "Fit Gaussians to an image");
    std::string train_image, train_out, precision = "double";
    TrainConfig train_cfg;
    double lr_scale = 1.0;
    train_cmd->add_option("image", train_image, "PNG or binary PPM")->required();
    train_cmd->add_option("-o,--out", train_out, "Model file to write")->required();
    train_cmd->add_option("--gaussians", train_cfg.num_gaussians, "Number of Gaussians");
    train_cmd->add_option("--iterations", train_cfg.iterations, "Adam iterations");
    train_cmd->add_option("--lr-scale", lr_scale, "Multiplier on every learning rate");
    train_cmd->add_option("--precision", precision, "double or float")
        ->check(CLI::IsMember({"double", "float"}));
    train_cmd->callback([&] {
        action = [&] {
            train_cfg.seed = flags.seed;
            train_cfg.render = flags.render();
            train_cfg.render.precision = precision == "float" ? Precision::Float : Precision::Double;
            train_cfg.lr = train_cfg.lr.scaled(lr_scale);
            const ImageBuffer target = read_image(train_image);
            TrainResult result = train(target, train_cfg, progress_printer(flags, err, "train"));
            Checkpoint cp;
            cp.set = round_to_float(result.set);
            cp.target = target;
            write_checkpoint(train_out, cp);
            out << "trained " << cp.set.size() << " gaussians, loss "
                << format_real(result.loss_history.front()) << " -> "
                << format_real(result.loss_history.back()) << ", psnr "
                << format_real(psnr(render(cp.set, train_cfg.render), target)) << " dB\n";
        };
    });

    // pipeline
    auto* pipe_cmd = app.add_subcommand(
        "pipeline", "Build the anchor hierarchy, fine-tune and measure anchor rates");
    std::string pipe_in, pipe_out, pipe_image, fractions;
    std::uint32_t pipe_levels = 0;
    FinetuneConfig ft_cfg;
    double ft_lr_scale = 1.0;
    pipe_cmd->add_option("model", pipe_in, "Model written by train")->required();
    pipe_cmd->add_option("-o,--out", pipe_out, "Model file to write")->required();
    auto* frac_opt =
        pipe_cmd->add_option("--fractions", fractions, "Anchor fractions, e.g. 0.2,0.4,0.6,0.8,1");
    pipe_cmd->add_option("--levels", pipe_levels, "Evenly spaced anchors")->excludes(frac_opt);
    pipe_cmd->add_option("--image", pipe_image, "Training image, if the model lacks one");
    pipe_cmd->add_option("--finetune-iterations", ft_cfg.iterations, "Fine-tuning iterations");
    pipe_cmd->add_option("--finetune-lr-scale", ft_lr_scale,
                         "Multiplier on the default fine-tuning learning rates");
    pipe_cmd->callback([&] {
        action = [&] {
            Checkpoint cp = read_checkpoint(pipe_in);
            if (!pipe_image.empty()) {
                cp.target = read_image(pipe_image);
            }
            PipelineOptions opts;
            if (!fractions.empty()) {
                opts.levels.fractions = parse_fractions(fractions);
            } else if (pipe_levels > 0) {
                opts.levels = LevelSpec::uniform(pipe_levels);
            }
            opts.finetune = ft_cfg;
            opts.finetune.seed = flags.seed;
            opts.finetune.lr = ft_cfg.lr.scaled(ft_lr_scale);
            opts.render = flags.render();
            cp = run_pipeline(std::move(cp), opts, progress_printer(flags, err, "finetune"));
            write_checkpoint(pipe_out, cp);
            for (std::uint32_t l = 1; l <= cp.rates->num_levels(); ++l) {
                out << "anchor " << l << ": " << cp.rates->count(l) << " gaussians, "
                    << cp.rates->rate(l) << " bytes\n";
            }
        };
    });

    // encode
    auto* enc_cmd = app.add_subcommand("encode", "Encode a model at a target rate or anchor");
    std::string enc_in, enc_out, enc_mode = "local";
    std::uint64_t enc_rate = 0;
    std::uint32_t enc_level = 0;
    bool enc_clamp = false, enc_correct = false;
    enc_cmd->add_option("model", enc_in, "Model written by pipeline")->required();
    enc_cmd->add_option("-o,--out", enc_out, "Bitstream file to write")->required();
    auto* rate_opt = enc_cmd->add_option("--rate", enc_rate, "Target size in bytes");
    auto* level_opt = enc_cmd->add_option("--level", enc_level, "Anchor level, 1-based");
    rate_opt->excludes(level_opt);
    enc_cmd->add_option("--mode", enc_mode, "Context scoring: local or global")
        ->check(CLI::IsMember({"local", "global"}));
    enc_cmd->add_flag("--clamp", enc_clamp, "Send the lowest anchor for rates below it");
    enc_cmd->add_flag("--correct", enc_correct, "Re-interpolate once from the achieved rate");
    enc_cmd->callback([&] {
        if (rate_opt->count() == 0 && level_opt->count() == 0) {
            throw CLI::RequiredError("--rate or --level");
        }
        action = [&] {
            Checkpoint cp = read_checkpoint(enc_in);
            require_pipeline_outputs(cp);
            RateController controller(cp.set, *cp.hierarchy, *cp.pinned_spec, *cp.target,
                                      *cp.rates, {}, flags.render());
            if (level_opt->count() > 0) {
                if (enc_level < 1 || enc_level > cp.hierarchy->num_levels()) {
                    throw InvalidParameter("--level out of range 1.." +
                                           std::to_string(cp.hierarchy->num_levels()));
                }
                const Bytes bits = controller.encode_anchor(enc_level);
                write_file_atomic(enc_out, bits);
                out << "anchor " << enc_level << ": " << bits.size() << " bytes, "
                    << cp.hierarchy->level(enc_level).size() << " gaussians\n";
                return;
            }
            RateControlOptions opts;
            opts.mode = parse_mode(enc_mode);
            opts.clamp_below = enc_clamp;
            opts.one_step_correction = enc_correct;
            const RateEncoding enc = controller.encode_at_rate(enc_rate, opts);
            write_file_atomic(enc_out, enc.bitstream);
            out << "target " << enc.report.target_rate << " bytes, achieved "
                << enc.report.achieved_rate << " bytes, " << enc.report.count
                << " gaussians, anchor " << enc.report.level
                << (enc.report.interpolated ? " (interpolated)" : "") << '\n';
            if (enc.report.warning) {
                err << "warning: " << *enc.report.warning << '\n';
            }
        };
    });

    // decode
    auto* dec_cmd = app.add_subcommand("decode", "Decode a bitstream into a model file");
    std::string dec_in, dec_out;
    dec_cmd->add_option("bitstream", dec_in, "Bitstream written by encode")->required();
    dec_cmd->add_option("-o,--out", dec_out, "Model file to write")->required();
    dec_cmd->callback([&] {
        action = [&] {
            DecodedStream decoded = decode(read_file(dec_in));
            Checkpoint cp;
            cp.set = std::move(decoded.set);
            write_checkpoint(dec_out, cp);
            out << "decoded " << cp.set.size() << " gaussians, " << cp.set.canvas_width() << 'x'
                << cp.set.canvas_height();
            if (decoded.header.anchor_level != kLevelInterpolated) {
                out << ", anchor " << static_cast<int>(decoded.header.anchor_level);
            }
            out << '\n';
        };
    });

    // render
    auto* ren_cmd = app.add_subcommand("render", "Rasterize a model or bitstream to PNG");
    std::string ren_in, ren_out;
    ren_cmd->add_option("input", ren_in, "Model or bitstream")->required();
    ren_cmd->add_option("-o,--out", ren_out, "PNG file to write")->required();
    ren_cmd->callback([&] {
        action = [&] {
            const DecodedStream decoded = decode(read_file(ren_in));
            write_png(ren_out, render(decoded.set, flags.render()));
            out << "rendered " << decoded.set.size() << " gaussians to " << ren_out << '\n';
        };
    });

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "Rate-distortion sweep to CSV and SVG");
    std::string sweep_in, sweep_csv, sweep_svg, sweep_mode = "local";
    SweepTargets sweep_targets;
    sweep_cmd->add_option("model", sweep_in, "Model written by pipeline")->required();
    sweep_cmd->add_option("-o,--out", sweep_csv, "CSV file to write")->required();
    sweep_cmd->add_option("--svg", sweep_svg, "Optional SVG plot");
    sweep_cmd->add_option("--mode", sweep_mode, "Context scoring: local or global")
        ->check(CLI::IsMember({"local", "global"}));
    sweep_targets.add_options(*sweep_cmd);
    sweep_cmd->callback([&] {
        action = [&] {
            Checkpoint cp = read_checkpoint(sweep_in);
            require_pipeline_outputs(cp);
            const auto targets = sweep_targets.resolve(*cp.rates);
            std::vector<SweepRow> done;
            try {
                run_sweep(cp, targets, parse_mode(sweep_mode), flags.render(),
                          [&](const SweepRow& row) { done.push_back(row); });
            } catch (...) {
                write_rows(sweep_csv, sweep_svg, done);
                throw;
            }
            write_rows(sweep_csv, sweep_svg, done);
            out << done.size() << " rows, " << count_dips(done) << " dips over 0.2 dB\n";
        };
    });

    // ablate
    auto* abl_cmd = app.add_subcommand("ablate", "Compare against global scoring or dense anchors");
    std::string abl_in, abl_csv, abl_svg, abl_mode;
    std::uint32_t abl_levels = 50;
    SweepTargets abl_targets;
    abl_cmd->add_option("model", abl_in, "Model written by pipeline")->required();
    abl_cmd->add_option("--mode", abl_mode, "global or multi-anchor")
        ->required()
        ->check(CLI::IsMember({"global", "multi-anchor"}));
    abl_cmd->add_option("--levels", abl_levels, "Anchor count for multi-anchor");
    abl_cmd->add_option("-o,--out", abl_csv, "CSV file to write")->required();
    abl_cmd->add_option("--svg", abl_svg, "Optional SVG plot");
    abl_targets.add_options(*abl_cmd);
    abl_cmd->callback([&] {
        action = [&] {
            Checkpoint cp = read_checkpoint(abl_in);
            require_pipeline_outputs(cp);
            const auto targets = abl_targets.resolve(*cp.rates);
            const std::size_t before = cp.hierarchy->scoring_passes();
            std::vector<SweepRow> rows = run_sweep(cp, targets, ContextMode::Local, flags.render());
            out << "local: " << rows.size() << " rows, " << count_dips(rows) << " dips, "
                << cp.hierarchy->scoring_passes() - before << " scoring passes\n";
            if (abl_mode == "global") {
                const std::size_t mid = cp.hierarchy->scoring_passes();
                auto global = run_sweep(cp, targets, ContextMode::Global, flags.render());
                out << "global: " << global.size() << " rows, " << count_dips(global) << " dips, "
                    << cp.hierarchy->scoring_passes() - mid << " scoring passes\n";
                rows.insert(rows.end(), global.begin(), global.end());
            } else {
                MultiAnchorResult multi = run_multi_anchor(cp, abl_levels, flags.render());
                out << "multi-anchor: " << multi.rows.size() << " anchors, "
                    << count_dips(multi.rows) << " dips, " << multi.scoring_passes
                    << " scoring passes\n";
                rows.insert(rows.end(), multi.rows.begin(), multi.rows.end());
            }
            write_rows(abl_csv, abl_svg, rows);
        };
    });

    std::reverse(args.begin(), args.end());
    try {
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    try {
        action();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return kExitOk;
}

}  // namespace rave::cli
