// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

// qtoken: run the token-reduction pipeline, sweep ratio pairs, run the
// invariant suites, or regenerate golden files.
//
// Exit codes: 0 ok, 1 configuration/usage, 2 runtime, 3 I/O, 4 verify failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qtoken/embedding_io.hpp"
#include "qtoken/pipeline.hpp"
#include "qtoken/verify.hpp"

namespace fs = std::filesystem;
using namespace qtoken;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitIo = 3;
constexpr int kExitVerify = 4;

int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::config:
    case ErrorKind::parameter:
    case ErrorKind::budget:
        return kExitConfig;
    case ErrorKind::io:
    case ErrorKind::format:
        return kExitIo;
    default:
        return kExitRuntime;
    }
}

/// Flags shared by run and sweep. Unset optionals leave the config file
/// (or built-in default) value alone.
struct Overrides {
    std::optional<double> select_ratio;
    std::optional<std::size_t> compress_ratio;
    std::optional<double> tau;
    std::optional<double> alpha;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> views;
    std::optional<std::size_t> frames;
    std::optional<std::size_t> dim;
    std::optional<std::size_t> tokens_per_patch;
    std::optional<std::string> grid;
    std::optional<std::string> axis;
    std::optional<std::string> q_source;
    bool residual = false;
    bool has_class_token = false;
    bool binary_mask = false;
    bool emit_mask = false;
    std::string out = "qtoken_out";
    std::optional<std::string> config;
    std::optional<std::string> scene;
    std::optional<std::string> embeddings;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--select-ratio", o.select_ratio, "Top-k selection ratio (>= 1)");
    cmd->add_option("--compress-ratio", o.compress_ratio, "Tokens merged per output token (>= 1)");
    cmd->add_option("--tau", o.tau, "Similarity softmax temperature");
    cmd->add_option("--alpha", o.alpha, "Blend weight of token salience in [0, 1]");
    cmd->add_option("--seed", o.seed, "Scene and encoder seed");
    cmd->add_option("--views", o.views, "Number of camera views");
    cmd->add_option("--frames", o.frames, "Number of frames (last is current)");
    cmd->add_option("--dim", o.dim, "Embedding width");
    cmd->add_option("--tokens-per-patch", o.tokens_per_patch, "Tokens per patch");
    cmd->add_option("--grid", o.grid, "Patch grid as RxC, e.g. 4x7");
    cmd->add_option("--axis", o.axis, "Softmax axis: image or text")->check(CLI::IsMember({"image", "text"}));
    cmd->add_option("--q-source", o.q_source, "Enhancement queries: selected or all")
        ->check(CLI::IsMember({"selected", "all"}));
    cmd->add_flag("--residual", o.residual, "Add a residual connection around the fusion MLP");
    cmd->add_flag("--has-class-token", o.has_class_token, "Drop row 0 of every loaded embedding file");
    cmd->add_flag("--binary-mask", o.binary_mask, "Render masks as any-token-selected per patch");
    cmd->add_flag("--emit-mask", o.emit_mask, "Write PGM selection masks");
    cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
    cmd->add_option("--config", o.config, "YAML config file");
    auto* scene = cmd->add_option("--scene", o.scene, "YAML scene file (default: generated demo scene)");
    cmd->add_option("--embeddings", o.embeddings,
                    "Directory with image.lvde, text.lvde, support.lvde and optional video.lvde")
        ->excludes(scene);
}

PipelineConfig effective_config(const Overrides& o) {
    PipelineConfig c = o.config ? load_config(*o.config) : PipelineConfig{};
    if (o.select_ratio) c.select_ratio = *o.select_ratio;
    if (o.compress_ratio) c.compress_ratio = *o.compress_ratio;
    if (o.tau) c.tau = *o.tau;
    if (o.alpha) c.alpha = *o.alpha;
    if (o.seed) c.seed = *o.seed;
    if (o.views) c.views = *o.views;
    if (o.frames) c.frames = *o.frames;
    if (o.dim) c.dim = *o.dim;
    if (o.tokens_per_patch) c.tokens_per_patch = *o.tokens_per_patch;
    if (o.grid) {
        std::size_t rows = 0;
        std::size_t cols = 0;
        char x = 0;
        std::istringstream in(*o.grid);
        require(static_cast<bool>(in >> rows >> x >> cols) && (x == 'x' || x == 'X') && in.peek() == EOF,
                ErrorKind::config, "--grid expects RxC, got '" + *o.grid + "'");
        c.grid_rows = rows;
        c.grid_cols = cols;
    }
    if (o.axis) c.axis = parse_softmax_axis(*o.axis);
    if (o.q_source) c.q_source = parse_q_source(*o.q_source);
    if (o.residual) c.residual = true;
    if (o.has_class_token) c.has_class_token = true;
    if (o.binary_mask) c.binary_mask = true;
    c.validate();
    return c;
}

struct Input {
    std::optional<SceneSpec> scene;
    std::optional<EmbeddingInputs> files;
};

Input load_input(const Overrides& o, const PipelineConfig& c) {
    Input in;
    if (o.embeddings) {
        const fs::path dir = *o.embeddings;
        EmbeddingInputs files{dir / "image.lvde", dir / "text.lvde", dir / "support.lvde", std::nullopt};
        if (fs::exists(dir / "video.lvde")) {
            files.video = dir / "video.lvde";
        }
        in.files = files;
    } else if (o.scene) {
        in.scene = load_scene(*o.scene);
    } else {
        in.scene = make_demo_scene(demo_options(c));
    }
    return in;
}

PipelineOutput execute(const PipelineConfig& c, const Input& in) {
    return in.files ? run(c, *in.files) : run(c, *in.scene);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path.string());
    out << text;
    require(static_cast<bool>(out), ErrorKind::io, "failed writing " + path.string());
}

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
}

void write_outputs(const PipelineOutput& out, const fs::path& dir, bool emit_mask) {
    make_dir(dir);
    save_embeddings(out.final_tokens, dir / "final_tokens.lvde");
    save_embeddings(out.text, dir / "text_tokens.lvde");
    write_text(dir / "report.txt", report_to_text(out.report));
    write_text(dir / "report.json", report_to_json(out.report));
    if (emit_mask) {
        render_mask(out.mask, dir / "masks", out.report.config.binary_mask);
    }
}

int cmd_run(const Overrides& o) {
    const PipelineConfig c = effective_config(o);
    const Input in = load_input(o, c);
    const PipelineOutput out = execute(c, in);
    write_outputs(out, o.out, o.emit_mask);
    std::cout << report_to_text(out.report);
    return 0;
}

std::vector<std::pair<double, std::size_t>> parse_pairs(const std::vector<std::string>& items) {
    std::vector<std::pair<double, std::size_t>> pairs;
    for (const auto& item : items) {
        std::istringstream in(item);
        double s = 0;
        std::size_t c = 0;
        char sep = 0;
        require(static_cast<bool>(in >> s >> sep >> c) && sep == ':' && in.peek() == EOF, ErrorKind::config,
                "pair '" + item + "' is not SELECT:COMPRESS");
        pairs.emplace_back(s, c);
    }
    return pairs;
}

std::string pair_label(double s, std::size_t c) {
    std::ostringstream os;
    os << "s" << s << "_c" << c;
    return os.str();
}

int cmd_sweep(const Overrides& o, const std::vector<std::string>& pair_args, double target) {
    const auto pairs = parse_pairs(pair_args);
    require(!pairs.empty(), ErrorKind::config, "sweep needs at least one --pair SELECT:COMPRESS");
    const PipelineConfig base = effective_config(o);
    const Input in = load_input(o, base);
    const fs::path out_dir = o.out;
    make_dir(out_dir);

    SweepInput input;
    input.scene = in.scene ? &*in.scene : nullptr;
    input.files = in.files ? &*in.files : nullptr;
    const auto rows = sweep(base, input, pairs, target, [&](const SweepRow& row, const PipelineOutput& out) {
        write_outputs(out, out_dir / pair_label(row.select_ratio, row.compress_ratio), o.emit_mask);
    });

    nlohmann::ordered_json summary = nlohmann::ordered_json::array();
    for (const auto& row : rows) {
        summary.push_back({{"select_ratio", row.select_ratio},
                           {"compress_ratio", row.compress_ratio},
                           {"declared_reduction", row.reduction},
                           {"achieved_reduction", row.achieved_reduction},
                           {"target_reduction", target},
                           {"flagged", row.flagged}});
        if (row.flagged) {
            std::cerr << "flag: pair " << row.select_ratio << ":" << row.compress_ratio << " reduces by "
                      << row.reduction << ", not the target " << target
                      << " (m_in/out_tokens = " << row.achieved_reduction << ")\n";
        }
    }
    const std::string csv = sweep_to_csv(rows);
    write_text(out_dir / "sweep.csv", csv);
    write_text(out_dir / "sweep_summary.json", summary.dump(2) + "\n");
    std::cout << csv;
    return 0;
}

int cmd_verify(const std::vector<std::string>& suites, const fs::path& golden_dir) {
    const auto names = suites.empty() ? verify::suite_names() : suites;
    bool all = true;
    for (const auto& name : names) {
        const auto r = verify::run_suite(name, golden_dir);
        std::printf("%s %-14s %s (%.2f s)\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str(),
                    r.seconds);
        all = all && r.passed;
    }
    return all ? 0 : kExitVerify;
}

int cmd_goldens(const fs::path& dir) {
    for (const auto& path : verify::write_goldens(dir)) {
        std::cout << path.string() << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Query-aware visual token selection and compression"};
    app.require_subcommand(1);

    Overrides run_opts;
    auto* run_cmd = app.add_subcommand("run", "Run the pipeline once");
    add_common(run_cmd, run_opts);

    Overrides sweep_opts;
    std::vector<std::string> pair_args;
    double target = kReferenceReduction;
    auto* sweep_cmd = app.add_subcommand("sweep", "Run one pipeline per SELECT:COMPRESS pair and write sweep.csv");
    add_common(sweep_cmd, sweep_opts);
    sweep_cmd->add_option("--pair", pair_args, "Ratio pair SELECT:COMPRESS (repeatable)")->delimiter(',');
    sweep_cmd->add_option("--target-reduction", target, "Reduction that unflagged pairs must hit")
        ->capture_default_str();

    std::vector<std::string> suites;
    fs::path verify_goldens = QTOKEN_GOLDEN_DIR;
    auto* verify_cmd = app.add_subcommand("verify", "Run invariant suites");
    verify_cmd->add_option("--suite", suites, "Suite to run (repeatable); default all")
        ->check(CLI::IsMember(verify::suite_names()));
    verify_cmd->add_option("--golden-dir", verify_goldens, "Directory holding golden files")->capture_default_str();

    fs::path goldens_out = QTOKEN_GOLDEN_DIR;
    auto* goldens_cmd = app.add_subcommand("goldens", "Regenerate golden files");
    goldens_cmd->add_option("--out", goldens_out, "Destination directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*run_cmd) {
            return cmd_run(run_opts);
        }
        if (*sweep_cmd) {
            return cmd_sweep(sweep_opts, pair_args, target);
        }
        if (*verify_cmd) {
            return cmd_verify(suites, verify_goldens);
        }
        return cmd_goldens(goldens_out);
    } catch (const Error& e) {
        std::cerr << "qtoken: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "qtoken: " << e.what() << '\n';
        return kExitRuntime;
    }
}
