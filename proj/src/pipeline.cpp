// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#include "qtoken/pipeline.hpp"

#include <yaml-cpp/yaml.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "qtoken/embedding_io.hpp"
#include "qtoken/encoders.hpp"
#include "qtoken/ops.hpp"

namespace qtoken {

namespace {

using Clock = std::chrono::steady_clock;

const std::set<std::string> kConfigKeys = {
    "dim",          "patch_pixels",   "grid", "views", "frames", "tokens_per_patch", "select_ratio", "compress_ratio",
    "tau",          "alpha",          "seed", "axis",  "q_source", "residual",       "has_class_token",
    "binary_mask",
};

/// Runs `body` and rethrows library errors tagged with the stage name.
template <typename F>
auto stage(const char* name, PipelineReport& report, F&& body) {
    const auto start = Clock::now();
    try {
        auto result = body();
        report.stage_ms.emplace_back(name, std::chrono::duration<double, std::milli>(Clock::now() - start).count());
        return result;
    } catch (const Error& e) {
        throw e.with_stage(name);
    }
}

TensorF drop_first_row(const TensorF& t, const std::filesystem::path& path) {
    require(t.rows() >= 2, ErrorKind::format, path.string() + ": class-token removal needs at least 2 rows");
    std::vector<std::size_t> rows(t.rows() - 1);
    std::iota(rows.begin(), rows.end(), std::size_t{1});
    return gather_rows(t, std::span<const std::size_t>(rows));
}

SelectionParams<float> selection_params(const PipelineConfig& config) {
    SelectionParams<float> params;
    params.tau = static_cast<float>(config.tau);
    params.alpha = static_cast<float>(config.alpha);
    params.select_ratio = config.select_ratio;
    params.compress_ratio = config.compress_ratio;
    params.axis = config.axis;
    return params;
}

/// Selection, enhancement and accounting shared by the scene and file paths.
PipelineOutput finish(const PipelineConfig& config, const TensorF& image, TensorF text, const TensorF& support,
                      const std::optional<TensorF>& video, std::vector<std::uint32_t> view_ids,
                      std::uint32_t frame_id, PipelineReport report) {
    PipelineOutput out;
    report.m_in = image.rows();
    const Budget b = stage("budget", report, [&] { return budget(image.rows(), config.select_ratio, config.compress_ratio); });
    out.selection = stage("select", report, [&] { return select_tokens(image, text, selection_params(config), b.k); });
    out.enhanced = stage("enhance", report, [&] {
        EnhancementParams<float> params;
        params.residual = config.residual;
        const TensorF& q = config.q_source == QSource::selected ? out.selection.compressed : out.selection.aligned;
        return enhance(q, support, video ? &*video : nullptr, params);
    });
    out.mask = stage("mask", report, [&] {
        return make_mask(std::move(view_ids), frame_id, config.grid_rows, config.grid_cols, config.tokens_per_patch,
                         out.selection.indices);
    });
    out.final_tokens = out.enhanced.fused;
    out.text = std::move(text);

    report.k_selected = b.k;
    report.out_tokens = b.out_tokens;
    report.final_rows = out.final_tokens.rows();
    report.achieved_reduction = static_cast<double>(report.m_in) / static_cast<double>(b.out_tokens);
    report.declared_reduction = config.declared_reduction();
    report.temporal_branch = video.has_value();
    report.config = config;
    out.report = std::move(report);
    return out;
}

std::string format_number(double v) {
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

}  // namespace

std::string_view to_string(QSource source) {
    return source == QSource::selected ? "selected" : "all";
}

QSource parse_q_source(std::string_view name) {
    if (name == "selected") {
        return QSource::selected;
    }
    if (name == "all") {
        return QSource::all;
    }
    fail(ErrorKind::config, "unknown q-source '" + std::string(name) + "' (expected selected or all)");
}

void PipelineConfig::validate() const {
    auto positive = [](std::size_t v, const char* what) {
        require(v >= 1, ErrorKind::config, std::string(what) + " must be >= 1");
    };
    positive(dim, "dim");
    positive(patch_pixels, "patch_pixels");
    positive(grid_rows, "grid rows");
    positive(grid_cols, "grid cols");
    positive(views, "views");
    positive(frames, "frames");
    positive(tokens_per_patch, "tokens_per_patch");
    positive(compress_ratio, "compress_ratio");
    require(std::isfinite(select_ratio) && select_ratio >= 1.0, ErrorKind::config, "select_ratio must be >= 1");
    require(std::isfinite(tau) && tau > 0.0, ErrorKind::config, "tau must be positive");
    require(alpha >= 0.0 && alpha <= 1.0, ErrorKind::config, "alpha must lie in [0, 1]");
}

PipelineConfig parse_config(const std::string& yaml_text, PipelineConfig base) {
    PipelineConfig c = std::move(base);
    try {
        const YAML::Node root = YAML::Load(yaml_text);
        if (root.IsNull()) {
            return c;
        }
        require(root.IsMap(), ErrorKind::config, "config: top level must be a mapping");
        for (const auto& item : root) {
            const auto key = item.first.as<std::string>();
            require(kConfigKeys.count(key) == 1, ErrorKind::config, "config: unknown key '" + key + "'");
        }
        auto read = [&](const char* key, auto& field) {
            if (root[key]) {
                field = root[key].as<std::remove_reference_t<decltype(field)>>();
            }
        };
        read("dim", c.dim);
        read("patch_pixels", c.patch_pixels);
        read("views", c.views);
        read("frames", c.frames);
        read("tokens_per_patch", c.tokens_per_patch);
        read("select_ratio", c.select_ratio);
        read("compress_ratio", c.compress_ratio);
        read("tau", c.tau);
        read("alpha", c.alpha);
        read("seed", c.seed);
        read("residual", c.residual);
        read("has_class_token", c.has_class_token);
        read("binary_mask", c.binary_mask);
        if (root["grid"]) {
            const YAML::Node grid = root["grid"];
            require(grid.IsSequence() && grid.size() == 2, ErrorKind::config, "config: 'grid' must be [rows, cols]");
            c.grid_rows = grid[0].as<std::size_t>();
            c.grid_cols = grid[1].as<std::size_t>();
        }
        if (root["axis"]) {
            c.axis = parse_softmax_axis(root["axis"].as<std::string>());
        }
        if (root["q_source"]) {
            c.q_source = parse_q_source(root["q_source"].as<std::string>());
        }
    } catch (const YAML::Exception& e) {
        fail(ErrorKind::config, std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::io, "cannot open config file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(), std::move(base));
}

std::string config_to_yaml(const PipelineConfig& c) {
    std::ostringstream os;
    os << "dim: " << c.dim << '\n'
       << "patch_pixels: " << c.patch_pixels << '\n'
       << "grid: [" << c.grid_rows << ", " << c.grid_cols << "]\n"
       << "views: " << c.views << '\n'
       << "frames: " << c.frames << '\n'
       << "tokens_per_patch: " << c.tokens_per_patch << '\n'
       << "select_ratio: " << format_number(c.select_ratio) << '\n'
       << "compress_ratio: " << c.compress_ratio << '\n'
       << "tau: " << format_number(c.tau) << '\n'
       << "alpha: " << format_number(c.alpha) << '\n'
       << "seed: " << c.seed << '\n'
       << "axis: " << to_string(c.axis) << '\n'
       << "q_source: " << to_string(c.q_source) << '\n'
       << "residual: " << (c.residual ? "true" : "false") << '\n'
       << "has_class_token: " << (c.has_class_token ? "true" : "false") << '\n'
       << "binary_mask: " << (c.binary_mask ? "true" : "false") << '\n';
    return os.str();
}

Budget budget(std::size_t m, double select_ratio, std::size_t compress_ratio) {
    require(std::isfinite(select_ratio) && select_ratio >= 1.0, ErrorKind::parameter, "select ratio must be >= 1");
    require(compress_ratio >= 1, ErrorKind::parameter, "compress ratio must be >= 1");
    const double per_output = select_ratio * static_cast<double>(compress_ratio);
    const auto out = static_cast<std::size_t>(std::floor(static_cast<double>(m) / per_output));
    require(out >= 1, ErrorKind::budget,
            std::to_string(m) + " tokens cannot cover one output token at select ratio " + format_number(select_ratio) +
                " x compress ratio " + std::to_string(compress_ratio));
    return {out * compress_ratio, out};
}

std::size_t SelectionMask::count() const {
    return static_cast<std::size_t>(std::count(selected.begin(), selected.end(), std::uint8_t{1}));
}

std::size_t SelectionMask::patch_hits(std::size_t view, std::size_t row, std::size_t col) const {
    const std::size_t base = ((view * grid_rows + row) * grid_cols + col) * tokens_per_patch;
    return static_cast<std::size_t>(std::count(selected.begin() + static_cast<std::ptrdiff_t>(base),
                                               selected.begin() + static_cast<std::ptrdiff_t>(base + tokens_per_patch),
                                               std::uint8_t{1}));
}

SelectionMask make_mask(std::vector<std::uint32_t> view_ids, std::uint32_t frame_id, std::size_t grid_rows,
                        std::size_t grid_cols, std::size_t tokens_per_patch, std::span<const std::size_t> indices) {
    SelectionMask mask;
    mask.view_ids = std::move(view_ids);
    mask.frame_id = frame_id;
    mask.grid_rows = grid_rows;
    mask.grid_cols = grid_cols;
    mask.tokens_per_patch = tokens_per_patch;
    mask.selected.assign(mask.view_ids.size() * grid_rows * grid_cols * tokens_per_patch, 0);
    for (std::size_t i : indices) {
        require(i < mask.selected.size(), ErrorKind::contract,
                "mask: selected index " + std::to_string(i) + " outside " + std::to_string(mask.selected.size()) +
                    " tokens");
        mask.selected[i] = 1;
    }
    return mask;
}

std::vector<std::uint8_t> mask_to_pgm(const SelectionMask& mask, std::size_t view, bool binary) {
    require(view < mask.view_ids.size(), ErrorKind::contract, "mask: view index out of range");
    const std::size_t width = mask.grid_cols * kMaskCellPixels;
    const std::size_t height = mask.grid_rows * kMaskCellPixels;
    const std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    bytes.reserve(bytes.size() + width * height);
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            const std::size_t hits = mask.patch_hits(view, y / kMaskCellPixels, x / kMaskCellPixels);
            std::uint8_t level;
            if (binary) {
                level = hits > 0 ? 255 : 0;
            } else {
                // round(255 * hits / tpp) in integers
                level = static_cast<std::uint8_t>((510 * hits + mask.tokens_per_patch) / (2 * mask.tokens_per_patch));
            }
            bytes.push_back(level);
        }
    }
    return bytes;
}

std::string mask_filename(const SelectionMask& mask, std::size_t view) {
    return "view" + std::to_string(mask.view_ids.at(view)) + "_frame" + std::to_string(mask.frame_id) + ".pgm";
}

std::vector<std::filesystem::path> render_mask(const SelectionMask& mask, const std::filesystem::path& dir,
                                               bool binary) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    require(!ec, ErrorKind::io, "cannot create mask directory " + dir.string() + ": " + ec.message());
    std::vector<std::filesystem::path> written;
    for (std::size_t v = 0; v < mask.view_ids.size(); ++v) {
        const auto path = dir / mask_filename(mask, v);
        const auto bytes = mask_to_pgm(mask, v, binary);
        std::ofstream out(path, std::ios::binary);
        require(static_cast<bool>(out), ErrorKind::io, "cannot write mask " + path.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        require(static_cast<bool>(out), ErrorKind::io, "failed writing mask " + path.string());
        written.push_back(path);
    }
    return written;
}

std::string report_to_text(const PipelineReport& r) {
    std::ostringstream os;
    os << "source: " << r.source << '\n'
       << "m_in: " << r.m_in << '\n'
       << "k_selected: " << r.k_selected << '\n'
       << "out_tokens: " << r.out_tokens << '\n'
       << "final_rows: " << r.final_rows << '\n'
       << "achieved_reduction: " << format_number(r.achieved_reduction) << '\n'
       << "declared_reduction: " << format_number(r.declared_reduction) << '\n'
       << "temporal_branch: " << (r.temporal_branch ? "true" : "false") << '\n';
    for (const auto& [name, ms] : r.stage_ms) {
        os << "stage_ms." << name << ": " << format_number(ms) << '\n';
    }
    std::istringstream config(config_to_yaml(r.config));
    for (std::string line; std::getline(config, line);) {
        os << "config." << line << '\n';
    }
    return os.str();
}

std::string report_to_json(const PipelineReport& r) {
    nlohmann::ordered_json j;
    j["source"] = r.source;
    j["m_in"] = r.m_in;
    j["k_selected"] = r.k_selected;
    j["out_tokens"] = r.out_tokens;
    j["final_rows"] = r.final_rows;
    j["achieved_reduction"] = r.achieved_reduction;
    j["declared_reduction"] = r.declared_reduction;
    j["temporal_branch"] = r.temporal_branch;
    nlohmann::ordered_json stages = nlohmann::ordered_json::object();
    for (const auto& [name, ms] : r.stage_ms) {
        stages[name] = ms;
    }
    j["stage_ms"] = stages;
    const auto& c = r.config;
    j["config"] = {
        {"dim", c.dim},
        {"patch_pixels", c.patch_pixels},
        {"grid", {c.grid_rows, c.grid_cols}},
        {"views", c.views},
        {"frames", c.frames},
        {"tokens_per_patch", c.tokens_per_patch},
        {"select_ratio", c.select_ratio},
        {"compress_ratio", c.compress_ratio},
        {"tau", c.tau},
        {"alpha", c.alpha},
        {"seed", c.seed},
        {"axis", std::string(to_string(c.axis))},
        {"q_source", std::string(to_string(c.q_source))},
        {"residual", c.residual},
        {"has_class_token", c.has_class_token},
        {"binary_mask", c.binary_mask},
    };
    return j.dump(2) + "\n";
}

DemoSceneOptions demo_options(const PipelineConfig& config) {
    DemoSceneOptions opt;
    opt.views = config.views;
    opt.frames = config.frames;
    opt.grid_rows = config.grid_rows;
    opt.grid_cols = config.grid_cols;
    opt.tokens_per_patch = config.tokens_per_patch;
    opt.seed = config.seed;
    const std::size_t eligible = config.grid_rows > 1 ? (config.grid_rows - 1) * config.grid_cols : config.grid_cols;
    opt.planted_per_view = std::min<std::size_t>(opt.planted_per_view, eligible);
    return opt;
}

PipelineOutput run(const PipelineConfig& config) {
    config.validate();
    return run(config, make_demo_scene(demo_options(config)));
}

PipelineOutput run(const PipelineConfig& config, const SceneSpec& full_scene) {
    config.validate();
    require(full_scene.grid_rows == config.grid_rows && full_scene.grid_cols == config.grid_cols, ErrorKind::config,
            "scene grid " + std::to_string(full_scene.grid_rows) + "x" + std::to_string(full_scene.grid_cols) +
                " does not match configured grid " + std::to_string(config.grid_rows) + "x" +
                std::to_string(config.grid_cols));
    require(full_scene.tokens_per_patch == config.tokens_per_patch, ErrorKind::config,
            "scene tokens_per_patch does not match the config");
    PipelineReport report;
    report.source = "scene";
    const SceneSpec scene = stage("scene", report, [&] { return full_scene.truncated(config.views, config.frames); });
    const std::size_t current = scene.frame_count() - 1;

    TensorF text;
    TensorF image;
    TensorF support;
    std::optional<TensorF> video;
    stage("encode", report, [&] {
        tile_patches(config.grid_rows * config.patch_pixels, config.grid_cols * config.patch_pixels,
                     config.patch_pixels);
        text = mock_text_encoder<float>(scene, config.dim, config.seed);
        image = mock_main_encoder<float>(scene, config.dim, config.seed, current).embeddings;
        support = mock_support_encoder<float>(scene, config.dim, config.seed, current);
        if (scene.frame_count() > 1) {
            video = mock_video_encoder<float>(scene, config.dim, config.seed);
        }
        return 0;
    });
    return finish(config, image, std::move(text), support, video, scene.view_ids, scene.frame_ids[current],
                  std::move(report));
}

PipelineOutput run(const PipelineConfig& config, const EmbeddingInputs& inputs) {
    config.validate();
    PipelineReport report;
    report.source = "embeddings";
    TensorF text;
    TensorF image;
    TensorF support;
    std::optional<TensorF> video;
    stage("load", report, [&] {
        auto load = [&](const std::filesystem::path& path) {
            TensorF t = load_embeddings(path);
            return config.has_class_token ? drop_first_row(t, path) : t;
        };
        image = load(inputs.image);
        text = load(inputs.text);
        support = load(inputs.support);
        if (inputs.video) {
            video = load(*inputs.video);
        }
        for (const TensorF* t : {&image, &text, &support}) {
            require(t->cols() == config.dim, ErrorKind::config,
                    "embedding width " + std::to_string(t->cols()) + " does not match dim " + std::to_string(config.dim));
        }
        require(!video || video->cols() == config.dim, ErrorKind::config, "video embedding width does not match dim");
        require(image.rows() == config.token_count(), ErrorKind::config,
                "image embeddings have " + std::to_string(image.rows()) + " rows, the configured layout needs " +
                    std::to_string(config.token_count()));
        return 0;
    });
    std::vector<std::uint32_t> view_ids(config.views);
    std::iota(view_ids.begin(), view_ids.end(), 0u);
    return finish(config, image, std::move(text), support, video, std::move(view_ids),
                  static_cast<std::uint32_t>(config.frames - 1), std::move(report));
}

std::vector<SweepRow> sweep(const PipelineConfig& base, SweepInput input,
                            const std::vector<std::pair<double, std::size_t>>& pairs, double target,
                            const std::function<void(const SweepRow&, const PipelineOutput&)>& on_run) {
    require(!pairs.empty(), ErrorKind::config, "sweep needs at least one SELECT:COMPRESS pair");
    require((input.scene != nullptr) != (input.files != nullptr), ErrorKind::contract,
            "sweep needs exactly one of a scene or embedding files");
    std::vector<SweepRow> rows;
    for (const auto& [s, c] : pairs) {
        PipelineConfig config = base;
        config.select_ratio = s;
        config.compress_ratio = c;
        const auto start = Clock::now();
        const PipelineOutput out = input.scene ? run(config, *input.scene) : run(config, *input.files);
        SweepRow row;
        row.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
        row.select_ratio = s;
        row.compress_ratio = c;
        row.m_in = out.report.m_in;
        row.k = out.report.k_selected;
        row.out_tokens = out.report.out_tokens;
        row.reduction = config.declared_reduction();
        row.achieved_reduction = out.report.achieved_reduction;
        row.recall = input.scene ? planted_recall(input.scene->truncated(config.views, config.frames), out.mask)
                                 : std::nan("");
        row.flagged = row.reduction != target;
        if (on_run) {
            on_run(row, out);
        }
        rows.push_back(row);
    }
    return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << kSweepCsvHeader << '\n';
    for (const auto& r : rows) {
        os << format_number(r.select_ratio) << ',' << r.compress_ratio << ',' << r.m_in << ',' << r.k << ','
           << r.out_tokens << ',' << format_number(r.reduction) << ',' << format_number(r.recall) << ','
           << format_number(r.wall_ms) << '\n';
    }
    return os.str();
}

double planted_recall(const SceneSpec& scene, const SelectionMask& mask) {
    const auto cells = query_matching_cells(scene, scene.frame_count() - 1);
    if (cells.empty()) {
        return 1.0;
    }
    std::size_t hit = 0;
    for (const auto& cell : cells) {
        hit += mask.patch_hits(cell.view, cell.row, cell.col) > 0 ? 1 : 0;
    }
    return static_cast<double>(hit) / static_cast<double>(cells.size());
}

}  // namespace qtoken
