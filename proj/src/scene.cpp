// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#include "qtoken/scene.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "qtoken/encoders.hpp"
#include "qtoken/error.hpp"

namespace qtoken {

namespace {

constexpr ConceptId kSky = 1;
constexpr ConceptId kRoad = 2;
constexpr ConceptId kSceneryBase = 3;
constexpr ConceptId kSceneryKinds = 10;

class SplitMixStream {
public:
    explicit SplitMixStream(std::uint64_t seed) : m_state(seed) {}

    std::uint64_t next() {
        const std::uint64_t out = splitmix64(m_state);
        m_state += 0x9E3779B97F4A7C15ULL;
        return out;
    }

    std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }

private:
    std::uint64_t m_state;
};

template <typename U>
std::vector<U> read_list(const YAML::Node& node, const char* key) {
    if (!node || !node.IsSequence()) {
        fail(ErrorKind::config, std::string("scene: '") + key + "' must be a list");
    }
    std::vector<U> out;
    for (const auto& item : node) {
        out.push_back(item.as<U>());
    }
    return out;
}

std::string list_to_string(const auto& values) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < values.size(); ++i) {
        os << (i ? ", " : "") << values[i];
    }
    os << ']';
    return os.str();
}

std::size_t position_of(const std::vector<std::uint32_t>& ids, std::uint32_t id, const char* what) {
    auto it = std::find(ids.begin(), ids.end(), id);
    require(it != ids.end(), ErrorKind::config, std::string("scene: unknown ") + what + " id " + std::to_string(id));
    return static_cast<std::size_t>(it - ids.begin());
}

}  // namespace

void SceneSpec::validate() const {
    require(!view_ids.empty(), ErrorKind::config, "scene: at least one view is required");
    require(!frame_ids.empty(), ErrorKind::config, "scene: at least one frame is required");
    require(grid_rows >= 1 && grid_cols >= 1, ErrorKind::config, "scene: grid dims must be >= 1");
    require(tokens_per_patch >= 1, ErrorKind::config, "scene: tokens_per_patch must be >= 1");
    require(std::set(view_ids.begin(), view_ids.end()).size() == view_ids.size(), ErrorKind::config,
            "scene: duplicate view id");
    require(std::set(frame_ids.begin(), frame_ids.end()).size() == frame_ids.size(), ErrorKind::config,
            "scene: duplicate frame id");
    require(cells.size() == view_count() * frame_count() * patch_count(), ErrorKind::config,
            "scene: cell table does not match views x frames x grid");
    for (ConceptId c : query) {
        require(c <= kMaxConceptId, ErrorKind::config, "scene: query concept id out of range");
    }
    for (const auto& cell : cells) {
        for (ConceptId c : cell) {
            require(c <= kMaxConceptId, ErrorKind::config, "scene: concept id " + std::to_string(c) + " out of range");
        }
    }
}

SceneSpec SceneSpec::truncated(std::size_t views, std::size_t frames) const {
    require(views >= 1 && views <= view_count(), ErrorKind::config,
            "scene has " + std::to_string(view_count()) + " views, requested " + std::to_string(views));
    require(frames >= 1 && frames <= frame_count(), ErrorKind::config,
            "scene has " + std::to_string(frame_count()) + " frames, requested " + std::to_string(frames));
    SceneSpec out = *this;
    const std::size_t first_frame = frame_count() - frames;
    out.view_ids.assign(view_ids.begin(), view_ids.begin() + static_cast<std::ptrdiff_t>(views));
    out.frame_ids.assign(frame_ids.begin() + static_cast<std::ptrdiff_t>(first_frame), frame_ids.end());
    out.cells.clear();
    for (std::size_t v = 0; v < views; ++v) {
        for (std::size_t f = first_frame; f < frame_count(); ++f) {
            for (std::size_t r = 0; r < grid_rows; ++r) {
                for (std::size_t c = 0; c < grid_cols; ++c) {
                    out.cells.push_back(concepts(v, f, r, c));
                }
            }
        }
    }
    return out;
}

std::vector<CellRef> query_matching_cells(const SceneSpec& scene, std::size_t frame) {
    std::vector<CellRef> out;
    for (std::size_t v = 0; v < scene.view_count(); ++v) {
        for (std::size_t r = 0; r < scene.grid_rows; ++r) {
            for (std::size_t c = 0; c < scene.grid_cols; ++c) {
                const auto& cell = scene.concepts(v, frame, r, c);
                const bool hit = std::any_of(cell.begin(), cell.end(), [&](ConceptId id) {
                    return std::find(scene.query.begin(), scene.query.end(), id) != scene.query.end();
                });
                if (hit) {
                    out.push_back({v, r, c});
                }
            }
        }
    }
    return out;
}

SceneSpec parse_scene(const std::string& yaml_text) {
    SceneSpec scene;
    try {
        const YAML::Node root = YAML::Load(yaml_text);
        require(root.IsMap(), ErrorKind::config, "scene: top level must be a mapping");
        if (root["tokens_per_patch"]) {
            scene.tokens_per_patch = root["tokens_per_patch"].as<std::size_t>();
        }
        const auto grid = read_list<std::size_t>(root["grid"], "grid");
        require(grid.size() == 2, ErrorKind::config, "scene: 'grid' must be [rows, cols]");
        scene.grid_rows = grid[0];
        scene.grid_cols = grid[1];
        scene.view_ids = read_list<std::uint32_t>(root["views"], "views");
        scene.frame_ids = read_list<std::uint32_t>(root["frames"], "frames");
        scene.query = read_list<ConceptId>(root["query"], "query");
        std::vector<ConceptId> fill;
        if (root["default_concepts"]) {
            fill = read_list<ConceptId>(root["default_concepts"], "default_concepts");
        }
        scene.cells.assign(scene.view_count() * scene.frame_count() * scene.patch_count(), fill);
        if (const YAML::Node cells = root["cells"]) {
            require(cells.IsSequence(), ErrorKind::config, "scene: 'cells' must be a list");
            for (const auto& cell : cells) {
                const auto v = position_of(scene.view_ids, cell["view"].as<std::uint32_t>(), "view");
                const auto f = position_of(scene.frame_ids, cell["frame"].as<std::uint32_t>(), "frame");
                const auto r = cell["row"].as<std::size_t>();
                const auto c = cell["col"].as<std::size_t>();
                require(r < scene.grid_rows && c < scene.grid_cols, ErrorKind::config,
                        "scene: cell (" + std::to_string(r) + ", " + std::to_string(c) + ") outside the grid");
                scene.concepts(v, f, r, c) = read_list<ConceptId>(cell["concepts"], "concepts");
            }
        }
    } catch (const YAML::Exception& e) {
        fail(ErrorKind::config, std::string("scene: ") + e.what());
    }
    scene.validate();
    return scene;
}

SceneSpec load_scene(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::io, "cannot open scene file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_scene(buffer.str());
}

std::string scene_to_yaml(const SceneSpec& scene) {
    std::ostringstream os;
    os << "tokens_per_patch: " << scene.tokens_per_patch << '\n';
    os << "grid: [" << scene.grid_rows << ", " << scene.grid_cols << "]\n";
    os << "views: " << list_to_string(scene.view_ids) << '\n';
    os << "frames: " << list_to_string(scene.frame_ids) << '\n';
    os << "query: " << list_to_string(scene.query) << '\n';
    os << "default_concepts: []\n";
    os << "cells:\n";
    for (std::size_t v = 0; v < scene.view_count(); ++v) {
        for (std::size_t f = 0; f < scene.frame_count(); ++f) {
            for (std::size_t r = 0; r < scene.grid_rows; ++r) {
                for (std::size_t c = 0; c < scene.grid_cols; ++c) {
                    const auto& cell = scene.concepts(v, f, r, c);
                    if (cell.empty()) {
                        continue;
                    }
                    os << "  - {view: " << scene.view_ids[v] << ", frame: " << scene.frame_ids[f] << ", row: " << r
                       << ", col: " << c << ", concepts: " << list_to_string(cell) << "}\n";
                }
            }
        }
    }
    return os.str();
}

void save_scene(const SceneSpec& scene, const std::filesystem::path& path) {
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorKind::io, "cannot write scene file " + path.string());
    out << scene_to_yaml(scene);
    require(static_cast<bool>(out), ErrorKind::io, "failed writing scene file " + path.string());
}

SceneSpec make_demo_scene(const DemoSceneOptions& options) {
    SceneSpec scene;
    scene.grid_rows = options.grid_rows;
    scene.grid_cols = options.grid_cols;
    scene.tokens_per_patch = options.tokens_per_patch;
    scene.view_ids.resize(options.views);
    std::iota(scene.view_ids.begin(), scene.view_ids.end(), 0u);
    scene.frame_ids.resize(options.frames);
    std::iota(scene.frame_ids.begin(), scene.frame_ids.end(), 0u);
    scene.query = {kQueryConcept, kUnmatchedQueryConcept};
    scene.cells.resize(options.views * options.frames * scene.patch_count());
    require(options.planted_per_view <= (scene.grid_rows > 1 ? scene.patch_count() - scene.grid_cols : scene.patch_count()),
            ErrorKind::config,
            "demo scene: more planted cells than patches");

    SplitMixStream rng(options.seed);
    for (std::size_t v = 0; v < options.views; ++v) {
        std::vector<std::vector<ConceptId>> layout(scene.patch_count());
        for (std::size_t r = 0; r < scene.grid_rows; ++r) {
            for (std::size_t c = 0; c < scene.grid_cols; ++c) {
                auto& cell = layout[r * scene.grid_cols + c];
                if (r == 0) {
                    cell.push_back(kSky);
                } else if (r + 1 == scene.grid_rows) {
                    cell.push_back(kRoad);
                } else {
                    cell.push_back(kSceneryBase + rng.below(kSceneryKinds));
                }
                if (rng.below(10) < 3) {
                    cell.push_back(kSceneryBase + rng.below(kSceneryKinds));
                }
            }
        }
        // partial Fisher-Yates over cell positions below the sky row
        const std::size_t first_cell = scene.grid_rows > 1 ? scene.grid_cols : 0;
        std::vector<std::size_t> order(scene.patch_count() - first_cell);
        std::iota(order.begin(), order.end(), first_cell);
        for (std::size_t i = 0; i < options.planted_per_view; ++i) {
            std::swap(order[i], order[i + rng.below(order.size() - i)]);
            auto& cell = layout[order[i]];
            cell.insert(cell.begin(), kQueryConcept);
        }
        for (std::size_t f = 0; f < options.frames; ++f) {
            for (std::size_t p = 0; p < scene.patch_count(); ++p) {
                scene.cells[scene.cell_index(v, f, p / scene.grid_cols, p % scene.grid_cols)] = layout[p];
            }
        }
    }
    scene.validate();
    return scene;
}

}  // namespace qtoken
