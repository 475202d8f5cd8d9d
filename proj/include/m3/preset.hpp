#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "m3/engine.hpp"

namespace m3 {

inline constexpr const char* kPresetSchema = "m3-preset/1";

/// A predetermined board: fixed initial grid plus the tiles that will fall
/// into each column, in order. Once a column's queue runs out, tiles come
/// from a stream seeded with `fallback_seed`.
///
/// On disk (JSON):
///   { "schema": "m3-preset/1", "id": "board-1",
///     "width": 7, "height": 7, "num_colors": 6,
///     "grid":   [[c, c, ...], ...],      // `height` rows, top row first
///     "refill": [[c, c, ...], ...],      // `width` queues, first entry falls first
///     "fallback_seed": 17 }              // optional, default 0
struct Preset {
    std::string id;
    BoardConfig config;
    Board grid;
    std::vector<std::vector<Color>> refill;
    std::uint64_t fallback_seed = 0;

    GameState start() const;
};

Preset preset_from_json(const nlohmann::json& j);
nlohmann::json preset_to_json(const Preset& preset);

Preset load_preset(const std::filesystem::path& path);
void save_preset(const Preset& preset, const std::filesystem::path& path);

/// Every `*.json` preset in `dir`, sorted by id.
std::vector<Preset> load_presets(const std::filesystem::path& dir);

/// Builds a preset from a seeded game: the generated initial board plus
/// `queue_length` pre-drawn tiles per column.
Preset make_preset(std::string id, const BoardConfig& config, std::uint64_t seed, int queue_length);

}  // namespace m3
