#include "m3/preset.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

namespace m3 {

using nlohmann::json;

GameState Preset::start() const {
    return new_game(config, RefillSource::scripted(refill, fallback_seed), grid);
}

Preset preset_from_json(const json& j) {
    try {
        if (j.value("schema", std::string{}) != kPresetSchema) {
            throw ConfigError(fmt::format("preset schema must be '{}'", kPresetSchema));
        }
        Preset p;
        p.id = j.at("id").get<std::string>();
        p.config.width = j.at("width").get<int>();
        p.config.height = j.at("height").get<int>();
        p.config.num_colors = j.at("num_colors").get<int>();
        p.config.moves_per_game = j.value("moves_per_game", 20);
        p.config.validate();
        p.fallback_seed = j.value("fallback_seed", std::uint64_t{0});

        const auto& rows = j.at("grid");
        if (!rows.is_array() || static_cast<int>(rows.size()) != p.config.height) {
            throw ConfigError(fmt::format("preset '{}': grid must have {} rows", p.id, p.config.height));
        }
        std::vector<Color> cells;
        for (const auto& row : rows) {
            if (!row.is_array() || static_cast<int>(row.size()) != p.config.width) {
                throw ConfigError(fmt::format("preset '{}': every row needs {} cells", p.id, p.config.width));
            }
            for (const auto& v : row) {
                const int color = v.get<int>();
                if (color < 0 || color >= p.config.num_colors) {
                    throw ConfigError(fmt::format("preset '{}': color {} out of range", p.id, color));
                }
                cells.push_back(static_cast<Color>(color));
            }
        }
        p.grid = Board(p.config.width, p.config.height, std::move(cells));

        const auto& queues = j.at("refill");
        if (!queues.is_array() || static_cast<int>(queues.size()) != p.config.width) {
            throw ConfigError(fmt::format("preset '{}': refill needs one queue per column", p.id));
        }
        for (const auto& q : queues) {
            auto& column = p.refill.emplace_back();
            for (const auto& v : q) {
                const int color = v.get<int>();
                if (color < 0 || color >= p.config.num_colors) {
                    throw ConfigError(fmt::format("preset '{}': refill color {} out of range", p.id, color));
                }
                column.push_back(static_cast<Color>(color));
            }
        }
        // Rejects grids with matches or no legal move.
        (void)p.start();
        return p;
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("malformed preset: {}", e.what()));
    }
}

json preset_to_json(const Preset& p) {
    json rows = json::array();
    for (int r = 0; r < p.grid.height(); ++r) {
        json row = json::array();
        for (int c = 0; c < p.grid.width(); ++c) {
            row.push_back(int{p.grid.at(r, c)});
        }
        rows.push_back(std::move(row));
    }
    json queues = json::array();
    for (const auto& q : p.refill) {
        json column = json::array();
        for (const Color c : q) {
            column.push_back(int{c});
        }
        queues.push_back(std::move(column));
    }
    return json{{"schema", kPresetSchema},
                {"id", p.id},
                {"width", p.config.width},
                {"height", p.config.height},
                {"num_colors", p.config.num_colors},
                {"moves_per_game", p.config.moves_per_game},
                {"grid", std::move(rows)},
                {"refill", std::move(queues)},
                {"fallback_seed", p.fallback_seed}};
}

Preset load_preset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(fmt::format("cannot open preset {}", path.string()));
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    }
    return preset_from_json(j);
}

void save_preset(const Preset& preset, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw RunError(fmt::format("cannot write preset {}", path.string()));
    }
    // One grid row or refill queue per line keeps the files hand-editable.
    const nlohmann::json j = preset_to_json(preset);
    const auto rows = [](const nlohmann::json& arr) {
        std::string text = "[\n";
        for (std::size_t i = 0; i < arr.size(); ++i) {
            text += "    " + arr[i].dump() + (i + 1 < arr.size() ? ",\n" : "\n");
        }
        return text + "  ]";
    };
    out << "{\n";
    for (const char* key : {"schema", "id", "width", "height", "num_colors", "moves_per_game"}) {
        out << "  \"" << key << "\": " << j.at(key).dump() << ",\n";
    }
    out << "  \"fallback_seed\": " << j.at("fallback_seed").dump() << ",\n";
    out << "  \"grid\": " << rows(j.at("grid")) << ",\n";
    out << "  \"refill\": " << rows(j.at("refill")) << "\n}\n";
    if (!out) {
        throw RunError(fmt::format("cannot write preset {}", path.string()));
    }
}

std::vector<Preset> load_presets(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw ConfigError(fmt::format("preset directory {} does not exist", dir.string()));
    }
    std::vector<Preset> presets;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            presets.push_back(load_preset(entry.path()));
        }
    }
    std::sort(presets.begin(), presets.end(),
              [](const Preset& a, const Preset& b) { return a.id < b.id; });
    return presets;
}

Preset make_preset(std::string id, const BoardConfig& config, std::uint64_t seed, int queue_length) {
    GameState game = new_game(config, RefillSource::seeded(seed));
    Preset p;
    p.id = std::move(id);
    p.config = config;
    p.grid = game.board;
    Rng rng(derive_seed(seed, 0x71756575ULL));
    p.refill.resize(static_cast<std::size_t>(config.width));
    for (auto& column : p.refill) {
        for (int k = 0; k < queue_length; ++k) {
            column.push_back(static_cast<Color>(rng.below(static_cast<std::uint64_t>(config.num_colors))));
        }
    }
    p.fallback_seed = derive_seed(seed, 0x66616c6cULL);
    return p;
}

}  // namespace m3
