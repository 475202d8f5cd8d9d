#include "m3/trace.hpp"

#include <fmt/format.h>

namespace m3 {

using nlohmann::json;

namespace {

json cell_to_json(Cell c) { return json::array({c.row, c.col}); }

Cell cell_from_json(const json& j) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
        throw InputError("a cell must be a [row, col] pair of integers");
    }
    return Cell{j[0].get<int>(), j[1].get<int>()};
}

json spawn_event_to_json(const SpawnEvent& event) {
    if (const auto* s = std::get_if<Spawn>(&event)) {
        return json::array({s->cell.row, s->cell.col, int{s->color}});
    }
    const auto& grid = std::get<Reshuffle>(event).grid;
    json cells = json::array();
    for (const Color c : grid) {
        cells.push_back(int{c});
    }
    return json{{"reshuffle", std::move(cells)}};
}

SpawnEvent spawn_event_from_json(const json& j) {
    if (j.is_array()) {
        return Spawn{Cell{j.at(0).get<int>(), j.at(1).get<int>()}, static_cast<Color>(j.at(2).get<int>())};
    }
    Reshuffle r;
    for (const auto& v : j.at("reshuffle")) {
        r.grid.push_back(static_cast<Color>(v.get<int>()));
    }
    return r;
}

}  // namespace

int PlayTrace::valid_move_count() const {
    int n = 0;
    for (const auto& m : moves) {
        n += m.valid ? 1 : 0;
    }
    return n;
}

std::vector<int> PlayTrace::available_counts() const {
    std::vector<int> counts;
    for (const auto& m : moves) {
        if (m.valid || config.invalid_swap_consumes_move) {
            counts.push_back(m.available_after);
        }
    }
    return counts;
}

json move_to_json(const Move& move) { return json{{"a", cell_to_json(move.a)}, {"b", cell_to_json(move.b)}}; }

Move move_from_json(const json& j) {
    if (!j.is_object() || !j.contains("a") || !j.contains("b")) {
        throw InputError("a move must be an object {\"a\": [r, c], \"b\": [r, c]}");
    }
    return Move{cell_from_json(j["a"]), cell_from_json(j["b"])};
}

json trace_to_json(const PlayTrace& t) {
    json round = t.round.kind == RoundSpec::Kind::Preset
                     ? json{{"kind", "preset"}, {"preset_id", t.round.preset_id}}
                     : json{{"kind", "random"}, {"seed", t.round.seed}};
    json grid = json::array();
    for (const Color c : t.initial.cells()) {
        grid.push_back(int{c});
    }
    json moves = json::array();
    for (const auto& m : t.moves) {
        moves.push_back(json{{"a", cell_to_json(m.move.a)},
                             {"b", cell_to_json(m.move.b)},
                             {"valid", m.valid},
                             {"points", m.points},
                             {"cascade_steps", m.cascade_steps},
                             {"available_after", m.available_after},
                             {"reshuffled", m.reshuffled},
                             {"t_ms", m.timestamp_ms}});
    }
    json spawns = json::array();
    for (const auto& e : t.spawn_log) {
        spawns.push_back(spawn_event_to_json(e));
    }
    json available = json::array();
    for (const int n : t.available_counts()) {
        available.push_back(n);
    }
    return json{{"schema", kTraceSchema},
                {"session_id", t.session_id},
                {"participant", t.participant},
                {"round_index", t.round_index},
                {"round", std::move(round)},
                {"config",
                 {{"width", t.config.width},
                  {"height", t.config.height},
                  {"num_colors", t.config.num_colors},
                  {"moves_per_game", t.config.moves_per_game},
                  {"invalid_swap_consumes_move", t.config.invalid_swap_consumes_move}}},
                {"initial", std::move(grid)},
                {"moves", std::move(moves)},
                {"spawn_log", std::move(spawns)},
                {"available_counts", std::move(available)},
                {"final_score", t.final_score}};
}

PlayTrace trace_from_json(const json& j) {
    try {
        if (j.value("schema", std::string{}) != kTraceSchema) {
            throw ConfigError(fmt::format("trace schema must be '{}'", kTraceSchema));
        }
        PlayTrace t;
        t.session_id = j.at("session_id").get<std::string>();
        t.participant = j.value("participant", std::string{});
        t.round_index = j.value("round_index", 0);
        const auto& round = j.at("round");
        if (round.at("kind").get<std::string>() == "preset") {
            t.round = RoundSpec::preset(round.at("preset_id").get<std::string>());
        } else {
            t.round = RoundSpec::random(round.at("seed").get<std::uint64_t>());
        }
        const auto& cfg = j.at("config");
        t.config.width = cfg.at("width").get<int>();
        t.config.height = cfg.at("height").get<int>();
        t.config.num_colors = cfg.at("num_colors").get<int>();
        t.config.moves_per_game = cfg.at("moves_per_game").get<int>();
        t.config.invalid_swap_consumes_move = cfg.value("invalid_swap_consumes_move", false);
        std::vector<Color> cells;
        for (const auto& v : j.at("initial")) {
            cells.push_back(static_cast<Color>(v.get<int>()));
        }
        t.initial = Board(t.config.width, t.config.height, std::move(cells));
        for (const auto& m : j.at("moves")) {
            TraceMove tm;
            tm.move = Move{cell_from_json(m.at("a")), cell_from_json(m.at("b"))};
            tm.valid = m.at("valid").get<bool>();
            tm.points = m.value("points", std::int64_t{0});
            tm.cascade_steps = m.value("cascade_steps", 0);
            tm.available_after = m.value("available_after", 0);
            tm.reshuffled = m.value("reshuffled", false);
            tm.timestamp_ms = m.value("t_ms", std::int64_t{0});
            t.moves.push_back(tm);
        }
        for (const auto& e : j.at("spawn_log")) {
            t.spawn_log.push_back(spawn_event_from_json(e));
        }
        t.final_score = j.at("final_score").get<std::int64_t>();
        return t;
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("malformed trace: {}", e.what()));
    }
}

GameState replay_trace(const PlayTrace& trace) {
    std::vector<Move> moves;
    moves.reserve(trace.moves.size());
    for (const auto& m : trace.moves) {
        moves.push_back(m.move);
    }
    return replay(trace.config, trace.initial, moves, trace.spawn_log);
}

bool verify_trace(const PlayTrace& trace) {
    try {
        return replay_trace(trace).score == trace.final_score;
    } catch (const Error&) {
        return false;
    }
}

}  // namespace m3
