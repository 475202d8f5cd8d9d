#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "m3/engine.hpp"

namespace m3 {

inline constexpr const char* kTraceSchema = "m3-trace/1";

/// Which board a round is played on.
struct RoundSpec {
    enum class Kind { Preset, Random };

    Kind kind = Kind::Random;
    std::string preset_id;   // Kind::Preset
    std::uint64_t seed = 0;  // Kind::Random

    static RoundSpec preset(std::string id) { return {Kind::Preset, std::move(id), 0}; }
    static RoundSpec random(std::uint64_t seed) { return {Kind::Random, {}, seed}; }

    friend bool operator==(const RoundSpec&, const RoundSpec&) = default;
};

struct TraceMove {
    Move move;
    bool valid = false;
    std::int64_t points = 0;
    int cascade_steps = 0;
    int available_after = 0;
    bool reshuffled = false;
    std::int64_t timestamp_ms = 0;
};

/// Replayable record of one game. `moves` includes rejected swaps.
struct PlayTrace {
    std::string session_id;
    std::string participant;
    int round_index = 0;
    RoundSpec round;
    BoardConfig config;
    Board initial;
    std::vector<TraceMove> moves;
    std::vector<SpawnEvent> spawn_log;
    std::int64_t final_score = 0;

    int valid_move_count() const;
    /// Post-resolution legal-move counts, one per move that used a turn.
    std::vector<int> available_counts() const;
};

nlohmann::json trace_to_json(const PlayTrace& trace);
PlayTrace trace_from_json(const nlohmann::json& j);

nlohmann::json move_to_json(const Move& move);
/// Accepts {"a": [r, c], "b": [r, c]}. Throws InputError when malformed.
Move move_from_json(const nlohmann::json& j);

/// Runs the trace's moves against its spawn log and returns the end state.
GameState replay_trace(const PlayTrace& trace);

/// True when the replay reproduces `final_score` exactly.
bool verify_trace(const PlayTrace& trace);

}  // namespace m3
