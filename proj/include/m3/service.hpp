#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "m3/engine.hpp"
#include "m3/experiments.hpp"
#include "m3/preset.hpp"
#include "m3/trace.hpp"

namespace m3::service {

inline constexpr int kRoundsPerSession = 6;
inline constexpr int kPresetRounds = 3;
inline constexpr int kMovesPerRound = 20;

/// Three presets drawn from the pool and three fresh random seeds, in an
/// order shuffled with the same seed. Same inputs, same plan.
std::vector<RoundSpec> make_round_plan(const std::vector<std::string>& preset_ids, std::uint64_t seed);

/// A directory holding one `<session>.json` file per closed session.
class TraceStore {
public:
    explicit TraceStore(std::filesystem::path dir);

    /// Throws EngineFault when a trace does not replay to its score, and
    /// RunError when the file cannot be written. Writes go through a
    /// temporary file so readers never see half a session.
    void save(const std::string& session_id, const std::vector<PlayTrace>& traces) const;
    std::vector<PlayTrace> load(const std::string& session_id) const;
    std::vector<PlayTrace> load_all() const;
    const std::filesystem::path& dir() const noexcept { return dir_; }

private:
    std::filesystem::path dir_;
};

/// One participant working through the six-round protocol.
struct Session {
    std::string id;
    std::string participant;
    nlohmann::json metadata;
    std::uint64_t plan_seed = 0;
    std::vector<RoundSpec> plan;
    int current_round = 0;  // index into plan; == plan.size() once closed
    GameState state;
    PlayTrace trace;  // round in progress
    std::vector<PlayTrace> finished;

    bool closed() const noexcept { return current_round >= static_cast<int>(plan.size()); }
};

/// What the client may see: never the refill queues or seeds.
nlohmann::json public_state(const Session& s);

/// Cascade steps with their groups so the client can animate them.
nlohmann::json outcome_to_json(const MoveOutcome& outcome);

class SessionManager {
public:
    using Clock = std::function<std::int64_t()>;  // milliseconds

    /// Throws ConfigError with fewer than three presets.
    SessionManager(std::vector<Preset> presets, TraceStore store, std::uint64_t seed, Clock clock = {});

    /// Returns the new session's public state (including its id).
    nlohmann::json create_session(const std::string& participant, const nlohmann::json& metadata = {});
    nlohmann::json get_state(const std::string& id) const;

    /// Applies a move to the current round. The response carries the
    /// outcome, whether a round finished, and the state afterwards.
    nlohmann::json submit_move(const std::string& id, const Move& move);

    /// Only for closed sessions; StateError otherwise.
    std::vector<PlayTrace> traces(const std::string& id) const;

    /// Internal view for tests and tools.
    Session snapshot(const std::string& id) const;

    const std::vector<Preset>& presets() const noexcept { return presets_; }
    const TraceStore& store() const noexcept { return store_; }

private:
    struct Entry {
        mutable std::mutex mutex;
        Session session;
    };

    std::shared_ptr<Entry> find(const std::string& id) const;
    void start_round(Session& s) const;

    std::vector<Preset> presets_;
    TraceStore store_;
    Clock clock_;
    mutable std::mutex mutex_;
    Rng rng_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

/// Average, maximum and minimum final score per preset board across
/// sessions, plus the same three statistics over each session's mean on
/// its random boards.
struct ColumnStats {
    std::string column;
    int samples = 0;
    double average = 0;
    double maximum = 0;
    double minimum = 0;
};

struct StudySummary {
    std::vector<ColumnStats> columns;  // presets by id, then "Avg of 3 Random Boards"

    nlohmann::json to_json() const;
    std::string to_text() const;
};

inline constexpr const char* kRandomColumn = "Avg of 3 Random Boards";

StudySummary summarize_study(const std::vector<PlayTrace>& traces);

struct ComparisonRow {
    std::string preset_id;
    std::optional<ColumnStats> human;
    std::map<std::string, double> agents;  // column name -> mean score
    std::optional<bool> mins_below_human_min;
    std::optional<bool> maxs_at_least_human_max;
};

struct ComparisonReport {
    std::vector<ComparisonRow> rows;

    nlohmann::json to_json() const;
};

/// Puts the agents' preset scores next to the human statistics. Flags are
/// left empty for boards without human data.
ComparisonReport compare_with_agents(const StudySummary& humans, const exp::PresetTable& agents);

/// Runs the six agents on the presets first (see eval_on_presets).
ComparisonReport compare_with_agents(const std::vector<PlayTrace>& traces, std::span<const Preset> presets,
                                     const std::map<PersonaKind, exp::ArchivedGenome>& genomes,
                                     const SearchConfig& search, int repeats, std::uint64_t seed);

}  // namespace m3::service
