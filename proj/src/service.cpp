#include "m3/service.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

namespace m3::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json board_to_json(const Board& b) {
    json rows = json::array();
    for (int r = 0; r < b.height(); ++r) {
        json row = json::array();
        for (int c = 0; c < b.width(); ++c) {
            row.push_back(static_cast<int>(b.at(r, c)));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::int64_t wall_clock_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

ColumnStats stats_of(std::string column, const std::vector<double>& values) {
    ColumnStats s;
    s.column = std::move(column);
    s.samples = static_cast<int>(values.size());
    if (values.empty()) {
        return s;
    }
    s.maximum = *std::max_element(values.begin(), values.end());
    s.minimum = *std::min_element(values.begin(), values.end());
    double sum = 0;
    for (const double v : values) sum += v;
    s.average = sum / static_cast<double>(values.size());
    return s;
}

json stats_to_json(const ColumnStats& s) {
    return json{{"column", s.column},
                {"samples", s.samples},
                {"average", s.average},
                {"maximum", s.maximum},
                {"minimum", s.minimum}};
}

}  // namespace

std::vector<RoundSpec> make_round_plan(const std::vector<std::string>& preset_ids, std::uint64_t seed) {
    if (preset_ids.size() < static_cast<std::size_t>(kPresetRounds)) {
        throw ConfigError(fmt::format("a session needs {} presets, {} available", kPresetRounds, preset_ids.size()));
    }
    Rng rng(seed);
    std::vector<std::string> pool = preset_ids;
    rng.shuffle(std::span(pool));
    std::vector<RoundSpec> plan;
    for (int i = 0; i < kPresetRounds; ++i) {
        plan.push_back(RoundSpec::preset(pool[static_cast<std::size_t>(i)]));
    }
    for (int i = kPresetRounds; i < kRoundsPerSession; ++i) {
        plan.push_back(RoundSpec::random(rng()));
    }
    rng.shuffle(std::span(plan));
    return plan;
}

// ---------------------------------------------------------------------------

TraceStore::TraceStore(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) {
        throw ConfigError(fmt::format("cannot create trace store {}: {}", dir_.string(), ec.message()));
    }
}

void TraceStore::save(const std::string& session_id, const std::vector<PlayTrace>& traces) const {
    json arr = json::array();
    for (const auto& t : traces) {
        if (!verify_trace(t)) {
            throw EngineFault(fmt::format("trace of session {} round {} does not replay to its score", session_id,
                                          t.round_index));
        }
        arr.push_back(trace_to_json(t));
    }
    const fs::path target = dir_ / (session_id + ".json");
    const fs::path tmp = dir_ / (session_id + ".json.tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << json{{"session_id", session_id}, {"traces", arr}}.dump() << "\n";
        out.flush();
        if (!out) {
            throw RunError(fmt::format("cannot write {}", tmp.string()));
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        throw RunError(fmt::format("cannot move {} into place: {}", target.string(), ec.message()));
    }
}

std::vector<PlayTrace> TraceStore::load(const std::string& session_id) const {
    const fs::path path = dir_ / (session_id + ".json");
    std::ifstream in(path);
    if (!in) {
        throw NotFound(fmt::format("no stored traces for session {}", session_id));
    }
    std::vector<PlayTrace> out;
    try {
        const json j = json::parse(in);
        for (const auto& t : j.at("traces")) {
            out.push_back(trace_from_json(t));
        }
    } catch (const json::exception& e) {
        throw InputError(fmt::format("{}: {}", path.string(), e.what()));
    }
    return out;
}

std::vector<PlayTrace> TraceStore::load_all() const {
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(dir_)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            ids.push_back(entry.path().stem().string());
        }
    }
    std::sort(ids.begin(), ids.end());
    std::vector<PlayTrace> out;
    for (const auto& id : ids) {
        auto traces = load(id);
        out.insert(out.end(), std::make_move_iterator(traces.begin()), std::make_move_iterator(traces.end()));
    }
    return out;
}

// ---------------------------------------------------------------------------

json public_state(const Session& s) {
    json j{{"session_id", s.id},
           {"participant", s.participant},
           {"rounds_total", static_cast<int>(s.plan.size())},
           {"closed", s.closed()}};
    json scores = json::array();
    for (const auto& t : s.finished) {
        scores.push_back(t.final_score);
    }
    j["round_scores"] = scores;
    if (s.closed()) {
        j["round"] = static_cast<int>(s.plan.size());
        return j;
    }
    j["round"] = s.current_round + 1;
    j["board"] = board_to_json(s.state.board);
    j["score"] = s.state.score;
    j["moves_made"] = s.state.moves_made;
    j["moves_remaining"] = s.state.moves_remaining();
    j["moves_per_round"] = s.state.config.moves_per_game;
    j["num_colors"] = s.state.config.num_colors;
    return j;
}

json outcome_to_json(const MoveOutcome& outcome) {
    json steps = json::array();
    if (outcome.cascade) {
        for (const auto& step : outcome.cascade->steps) {
            json groups = json::array();
            for (const auto& g : step.matches) {
                json cells = json::array();
                for (const Cell c : g.cells) {
                    cells.push_back({c.row, c.col});
                }
                groups.push_back({{"color", static_cast<int>(g.color)}, {"size", g.size()}, {"cells", cells}});
            }
            steps.push_back({{"multiplier", step.multiplier}, {"points", step.points}, {"matches", groups}});
        }
    }
    return json{{"valid", outcome.valid},
                {"points", outcome.points_gained},
                {"steps", steps},
                {"moves_available", outcome.resulting_moves_available},
                {"reshuffled", outcome.reshuffled}};
}

SessionManager::SessionManager(std::vector<Preset> presets, TraceStore store, std::uint64_t seed, Clock clock)
    : presets_(std::move(presets)), store_(std::move(store)), clock_(std::move(clock)), rng_(seed) {
    if (presets_.size() < static_cast<std::size_t>(kPresetRounds)) {
        throw ConfigError(fmt::format("the study needs at least {} presets, got {}", kPresetRounds, presets_.size()));
    }
    if (!clock_) {
        clock_ = wall_clock_ms;
    }
}

void SessionManager::start_round(Session& s) const {
    const RoundSpec& spec = s.plan[static_cast<std::size_t>(s.current_round)];
    if (spec.kind == RoundSpec::Kind::Preset) {
        const auto it = std::find_if(presets_.begin(), presets_.end(),
                                     [&](const Preset& p) { return p.id == spec.preset_id; });
        if (it == presets_.end()) {
            throw NotFound(fmt::format("preset {} is not loaded", spec.preset_id));
        }
        Preset preset = *it;
        preset.config.moves_per_game = kMovesPerRound;
        s.state = preset.start();
    } else {
        BoardConfig cfg;
        cfg.moves_per_game = kMovesPerRound;
        s.state = new_game(cfg, RefillSource::seeded(spec.seed));
    }
    s.trace = PlayTrace{};
    s.trace.session_id = s.id;
    s.trace.participant = s.participant;
    s.trace.round_index = s.current_round;
    s.trace.round = spec;
    s.trace.config = s.state.config;
    s.trace.initial = s.state.board;
}

json SessionManager::create_session(const std::string& participant, const json& metadata) {
    auto entry = std::make_shared<Entry>();
    Session& s = entry->session;
    std::vector<std::string> ids;
    for (const auto& p : presets_) {
        ids.push_back(p.id);
    }
    {
        std::lock_guard lock(mutex_);
        do {
            s.id = fmt::format("{:016x}", rng_());
        } while (sessions_.contains(s.id));
        s.plan_seed = rng_();
    }
    s.participant = participant;
    s.metadata = metadata.is_null() ? json::object() : metadata;
    s.plan = make_round_plan(ids, s.plan_seed);
    start_round(s);
    json state = public_state(s);
    std::lock_guard lock(mutex_);
    sessions_.emplace(s.id, std::move(entry));
    return state;
}

std::shared_ptr<SessionManager::Entry> SessionManager::find(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) {
        throw NotFound(fmt::format("unknown session {}", id));
    }
    return it->second;
}

json SessionManager::get_state(const std::string& id) const {
    const auto entry = find(id);
    std::lock_guard lock(entry->mutex);
    return public_state(entry->session);
}

Session SessionManager::snapshot(const std::string& id) const {
    const auto entry = find(id);
    std::lock_guard lock(entry->mutex);
    return entry->session;
}

json SessionManager::submit_move(const std::string& id, const Move& move) {
    const auto entry = find(id);
    std::lock_guard lock(entry->mutex);
    Session& s = entry->session;
    if (s.closed()) {
        throw StateError(fmt::format("session {} is closed", id));
    }
    const MoveOutcome outcome = apply_move(s.state, move);
    TraceMove tm;
    tm.move = move;
    tm.valid = outcome.valid;
    tm.points = outcome.points_gained;
    tm.cascade_steps = outcome.cascade ? static_cast<int>(outcome.cascade->steps.size()) : 0;
    tm.available_after = outcome.resulting_moves_available;
    tm.reshuffled = outcome.reshuffled;
    tm.timestamp_ms = clock_();
    s.trace.moves.push_back(tm);

    json response{{"outcome", outcome_to_json(outcome)}, {"round_complete", false}};
    if (s.state.finished()) {
        s.trace.spawn_log = s.state.spawn_log;
        s.trace.final_score = s.state.score;
        if (!verify_trace(s.trace)) {
            throw EngineFault(fmt::format("round {} of session {} does not replay", s.current_round, id));
        }
        response["round_complete"] = true;
        response["round_score"] = s.trace.final_score;
        s.finished.push_back(std::move(s.trace));
        s.trace = PlayTrace{};
        ++s.current_round;
        if (s.closed()) {
            store_.save(s.id, s.finished);
        } else {
            start_round(s);
        }
    }
    response["state"] = public_state(s);
    return response;
}

std::vector<PlayTrace> SessionManager::traces(const std::string& id) const {
    const auto entry = find(id);
    std::lock_guard lock(entry->mutex);
    if (!entry->session.closed()) {
        throw StateError(fmt::format("session {} is still open", id));
    }
    return entry->session.finished;
}

// ---------------------------------------------------------------------------

json StudySummary::to_json() const {
    json cols = json::array();
    for (const auto& c : columns) {
        cols.push_back(stats_to_json(c));
    }
    return json{{"columns", cols}};
}

std::string StudySummary::to_text() const {
    std::string out = fmt::format("{:<10}", "");
    for (const auto& c : columns) {
        out += fmt::format("{:>24}", c.column);
    }
    out += "\n";
    const std::pair<const char*, double ColumnStats::*> rows[] = {
        {"Average", &ColumnStats::average}, {"Maximum", &ColumnStats::maximum}, {"Minimum", &ColumnStats::minimum}};
    for (const auto& [label, field] : rows) {
        out += fmt::format("{:<10}", label);
        for (const auto& c : columns) {
            out += fmt::format("{:>24.2f}", c.*field);
        }
        out += "\n";
    }
    return out;
}

StudySummary summarize_study(const std::vector<PlayTrace>& traces) {
    std::map<std::string, std::vector<double>> by_preset;
    std::map<std::string, std::vector<double>> random_by_session;
    for (const auto& t : traces) {
        if (t.round.kind == RoundSpec::Kind::Preset) {
            by_preset[t.round.preset_id].push_back(static_cast<double>(t.final_score));
        } else {
            random_by_session[t.session_id].push_back(static_cast<double>(t.final_score));
        }
    }
    StudySummary summary;
    for (const auto& [id, scores] : by_preset) {
        summary.columns.push_back(stats_of(id, scores));
    }
    if (!random_by_session.empty()) {
        std::vector<double> per_session;
        for (const auto& [session, scores] : random_by_session) {
            double sum = 0;
            for (const double v : scores) sum += v;
            per_session.push_back(sum / static_cast<double>(scores.size()));
        }
        summary.columns.push_back(stats_of(kRandomColumn, per_session));
    }
    return summary;
}

json ComparisonReport::to_json() const {
    json out = json::array();
    for (const auto& row : rows) {
        json j{{"preset", row.preset_id}, {"agents", row.agents}};
        j["human"] = row.human ? stats_to_json(*row.human) : json(nullptr);
        if (row.mins_below_human_min) {
            j["mins_below_human_min"] = *row.mins_below_human_min;
        }
        if (row.maxs_at_least_human_max) {
            j["maxs_at_least_human_max"] = *row.maxs_at_least_human_max;
        }
        out.push_back(std::move(j));
    }
    return json{{"rows", out}};
}

ComparisonReport compare_with_agents(const StudySummary& humans, const exp::PresetTable& agents) {
    ComparisonReport report;
    for (const auto& arow : agents.rows) {
        ComparisonRow row;
        row.preset_id = arow.preset_id;
        for (const auto& [name, cell] : arow.cells) {
            row.agents[name] = cell.score;
        }
        const auto it = std::find_if(humans.columns.begin(), humans.columns.end(),
                                     [&](const ColumnStats& c) { return c.column == arow.preset_id; });
        if (it != humans.columns.end() && it->samples > 0) {
            row.human = *it;
            if (row.agents.contains("MinS")) {
                row.mins_below_human_min = row.agents["MinS"] < it->minimum;
            }
            if (row.agents.contains("MaxS")) {
                row.maxs_at_least_human_max = row.agents["MaxS"] >= it->maximum;
            }
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

ComparisonReport compare_with_agents(const std::vector<PlayTrace>& traces, std::span<const Preset> presets,
                                     const std::map<PersonaKind, exp::ArchivedGenome>& genomes,
                                     const SearchConfig& search, int repeats, std::uint64_t seed) {
    const exp::PresetTable table = exp::eval_on_presets(presets, genomes, search, repeats, seed);
    return compare_with_agents(summarize_study(traces), table);
}

}  // namespace m3::service
