#include "m3/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "m3/parallel.hpp"

namespace m3::exp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kRunSchema = "m3-run/1";
constexpr const char* kGenomeSchema = "m3-genomes/1";
constexpr std::uint64_t kSeedBatchStream = 0x7365656473ULL;
constexpr std::uint64_t kEvolutionStream = 0x65766f6c7665ULL;
constexpr std::uint64_t kVanillaStream = 0x76616e696c6c61ULL;

std::string num(double v) { return fmt::format("{:.17g}", v); }

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    out.flush();
    if (!out) {
        throw RunError(fmt::format("cannot write {}", path.string()));
    }
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw RunError(fmt::format("cannot read {}", path.string()));
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw RunError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

double mean_of(std::span<const double> v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

json baseline_to_json(const BaselineResult& b) {
    return json{{"agent", b.agent}, {"per_batch", b.per_batch}, {"batch_means", b.batch_means}, {"mean", b.mean}};
}

BaselineResult baseline_from_json(const json& j) {
    BaselineResult b;
    b.agent = j.at("agent").get<std::string>();
    b.per_batch = j.at("per_batch").get<std::vector<std::vector<double>>>();
    b.batch_means = j.at("batch_means").get<std::vector<double>>();
    b.mean = j.at("mean").get<double>();
    return b;
}

BaselineResult summarize(std::string agent, std::vector<std::vector<double>> per_batch) {
    BaselineResult r;
    r.agent = std::move(agent);
    for (const auto& batch : per_batch) {
        r.batch_means.push_back(mean_of(batch));
    }
    r.per_batch = std::move(per_batch);
    const auto all = r.values();
    r.mean = mean_of(all);
    return r;
}

}  // namespace

std::string_view scale_token(Scale scale) noexcept { return scale == Scale::Paper ? "paper" : "desk"; }

Scale parse_scale(std::string_view token) {
    if (token == "paper") return Scale::Paper;
    if (token == "desk") return Scale::Desk;
    throw ConfigError(fmt::format("unknown scale '{}' (expected paper|desk)", token));
}

ExperimentConfig ExperimentConfig::preset(Scale scale, Persona persona, std::uint64_t master_seed) {
    ExperimentConfig cfg;
    cfg.persona = persona;
    cfg.master_seed = master_seed;
    cfg.scale = scale;
    if (scale == Scale::Desk) {
        cfg.evolution.population_size = 20;
        cfg.evolution.mutation_slots = 9;
        cfg.evolution.crossover_slots = 9;
        cfg.evolution.generations = 10;
        cfg.evolution.games_per_individual = 10;
        cfg.evolution.moves_per_game = 10;
    }
    cfg.search.rollout_base = cfg.evolution.moves_per_game;
    return cfg;
}

BoardConfig ExperimentConfig::board() const {
    BoardConfig b;
    b.moves_per_game = evolution.moves_per_game;
    return b;
}

gp::GameSetup ExperimentConfig::setup() const { return gp::GameSetup{board(), search}; }

void ExperimentConfig::validate() const {
    evolution.validate();
    search.validate();
    board().validate();
}

json config_to_json(const ExperimentConfig& cfg) {
    const auto& e = cfg.evolution;
    return json{
        {"persona", cfg.persona.token()},
        {"scale", scale_token(cfg.scale)},
        {"master_seed", cfg.master_seed},
        {"evolution",
         {{"population_size", e.population_size},
          {"elite_fraction", e.elite_fraction},
          {"mutation_slots", e.mutation_slots},
          {"crossover_slots", e.crossover_slots},
          {"generations", e.generations},
          {"constant_mutation_prob", e.constant_mutation_prob},
          {"depth_min", e.depth_min},
          {"depth_max", e.depth_max},
          {"depth_cap", e.depth_cap},
          {"mutation_subtree_depth", e.mutation_subtree_depth},
          {"games_per_individual", e.games_per_individual},
          {"moves_per_game", e.moves_per_game},
          {"enable_subtraction", e.enable_subtraction},
          {"frozen_seeds", e.frozen_seeds},
          {"crossover_parent_pool", "parents"}}},
        {"search",
         {{"root_visits", cfg.search.root_visits},
          {"rollout_base", cfg.search.rollout_base},
          {"exploration_c", cfg.search.exploration_c}}},
    };
}

ExperimentConfig config_from_json(const json& j) {
    try {
        ExperimentConfig cfg;
        cfg.persona = Persona::parse(j.at("persona").get<std::string>());
        cfg.scale = parse_scale(j.at("scale").get<std::string>());
        cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
        const json& e = j.at("evolution");
        auto& ev = cfg.evolution;
        ev.population_size = e.at("population_size").get<int>();
        ev.elite_fraction = e.at("elite_fraction").get<double>();
        ev.mutation_slots = e.at("mutation_slots").get<int>();
        ev.crossover_slots = e.at("crossover_slots").get<int>();
        ev.generations = e.at("generations").get<int>();
        ev.constant_mutation_prob = e.at("constant_mutation_prob").get<double>();
        ev.depth_min = e.at("depth_min").get<int>();
        ev.depth_max = e.at("depth_max").get<int>();
        ev.depth_cap = e.at("depth_cap").get<int>();
        ev.mutation_subtree_depth = e.at("mutation_subtree_depth").get<int>();
        ev.games_per_individual = e.at("games_per_individual").get<int>();
        ev.moves_per_game = e.at("moves_per_game").get<int>();
        ev.enable_subtraction = e.at("enable_subtraction").get<bool>();
        ev.frozen_seeds = e.at("frozen_seeds").get<bool>();
        const json& s = j.at("search");
        cfg.search.root_visits = s.at("root_visits").get<int>();
        cfg.search.rollout_base = s.at("rollout_base").get<int>();
        cfg.search.exploration_c = s.at("exploration_c").get<double>();
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("bad experiment config: {}", e.what()));
    }
}

std::vector<SeedBatch> generate_seed_batches(std::uint64_t master_seed, int generations, int batch_size) {
    if (generations < 0 || batch_size < 0) {
        throw ConfigError("seed batch counts must be non-negative");
    }
    Rng rng(derive_seed(kSeedBatchStream, master_seed));
    std::set<std::uint64_t> seen;
    std::vector<SeedBatch> batches(static_cast<std::size_t>(generations));
    for (auto& batch : batches) {
        while (static_cast<int>(batch.size()) < batch_size) {
            const std::uint64_t seed = rng();
            if (seen.insert(seed).second) {
                batch.push_back(seed);
            }
        }
    }
    return batches;
}

std::vector<double> BaselineResult::values() const {
    std::vector<double> all;
    for (const auto& batch : per_batch) {
        all.insert(all.end(), batch.begin(), batch.end());
    }
    return all;
}

Baselines run_baselines(std::span<const SeedBatch> batches, MetricKind metric, const SearchConfig& search,
                        const BoardConfig& board, int workers) {
    search.validate();
    board.validate();
    std::vector<std::vector<double>> random_values;
    std::vector<std::vector<double>> vanilla_values;
    for (std::size_t g = 0; g < batches.size(); ++g) {
        const std::uint64_t random_key = derive_seed(gp::kRandomBaselineStream, g);
        random_values.push_back(gp::play_seeds(random_agent(), metric, batches[g], board, random_key, workers));
        // Vanilla always chases score; on a moves run the goal still has to
        // be a score, so the random games are measured in points as well.
        const auto random_scores =
            metric == MetricKind::FinalScore
                ? random_values.back()
                : gp::play_seeds(random_agent(), MetricKind::FinalScore, batches[g], board, random_key, workers);
        SearchConfig vanilla = search;
        vanilla.goal = Goal{mean_of(random_scores), Direction::Maximize};
        vanilla_values.push_back(gp::play_seeds(mcts_agent(ucb1_heuristic(vanilla.exploration_c), vanilla,
                                                           MetricKind::FinalScore),
                                                metric, batches[g], board, derive_seed(kVanillaStream, g), workers));
    }
    return Baselines{summarize("vanilla", std::move(vanilla_values)), summarize("random", std::move(random_values))};
}

json baselines_to_json(const Baselines& b) {
    return json{{"vanilla", baseline_to_json(b.vanilla)}, {"random", baseline_to_json(b.random)}};
}

Baselines baselines_from_json(const json& j) {
    return Baselines{baseline_from_json(j.at("vanilla")), baseline_from_json(j.at("random"))};
}

json record_to_json(const gp::GenerationRecord& rec) {
    json elites = json::array();
    for (const auto& [genome, fitness] : rec.elites) {
        elites.push_back({{"genome", genome}, {"fitness", fitness}});
    }
    return json{{"generation", rec.generation},
                {"min", rec.min},
                {"median", rec.median},
                {"max", rec.max},
                {"mean", rec.mean},
                {"goal", rec.goal},
                {"seeds", rec.seeds},
                {"elites", elites},
                {"member_ids", rec.member_ids},
                {"member_genomes", rec.member_genomes},
                {"metric_values", rec.metric_values}};
}

gp::GenerationRecord record_from_json(const json& j) {
    gp::GenerationRecord rec;
    rec.generation = j.at("generation").get<int>();
    rec.min = j.at("min").get<double>();
    rec.median = j.at("median").get<double>();
    rec.max = j.at("max").get<double>();
    rec.mean = j.at("mean").get<double>();
    rec.goal = j.at("goal").get<double>();
    rec.seeds = j.at("seeds").get<SeedBatch>();
    for (const auto& e : j.at("elites")) {
        rec.elites.emplace_back(e.at("genome").get<std::string>(), e.at("fitness").get<double>());
    }
    rec.member_ids = j.at("member_ids").get<std::vector<std::uint64_t>>();
    rec.member_genomes = j.at("member_genomes").get<std::vector<std::string>>();
    rec.metric_values = j.at("metric_values").get<std::vector<double>>();
    return rec;
}

json genome_archive_to_json(const gp::EvolutionHistory& history) {
    if (history.generations.empty()) {
        throw ContractViolation("cannot archive an empty history");
    }
    const auto& last = history.generations.back();
    json elites = json::array();
    for (const auto& [genome, fitness] : last.elites) {
        elites.push_back({{"genome", genome}, {"fitness", fitness}});
    }
    const double fitness = history.best.fitness.value_or(0.0);
    return json{{"schema", kGenomeSchema},
                {"persona", history.persona.token()},
                {"best",
                 {{"genome", history.best.genome.to_string()},
                  {"id", history.best.id},
                  {"fitness", fitness},
                  {"metric", fitness_of(fitness, history.persona.direction())}}},
                {"goal", last.goal},
                {"next_goal", history.final_goal},
                {"elites", elites}};
}

ArchivedGenome genome_archive_from_json(const json& j) {
    try {
        if (j.at("schema").get<std::string>() != kGenomeSchema) {
            throw RunError(fmt::format("unsupported genome archive schema '{}'", j.at("schema").get<std::string>()));
        }
        return ArchivedGenome{Persona::parse(j.at("persona").get<std::string>()),
                              gp::Expr::parse(j.at("best").at("genome").get<std::string>()),
                              j.at("goal").get<double>()};
    } catch (const json::exception& e) {
        throw RunError(fmt::format("bad genome archive: {}", e.what()));
    } catch (const ConfigError& e) {
        throw RunError(fmt::format("bad genome archive: {}", e.what()));
    }
}

std::map<PersonaKind, ArchivedGenome> load_genome_archives(const fs::path& dir) {
    std::vector<fs::path> candidates;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) {
        throw RunError(fmt::format("genome directory {} does not exist", dir.string()));
    }
    if (fs::exists(dir / "genomes.json")) {
        candidates.push_back(dir / "genomes.json");
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory() && fs::exists(entry.path() / "genomes.json")) {
            candidates.push_back(entry.path() / "genomes.json");
        } else if (entry.is_regular_file() && entry.path().extension() == ".json" &&
                   entry.path().filename() != "genomes.json") {
            const json j = read_json(entry.path());
            if (j.is_object() && j.value("schema", "") == kGenomeSchema) {
                candidates.push_back(entry.path());
            }
        }
    }
    std::sort(candidates.begin(), candidates.end());
    std::map<PersonaKind, ArchivedGenome> out;
    for (const auto& path : candidates) {
        ArchivedGenome g = genome_archive_from_json(read_json(path));
        if (!out.emplace(g.persona.kind, g).second) {
            throw RunError(fmt::format("two genome archives for persona {} under {}", g.persona.token(),
                                       dir.string()));
        }
    }
    return out;
}

void emit_plot_data(const Persona& persona, const std::vector<gp::GenerationRecord>& history,
                    const Baselines& baselines, int moves_per_game, const fs::path& path) {
    const bool floor = persona.kind == PersonaKind::MinS;
    std::string out = "generation,min,median,max,mean,vanilla_mean,random_mean";
    out += floor ? ",floor\n" : "\n";
    for (const auto& rec : history) {
        out += fmt::format("{},{},{},{},{},{},{}", rec.generation, num(rec.min), num(rec.median), num(rec.max),
                           num(rec.mean), num(baselines.vanilla.mean), num(baselines.random.mean));
        if (floor) {
            out += "," + num(60.0 * moves_per_game);
        }
        out += "\n";
    }
    write_text(path, out);
}

RunArtifacts run_experiment(const ExperimentConfig& cfg, const fs::path& out) {
    cfg.validate();
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) {
        throw RunError(fmt::format("cannot create run directory {}: {}", out.string(), ec.message()));
    }

    RunArtifacts art;
    art.dir = out;
    const auto write_manifest = [&](std::string_view status) {
        json manifest{{"schema", kRunSchema},
                      {"status", status},
                      {"config", config_to_json(cfg)},
                      {"artifacts", art.files}};
        write_text(out / "manifest.json", manifest.dump(2) + "\n");
    };
    const auto emit = [&](const std::string& name, const std::string& text) {
        try {
            write_text(out / name, text);
        } catch (const RunError&) {
            try {
                write_manifest("partial");
            } catch (const RunError&) {
            }
            throw;
        }
        art.files.push_back(name);
    };

    const auto& ev = cfg.evolution;
    const int batch_count = ev.frozen_seeds ? 1 : ev.generations;
    const auto batches = generate_seed_batches(cfg.master_seed, batch_count, ev.games_per_individual);
    write_manifest("running");
    emit("seeds.json", json{{"batches", batches}}.dump() + "\n");

    Rng rng(derive_seed(kEvolutionStream, cfg.master_seed));
    art.history = gp::evolve(ev, cfg.setup(), cfg.persona, batches, rng);
    std::string lines;
    for (const auto& rec : art.history.generations) {
        lines += record_to_json(rec).dump() + "\n";
    }
    emit("history.jsonl", lines);
    emit("genomes.json", genome_archive_to_json(art.history).dump(2) + "\n");

    art.baselines = run_baselines(batches, cfg.persona.metric(), cfg.search, cfg.board(), ev.workers);
    emit("baselines.json", baselines_to_json(art.baselines).dump() + "\n");

    std::string stats = "generation,min,median,max,mean,goal,vanilla_batch_mean,random_batch_mean,vanilla_mean,"
                        "random_mean\n";
    for (const auto& rec : art.history.generations) {
        const std::size_t b = ev.frozen_seeds ? 0 : static_cast<std::size_t>(rec.generation);
        stats += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", rec.generation, num(rec.min), num(rec.median),
                             num(rec.max), num(rec.mean), num(rec.goal), num(art.baselines.vanilla.batch_means[b]),
                             num(art.baselines.random.batch_means[b]), num(art.baselines.vanilla.mean),
                             num(art.baselines.random.mean));
    }
    emit("stats.csv", stats);
    try {
        emit_plot_data(cfg.persona, art.history.generations, art.baselines, ev.moves_per_game, out / "plot.csv");
    } catch (const RunError&) {
        write_manifest("partial");
        throw;
    }
    art.files.push_back("plot.csv");
    write_manifest("complete");
    return art;
}

LoadedRun load_run(const fs::path& dir) {
    const json manifest = read_json(dir / "manifest.json");
    if (manifest.value("schema", "") != kRunSchema) {
        throw RunError(fmt::format("{} is not a run manifest", (dir / "manifest.json").string()));
    }
    LoadedRun run;
    run.config = config_from_json(manifest.at("config"));
    std::ifstream in(dir / "history.jsonl");
    if (!in) {
        throw RunError(fmt::format("cannot read {}", (dir / "history.jsonl").string()));
    }
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) {
            run.generations.push_back(record_from_json(json::parse(line)));
        }
    }
    run.baselines = baselines_from_json(read_json(dir / "baselines.json"));
    return run;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& PresetTable::columns() {
    static const std::vector<std::string> cols{"MaxS", "MinS", "MaxM", "MinM", "Vanilla", "Random"};
    return cols;
}

std::string PresetTable::to_text() const {
    std::string out = fmt::format("{:<12}", "Board");
    for (const auto& c : columns()) {
        out += fmt::format("{:>18}", c);
    }
    out += "\n";
    for (const auto& row : rows) {
        out += fmt::format("{:<12}", row.preset_id);
        for (const auto& c : columns()) {
            const auto it = row.cells.find(c);
            if (it == row.cells.end()) {
                out += fmt::format("{:>18}", "-");
            } else if (c == "MaxM" || c == "MinM") {
                out += fmt::format("{:>18}", fmt::format("{:.0f} ({:.2f})", it->second.score, it->second.moves));
            } else {
                out += fmt::format("{:>18}", fmt::format("{:.0f}", it->second.score));
            }
        }
        out += "\n";
    }
    return out;
}

json PresetTable::to_json() const {
    json rows_json = json::array();
    for (const auto& row : rows) {
        json cells = json::object();
        for (const auto& [name, cell] : row.cells) {
            cells[name] = {{"score", cell.score}, {"moves", cell.moves}};
        }
        rows_json.push_back({{"preset", row.preset_id}, {"cells", cells}});
    }
    return json{{"columns", columns()}, {"rows", rows_json}};
}

PresetTable eval_on_presets(std::span<const Preset> presets, const std::map<PersonaKind, ArchivedGenome>& genomes,
                            const SearchConfig& search, int repeats, std::uint64_t seed, int workers) {
    if (repeats < 1) {
        throw ConfigError("repeats must be at least 1");
    }
    const PersonaKind kinds[] = {PersonaKind::MaxS, PersonaKind::MinS, PersonaKind::MaxM, PersonaKind::MinM};
    for (const auto kind : kinds) {
        if (!genomes.contains(kind)) {
            throw RunError(fmt::format("no archived genome for persona {}", Persona{kind}.token()));
        }
    }
    PresetTable table;
    for (std::size_t p = 0; p < presets.size(); ++p) {
        const Preset& preset = presets[p];
        const GameState start = preset.start();
        const auto play = [&](const Agent& agent, std::size_t column) {
            std::vector<GameState> ends(static_cast<std::size_t>(repeats));
            parallel_for(ends.size(), workers, [&](std::size_t r) {
                Rng rng(derive_seed(seed, p, column, r));
                GameState s = start;
                s.record_spawns = false;
                ends[r] = play_game(std::move(s), agent, rng);
            });
            PresetCell cell;
            for (const auto& s : ends) {
                cell.score += metric_of_state(s, MetricKind::FinalScore);
                cell.moves += metric_of_state(s, MetricKind::MeanAvailableMoves);
            }
            cell.score /= repeats;
            cell.moves /= repeats;
            return cell;
        };

        PresetRow row;
        row.preset_id = preset.id;
        row.cells["Random"] = play(random_agent(), 5);
        SearchConfig vanilla = search;
        vanilla.goal = Goal{row.cells["Random"].score, Direction::Maximize};
        row.cells["Vanilla"] =
            play(mcts_agent(ucb1_heuristic(search.exploration_c), vanilla, MetricKind::FinalScore), 4);
        for (std::size_t k = 0; k < 4; ++k) {
            const ArchivedGenome& g = genomes.at(kinds[k]);
            SearchConfig cfg = search;
            cfg.goal = Goal{g.goal, g.persona.direction()};
            row.cells[PresetTable::columns()[k]] =
                play(mcts_agent(gp::as_heuristic(g.genome), cfg, g.persona.metric()), k);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

// ---------------------------------------------------------------------------

double mean(std::span<const double> values) { return mean_of(values); }

TTest paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw DomainError("paired t-test needs two equal-length samples of at least 2 values");
    }
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        d[i] = a[i] - b[i];
    }
    const double n = static_cast<double>(d.size());
    const double m = mean_of(d);
    double ss = 0;
    for (const double x : d) {
        ss += (x - m) * (x - m);
    }
    const double se = std::sqrt(ss / (n - 1) / n);
    TTest t;
    t.mean_difference = m;
    t.df = n - 1;
    if (se == 0) {
        t.t = m > 0 ? INFINITY : (m < 0 ? -INFINITY : 0.0);
        t.p_value = m > 0 ? 0.0 : (m < 0 ? 1.0 : 0.5);
        return t;
    }
    t.t = m / se;
    const boost::math::students_t dist(t.df);
    t.p_value = boost::math::cdf(boost::math::complement(dist, t.t));
    return t;
}

double mean_ci_half_width(std::span<const double> values, double level) {
    if (values.size() < 2) {
        return 0.0;
    }
    const double n = static_cast<double>(values.size());
    const double m = mean_of(values);
    double ss = 0;
    for (const double x : values) {
        ss += (x - m) * (x - m);
    }
    const boost::math::students_t dist(n - 1);
    const double q = boost::math::quantile(boost::math::complement(dist, (1 - level) / 2));
    return q * std::sqrt(ss / (n - 1) / n);
}

}  // namespace m3::exp
