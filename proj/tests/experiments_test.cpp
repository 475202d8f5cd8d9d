#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "m3/experiments.hpp"

namespace m3::exp {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("m3_experiments_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

ExperimentConfig tiny(PersonaKind kind, std::uint64_t seed = 5) {
    ExperimentConfig cfg = ExperimentConfig::preset(Scale::Desk, Persona{kind}, seed);
    cfg.evolution.population_size = 10;
    cfg.evolution.mutation_slots = 4;
    cfg.evolution.crossover_slots = 5;
    cfg.evolution.generations = 3;
    cfg.evolution.games_per_individual = 2;
    cfg.evolution.moves_per_game = 3;
    cfg.search.root_visits = 6;
    cfg.search.rollout_base = 3;
    return cfg;
}

TEST(ExperimentConfig, ScalePresets) {
    const auto paper = ExperimentConfig::preset(Scale::Paper, Persona{}, 1);
    EXPECT_EQ(paper.evolution.population_size, 100);
    EXPECT_EQ(paper.evolution.generations, 100);
    EXPECT_EQ(paper.evolution.games_per_individual, 50);
    EXPECT_EQ(paper.evolution.moves_per_game, 20);
    EXPECT_EQ(paper.search.root_visits, 250);
    EXPECT_EQ(paper.search.rollout_base, 20);
    const auto desk = ExperimentConfig::preset(Scale::Desk, Persona{}, 1);
    EXPECT_EQ(desk.evolution.population_size, 20);
    EXPECT_EQ(desk.evolution.generations, 10);
    EXPECT_EQ(desk.evolution.games_per_individual, 10);
    EXPECT_EQ(desk.evolution.moves_per_game, 10);
    EXPECT_EQ(desk.evolution.elite_count(), 2);
    EXPECT_NO_THROW(desk.validate());
    EXPECT_EQ(desk.board().moves_per_game, 10);
    EXPECT_THROW(parse_scale("huge"), ConfigError);
}

TEST(ExperimentConfig, JsonRoundTrip) {
    ExperimentConfig cfg = tiny(PersonaKind::MinM, 77);
    cfg.evolution.frozen_seeds = true;
    const ExperimentConfig back = config_from_json(config_to_json(cfg));
    EXPECT_EQ(config_to_json(back), config_to_json(cfg));
    EXPECT_EQ(back.persona, cfg.persona);
    EXPECT_THROW(config_from_json(nlohmann::json::object()), ConfigError);
}

TEST(SeedBatches, DeterministicSizedAndDistinct) {
    const auto a = generate_seed_batches(42, 100, 50);
    ASSERT_EQ(a.size(), 100u);
    std::set<std::uint64_t> all;
    for (const auto& batch : a) {
        ASSERT_EQ(batch.size(), 50u);
        all.insert(batch.begin(), batch.end());
    }
    EXPECT_EQ(all.size(), 5000u);
    EXPECT_EQ(a, generate_seed_batches(42, 100, 50));
    EXPECT_NE(a, generate_seed_batches(43, 100, 50));
    EXPECT_EQ(generate_seed_batches(1, 3).front().size(), 50u);
}

TEST(Baselines, RandomFloorMeansAndDeterminism) {
    const auto batches = generate_seed_batches(3, 2, 4);
    SearchConfig search;
    search.root_visits = 10;
    search.rollout_base = 5;
    BoardConfig board;
    board.moves_per_game = 5;
    const Baselines b = run_baselines(batches, MetricKind::FinalScore, search, board);
    ASSERT_EQ(b.random.per_batch.size(), 2u);
    ASSERT_EQ(b.vanilla.per_batch.size(), 2u);
    for (const double v : b.random.values()) EXPECT_GE(v, 300.0);
    for (const double v : b.vanilla.values()) EXPECT_GE(v, 300.0);
    EXPECT_DOUBLE_EQ(b.random.mean, mean(b.random.values()));
    EXPECT_DOUBLE_EQ(b.random.batch_means[1], mean(b.random.per_batch[1]));
    EXPECT_EQ(b.random.agent, "random");
    EXPECT_EQ(b.vanilla.agent, "vanilla");

    const Baselines again = run_baselines(batches, MetricKind::FinalScore, search, board, 3);
    EXPECT_EQ(again.vanilla.per_batch, b.vanilla.per_batch);
    EXPECT_EQ(again.random.per_batch, b.random.per_batch);
    EXPECT_EQ(baselines_to_json(baselines_from_json(baselines_to_json(b))), baselines_to_json(b));
}

TEST(Baselines, Ucb1ThroughFitnessPathMatchesVanilla) {
    // UCB1 played through the genome fitness path on an independent stream
    // should land inside the vanilla agent's 95% interval.
    const auto batches = generate_seed_batches(21, 1, 12);
    SearchConfig search;
    search.root_visits = 40;
    search.rollout_base = 6;
    BoardConfig board;
    board.moves_per_game = 6;
    const Baselines b = run_baselines(batches, MetricKind::FinalScore, search, board);
    const double half = mean_ci_half_width(b.vanilla.values());
    search.goal = Goal{b.random.mean, Direction::Maximize};
    const double fitness = gp::evaluate_fitness(ucb1_heuristic(), Persona{PersonaKind::MaxS}, batches[0],
                                                gp::GameSetup{board, search}, 0x75636231);
    EXPECT_NEAR(fitness, b.vanilla.mean, half);
}

TEST(RunExperiment, WritesAReloadableRun) {
    const fs::path dir = scratch("run");
    const ExperimentConfig cfg = tiny(PersonaKind::MaxS);
    const RunArtifacts art = run_experiment(cfg, dir);
    for (const char* f : {"manifest.json", "seeds.json", "stats.csv", "history.jsonl", "baselines.json",
                          "genomes.json", "plot.csv"}) {
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    }
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(manifest["status"], "complete");
    EXPECT_EQ(manifest["config"]["master_seed"], 5);

    const auto stats = csv(dir / "stats.csv");
    ASSERT_EQ(stats.size(), 4u);
    EXPECT_EQ(stats[0][0], "generation");
    // Generation 0's goal is the random agent's mean on the same batch.
    EXPECT_DOUBLE_EQ(std::stod(stats[1][5]), art.baselines.random.batch_means[0]);

    const LoadedRun run = load_run(dir);
    ASSERT_EQ(run.generations.size(), 3u);
    for (std::size_t g = 0; g < 3; ++g) {
        EXPECT_EQ(run.generations[g].max, art.history.generations[g].max);
        EXPECT_EQ(run.generations[g].member_genomes, art.history.generations[g].member_genomes);
        EXPECT_EQ(run.generations[g].seeds, art.history.generations[g].seeds);
    }
    EXPECT_EQ(run.baselines.vanilla.per_batch, art.baselines.vanilla.per_batch);

    const auto archives = load_genome_archives(dir);
    ASSERT_EQ(archives.size(), 1u);
    EXPECT_EQ(archives.at(PersonaKind::MaxS).genome, art.history.best.genome);
    EXPECT_EQ(archives.at(PersonaKind::MaxS).goal, art.history.generations.back().goal);
}

TEST(RunExperiment, ReproducibleAcrossWorkerCounts) {
    ExperimentConfig cfg = tiny(PersonaKind::MinM, 9);
    const fs::path a = scratch("repro_a");
    const fs::path b = scratch("repro_b");
    run_experiment(cfg, a);
    cfg.evolution.workers = 3;
    run_experiment(cfg, b);
    for (const char* f : {"stats.csv", "history.jsonl", "genomes.json", "baselines.json", "seeds.json"}) {
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
}

TEST(RunExperiment, UnwritableDirectoryIsARunError) {
    const fs::path blocker = scratch("blocker");
    std::ofstream(blocker) << "not a directory";
    EXPECT_THROW(run_experiment(tiny(PersonaKind::MaxS), blocker / "run"), RunError);
}

TEST(PlotData, ColumnsRowsAndRoundTrip) {
    gp::GenerationRecord r0, r1;
    r0.generation = 0;
    r0.min = 1234.5;
    r0.median = 2000.0 / 3.0;
    r0.max = 3e3;
    r0.mean = 0.1 + 0.2;
    r1 = r0;
    r1.generation = 1;
    Baselines b;
    b.vanilla.mean = 4321.125;
    b.random.mean = 1.0 / 7.0;
    const fs::path dir = scratch("plots");
    fs::create_directories(dir);

    emit_plot_data(Persona{PersonaKind::MinS}, {r0, r1}, b, 20, dir / "mins.csv");
    const auto mins = csv(dir / "mins.csv");
    ASSERT_EQ(mins.size(), 3u);
    EXPECT_EQ(mins[0], (std::vector<std::string>{"generation", "min", "median", "max", "mean", "vanilla_mean",
                                                 "random_mean", "floor"}));
    EXPECT_EQ(std::stod(mins[1][7]), 1200.0);
    EXPECT_NEAR(std::stod(mins[1][2]), r0.median, 1e-12);
    EXPECT_NEAR(std::stod(mins[1][4]), r0.mean, 1e-12);
    EXPECT_NEAR(std::stod(mins[2][6]), b.random.mean, 1e-12);

    for (const auto kind : {PersonaKind::MaxS, PersonaKind::MaxM, PersonaKind::MinM}) {
        emit_plot_data(Persona{kind}, {r0, r1}, b, 20, dir / "other.csv");
        const auto rows = csv(dir / "other.csv");
        ASSERT_EQ(rows.size(), 3u);
        EXPECT_EQ(rows[0].size(), 7u);
    }
}

TEST(GenomeArchives, MissingOrDuplicatePersonas) {
    const fs::path dir = scratch("archives");
    fs::create_directories(dir / "a");
    fs::create_directories(dir / "b");
    gp::EvolutionHistory h;
    h.persona = Persona{PersonaKind::MinS};
    h.best = gp::Individual{gp::Expr::parse("div(child_wins, child_visits)"), -1500.0, 3};
    h.generations.resize(1);
    h.generations[0].goal = 1600;
    std::ofstream(dir / "a" / "genomes.json") << genome_archive_to_json(h).dump();
    const auto one = load_genome_archives(dir);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one.at(PersonaKind::MinS).goal, 1600);

    std::ofstream(dir / "b" / "genomes.json") << genome_archive_to_json(h).dump();
    EXPECT_THROW(load_genome_archives(dir), RunError);
    EXPECT_THROW(load_genome_archives(dir / "missing"), RunError);

    const Preset preset = make_preset("p", BoardConfig{}, 1, 10);
    EXPECT_THROW(eval_on_presets(std::span(&preset, 1), one, SearchConfig{}, 1, 0), RunError);
}

TEST(PresetTable, LayoutAndAgents) {
    std::map<PersonaKind, ArchivedGenome> genomes;
    const char* genome_text[] = {"add(div(child_wins, child_visits), 1)", "div(1, add(child_wins, 1))",
                                 "child_available_moves", "div(1, add(child_available_moves, 1))"};
    const PersonaKind kinds[] = {PersonaKind::MaxS, PersonaKind::MinS, PersonaKind::MaxM, PersonaKind::MinM};
    for (int k = 0; k < 4; ++k) {
        const Persona p{kinds[k]};
        genomes[kinds[k]] = ArchivedGenome{p, gp::Expr::parse(genome_text[k]),
                                           p.metric() == MetricKind::FinalScore ? 1500.0 : 6.0};
    }
    std::vector<Preset> presets{make_preset("alpha", BoardConfig{}, 11, 30), make_preset("beta", BoardConfig{}, 12, 30)};
    for (auto& p : presets) p.config.moves_per_game = 4;
    SearchConfig search;
    search.root_visits = 8;
    search.rollout_base = 4;
    const PresetTable t = eval_on_presets(presets, genomes, search, 2, 7);
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(PresetTable::columns(),
              (std::vector<std::string>{"MaxS", "MinS", "MaxM", "MinM", "Vanilla", "Random"}));
    for (const auto& row : t.rows) {
        ASSERT_EQ(row.cells.size(), 6u);
        for (const auto& [name, cell] : row.cells) {
            EXPECT_GE(cell.score, 240.0) << name;
            EXPECT_GE(cell.moves, 0.0);
        }
    }
    const std::string text = t.to_text();
    EXPECT_NE(text.find("alpha"), std::string::npos);
    EXPECT_NE(text.find("("), std::string::npos);
    const PresetTable again = eval_on_presets(presets, genomes, search, 2, 7, 2);
    EXPECT_EQ(again.to_json(), t.to_json());
}

TEST(Statistics, PairedTTestMatchesReference) {
    const std::vector<double> a{5.1, 4.9, 6.2, 5.8, 6.0};
    const std::vector<double> b{4.0, 4.2, 5.1, 5.5, 5.0};
    const TTest t = paired_t_test(a, b);
    EXPECT_NEAR(t.t, 5.467934261194602, 1e-9);
    EXPECT_NEAR(t.p_value, 0.0027208424838217698, 1e-9);
    EXPECT_EQ(t.df, 4);
    const TTest reversed = paired_t_test(b, a);
    EXPECT_NEAR(reversed.p_value, 1 - 0.0027208424838217698, 1e-9);
    EXPECT_THROW(paired_t_test(a, std::vector<double>{1.0}), DomainError);
    const std::vector<double> same{1, 2, 3};
    EXPECT_EQ(paired_t_test(same, same).p_value, 0.5);
}

TEST(Statistics, ConfidenceHalfWidth) {
    const std::vector<double> x{3, 7, 4, 6, 5, 9};
    EXPECT_NEAR(mean_ci_half_width(x), 2.2670400872778664, 1e-9);
    EXPECT_EQ(mean_ci_half_width(std::vector<double>{1.0}), 0.0);
}

}  // namespace
}  // namespace m3::exp
