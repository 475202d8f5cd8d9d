#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "m3/evolution.hpp"
#include "m3/preset.hpp"

namespace m3::exp {

using gp::SeedBatch;

enum class Scale { Paper, Desk };

std::string_view scale_token(Scale scale) noexcept;  // paper|desk
Scale parse_scale(std::string_view token);

struct ExperimentConfig {
    Persona persona;
    gp::EvolutionConfig evolution;
    SearchConfig search;
    std::uint64_t master_seed = 0;
    Scale scale = Scale::Paper;

    /// Paper: population 100, 100 generations, 50 games of 20 moves.
    /// Desk: population 20 (2 elites, 9 mutants, 9 crossover children),
    /// 10 generations, 10 games of 10 moves. Both search with 250 root
    /// visits and a rollout budget of one game.
    static ExperimentConfig preset(Scale scale, Persona persona, std::uint64_t master_seed);

    BoardConfig board() const;
    gp::GameSetup setup() const;
    void validate() const;
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);

/// `generations` batches of `batch_size` seeds, derived from the master
/// seed alone. No seed repeats within or across batches.
std::vector<SeedBatch> generate_seed_batches(std::uint64_t master_seed, int generations, int batch_size = 50);

struct BaselineResult {
    std::string agent;                            // vanilla|random
    std::vector<std::vector<double>> per_batch;   // metric per seed, batch by batch
    std::vector<double> batch_means;
    double mean = 0;                              // over every game played

    std::vector<double> values() const;
};

struct Baselines {
    BaselineResult vanilla;
    BaselineResult random;
};

/// Random agent and vanilla MCTS on every seed of every batch. The random
/// agent plays first; its batch mean is the goal vanilla searches against
/// on that batch.
Baselines run_baselines(std::span<const SeedBatch> batches, MetricKind metric, const SearchConfig& search,
                        const BoardConfig& board, int workers = 1);

nlohmann::json baselines_to_json(const Baselines& b);
Baselines baselines_from_json(const nlohmann::json& j);

nlohmann::json record_to_json(const gp::GenerationRecord& rec);
gp::GenerationRecord record_from_json(const nlohmann::json& j);

struct RunArtifacts {
    std::filesystem::path dir;
    gp::EvolutionHistory history;
    Baselines baselines;
    std::vector<std::string> files;
};

/// Evolution plus baselines on the same seed batches. Writes into `out`:
///   manifest.json   config, master seed, artifact list, completion status
///   seeds.json      the seed batches
///   stats.csv       one row per generation with baseline overlays
///   history.jsonl   one generation record per line
///   baselines.json  per-seed baseline values
///   genomes.json    best genome, final elites and the last goal
/// Throws RunError when a file cannot be written; the manifest then lists
/// what was written and is marked partial.
RunArtifacts run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out);

/// Reads back what run_experiment wrote.
struct LoadedRun {
    ExperimentConfig config;
    std::vector<gp::GenerationRecord> generations;
    Baselines baselines;
};
LoadedRun load_run(const std::filesystem::path& dir);

/// generation,min,median,max,mean,vanilla_mean,random_mean and, for score
/// minimization runs only, a constant `floor` column at 60 points per move.
/// Values are written with 17 significant digits.
void emit_plot_data(const Persona& persona, const std::vector<gp::GenerationRecord>& history,
                    const Baselines& baselines, int moves_per_game, const std::filesystem::path& path);

/// A genome picked from a run for preset evaluation.
struct ArchivedGenome {
    Persona persona;
    gp::Expr genome;
    double goal = 0;  // the threshold its last generation searched against
};

nlohmann::json genome_archive_to_json(const gp::EvolutionHistory& history);
ArchivedGenome genome_archive_from_json(const nlohmann::json& j);

/// Finds `genomes.json` in `dir` and its immediate subdirectories, one per
/// persona. Throws RunError when a persona appears twice.
std::map<PersonaKind, ArchivedGenome> load_genome_archives(const std::filesystem::path& dir);

struct PresetCell {
    double score = 0;
    double moves = 0;  // mean available moves
};

struct PresetRow {
    std::string preset_id;
    std::map<std::string, PresetCell> cells;  // keyed by column name
};

struct PresetTable {
    static const std::vector<std::string>& columns();  // MaxS MinS MaxM MinM Vanilla Random
    std::vector<PresetRow> rows;

    /// Scores per cell; MaxM and MinM also show mean available moves in
    /// parentheses.
    std::string to_text() const;
    nlohmann::json to_json() const;
};

/// Each agent plays each preset `repeats` times; cells hold the means.
/// Throws RunError unless all four personas have an archived genome.
PresetTable eval_on_presets(std::span<const Preset> presets,
                            const std::map<PersonaKind, ArchivedGenome>& genomes, const SearchConfig& search,
                            int repeats, std::uint64_t seed, int workers = 1);

struct TTest {
    double mean_difference = 0;
    double t = 0;
    double df = 0;
    double p_value = 1;  // one-sided, H1: mean(a - b) > 0
};

/// Paired one-sided t-test on equal-length samples.
TTest paired_t_test(std::span<const double> a, std::span<const double> b);

/// Two-sided confidence half-width of the mean at `level`.
double mean_ci_half_width(std::span<const double> values, double level = 0.95);

double mean(std::span<const double> values);

}  // namespace m3::exp
