#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "m3/engine.hpp"
#include "m3/expr.hpp"
#include "m3/personas.hpp"
#include "m3/search.hpp"

namespace m3::gp {

using SeedBatch = std::vector<std::uint64_t>;

/// Stream key of the random agent that sets the first generation's goal.
/// Baseline runs reuse it so both see the same random games.
inline constexpr std::uint64_t kRandomBaselineStream = 0x72616e646f6dULL;

struct EvolutionConfig {
    int population_size = 100;
    double elite_fraction = 0.10;
    int mutation_slots = 45;
    int crossover_slots = 45;
    int generations = 100;
    double constant_mutation_prob = 0.5;
    int depth_min = 2;
    int depth_max = 6;
    int depth_cap = 10;
    // Depth bound for the replacement subtree grown by mutation.
    int mutation_subtree_depth = 3;
    int games_per_individual = 50;
    int moves_per_game = 20;
    bool enable_subtraction = false;
    // Test mode: every generation reuses the first seed batch and elites
    // keep their fitness instead of being re-evaluated.
    bool frozen_seeds = false;
    // Worker threads for fitness evaluation. Results do not depend on it.
    int workers = 1;

    int elite_count() const noexcept;
    FunctionSet functions() const noexcept { return FunctionSet{enable_subtraction}; }
    void validate() const;
};

struct Individual {
    Expr genome;
    std::optional<double> fitness;
    std::uint64_t id = 0;
};

struct Population {
    std::vector<Individual> members;
    int generation_index = 0;
    std::uint64_t next_id = 0;
};

/// Rejection-samples random trees until `population_size` pairwise
/// non-equivalent genomes are collected; later duplicates are dropped.
Population init_population(const EvolutionConfig& cfg, Rng& rng);

/// With probability `constant_mutation_prob` one constant leaf is redrawn,
/// then a uniformly chosen node is replaced by a fresh grown subtree.
/// Results deeper than `depth_cap` are retried; after 50 misses the input
/// comes back unchanged. The returned individual is unevaluated.
Individual mutate(const Individual& ind, const EvolutionConfig& cfg, Rng& rng);

/// Swaps one uniformly chosen subtree of each parent.
std::pair<Individual, Individual> crossover(const Individual& a, const Individual& b,
                                            const EvolutionConfig& cfg, Rng& rng);

/// Elites (by fitness, ties to the lower id) are copied unchanged, then
/// mutants fill the mutation slots and crossover offspring of shuffled
/// parent pairs fill the rest. Every admitted genome is non-equivalent to
/// all genomes admitted before it. Requires every member to be evaluated.
Population next_generation(const Population& pop, const EvolutionConfig& cfg, Rng& rng);

/// Indices of `pop.members` sorted best first (ties to the lower id).
std::vector<std::size_t> ranking(const Population& pop);

/// How one game is set up and searched during fitness evaluation.
struct GameSetup {
    BoardConfig board;
    SearchConfig search;
};

/// Plays one game per seed with `h` driving every move and returns the
/// mean persona metric as a fitness (negated for minimizing personas).
/// `stream_key` separates the search randomness of different callers.
double evaluate_fitness(const SelectionHeuristic& h, const Persona& persona,
                        std::span<const std::uint64_t> seeds, const GameSetup& setup,
                        std::uint64_t stream_key, int workers = 1);

/// One game per seed, started from `new_game(board, seeded(seed))`.
/// Returns the per-game metric values in seed order.
std::vector<double> play_seeds(const Agent& agent, MetricKind metric, std::span<const std::uint64_t> seeds,
                               const BoardConfig& board, std::uint64_t stream_key, int workers = 1);

/// Per-game metric values behind `evaluate_fitness`, in seed order.
std::vector<double> play_seeds(const SelectionHeuristic& h, MetricKind metric,
                               std::span<const std::uint64_t> seeds, const GameSetup& setup,
                               std::uint64_t stream_key, int workers = 1);

struct GenerationRecord {
    int generation = 0;
    // Raw metric values (not negated), one per member, in member order.
    std::vector<double> metric_values;
    double min = 0, median = 0, max = 0, mean = 0;
    // Threshold the generation's searches tried to beat.
    double goal = 0;
    SeedBatch seeds;
    // Top `elite_count` genomes by fitness with their fitness.
    std::vector<std::pair<std::string, double>> elites;
    std::vector<std::uint64_t> member_ids;
    std::vector<std::string> member_genomes;
};

struct EvolutionHistory {
    Persona persona;
    std::vector<GenerationRecord> generations;
    Individual best;        // top of the final generation
    double final_goal = 0;  // goal the next generation would have used
};

/// Called once per evaluated generation, before variation.
using GenerationObserver = std::function<void(const Population&, const GenerationRecord&)>;

/// Full evolutionary run. `batches` holds one seed batch per generation
/// (only the first is used in frozen-seed mode). The first generation's
/// goal is the random agent's mean on its batch; each later generation
/// uses the best raw metric of the one before.
EvolutionHistory evolve(const EvolutionConfig& cfg, const GameSetup& setup, const Persona& persona,
                        std::span<const SeedBatch> batches, Rng& rng,
                        const GenerationObserver& observer = {});

}  // namespace m3::gp
