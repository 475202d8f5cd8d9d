#include "m3/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "m3/parallel.hpp"

namespace m3::gp {

namespace {

constexpr int kVariationRetries = 50;
constexpr int kInitRejectionLimit = 100000;
constexpr int kMutationRetriesPerParent = 100;
constexpr int kMutationAttemptLimit = 100000;
constexpr int kCrossoverPasses = 10;

// Stream keys that keep the different consumers of randomness apart.
constexpr std::uint64_t kIndividualStream = 0x696e646976ULL;

double median_of(std::vector<double> v) {
    if (v.empty()) {
        return 0.0;
    }
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double play_one(const Agent& agent, MetricKind metric, std::uint64_t seed, const BoardConfig& board,
                std::uint64_t rng_seed) {
    GameState state = new_game(board, RefillSource::seeded(seed));
    state.record_spawns = false;
    Rng rng(rng_seed);
    return metric_of_state(play_game(std::move(state), agent, rng), metric);
}

// Signatures of everything admitted to the next population so far.
class Admission {
public:
    bool admit_if_unique(const Expr& genome) {
        Signature sig = Signature::of(genome);
        for (const auto& s : admitted_) {
            if (s.equivalent_to(sig)) {
                return false;
            }
        }
        admitted_.push_back(std::move(sig));
        return true;
    }

private:
    std::vector<Signature> admitted_;
};

}  // namespace

int EvolutionConfig::elite_count() const noexcept {
    return static_cast<int>(std::lround(population_size * elite_fraction));
}

void EvolutionConfig::validate() const {
    if (population_size < 2) {
        throw ConfigError("population_size must be at least 2");
    }
    if (elite_count() + mutation_slots + crossover_slots != population_size) {
        throw ConfigError(fmt::format("elites ({}) + mutation slots ({}) + crossover slots ({}) must equal "
                                      "population size ({})",
                                      elite_count(), mutation_slots, crossover_slots, population_size));
    }
    if (mutation_slots > population_size) {
        throw ConfigError("cannot sample more mutation parents than the population holds");
    }
    if (depth_min < 0 || depth_max < depth_min || depth_cap < depth_max) {
        throw ConfigError("depth bounds must satisfy 0 <= min <= max <= cap");
    }
    if (generations < 1 || games_per_individual < 1 || moves_per_game < 1) {
        throw ConfigError("generations, games and moves must all be at least 1");
    }
}

Population init_population(const EvolutionConfig& cfg, Rng& rng) {
    cfg.validate();
    Population pop;
    Admission admission;
    int rejected_in_a_row = 0;
    while (static_cast<int>(pop.members.size()) < cfg.population_size) {
        Expr candidate = random_expr(cfg.depth_min, cfg.depth_max, cfg.functions(), rng);
        if (admission.admit_if_unique(candidate)) {
            pop.members.push_back(Individual{std::move(candidate), std::nullopt, pop.next_id++});
            rejected_in_a_row = 0;
        } else if (++rejected_in_a_row >= kInitRejectionLimit) {
            throw EngineFault("could not find enough distinct genomes for the initial population");
        }
    }
    return pop;
}

Individual mutate(const Individual& ind, const EvolutionConfig& cfg, Rng& rng) {
    for (int attempt = 0; attempt < kVariationRetries; ++attempt) {
        Expr genome = ind.genome;
        if (rng.bernoulli(cfg.constant_mutation_prob)) {
            std::vector<std::size_t> constants;
            for (std::size_t i = 0; i < genome.size(); ++i) {
                if (genome.nodes()[i].op == Op::Const) {
                    constants.push_back(i);
                }
            }
            if (!constants.empty()) {
                const std::size_t at = constants[rng.below(constants.size())];
                genome = genome.with_subtree(at, Expr::constant(rng.uniform(0.0, 10.0)));
            }
        }
        const auto at = static_cast<std::size_t>(rng.below(genome.size()));
        genome = genome.with_subtree(at, random_expr(0, cfg.mutation_subtree_depth, cfg.functions(), rng));
        if (genome.depth() <= cfg.depth_cap) {
            return Individual{std::move(genome), std::nullopt, ind.id};
        }
    }
    return Individual{ind.genome, std::nullopt, ind.id};
}

std::pair<Individual, Individual> crossover(const Individual& a, const Individual& b,
                                            const EvolutionConfig& cfg, Rng& rng) {
    for (int attempt = 0; attempt < kVariationRetries; ++attempt) {
        const auto i = static_cast<std::size_t>(rng.below(a.genome.size()));
        const auto j = static_cast<std::size_t>(rng.below(b.genome.size()));
        Expr first = a.genome.with_subtree(i, b.genome.subtree(j));
        Expr second = b.genome.with_subtree(j, a.genome.subtree(i));
        if (first.depth() <= cfg.depth_cap && second.depth() <= cfg.depth_cap) {
            return {Individual{std::move(first), std::nullopt, a.id},
                    Individual{std::move(second), std::nullopt, b.id}};
        }
    }
    return {Individual{a.genome, std::nullopt, a.id}, Individual{b.genome, std::nullopt, b.id}};
}

std::vector<std::size_t> ranking(const Population& pop) {
    std::vector<std::size_t> order(pop.members.size());
    std::iota(order.begin(), order.end(), 0);
    for (const auto& m : pop.members) {
        if (!m.fitness) {
            throw ContractViolation("ranking requires every member to be evaluated");
        }
    }
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        const auto& a = pop.members[x];
        const auto& b = pop.members[y];
        if (*a.fitness != *b.fitness) {
            return *a.fitness > *b.fitness;
        }
        return a.id < b.id;
    });
    return order;
}

Population next_generation(const Population& pop, const EvolutionConfig& cfg, Rng& rng) {
    cfg.validate();
    if (static_cast<int>(pop.members.size()) != cfg.population_size) {
        throw ContractViolation("population size does not match the configuration");
    }
    const auto order = ranking(pop);
    Population next;
    next.generation_index = pop.generation_index + 1;
    next.next_id = pop.next_id;
    Admission admission;

    for (int e = 0; e < cfg.elite_count(); ++e) {
        const Individual& elite = pop.members[order[static_cast<std::size_t>(e)]];
        admission.admit_if_unique(elite.genome);
        next.members.push_back(elite);
    }

    // Mutation: distinct parents sampled without replacement.
    std::vector<std::size_t> parents(pop.members.size());
    std::iota(parents.begin(), parents.end(), 0);
    rng.shuffle(std::span(parents));
    parents.resize(static_cast<std::size_t>(cfg.mutation_slots));
    int attempts = 0;
    for (std::size_t parent : parents) {
        int tries = 0;
        while (true) {
            if (++attempts > kMutationAttemptLimit) {
                throw EngineFault("mutation could not produce enough distinct genomes");
            }
            if (++tries > kMutationRetriesPerParent) {
                parent = static_cast<std::size_t>(rng.below(pop.members.size()));
                tries = 0;
            }
            Individual child = mutate(pop.members[parent], cfg, rng);
            if (admission.admit_if_unique(child.genome)) {
                child.id = next.next_id++;
                next.members.push_back(std::move(child));
                break;
            }
        }
    }

    // Crossover over shuffled unordered pairs of the parent population.
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < pop.members.size(); ++i) {
        for (std::size_t j = i + 1; j < pop.members.size(); ++j) {
            pairs.emplace_back(i, j);
        }
    }
    const auto target = static_cast<std::size_t>(cfg.population_size);
    for (int pass = 0; next.members.size() < target; ++pass) {
        if (pass >= kCrossoverPasses) {
            throw EngineFault("crossover could not fill the population in 10 passes");
        }
        rng.shuffle(std::span(pairs));
        for (const auto& [i, j] : pairs) {
            auto [first, second] = crossover(pop.members[i], pop.members[j], cfg, rng);
            for (Individual* child : {&first, &second}) {
                if (next.members.size() < target && admission.admit_if_unique(child->genome)) {
                    child->id = next.next_id++;
                    next.members.push_back(std::move(*child));
                }
            }
            if (next.members.size() >= target) {
                break;
            }
        }
    }
    return next;
}

std::vector<double> play_seeds(const Agent& agent, MetricKind metric, std::span<const std::uint64_t> seeds,
                               const BoardConfig& board, std::uint64_t stream_key, int workers) {
    std::vector<double> values(seeds.size());
    parallel_for(seeds.size(), workers, [&](std::size_t i) {
        values[i] = play_one(agent, metric, seeds[i], board, derive_seed(stream_key, i, seeds[i]));
    });
    return values;
}

std::vector<double> play_seeds(const SelectionHeuristic& h, MetricKind metric,
                               std::span<const std::uint64_t> seeds, const GameSetup& setup,
                               std::uint64_t stream_key, int workers) {
    return play_seeds(mcts_agent(h, setup.search, metric), metric, seeds, setup.board, stream_key, workers);
}

double evaluate_fitness(const SelectionHeuristic& h, const Persona& persona,
                        std::span<const std::uint64_t> seeds, const GameSetup& setup,
                        std::uint64_t stream_key, int workers) {
    const auto values = play_seeds(h, persona.metric(), seeds, setup, stream_key, workers);
    return fitness_of(mean_of(values), persona.direction());
}

EvolutionHistory evolve(const EvolutionConfig& cfg, const GameSetup& setup, const Persona& persona,
                        std::span<const SeedBatch> batches, Rng& rng, const GenerationObserver& observer) {
    cfg.validate();
    const std::size_t needed = cfg.frozen_seeds ? 1 : static_cast<std::size_t>(cfg.generations);
    if (batches.size() < needed) {
        throw ConfigError(fmt::format("evolution needs {} seed batches, got {}", needed, batches.size()));
    }
    const MetricKind metric = persona.metric();
    const Direction direction = persona.direction();
    GameSetup game = setup;
    game.board.moves_per_game = cfg.moves_per_game;

    EvolutionHistory history;
    history.persona = persona;
    Population pop = init_population(cfg, rng);

    double goal = mean_of(play_seeds(random_agent(), metric, batches[0], game.board,
                                     derive_seed(kRandomBaselineStream, 0), cfg.workers));

    for (int g = 0; g < cfg.generations; ++g) {
        const SeedBatch& seeds = batches[cfg.frozen_seeds ? 0 : static_cast<std::size_t>(g)];
        game.search.goal = Goal{goal, direction};
        if (!cfg.frozen_seeds) {
            for (auto& m : pop.members) {
                m.fitness.reset();
            }
        }

        // One job per (unevaluated member, seed); each job's randomness is
        // keyed by generation, member id and seed index.
        std::vector<std::size_t> pending;
        for (std::size_t i = 0; i < pop.members.size(); ++i) {
            if (!pop.members[i].fitness) {
                pending.push_back(i);
            }
        }
        std::vector<Agent> agents;
        for (const std::size_t i : pending) {
            agents.push_back(mcts_agent(as_heuristic(pop.members[i].genome), game.search, metric));
        }
        const std::size_t games = seeds.size();
        std::vector<double> values(pending.size() * games);
        parallel_for(values.size(), cfg.workers, [&](std::size_t job) {
            const std::size_t k = job / games;
            const std::size_t s = job % games;
            const std::uint64_t key =
                derive_seed(kIndividualStream, static_cast<std::uint64_t>(g), pop.members[pending[k]].id);
            values[job] = play_one(agents[k], metric, seeds[s], game.board, derive_seed(key, s, seeds[s]));
        });
        for (std::size_t k = 0; k < pending.size(); ++k) {
            double sum = 0;
            for (std::size_t s = 0; s < games; ++s) {
                sum += values[k * games + s];
            }
            pop.members[pending[k]].fitness = fitness_of(sum / static_cast<double>(games), direction);
        }

        GenerationRecord rec;
        rec.generation = g;
        rec.goal = goal;
        rec.seeds = seeds;
        for (const auto& m : pop.members) {
            rec.metric_values.push_back(fitness_of(*m.fitness, direction));
            rec.member_ids.push_back(m.id);
            rec.member_genomes.push_back(m.genome.to_string());
        }
        rec.min = *std::min_element(rec.metric_values.begin(), rec.metric_values.end());
        rec.max = *std::max_element(rec.metric_values.begin(), rec.metric_values.end());
        rec.median = median_of(rec.metric_values);
        rec.mean = mean_of(rec.metric_values);
        const auto order = ranking(pop);
        for (int e = 0; e < cfg.elite_count(); ++e) {
            const auto& m = pop.members[order[static_cast<std::size_t>(e)]];
            rec.elites.emplace_back(m.genome.to_string(), *m.fitness);
        }
        if (observer) {
            observer(pop, rec);
        }
        history.generations.push_back(std::move(rec));

        goal = fitness_of(*pop.members[order.front()].fitness, direction);
        if (g + 1 < cfg.generations) {
            pop = next_generation(pop, cfg, rng);
        } else {
            history.best = pop.members[order.front()];
        }
    }
    history.final_goal = goal;
    return history;
}

}  // namespace m3::gp
