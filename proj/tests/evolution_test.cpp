#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "m3/evolution.hpp"

namespace m3::gp {
namespace {

EvolutionConfig small_config() {
    EvolutionConfig cfg;
    cfg.population_size = 10;
    cfg.mutation_slots = 4;
    cfg.crossover_slots = 5;
    cfg.generations = 3;
    cfg.games_per_individual = 2;
    cfg.moves_per_game = 3;
    return cfg;
}

GameSetup small_setup() {
    GameSetup setup;
    setup.search.root_visits = 8;
    setup.search.rollout_base = 3;
    return setup;
}

std::vector<SeedBatch> batches(int count, int size) {
    std::vector<SeedBatch> out;
    for (int g = 0; g < count; ++g) {
        SeedBatch b;
        for (int s = 0; s < size; ++s) b.push_back(derive_seed(1234, g, s));
        out.push_back(b);
    }
    return out;
}

void expect_pairwise_distinct(const Population& pop) {
    for (std::size_t i = 0; i < pop.members.size(); ++i) {
        for (std::size_t j = i + 1; j < pop.members.size(); ++j) {
            ASSERT_FALSE(equivalent(pop.members[i].genome, pop.members[j].genome))
                << pop.members[i].genome.to_string() << " ~ " << pop.members[j].genome.to_string();
        }
    }
}

void assign_fitness(Population& pop, Rng& rng) {
    for (auto& m : pop.members) m.fitness = rng.uniform(0, 1000);
}

TEST(EvolutionConfig, PaperDefaultsAddUp) {
    const EvolutionConfig cfg;
    EXPECT_EQ(cfg.population_size, 100);
    EXPECT_EQ(cfg.elite_count(), 10);
    EXPECT_EQ(cfg.elite_count() + cfg.mutation_slots + cfg.crossover_slots, cfg.population_size);
    EXPECT_EQ(cfg.games_per_individual, 50);
    EXPECT_EQ(cfg.moves_per_game, 20);
    EXPECT_FALSE(cfg.enable_subtraction);
    EXPECT_NO_THROW(cfg.validate());
    EvolutionConfig bad = cfg;
    bad.mutation_slots = 46;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(InitPopulation, SizedUniqueAndReproducible) {
    EvolutionConfig cfg;
    Rng a(1), b(1);
    const Population pop = init_population(cfg, a);
    ASSERT_EQ(pop.members.size(), 100u);
    expect_pairwise_distinct(pop);
    std::set<std::uint64_t> ids;
    for (const auto& m : pop.members) {
        EXPECT_FALSE(m.fitness.has_value());
        EXPECT_GE(m.genome.depth(), 2);
        EXPECT_LE(m.genome.depth(), 6);
        ids.insert(m.id);
    }
    EXPECT_EQ(ids.size(), 100u);
    const Population again = init_population(cfg, b);
    for (std::size_t i = 0; i < pop.members.size(); ++i) {
        EXPECT_EQ(pop.members[i].genome, again.members[i].genome);
    }
}

TEST(Mutate, RespectsTheDepthCapAndIsDeterministic) {
    const EvolutionConfig cfg;
    Rng rng(3);
    Individual ind{random_expr(2, 6, cfg.functions(), rng), 42.0, 7};
    for (int i = 0; i < 10000; ++i) {
        const Individual next = mutate(ind, cfg, rng);
        ASSERT_LE(next.genome.depth(), cfg.depth_cap);
        ASSERT_FALSE(next.fitness.has_value());
        ind = next;
    }
    Rng a(8), b(8);
    EXPECT_EQ(mutate(ind, cfg, a).genome, mutate(ind, cfg, b).genome);
}

TEST(Mutate, ConstantStepIsANoOpWithoutConstants) {
    EvolutionConfig always;
    always.constant_mutation_prob = 1.0;
    EvolutionConfig never;
    never.constant_mutation_prob = 0.0;
    const Individual ind{Expr::parse("add(child_wins, sqrt(child_visits))"), std::nullopt, 1};
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng a(seed), b(seed);
        ASSERT_EQ(mutate(ind, always, a).genome, mutate(ind, never, b).genome);
    }
    // With a constant present the two settings diverge somewhere.
    const Individual with_const{Expr::parse("add(child_wins, 2.5)"), std::nullopt, 1};
    int differ = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng a(seed), b(seed);
        differ += mutate(with_const, always, a).genome != mutate(with_const, never, b).genome;
    }
    EXPECT_GT(differ, 0);
}

TEST(Crossover, RootSwapAndClosure) {
    const EvolutionConfig cfg;
    const Individual a{Expr::parse("child_wins"), 1.0, 1};
    const Individual b{Expr::parse("parent_visits"), 2.0, 2};
    Rng rng(5);
    const auto [x, y] = crossover(a, b, cfg, rng);
    EXPECT_EQ(x.genome, b.genome);
    EXPECT_EQ(y.genome, a.genome);

    Rng r(6), s(6);
    for (int i = 0; i < 2000; ++i) {
        const Individual p{random_expr(2, 6, cfg.functions(), r), std::nullopt, 1};
        const Individual q{random_expr(2, 6, cfg.functions(), r), std::nullopt, 2};
        const auto [c1, c2] = crossover(p, q, cfg, r);
        ASSERT_LE(c1.genome.depth(), cfg.depth_cap);
        ASSERT_LE(c2.genome.depth(), cfg.depth_cap);
        for (const Expr* e : {&c1.genome, &c2.genome}) {
            for (const Node& n : e->nodes()) ASSERT_NE(n.op, Op::Sub);
        }
        ASSERT_EQ(c1.genome.size() + c2.genome.size(), p.genome.size() + q.genome.size());
    }
    const Individual p{Expr::parse("add(child_wins, sqrt(3))"), std::nullopt, 1};
    const Individual q{Expr::parse("mul(parent_visits, div(child_visits, 2))"), std::nullopt, 2};
    EXPECT_EQ(crossover(p, q, cfg, s).first.genome, [&] {
        Rng t(6);
        return crossover(p, q, cfg, t).first.genome;
    }());
}

TEST(NextGeneration, SizeUniquenessAndElites) {
    const EvolutionConfig cfg;
    Rng rng(10);
    Population pop = init_population(cfg, rng);
    assign_fitness(pop, rng);
    const auto order = ranking(pop);
    const Population next = next_generation(pop, cfg, rng);
    ASSERT_EQ(next.members.size(), 100u);
    EXPECT_EQ(next.generation_index, 1);
    expect_pairwise_distinct(next);
    for (int e = 0; e < 10; ++e) {
        const auto& elite = pop.members[order[static_cast<std::size_t>(e)]];
        EXPECT_EQ(next.members[static_cast<std::size_t>(e)].genome, elite.genome);
        EXPECT_EQ(next.members[static_cast<std::size_t>(e)].id, elite.id);
        EXPECT_EQ(next.members[static_cast<std::size_t>(e)].fitness, elite.fitness);
    }
    for (std::size_t i = 10; i < next.members.size(); ++i) {
        EXPECT_FALSE(next.members[i].fitness.has_value());
        EXPECT_GE(next.members[i].id, pop.next_id);
        EXPECT_LE(next.members[i].genome.depth(), cfg.depth_cap);
    }
}

TEST(NextGeneration, ElitesAreTheBestUnderEitherDirection) {
    const EvolutionConfig cfg;
    Rng rng(11);
    Population pop = init_population(cfg, rng);
    std::vector<double> raw;
    for (std::size_t i = 0; i < pop.members.size(); ++i) raw.push_back(1000.0 + static_cast<double>((i * 37) % 100));
    for (std::size_t i = 0; i < pop.members.size(); ++i) {
        pop.members[i].fitness = fitness_of(raw[i], Direction::Minimize);
    }
    std::vector<double> sorted = raw;
    std::sort(sorted.begin(), sorted.end());
    const Population next = next_generation(pop, cfg, rng);
    for (int e = 0; e < 10; ++e) {
        EXPECT_EQ(-*next.members[static_cast<std::size_t>(e)].fitness, sorted[static_cast<std::size_t>(e)]);
    }
}

TEST(NextGeneration, RequiresEvaluatedMembers) {
    const EvolutionConfig cfg;
    Rng rng(12);
    const Population pop = init_population(cfg, rng);
    EXPECT_THROW(next_generation(pop, cfg, rng), ContractViolation);
}

TEST(EvaluateFitness, DeterministicAndNegatedForMinS) {
    const GameSetup setup = small_setup();
    const SeedBatch seeds = batches(1, 3)[0];
    const SelectionHeuristic h = as_heuristic(Expr::parse("add(div(child_wins, child_visits), 1)"));
    const double a = evaluate_fitness(h, Persona{PersonaKind::MaxS}, seeds, setup, 9);
    const double b = evaluate_fitness(h, Persona{PersonaKind::MaxS}, seeds, setup, 9, 3);
    EXPECT_EQ(a, b);
    EXPECT_GE(a, 1200.0);
    EXPECT_EQ(evaluate_fitness(h, Persona{PersonaKind::MinS}, seeds, setup, 9), -a);
    const auto values = play_seeds(h, MetricKind::FinalScore, seeds, setup, 9);
    double sum = 0;
    for (const double v : values) sum += v;
    EXPECT_DOUBLE_EQ(a, sum / 3.0);
}

TEST(Evolve, HistoryShapeAndGoalChain) {
    const EvolutionConfig cfg = small_config();
    const auto seeds = batches(cfg.generations, cfg.games_per_individual);
    Rng rng(13);
    int observed = 0;
    const EvolutionHistory h = evolve(cfg, small_setup(), Persona{PersonaKind::MaxS}, seeds, rng,
                                      [&](const Population& pop, const GenerationRecord& rec) {
                                          EXPECT_EQ(pop.members.size(), 10u);
                                          EXPECT_EQ(rec.generation, observed++);
                                      });
    ASSERT_EQ(h.generations.size(), 3u);
    EXPECT_EQ(observed, 3);
    for (std::size_t g = 0; g < h.generations.size(); ++g) {
        const auto& rec = h.generations[g];
        EXPECT_EQ(rec.seeds, seeds[g]);
        EXPECT_EQ(rec.metric_values.size(), 10u);
        EXPECT_LE(rec.min, rec.median);
        EXPECT_LE(rec.median, rec.max);
        EXPECT_LE(rec.min, rec.mean);
        EXPECT_LE(rec.mean, rec.max);
        EXPECT_EQ(rec.elites.size(), 1u);
        EXPECT_EQ(rec.elites[0].second, rec.max);
        if (g > 0) {
            EXPECT_EQ(rec.goal, h.generations[g - 1].max);
        }
    }
    EXPECT_EQ(h.final_goal, h.generations.back().max);
    EXPECT_EQ(*h.best.fitness, h.generations.back().max);
}

TEST(Evolve, FirstGoalIsTheRandomAgentMean) {
    EvolutionConfig cfg = small_config();
    cfg.generations = 1;
    const auto seeds = batches(1, cfg.games_per_individual);
    Rng rng(14);
    const EvolutionHistory h = evolve(cfg, small_setup(), Persona{PersonaKind::MinM}, seeds, rng);
    BoardConfig board;
    board.moves_per_game = cfg.moves_per_game;
    const auto random = play_seeds(random_agent(), MetricKind::MeanAvailableMoves, seeds[0], board,
                                   derive_seed(kRandomBaselineStream, 0));
    EXPECT_DOUBLE_EQ(h.generations[0].goal, (random[0] + random[1]) / 2.0);
    EXPECT_EQ(h.generations[0].min, -h.generations[0].elites[0].second);
}

TEST(Evolve, FrozenSeedsGiveMonotoneElites) {
    EvolutionConfig cfg = small_config();
    cfg.frozen_seeds = true;
    cfg.generations = 6;
    const auto seeds = batches(1, cfg.games_per_individual);
    for (const auto kind : {PersonaKind::MaxS, PersonaKind::MinM}) {
        Rng rng(15);
        const EvolutionHistory h = evolve(cfg, small_setup(), Persona{kind}, seeds, rng);
        for (std::size_t g = 1; g < h.generations.size(); ++g) {
            EXPECT_GE(h.generations[g].elites[0].second, h.generations[g - 1].elites[0].second);
            EXPECT_EQ(h.generations[g].seeds, seeds[0]);
        }
    }
}

TEST(Evolve, WorkerCountDoesNotChangeResults) {
    EvolutionConfig cfg = small_config();
    const auto seeds = batches(cfg.generations, cfg.games_per_individual);
    Rng a(16), b(16);
    const EvolutionHistory one = evolve(cfg, small_setup(), Persona{PersonaKind::MaxM}, seeds, a);
    cfg.workers = 4;
    const EvolutionHistory four = evolve(cfg, small_setup(), Persona{PersonaKind::MaxM}, seeds, b);
    for (std::size_t g = 0; g < one.generations.size(); ++g) {
        EXPECT_EQ(one.generations[g].metric_values, four.generations[g].metric_values);
        EXPECT_EQ(one.generations[g].member_genomes, four.generations[g].member_genomes);
    }
}

TEST(Evolve, RejectsTooFewBatches) {
    const EvolutionConfig cfg = small_config();
    Rng rng(17);
    EXPECT_THROW(evolve(cfg, small_setup(), Persona{}, batches(2, 2), rng), ConfigError);
}

}  // namespace
}  // namespace m3::gp
