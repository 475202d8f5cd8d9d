#include <gtest/gtest.h>

#include <cmath>

#include "m3/expr.hpp"

namespace m3::gp {
namespace {

const HeuristicContext kCtx{5, 10, 100, 7};

Expr P(std::string_view text) { return Expr::parse(text); }

double eval(std::string_view text, const HeuristicContext& ctx = kCtx) { return evaluate_expr(P(text), ctx); }

bool uses(const Expr& e, Op op) {
    for (const Node& n : e.nodes()) {
        if (n.op == op) return true;
    }
    return false;
}

TEST(Expr, ConstructionRejectsMalformedTrees) {
    EXPECT_THROW(Expr({Node{Op::Add}}), ConfigError);
    EXPECT_THROW(Expr({Node{Op::Const, Var::ChildWins, 1}, Node{Op::Const, Var::ChildWins, 2}}), ConfigError);
    EXPECT_NO_THROW(Expr({Node{Op::Sqrt}, Node{Op::Var, Var::ParentVisits}}));
}

TEST(Expr, DepthCountsEdges) {
    EXPECT_EQ(P("child_wins").depth(), 0);
    EXPECT_EQ(P("sqrt(child_wins)").depth(), 1);
    EXPECT_EQ(P("add(mul(1, 2), sqrt(sqrt(child_visits)))").depth(), 3);
}

TEST(Expr, PrintParseRoundTrip) {
    const std::string text = "div(child_wins, sqrt(add(child_visits, 1.5)))";
    EXPECT_EQ(P(text).to_string(), text);
    Rng rng(3);
    for (int i = 0; i < 2000; ++i) {
        const Expr e = random_expr(2, 6, FunctionSet{true}, rng);
        const Expr back = Expr::parse(e.to_string());
        ASSERT_EQ(back, e) << e.to_string();
    }
    EXPECT_THROW(P("add(child_wins)"), ConfigError);
    EXPECT_THROW(P("pow(1, 2)"), ConfigError);
    EXPECT_THROW(P("child_wins extra"), ConfigError);
    EXPECT_THROW(P(""), ConfigError);
}

TEST(Expr, SubtreeSurgery) {
    const Expr e = P("add(mul(child_wins, 2), child_visits)");
    EXPECT_EQ(e.subtree_end(1), 4u);
    EXPECT_EQ(e.subtree(1).to_string(), "mul(child_wins, 2)");
    EXPECT_EQ(e.with_subtree(1, P("parent_visits")).to_string(), "add(parent_visits, child_visits)");
    EXPECT_EQ(e.with_subtree(0, P("3")).to_string(), "3");
}

TEST(EvaluateExpr, Examples) {
    EXPECT_DOUBLE_EQ(eval("div(child_wins, child_visits)"), 0.5);
    EXPECT_DOUBLE_EQ(eval("div(child_wins, 0)"), 1.0);
    EXPECT_DOUBLE_EQ(eval("div(child_wins, 1e-10)"), 1.0);
    EXPECT_DOUBLE_EQ(eval("sqrt(sub(0, 4))"), 2.0);
    EXPECT_DOUBLE_EQ(eval("add(mul(parent_visits, 2), child_available_moves)"), 207.0);
}

TEST(EvaluateExpr, ClampsInsteadOfOverflowing) {
    const double big = eval("mul(mul(mul(1e10, 1e10), 1e10), 1e10)");
    EXPECT_EQ(big, 1e18);
    EXPECT_EQ(eval("sub(0, mul(1e10, 1e10))"), -1e18);
    EXPECT_TRUE(std::isfinite(eval("div(1, 1e-9)")));
}

TEST(EvaluateExpr, FuzzIsTotalAndFinite) {
    Rng rng(99);
    for (int i = 0; i < 20000; ++i) {
        const Expr e = random_expr(0, 10, FunctionSet{true}, rng);
        HeuristicContext ctx;
        ctx.parent_visits = rng.uniform(0, 1e6);
        ctx.child_visits = rng.bernoulli(0.2) ? 0 : rng.uniform(0, ctx.parent_visits);
        ctx.child_wins = rng.uniform(0, ctx.child_visits);
        ctx.child_available_moves = rng.uniform(0, 60);
        ASSERT_TRUE(std::isfinite(evaluate_expr(e, ctx))) << e.to_string();
    }
}

TEST(RandomExpr, DepthBoundsAndOperatorClosure) {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        const Expr e = random_expr(2, 6, FunctionSet{false}, rng);
        ASSERT_GE(e.depth(), 2);
        ASSERT_LE(e.depth(), 6);
        ASSERT_FALSE(uses(e, Op::Sub)) << e.to_string();
        for (const Node& n : e.nodes()) {
            if (n.op == Op::Const) {
                ASSERT_GE(n.value, 0.0);
                ASSERT_LE(n.value, 10.0);
            }
        }
    }
    bool saw_sub = false;
    for (int i = 0; i < 500 && !saw_sub; ++i) {
        saw_sub = uses(random_expr(2, 6, FunctionSet{true}, rng), Op::Sub);
    }
    EXPECT_TRUE(saw_sub);
    EXPECT_THROW(random_expr(4, 2, FunctionSet{}, rng), ConfigError);
}

TEST(RandomExpr, Deterministic) {
    Rng a(5), b(5);
    for (int i = 0; i < 100; ++i) {
        EXPECT_EQ(random_expr(2, 6, FunctionSet{}, a), random_expr(2, 6, FunctionSet{}, b));
    }
}

TEST(Simplify, Examples) {
    EXPECT_EQ(simplify(P("mul(add(3, 4), parent_visits)")), simplify(P("mul(7, parent_visits)")));
    EXPECT_EQ(simplify(P("add(child_wins, 0)")), P("child_wins"));
    EXPECT_EQ(simplify(P("mul(child_wins, 1)")), P("child_wins"));
    EXPECT_EQ(simplify(P("div(child_wins, 1)")), P("child_wins"));
    EXPECT_EQ(simplify(P("div(child_visits, child_visits)")), P("1"));
    EXPECT_EQ(simplify(P("add(child_wins, child_visits)")), simplify(P("add(child_visits, child_wins)")));
    EXPECT_EQ(simplify(P("add(add(child_wins, 2), add(3, child_visits))")),
              simplify(P("add(child_visits, add(5, child_wins))")));
    EXPECT_EQ(simplify(P("sqrt(16)")), P("4"));
}

TEST(Simplify, IdempotentAndValuePreserving) {
    Rng rng(21);
    const auto probes = probe_contexts();
    ASSERT_EQ(probes.size(), 32u);
    for (int i = 0; i < 1000; ++i) {
        const Expr e = random_expr(2, 6, FunctionSet{i % 2 == 0}, rng);
        const Expr s = simplify(e);
        ASSERT_EQ(simplify(s), s) << e.to_string();
        ASSERT_TRUE(equivalent(e, s)) << e.to_string() << " vs " << s.to_string();
        for (const auto& ctx : probes) {
            const double a = evaluate_expr(e, ctx);
            const double b = evaluate_expr(s, ctx);
            ASSERT_LE(std::abs(a - b), 1e-9 * std::max(1.0, std::abs(a)))
                << e.to_string() << " -> " << s.to_string();
        }
    }
}

TEST(Equivalent, Examples) {
    EXPECT_TRUE(equivalent(P("sub(parent_visits, 4)"), P("add(sub(0, 4), parent_visits)")));
    EXPECT_TRUE(equivalent(P("add(child_wins, child_visits)"), P("add(child_visits, child_wins)")));
    EXPECT_FALSE(equivalent(P("child_wins"), P("child_visits")));
    EXPECT_FALSE(equivalent(P("mul(2, child_wins)"), P("mul(3, child_wins)")));
    // Different canonical forms, same function.
    EXPECT_TRUE(equivalent(P("mul(child_wins, add(child_visits, 1))"),
                           P("add(mul(child_wins, child_visits), child_wins)")));
}

TEST(Equivalent, ProbesAreRealisticAndFixed) {
    const auto probes = probe_contexts();
    for (const auto& p : probes) {
        EXPECT_LE(p.child_wins, p.child_visits);
        EXPECT_LE(p.child_visits, p.parent_visits);
        EXPECT_LE(p.parent_visits, 500);
        EXPECT_GE(p.child_available_moves, 0);
        EXPECT_LE(p.child_available_moves, 40);
    }
    EXPECT_EQ(probes.data(), probe_contexts().data());
    const Signature s = Signature::of(P("sqrt(child_wins)"));
    EXPECT_EQ(s.probes.size(), 32u);
    EXPECT_TRUE(s.equivalent_to(Signature::of(P("sqrt(mul(child_wins, 1))"))));
}

TEST(AsHeuristic, EvaluatesTheGenome) {
    const SelectionHeuristic h = as_heuristic(P("div(child_wins, child_visits)"));
    EXPECT_DOUBLE_EQ(h(kCtx), 0.5);
    EXPECT_EQ(h.name(), "div(child_wins, child_visits)");
}

}  // namespace
}  // namespace m3::gp
