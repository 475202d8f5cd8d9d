#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "m3/rng.hpp"
#include "m3/search.hpp"

namespace m3::gp {

enum class Op : std::uint8_t { Add, Sub, Mul, Div, Sqrt, Const, Var };

enum class Var : std::uint8_t { ChildWins, ChildVisits, ParentVisits, ChildAvailableMoves };

inline constexpr std::array<Var, 4> kAllVars{Var::ChildWins, Var::ChildVisits, Var::ParentVisits,
                                              Var::ChildAvailableMoves};

constexpr int arity(Op op) noexcept {
    switch (op) {
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div: return 2;
        case Op::Sqrt: return 1;
        default: return 0;
    }
}

std::string_view op_name(Op op) noexcept;
std::string_view var_name(Var var) noexcept;

struct Node {
    Op op = Op::Const;
    Var var = Var::ChildWins;
    double value = 0.0;

    friend bool operator==(const Node&, const Node&) = default;
};

/// Arithmetic expression tree stored in prefix order, so every subtree is
/// a contiguous slice. Depth counts edges: a lone leaf has depth 0.
class Expr {
public:
    Expr() = default;
    /// Throws ConfigError unless `nodes` is exactly one well-formed tree.
    explicit Expr(std::vector<Node> nodes);

    static Expr constant(double value);
    static Expr variable(Var var);
    static Expr unary(Op op, const Expr& child);
    static Expr binary(Op op, const Expr& lhs, const Expr& rhs);

    std::span<const Node> nodes() const noexcept { return nodes_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    bool empty() const noexcept { return nodes_.empty(); }
    int depth() const;

    /// One past the last node of the subtree rooted at `index`.
    std::size_t subtree_end(std::size_t index) const;
    Expr subtree(std::size_t index) const;
    Expr with_subtree(std::size_t index, const Expr& replacement) const;

    /// Prefix notation, e.g. `div(child_wins, sqrt(add(child_visits, 1.5)))`.
    /// Constants use the shortest form that parses back to the same double.
    std::string to_string() const;
    static Expr parse(std::string_view text);

    friend bool operator==(const Expr&, const Expr&) = default;

private:
    std::vector<Node> nodes_;
};

struct FunctionSet {
    bool subtraction = false;

    std::vector<Op> ops() const;
};

/// Protected evaluation: div(a, b) is 1 when |b| < 1e-9, sqrt takes |x|,
/// and every intermediate result is clamped to [-1e18, 1e18]. Total.
double evaluate_expr(const Expr& e, const HeuristicContext& ctx) noexcept;

SelectionHeuristic as_heuristic(const Expr& e);

/// Grow-style tree whose depth lies in [min_depth, max_depth]. Inner nodes
/// are uniform over the function set; leaves are uniform over a constant
/// (drawn from [0, 10]) and the four variables.
Expr random_expr(int min_depth, int max_depth, const FunctionSet& functions, Rng& rng);

/// Canonical form: subtraction rewritten as addition of a negated term,
/// constants folded, identities (x*1, x+0, x/1, x/x) removed, and the
/// operands of nested additions and multiplications flattened and sorted.
/// Idempotent.
Expr simplify(const Expr& e);

/// Probe contexts shared by every equivalence check.
std::span<const HeuristicContext> probe_contexts();

/// Simplified form plus its values at the probe contexts.
struct Signature {
    std::string canonical;
    std::vector<double> probes;

    static Signature of(const Expr& e);
    bool equivalent_to(const Signature& other) const noexcept;
};

/// Same canonical form, or numerically indistinguishable at every probe
/// context (|a - b| <= 1e-9 * max(1, |a|)).
bool equivalent(const Expr& a, const Expr& b);

}  // namespace m3::gp
