#include "m3/expr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>

#include <fmt/format.h>

namespace m3::gp {

namespace {

constexpr double kClamp = 1e18;
constexpr double kDivEpsilon = 1e-9;
constexpr double kProbeTolerance = 1e-9;
constexpr int kProbeCount = 32;
constexpr std::uint64_t kProbeSeed = 0x70726f6265ULL;

double clamp(double x) noexcept {
    if (std::isnan(x)) {
        return 0.0;
    }
    return std::clamp(x, -kClamp, kClamp);
}

double protected_div(double a, double b) noexcept {
    return std::abs(b) < kDivEpsilon ? 1.0 : a / b;
}

double var_value(Var v, const HeuristicContext& ctx) noexcept {
    switch (v) {
        case Var::ChildWins: return ctx.child_wins;
        case Var::ChildVisits: return ctx.child_visits;
        case Var::ParentVisits: return ctx.parent_visits;
        case Var::ChildAvailableMoves: return ctx.child_available_moves;
    }
    return 0.0;
}

double eval_at(std::span<const Node> nodes, std::size_t& pos, const HeuristicContext& ctx) noexcept {
    const Node& n = nodes[pos++];
    switch (n.op) {
        case Op::Const: return n.value;
        case Op::Var: return var_value(n.var, ctx);
        case Op::Sqrt: return clamp(std::sqrt(std::abs(eval_at(nodes, pos, ctx))));
        default: break;
    }
    const double a = eval_at(nodes, pos, ctx);
    const double b = eval_at(nodes, pos, ctx);
    switch (n.op) {
        case Op::Add: return clamp(a + b);
        case Op::Sub: return clamp(a - b);
        case Op::Mul: return clamp(a * b);
        case Op::Div: return clamp(protected_div(a, b));
        default: return 0.0;
    }
}

int depth_at(std::span<const Node> nodes, std::size_t& pos) {
    const Node& n = nodes[pos++];
    int deepest = 0;
    for (int k = 0; k < arity(n.op); ++k) {
        deepest = std::max(deepest, 1 + depth_at(nodes, pos));
    }
    return deepest;
}

void print_at(std::span<const Node> nodes, std::size_t& pos, std::string& out) {
    const Node& n = nodes[pos++];
    if (n.op == Op::Const) {
        out += fmt::format("{}", n.value);
        return;
    }
    if (n.op == Op::Var) {
        out += var_name(n.var);
        return;
    }
    out += op_name(n.op);
    out += '(';
    for (int k = 0; k < arity(n.op); ++k) {
        if (k > 0) {
            out += ", ";
        }
        print_at(nodes, pos, out);
    }
    out += ')';
}

// ---------------------------------------------------------------------------
// Parser for the prefix notation.

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    std::vector<Node> parse_all() {
        std::vector<Node> out;
        parse_node(out);
        skip_space();
        if (pos_ != text_.size()) {
            fail("trailing characters");
        }
        return out;
    }

private:
    [[noreturn]] void fail(std::string_view why) const {
        throw ConfigError(fmt::format("cannot parse expression at offset {}: {}", pos_, why));
    }

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
    }

    void expect(char c) {
        skip_space();
        if (pos_ >= text_.size() || text_[pos_] != c) {
            fail(fmt::format("expected '{}'", c));
        }
        ++pos_;
    }

    void parse_node(std::vector<Node>& out) {
        skip_space();
        if (pos_ >= text_.size()) {
            fail("unexpected end of input");
        }
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
            double value = 0;
            const char* begin = text_.data() + pos_;
            const char* end = text_.data() + text_.size();
            // from_chars rejects a leading '+'.
            if (c == '+') {
                ++begin;
            }
            const auto [ptr, ec] = std::from_chars(begin, end, value);
            if (ec != std::errc{}) {
                fail("bad number");
            }
            pos_ = static_cast<std::size_t>(ptr - text_.data());
            out.push_back(Node{Op::Const, Var::ChildWins, value});
            return;
        }
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
        }
        const std::string_view word = text_.substr(start, pos_ - start);
        for (const Var v : kAllVars) {
            if (word == var_name(v)) {
                out.push_back(Node{Op::Var, v, 0.0});
                return;
            }
        }
        for (const Op op : {Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Sqrt}) {
            if (word == op_name(op)) {
                out.push_back(Node{op, Var::ChildWins, 0.0});
                expect('(');
                for (int k = 0; k < arity(op); ++k) {
                    if (k > 0) {
                        expect(',');
                    }
                    parse_node(out);
                }
                expect(')');
                return;
            }
        }
        fail(fmt::format("unknown symbol '{}'", word));
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Simplification works on an n-ary tree: Add and Mul hold any number of
// operands, everything else keeps its arity.

struct Term {
    Op op = Op::Const;
    Var var = Var::ChildWins;
    double value = 0.0;
    std::vector<Term> args;
    std::string key;  // canonical text, filled in by finish()
};

Term make_const(double v) {
    Term t;
    t.op = Op::Const;
    t.value = clamp(v) == 0.0 ? 0.0 : clamp(v);  // no negative zero
    t.key = fmt::format("{}", t.value);
    return t;
}

void finish(Term& t) {
    switch (t.op) {
        case Op::Const: t.key = fmt::format("{}", t.value); return;
        case Op::Var: t.key = std::string(var_name(t.var)); return;
        default: break;
    }
    t.key = std::string(op_name(t.op));
    t.key += '(';
    for (std::size_t i = 0; i < t.args.size(); ++i) {
        if (i > 0) {
            t.key += ", ";
        }
        t.key += t.args[i].key;
    }
    t.key += ')';
}

// Constants sort first, then everything else by canonical text.
bool term_less(const Term& a, const Term& b) {
    const bool ca = a.op == Op::Const;
    const bool cb = b.op == Op::Const;
    if (ca != cb) {
        return ca;
    }
    if (ca) {
        return a.value < b.value;
    }
    return a.key < b.key;
}

Term build(std::span<const Node> nodes, std::size_t& pos) {
    const Node& n = nodes[pos++];
    Term t;
    t.op = n.op;
    t.var = n.var;
    t.value = n.value;
    for (int k = 0; k < arity(n.op); ++k) {
        t.args.push_back(build(nodes, pos));
    }
    return t;
}

Term canonical(Term t);

Term fold_nary(Op op, std::vector<Term> operands) {
    std::vector<Term> flat;
    for (auto& a : operands) {
        if (a.op == op) {
            for (auto& inner : a.args) {
                flat.push_back(std::move(inner));
            }
        } else {
            flat.push_back(std::move(a));
        }
    }
    const double identity = op == Op::Add ? 0.0 : 1.0;
    double folded = identity;
    bool saw_const = false;
    std::vector<Term> rest;
    for (auto& a : flat) {
        if (a.op == Op::Const) {
            folded = clamp(op == Op::Add ? folded + a.value : folded * a.value);
            saw_const = true;
        } else {
            rest.push_back(std::move(a));
        }
    }
    if (op == Op::Mul && saw_const && folded == 0.0) {
        return make_const(0.0);
    }
    if (rest.empty()) {
        return make_const(folded);
    }
    if (saw_const && folded != identity) {
        rest.push_back(make_const(folded));
    }
    if (rest.size() == 1) {
        return std::move(rest.front());
    }
    std::sort(rest.begin(), rest.end(), term_less);
    Term t;
    t.op = op;
    t.args = std::move(rest);
    finish(t);
    return t;
}

Term canonical(Term t) {
    for (auto& a : t.args) {
        a = canonical(std::move(a));
    }
    switch (t.op) {
        case Op::Const: return make_const(t.value);
        case Op::Var: finish(t); return t;
        case Op::Sub: {
            std::vector<Term> negated;
            negated.push_back(make_const(-1.0));
            negated.push_back(std::move(t.args[1]));
            std::vector<Term> sum;
            sum.push_back(std::move(t.args[0]));
            sum.push_back(fold_nary(Op::Mul, std::move(negated)));
            return fold_nary(Op::Add, std::move(sum));
        }
        case Op::Add:
        case Op::Mul: return fold_nary(t.op, std::move(t.args));
        case Op::Sqrt:
            if (t.args[0].op == Op::Const) {
                return make_const(std::sqrt(std::abs(t.args[0].value)));
            }
            finish(t);
            return t;
        case Op::Div: {
            const Term& num = t.args[0];
            const Term& den = t.args[1];
            if (den.op == Op::Const) {
                if (std::abs(den.value) < kDivEpsilon) {
                    return make_const(1.0);
                }
                if (num.op == Op::Const) {
                    return make_const(num.value / den.value);
                }
                if (den.value == 1.0) {
                    return std::move(t.args[0]);
                }
            }
            // x/x is 1 both when x is tiny (protected) and otherwise.
            if (num.key == den.key) {
                return make_const(1.0);
            }
            finish(t);
            return t;
        }
    }
    return t;
}

// Back to binary prefix form; n-ary operands are folded left to right.
void emit(const Term& t, std::vector<Node>& out) {
    if (t.op == Op::Const) {
        out.push_back(Node{Op::Const, Var::ChildWins, t.value});
        return;
    }
    if (t.op == Op::Var) {
        out.push_back(Node{Op::Var, t.var, 0.0});
        return;
    }
    if ((t.op == Op::Add || t.op == Op::Mul) && t.args.size() > 2) {
        for (std::size_t i = 0; i + 1 < t.args.size(); ++i) {
            out.push_back(Node{t.op, Var::ChildWins, 0.0});
        }
        emit(t.args[0], out);
        for (std::size_t i = 1; i < t.args.size(); ++i) {
            emit(t.args[i], out);
        }
        return;
    }
    out.push_back(Node{t.op, Var::ChildWins, 0.0});
    for (const auto& a : t.args) {
        emit(a, out);
    }
}

std::vector<HeuristicContext> make_probes() {
    Rng rng(kProbeSeed);
    std::vector<HeuristicContext> probes;
    for (int i = 0; i < kProbeCount; ++i) {
        HeuristicContext ctx;
        ctx.child_visits = rng.uniform_int(0, 500);
        ctx.child_wins = rng.uniform_int(0, static_cast<int>(ctx.child_visits));
        ctx.parent_visits = rng.uniform_int(static_cast<int>(ctx.child_visits), 500);
        ctx.child_available_moves = rng.uniform_int(0, 40);
        probes.push_back(ctx);
    }
    return probes;
}

Expr grow(int depth, int height, int min_depth, const std::vector<Op>& ops, Rng& rng) {
    const double terminal_ratio = 5.0 / (5.0 + static_cast<double>(ops.size()));
    if (depth == height || (depth >= min_depth && rng.uniform01() < terminal_ratio)) {
        const auto pick = rng.below(5);
        if (pick == 0) {
            return Expr::constant(rng.uniform(0.0, 10.0));
        }
        return Expr::variable(kAllVars[pick - 1]);
    }
    const Op op = ops[rng.below(ops.size())];
    if (arity(op) == 1) {
        return Expr::unary(op, grow(depth + 1, height, min_depth, ops, rng));
    }
    Expr lhs = grow(depth + 1, height, min_depth, ops, rng);
    Expr rhs = grow(depth + 1, height, min_depth, ops, rng);
    return Expr::binary(op, lhs, rhs);
}

}  // namespace

std::string_view op_name(Op op) noexcept {
    switch (op) {
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::Div: return "div";
        case Op::Sqrt: return "sqrt";
        case Op::Const: return "const";
        case Op::Var: return "var";
    }
    return "?";
}

std::string_view var_name(Var var) noexcept {
    switch (var) {
        case Var::ChildWins: return "child_wins";
        case Var::ChildVisits: return "child_visits";
        case Var::ParentVisits: return "parent_visits";
        case Var::ChildAvailableMoves: return "child_available_moves";
    }
    return "?";
}

Expr::Expr(std::vector<Node> nodes) : nodes_(std::move(nodes)) {
    // Every node needs arity(op) operands after it; a well-formed prefix
    // sequence ends exactly when the open-slot count first reaches zero.
    std::size_t open = 1;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (open == 0) {
            throw ConfigError("expression has nodes after its root subtree");
        }
        open = open - 1 + static_cast<std::size_t>(arity(nodes_[i].op));
    }
    if (open != 0) {
        throw ConfigError("expression is missing operands");
    }
}

Expr Expr::constant(double value) {
    Expr e;
    e.nodes_.push_back(Node{Op::Const, Var::ChildWins, value});
    return e;
}

Expr Expr::variable(Var var) {
    Expr e;
    e.nodes_.push_back(Node{Op::Var, var, 0.0});
    return e;
}

Expr Expr::unary(Op op, const Expr& child) {
    Expr e;
    e.nodes_.reserve(child.size() + 1);
    e.nodes_.push_back(Node{op, Var::ChildWins, 0.0});
    e.nodes_.insert(e.nodes_.end(), child.nodes_.begin(), child.nodes_.end());
    return e;
}

Expr Expr::binary(Op op, const Expr& lhs, const Expr& rhs) {
    Expr e;
    e.nodes_.reserve(lhs.size() + rhs.size() + 1);
    e.nodes_.push_back(Node{op, Var::ChildWins, 0.0});
    e.nodes_.insert(e.nodes_.end(), lhs.nodes_.begin(), lhs.nodes_.end());
    e.nodes_.insert(e.nodes_.end(), rhs.nodes_.begin(), rhs.nodes_.end());
    return e;
}

int Expr::depth() const {
    if (nodes_.empty()) {
        return 0;
    }
    std::size_t pos = 0;
    return depth_at(nodes_, pos);
}

std::size_t Expr::subtree_end(std::size_t index) const {
    std::size_t open = 1;
    std::size_t i = index;
    while (open > 0) {
        open = open - 1 + static_cast<std::size_t>(arity(nodes_.at(i).op));
        ++i;
    }
    return i;
}

Expr Expr::subtree(std::size_t index) const {
    Expr e;
    e.nodes_.assign(nodes_.begin() + static_cast<std::ptrdiff_t>(index),
                    nodes_.begin() + static_cast<std::ptrdiff_t>(subtree_end(index)));
    return e;
}

Expr Expr::with_subtree(std::size_t index, const Expr& replacement) const {
    const std::size_t end = subtree_end(index);
    Expr e;
    e.nodes_.reserve(nodes_.size() - (end - index) + replacement.size());
    e.nodes_.insert(e.nodes_.end(), nodes_.begin(), nodes_.begin() + static_cast<std::ptrdiff_t>(index));
    e.nodes_.insert(e.nodes_.end(), replacement.nodes_.begin(), replacement.nodes_.end());
    e.nodes_.insert(e.nodes_.end(), nodes_.begin() + static_cast<std::ptrdiff_t>(end), nodes_.end());
    return e;
}

std::string Expr::to_string() const {
    std::string out;
    if (!nodes_.empty()) {
        std::size_t pos = 0;
        print_at(nodes_, pos, out);
    }
    return out;
}

Expr Expr::parse(std::string_view text) { return Expr(Parser(text).parse_all()); }

std::vector<Op> FunctionSet::ops() const {
    std::vector<Op> ops{Op::Add, Op::Mul, Op::Div, Op::Sqrt};
    if (subtraction) {
        ops.insert(ops.begin() + 1, Op::Sub);
    }
    return ops;
}

double evaluate_expr(const Expr& e, const HeuristicContext& ctx) noexcept {
    if (e.empty()) {
        return 0.0;
    }
    std::size_t pos = 0;
    return clamp(eval_at(e.nodes(), pos, ctx));
}

SelectionHeuristic as_heuristic(const Expr& e) {
    return SelectionHeuristic(e.to_string(), [e](const HeuristicContext& ctx) { return evaluate_expr(e, ctx); });
}

Expr random_expr(int min_depth, int max_depth, const FunctionSet& functions, Rng& rng) {
    if (min_depth < 0 || max_depth < min_depth) {
        throw ConfigError(fmt::format("bad depth range [{}, {}]", min_depth, max_depth));
    }
    const int height = rng.uniform_int(min_depth, max_depth);
    return grow(0, height, min_depth, functions.ops(), rng);
}

Expr simplify(const Expr& e) {
    if (e.empty()) {
        return e;
    }
    std::size_t pos = 0;
    const Term t = canonical(build(e.nodes(), pos));
    std::vector<Node> out;
    emit(t, out);
    return Expr(std::move(out));
}

std::span<const HeuristicContext> probe_contexts() {
    static const std::vector<HeuristicContext> probes = make_probes();
    return probes;
}

Signature Signature::of(const Expr& e) {
    Signature s;
    const Expr simple = simplify(e);
    s.canonical = simple.to_string();
    for (const auto& ctx : probe_contexts()) {
        s.probes.push_back(evaluate_expr(e, ctx));
    }
    return s;
}

bool Signature::equivalent_to(const Signature& other) const noexcept {
    if (canonical == other.canonical) {
        return true;
    }
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const double a = probes[i];
        if (std::abs(a - other.probes[i]) > kProbeTolerance * std::max(1.0, std::abs(a))) {
            return false;
        }
    }
    return true;
}

bool equivalent(const Expr& a, const Expr& b) { return Signature::of(a).equivalent_to(Signature::of(b)); }

}  // namespace m3::gp
