#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "m3/engine.hpp"
#include "m3/personas.hpp"
#include "m3/rng.hpp"

namespace m3 {

/// The four statistics a selection heuristic may look at when scoring a
/// child during tree descent.
struct HeuristicContext {
    double child_wins = 0;
    double child_visits = 0;
    double parent_visits = 0;
    double child_available_moves = 0;
};

/// Scores a child node; the highest score is descended into.
class SelectionHeuristic {
public:
    using Fn = std::function<double(const HeuristicContext&)>;

    SelectionHeuristic(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}

    double operator()(const HeuristicContext& ctx) const { return fn_(ctx); }
    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
    Fn fn_;
};

/// Returned for children that were never visited so they are tried first.
inline constexpr double kUnvisitedScore = std::numeric_limits<double>::max();

inline const double kDefaultExploration = 1.0 / std::sqrt(2.0);

/// Mean win rate plus the exploration bonus c * sqrt(2 ln N_parent / N_child).
double ucb1(const HeuristicContext& ctx, double c);
SelectionHeuristic ucb1_heuristic(double c = kDefaultExploration);

struct SearchConfig {
    int root_visits = 250;
    // Rollout length for the first real move; shrinks by one per move made.
    int rollout_base = 20;
    double exploration_c = kDefaultExploration;
    Goal goal;

    int rollout_length(int moves_made) const noexcept {
        return std::max(1, rollout_base - moves_made);
    }
    void validate() const;
};

struct NodeStats {
    int visits = 0;
    int wins = 0;
    double reward_sum = 0;
    int available_moves = 0;
};

struct SearchNode {
    GameState state;
    std::optional<Move> incoming_move;
    NodeStats stats;
    int parent = -1;
    std::vector<int> children;
    std::vector<Move> untried_moves;

    bool terminal() const noexcept { return state.finished() || (children.empty() && untried_moves.empty()); }
    bool fully_expanded() const noexcept { return untried_moves.empty(); }
};

/// Node arena for one search. Node 0 is the root; nodes refer to each
/// other by index.
class SearchTree {
public:
    explicit SearchTree(GameState root);

    const SearchNode& node(int index) const { return nodes_.at(static_cast<std::size_t>(index)); }
    const SearchNode& root() const { return nodes_.front(); }
    std::size_t size() const noexcept { return nodes_.size(); }

    HeuristicContext context_of(int child) const;

    /// Descends from the root through fully expanded nodes, taking the
    /// child the heuristic scores highest. Ties go to the child whose move
    /// comes first in scan order.
    std::vector<int> select(const SelectionHeuristic& h) const;

    /// Best child of `parent` under `h`, or -1 when it has none.
    int best_child(int parent, const SelectionHeuristic& h) const;

    /// Applies one uniformly random untried move of `parent` and returns
    /// the new child. Throws ContractViolation when nothing is left to try.
    int expand(int parent, Rng& rng);

    void backpropagate(const std::vector<int>& path, double outcome, const Goal& goal);

private:
    std::vector<SearchNode> nodes_;
};

/// Plays up to `length` uniformly random moves on a copy of `state` (never
/// past the end of the game) and returns the metric of where it ends up.
double rollout(const GameState& state, int length, MetricKind metric, Rng& rng);

struct SearchReport {
    int rollout_length = 0;
    int iterations = 0;
    std::size_t tree_size = 0;
};

/// Runs `cfg.root_visits` iterations of selection, expansion, rollout and
/// backpropagation on a fresh tree and returns the root child's move that
/// `h` scores highest.
Move run_search(const GameState& state, const SelectionHeuristic& h, const SearchConfig& cfg,
                MetricKind metric, Rng& rng, SearchReport* report = nullptr);

Move random_agent_move(const GameState& state, Rng& rng);

/// Picks a move for the current state.
using Agent = std::function<Move(const GameState&, Rng&)>;

Agent mcts_agent(SelectionHeuristic h, SearchConfig cfg, MetricKind metric);
Agent random_agent();

/// Plays `agent` until the game's move budget is spent.
GameState play_game(GameState state, const Agent& agent, Rng& rng);

}  // namespace m3
