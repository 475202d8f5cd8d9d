#include "m3/search.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace m3 {

double ucb1(const HeuristicContext& ctx, double c) {
    if (ctx.child_visits <= 0) {
        return kUnvisitedScore;
    }
    const double mean = ctx.child_wins / ctx.child_visits;
    const double log_parent = ctx.parent_visits > 1 ? std::log(ctx.parent_visits) : 0.0;
    return mean + c * std::sqrt(2.0 * log_parent / ctx.child_visits);
}

SelectionHeuristic ucb1_heuristic(double c) {
    return SelectionHeuristic("ucb1", [c](const HeuristicContext& ctx) { return ucb1(ctx, c); });
}

void SearchConfig::validate() const {
    if (root_visits < 1) {
        throw ConfigError("root_visits must be at least 1");
    }
    if (rollout_base < 1) {
        throw ConfigError("rollout_base must be at least 1");
    }
}

// ---------------------------------------------------------------------------

SearchTree::SearchTree(GameState root) {
    root.record_spawns = false;
    root.spawn_log.clear();
    SearchNode node;
    node.stats.available_moves = available_move_count(root.board);
    if (!root.finished()) {
        node.untried_moves = legal_moves(root.board);
    }
    node.state = std::move(root);
    nodes_.push_back(std::move(node));
}

HeuristicContext SearchTree::context_of(int child) const {
    const SearchNode& c = node(child);
    const SearchNode& p = node(c.parent);
    return HeuristicContext{static_cast<double>(c.stats.wins), static_cast<double>(c.stats.visits),
                            static_cast<double>(p.stats.visits),
                            static_cast<double>(c.stats.available_moves)};
}

int SearchTree::best_child(int parent, const SelectionHeuristic& h) const {
    int best = -1;
    double best_score = 0;
    for (const int child : node(parent).children) {
        const double score = h(context_of(child));
        if (best < 0 || score > best_score ||
            (score == best_score && *node(child).incoming_move < *node(best).incoming_move)) {
            best = child;
            best_score = score;
        }
    }
    return best;
}

std::vector<int> SearchTree::select(const SelectionHeuristic& h) const {
    std::vector<int> path{0};
    int current = 0;
    while (true) {
        const SearchNode& n = node(current);
        if (n.terminal() || !n.fully_expanded()) {
            break;
        }
        current = best_child(current, h);
        path.push_back(current);
    }
    return path;
}

int SearchTree::expand(int parent, Rng& rng) {
    if (nodes_.at(static_cast<std::size_t>(parent)).untried_moves.empty()) {
        throw ContractViolation("expand called on a node without untried moves");
    }
    SearchNode child;
    {
        auto& untried = nodes_[static_cast<std::size_t>(parent)].untried_moves;
        const auto pick = static_cast<std::size_t>(rng.below(untried.size()));
        child.incoming_move = untried[pick];
        untried[pick] = untried.back();
        untried.pop_back();
    }
    child.state = nodes_[static_cast<std::size_t>(parent)].state;
    child.parent = parent;
    const MoveOutcome outcome = apply_move(child.state, *child.incoming_move);
    if (!outcome.valid) {
        throw EngineFault("tree expansion applied an illegal move");
    }
    child.stats.available_moves = outcome.resulting_moves_available;
    if (!child.state.finished()) {
        child.untried_moves = legal_moves(child.state.board);
    }
    const int index = static_cast<int>(nodes_.size());
    nodes_.push_back(std::move(child));
    nodes_[static_cast<std::size_t>(parent)].children.push_back(index);
    return index;
}

void SearchTree::backpropagate(const std::vector<int>& path, double outcome, const Goal& goal) {
    const bool won = is_win(outcome, goal);
    for (const int index : path) {
        NodeStats& s = nodes_.at(static_cast<std::size_t>(index)).stats;
        ++s.visits;
        s.reward_sum += outcome;
        s.wins += won ? 1 : 0;
    }
}

// ---------------------------------------------------------------------------

double rollout(const GameState& state, int length, MetricKind metric, Rng& rng) {
    GameState sim = state;
    sim.record_spawns = false;
    for (int step = 0; step < length && !sim.finished(); ++step) {
        const auto moves = legal_moves(sim.board);
        if (moves.empty()) {
            // Only reachable from a hand-built state; live play reshuffles.
            reshuffle_if_dead(sim);
            --step;
            continue;
        }
        apply_move(sim, moves[static_cast<std::size_t>(rng.below(moves.size()))]);
    }
    return metric_of_state(sim, metric);
}

Move run_search(const GameState& state, const SelectionHeuristic& h, const SearchConfig& cfg,
                MetricKind metric, Rng& rng, SearchReport* report) {
    cfg.validate();
    if (state.finished()) {
        throw ContractViolation("run_search called on a finished game");
    }
    SearchTree tree(state);
    if (tree.root().untried_moves.empty()) {
        throw ContractViolation("run_search called on a dead board; reshuffle first");
    }
    const int length = cfg.rollout_length(state.moves_made);
    if (report != nullptr) {
        *report = SearchReport{length, 0, 1};
    }
    if (tree.root().untried_moves.size() == 1) {
        return tree.root().untried_moves.front();
    }

    for (int iteration = 0; iteration < cfg.root_visits; ++iteration) {
        std::vector<int> path = tree.select(h);
        const SearchNode& leaf = tree.node(path.back());
        if (!leaf.terminal() && !leaf.fully_expanded()) {
            path.push_back(tree.expand(path.back(), rng));
        }
        const double outcome = rollout(tree.node(path.back()).state, length, metric, rng);
        tree.backpropagate(path, outcome, cfg.goal);
    }
    if (report != nullptr) {
        report->iterations = cfg.root_visits;
        report->tree_size = tree.size();
    }
    return *tree.node(tree.best_child(0, h)).incoming_move;
}

Move random_agent_move(const GameState& state, Rng& rng) {
    const auto moves = legal_moves(state.board);
    if (moves.empty()) {
        throw ContractViolation("random agent called on a dead board");
    }
    return moves[static_cast<std::size_t>(rng.below(moves.size()))];
}

Agent mcts_agent(SelectionHeuristic h, SearchConfig cfg, MetricKind metric) {
    return [h = std::move(h), cfg, metric](const GameState& state, Rng& rng) {
        return run_search(state, h, cfg, metric, rng);
    };
}

Agent random_agent() {
    return [](const GameState& state, Rng& rng) { return random_agent_move(state, rng); };
}

GameState play_game(GameState state, const Agent& agent, Rng& rng) {
    while (!state.finished()) {
        const Move move = agent(state, rng);
        if (!apply_move(state, move).valid) {
            throw EngineFault("agent chose an illegal move");
        }
    }
    return state;
}

}  // namespace m3
