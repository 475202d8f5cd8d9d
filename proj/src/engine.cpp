#include "m3/engine.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include <fmt/format.h>

namespace m3 {

namespace {

constexpr int kMaxCascadeSteps = 1000;
constexpr int kMaxReshuffleAttempts = 1000;
constexpr int kMaxBoardGenerations = 1000;

// True when the tile at (row, col) sits in a horizontal or vertical run of
// three or more. `cells` is a row-major grid of the given width/height.
bool in_run(const Color* cells, int width, int height, int row, int col) noexcept {
    const Color color = cells[row * width + col];
    if (color == kEmpty) {
        return false;
    }
    int horizontal = 1;
    for (int c = col - 1; c >= 0 && cells[row * width + c] == color; --c) {
        ++horizontal;
    }
    for (int c = col + 1; c < width && cells[row * width + c] == color; ++c) {
        ++horizontal;
    }
    if (horizontal >= 3) {
        return true;
    }
    int vertical = 1;
    for (int r = row - 1; r >= 0 && cells[r * width + col] == color; --r) {
        ++vertical;
    }
    for (int r = row + 1; r < height && cells[r * width + col] == color; ++r) {
        ++vertical;
    }
    return vertical >= 3;
}

// Visits every adjacent swap in scan order (right neighbour, then the one
// below) and reports whether it creates a match. Stops early when `fn`
// returns false.
template <typename Fn>
void for_each_swap(const Board& board, Fn&& fn) {
    const int w = board.width();
    const int h = board.height();
    std::vector<Color> scratch(board.cells().begin(), board.cells().end());
    Color* g = scratch.data();
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const int i = r * w + c;
            if (c + 1 < w && g[i] != g[i + 1]) {
                std::swap(g[i], g[i + 1]);
                const bool hit = in_run(g, w, h, r, c) || in_run(g, w, h, r, c + 1);
                std::swap(g[i], g[i + 1]);
                if (hit && !fn(Move{{r, c}, {r, c + 1}})) {
                    return;
                }
            }
            if (r + 1 < h && g[i] != g[i + w]) {
                std::swap(g[i], g[i + w]);
                const bool hit = in_run(g, w, h, r, c) || in_run(g, w, h, r + 1, c);
                std::swap(g[i], g[i + w]);
                if (hit && !fn(Move{{r, c}, {r + 1, c}})) {
                    return;
                }
            }
        }
    }
}

// Would placing `color` at (row, col) complete a run with the already
// placed tiles to its left or above?
bool completes_run_while_filling(const Board& b, int row, int col, Color color) noexcept {
    if (col >= 2 && b.at(row, col - 1) == color && b.at(row, col - 2) == color) {
        return true;
    }
    return row >= 2 && b.at(row - 1, col) == color && b.at(row - 2, col) == color;
}

Board generate_board(const BoardConfig& config, Rng& rng) {
    Board board(config.width, config.height);
    for (int r = 0; r < config.height; ++r) {
        for (int c = 0; c < config.width; ++c) {
            Color color;
            do {
                color = static_cast<Color>(rng.below(static_cast<std::uint64_t>(config.num_colors)));
            } while (completes_run_while_filling(board, r, c, color));
            board.set(r, c, color);
        }
    }
    return board;
}

void apply_gravity(Board& board) noexcept {
    const int h = board.height();
    for (int c = 0; c < board.width(); ++c) {
        int write = h - 1;
        for (int r = h - 1; r >= 0; --r) {
            const Color color = board.at(r, c);
            if (color != kEmpty) {
                if (write != r) {
                    board.set(write, c, color);
                    board.set(r, c, kEmpty);
                }
                --write;
            }
        }
    }
}

// Empty cells sit at the top of each column after gravity. The lowest one
// receives the first tile drawn for that column.
void refill_board(Board& board, RefillSource& refill, int num_colors,
                  std::vector<SpawnEvent>* spawn_log) {
    for (int c = 0; c < board.width(); ++c) {
        int r = board.height() - 1;
        while (r >= 0 && board.at(r, c) != kEmpty) {
            --r;
        }
        for (; r >= 0; --r) {
            const Cell cell{r, c};
            const Color color = refill.next(cell, num_colors);
            board.set(cell, color);
            if (spawn_log != nullptr) {
                spawn_log->emplace_back(Spawn{cell, color});
            }
        }
    }
}

void check_in_bounds(const Board& board, Cell c) {
    if (!board.in_bounds(c)) {
        throw InputError(fmt::format("cell ({}, {}) is outside the {}x{} board", c.row, c.col,
                                     board.height(), board.width()));
    }
}

}  // namespace

void BoardConfig::validate() const {
    if (width < 1 || height < 1 || (width < 3 && height < 3)) {
        throw ConfigError(fmt::format("board {}x{} cannot hold a run of three", height, width));
    }
    if (width > 64 || height > 64) {
        throw ConfigError("board dimensions above 64 are not supported");
    }
    if (num_colors < 3 || num_colors > 250) {
        throw ConfigError(fmt::format("num_colors must be in [3, 250], got {}", num_colors));
    }
    if (moves_per_game < 1) {
        throw ConfigError("moves_per_game must be at least 1");
    }
}

Board::Board(int width, int height, Color fill)
    : width_(width), height_(height),
      cells_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {}

Board::Board(int width, int height, std::vector<Color> cells)
    : width_(width), height_(height), cells_(std::move(cells)) {
    if (cells_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw ConfigError(fmt::format("grid has {} cells, expected {}x{}", cells_.size(), height,
                                      width));
    }
}

void Board::swap_cells(Cell x, Cell y) noexcept {
    std::swap(cells_[index(x.row, x.col)], cells_[index(y.row, y.col)]);
}

bool adjacent(Cell x, Cell y) noexcept {
    return std::abs(x.row - y.row) + std::abs(x.col - y.col) == 1;
}

// ---------------------------------------------------------------------------
// RefillSource

RefillSource RefillSource::seeded(std::uint64_t seed) {
    RefillSource source;
    source.rng_.reseed(seed);
    return source;
}

RefillSource RefillSource::scripted(std::vector<std::vector<Color>> column_queues,
                                    std::uint64_t fallback_seed) {
    RefillSource source;
    source.rng_.reseed(fallback_seed);
    source.cursors_.assign(column_queues.size(), 0);
    source.queues_ = std::make_shared<const std::vector<std::vector<Color>>>(std::move(column_queues));
    return source;
}

RefillSource RefillSource::playback(std::vector<SpawnEvent> log) {
    RefillSource source;
    source.log_ = std::make_shared<const std::vector<SpawnEvent>>(std::move(log));
    return source;
}

Color RefillSource::next(Cell cell, int num_colors) {
    if (log_) {
        if (log_pos_ >= log_->size()) {
            throw EngineFault("spawn log exhausted during playback");
        }
        const auto* spawn = std::get_if<Spawn>(&(*log_)[log_pos_]);
        if (spawn == nullptr || spawn->cell != cell) {
            throw EngineFault(fmt::format("spawn log entry {} does not match a spawn at ({}, {})",
                                          log_pos_, cell.row, cell.col));
        }
        ++log_pos_;
        return spawn->color;
    }
    if (queues_) {
        const auto col = static_cast<std::size_t>(cell.col);
        if (col < queues_->size() && cursors_[col] < (*queues_)[col].size()) {
            return (*queues_)[col][cursors_[col]++];
        }
    }
    return static_cast<Color>(rng_.below(static_cast<std::uint64_t>(num_colors)));
}

const std::vector<Color>& RefillSource::next_reshuffle() {
    if (!log_ || log_pos_ >= log_->size()) {
        throw EngineFault("no reshuffle event available in spawn log");
    }
    const auto* event = std::get_if<Reshuffle>(&(*log_)[log_pos_]);
    if (event == nullptr) {
        throw EngineFault(fmt::format("spawn log entry {} is not a reshuffle", log_pos_));
    }
    ++log_pos_;
    return event->grid;
}

// ---------------------------------------------------------------------------
// Rules

GameState new_game(const BoardConfig& config, RefillSource refill, std::optional<Board> initial) {
    config.validate();
    GameState state;
    state.config = config;
    if (initial) {
        if (initial->width() != config.width || initial->height() != config.height) {
            throw ConfigError(fmt::format("initial grid is {}x{}, config expects {}x{}",
                                          initial->height(), initial->width(), config.height,
                                          config.width));
        }
        for (const Color c : initial->cells()) {
            if (c >= config.num_colors) {
                throw ConfigError(fmt::format("initial grid color {} outside [0, {})", int{c},
                                              config.num_colors));
            }
        }
        if (has_match(*initial)) {
            throw ConfigError("initial grid already contains a match");
        }
        if (available_move_count(*initial) == 0) {
            throw ConfigError("initial grid has no legal move");
        }
        state.board = std::move(*initial);
    } else {
        if (refill.is_scripted() || refill.is_playback()) {
            throw ConfigError("scripted games need an initial grid");
        }
        int attempt = 0;
        do {
            if (++attempt > kMaxBoardGenerations) {
                throw EngineFault("could not generate a live initial board");
            }
            state.board = generate_board(config, refill.rng());
        } while (available_move_count(state.board) == 0);
    }
    state.refill = std::move(refill);
    return state;
}

std::vector<MatchGroup> find_matches(const Board& board) {
    const int w = board.width();
    const int h = board.height();
    const auto n = static_cast<std::size_t>(w * h);

    // Union-find over cells; a run links all of its cells together.
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::vector<bool> matched(n, false);
    auto find = [&](int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    auto unite = [&](int x, int y) {
        x = find(x);
        y = find(y);
        if (x != y) {
            parent[std::max(x, y)] = std::min(x, y);
        }
    };
    auto mark_run = [&](int first, int step, int length) {
        for (int k = 0; k < length; ++k) {
            const int i = first + k * step;
            matched[i] = true;
            if (k > 0) {
                unite(first, i);
            }
        }
    };

    for (int r = 0; r < h; ++r) {
        int c = 0;
        while (c < w) {
            const Color color = board.at(r, c);
            int end = c + 1;
            while (end < w && board.at(r, end) == color) {
                ++end;
            }
            if (color != kEmpty && end - c >= 3) {
                mark_run(r * w + c, 1, end - c);
            }
            c = end;
        }
    }
    for (int c = 0; c < w; ++c) {
        int r = 0;
        while (r < h) {
            const Color color = board.at(r, c);
            int end = r + 1;
            while (end < h && board.at(end, c) == color) {
                ++end;
            }
            if (color != kEmpty && end - r >= 3) {
                mark_run(r * w + c, w, end - r);
            }
            r = end;
        }
    }

    // Roots are the smallest index in their set, so iterating in scan order
    // creates groups in scan order of their first cell.
    std::vector<int> group_of(n, -1);
    std::vector<MatchGroup> groups;
    for (int i = 0; i < static_cast<int>(n); ++i) {
        if (!matched[i]) {
            continue;
        }
        const int root = find(i);
        if (group_of[root] < 0) {
            group_of[root] = static_cast<int>(groups.size());
            groups.push_back(MatchGroup{board.cells()[i], {}});
        }
        groups[group_of[root]].cells.push_back(Cell{i / w, i % w});
    }
    return groups;
}

bool has_match(const Board& board) {
    const auto cells = board.cells();
    for (int r = 0; r < board.height(); ++r) {
        for (int c = 0; c < board.width(); ++c) {
            if (in_run(cells.data(), board.width(), board.height(), r, c)) {
                return true;
            }
        }
    }
    return false;
}

std::vector<Move> legal_moves(const Board& board) {
    std::vector<Move> moves;
    for_each_swap(board, [&](const Move& m) {
        moves.push_back(m);
        return true;
    });
    return moves;
}

int available_move_count(const Board& board) {
    int count = 0;
    for_each_swap(board, [&](const Move&) {
        ++count;
        return true;
    });
    return count;
}

std::int64_t score_match(int group_size, int multiplier) {
    if (group_size < 3) {
        throw DomainError(fmt::format("a match needs at least 3 cells, got {}", group_size));
    }
    if (multiplier < 1) {
        throw DomainError(fmt::format("multiplier must be at least 1, got {}", multiplier));
    }
    const std::int64_t per_cell = 20 + 10 * static_cast<std::int64_t>(group_size - 3);
    return per_cell * group_size * multiplier;
}

CascadeResult resolve_cascades(Board& board, RefillSource& refill, int num_colors,
                               std::vector<SpawnEvent>* spawn_log) {
    CascadeResult result;
    for (int multiplier = 1;; ++multiplier) {
        auto groups = find_matches(board);
        if (groups.empty()) {
            break;
        }
        if (multiplier > kMaxCascadeSteps) {
            throw EngineFault("cascade did not settle within 1000 steps");
        }
        CascadeStep step;
        step.multiplier = multiplier;
        for (const auto& group : groups) {
            step.points += score_match(group.size(), multiplier);
            for (const Cell cell : group.cells) {
                board.set(cell, kEmpty);
            }
        }
        step.matches = std::move(groups);
        apply_gravity(board);
        refill_board(board, refill, num_colors, spawn_log);
        result.total_points += step.points;
        result.final_multiplier_reached = multiplier;
        result.steps.push_back(std::move(step));
    }
    return result;
}

MoveOutcome apply_move(GameState& state, const Move& move) {
    check_in_bounds(state.board, move.a);
    check_in_bounds(state.board, move.b);
    if (!adjacent(move.a, move.b)) {
        throw InputError(fmt::format("cells ({}, {}) and ({}, {}) are not orthogonally adjacent",
                                     move.a.row, move.a.col, move.b.row, move.b.col));
    }
    if (state.finished()) {
        throw StateError(fmt::format("all {} moves have been played", state.config.moves_per_game));
    }

    MoveOutcome outcome;
    Board& board = state.board;
    board.swap_cells(move.a, move.b);
    const auto cells = board.cells();
    const bool matched =
        board.at(move.a) != board.at(move.b) &&
        (in_run(cells.data(), board.width(), board.height(), move.a.row, move.a.col) ||
         in_run(cells.data(), board.width(), board.height(), move.b.row, move.b.col));
    if (!matched) {
        board.swap_cells(move.a, move.b);
        if (state.config.invalid_swap_consumes_move) {
            const int available = available_move_count(board);
            ++state.moves_made;
            state.available_sum += available;
            outcome.resulting_moves_available = available;
        } else {
            outcome.resulting_moves_available = available_move_count(board);
        }
        return outcome;
    }

    outcome.valid = true;
    outcome.cascade = resolve_cascades(board, state.refill, state.config.num_colors,
                                       state.record_spawns ? &state.spawn_log : nullptr);
    outcome.points_gained = outcome.cascade->total_points;
    state.score += outcome.points_gained;
    ++state.moves_made;
    outcome.resulting_moves_available = available_move_count(board);
    state.available_sum += outcome.resulting_moves_available;
    if (outcome.resulting_moves_available == 0) {
        outcome.reshuffled = reshuffle_if_dead(state);
    }
    return outcome;
}

bool reshuffle_if_dead(GameState& state) {
    if (available_move_count(state.board) > 0) {
        return false;
    }
    if (state.refill.is_playback()) {
        const auto& grid = state.refill.next_reshuffle();
        state.board = Board(state.board.width(), state.board.height(), grid);
        if (state.record_spawns) {
            state.spawn_log.emplace_back(Reshuffle{grid});
        }
        return true;
    }
    Board candidate = state.board;
    for (int attempt = 0; attempt < kMaxReshuffleAttempts; ++attempt) {
        state.refill.rng().shuffle(candidate.cells());
        if (!has_match(candidate) && available_move_count(candidate) > 0) {
            state.board = std::move(candidate);
            if (state.record_spawns) {
                const auto cells = state.board.cells();
                state.spawn_log.emplace_back(Reshuffle{{cells.begin(), cells.end()}});
            }
            return true;
        }
    }
    throw EngineFault("no live permutation found in 1000 reshuffle attempts");
}

GameState replay(const BoardConfig& config, const Board& initial, std::span<const Move> moves,
                 std::vector<SpawnEvent> spawn_log) {
    GameState state = new_game(config, RefillSource::playback(std::move(spawn_log)), initial);
    for (const Move& move : moves) {
        apply_move(state, move);
    }
    return state;
}

}  // namespace m3
