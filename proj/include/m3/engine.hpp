#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "m3/errors.hpp"
#include "m3/rng.hpp"

namespace m3 {

using Color = std::uint8_t;
inline constexpr Color kEmpty = 0xFF;

struct BoardConfig {
    int width = 7;
    int height = 7;
    int num_colors = 6;
    int moves_per_game = 20;
    // When set, a swap that makes no match still uses up one of the moves.
    bool invalid_swap_consumes_move = false;

    /// Throws ConfigError when the configuration is unusable.
    void validate() const;

    friend bool operator==(const BoardConfig&, const BoardConfig&) = default;
};

struct Cell {
    int row = 0;
    int col = 0;

    friend auto operator<=>(const Cell&, const Cell&) = default;
};

/// An unordered swap of two orthogonally adjacent cells, stored with
/// `a < b` in row-major order.
struct Move {
    Cell a;
    Cell b;

    /// Builds the canonical form. Does not check adjacency.
    static Move between(Cell x, Cell y) noexcept { return x < y ? Move{x, y} : Move{y, x}; }

    friend auto operator<=>(const Move&, const Move&) = default;
};

class Board {
public:
    Board() = default;
    Board(int width, int height, Color fill = kEmpty);
    Board(int width, int height, std::vector<Color> cells);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool in_bounds(Cell c) const noexcept {
        return c.row >= 0 && c.row < height_ && c.col >= 0 && c.col < width_;
    }

    Color at(int row, int col) const noexcept { return cells_[index(row, col)]; }
    Color at(Cell c) const noexcept { return at(c.row, c.col); }
    void set(int row, int col, Color color) noexcept { cells_[index(row, col)] = color; }
    void set(Cell c, Color color) noexcept { set(c.row, c.col, color); }
    void swap_cells(Cell x, Cell y) noexcept;

    std::span<const Color> cells() const noexcept { return cells_; }
    std::span<Color> cells() noexcept { return cells_; }

    friend bool operator==(const Board&, const Board&) = default;

private:
    std::size_t index(int row, int col) const noexcept {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(col);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<Color> cells_;
};

struct MatchGroup {
    Color color = 0;
    std::vector<Cell> cells;  // row-major order

    int size() const noexcept { return static_cast<int>(cells.size()); }
};

struct CascadeStep {
    std::vector<MatchGroup> matches;
    int multiplier = 1;
    std::int64_t points = 0;
};

struct CascadeResult {
    std::vector<CascadeStep> steps;
    std::int64_t total_points = 0;
    int final_multiplier_reached = 0;
};

struct Spawn {
    Cell cell;
    Color color = 0;

    friend bool operator==(const Spawn&, const Spawn&) = default;
};

/// A dead board was permuted in place; `grid` is the resulting layout.
struct Reshuffle {
    std::vector<Color> grid;

    friend bool operator==(const Reshuffle&, const Reshuffle&) = default;
};

using SpawnEvent = std::variant<Spawn, Reshuffle>;

/// Where new tiles come from. Three variants:
///  - seeded: every spawn is an independent uniform draw from a seeded stream;
///  - scripted: per-column queues (front entry enters first), falling back to
///    a seeded stream once a column's queue is exhausted;
///  - playback: replays a recorded spawn log verbatim.
/// Copying a source copies its position, so copies spawn identical tiles
/// when consumed in the same order.
class RefillSource {
public:
    static RefillSource seeded(std::uint64_t seed);
    static RefillSource scripted(std::vector<std::vector<Color>> column_queues,
                                 std::uint64_t fallback_seed);
    static RefillSource playback(std::vector<SpawnEvent> log);

    bool is_scripted() const noexcept { return queues_ != nullptr; }
    bool is_playback() const noexcept { return log_ != nullptr; }

    /// Next tile for `cell`. Playback sources verify the logged coordinate.
    Color next(Cell cell, int num_colors);

    /// Playback only: the next event must be a reshuffle; returns its grid.
    const std::vector<Color>& next_reshuffle();

    Rng& rng() noexcept { return rng_; }

private:
    RefillSource() = default;

    Rng rng_;
    std::shared_ptr<const std::vector<std::vector<Color>>> queues_;
    std::vector<std::uint16_t> cursors_;
    std::shared_ptr<const std::vector<SpawnEvent>> log_;
    std::size_t log_pos_ = 0;
};

struct GameState {
    BoardConfig config;
    Board board;
    RefillSource refill = RefillSource::seeded(0);
    std::int64_t score = 0;
    int moves_made = 0;
    // Sum of the post-resolution legal-move counts after every move made.
    std::int64_t available_sum = 0;
    std::vector<SpawnEvent> spawn_log;
    // Simulation copies switch this off; nothing reads their logs.
    bool record_spawns = true;

    bool finished() const noexcept { return moves_made >= config.moves_per_game; }
    int moves_remaining() const noexcept { return config.moves_per_game - moves_made; }
};

struct MoveOutcome {
    bool valid = false;
    std::optional<CascadeResult> cascade;
    std::int64_t points_gained = 0;
    // Legal moves left after cascade resolution, before any reshuffle.
    int resulting_moves_available = 0;
    bool reshuffled = false;
};

/// Starts a game from a seeded or scripted source. Seeded sources generate
/// a match-free board with at least one legal move. Scripted sources
/// require `initial`, which is used verbatim.
GameState new_game(const BoardConfig& config, RefillSource refill,
                   std::optional<Board> initial = std::nullopt);

std::vector<MatchGroup> find_matches(const Board& board);
bool has_match(const Board& board);

std::vector<Move> legal_moves(const Board& board);
int available_move_count(const Board& board);

/// Points for one match group: per-cell value (20, +10 per cell beyond
/// three) times the group size times the cascade multiplier.
std::int64_t score_match(int group_size, int multiplier);

/// Clears, drops and refills until the board is stable. Spawns are
/// appended to `spawn_log` when it is non-null.
CascadeResult resolve_cascades(Board& board, RefillSource& refill, int num_colors,
                               std::vector<SpawnEvent>* spawn_log);

/// Plays one swap. Invalid swaps are undone and score nothing. A valid
/// move that leaves a dead board triggers `reshuffle_if_dead`.
MoveOutcome apply_move(GameState& state, const Move& move);

/// Permutes the tiles of a dead board until it is match-free and has a
/// legal move. Returns whether a reshuffle happened.
bool reshuffle_if_dead(GameState& state);

/// Re-runs a recorded game from its initial board and spawn log.
GameState replay(const BoardConfig& config, const Board& initial, std::span<const Move> moves,
                 std::vector<SpawnEvent> spawn_log);

bool adjacent(Cell x, Cell y) noexcept;

}  // namespace m3
