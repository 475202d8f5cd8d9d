#pragma once

#include <string>
#include <string_view>

#include "m3/engine.hpp"
#include "m3/trace.hpp"

namespace m3 {

enum class PersonaKind { MaxS, MinS, MaxM, MinM };
enum class Direction { Maximize, Minimize };

/// What a game is judged on.
///  FinalScore: the score after the last move.
///  MeanAvailableMoves: mean of the legal-move counts sampled after each
///  move's cascade has settled (before any dead-board reshuffle).
enum class MetricKind { FinalScore, MeanAvailableMoves };

struct Persona {
    PersonaKind kind = PersonaKind::MaxS;

    MetricKind metric() const noexcept {
        return kind == PersonaKind::MaxS || kind == PersonaKind::MinS ? MetricKind::FinalScore
                                                                      : MetricKind::MeanAvailableMoves;
    }
    Direction direction() const noexcept {
        return kind == PersonaKind::MaxS || kind == PersonaKind::MaxM ? Direction::Maximize
                                                                      : Direction::Minimize;
    }

    /// `maxs|mins|maxm|minm`
    std::string_view token() const noexcept;
    static Persona parse(std::string_view token);

    friend bool operator==(const Persona&, const Persona&) = default;
};

/// The bar a rollout has to clear to count as a win.
struct Goal {
    double threshold = 0.0;
    Direction direction = Direction::Maximize;
};

std::string_view metric_token(MetricKind metric) noexcept;  // score|moves
MetricKind parse_metric(std::string_view token);

double metric_of_state(const GameState& state, MetricKind metric) noexcept;
double metric_of_trace(const PlayTrace& trace, MetricKind metric);

/// Fitness is always maximized; minimizing personas store the negated metric.
constexpr double fitness_of(double metric_value, Direction direction) noexcept {
    return direction == Direction::Maximize ? metric_value : -metric_value;
}

/// Strictly better than the threshold, in the goal's direction.
constexpr bool is_win(double outcome, const Goal& goal) noexcept {
    return goal.direction == Direction::Maximize ? outcome > goal.threshold : outcome < goal.threshold;
}

}  // namespace m3
