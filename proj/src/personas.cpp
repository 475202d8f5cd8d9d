#include "m3/personas.hpp"

#include <numeric>

#include <fmt/format.h>

namespace m3 {

std::string_view Persona::token() const noexcept {
    switch (kind) {
        case PersonaKind::MaxS: return "maxs";
        case PersonaKind::MinS: return "mins";
        case PersonaKind::MaxM: return "maxm";
        case PersonaKind::MinM: return "minm";
    }
    return "?";
}

Persona Persona::parse(std::string_view token) {
    if (token == "maxs") return {PersonaKind::MaxS};
    if (token == "mins") return {PersonaKind::MinS};
    if (token == "maxm") return {PersonaKind::MaxM};
    if (token == "minm") return {PersonaKind::MinM};
    throw ConfigError(fmt::format("unknown persona '{}' (expected maxs|mins|maxm|minm)", token));
}

std::string_view metric_token(MetricKind metric) noexcept {
    return metric == MetricKind::FinalScore ? "score" : "moves";
}

MetricKind parse_metric(std::string_view token) {
    if (token == "score") return MetricKind::FinalScore;
    if (token == "moves") return MetricKind::MeanAvailableMoves;
    throw ConfigError(fmt::format("unknown metric '{}' (expected score|moves)", token));
}

double metric_of_state(const GameState& state, MetricKind metric) noexcept {
    if (metric == MetricKind::FinalScore) {
        return static_cast<double>(state.score);
    }
    if (state.moves_made == 0) {
        return 0.0;
    }
    return static_cast<double>(state.available_sum) / state.moves_made;
}

double metric_of_trace(const PlayTrace& trace, MetricKind metric) {
    if (metric == MetricKind::FinalScore) {
        return static_cast<double>(trace.final_score);
    }
    const auto counts = trace.available_counts();
    if (counts.empty()) {
        return 0.0;
    }
    const double sum = std::accumulate(counts.begin(), counts.end(), 0.0);
    return sum / static_cast<double>(counts.size());
}

}  // namespace m3
