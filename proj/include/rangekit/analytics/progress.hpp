#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include <json.hpp>

#include "rangekit/training/events.hpp"

namespace rangekit::analytics {

enum class PhaseState { Active, Completed };

struct PhaseSummary {
    std::int64_t phase_id = 0;
    PhaseState state = PhaseState::Active;
    std::int64_t started_game_time = 0;
    std::optional<std::int64_t> completed_game_time;
    std::set<int> hints;  // revealed hint orders
    bool solution_displayed = false;
    int wrong_flags = 0;
    int score = 0;  // actual_score_in_level as last reported

    std::optional<std::int64_t> duration_ms() const;
    friend bool operator==(const PhaseSummary&, const PhaseSummary&) = default;
};

/// Dashboard row for one trainee.
struct ProgressSummary {
    training::RunIds ids;
    bool finished = false;
    std::optional<std::int64_t> current_phase;
    std::vector<PhaseSummary> phases;  // in the order they started
    int total_score = 0;
    int provisional_score = 0;  // current value of the active phase

    const PhaseSummary* find_phase(std::int64_t phase_id) const;
    nlohmann::ordered_json to_json() const;
    friend bool operator==(const ProgressSummary&, const ProgressSummary&) = default;
};

/// Folds training events into one summary per run, sorted by run id. Only
/// per-run event order matters; runs may be interleaved arbitrarily.
std::vector<ProgressSummary> summarize(const std::vector<training::TrainingEvent>& events);

}  // namespace rangekit::analytics
