#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "rangekit/core/time.hpp"

namespace rangekit::training {

enum class EventType {
    TrainingRunStarted,
    PhaseStarted,
    WrongFlagSubmitted,
    CorrectFlagSubmitted,
    HintDisplayed,
    SolutionDisplayed,
    PhaseCompleted,
    TrainingRunFinished,
};

/// "events.trainings.WrongFlagSubmitted" and so on.
std::string_view qualified_name(EventType type);
std::optional<EventType> parse_event_type(std::string_view qualified);

struct RunIds {
    std::int64_t training_run_id = 0;
    std::int64_t user_ref_id = 0;
    std::int64_t training_instance_id = 0;
    std::int64_t training_definition_id = 0;
    std::int64_t sandbox_id = 0;
    std::int64_t pool_id = 0;

    friend bool operator==(const RunIds&, const RunIds&) = default;
};

/// One training-portal event. On the wire every event carries the fields of
/// the portal's flag-submission record; flag_content and count appear only
/// on flag submissions and hint_order only on HintDisplayed.
struct TrainingEvent {
    EventType type = EventType::TrainingRunStarted;
    Timestamp timestamp{};
    std::int64_t game_time = 0;  // ms since the run started
    std::optional<std::string> flag_content;
    std::optional<int> count;
    std::optional<int> hint_order;
    int actual_score_in_level = 0;
    int total_score = 0;
    std::int64_t phase_id = 0;  // phase `order` within the definition
    RunIds ids;

    nlohmann::ordered_json to_json() const;
    /// Throws Error{SchemaError} on missing fields, wrong types or negative ids.
    static TrainingEvent from_json(const nlohmann::json& value);

    friend bool operator==(const TrainingEvent&, const TrainingEvent&) = default;
};

}  // namespace rangekit::training
