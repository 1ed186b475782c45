#include "rangekit/training/events.hpp"

#include <array>

#include "rangekit/core/error.hpp"

namespace rangekit::training {

namespace {

constexpr std::array<std::pair<EventType, std::string_view>, 8> kNames = {{
    {EventType::TrainingRunStarted, "events.trainings.TrainingRunStarted"},
    {EventType::PhaseStarted, "events.trainings.PhaseStarted"},
    {EventType::WrongFlagSubmitted, "events.trainings.WrongFlagSubmitted"},
    {EventType::CorrectFlagSubmitted, "events.trainings.CorrectFlagSubmitted"},
    {EventType::HintDisplayed, "events.trainings.HintDisplayed"},
    {EventType::SolutionDisplayed, "events.trainings.SolutionDisplayed"},
    {EventType::PhaseCompleted, "events.trainings.PhaseCompleted"},
    {EventType::TrainingRunFinished, "events.trainings.TrainingRunFinished"},
}};

[[noreturn]] void schema(const std::string& message) { throw Error(ErrorCode::SchemaError, message); }

std::int64_t id_field(const nlohmann::json& v, const char* key) {
    auto it = v.find(key);
    if (it == v.end()) schema(std::string("missing field '") + key + "'");
    if (!it->is_number_integer()) schema(std::string("field '") + key + "' must be an integer");
    auto value = it->get<std::int64_t>();
    if (value < 0) schema(std::string("field '") + key + "' must be nonnegative");
    return value;
}

int int_field(const nlohmann::json& v, const char* key) {
    auto it = v.find(key);
    if (it == v.end()) schema(std::string("missing field '") + key + "'");
    if (!it->is_number_integer()) schema(std::string("field '") + key + "' must be an integer");
    return it->get<int>();
}

}  // namespace

std::string_view qualified_name(EventType type) {
    for (const auto& [t, name] : kNames) {
        if (t == type) return name;
    }
    return "events.trainings.Unknown";
}

std::optional<EventType> parse_event_type(std::string_view qualified) {
    for (const auto& [t, name] : kNames) {
        if (name == qualified) return t;
    }
    return std::nullopt;
}

nlohmann::ordered_json TrainingEvent::to_json() const {
    nlohmann::ordered_json j;
    if (flag_content) j["flag_content"] = *flag_content;
    j["actual_score_in_level"] = actual_score_in_level;
    j["total_score"] = total_score;
    j["game_time"] = game_time;
    j["timestamp"] = to_epoch_ms(timestamp);
    j["type"] = std::string(qualified_name(type));
    if (count) j["count"] = *count;
    if (hint_order) j["hint_order"] = *hint_order;
    j["user_ref_id"] = ids.user_ref_id;
    j["phase_id"] = phase_id;
    j["training_run_id"] = ids.training_run_id;
    j["training_instance_id"] = ids.training_instance_id;
    j["training_definition_id"] = ids.training_definition_id;
    j["sandbox_id"] = ids.sandbox_id;
    j["pool_id"] = ids.pool_id;
    return j;
}

TrainingEvent TrainingEvent::from_json(const nlohmann::json& v) {
    if (!v.is_object()) schema("training event must be a JSON object");
    TrainingEvent e;
    auto type_it = v.find("type");
    if (type_it == v.end() || !type_it->is_string()) schema("missing or non-string field 'type'");
    auto type = parse_event_type(type_it->get<std::string>());
    if (!type) schema("unknown event type '" + type_it->get<std::string>() + "'");
    e.type = *type;
    e.timestamp = from_epoch_ms(id_field(v, "timestamp"));
    e.game_time = id_field(v, "game_time");
    e.actual_score_in_level = int_field(v, "actual_score_in_level");
    e.total_score = int_field(v, "total_score");
    e.phase_id = id_field(v, "phase_id");
    e.ids.user_ref_id = id_field(v, "user_ref_id");
    e.ids.training_run_id = id_field(v, "training_run_id");
    e.ids.training_instance_id = id_field(v, "training_instance_id");
    e.ids.training_definition_id = id_field(v, "training_definition_id");
    e.ids.sandbox_id = id_field(v, "sandbox_id");
    e.ids.pool_id = id_field(v, "pool_id");
    if (auto it = v.find("flag_content"); it != v.end()) {
        if (!it->is_string()) schema("field 'flag_content' must be a string");
        e.flag_content = it->get<std::string>();
    }
    if (v.contains("count")) e.count = static_cast<int>(id_field(v, "count"));
    if (v.contains("hint_order")) e.hint_order = static_cast<int>(id_field(v, "hint_order"));
    return e;
}

}  // namespace rangekit::training
