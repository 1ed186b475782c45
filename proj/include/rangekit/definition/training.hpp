#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rangekit/definition/parsed.hpp"

namespace rangekit::definition {

struct Hint {
    std::string title;
    std::string content;
    int hint_penalty = 0;
    int order = 0;

    friend bool operator==(const Hint&, const Hint&) = default;
};

struct InfoPhase {
    std::string content;

    friend bool operator==(const InfoPhase&, const InfoPhase&) = default;
};

struct Question {
    std::string prompt;
    std::optional<std::string> expected_answer;

    friend bool operator==(const Question&, const Question&) = default;
};

struct QuestionnairePhase {
    std::vector<Question> questions;

    friend bool operator==(const QuestionnairePhase&, const QuestionnairePhase&) = default;
};

inline constexpr int kDefaultIncorrectFlagLimit = 100;

struct TrainingPhase {
    int max_score = 0;
    std::string flag;
    std::string content;
    std::string solution;
    std::vector<Hint> hints;  // declaration order; display order is by Hint::order
    int incorrect_flag_limit = kDefaultIncorrectFlagLimit;

    const Hint* find_hint(int order) const;
    std::vector<const Hint*> hints_in_display_order() const;
    int total_penalty() const;

    friend bool operator==(const TrainingPhase&, const TrainingPhase&) = default;
};

enum class PhaseKind { Info, Questionnaire, Training };

std::string_view to_string(PhaseKind kind);

struct Phase {
    std::string title;
    int order = 0;
    int estimated_duration = 0;  // minutes
    std::variant<InfoPhase, QuestionnairePhase, TrainingPhase> body;

    PhaseKind kind() const { return static_cast<PhaseKind>(body.index()); }
    const TrainingPhase* training() const { return std::get_if<TrainingPhase>(&body); }
    TrainingPhase* training() { return std::get_if<TrainingPhase>(&body); }

    friend bool operator==(const Phase&, const Phase&) = default;
};

struct TrainingDefinition {
    std::string title;
    std::string description;
    std::vector<std::string> prerequisites;  // "prerequisities" on the wire
    std::vector<std::string> outcomes;
    std::vector<Phase> phases;

    /// Phases sorted by ascending order.
    std::vector<const Phase*> phases_in_order() const;
    const Phase* find_phase(int order) const;

    friend bool operator==(const TrainingDefinition&, const TrainingDefinition&) = default;
};

/// Accepts strict JSON plus the relaxations found in hand-written documents:
/// trailing commas, raw line breaks inside strings (folded with the following
/// indentation into one space) and `{"...": "..."}` elision placeholders in
/// the phase list. Both "phase_type" and "level_type" name the phase variant.
Parsed<TrainingDefinition> parse_training(std::string_view document);

/// Pretty JSON with a fixed key order; always emits "phase_type".
std::string canonicalize(const TrainingDefinition& def);

}  // namespace rangekit::definition
