#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rangekit/definition/training.hpp"
#include "rangekit/training/events.hpp"

namespace rangekit::training {

enum class RunState { Created, Running, Finished };
enum class PhaseStatus { Locked, Active, Completed };
enum class Verdict { Correct, Incorrect, LimitReached };

std::string_view to_string(RunState state);
std::string_view to_string(PhaseStatus status);
std::string_view to_string(Verdict verdict);

struct PhaseProgress {
    int order = 0;
    definition::PhaseKind kind = definition::PhaseKind::Info;
    PhaseStatus status = PhaseStatus::Locked;
    std::set<int> revealed_hints;
    bool solution_revealed = false;
    bool limit_reached = false;
    int wrong_submissions = 0;  // saturates at incorrect_flag_limit
    int actual_score_in_level = 0;
    std::optional<Timestamp> started_at;
    std::optional<Timestamp> completed_at;
    std::vector<std::string> answers;  // questionnaire responses, never scored

    friend bool operator==(const PhaseProgress&, const PhaseProgress&) = default;
};

struct PhaseScore {
    int order = 0;
    PhaseStatus status = PhaseStatus::Locked;
    int score = 0;
};

struct ScoreSummary {
    int total_score = 0;        // completed TRAINING phases only
    int provisional_score = 0;  // active phase's current value, for dashboards
    std::vector<PhaseScore> phases;
};

using EventList = std::vector<TrainingEvent>;

/// One trainee's traversal of a training definition. Single-writer: callers
/// serialize mutations. Every mutation appends the events it caused to `out`.
///
/// Scoring: a TRAINING phase is worth max(0, max_score - revealed hint
/// penalties), or 0 once its solution was shown. Wrong flags cost nothing;
/// reaching incorrect_flag_limit reveals the solution.
class TrainingRun {
public:
    using DefinitionPtr = std::shared_ptr<const definition::TrainingDefinition>;

    /// Activates the lowest-order phase and emits TrainingRunStarted and PhaseStarted.
    static TrainingRun start(DefinitionPtr definition, const RunIds& ids, Timestamp now, EventList& out);

    /// Trimmed, case-sensitive comparison with the active phase's flag.
    Verdict submit_answer(std::string_view answer, Timestamp now, EventList& out);
    const std::string& reveal_hint(int hint_order, Timestamp now, EventList& out);
    const std::string& reveal_solution(Timestamp now, EventList& out);
    /// Completes an INFO or QUESTIONNAIRE phase. Returns the next phase order,
    /// or nullopt when the run finished.
    std::optional<int> advance(Timestamp now, EventList& out, std::vector<std::string> answers = {});
    /// Ends the run where it stands (instance closed); no-op when already finished.
    void finish(Timestamp now, EventList& out);

    ScoreSummary score() const;

    const RunIds& ids() const { return ids_; }
    RunState state() const { return state_; }
    Timestamp started_at() const { return started_at_; }
    std::int64_t game_time() const { return to_epoch_ms(last_time_) - to_epoch_ms(started_at_); }
    std::optional<int> current_phase_order() const;
    const std::vector<PhaseProgress>& progress() const { return progress_; }
    const PhaseProgress* progress_for(int order) const;
    const definition::TrainingDefinition& definition() const { return *definition_; }

    nlohmann::ordered_json to_json() const;
    static TrainingRun from_json(const nlohmann::json& value, DefinitionPtr definition);

    friend bool operator==(const TrainingRun& a, const TrainingRun& b) {
        return a.ids_ == b.ids_ && a.state_ == b.state_ && a.started_at_ == b.started_at_ &&
               a.last_time_ == b.last_time_ && a.current_ == b.current_ && a.progress_ == b.progress_;
    }

private:
    TrainingRun() = default;

    Timestamp tick(Timestamp now);
    TrainingEvent make_event(EventType type, Timestamp at, const PhaseProgress& phase) const;
    PhaseProgress& active();
    const definition::TrainingPhase& active_training();
    void require_running() const;
    void recompute(PhaseProgress& p) const;
    void complete_active(Timestamp at, EventList& out);
    void activate(std::size_t index, Timestamp at, EventList& out);

    DefinitionPtr definition_;
    std::vector<const definition::Phase*> phases_;  // ascending order, parallel to progress_
    RunIds ids_;
    RunState state_ = RunState::Created;
    Timestamp started_at_{};
    Timestamp last_time_{};
    std::size_t current_ = 0;
    std::vector<PhaseProgress> progress_;
};

}  // namespace rangekit::training
