#include "rangekit/training/run.hpp"

#include <algorithm>

#include "rangekit/core/error.hpp"

namespace rangekit::training {

using definition::PhaseKind;

std::string_view to_string(RunState state) {
    switch (state) {
        case RunState::Created: return "created";
        case RunState::Running: return "running";
        case RunState::Finished: return "finished";
    }
    return "unknown";
}

std::string_view to_string(PhaseStatus status) {
    switch (status) {
        case PhaseStatus::Locked: return "locked";
        case PhaseStatus::Active: return "active";
        case PhaseStatus::Completed: return "completed";
    }
    return "unknown";
}

std::string_view to_string(Verdict verdict) {
    switch (verdict) {
        case Verdict::Correct: return "correct";
        case Verdict::Incorrect: return "incorrect";
        case Verdict::LimitReached: return "limit_reached";
    }
    return "unknown";
}

namespace {

std::string_view trim(std::string_view s) {
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

}  // namespace

TrainingRun TrainingRun::start(DefinitionPtr definition, const RunIds& ids, Timestamp now, EventList& out) {
    if (!definition || definition->phases.empty()) {
        throw Error(ErrorCode::InvalidDefinition, "training definition has no phases");
    }
    TrainingRun run;
    run.definition_ = std::move(definition);
    run.phases_ = run.definition_->phases_in_order();
    run.ids_ = ids;
    run.started_at_ = now;
    run.last_time_ = now;
    run.state_ = RunState::Running;
    for (const auto* phase : run.phases_) {
        PhaseProgress p;
        p.order = phase->order;
        p.kind = phase->kind();
        run.recompute(p);
        run.progress_.push_back(std::move(p));
    }
    out.push_back(run.make_event(EventType::TrainingRunStarted, now, run.progress_.front()));
    run.activate(0, now, out);
    return run;
}

Timestamp TrainingRun::tick(Timestamp now) {
    last_time_ = std::max(last_time_, now);
    return last_time_;
}

void TrainingRun::require_running() const {
    if (state_ == RunState::Finished) {
        throw Error(ErrorCode::RunFinished, "training run " + std::to_string(ids_.training_run_id) + " is finished");
    }
}

PhaseProgress& TrainingRun::active() { return progress_[current_]; }

const definition::TrainingPhase& TrainingRun::active_training() {
    require_running();
    const auto* t = phases_[current_]->training();
    if (!t) {
        throw Error(ErrorCode::PhaseNotAnswerable,
                    "phase " + std::to_string(active().order) + " is " +
                        std::string(definition::to_string(active().kind)) + ", not TRAINING");
    }
    return *t;
}

void TrainingRun::recompute(PhaseProgress& p) const {
    const auto* phase = definition_->find_phase(p.order);
    const auto* t = phase ? phase->training() : nullptr;
    if (!t || p.solution_revealed) {
        p.actual_score_in_level = 0;
        return;
    }
    int penalty = 0;
    for (int order : p.revealed_hints) {
        if (const auto* h = t->find_hint(order)) penalty += h->hint_penalty;
    }
    p.actual_score_in_level = std::max(0, t->max_score - penalty);
}

TrainingEvent TrainingRun::make_event(EventType type, Timestamp at, const PhaseProgress& phase) const {
    TrainingEvent e;
    e.type = type;
    e.timestamp = at;
    e.game_time = to_epoch_ms(at) - to_epoch_ms(started_at_);
    e.actual_score_in_level = phase.actual_score_in_level;
    e.total_score = score().total_score;
    e.phase_id = phase.order;
    e.ids = ids_;
    return e;
}

void TrainingRun::activate(std::size_t index, Timestamp at, EventList& out) {
    current_ = index;
    auto& p = progress_[index];
    p.status = PhaseStatus::Active;
    p.started_at = at;
    out.push_back(make_event(EventType::PhaseStarted, at, p));
}

void TrainingRun::complete_active(Timestamp at, EventList& out) {
    auto& p = active();
    p.status = PhaseStatus::Completed;
    p.completed_at = at;
    out.push_back(make_event(EventType::PhaseCompleted, at, p));
    if (current_ + 1 < progress_.size()) {
        activate(current_ + 1, at, out);
    } else {
        state_ = RunState::Finished;
        out.push_back(make_event(EventType::TrainingRunFinished, at, p));
    }
}

Verdict TrainingRun::submit_answer(std::string_view answer, Timestamp now, EventList& out) {
    const auto& phase = active_training();
    auto at = tick(now);
    auto& p = active();
    if (trim(answer) == phase.flag) {
        p.status = PhaseStatus::Completed;  // counted in total_score of the events below
        auto e = make_event(EventType::CorrectFlagSubmitted, at, p);
        e.flag_content = std::string(answer);
        e.count = p.wrong_submissions;
        out.push_back(std::move(e));
        complete_active(at, out);
        return Verdict::Correct;
    }

    bool first_breach = false;
    if (p.wrong_submissions < phase.incorrect_flag_limit) {
        ++p.wrong_submissions;
        first_breach = p.wrong_submissions == phase.incorrect_flag_limit && !p.limit_reached;
    }
    auto e = make_event(EventType::WrongFlagSubmitted, at, p);
    e.flag_content = std::string(answer);
    e.count = p.wrong_submissions;
    out.push_back(std::move(e));
    if (!first_breach) return Verdict::Incorrect;

    p.limit_reached = true;
    if (!p.solution_revealed) {
        p.solution_revealed = true;
        recompute(p);
        out.push_back(make_event(EventType::SolutionDisplayed, at, p));
    }
    return Verdict::LimitReached;
}

const std::string& TrainingRun::reveal_hint(int hint_order, Timestamp now, EventList& out) {
    const auto& phase = active_training();
    const auto* hint = phase.find_hint(hint_order);
    if (!hint) {
        throw Error(ErrorCode::UnknownHint, "phase " + std::to_string(active().order) + " has no hint with order " +
                                                std::to_string(hint_order));
    }
    auto at = tick(now);
    auto& p = active();
    if (p.revealed_hints.insert(hint_order).second) {
        recompute(p);
        auto e = make_event(EventType::HintDisplayed, at, p);
        e.hint_order = hint_order;
        out.push_back(std::move(e));
    }
    return hint->content;
}

const std::string& TrainingRun::reveal_solution(Timestamp now, EventList& out) {
    const auto& phase = active_training();
    auto at = tick(now);
    auto& p = active();
    if (!p.solution_revealed) {
        p.solution_revealed = true;
        recompute(p);
        out.push_back(make_event(EventType::SolutionDisplayed, at, p));
    }
    return phase.solution;
}

std::optional<int> TrainingRun::advance(Timestamp now, EventList& out, std::vector<std::string> answers) {
    require_running();
    auto& p = active();
    if (p.kind == PhaseKind::Training) {
        throw Error(ErrorCode::PhaseNotAdvanceable,
                    "phase " + std::to_string(p.order) + " completes only with a correct flag");
    }
    auto at = tick(now);
    if (p.kind == PhaseKind::Questionnaire) p.answers = std::move(answers);
    complete_active(at, out);
    if (state_ == RunState::Finished) return std::nullopt;
    return active().order;
}

void TrainingRun::finish(Timestamp now, EventList& out) {
    if (state_ == RunState::Finished) return;
    auto at = tick(now);
    state_ = RunState::Finished;
    out.push_back(make_event(EventType::TrainingRunFinished, at, active()));
}

ScoreSummary TrainingRun::score() const {
    ScoreSummary s;
    for (const auto& p : progress_) {
        s.phases.push_back({p.order, p.status, p.actual_score_in_level});
        if (p.kind != PhaseKind::Training) continue;
        if (p.status == PhaseStatus::Completed) {
            s.total_score += p.actual_score_in_level;
        } else if (p.status == PhaseStatus::Active) {
            s.provisional_score = p.actual_score_in_level;
        }
    }
    return s;
}

std::optional<int> TrainingRun::current_phase_order() const {
    if (state_ == RunState::Finished || progress_.empty()) return std::nullopt;
    return progress_[current_].order;
}

const PhaseProgress* TrainingRun::progress_for(int order) const {
    auto it = std::find_if(progress_.begin(), progress_.end(), [&](const PhaseProgress& p) { return p.order == order; });
    return it == progress_.end() ? nullptr : &*it;
}

namespace {

PhaseStatus parse_status(const std::string& s) {
    if (s == "active") return PhaseStatus::Active;
    if (s == "completed") return PhaseStatus::Completed;
    return PhaseStatus::Locked;
}

}  // namespace

nlohmann::ordered_json TrainingRun::to_json() const {
    nlohmann::ordered_json j;
    j["training_run_id"] = ids_.training_run_id;
    j["user_ref_id"] = ids_.user_ref_id;
    j["training_instance_id"] = ids_.training_instance_id;
    j["training_definition_id"] = ids_.training_definition_id;
    j["sandbox_id"] = ids_.sandbox_id;
    j["pool_id"] = ids_.pool_id;
    j["state"] = std::string(to_string(state_));
    j["started_at"] = to_epoch_ms(started_at_);
    j["last_time"] = to_epoch_ms(last_time_);
    j["current_index"] = current_;
    j["phases"] = nlohmann::ordered_json::array();
    for (const auto& p : progress_) {
        nlohmann::ordered_json pj;
        pj["order"] = p.order;
        pj["status"] = std::string(to_string(p.status));
        pj["revealed_hints"] = p.revealed_hints;
        pj["solution_revealed"] = p.solution_revealed;
        pj["limit_reached"] = p.limit_reached;
        pj["wrong_submissions"] = p.wrong_submissions;
        pj["actual_score_in_level"] = p.actual_score_in_level;
        pj["started_at"] = p.started_at ? nlohmann::ordered_json(to_epoch_ms(*p.started_at)) : nullptr;
        pj["completed_at"] = p.completed_at ? nlohmann::ordered_json(to_epoch_ms(*p.completed_at)) : nullptr;
        pj["answers"] = p.answers;
        j["phases"].push_back(std::move(pj));
    }
    return j;
}

TrainingRun TrainingRun::from_json(const nlohmann::json& j, DefinitionPtr definition) {
    TrainingRun run;
    run.definition_ = std::move(definition);
    run.phases_ = run.definition_->phases_in_order();
    run.ids_.training_run_id = j.at("training_run_id").get<std::int64_t>();
    run.ids_.user_ref_id = j.at("user_ref_id").get<std::int64_t>();
    run.ids_.training_instance_id = j.at("training_instance_id").get<std::int64_t>();
    run.ids_.training_definition_id = j.at("training_definition_id").get<std::int64_t>();
    run.ids_.sandbox_id = j.at("sandbox_id").get<std::int64_t>();
    run.ids_.pool_id = j.at("pool_id").get<std::int64_t>();
    auto state = j.at("state").get<std::string>();
    run.state_ = state == "finished" ? RunState::Finished : state == "running" ? RunState::Running : RunState::Created;
    run.started_at_ = from_epoch_ms(j.at("started_at").get<std::int64_t>());
    run.last_time_ = from_epoch_ms(j.at("last_time").get<std::int64_t>());
    run.current_ = j.at("current_index").get<std::size_t>();
    const auto& phases = j.at("phases");
    if (phases.size() != run.phases_.size() || run.current_ >= run.phases_.size()) {
        throw Error(ErrorCode::SchemaError, "stored run does not match its training definition");
    }
    for (std::size_t i = 0; i < phases.size(); ++i) {
        const auto& pj = phases[i];
        PhaseProgress p;
        p.order = pj.at("order").get<int>();
        p.kind = run.phases_[i]->kind();
        p.status = parse_status(pj.at("status").get<std::string>());
        p.revealed_hints = pj.at("revealed_hints").get<std::set<int>>();
        p.solution_revealed = pj.at("solution_revealed").get<bool>();
        p.limit_reached = pj.at("limit_reached").get<bool>();
        p.wrong_submissions = pj.at("wrong_submissions").get<int>();
        p.actual_score_in_level = pj.at("actual_score_in_level").get<int>();
        if (!pj.at("started_at").is_null()) p.started_at = from_epoch_ms(pj.at("started_at").get<std::int64_t>());
        if (!pj.at("completed_at").is_null()) {
            p.completed_at = from_epoch_ms(pj.at("completed_at").get<std::int64_t>());
        }
        p.answers = pj.at("answers").get<std::vector<std::string>>();
        run.progress_.push_back(std::move(p));
    }
    return run;
}

}  // namespace rangekit::training
