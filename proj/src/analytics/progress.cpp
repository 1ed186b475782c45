#include "rangekit/analytics/progress.hpp"

#include <map>

namespace rangekit::analytics {

using training::EventType;

std::optional<std::int64_t> PhaseSummary::duration_ms() const {
    if (!completed_game_time) return std::nullopt;
    return *completed_game_time - started_game_time;
}

const PhaseSummary* ProgressSummary::find_phase(std::int64_t phase_id) const {
    for (const auto& p : phases) {
        if (p.phase_id == phase_id) return &p;
    }
    return nullptr;
}

nlohmann::ordered_json ProgressSummary::to_json() const {
    nlohmann::ordered_json j;
    j["training_run_id"] = ids.training_run_id;
    j["user_ref_id"] = ids.user_ref_id;
    j["sandbox_id"] = ids.sandbox_id;
    j["finished"] = finished;
    j["current_phase"] = current_phase ? nlohmann::ordered_json(*current_phase) : nlohmann::ordered_json();
    j["total_score"] = total_score;
    j["provisional_score"] = provisional_score;
    j["phases"] = nlohmann::ordered_json::array();
    for (const auto& p : phases) {
        nlohmann::ordered_json pj;
        pj["phase_id"] = p.phase_id;
        pj["status"] = p.state == PhaseState::Completed ? "completed" : "active";
        pj["started_game_time"] = p.started_game_time;
        auto d = p.duration_ms();
        pj["duration_ms"] = d ? nlohmann::ordered_json(*d) : nlohmann::ordered_json();
        pj["hints"] = p.hints;
        pj["solution_displayed"] = p.solution_displayed;
        pj["wrong_flags"] = p.wrong_flags;
        pj["score"] = p.score;
        j["phases"].push_back(std::move(pj));
    }
    return j;
}

std::vector<ProgressSummary> summarize(const std::vector<training::TrainingEvent>& events) {
    std::map<std::int64_t, ProgressSummary> runs;
    auto phase_of = [](ProgressSummary& s, std::int64_t id, std::int64_t game_time) -> PhaseSummary& {
        for (auto& p : s.phases) {
            if (p.phase_id == id) return p;
        }
        s.phases.push_back({});
        s.phases.back().phase_id = id;
        s.phases.back().started_game_time = game_time;
        return s.phases.back();
    };
    for (const auto& e : events) {
        auto& s = runs[e.ids.training_run_id];
        s.ids = e.ids;
        s.total_score = e.total_score;
        switch (e.type) {
        case EventType::TrainingRunStarted: break;
        case EventType::PhaseStarted:
            phase_of(s, e.phase_id, e.game_time).score = e.actual_score_in_level;
            s.current_phase = e.phase_id;
            break;
        case EventType::HintDisplayed: {
            auto& p = phase_of(s, e.phase_id, e.game_time);
            if (e.hint_order) p.hints.insert(*e.hint_order);
            p.score = e.actual_score_in_level;
            break;
        }
        case EventType::SolutionDisplayed: {
            auto& p = phase_of(s, e.phase_id, e.game_time);
            p.solution_displayed = true;
            p.score = e.actual_score_in_level;
            break;
        }
        case EventType::WrongFlagSubmitted: {
            auto& p = phase_of(s, e.phase_id, e.game_time);
            p.wrong_flags = e.count.value_or(p.wrong_flags + 1);
            p.score = e.actual_score_in_level;
            break;
        }
        case EventType::CorrectFlagSubmitted: phase_of(s, e.phase_id, e.game_time).score = e.actual_score_in_level; break;
        case EventType::PhaseCompleted: {
            auto& p = phase_of(s, e.phase_id, e.game_time);
            p.state = PhaseState::Completed;
            p.completed_game_time = e.game_time;
            p.score = e.actual_score_in_level;
            if (s.current_phase == e.phase_id) s.current_phase.reset();
            break;
        }
        case EventType::TrainingRunFinished:
            s.finished = true;
            s.current_phase.reset();
            break;
        }
    }
    std::vector<ProgressSummary> out;
    for (auto& [id, s] : runs) {
        s.provisional_score = 0;
        if (s.current_phase) {
            if (const auto* p = s.find_phase(*s.current_phase); p && p->state == PhaseState::Active) {
                s.provisional_score = p->score;
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace rangekit::analytics
