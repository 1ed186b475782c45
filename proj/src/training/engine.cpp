#include "rangekit/training/engine.hpp"

#include "rangekit/core/error.hpp"

namespace rangekit::training {

TrainingEngine::TrainingEngine(Sink sink, CommitHook commit)
    : sink_(std::move(sink)), commit_(std::move(commit)) {}

TrainingEngine::Slot& TrainingEngine::slot(std::int64_t run_id) const {
    std::shared_lock lock(mutex_);
    auto it = runs_.find(run_id);
    if (it == runs_.end()) throw Error(ErrorCode::UnknownRun, "unknown training run " + std::to_string(run_id));
    return *it->second;
}

void TrainingEngine::publish(const EventList& events) const {
    if (!sink_) return;
    for (const auto& e : events) sink_(e);
}

TrainingRun TrainingEngine::start_run(TrainingRun::DefinitionPtr definition, const RunIds& ids, Timestamp now) {
    std::unique_lock lock(mutex_);
    if (runs_.count(ids.training_run_id)) {
        throw Error(ErrorCode::DuplicateRun, "training run " + std::to_string(ids.training_run_id) + " already exists");
    }
    EventList events;
    auto run = TrainingRun::start(std::move(definition), ids, now, events);
    if (commit_) commit_(run, events);
    auto& s = runs_.emplace(ids.training_run_id, std::make_unique<Slot>(run)).first->second;
    std::lock_guard run_lock(s->mutex);
    lock.unlock();
    publish(events);
    return run;
}

void TrainingEngine::adopt(TrainingRun run) {
    std::unique_lock lock(mutex_);
    auto id = run.ids().training_run_id;
    if (runs_.count(id)) throw Error(ErrorCode::DuplicateRun, "training run " + std::to_string(id) + " already exists");
    runs_.emplace(id, std::make_unique<Slot>(std::move(run)));
}

Verdict TrainingEngine::submit_answer(std::int64_t run_id, std::string_view answer, Timestamp now) {
    return mutate(run_id, [&](TrainingRun& run, EventList& out) { return run.submit_answer(answer, now, out); });
}

std::string TrainingEngine::reveal_hint(std::int64_t run_id, int hint_order, Timestamp now) {
    return mutate(run_id, [&](TrainingRun& run, EventList& out) { return run.reveal_hint(hint_order, now, out); });
}

std::string TrainingEngine::reveal_solution(std::int64_t run_id, Timestamp now) {
    return mutate(run_id, [&](TrainingRun& run, EventList& out) { return run.reveal_solution(now, out); });
}

std::optional<int> TrainingEngine::advance(std::int64_t run_id, Timestamp now, std::vector<std::string> answers) {
    return mutate(run_id, [&](TrainingRun& run, EventList& out) { return run.advance(now, out, std::move(answers)); });
}

void TrainingEngine::finish(std::int64_t run_id, Timestamp now) {
    mutate(run_id, [&](TrainingRun& run, EventList& out) {
        run.finish(now, out);
        return 0;
    });
}

ScoreSummary TrainingEngine::score(std::int64_t run_id) const {
    auto& s = slot(run_id);
    std::lock_guard lock(s.mutex);
    return s.run.score();
}

TrainingRun TrainingEngine::snapshot(std::int64_t run_id) const {
    auto& s = slot(run_id);
    std::lock_guard lock(s.mutex);
    return s.run;
}

bool TrainingEngine::contains(std::int64_t run_id) const {
    std::shared_lock lock(mutex_);
    return runs_.count(run_id) > 0;
}

std::vector<std::int64_t> TrainingEngine::run_ids() const {
    std::shared_lock lock(mutex_);
    std::vector<std::int64_t> ids;
    for (const auto& [id, _] : runs_) ids.push_back(id);
    return ids;
}

}  // namespace rangekit::training
