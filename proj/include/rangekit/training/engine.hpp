#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <vector>

#include "rangekit/training/run.hpp"

namespace rangekit::training {

/// Registry of concurrent training runs. Operations on one run are serialized
/// by a per-run lock; distinct runs proceed in parallel.
///
/// Each mutation works on a copy of the run. The commit hook (persistence) sees
/// the new state and its events before they become visible; if it throws, the
/// run is left untouched. Events then go to the sink in emission order while
/// the run lock is still held, so per-run order is preserved downstream.
class TrainingEngine {
public:
    using Sink = std::function<void(const TrainingEvent&)>;
    using CommitHook = std::function<void(const TrainingRun&, const EventList&)>;

    explicit TrainingEngine(Sink sink = {}, CommitHook commit = {});

    /// Throws Error{DuplicateRun} when the run id is already registered.
    TrainingRun start_run(TrainingRun::DefinitionPtr definition, const RunIds& ids, Timestamp now);
    /// Registers an already started run (recovery, or a run created inside a
    /// larger transaction). Emits nothing.
    void adopt(TrainingRun run);

    Verdict submit_answer(std::int64_t run_id, std::string_view answer, Timestamp now);
    std::string reveal_hint(std::int64_t run_id, int hint_order, Timestamp now);
    std::string reveal_solution(std::int64_t run_id, Timestamp now);
    std::optional<int> advance(std::int64_t run_id, Timestamp now, std::vector<std::string> answers = {});
    void finish(std::int64_t run_id, Timestamp now);

    ScoreSummary score(std::int64_t run_id) const;
    TrainingRun snapshot(std::int64_t run_id) const;
    bool contains(std::int64_t run_id) const;
    std::vector<std::int64_t> run_ids() const;

private:
    struct Slot {
        explicit Slot(TrainingRun r) : run(std::move(r)) {}
        mutable std::mutex mutex;
        TrainingRun run;
    };

    Slot& slot(std::int64_t run_id) const;

    template <typename Fn>
    auto mutate(std::int64_t run_id, Fn&& fn) {
        auto& s = slot(run_id);
        std::lock_guard lock(s.mutex);
        TrainingRun next = s.run;
        EventList events;
        auto result = fn(next, events);
        if (commit_) commit_(next, events);
        s.run = std::move(next);
        publish(events);
        return result;
    }

    void publish(const EventList& events) const;

    Sink sink_;
    CommitHook commit_;
    mutable std::shared_mutex mutex_;
    std::map<std::int64_t, std::unique_ptr<Slot>> runs_;
};

}  // namespace rangekit::training
