#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rangekit/orchestrator/orchestrator.hpp"

namespace rangekit::sim {

/// Per training phase: reveal each hint with `hint_probability`, submit
/// 0..max_wrong_flags wrong flags, then the correct one.
struct AgentModel {
    int max_wrong_flags = 3;
    double hint_probability = 0.3;
    /// When set, every agent reveals exactly these hint orders (where the
    /// phase has them) and submits no wrong flags.
    std::optional<std::vector<int>> scripted_hints;
};

struct SimulationOptions {
    std::string training_json;
    orchestrator::SandboxSource sandbox;
    int students = 0;
    std::uint64_t seed = 1;
    /// Agent threads; 0 runs every agent on its own thread.
    unsigned threads = 0;
    AgentModel agent;
    orchestrator::OrchestratorConfig config;
    /// Persist to this database; empty keeps everything in memory.
    std::filesystem::path database;
    /// Real time each agent sleeps between actions.
    std::chrono::milliseconds action_delay{0};
};

/// One join or release as observed by the calling agent.
struct AssignmentRecord {
    enum Kind { Join, Release } kind = Join;
    std::int64_t user = 0;
    std::int64_t sandbox = 0;
    std::int64_t run = 0;
    std::uint64_t seq = 0;
    std::chrono::steady_clock::time_point invoked;
    std::chrono::steady_clock::time_point responded;
};

/// Checks a concurrent join/release history: commit sequence numbers are
/// unique and respect real-time order, and replaying in commit order never
/// gives one sandbox to two trainees or reuses a released sandbox.
std::vector<std::string> check_linearizable(const std::vector<AssignmentRecord>& history);

/// Sandboxes named by more than one TrainingRunStarted event.
int count_double_assignments(const std::vector<training::TrainingEvent>& events);

struct SimulationReport {
    int students = 0;
    int finished_runs = 0;
    int assignment_conflicts = 0;
    std::map<int, int> score_histogram;  // final score -> runs
    std::map<std::string, int> event_counts;
    int command_events = 0;
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }
    nlohmann::ordered_json to_json() const;
    std::string to_text() const;
};

struct SimulationResult {
    SimulationReport report;
    /// Training events as JSON lines, grouped by agent; run and sandbox ids
    /// renumbered by agent so the export does not depend on join order.
    std::string events_jsonl;
    std::vector<AssignmentRecord> history;
    std::vector<training::TrainingEvent> committed;  // raw, in commit order
    std::int64_t pool_id = 0;
};

/// Throws Error{InvalidValue} when students < 1.
SimulationResult simulate(const SimulationOptions& options);

}  // namespace rangekit::sim
