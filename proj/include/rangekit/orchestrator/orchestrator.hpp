#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "rangekit/analytics/store.hpp"
#include "rangekit/compiler/plan.hpp"
#include "rangekit/definition/flavor.hpp"
#include "rangekit/orchestrator/database.hpp"
#include "rangekit/orchestrator/sources.hpp"
#include "rangekit/orchestrator/tokens.hpp"
#include "rangekit/runtime/sandbox.hpp"
#include "rangekit/training/engine.hpp"

namespace rangekit::orchestrator {

enum class Role { Trainee, Instructor, Superuser };

std::string_view to_string(Role role);
Role parse_role(std::string_view text);

struct Principal {
    std::int64_t user_ref_id = 0;
    Role role = Role::Trainee;
    std::string name;

    bool is_staff() const { return role != Role::Trainee; }
};

struct OrchestratorConfig {
    definition::FlavorRegistry flavors = definition::FlavorRegistry::defaults();
    std::optional<long long> quota_vcpus;
    UtcOffset zone{};  // zone of sandbox command log timestamps
    std::uint64_t token_seed = std::random_device{}();
    std::vector<std::string> token_words = TokenGenerator::default_words();
    unsigned build_workers = 2;
    std::chrono::milliseconds build_delay{0};
    double build_failure_rate = 0.0;  // share of simulated builds that fail
    std::uint64_t build_seed = 1;
    std::filesystem::path workdir = std::filesystem::temp_directory_path() / "rangekit";
    /// Analytics journal; empty keeps analytics in memory. With a database
    /// and no journal given, `<database>.analytics.jsonl` is used.
    std::optional<std::filesystem::path> analytics_journal;
};

struct SandboxDefinitionInfo {
    std::int64_t id = 0;
    std::string name;
    std::string location;
    std::string commit;
    std::string topology_yaml;
    std::optional<std::string> provisioning_yaml;

    nlohmann::ordered_json to_json() const;
};

struct TrainingDefinitionInfo {
    std::int64_t id = 0;
    std::string title;
    std::shared_ptr<const definition::TrainingDefinition> definition;

    nlohmann::ordered_json to_json() const;
};

struct SandboxInfo {
    std::int64_t id = 0;
    std::int64_t pool_id = 0;
    runtime::SandboxState state = runtime::SandboxState::Building;
    std::optional<std::int64_t> user_ref_id;
    std::optional<std::int64_t> run_id;
    std::optional<std::int64_t> instance_id;

    friend bool operator==(const SandboxInfo&, const SandboxInfo&) = default;
};

struct PoolInfo {
    std::int64_t id = 0;
    std::int64_t definition_id = 0;
    int size = 0;
    std::vector<SandboxInfo> sandboxes;

    std::size_t count(runtime::SandboxState state) const;
    nlohmann::ordered_json to_json() const;
};

struct InstanceInfo {
    std::int64_t id = 0;
    std::int64_t training_definition_id = 0;
    std::int64_t pool_id = 0;
    Timestamp start{};
    Timestamp end{};
    std::string access_token;
    bool closed = false;

    nlohmann::ordered_json to_json(bool with_token) const;
};

struct JoinResult {
    training::TrainingRun run;
    std::int64_t sandbox_id = 0;
    bool created = false;
    std::uint64_t commit_seq = 0;  // position of this join among all joins and releases
};

/// The deployment-facing service core. All public operations are thread-safe.
/// join and release are linearizable: each takes effect atomically at one
/// point, numbered by commit_seq, and is durable once it returns.
class Orchestrator {
public:
    /// Opens (or creates) the database and restores every definition, pool,
    /// instance and run it holds. An empty path keeps state in memory.
    explicit Orchestrator(OrchestratorConfig config, const std::filesystem::path& database = {});
    ~Orchestrator();
    Orchestrator(const Orchestrator&) = delete;
    Orchestrator& operator=(const Orchestrator&) = delete;

    // Definitions. Throws Error{InvalidDefinition} when parsing, validation or
    // compilation fails.
    SandboxDefinitionInfo add_sandbox_definition(const Principal& who, SandboxSource source, std::string name);
    /// Loads from a directory or fetches a repository URL (pinned to its commit).
    SandboxDefinitionInfo import_sandbox_definition(const Principal& who, const std::string& location,
                                                    const std::optional<std::string>& ref = std::nullopt,
                                                    const std::filesystem::path& subdir = {});
    TrainingDefinitionInfo add_training_definition(const Principal& who, const std::string& json_text);
    SandboxDefinitionInfo sandbox_definition(std::int64_t id) const;
    TrainingDefinitionInfo training_definition(std::int64_t id) const;

    // Pools. Builds run asynchronously after create_pool returns.
    PoolInfo create_pool(const Principal& who, std::int64_t definition_id, int size);
    PoolInfo pool(std::int64_t id) const;
    /// Blocks until no sandbox of the pool is building; false on timeout.
    bool wait_pool_settled(std::int64_t id, std::chrono::milliseconds timeout) const;

    InstanceInfo create_instance(const Principal& who, std::int64_t training_definition_id, std::int64_t pool_id,
                                 Timestamp start, Timestamp end);
    InstanceInfo instance(std::int64_t id) const;

    /// Throws InvalidToken, OutsideWindow or PoolExhausted. Rejoining returns
    /// the trainee's existing run and sandbox.
    JoinResult join(const std::string& access_token, const Principal& who, Timestamp now);

    training::Verdict submit_answer(std::int64_t run_id, const Principal& who, std::string_view answer, Timestamp now);
    std::string reveal_hint(std::int64_t run_id, const Principal& who, int hint_order, Timestamp now);
    std::string reveal_solution(std::int64_t run_id, const Principal& who, Timestamp now);
    std::optional<int> advance(std::int64_t run_id, const Principal& who, Timestamp now,
                               std::vector<std::string> answers = {});
    training::TrainingRun run(std::int64_t run_id, const Principal& who) const;
    std::vector<training::TrainingRun> runs() const;

    runtime::TopologyView run_topology(std::int64_t run_id, const Principal& who) const;
    runtime::CommandEvent execute_command(std::int64_t run_id, const Principal& who, const std::string& node,
                                          const std::string& working_dir, const std::string& command,
                                          const std::string& cmd_type, Timestamp now);

    /// Throws NotAssigned unless the sandbox is currently assigned.
    std::uint64_t release(const Principal& who, std::int64_t pool_id, std::int64_t sandbox_id);
    /// Finishes every open run and releases the instance's sandboxes. Returns
    /// the number of runs finished. Throws InstanceActive before the end time
    /// unless `override_active`.
    int close_instance(const Principal& who, std::int64_t instance_id, Timestamp now, bool override_active = false);

    /// Dashboard feed; `privacy` swaps names for avatars. Throws Forbidden for trainees.
    nlohmann::ordered_json instance_progress(const Principal& who, std::int64_t instance_id, bool privacy) const;

    analytics::IngestResult ingest_event(const Principal& who, const nlohmann::ordered_json& payload,
                                         const std::string& source, std::optional<std::uint64_t> offset);
    const analytics::EventStore& analytics() const { return *analytics_; }
    /// Training events in commit order, as persisted.
    std::vector<training::TrainingEvent> committed_events() const;

private:
    struct PoolState {
        std::int64_t definition_id = 0;
        int size = 0;
        std::vector<std::int64_t> sandbox_ids;
    };
    struct RunOwner {
        std::int64_t instance_id = 0;
        std::int64_t user_ref_id = 0;
        std::int64_t sandbox_id = 0;
    };

    void create_schema();
    void restore();
    void start_workers();
    void build_loop();
    void enqueue_build(std::int64_t sandbox_id);
    void set_sandbox_state(std::int64_t sandbox_id, runtime::SandboxState state);
    void persist_run(const training::TrainingRun& run, const training::EventList& events);
    void publish_command(const runtime::CommandEvent& event);
    void require_staff(const Principal& who) const;
    RunOwner owner_of(std::int64_t run_id) const;
    RunOwner authorize_run(std::int64_t run_id, const Principal& who, bool mutate) const;
    void expire_if_past(std::int64_t run_id, const RunOwner& owner, Timestamp now);
    std::shared_ptr<const compiler::SandboxPlan> plan_for(std::int64_t definition_id) const;
    SandboxDefinitionInfo store_sandbox_definition(SandboxSource source, std::string name);

    OrchestratorConfig config_;
    std::unique_ptr<Database> db_;
    std::unique_ptr<analytics::EventStore> analytics_;
    TokenGenerator tokens_;
    runtime::SandboxRuntime runtime_;
    training::TrainingEngine engine_;

    mutable std::shared_mutex catalog_mutex_;
    std::map<std::int64_t, SandboxDefinitionInfo> sandbox_definitions_;
    mutable std::map<std::int64_t, std::shared_ptr<const compiler::SandboxPlan>> plans_;  // compiled lazily
    std::map<std::int64_t, TrainingDefinitionInfo> training_definitions_;
    std::map<std::int64_t, PoolState> pools_;
    std::map<std::int64_t, SandboxInfo> sandboxes_;
    std::map<std::int64_t, InstanceInfo> instances_;
    std::map<std::string, std::int64_t> tokens_in_use_;
    std::map<std::int64_t, RunOwner> run_owners_;
    std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> run_by_user_;  // (instance, user) -> run
    mutable std::condition_variable_any settled_;

    std::mutex assign_mutex_;  // serializes join, release and close
    std::uint64_t commit_seq_ = 0;
    std::int64_t next_run_id_ = 1;

    std::mutex build_mutex_;
    std::condition_variable build_cv_;
    std::deque<std::int64_t> build_queue_;
    bool stopping_ = false;
    std::vector<std::thread> workers_;
};

}  // namespace rangekit::orchestrator
