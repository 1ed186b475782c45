#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rangekit/compiler/plan.hpp"
#include "rangekit/core/time.hpp"

namespace rangekit::runtime {

enum class SandboxState { Building, Ready, Assigned, Released, Failed };
enum class ViewerRole { Instructor, Trainee };

std::string_view to_string(SandboxState state);
std::string_view to_string(ViewerRole role);
SandboxState parse_sandbox_state(std::string_view text);

/// Forward edges are building→ready→assigned→released; any state may fail.
bool can_transition(SandboxState from, SandboxState to);

/// One submitted shell command, as the node's logger would record it.
struct CommandEvent {
    Timestamp timestamp;
    std::string username;
    std::string hostname;
    Ipv4Address host_ip;
    std::string wd;
    std::string cmd;
    std::string cmd_type;
    std::int64_t sandbox_id = 0;

    /// Renders the syslog payload: `<time> username="u" <host> src="ip" wd=... cmd=... cmd_type=... uid="id"`.
    std::string to_syslog_line(UtcOffset zone) const;

    friend bool operator==(const CommandEvent&, const CommandEvent&) = default;
};

struct CommandRequest {
    std::string node;
    std::string user;
    std::string working_dir = "/";
    std::string command;
    std::string cmd_type = "bash";
    ViewerRole role = ViewerRole::Trainee;
};

struct ViewNode {
    std::string name;
    compiler::NodeRole role = compiler::NodeRole::Host;
    bool hidden = false;
    bool running = false;

    friend bool operator==(const ViewNode&, const ViewNode&) = default;
};

struct ViewLink {
    std::string node;
    std::string network;
    Ipv4Address ip;

    friend bool operator==(const ViewLink&, const ViewLink&) = default;
};

struct TopologyView {
    std::int64_t sandbox_id = 0;
    ViewerRole role = ViewerRole::Trainee;
    std::vector<ViewNode> nodes;
    std::vector<compiler::PlanNetwork> networks;
    std::vector<ViewLink> links;

    bool has_node(std::string_view name) const;
    nlohmann::json to_json() const;
};

struct NodeState {
    bool running = false;
    std::set<std::string> users;
};

using CommandSink = std::function<void(const CommandEvent&)>;

/// In-memory stand-in for a deployed sandbox. Commands on one node are
/// serialized and reach the sink in submission order; different nodes run
/// concurrently.
class SandboxInstance {
public:
    SandboxInstance(std::int64_t id, std::shared_ptr<const compiler::SandboxPlan> plan, CommandSink sink = {});

    std::int64_t id() const { return id_; }
    const compiler::SandboxPlan& plan() const { return *plan_; }
    SandboxState state() const;

    /// Throws Error{InvalidTransition} for edges outside the state machine.
    void transition(SandboxState to);
    /// Boots every node and moves building→ready.
    void boot();

    /// Throws UnknownNode (absent, or hidden from a trainee), NodeNotRunning,
    /// or EmptyCommand.
    CommandEvent execute_command(const CommandRequest& request, Timestamp now);

    void set_running(std::string_view node, bool running);
    NodeState node_state(std::string_view node) const;
    TopologyView topology_view(ViewerRole role) const;

private:
    struct NodeSlot {
        mutable std::mutex mutex;
        NodeState state;
    };

    const compiler::NodePlan& visible_node(std::string_view name, ViewerRole role) const;
    NodeSlot& slot(std::string_view name) const;

    std::int64_t id_;
    std::shared_ptr<const compiler::SandboxPlan> plan_;
    CommandSink sink_;
    mutable std::mutex state_mutex_;
    SandboxState state_ = SandboxState::Building;
    std::map<std::string, std::unique_ptr<NodeSlot>, std::less<>> nodes_;
};

/// Set of live instances keyed by sandbox id.
class SandboxRuntime {
public:
    explicit SandboxRuntime(CommandSink sink = {});

    /// Creates and boots an instance. Throws Error{DuplicateSandboxId}.
    std::shared_ptr<SandboxInstance> instantiate(std::shared_ptr<const compiler::SandboxPlan> plan, std::int64_t id);
    /// Creates an instance left in `building`; call boot() when ready.
    std::shared_ptr<SandboxInstance> create(std::shared_ptr<const compiler::SandboxPlan> plan, std::int64_t id);

    std::shared_ptr<SandboxInstance> find(std::int64_t id) const;
    void remove(std::int64_t id);
    std::vector<std::int64_t> ids() const;

private:
    CommandSink sink_;
    mutable std::shared_mutex mutex_;
    std::map<std::int64_t, std::shared_ptr<SandboxInstance>> instances_;
};

/// Escapes `"` and `\` for a syslog key="value" pair.
std::string quote_log_value(std::string_view value);

}  // namespace rangekit::runtime
