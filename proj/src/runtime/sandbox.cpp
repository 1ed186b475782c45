#include "rangekit/runtime/sandbox.hpp"

#include <algorithm>

#include "rangekit/core/error.hpp"

namespace rangekit::runtime {

std::string_view to_string(SandboxState state) {
    switch (state) {
    case SandboxState::Building: return "building";
    case SandboxState::Ready: return "ready";
    case SandboxState::Assigned: return "assigned";
    case SandboxState::Released: return "released";
    case SandboxState::Failed: return "failed";
    }
    return "unknown";
}

std::string_view to_string(ViewerRole role) {
    return role == ViewerRole::Instructor ? "instructor" : "trainee";
}

SandboxState parse_sandbox_state(std::string_view text) {
    for (auto s : {SandboxState::Building, SandboxState::Ready, SandboxState::Assigned, SandboxState::Released,
                   SandboxState::Failed}) {
        if (to_string(s) == text) return s;
    }
    throw Error(ErrorCode::InvalidValue, "unknown sandbox state '" + std::string(text) + "'");
}

bool can_transition(SandboxState from, SandboxState to) {
    if (to == SandboxState::Failed) return from != SandboxState::Failed;
    switch (from) {
    case SandboxState::Building: return to == SandboxState::Ready;
    case SandboxState::Ready: return to == SandboxState::Assigned;
    case SandboxState::Assigned: return to == SandboxState::Released;
    default: return false;
    }
}

std::string quote_log_value(std::string_view value) {
    std::string out = "\"";
    for (char c : value) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    out += '"';
    return out;
}

std::string CommandEvent::to_syslog_line(UtcOffset zone) const {
    return format_log_timestamp(timestamp, zone) + " username=" + quote_log_value(username) + " " + hostname +
           " src=" + quote_log_value(host_ip.to_string()) + " wd=" + quote_log_value(wd) +
           " cmd=" + quote_log_value(cmd) + " cmd_type=" + quote_log_value(cmd_type) +
           " uid=" + quote_log_value(std::to_string(sandbox_id));
}

bool TopologyView::has_node(std::string_view name) const {
    return std::any_of(nodes.begin(), nodes.end(), [&](const ViewNode& n) { return n.name == name; });
}

nlohmann::json TopologyView::to_json() const {
    nlohmann::json j{{"sandbox_id", sandbox_id}, {"role", std::string(to_string(role))}};
    j["nodes"] = nlohmann::json::array();
    for (const auto& n : nodes) {
        j["nodes"].push_back({{"name", n.name},
                              {"type", std::string(compiler::to_string(n.role))},
                              {"hidden", n.hidden},
                              {"running", n.running}});
    }
    j["networks"] = nlohmann::json::array();
    for (const auto& n : networks) {
        j["networks"].push_back({{"name", n.name}, {"cidr", n.prefix.to_string()}, {"transit", n.transit}});
    }
    j["links"] = nlohmann::json::array();
    for (const auto& l : links) {
        j["links"].push_back({{"node", l.node}, {"network", l.network}, {"ip", l.ip.to_string()}});
    }
    return j;
}

SandboxInstance::SandboxInstance(std::int64_t id, std::shared_ptr<const compiler::SandboxPlan> plan, CommandSink sink)
    : id_(id), plan_(std::move(plan)), sink_(std::move(sink)) {
    if (id_ <= 0) throw Error(ErrorCode::InvalidValue, "sandbox id must be positive");
    for (const auto& node : plan_->nodes) nodes_.emplace(node.name, std::make_unique<NodeSlot>());
}

SandboxState SandboxInstance::state() const {
    std::lock_guard lock(state_mutex_);
    return state_;
}

void SandboxInstance::transition(SandboxState to) {
    std::lock_guard lock(state_mutex_);
    if (!can_transition(state_, to)) {
        throw Error(ErrorCode::InvalidTransition, "sandbox " + std::to_string(id_) + " cannot go from " +
                                                      std::string(to_string(state_)) + " to " +
                                                      std::string(to_string(to)));
    }
    state_ = to;
    if (to == SandboxState::Released || to == SandboxState::Failed) {
        for (auto& [name, s] : nodes_) {
            std::lock_guard node_lock(s->mutex);
            s->state.running = false;
            s->state.users.clear();
        }
    }
}

void SandboxInstance::boot() {
    std::lock_guard lock(state_mutex_);
    if (!can_transition(state_, SandboxState::Ready)) {
        throw Error(ErrorCode::InvalidTransition, "sandbox " + std::to_string(id_) + " is " +
                                                      std::string(to_string(state_)) + ", not building");
    }
    for (auto& [name, s] : nodes_) {
        std::lock_guard node_lock(s->mutex);
        s->state.running = true;
    }
    state_ = SandboxState::Ready;
}

SandboxInstance::NodeSlot& SandboxInstance::slot(std::string_view name) const {
    auto it = nodes_.find(name);
    if (it == nodes_.end()) throw Error(ErrorCode::UnknownNode, "no node '" + std::string(name) + "'");
    return *it->second;
}

const compiler::NodePlan& SandboxInstance::visible_node(std::string_view name, ViewerRole role) const {
    const auto* node = plan_->find_node(name);
    if (!node || (node->hidden && role == ViewerRole::Trainee)) {
        throw Error(ErrorCode::UnknownNode, "no node '" + std::string(name) + "'");
    }
    return *node;
}

CommandEvent SandboxInstance::execute_command(const CommandRequest& request, Timestamp now) {
    const auto& node = visible_node(request.node, request.role);
    if (request.command.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw Error(ErrorCode::EmptyCommand, "command is empty");
    }
    if (request.user.empty()) throw Error(ErrorCode::InvalidValue, "user is empty");
    auto& s = slot(node.name);
    std::lock_guard lock(s.mutex);
    if (!s.state.running) throw Error(ErrorCode::NodeNotRunning, "node '" + node.name + "' is not running");
    s.state.users.insert(request.user);

    CommandEvent event;
    event.timestamp = now;
    event.username = request.user;
    event.hostname = node.name;
    event.host_ip = node.interfaces.empty() ? Ipv4Address{} : node.interfaces.front().ip;
    event.wd = request.working_dir;
    event.cmd = request.command;
    event.cmd_type = request.cmd_type.empty() ? "bash" : request.cmd_type;
    event.sandbox_id = id_;
    if (sink_) sink_(event);
    return event;
}

void SandboxInstance::set_running(std::string_view node, bool running) {
    auto& s = slot(node);
    std::lock_guard lock(s.mutex);
    s.state.running = running;
    if (!running) s.state.users.clear();
}

NodeState SandboxInstance::node_state(std::string_view node) const {
    auto& s = slot(node);
    std::lock_guard lock(s.mutex);
    return s.state;
}

TopologyView SandboxInstance::topology_view(ViewerRole role) const {
    TopologyView view;
    view.sandbox_id = id_;
    view.role = role;
    std::set<std::string> used_networks;
    for (const auto& node : plan_->nodes) {
        if (node.hidden && role == ViewerRole::Trainee) continue;
        view.nodes.push_back({node.name, node.role, node.hidden, node_state(node.name).running});
        for (const auto& iface : node.interfaces) {
            view.links.push_back({node.name, iface.network, iface.ip});
            used_networks.insert(iface.network);
        }
    }
    for (const auto& net : plan_->networks) {
        if (role == ViewerRole::Instructor || used_networks.count(net.name)) view.networks.push_back(net);
    }
    return view;
}

SandboxRuntime::SandboxRuntime(CommandSink sink) : sink_(std::move(sink)) {}

std::shared_ptr<SandboxInstance> SandboxRuntime::create(std::shared_ptr<const compiler::SandboxPlan> plan,
                                                        std::int64_t id) {
    std::unique_lock lock(mutex_);
    if (instances_.count(id)) {
        throw Error(ErrorCode::DuplicateSandboxId, "sandbox " + std::to_string(id) + " already exists");
    }
    auto instance = std::make_shared<SandboxInstance>(id, std::move(plan), sink_);
    instances_.emplace(id, instance);
    return instance;
}

std::shared_ptr<SandboxInstance> SandboxRuntime::instantiate(std::shared_ptr<const compiler::SandboxPlan> plan,
                                                             std::int64_t id) {
    auto instance = create(std::move(plan), id);
    instance->boot();
    return instance;
}

std::shared_ptr<SandboxInstance> SandboxRuntime::find(std::int64_t id) const {
    std::shared_lock lock(mutex_);
    auto it = instances_.find(id);
    return it == instances_.end() ? nullptr : it->second;
}

void SandboxRuntime::remove(std::int64_t id) {
    std::unique_lock lock(mutex_);
    instances_.erase(id);
}

std::vector<std::int64_t> SandboxRuntime::ids() const {
    std::shared_lock lock(mutex_);
    std::vector<std::int64_t> out;
    for (const auto& [id, _] : instances_) out.push_back(id);
    return out;
}

}  // namespace rangekit::runtime
