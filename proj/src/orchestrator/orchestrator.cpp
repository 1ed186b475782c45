#include "rangekit/orchestrator/orchestrator.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "rangekit/analytics/command_log.hpp"
#include "rangekit/analytics/progress.hpp"
#include "rangekit/compiler/compiler.hpp"
#include "rangekit/compiler/render.hpp"
#include "rangekit/core/error.hpp"
#include "rangekit/definition/provisioning.hpp"
#include "rangekit/definition/topology.hpp"
#include "rangekit/definition/training.hpp"
#include "rangekit/definition/validation.hpp"

namespace rangekit::orchestrator {

using runtime::SandboxState;

namespace {

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::string avatar_for(std::int64_t user_ref_id) {
    static const char* kAnimals[] = {"otter", "lynx", "heron", "bison", "gecko", "koala", "marten", "puffin",
                                     "quokka", "stoat", "tapir", "wombat"};
    auto h = mix(static_cast<std::uint64_t>(user_ref_id));
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s-%04x", kAnimals[h % 12], static_cast<unsigned>((h >> 8) & 0xffff));
    return buf;
}

std::string invalid_definition_message(const std::string& what, const definition::ValidationReport& report) {
    std::string msg = what + " has " + std::to_string(report.error_count()) + " error(s)";
    for (const auto& f : report.findings) {
        if (f.severity == definition::Severity::Error) msg += "; " + f.code + " " + f.node + ": " + f.message;
    }
    return msg;
}

}  // namespace

std::string_view to_string(Role role) {
    switch (role) {
    case Role::Trainee: return "trainee";
    case Role::Instructor: return "instructor";
    case Role::Superuser: return "superuser";
    }
    return "unknown";
}

Role parse_role(std::string_view text) {
    for (auto r : {Role::Trainee, Role::Instructor, Role::Superuser}) {
        if (to_string(r) == text) return r;
    }
    throw Error(ErrorCode::InvalidValue, "unknown role '" + std::string(text) + "'");
}

nlohmann::ordered_json SandboxDefinitionInfo::to_json() const {
    nlohmann::ordered_json j{{"id", id}, {"kind", "sandbox"}, {"name", name}, {"location", location}};
    if (!commit.empty()) j["commit"] = commit;
    j["has_provisioning"] = provisioning_yaml.has_value();
    return j;
}

nlohmann::ordered_json TrainingDefinitionInfo::to_json() const {
    nlohmann::ordered_json j{{"id", id}, {"kind", "training"}, {"title", title}};
    j["phases"] = nlohmann::ordered_json::array();
    for (const auto* p : definition->phases_in_order()) {
        j["phases"].push_back({{"order", p->order}, {"title", p->title}, {"type", std::string(to_string(p->kind()))}});
    }
    return j;
}

std::size_t PoolInfo::count(SandboxState state) const {
    return static_cast<std::size_t>(
        std::count_if(sandboxes.begin(), sandboxes.end(), [&](const SandboxInfo& s) { return s.state == state; }));
}

nlohmann::ordered_json PoolInfo::to_json() const {
    nlohmann::ordered_json j{{"id", id}, {"definition_id", definition_id}, {"size", size}};
    j["sandboxes"] = nlohmann::ordered_json::array();
    for (const auto& s : sandboxes) {
        nlohmann::ordered_json sj{{"id", s.id}, {"state", std::string(runtime::to_string(s.state))}};
        if (s.run_id) sj["training_run_id"] = *s.run_id;
        j["sandboxes"].push_back(std::move(sj));
    }
    return j;
}

nlohmann::ordered_json InstanceInfo::to_json(bool with_token) const {
    nlohmann::ordered_json j{{"id", id},
                             {"training_definition_id", training_definition_id},
                             {"pool_id", pool_id},
                             {"start", format_iso8601(start, UtcOffset{})},
                             {"end", format_iso8601(end, UtcOffset{})},
                             {"closed", closed}};
    if (with_token) j["access_token"] = access_token;
    return j;
}

Orchestrator::Orchestrator(OrchestratorConfig config, const std::filesystem::path& database)
    : config_(std::move(config)),
      db_(std::make_unique<Database>(database)),
      tokens_(config_.token_seed, config_.token_words),
      runtime_([this](const runtime::CommandEvent& e) { publish_command(e); }),
      engine_({}, [this](const training::TrainingRun& run, const training::EventList& events) {
          persist_run(run, events);
      }) {
    auto journal = config_.analytics_journal;
    if (!journal && !database.empty()) journal = database.string() + ".analytics.jsonl";
    analytics_ = journal && !journal->empty() ? std::make_unique<analytics::EventStore>(*journal)
                                              : std::make_unique<analytics::EventStore>();
    create_schema();
    restore();
    start_workers();
}

Orchestrator::~Orchestrator() {
    {
        std::lock_guard lock(build_mutex_);
        stopping_ = true;
    }
    build_cv_.notify_all();
    for (auto& w : workers_) w.join();
}

void Orchestrator::create_schema() {
    db_->exec(R"(
        CREATE TABLE IF NOT EXISTS sandbox_definitions(
            id INTEGER PRIMARY KEY AUTOINCREMENT, name TEXT NOT NULL, location TEXT NOT NULL,
            commit_ref TEXT NOT NULL, topology TEXT NOT NULL, provisioning TEXT);
        CREATE TABLE IF NOT EXISTS training_definitions(
            id INTEGER PRIMARY KEY AUTOINCREMENT, title TEXT NOT NULL, body TEXT NOT NULL);
        CREATE TABLE IF NOT EXISTS pools(
            id INTEGER PRIMARY KEY AUTOINCREMENT, definition_id INTEGER NOT NULL REFERENCES sandbox_definitions(id),
            size INTEGER NOT NULL);
        CREATE TABLE IF NOT EXISTS sandboxes(
            id INTEGER PRIMARY KEY AUTOINCREMENT, pool_id INTEGER NOT NULL REFERENCES pools(id),
            state TEXT NOT NULL, user_ref_id INTEGER, run_id INTEGER, instance_id INTEGER);
        CREATE TABLE IF NOT EXISTS instances(
            id INTEGER PRIMARY KEY AUTOINCREMENT, training_definition_id INTEGER NOT NULL,
            pool_id INTEGER NOT NULL REFERENCES pools(id), start_ms INTEGER NOT NULL, end_ms INTEGER NOT NULL,
            token TEXT NOT NULL, closed INTEGER NOT NULL DEFAULT 0);
        CREATE TABLE IF NOT EXISTS users(user_ref_id INTEGER PRIMARY KEY, name TEXT NOT NULL);
        CREATE TABLE IF NOT EXISTS runs(
            id INTEGER PRIMARY KEY, instance_id INTEGER NOT NULL REFERENCES instances(id),
            user_ref_id INTEGER NOT NULL, sandbox_id INTEGER NOT NULL REFERENCES sandboxes(id),
            state TEXT NOT NULL, body TEXT NOT NULL, UNIQUE(instance_id, user_ref_id));
        CREATE TABLE IF NOT EXISTS events(
            seq INTEGER PRIMARY KEY AUTOINCREMENT, run_id INTEGER NOT NULL, body TEXT NOT NULL);
    )");
}

void Orchestrator::restore() {
    auto lock = db_->lock();
    {
        auto st = db_->prepare("SELECT id, name, location, commit_ref, topology, provisioning FROM sandbox_definitions");
        while (st.step()) {
            SandboxDefinitionInfo d;
            d.id = st.int_at(0);
            d.name = st.text_at(1);
            d.location = st.text_at(2);
            d.commit = st.text_at(3);
            d.topology_yaml = st.text_at(4);
            if (!st.is_null(5)) d.provisioning_yaml = st.text_at(5);
            sandbox_definitions_[d.id] = std::move(d);
        }
    }
    {
        auto st = db_->prepare("SELECT id, title, body FROM training_definitions");
        while (st.step()) {
            auto def = std::make_shared<const definition::TrainingDefinition>(
                definition::parse_training(st.text_at(2)).value);
            training_definitions_[st.int_at(0)] = {st.int_at(0), st.text_at(1), def};
        }
    }
    {
        auto st = db_->prepare("SELECT id, definition_id, size FROM pools");
        while (st.step()) pools_[st.int_at(0)] = {st.int_at(1), static_cast<int>(st.int_at(2)), {}};
    }
    std::vector<std::int64_t> rebuild;
    {
        auto st = db_->prepare("SELECT id, pool_id, state, user_ref_id, run_id, instance_id FROM sandboxes ORDER BY id");
        while (st.step()) {
            SandboxInfo s;
            s.id = st.int_at(0);
            s.pool_id = st.int_at(1);
            s.state = runtime::parse_sandbox_state(st.text_at(2));
            if (!st.is_null(3)) s.user_ref_id = st.int_at(3);
            if (!st.is_null(4)) s.run_id = st.int_at(4);
            if (!st.is_null(5)) s.instance_id = st.int_at(5);
            pools_.at(s.pool_id).sandbox_ids.push_back(s.id);

            auto instance = runtime_.create(plan_for(pools_.at(s.pool_id).definition_id), s.id);
            switch (s.state) {
            case SandboxState::Building: rebuild.push_back(s.id); break;
            case SandboxState::Failed: instance->transition(SandboxState::Failed); break;
            default:
                instance->boot();
                if (s.state != SandboxState::Ready) instance->transition(SandboxState::Assigned);
                if (s.state == SandboxState::Released) instance->transition(SandboxState::Released);
            }
            sandboxes_[s.id] = s;
        }
    }
    {
        auto st = db_->prepare("SELECT id, training_definition_id, pool_id, start_ms, end_ms, token, closed FROM instances");
        while (st.step()) {
            InstanceInfo i{st.int_at(0), st.int_at(1), st.int_at(2), from_epoch_ms(st.int_at(3)),
                           from_epoch_ms(st.int_at(4)), st.text_at(5), st.int_at(6) != 0};
            if (!i.closed) tokens_in_use_[i.access_token] = i.id;
            instances_[i.id] = std::move(i);
        }
    }
    {
        auto st = db_->prepare("SELECT r.id, r.instance_id, r.user_ref_id, r.sandbox_id, r.body, i.training_definition_id "
                               "FROM runs r JOIN instances i ON i.id = r.instance_id ORDER BY r.id");
        while (st.step()) {
            auto id = st.int_at(0);
            auto def = training_definitions_.at(st.int_at(5)).definition;
            engine_.adopt(training::TrainingRun::from_json(nlohmann::json::parse(st.text_at(4)), def));
            run_owners_[id] = {st.int_at(1), st.int_at(2), st.int_at(3)};
            run_by_user_[{st.int_at(1), st.int_at(2)}] = id;
            next_run_id_ = std::max(next_run_id_, id + 1);
        }
    }
    {
        // Anything committed but missing from the analytics journal is re-ingested;
        // the (source, offset) key skips what is already there.
        auto st = db_->prepare("SELECT seq, body FROM events ORDER BY seq");
        while (st.step()) {
            analytics_->ingest(nlohmann::ordered_json::parse(st.text_at(1)), "engine",
                               static_cast<std::uint64_t>(st.int_at(0)));
        }
    }
    for (auto id : rebuild) build_queue_.push_back(id);
}

void Orchestrator::start_workers() {
    for (unsigned i = 0; i < std::max(1u, config_.build_workers); ++i) workers_.emplace_back([this] { build_loop(); });
}

void Orchestrator::enqueue_build(std::int64_t sandbox_id) {
    {
        std::lock_guard lock(build_mutex_);
        build_queue_.push_back(sandbox_id);
    }
    build_cv_.notify_one();
}

void Orchestrator::build_loop() {
    for (;;) {
        std::int64_t id = 0;
        {
            std::unique_lock lock(build_mutex_);
            build_cv_.wait(lock, [&] { return stopping_ || !build_queue_.empty(); });
            if (stopping_) return;
            id = build_queue_.front();
            build_queue_.pop_front();
        }
        if (config_.build_delay.count() > 0) {
            std::unique_lock lock(build_mutex_);
            if (build_cv_.wait_for(lock, config_.build_delay, [&] { return stopping_; })) return;
        }
        auto instance = runtime_.find(id);
        if (!instance) continue;
        double roll = static_cast<double>(mix(config_.build_seed ^ mix(static_cast<std::uint64_t>(id))) >> 11) * 0x1.0p-53;
        try {
            if (roll < config_.build_failure_rate) {
                instance->transition(SandboxState::Failed);
                set_sandbox_state(id, SandboxState::Failed);
            } else {
                instance->boot();
                set_sandbox_state(id, SandboxState::Ready);
            }
        } catch (const Error&) {
            // The sandbox stays building and is retried after a restart.
        }
    }
}

void Orchestrator::set_sandbox_state(std::int64_t sandbox_id, SandboxState state) {
    {
        std::unique_lock lock(catalog_mutex_);
        auto dblock = db_->lock();
        db_->prepare("UPDATE sandboxes SET state = ? WHERE id = ?").bind(1, runtime::to_string(state)).bind(2, sandbox_id).run();
        sandboxes_.at(sandbox_id).state = state;
    }
    settled_.notify_all();
}

void Orchestrator::require_staff(const Principal& who) const {
    if (!who.is_staff()) throw Error(ErrorCode::Forbidden, "instructor role required");
}

std::shared_ptr<const compiler::SandboxPlan> Orchestrator::plan_for(std::int64_t definition_id) const {
    if (auto it = plans_.find(definition_id); it != plans_.end()) return it->second;
    auto it = sandbox_definitions_.find(definition_id);
    if (it == sandbox_definitions_.end()) {
        throw Error(ErrorCode::DefinitionNotFound, "no sandbox definition " + std::to_string(definition_id));
    }
    auto topo = definition::parse_topology(it->second.topology_yaml).value;
    std::optional<definition::ProvisioningDefinition> prov;
    if (it->second.provisioning_yaml) prov = definition::parse_provisioning(*it->second.provisioning_yaml, topo).value;
    compiler::CompileOptions options;
    options.flavors = config_.flavors;
    auto plan = std::make_shared<const compiler::SandboxPlan>(compiler::compile(topo, prov, options));
    plans_[definition_id] = plan;
    return plan;
}

SandboxDefinitionInfo Orchestrator::store_sandbox_definition(SandboxSource source, std::string name) {
    definition::TopologyDefinition topo;
    std::optional<definition::ProvisioningDefinition> prov;
    try {
        topo = definition::parse_topology(source.topology_yaml).value;
        auto report = definition::validate_topology(topo, config_.flavors);
        if (!report.deployable()) throw Error(ErrorCode::InvalidDefinition, invalid_definition_message("topology", report));
        if (source.provisioning_yaml) prov = definition::parse_provisioning(*source.provisioning_yaml, topo).value;
        compiler::CompileOptions options;
        options.flavors = config_.flavors;
        compiler::compile(topo, prov, options);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidDefinition) throw;
        throw Error(ErrorCode::InvalidDefinition, std::string(to_string(e.code())) + ": " + e.what());
    }
    if (name.empty()) name = topo.name;

    std::unique_lock lock(catalog_mutex_);
    Database::Transaction tx(*db_);
    auto st = db_->prepare("INSERT INTO sandbox_definitions(name, location, commit_ref, topology, provisioning) VALUES(?,?,?,?,?)");
    st.bind(1, name).bind(2, source.location).bind(3, source.commit).bind(4, source.topology_yaml);
    if (source.provisioning_yaml) st.bind(5, *source.provisioning_yaml);
    else st.bind(5, nullptr);
    st.run();
    SandboxDefinitionInfo info{db_->last_insert_id(), name, source.location, source.commit, source.topology_yaml,
                               source.provisioning_yaml};
    tx.commit();
    sandbox_definitions_[info.id] = info;
    return info;
}

SandboxDefinitionInfo Orchestrator::add_sandbox_definition(const Principal& who, SandboxSource source, std::string name) {
    require_staff(who);
    return store_sandbox_definition(std::move(source), std::move(name));
}

SandboxDefinitionInfo Orchestrator::import_sandbox_definition(const Principal& who, const std::string& location,
                                                              const std::optional<std::string>& ref,
                                                              const std::filesystem::path& subdir) {
    require_staff(who);
    auto source = is_repository_url(location) ? fetch_repository(location, ref, subdir, config_.workdir)
                                              : load_directory(std::filesystem::path(location) / subdir);
    return store_sandbox_definition(std::move(source), {});
}

TrainingDefinitionInfo Orchestrator::add_training_definition(const Principal& who, const std::string& json_text) {
    require_staff(who);
    std::shared_ptr<const definition::TrainingDefinition> def;
    try {
        def = std::make_shared<const definition::TrainingDefinition>(definition::parse_training(json_text).value);
    } catch (const Error& e) {
        throw Error(ErrorCode::InvalidDefinition, std::string(to_string(e.code())) + ": " + e.what());
    }
    auto report = definition::validate_training(*def);
    if (!report.deployable()) throw Error(ErrorCode::InvalidDefinition, invalid_definition_message("training", report));

    std::unique_lock lock(catalog_mutex_);
    Database::Transaction tx(*db_);
    db_->prepare("INSERT INTO training_definitions(title, body) VALUES(?,?)").bind(1, def->title).bind(2, json_text).run();
    TrainingDefinitionInfo info{db_->last_insert_id(), def->title, def};
    tx.commit();
    training_definitions_[info.id] = info;
    return info;
}

SandboxDefinitionInfo Orchestrator::sandbox_definition(std::int64_t id) const {
    std::shared_lock lock(catalog_mutex_);
    auto it = sandbox_definitions_.find(id);
    if (it == sandbox_definitions_.end()) throw Error(ErrorCode::DefinitionNotFound, "no sandbox definition " + std::to_string(id));
    return it->second;
}

TrainingDefinitionInfo Orchestrator::training_definition(std::int64_t id) const {
    std::shared_lock lock(catalog_mutex_);
    auto it = training_definitions_.find(id);
    if (it == training_definitions_.end()) throw Error(ErrorCode::DefinitionNotFound, "no training definition " + std::to_string(id));
    return it->second;
}

PoolInfo Orchestrator::create_pool(const Principal& who, std::int64_t definition_id, int size) {
    require_staff(who);
    if (size < 1) throw Error(ErrorCode::InvalidValue, "pool size must be at least 1");
    std::vector<std::int64_t> ids;
    std::shared_ptr<const compiler::SandboxPlan> plan;
    PoolInfo info;
    {
        std::unique_lock lock(catalog_mutex_);
        try {
            plan = plan_for(definition_id);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::DefinitionNotFound) throw;
            throw Error(ErrorCode::InvalidDefinition, e.what());
        }
        if (config_.quota_vcpus) {
            long long in_use = 0;
            for (const auto& [sid, s] : sandboxes_) {
                if (s.state == SandboxState::Released || s.state == SandboxState::Failed) continue;
                in_use += compiler::render_cloud_plan(*plan_for(pools_.at(s.pool_id).definition_id), 1).total.vcpus;
            }
            auto wanted = compiler::render_cloud_plan(*plan, size).total.vcpus;
            if (in_use + wanted > *config_.quota_vcpus) {
                throw Error(ErrorCode::InsufficientResources,
                            "pool needs " + std::to_string(wanted) + " vCPUs, " + std::to_string(in_use) + " of " +
                                std::to_string(*config_.quota_vcpus) + " already in use");
            }
        }
        Database::Transaction tx(*db_);
        db_->prepare("INSERT INTO pools(definition_id, size) VALUES(?,?)").bind(1, definition_id).bind(2, std::int64_t{size}).run();
        info.id = db_->last_insert_id();
        info.definition_id = definition_id;
        info.size = size;
        for (int i = 0; i < size; ++i) {
            db_->prepare("INSERT INTO sandboxes(pool_id, state) VALUES(?, 'building')").bind(1, info.id).run();
            ids.push_back(db_->last_insert_id());
        }
        tx.commit();
        pools_[info.id] = {definition_id, size, ids};
        for (auto id : ids) {
            runtime_.create(plan, id);
            SandboxInfo s;
            s.id = id;
            s.pool_id = info.id;
            sandboxes_[id] = s;
            info.sandboxes.push_back(s);
        }
    }
    for (auto id : ids) enqueue_build(id);
    return info;
}

PoolInfo Orchestrator::pool(std::int64_t id) const {
    std::shared_lock lock(catalog_mutex_);
    auto it = pools_.find(id);
    if (it == pools_.end()) throw Error(ErrorCode::PoolNotFound, "no pool " + std::to_string(id));
    PoolInfo info{id, it->second.definition_id, it->second.size, {}};
    for (auto sid : it->second.sandbox_ids) info.sandboxes.push_back(sandboxes_.at(sid));
    return info;
}

bool Orchestrator::wait_pool_settled(std::int64_t id, std::chrono::milliseconds timeout) const {
    std::shared_lock lock(catalog_mutex_);
    auto it = pools_.find(id);
    if (it == pools_.end()) throw Error(ErrorCode::PoolNotFound, "no pool " + std::to_string(id));
    return settled_.wait_for(lock, timeout, [&] {
        return std::none_of(it->second.sandbox_ids.begin(), it->second.sandbox_ids.end(),
                            [&](std::int64_t sid) { return sandboxes_.at(sid).state == SandboxState::Building; });
    });
}

InstanceInfo Orchestrator::create_instance(const Principal& who, std::int64_t training_definition_id,
                                           std::int64_t pool_id, Timestamp start, Timestamp end) {
    require_staff(who);
    std::unique_lock lock(catalog_mutex_);
    if (!training_definitions_.count(training_definition_id)) {
        throw Error(ErrorCode::DefinitionNotFound, "no training definition " + std::to_string(training_definition_id));
    }
    if (!pools_.count(pool_id)) throw Error(ErrorCode::PoolNotFound, "no pool " + std::to_string(pool_id));
    if (!(start < end)) throw Error(ErrorCode::InvalidWindow, "start must be before end");
    std::string token;
    do {
        token = tokens_.next();
    } while (tokens_in_use_.count(token));

    Database::Transaction tx(*db_);
    db_->prepare("INSERT INTO instances(training_definition_id, pool_id, start_ms, end_ms, token) VALUES(?,?,?,?,?)")
        .bind(1, training_definition_id)
        .bind(2, pool_id)
        .bind(3, to_epoch_ms(start))
        .bind(4, to_epoch_ms(end))
        .bind(5, token)
        .run();
    InstanceInfo info{db_->last_insert_id(), training_definition_id, pool_id, start, end, token, false};
    tx.commit();
    instances_[info.id] = info;
    tokens_in_use_[token] = info.id;
    return info;
}

InstanceInfo Orchestrator::instance(std::int64_t id) const {
    std::shared_lock lock(catalog_mutex_);
    auto it = instances_.find(id);
    if (it == instances_.end()) throw Error(ErrorCode::InstanceNotFound, "no instance " + std::to_string(id));
    return it->second;
}

JoinResult Orchestrator::join(const std::string& access_token, const Principal& who, Timestamp now) {
    std::lock_guard assign(assign_mutex_);
    InstanceInfo inst;
    std::shared_ptr<const definition::TrainingDefinition> def;
    std::optional<std::int64_t> existing;
    std::optional<std::int64_t> sandbox_id;
    {
        std::shared_lock lock(catalog_mutex_);
        auto tok = tokens_in_use_.find(access_token);
        if (tok == tokens_in_use_.end()) throw Error(ErrorCode::InvalidToken, "unknown access token");
        inst = instances_.at(tok->second);
        if (now < inst.start || now > inst.end) {
            throw Error(ErrorCode::OutsideWindow, "instance " + std::to_string(inst.id) + " is not open at " +
                                                      format_iso8601(now, UtcOffset{}));
        }
        if (auto it = run_by_user_.find({inst.id, who.user_ref_id}); it != run_by_user_.end()) {
            existing = it->second;
        } else {
            for (auto sid : pools_.at(inst.pool_id).sandbox_ids) {
                if (sandboxes_.at(sid).state == SandboxState::Ready) {
                    sandbox_id = sid;
                    break;
                }
            }
            if (!sandbox_id) throw Error(ErrorCode::PoolExhausted, "no ready sandbox in pool " + std::to_string(inst.pool_id));
            def = training_definitions_.at(inst.training_definition_id).definition;
        }
    }
    if (existing) {
        return {engine_.snapshot(*existing), run_owners_.at(*existing).sandbox_id, false, ++commit_seq_};
    }

    training::RunIds ids{next_run_id_, who.user_ref_id, inst.id, inst.training_definition_id, *sandbox_id, inst.pool_id};
    training::EventList events;
    auto run = training::TrainingRun::start(def, ids, now, events);
    std::vector<std::pair<std::uint64_t, nlohmann::ordered_json>> stored;
    {
        std::unique_lock lock(catalog_mutex_);
        Database::Transaction tx(*db_);
        auto upd = db_->prepare("UPDATE sandboxes SET state = 'assigned', user_ref_id = ?, run_id = ?, instance_id = ? "
                                "WHERE id = ? AND state = 'ready'");
        upd.bind(1, who.user_ref_id).bind(2, ids.training_run_id).bind(3, inst.id).bind(4, *sandbox_id).run();
        db_->prepare("INSERT OR REPLACE INTO users(user_ref_id, name) VALUES(?,?)").bind(1, who.user_ref_id).bind(2, who.name).run();
        db_->prepare("INSERT INTO runs(id, instance_id, user_ref_id, sandbox_id, state, body) VALUES(?,?,?,?,?,?)")
            .bind(1, ids.training_run_id)
            .bind(2, inst.id)
            .bind(3, who.user_ref_id)
            .bind(4, *sandbox_id)
            .bind(5, training::to_string(run.state()))
            .bind(6, run.to_json().dump())
            .run();
        for (const auto& e : events) {
            auto body = e.to_json();
            db_->prepare("INSERT INTO events(run_id, body) VALUES(?,?)").bind(1, ids.training_run_id).bind(2, body.dump()).run();
            stored.emplace_back(static_cast<std::uint64_t>(db_->last_insert_id()), std::move(body));
        }
        tx.commit();

        auto& s = sandboxes_.at(*sandbox_id);
        s.state = SandboxState::Assigned;
        s.user_ref_id = who.user_ref_id;
        s.run_id = ids.training_run_id;
        s.instance_id = inst.id;
        run_owners_[ids.training_run_id] = {inst.id, who.user_ref_id, *sandbox_id};
        run_by_user_[{inst.id, who.user_ref_id}] = ids.training_run_id;
        ++next_run_id_;
    }
    runtime_.find(*sandbox_id)->transition(SandboxState::Assigned);
    engine_.adopt(run);
    for (const auto& [seq, body] : stored) analytics_->ingest(body, "engine", seq);
    return {run, *sandbox_id, true, ++commit_seq_};
}

void Orchestrator::persist_run(const training::TrainingRun& run, const training::EventList& events) {
    std::vector<std::pair<std::uint64_t, nlohmann::ordered_json>> stored;
    {
        Database::Transaction tx(*db_);
        db_->prepare("UPDATE runs SET state = ?, body = ? WHERE id = ?")
            .bind(1, training::to_string(run.state()))
            .bind(2, run.to_json().dump())
            .bind(3, run.ids().training_run_id)
            .run();
        for (const auto& e : events) {
            auto body = e.to_json();
            db_->prepare("INSERT INTO events(run_id, body) VALUES(?,?)").bind(1, run.ids().training_run_id).bind(2, body.dump()).run();
            stored.emplace_back(static_cast<std::uint64_t>(db_->last_insert_id()), std::move(body));
        }
        tx.commit();
    }
    for (const auto& [seq, body] : stored) analytics_->ingest(body, "engine", seq);
}

void Orchestrator::publish_command(const runtime::CommandEvent& event) {
    // Same path as a sandbox logger: render the log line, then parse it back.
    auto entry = analytics::parse_syslog_line(event.to_syslog_line(config_.zone), config_.zone);
    analytics_->ingest(entry, "sandbox:" + std::to_string(event.sandbox_id));
}

Orchestrator::RunOwner Orchestrator::owner_of(std::int64_t run_id) const {
    std::shared_lock lock(catalog_mutex_);
    auto it = run_owners_.find(run_id);
    if (it == run_owners_.end()) throw Error(ErrorCode::UnknownRun, "no run " + std::to_string(run_id));
    return it->second;
}

Orchestrator::RunOwner Orchestrator::authorize_run(std::int64_t run_id, const Principal& who, bool mutate) const {
    auto owner = owner_of(run_id);
    bool is_owner = owner.user_ref_id == who.user_ref_id && who.role == Role::Trainee;
    if (mutate ? !is_owner : !(is_owner || who.is_staff())) {
        throw Error(ErrorCode::Forbidden, "run " + std::to_string(run_id) + " belongs to another trainee");
    }
    return owner;
}

void Orchestrator::expire_if_past(std::int64_t run_id, const RunOwner& owner, Timestamp now) {
    if (now <= instance(owner.instance_id).end) return;
    engine_.finish(run_id, now);
    throw Error(ErrorCode::RunFinished, "instance " + std::to_string(owner.instance_id) + " has ended");
}

training::Verdict Orchestrator::submit_answer(std::int64_t run_id, const Principal& who, std::string_view answer,
                                              Timestamp now) {
    auto owner = authorize_run(run_id, who, true);
    expire_if_past(run_id, owner, now);
    return engine_.submit_answer(run_id, answer, now);
}

std::string Orchestrator::reveal_hint(std::int64_t run_id, const Principal& who, int hint_order, Timestamp now) {
    auto owner = authorize_run(run_id, who, true);
    expire_if_past(run_id, owner, now);
    return engine_.reveal_hint(run_id, hint_order, now);
}

std::string Orchestrator::reveal_solution(std::int64_t run_id, const Principal& who, Timestamp now) {
    auto owner = authorize_run(run_id, who, true);
    expire_if_past(run_id, owner, now);
    return engine_.reveal_solution(run_id, now);
}

std::optional<int> Orchestrator::advance(std::int64_t run_id, const Principal& who, Timestamp now,
                                         std::vector<std::string> answers) {
    auto owner = authorize_run(run_id, who, true);
    expire_if_past(run_id, owner, now);
    return engine_.advance(run_id, now, std::move(answers));
}

training::TrainingRun Orchestrator::run(std::int64_t run_id, const Principal& who) const {
    authorize_run(run_id, who, false);
    return engine_.snapshot(run_id);
}

std::vector<training::TrainingRun> Orchestrator::runs() const {
    std::vector<training::TrainingRun> out;
    for (auto id : engine_.run_ids()) out.push_back(engine_.snapshot(id));
    return out;
}

runtime::TopologyView Orchestrator::run_topology(std::int64_t run_id, const Principal& who) const {
    auto owner = authorize_run(run_id, who, false);
    auto instance = runtime_.find(owner.sandbox_id);
    return instance->topology_view(who.is_staff() ? runtime::ViewerRole::Instructor : runtime::ViewerRole::Trainee);
}

runtime::CommandEvent Orchestrator::execute_command(std::int64_t run_id, const Principal& who, const std::string& node,
                                                    const std::string& working_dir, const std::string& command,
                                                    const std::string& cmd_type, Timestamp now) {
    auto owner = authorize_run(run_id, who, true);
    runtime::CommandRequest request{node, who.name.empty() ? "user" + std::to_string(who.user_ref_id) : who.name,
                                    working_dir.empty() ? "/" : working_dir, command, cmd_type,
                                    runtime::ViewerRole::Trainee};
    return runtime_.find(owner.sandbox_id)->execute_command(request, now);
}

std::uint64_t Orchestrator::release(const Principal& who, std::int64_t pool_id, std::int64_t sandbox_id) {
    require_staff(who);
    std::lock_guard assign(assign_mutex_);
    {
        std::unique_lock lock(catalog_mutex_);
        auto pool = pools_.find(pool_id);
        if (pool == pools_.end()) throw Error(ErrorCode::PoolNotFound, "no pool " + std::to_string(pool_id));
        auto it = sandboxes_.find(sandbox_id);
        if (it == sandboxes_.end() || it->second.pool_id != pool_id) {
            throw Error(ErrorCode::NotAssigned, "pool " + std::to_string(pool_id) + " has no sandbox " + std::to_string(sandbox_id));
        }
        if (it->second.state != SandboxState::Assigned) {
            throw Error(ErrorCode::NotAssigned, "sandbox " + std::to_string(sandbox_id) + " is " +
                                                    std::string(runtime::to_string(it->second.state)));
        }
        auto dblock = db_->lock();
        db_->prepare("UPDATE sandboxes SET state = 'released' WHERE id = ?").bind(1, sandbox_id).run();
        it->second.state = SandboxState::Released;
    }
    runtime_.find(sandbox_id)->transition(SandboxState::Released);
    return ++commit_seq_;
}

int Orchestrator::close_instance(const Principal& who, std::int64_t instance_id, Timestamp now, bool override_active) {
    require_staff(who);
    std::vector<std::int64_t> run_ids;
    std::vector<std::int64_t> to_release;
    std::int64_t pool_id = 0;
    {
        std::lock_guard assign(assign_mutex_);
        std::unique_lock lock(catalog_mutex_);
        auto it = instances_.find(instance_id);
        if (it == instances_.end()) throw Error(ErrorCode::InstanceNotFound, "no instance " + std::to_string(instance_id));
        if (now < it->second.end && !override_active) {
            throw Error(ErrorCode::InstanceActive, "instance " + std::to_string(instance_id) + " runs until " +
                                                       format_iso8601(it->second.end, UtcOffset{}));
        }
        if (!it->second.closed) {
            auto dblock = db_->lock();
            db_->prepare("UPDATE instances SET closed = 1 WHERE id = ?").bind(1, instance_id).run();
            it->second.closed = true;
            tokens_in_use_.erase(it->second.access_token);
        }
        pool_id = it->second.pool_id;
        for (const auto& [rid, owner] : run_owners_) {
            if (owner.instance_id == instance_id) run_ids.push_back(rid);
        }
        for (const auto& [sid, s] : sandboxes_) {
            if (s.instance_id == instance_id && s.state == SandboxState::Assigned) to_release.push_back(sid);
        }
    }
    int finished = 0;
    for (auto rid : run_ids) {
        if (engine_.snapshot(rid).state() == training::RunState::Finished) continue;
        engine_.finish(rid, now);
        ++finished;
    }
    for (auto sid : to_release) {
        try {
            release(who, pool_id, sid);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NotAssigned) throw;
        }
    }
    return finished;
}

nlohmann::ordered_json Orchestrator::instance_progress(const Principal& who, std::int64_t instance_id, bool privacy) const {
    require_staff(who);
    auto inst = instance(instance_id);
    auto def = training_definition(inst.training_definition_id);

    analytics::TimelineFilter filter;
    filter.instance_id = instance_id;
    auto summaries = analytics::summarize(analytics_->training_events(filter));

    std::map<std::int64_t, std::string> names;
    {
        auto lock = db_->lock();
        auto st = db_->prepare("SELECT u.user_ref_id, u.name FROM users u JOIN runs r ON r.user_ref_id = u.user_ref_id "
                               "WHERE r.instance_id = ?");
        st.bind(1, instance_id);
        while (st.step()) names[st.int_at(0)] = st.text_at(1);
    }

    nlohmann::ordered_json j = inst.to_json(false);
    j["privacy"] = privacy;
    j["phases"] = def.to_json()["phases"];
    j["trainees"] = nlohmann::ordered_json::array();
    std::shared_lock lock(catalog_mutex_);
    for (const auto& s : summaries) {
        auto row = s.to_json();
        if (privacy) {
            row.erase("user_ref_id");
            row["avatar"] = avatar_for(s.ids.user_ref_id);
        } else {
            row["name"] = names.count(s.ids.user_ref_id) ? names[s.ids.user_ref_id] : std::string();
        }
        if (auto it = sandboxes_.find(s.ids.sandbox_id); it != sandboxes_.end()) {
            row["sandbox_state"] = std::string(runtime::to_string(it->second.state));
        }
        j["trainees"].push_back(std::move(row));
    }
    return j;
}

analytics::IngestResult Orchestrator::ingest_event(const Principal& who, const nlohmann::ordered_json& payload,
                                                   const std::string& source, std::optional<std::uint64_t> offset) {
    require_staff(who);
    if (source == "engine" || source.rfind("sandbox:", 0) == 0) {
        throw Error(ErrorCode::InvalidValue, "source '" + source + "' is reserved");
    }
    return analytics_->ingest(payload, source, offset);
}

std::vector<training::TrainingEvent> Orchestrator::committed_events() const {
    std::vector<training::TrainingEvent> out;
    auto lock = db_->lock();
    auto st = db_->prepare("SELECT body FROM events ORDER BY seq");
    while (st.step()) out.push_back(training::TrainingEvent::from_json(nlohmann::json::parse(st.text_at(0))));
    return out;
}

}  // namespace rangekit::orchestrator
