#include "rangekit/orchestrator/http_api.hpp"

#include <httplib.h>

#include <charconv>
#include <sstream>

#include "rangekit/core/error.hpp"

namespace rangekit::orchestrator {

namespace {

using json = nlohmann::ordered_json;

std::int64_t path_id(const httplib::Request& req, const char* name) {
    const auto& text = req.path_params.at(name);
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw Error(ErrorCode::InvalidValue, std::string(name) + " '" + text + "' is not an integer");
    }
    return value;
}

json body_of(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, std::string("request body: ") + e.what());
    }
}

template <typename T>
T field(const json& body, const char* key) {
    auto it = body.find(key);
    if (it == body.end()) throw Error(ErrorCode::MissingField, std::string("missing field '") + key + "'");
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::InvalidValue, std::string("field '") + key + "' has the wrong type");
    }
}

Timestamp time_field(const json& body, const char* key) {
    auto text = field<std::string>(body, key);
    auto t = parse_iso8601(text);
    if (!t) throw Error(ErrorCode::InvalidValue, std::string("field '") + key + "' is not an ISO-8601 time");
    return t->instant;
}

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(2) + "\n", "application/json");
}

json run_json(const training::TrainingRun& run) {
    auto j = run.to_json();
    auto s = run.score();
    j["total_score"] = s.total_score;
    j["provisional_score"] = s.provisional_score;
    auto current = run.current_phase_order();
    j["current_phase"] = current ? json(*current) : json();
    return j;
}

}  // namespace

int http_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::Unauthorized: return 401;
    case ErrorCode::Forbidden: return 403;
    case ErrorCode::DefinitionNotFound:
    case ErrorCode::PoolNotFound:
    case ErrorCode::InstanceNotFound:
    case ErrorCode::UnknownRun:
    case ErrorCode::InvalidToken:
    case ErrorCode::UnknownNode:
    case ErrorCode::UnknownHint: return 404;
    case ErrorCode::DuplicateRun:
    case ErrorCode::DuplicateSandboxId:
    case ErrorCode::PoolExhausted:
    case ErrorCode::InstanceActive:
    case ErrorCode::NotAssigned:
    case ErrorCode::InvalidTransition:
    case ErrorCode::RunFinished:
    case ErrorCode::PhaseNotAnswerable:
    case ErrorCode::PhaseNotAdvanceable:
    case ErrorCode::NodeNotRunning:
    case ErrorCode::OutsideWindow: return 409;
    case ErrorCode::InsufficientResources: return 507;
    case ErrorCode::Storage:
    case ErrorCode::Io: return 500;
    default: return 422;
    }
}

ApiServer::ApiServer(Orchestrator& orchestrator, ApiOptions options)
    : orch_(orchestrator), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
    routes();
}

ApiServer::~ApiServer() { stop(); }

Principal ApiServer::authenticate(const std::string& header) const {
    constexpr std::string_view prefix = "Bearer ";
    if (header.rfind(prefix, 0) != 0) throw Error(ErrorCode::Unauthorized, "bearer token required");
    auto it = options_.bearer_tokens.find(header.substr(prefix.size()));
    if (it == options_.bearer_tokens.end()) throw Error(ErrorCode::Unauthorized, "unknown bearer token");
    return it->second;
}

void ApiServer::routes() {
    auto& s = *server_;
    using Handler = std::function<void(const httplib::Request&, httplib::Response&, const Principal&)>;
    auto guarded = [this](Handler fn) {
        return [this, fn](const httplib::Request& req, httplib::Response& res) {
            try {
                auto who = authenticate(req.get_header_value("Authorization"));
                fn(req, res, who);
            } catch (const Error& e) {
                reply(res, http_status(e.code()), {{"error", std::string(to_string(e.code()))}, {"message", e.what()}});
            } catch (const std::exception& e) {
                reply(res, 500, {{"error", "Internal"}, {"message", e.what()}});
            }
        };
    };
    auto now = [this] { return options_.clock(); };

    s.Post("/definitions", guarded([this](auto& req, auto& res, auto& who) {
        auto body = body_of(req);
        auto kind = field<std::string>(body, "kind");
        if (kind == "training") {
            std::string text = body.contains("definition") ? body["definition"].dump() : field<std::string>(body, "text");
            reply(res, 201, orch_.add_training_definition(who, text).to_json());
        } else if (kind == "sandbox") {
            if (body.contains("source")) {
                std::optional<std::string> ref;
                if (body.contains("ref")) ref = field<std::string>(body, "ref");
                std::string sub = body.contains("path") ? field<std::string>(body, "path") : std::string();
                reply(res, 201, orch_.import_sandbox_definition(who, field<std::string>(body, "source"), ref, sub).to_json());
            } else {
                SandboxSource src;
                src.location = "inline";
                src.topology_yaml = field<std::string>(body, "topology");
                if (body.contains("provisioning")) src.provisioning_yaml = field<std::string>(body, "provisioning");
                std::string name = body.contains("name") ? field<std::string>(body, "name") : std::string();
                reply(res, 201, orch_.add_sandbox_definition(who, std::move(src), name).to_json());
            }
        } else {
            throw Error(ErrorCode::InvalidValue, "kind must be 'sandbox' or 'training'");
        }
    }));
    s.Get("/definitions/sandbox/:id", guarded([this](auto& req, auto& res, auto&) {
        reply(res, 200, orch_.sandbox_definition(path_id(req, "id")).to_json());
    }));
    s.Get("/definitions/training/:id", guarded([this](auto& req, auto& res, auto&) {
        reply(res, 200, orch_.training_definition(path_id(req, "id")).to_json());
    }));

    s.Post("/pools", guarded([this](auto& req, auto& res, auto& who) {
        auto body = body_of(req);
        reply(res, 201, orch_.create_pool(who, field<std::int64_t>(body, "definition_id"), field<int>(body, "size")).to_json());
    }));
    s.Get("/pools/:id", guarded([this](auto& req, auto& res, auto& who) {
        if (!who.is_staff()) throw Error(ErrorCode::Forbidden, "instructor role required");
        reply(res, 200, orch_.pool(path_id(req, "id")).to_json());
    }));
    s.Post("/pools/:id/sandboxes/:sid/release", guarded([this](auto& req, auto& res, auto& who) {
        auto seq = orch_.release(who, path_id(req, "id"), path_id(req, "sid"));
        reply(res, 200, {{"sandbox_id", path_id(req, "sid")}, {"state", "released"}, {"commit_seq", seq}});
    }));

    s.Post("/instances", guarded([this](auto& req, auto& res, auto& who) {
        auto body = body_of(req);
        auto inst = orch_.create_instance(who, field<std::int64_t>(body, "training_definition_id"),
                                          field<std::int64_t>(body, "pool_id"), time_field(body, "start"),
                                          time_field(body, "end"));
        reply(res, 201, inst.to_json(true));
    }));
    s.Get("/instances/:id", guarded([this](auto& req, auto& res, auto& who) {
        if (!who.is_staff()) throw Error(ErrorCode::Forbidden, "instructor role required");
        reply(res, 200, orch_.instance(path_id(req, "id")).to_json(false));
    }));
    s.Post("/instances/:id/close", guarded([this, now](auto& req, auto& res, auto& who) {
        auto body = body_of(req);
        bool override_active = body.contains("override") && field<bool>(body, "override");
        int finished = orch_.close_instance(who, path_id(req, "id"), now(), override_active);
        reply(res, 200, {{"instance_id", path_id(req, "id")}, {"finished_runs", finished}});
    }));
    s.Get("/instances/:id/progress", guarded([this](auto& req, auto& res, auto& who) {
        auto flag = req.get_param_value("privacy");
        bool privacy = flag == "1" || flag == "true";
        reply(res, 200, orch_.instance_progress(who, path_id(req, "id"), privacy));
    }));

    s.Post("/runs", guarded([this, now](auto& req, auto& res, auto& who) {
        auto body = body_of(req);
        auto r = orch_.join(field<std::string>(body, "access_token"), who, now());
        reply(res, r.created ? 201 : 200, run_json(r.run));
    }));
    s.Get("/runs/:id", guarded([this](auto& req, auto& res, auto& who) {
        reply(res, 200, run_json(orch_.run(path_id(req, "id"), who)));
    }));
    s.Post("/runs/:id/answers", guarded([this, now](auto& req, auto& res, auto& who) {
        auto body = body_of(req);
        auto id = path_id(req, "id");
        auto verdict = orch_.submit_answer(id, who, field<std::string>(body, "answer"), now());
        auto run = orch_.run(id, who);
        reply(res, 200, {{"verdict", std::string(training::to_string(verdict))}, {"run", run_json(run)}});
    }));
    s.Post("/runs/:id/hints/:order", guarded([this, now](auto& req, auto& res, auto& who) {
        auto content = orch_.reveal_hint(path_id(req, "id"), who, static_cast<int>(path_id(req, "order")), now());
        reply(res, 200, {{"content", content}});
    }));
    s.Post("/runs/:id/solution", guarded([this, now](auto& req, auto& res, auto& who) {
        reply(res, 200, {{"content", orch_.reveal_solution(path_id(req, "id"), who, now())}});
    }));
    s.Post("/runs/:id/advance", guarded([this, now](auto& req, auto& res, auto& who) {
        auto body = body_of(req);
        std::vector<std::string> answers;
        if (body.contains("answers")) answers = field<std::vector<std::string>>(body, "answers");
        auto next = orch_.advance(path_id(req, "id"), who, now(), std::move(answers));
        reply(res, 200, {{"current_phase", next ? json(*next) : json()}});
    }));
    s.Get("/runs/:id/topology", guarded([this](auto& req, auto& res, auto& who) {
        reply(res, 200, orch_.run_topology(path_id(req, "id"), who).to_json());
    }));
    s.Post("/runs/:id/commands", guarded([this, now](auto& req, auto& res, auto& who) {
        auto body = body_of(req);
        auto ev = orch_.execute_command(path_id(req, "id"), who, field<std::string>(body, "node"),
                                        body.contains("wd") ? field<std::string>(body, "wd") : std::string("/"),
                                        field<std::string>(body, "cmd"),
                                        body.contains("cmd_type") ? field<std::string>(body, "cmd_type") : std::string("bash"),
                                        now());
        reply(res, 200, {{"accepted", true}, {"hostname", ev.hostname}, {"sandbox_id", ev.sandbox_id}});
    }));

    s.Post("/events", guarded([this](auto& req, auto& res, auto& who) {
        auto body = body_of(req);
        auto source = req.has_param("source") ? req.get_param_value("source") : std::string("api");
        std::optional<std::uint64_t> offset;
        if (req.has_param("offset")) offset = std::stoull(req.get_param_value("offset"));
        json results = json::array();
        auto items = body.is_array() ? body : json::array({body});
        for (std::size_t i = 0; i < items.size(); ++i) {
            auto r = orch_.ingest_event(who, items[i], source, offset ? std::optional(*offset + i) : std::nullopt);
            results.push_back({{"seq", r.seq}, {"inserted", r.inserted}});
        }
        reply(res, 200, {{"results", results}});
    }));
    s.Get("/export/events", guarded([this](auto& req, auto& res, auto& who) {
        if (!who.is_staff()) throw Error(ErrorCode::Forbidden, "instructor role required");
        analytics::TimelineFilter f;
        auto int_param = [&](const char* key) -> std::optional<std::int64_t> {
            if (!req.has_param(key)) return std::nullopt;
            return std::stoll(req.get_param_value(key));
        };
        if (req.has_param("sandbox_id")) f.sandbox_id = req.get_param_value("sandbox_id");
        if (req.has_param("user")) f.user = req.get_param_value("user");
        f.run_id = int_param("run_id");
        f.instance_id = int_param("instance_id");
        if (req.has_param("kind")) {
            auto k = req.get_param_value("kind");
            if (k != "command" && k != "training") throw Error(ErrorCode::InvalidValue, "kind must be command or training");
            f.kind = k == "command" ? analytics::EventKind::Command : analytics::EventKind::Training;
        }
        for (auto [key, slot] : {std::pair{"from", &f.from}, std::pair{"to", &f.to}}) {
            if (!req.has_param(key)) continue;
            auto t = parse_iso8601(req.get_param_value(key));
            if (!t) throw Error(ErrorCode::InvalidValue, std::string(key) + " is not an ISO-8601 time");
            *slot = t->instant;
        }
        std::ostringstream out;
        orch_.analytics().export_jsonl(out, f);
        res.set_content(out.str(), "application/x-ndjson");
    }));

    if (!options_.static_dir.empty()) s.set_mount_point("/ui", options_.static_dir);

    s.set_logger([this](const httplib::Request& req, const httplib::Response& res) {
        if (!options_.access_log) return;
        std::string who = "-";
        try {
            auto p = authenticate(req.get_header_value("Authorization"));
            who = std::to_string(p.user_ref_id) + "/" + std::string(to_string(p.role));
        } catch (const Error&) {
        }
        std::lock_guard lock(log_mutex_);
        *options_.access_log << format_iso8601(system_now(), UtcOffset{}) << ' ' << req.remote_addr << ' ' << req.method
                             << ' ' << req.path << ' ' << res.status << ' ' << who << '\n';
        options_.access_log->flush();
    });
}

int ApiServer::bind(const std::string& host, int port) {
    if (port == 0) return server_->bind_to_any_port(host);
    if (!server_->bind_to_port(host, port)) throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void ApiServer::serve() { server_->listen_after_bind(); }

void ApiServer::start() {
    thread_ = std::thread([this] { serve(); });
    server_->wait_until_ready();
}

void ApiServer::stop() {
    server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace rangekit::orchestrator
