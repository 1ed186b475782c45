// rangekit: operator command line.
//
// Exit codes: 0 success; 1 validation, compile or simulation-invariant
// failure; 2 unreadable input (missing file, parse error); 64 usage error.

#include <yaml-cpp/yaml.h>

#include <CLI11.hpp>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rangekit/analytics/command_log.hpp"
#include "rangekit/analytics/progress.hpp"
#include "rangekit/analytics/store.hpp"
#include "rangekit/compiler/compiler.hpp"
#include "rangekit/compiler/render.hpp"
#include "rangekit/core/error.hpp"
#include "rangekit/definition/provisioning.hpp"
#include "rangekit/definition/topology.hpp"
#include "rangekit/definition/training.hpp"
#include "rangekit/definition/validation.hpp"
#include "rangekit/orchestrator/http_api.hpp"
#include "rangekit/sim/simulation.hpp"

using namespace rangekit;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUnreadable = 2;
constexpr int kUsage = 64;

struct Exit {
    int code;
    std::string message;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Exit{kUnreadable, path + ": cannot read file"};
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

enum class DocKind { Topology, Provisioning, Training };

DocKind classify(const std::string& path, const std::string& text) {
    auto dot = path.rfind('.');
    if (dot != std::string::npos && path.substr(dot) == ".json") return DocKind::Training;
    try {
        auto root = YAML::Load(text);
        if (root.IsSequence()) return DocKind::Provisioning;
        if (root.IsMap() && (root["phases"] || root["levels"])) return DocKind::Training;
    } catch (const YAML::Exception& e) {
        throw Exit{kUnreadable, path + ": " + e.what()};
    }
    return DocKind::Topology;
}

template <typename Fn>
auto parse_or_exit(const std::string& path, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        if (e.code() == ErrorCode::UnknownSelector) throw Exit{kFailed, path + ": " + e.what()};
        throw Exit{kUnreadable, path + ": " + e.what()};
    }
}

void print_warnings(const std::string& path, const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cout << path << ": warning: " << w << '\n';
}

void print_report(const std::string& path, const definition::ValidationReport& report) {
    for (const auto& f : report.findings) {
        std::cout << path << ": " << (f.severity == definition::Severity::Error ? "error" : "warning") << ": [" << f.code
                  << "]";
        if (!f.node.empty()) std::cout << ' ' << f.node;
        std::cout << ": " << f.message << '\n';
    }
}

// Settings shared by subcommands. Flags override RANGEKIT_* variables, which
// override the --config file, which overrides the defaults.
struct Settings {
    std::string config_path;
    std::string zone = "+00:00";
    long long quota_vcpus = 0;  // 0 = unlimited
    std::string listen = "127.0.0.1:8080";
    std::string database;
    std::string static_dir;
    std::uint64_t seed = 1;
    int students = 0;
    definition::FlavorRegistry flavors = definition::FlavorRegistry::defaults();
    std::map<std::string, orchestrator::Principal> tokens;
};

void apply_config_file(Settings& s, const CLI::App& app, const CLI::App& sub) {
    if (s.config_path.empty()) return;
    YAML::Node root;
    try {
        root = YAML::LoadFile(s.config_path);
    } catch (const YAML::BadFile&) {
        throw Exit{kUnreadable, s.config_path + ": cannot read file"};
    } catch (const YAML::Exception& e) {
        throw Exit{kUnreadable, s.config_path + ": " + e.what()};
    }
    auto unset = [&](const char* flag) {
        for (const auto* scope : {&app, &sub}) {
            const auto* opt = scope->get_option_no_throw(flag);
            if (opt && opt->count() > 0) return false;
        }
        return true;
    };
    try {
        if (root["zone"] && unset("--zone")) s.zone = root["zone"].as<std::string>();
        if (root["quota_vcpus"] && unset("--quota-vcpus")) s.quota_vcpus = root["quota_vcpus"].as<long long>();
        if (root["listen"] && unset("--listen")) s.listen = root["listen"].as<std::string>();
        if (root["database"] && unset("--database")) s.database = root["database"].as<std::string>();
        if (root["static_dir"] && unset("--static-dir")) s.static_dir = root["static_dir"].as<std::string>();
        if (root["seed"] && unset("--seed")) s.seed = root["seed"].as<std::uint64_t>();
        if (root["students"] && unset("--students")) s.students = root["students"].as<int>();
        if (const auto& flavors = root["flavors"]) {
            for (const auto& f : flavors) {
                s.flavors.add(f.first.as<std::string>(),
                              {f.second["vcpus"].as<int>(), f.second["memory_gb"].as<int>()});
            }
        }
        if (const auto& tokens = root["tokens"]) {
            for (const auto& t : tokens) {
                s.tokens[t["token"].as<std::string>()] = {t["user_ref_id"].as<std::int64_t>(),
                                                          orchestrator::parse_role(t["role"].as<std::string>()),
                                                          t["name"] ? t["name"].as<std::string>() : std::string()};
            }
        }
    } catch (const YAML::Exception& e) {
        throw Exit{kUnreadable, s.config_path + ": " + e.what()};
    } catch (const Error& e) {
        throw Exit{kUnreadable, s.config_path + ": " + e.what()};
    }
}

UtcOffset zone_of(const Settings& s) {
    auto zone = UtcOffset::try_parse(s.zone);
    if (!zone) throw Exit{kUsage, "invalid zone '" + s.zone + "' (expected +HH:MM)"};
    return *zone;
}

int cmd_validate(const std::vector<std::string>& paths) {
    std::optional<definition::TopologyDefinition> topology;
    std::vector<std::pair<std::string, std::string>> playbooks;
    std::size_t errors = 0;
    for (const auto& path : paths) {
        auto text = read_file(path);
        switch (classify(path, text)) {
        case DocKind::Topology: {
            auto parsed = parse_or_exit(path, [&] { return definition::parse_topology(text); });
            print_warnings(path, parsed.warnings);
            auto report = definition::validate_topology(parsed.value);
            print_report(path, report);
            errors += report.error_count();
            topology = parsed.value;
            break;
        }
        case DocKind::Training: {
            auto parsed = parse_or_exit(path, [&] { return definition::parse_training(text); });
            print_warnings(path, parsed.warnings);
            auto report = definition::validate_training(parsed.value);
            print_report(path, report);
            errors += report.error_count();
            break;
        }
        case DocKind::Provisioning:
            playbooks.emplace_back(path, std::move(text));
            break;
        }
    }
    for (const auto& [path, text] : playbooks) {
        auto parsed = parse_or_exit(path, [&, &t = text] {
            return topology ? definition::parse_provisioning(t, *topology) : definition::parse_provisioning(t);
        });
        print_warnings(path, parsed.warnings);
    }
    std::cout << paths.size() << " file(s), " << errors << " error(s)\n";
    return errors == 0 ? kOk : kFailed;
}

int cmd_canonicalize(const std::string& path) {
    auto text = read_file(path);
    switch (classify(path, text)) {
    case DocKind::Topology:
        std::cout << definition::canonicalize(parse_or_exit(path, [&] { return definition::parse_topology(text); }).value);
        break;
    case DocKind::Provisioning:
        std::cout << definition::canonicalize(
            parse_or_exit(path, [&] { return definition::parse_provisioning(text); }).value);
        break;
    case DocKind::Training:
        std::cout << definition::canonicalize(parse_or_exit(path, [&] { return definition::parse_training(text); }).value);
        break;
    }
    return kOk;
}

compiler::SandboxPlan compile_files(const std::string& topology_path, const std::string& provisioning_path,
                                    const Settings& settings) {
    auto topo_text = read_file(topology_path);
    auto topo = parse_or_exit(topology_path, [&] { return definition::parse_topology(topo_text); }).value;
    std::optional<definition::ProvisioningDefinition> provisioning;
    if (!provisioning_path.empty()) {
        auto text = read_file(provisioning_path);
        provisioning = parse_or_exit(provisioning_path, [&] { return definition::parse_provisioning(text, topo); }).value;
    }
    compiler::CompileOptions options;
    options.flavors = settings.flavors;
    try {
        return compiler::compile(topo, provisioning, options);
    } catch (const Error& e) {
        throw Exit{kFailed, topology_path + ": " + e.what()};
    }
}

int cmd_compile(const std::string& topology_path, const std::string& provisioning_path, const std::string& target,
                int count, const std::string& out_dir, const Settings& settings) {
    auto plan = compile_files(topology_path, provisioning_path, settings);
    if (target == "cloud") {
        auto cloud = compiler::render_cloud_plan(plan, count);
        std::cout << cloud.to_text();
        if (!out_dir.empty()) {
            std::filesystem::create_directories(out_dir);
            std::ofstream(std::filesystem::path(out_dir) / "cloud-plan.json") << cloud.to_json() << '\n';
        }
        return kOk;
    }
    auto bundle = compiler::render_local(plan);
    if (!out_dir.empty()) compiler::write_bundle(bundle, out_dir);
    for (const auto& [file, content] : bundle) std::cout << file << '\n';
    std::cout << compiler::render_cloud_plan(plan, 1).to_text();
    return kOk;
}

int cmd_replay(const std::vector<std::string>& paths, const Settings& settings) {
    auto zone = zone_of(settings);
    analytics::EventStore store;
    std::size_t commands = 0;
    for (const auto& path : paths) {
        std::istringstream in(read_file(path));
        std::string line;
        std::uint64_t offset = 0;
        while (std::getline(in, line)) {
            ++offset;
            if (line.empty()) continue;
            try {
                if (line.front() == '{') {
                    store.ingest(nlohmann::ordered_json::parse(line), path, offset);
                } else {
                    store.ingest(analytics::parse_syslog_line(line, zone), path, offset);
                }
            } catch (const Error& e) {
                throw Exit{kUnreadable, path + ":" + std::to_string(offset) + ": " + e.what()};
            } catch (const nlohmann::json::exception& e) {
                throw Exit{kUnreadable, path + ":" + std::to_string(offset) + ": " + e.what()};
            }
        }
    }
    analytics::TimelineFilter command_filter;
    command_filter.kind = analytics::EventKind::Command;
    commands = store.query_timeline(command_filter).size();
    nlohmann::ordered_json runs = nlohmann::ordered_json::array();
    for (const auto& summary : analytics::summarize(store.training_events())) runs.push_back(summary.to_json());
    nlohmann::ordered_json out{{"events", store.size()}, {"command_events", commands}, {"runs", runs}};
    std::cout << out.dump(2) << '\n';
    return kOk;
}

std::function<void()> g_stop;

int cmd_serve(const Settings& settings) {
    orchestrator::OrchestratorConfig config;
    config.flavors = settings.flavors;
    config.zone = zone_of(settings);
    if (settings.quota_vcpus > 0) config.quota_vcpus = settings.quota_vcpus;
    orchestrator::Orchestrator orch(config, settings.database);
    orchestrator::ApiOptions options;
    options.bearer_tokens = settings.tokens;
    options.access_log = &std::cerr;
    options.static_dir = settings.static_dir;
    orchestrator::ApiServer server(orch, options);
    auto colon = settings.listen.rfind(':');
    if (colon == std::string::npos) throw Exit{kUsage, "--listen expects host:port"};
    int port = server.bind(settings.listen.substr(0, colon), std::stoi(settings.listen.substr(colon + 1)));
    std::cout << "listening on " << settings.listen.substr(0, colon) << ':' << port << std::endl;
    g_stop = [&] { server.stop(); };
    std::signal(SIGINT, [](int) { std::thread([] { g_stop(); }).detach(); });
    std::signal(SIGTERM, [](int) { std::thread([] { g_stop(); }).detach(); });
    server.serve();
    return kOk;
}

struct SimulateArgs {
    std::string training;
    std::string topology;
    std::string provisioning;
    unsigned threads = 0;
    int action_delay_ms = 0;
    std::string events_out;
    bool json = false;
};

int cmd_simulate(const SimulateArgs& args, const Settings& settings) {
    if (settings.students < 1) throw Exit{kUsage, "--students must be at least 1"};
    sim::SimulationOptions options;
    options.training_json = read_file(args.training);
    options.sandbox = {args.topology, "", read_file(args.topology),
                       args.provisioning.empty() ? std::nullopt : std::optional(read_file(args.provisioning))};
    options.students = settings.students;
    options.seed = settings.seed;
    options.threads = args.threads;
    options.database = settings.database;
    options.action_delay = std::chrono::milliseconds(args.action_delay_ms);
    options.config.flavors = settings.flavors;
    options.config.zone = zone_of(settings);
    if (settings.quota_vcpus > 0) options.config.quota_vcpus = settings.quota_vcpus;
    sim::SimulationResult result;
    try {
        result = sim::simulate(options);
    } catch (const Error& e) {
        throw Exit{e.code() == ErrorCode::InvalidDefinition ? kUnreadable : kFailed, e.what()};
    }
    if (args.json) {
        std::cout << result.report.to_json().dump(2) << '\n';
    } else {
        std::cout << result.report.to_text();
    }
    if (!args.events_out.empty()) {
        std::ofstream out(args.events_out, std::ios::binary);
        if (!out) throw Exit{kUnreadable, args.events_out + ": cannot write file"};
        out << result.events_jsonl;
    }
    return result.report.ok() ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rangekit: cyber range definitions, sandboxes, trainings and analytics"};
    app.require_subcommand(1);
    app.fallthrough();
    Settings settings;
    app.add_option("--config", settings.config_path, "YAML settings file")->envname("RANGEKIT_CONFIG");
    app.add_option("--zone", settings.zone, "UTC offset of sandbox command logs, +HH:MM")->envname("RANGEKIT_ZONE");
    app.add_option("--quota-vcpus", settings.quota_vcpus, "vCPU quota for pools (0 = unlimited)")
        ->envname("RANGEKIT_QUOTA_VCPUS");

    std::vector<std::string> validate_paths;
    auto* validate = app.add_subcommand("validate", "Parse and validate definition files");
    validate->add_option("paths", validate_paths, "topology, provisioning and training files")->required();

    std::string canon_path;
    auto* canonicalize = app.add_subcommand("canonicalize", "Print a definition in canonical form");
    canonicalize->add_option("path", canon_path)->required();

    std::string topology_path, provisioning_path, target = "local", out_dir;
    int count = 1;
    auto* compile = app.add_subcommand("compile", "Compile a topology into a local bundle or cloud plan");
    compile->add_option("topology", topology_path)->required();
    compile->add_option("provisioning", provisioning_path);
    compile->add_option("--target", target)->check(CLI::IsMember({"local", "cloud"}))->envname("RANGEKIT_TARGET");
    compile->add_option("--count", count, "sandboxes (cloud target)")->check(CLI::PositiveNumber)->envname("RANGEKIT_COUNT");
    compile->add_option("--out", out_dir, "output directory")->envname("RANGEKIT_OUT");

    auto* serve = app.add_subcommand("serve", "Run the orchestrator HTTP API");
    serve->add_option("--listen", settings.listen, "host:port")->envname("RANGEKIT_LISTEN");
    serve->add_option("--database", settings.database, "SQLite database file")->envname("RANGEKIT_DATABASE");
    serve->add_option("--static-dir", settings.static_dir, "files served under /ui")->envname("RANGEKIT_STATIC_DIR");

    std::vector<std::string> replay_paths;
    auto* replay = app.add_subcommand("replay", "Fold event logs (JSON lines or syslog lines) into progress summaries");
    replay->add_option("paths", replay_paths)->required();

    SimulateArgs sim_args;
    auto* simulate = app.add_subcommand("simulate", "Run scripted trainees against an in-process orchestrator");
    simulate->add_option("training", sim_args.training)->required();
    simulate->add_option("topology", sim_args.topology)->required();
    simulate->add_option("provisioning", sim_args.provisioning);
    simulate->add_option("--students", settings.students)->envname("RANGEKIT_STUDENTS");
    simulate->add_option("--seed", settings.seed)->envname("RANGEKIT_SEED");
    simulate->add_option("--threads", sim_args.threads, "agent threads (0 = one per student)");
    simulate->add_option("--database", settings.database, "persist to this SQLite file")->envname("RANGEKIT_DATABASE");
    simulate->add_option("--action-delay-ms", sim_args.action_delay_ms, "real delay between agent actions");
    simulate->add_option("--events-out", sim_args.events_out, "write the training event export here");
    simulate->add_flag("--json", sim_args.json, "print the report as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        apply_config_file(settings, app, *app.get_subcommands().front());
        if (validate->parsed()) return cmd_validate(validate_paths);
        if (canonicalize->parsed()) return cmd_canonicalize(canon_path);
        if (compile->parsed()) return cmd_compile(topology_path, provisioning_path, target, count, out_dir, settings);
        if (replay->parsed()) return cmd_replay(replay_paths, settings);
        if (serve->parsed()) return cmd_serve(settings);
        if (simulate->parsed()) return cmd_simulate(sim_args, settings);
    } catch (const Exit& e) {
        std::cerr << "rangekit: " << e.message << '\n';
        return e.code;
    } catch (const std::exception& e) {
        std::cerr << "rangekit: " << e.what() << '\n';
        return kFailed;
    }
    return kUsage;
}
