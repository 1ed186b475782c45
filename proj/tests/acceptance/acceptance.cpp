// Acceptance checks. Prints one PASS/FAIL line per criterion; exits non-zero
// when any fails.

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sqlite3.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rangekit/analytics/command_log.hpp"
#include "rangekit/compiler/compiler.hpp"
#include "rangekit/core/error.hpp"
#include "rangekit/definition/provisioning.hpp"
#include "rangekit/definition/topology.hpp"
#include "rangekit/definition/training.hpp"
#include "rangekit/definition/validation.hpp"
#include "rangekit/orchestrator/orchestrator.hpp"
#include "rangekit/sim/simulation.hpp"
#include "rangekit/training/run.hpp"
#include "support/address_oracle.hpp"
#include "support/assignment_oracle.hpp"
#include "support/corpus.hpp"
#include "support/graph_oracle.hpp"
#include "support/scoring_oracle.hpp"
#include "support/topology_gen.hpp"

using namespace rangekit;
using namespace std::chrono_literals;
using rangekit::test::read_corpus;
using ojson = nlohmann::ordered_json;

namespace {

struct Failure {
    std::string why;
};

void require(bool ok, const std::string& why) {
    if (!ok) throw Failure{why};
}

int failures = 0;

void criterion(const std::string& name, std::chrono::milliseconds budget, const std::function<void()>& body) {
    auto start = std::chrono::steady_clock::now();
    std::string why;
    try {
        body();
    } catch (const Failure& f) {
        why = f.why;
    } catch (const std::exception& e) {
        why = std::string("unexpected exception: ") + e.what();
    }
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    if (why.empty() && ms > budget) why = "took " + std::to_string(ms.count()) + " ms, budget " + std::to_string(budget.count()) + " ms";
    if (why.empty()) {
        std::cout << "PASS " << name << " (" << ms.count() << " ms)" << std::endl;
    } else {
        ++failures;
        std::cout << "FAIL " << name << ": " << why << std::endl;
    }
}

sim::SimulationOptions reference_simulation(int students, std::uint64_t seed) {
    sim::SimulationOptions o;
    o.training_json = read_corpus("reference_training.json");
    o.sandbox = {"corpus", "", read_corpus("reference_topology.yml"), read_corpus("reference_playbook.yml")};
    o.students = students;
    o.seed = seed;
    return o;
}

void format_fidelity() {
    auto topo_text = read_corpus("reference_topology.yml");
    auto topo = definition::parse_topology(topo_text).value;
    require(definition::validate_topology(topo).deployable(), "reference topology has validation errors");
    auto topo_canon = definition::canonicalize(topo);
    auto topo2 = definition::parse_topology(topo_canon).value;
    require(topo2 == topo, "topology changed through canonical form");
    require(definition::canonicalize(topo2) == topo_canon, "topology canonical form is not a fixed point");

    auto play = definition::parse_provisioning(read_corpus("reference_playbook.yml"), topo).value;
    auto play_canon = definition::canonicalize(play);
    auto play2 = definition::parse_provisioning(play_canon, topo).value;
    require(play2 == play, "playbook changed through canonical form");
    require(definition::canonicalize(play2) == play_canon, "playbook canonical form is not a fixed point");

    auto training = definition::parse_training(read_corpus("reference_training.json")).value;
    require(definition::validate_training(training).deployable(), "reference training has validation errors");
    auto training_canon = definition::canonicalize(training);
    auto training2 = definition::parse_training(training_canon).value;
    require(training2 == training, "training changed through canonical form");
    require(definition::canonicalize(training2) == training_canon, "training canonical form is not a fixed point");
}

void analytics_fidelity() {
    std::string line = read_corpus("reference_command_log.txt");
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
    auto entry = analytics::parse_syslog_line(line, UtcOffset::parse("+02:00"));
    auto expected = ojson::parse(read_corpus("reference_command_entry.json"));
    require(entry.to_json() == expected, "parsed entry " + entry.to_json().dump() + " != " + expected.dump());
    require(entry.to_json().dump() == expected.dump(), "field order differs from the reference entry");

    auto def = std::make_shared<const definition::TrainingDefinition>(
        definition::parse_training(read_corpus("reference_training.json")).value);
    training::EventList events;
    auto run = training::TrainingRun::start(def, {28, 19, 12, 7, 104, 40}, from_epoch_ms(1610615634236), events);
    run.advance(from_epoch_ms(1610615700000), events);
    events.clear();
    run.submit_answer(".invoices2019", from_epoch_ms(1610618680221), events);
    require(events.size() == 1 && events[0].type == training::EventType::WrongFlagSubmitted,
            "wrong submission did not emit exactly one WrongFlagSubmitted");
    auto produced = events[0].to_json();
    auto reference = ojson::parse(read_corpus("reference_wrong_flag_event.json"));
    std::vector<std::string> produced_keys, reference_keys;
    for (const auto& [k, v] : produced.items()) produced_keys.push_back(k);
    for (const auto& [k, v] : reference.items()) reference_keys.push_back(k);
    require(reference_keys.size() == 14, "reference event has " + std::to_string(reference_keys.size()) + " fields");
    require(produced_keys == reference_keys, "field names differ: " + produced.dump());
    require(produced["flag_content"] == ".invoices2019", "flag_content not carried");
    require(produced["type"] == "events.trainings.WrongFlagSubmitted", "wrong type name");
    require(produced["count"] == 1, "count is not 1");
}

void scoring_oracle() {
    auto def = std::make_shared<const definition::TrainingDefinition>(
        definition::parse_training(read_corpus("reference_training.json")).value);
    const definition::Phase* target = nullptr;
    for (const auto& p : def->phases) {
        if (p.order == 1) target = &p;
    }
    require(target && target->training(), "phase 1 is not a training phase");
    const auto& phase = *target->training();
    std::map<int, int> penalties;
    for (const auto& h : phase.hints) penalties[h.order] = h.hint_penalty;

    std::mt19937_64 rng(20210114);
    auto t = from_epoch_ms(1610615634236);
    for (int trial = 0; trial < 1000; ++trial) {
        training::EventList events;
        auto run = training::TrainingRun::start(def, {trial + 1, 1, 1, 1, 1, 1}, t, events);
        run.advance(t + 1s, events);
        std::set<int> revealed;
        bool solution = false;
        int steps = std::uniform_int_distribution<int>(0, 12)(rng);
        for (int s = 0; s < steps + 1 && run.current_phase_order() == 1; ++s) {
            auto at = t + std::chrono::seconds(2 + s);
            int op = s == steps ? 4 : std::uniform_int_distribution<int>(0, 9)(rng);
            if (op <= 4 && s < steps) {
                int h = std::uniform_int_distribution<int>(0, 2)(rng);
                run.reveal_hint(h, at, events);
                revealed.insert(h);
            } else if (op == 5) {
                run.reveal_solution(at, events);
                solution = true;
            } else if (op <= 8) {
                run.submit_answer("guess" + std::to_string(s), at, events);
            } else {
                run.submit_answer(phase.flag, at, events);
            }
            int oracle = phase.max_score;
            for (int h : revealed) oracle -= penalties.at(h);
            oracle = solution ? 0 : std::max(0, oracle);
            const auto* progress = run.progress_for(1);
            require(progress->actual_score_in_level == oracle,
                    "trial " + std::to_string(trial) + " step " + std::to_string(s) + ": engine " +
                        std::to_string(progress->actual_score_in_level) + ", oracle " + std::to_string(oracle));
        }
    }
}

void topology_oracle() {
    std::mt19937_64 rng(500);
    int checked_mappings = 0, overlaps = 0, outside = 0;
    for (int trial = 0; trial < 500; ++trial) {
        auto def = test::random_topology(rng, trial % 5 == 0);
        require(static_cast<int>(def.hosts.size() + def.routers.size()) <= 10, "generator exceeded 10 nodes");
        auto report = definition::validate_topology(def);

        std::map<std::string, test::OracleNet> nets;
        for (const auto& n : def.networks) {
            test::OracleNet net;
            require(test::oracle_net(n.cidr, net), "oracle cannot read " + n.cidr);
            nets[n.name] = net;
        }
        std::map<std::string, int> expected_overlaps;
        for (std::size_t i = 0; i < def.networks.size(); ++i) {
            for (std::size_t j = i + 1; j < def.networks.size(); ++j) {
                if (test::oracle_overlap(nets[def.networks[i].name], nets[def.networks[j].name])) {
                    ++expected_overlaps[def.networks[j].name];
                    ++overlaps;
                }
            }
        }
        std::map<std::string, int> reported_overlaps;
        std::set<std::pair<std::string, std::string>> reported_range, expected_range;
        for (const auto& f : report.findings) {
            if (f.code == "network-overlap") ++reported_overlaps[f.node];
            if (f.code == "ip-outside-network" || f.code == "ip-reserved") reported_range.insert({f.code, f.node});
        }
        require(reported_overlaps == expected_overlaps, "overlap verdicts differ in trial " + std::to_string(trial));

        auto judge = [&](const std::string& node, const std::string& network, const std::string& ip) {
            std::uint64_t addr = 0;
            require(test::oracle_addr(ip, addr), "oracle cannot read " + ip);
            const auto& net = nets.at(network);
            ++checked_mappings;
            if (!test::oracle_in_range(net, addr)) {
                expected_range.insert({"ip-outside-network", node});
                ++outside;
            } else if (!test::oracle_usable(net, addr)) {
                expected_range.insert({"ip-reserved", node});
            }
        };
        for (const auto& m : def.net_mappings) judge(m.host, m.network, m.ip);
        for (const auto& m : def.router_mappings) judge(m.router, m.network, m.ip);
        require(reported_range == expected_range, "ip-in-CIDR verdicts differ in trial " + std::to_string(trial));
    }
    require(overlaps > 0 && outside > 0, "generator produced no overlaps or no out-of-range addresses");
    require(checked_mappings > 500, "too few mappings checked");
}

void concurrency() {
    auto first = sim::simulate(reference_simulation(200, 7));
    auto second = sim::simulate(reference_simulation(200, 7));
    const auto& r = first.report;
    require(r.ok(), r.violations.empty() ? "report not ok" : r.violations.front());
    require(r.students == 200, "students != 200");
    int finished = 0;
    for (const auto& e : first.committed) finished += e.type == training::EventType::TrainingRunFinished;
    require(finished == 200, std::to_string(finished) + " TrainingRunFinished events");

    // Brute force: no two started runs share a sandbox.
    std::vector<std::pair<std::int64_t, std::int64_t>> starts;
    for (const auto& e : first.committed) {
        if (e.type == training::EventType::TrainingRunStarted) starts.push_back({e.ids.sandbox_id, e.ids.training_run_id});
    }
    require(starts.size() == 200, "started runs != 200");
    for (std::size_t i = 0; i < starts.size(); ++i) {
        for (std::size_t j = i + 1; j < starts.size(); ++j) {
            require(starts[i].first != starts[j].first, "sandbox " + std::to_string(starts[i].first) + " assigned twice");
        }
    }

    std::set<std::int64_t> pool;
    std::vector<test::AssignmentOp> history;
    for (const auto& h : first.history) {
        pool.insert(h.sandbox);
        history.push_back({h.kind == sim::AssignmentRecord::Join ? test::AssignmentOp::Join : test::AssignmentOp::Release,
                           h.user, h.sandbox, h.run, h.seq, h.invoked, h.responded});
    }
    auto problems = test::check_assignment_history(pool, history);
    require(problems.empty(), problems.empty() ? "" : problems.front());
    require(history.size() == 400, "expected 200 joins and 200 releases");

    require(first.report.to_text() == second.report.to_text(), "report differs between identical runs");
    require(first.events_jsonl == second.events_jsonl, "event export differs between identical runs");
}

void reachability() {
    auto topo = definition::parse_topology(read_corpus("reference_topology.yml")).value;
    auto plan = compiler::compile(topo);
    auto there = compiler::reachability(plan, "home", "server");
    require(there.reachable, "home cannot reach server");
    require(there.path == std::vector<std::string>{"home", "home-router", "server-router", "server"},
            "unexpected home->server path");
    auto back = compiler::reachability(plan, "server", "home");
    require(back.path == std::vector<std::string>{"server", "server-router", "home-router", "home"},
            "unexpected server->home path");
    require(test::bfs_path(plan, "home", "server").size() == 4, "graph search disagrees on path length");

    auto cut = compiler::remove_network(plan, "transit");
    require(!compiler::reachability(cut, "home", "server").reachable, "still reachable without transit");
    require(!compiler::reachability(cut, "server", "home").reachable, "still reachable back without transit");
    require(test::bfs_path(cut, "home", "server").empty(), "graph search still connects home and server");
    require(compiler::reachability(cut, "home", "home-router").path == std::vector<std::string>{"home", "home-router"},
            "home lost its own router");
}

// Reads the events table the way any external consumer would.
std::vector<training::TrainingEvent> read_committed(const std::filesystem::path& db) {
    sqlite3* handle = nullptr;
    require(sqlite3_open_v2(db.c_str(), &handle, SQLITE_OPEN_READONLY, nullptr) == SQLITE_OK, "cannot open database");
    sqlite3_busy_timeout(handle, 5000);
    sqlite3_stmt* st = nullptr;
    sqlite3_prepare_v2(handle, "SELECT body FROM events ORDER BY seq", -1, &st, nullptr);
    std::vector<training::TrainingEvent> out;
    while (sqlite3_step(st) == SQLITE_ROW) {
        out.push_back(training::TrainingEvent::from_json(
            nlohmann::json::parse(reinterpret_cast<const char*>(sqlite3_column_text(st, 0)))));
    }
    sqlite3_finalize(st);
    sqlite3_close(handle);
    return out;
}

long long count_rows(const std::filesystem::path& db, const char* sql) {
    sqlite3* handle = nullptr;
    if (sqlite3_open_v2(db.c_str(), &handle, SQLITE_OPEN_READONLY, nullptr) != SQLITE_OK) {
        sqlite3_close(handle);
        return -1;
    }
    sqlite3_busy_timeout(handle, 1000);
    sqlite3_stmt* st = nullptr;
    long long n = -1;
    if (sqlite3_prepare_v2(handle, sql, -1, &st, nullptr) == SQLITE_OK && sqlite3_step(st) == SQLITE_ROW) {
        n = sqlite3_column_int64(st, 0);
    }
    sqlite3_finalize(st);
    sqlite3_close(handle);
    return n;
}

struct FoldedRun {
    std::int64_t sandbox = 0;
    std::int64_t user = 0;
    bool finished = false;
    std::optional<std::int64_t> active_phase;
    std::set<std::int64_t> completed;
    std::map<std::int64_t, std::set<int>> hints;
    std::map<std::int64_t, int> wrong;
    int total_score = 0;
};

std::map<std::int64_t, FoldedRun> fold(const std::vector<training::TrainingEvent>& events) {
    using training::EventType;
    std::map<std::int64_t, FoldedRun> runs;
    for (const auto& e : events) {
        auto& r = runs[e.ids.training_run_id];
        r.sandbox = e.ids.sandbox_id;
        r.user = e.ids.user_ref_id;
        r.total_score = e.total_score;
        switch (e.type) {
        case EventType::PhaseStarted: r.active_phase = e.phase_id; break;
        case EventType::PhaseCompleted:
            r.completed.insert(e.phase_id);
            r.active_phase.reset();
            break;
        case EventType::HintDisplayed: r.hints[e.phase_id].insert(e.hint_order.value_or(-1)); break;
        case EventType::WrongFlagSubmitted: ++r.wrong[e.phase_id]; break;
        case EventType::TrainingRunFinished:
            r.finished = true;
            r.active_phase.reset();
            break;
        default: break;
        }
    }
    return runs;
}

void crash_recovery(const std::string& cli) {
    auto dir = std::filesystem::temp_directory_path() / ("rangekit-acceptance-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    auto db = dir / "state.db";
    auto corpus = [](const char* name) { return test::corpus_path(name); };
    std::vector<std::string> args{cli, "simulate", corpus("reference_training.json"), corpus("reference_topology.yml"),
                                  corpus("reference_playbook.yml"), "--students", "150", "--seed", "7", "--threads", "6",
                                  "--action-delay-ms", "15", "--database", db.string()};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, 1, "/dev/null", O_WRONLY, 0);
    pid_t pid = 0;
    int rc = posix_spawn(&pid, cli.c_str(), &actions, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    require(rc == 0, "cannot start " + cli);

    long long joins = 0;
    auto deadline = std::chrono::steady_clock::now() + 30s;
    while (std::chrono::steady_clock::now() < deadline) {
        joins = count_rows(db, "SELECT count(*) FROM runs");
        if (joins >= 50) break;
        std::this_thread::sleep_for(5ms);
    }
    ::kill(pid, SIGKILL);
    int status = 0;
    ::waitpid(pid, &status, 0);
    require(WIFSIGNALED(status), "simulation finished before it could be killed");
    require(joins >= 50, "only " + std::to_string(joins) + " joins before the deadline");

    auto committed = read_committed(db);
    auto expected = fold(committed);
    require(expected.size() >= 50, "committed export holds " + std::to_string(expected.size()) + " runs");
    bool some_unfinished = false;
    for (const auto& [id, r] : expected) some_unfinished = some_unfinished || !r.finished;
    require(some_unfinished, "kill landed after every run finished");

    orchestrator::OrchestratorConfig config;
    config.token_seed = 7;
    orchestrator::Orchestrator restored(config, db);
    require(restored.committed_events() == committed, "restored commit log differs from the pre-kill export");

    auto runs = restored.runs();
    require(runs.size() == expected.size(),
            std::to_string(runs.size()) + " runs restored, export has " + std::to_string(expected.size()));
    for (const auto& run : runs) {
        auto id = run.ids().training_run_id;
        auto it = expected.find(id);
        require(it != expected.end(), "restored run " + std::to_string(id) + " is not in the export");
        const auto& want = it->second;
        auto tag = "run " + std::to_string(id) + ": ";
        require(run.ids().sandbox_id == want.sandbox && run.ids().user_ref_id == want.user, tag + "assignment differs");
        require((run.state() == training::RunState::Finished) == want.finished, tag + "finished state differs");
        auto current = run.current_phase_order();
        require((current ? std::optional<std::int64_t>(*current) : std::nullopt) == want.active_phase,
                tag + "active phase differs");
        require(run.score().total_score == want.total_score, tag + "total score differs");
        for (const auto& p : run.progress()) {
            bool done = p.status == training::PhaseStatus::Completed;
            require(done == (want.completed.count(p.order) > 0), tag + "phase " + std::to_string(p.order) + " status differs");
            auto h = want.hints.find(p.order);
            require(p.revealed_hints == (h == want.hints.end() ? std::set<int>{} : h->second), tag + "hints differ");
            auto w = want.wrong.find(p.order);
            require(p.wrong_submissions == (w == want.wrong.end() ? 0 : w->second), tag + "wrong flag count differs");
        }
    }

    // Sandbox assignments: exactly the started runs hold a sandbox.
    std::map<std::int64_t, std::pair<std::int64_t, std::int64_t>> held;  // sandbox -> (run, user)
    auto pool = restored.pool(1);
    for (const auto& s : pool.sandboxes) {
        if (s.run_id) held[s.id] = {*s.run_id, s.user_ref_id.value_or(0)};
        if (s.state == runtime::SandboxState::Assigned || s.state == runtime::SandboxState::Released) {
            require(s.run_id.has_value(), "sandbox " + std::to_string(s.id) + " is " +
                                              std::string(runtime::to_string(s.state)) + " without a run");
        }
        if (s.state == runtime::SandboxState::Released) {
            require(expected.at(*s.run_id).finished, "sandbox " + std::to_string(s.id) + " released before its run finished");
        }
    }
    std::map<std::int64_t, std::pair<std::int64_t, std::int64_t>> wanted;
    for (const auto& [id, r] : expected) wanted[r.sandbox] = {id, r.user};
    require(held == wanted, "restored sandbox assignments differ from the export");
    std::filesystem::remove_all(dir);
}

}  // namespace

int main(int argc, char** argv) {
    std::string cli = argc > 1 ? argv[1] : RANGEKIT_CLI_PATH;
    criterion("format fidelity: reference definitions parse and round-trip", 1s, format_fidelity);
    criterion("analytics fidelity: command line and wrong-flag event match the reference records", 1s, analytics_fidelity);
    criterion("scoring oracle: 1000 random sequences on the reference training phase", 10s, scoring_oracle);
    criterion("topology oracle: 500 random topologies against address enumeration", 30s, topology_oracle);
    criterion("concurrency: 200 simulated students, exclusive and deterministic", 60s, concurrency);
    criterion("reachability: home and server via two routers, cut without transit", 1s, reachability);
    criterion("crash recovery: killed mid-simulation, restart matches the committed export", 60s,
              [&] { crash_recovery(cli); });
    return failures == 0 ? 0 : 1;
}
