#include "rangekit/sim/simulation.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "rangekit/core/error.hpp"

namespace rangekit::sim {

namespace {

using namespace std::chrono_literals;
using orchestrator::Principal;
using orchestrator::Role;

const Timestamp kWindowStart = from_epoch_ms(1610611200000);  // 2021-01-14T08:00:00Z
const Principal kOperator{0, Role::Superuser, "simulator"};

struct AgentOutcome {
    std::int64_t run_id = 0;
    std::int64_t sandbox_id = 0;
    int expected_score = 0;
    int final_score = 0;
    bool finished = false;
    std::vector<std::string> violations;
};

std::uint64_t agent_seed(std::uint64_t seed, int index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index)};
    std::array<std::uint32_t, 2> words{};
    seq.generate(words.begin(), words.end());
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

class Agent {
public:
    Agent(int index, const SimulationOptions& options, orchestrator::Orchestrator& orch,
          const definition::TrainingDefinition& definition, std::string token)
        : index_(index), options_(options), orch_(orch), definition_(definition), token_(std::move(token)),
          who_{index + 1, Role::Trainee, "agent-" + std::to_string(index + 1)},
          rng_(agent_seed(options.seed, index)),
          now_(kWindowStart + std::chrono::seconds(index)) {}

    AgentOutcome run(std::vector<AssignmentRecord>& history, std::mutex& history_mutex) {
        AgentOutcome out;
        AssignmentRecord join{AssignmentRecord::Join, who_.user_ref_id};
        join.invoked = std::chrono::steady_clock::now();
        auto joined = orch_.join(token_, who_, now_);
        join.responded = std::chrono::steady_clock::now();
        join.sandbox = joined.sandbox_id;
        join.run = joined.run.ids().training_run_id;
        join.seq = joined.commit_seq;
        record(history, history_mutex, join);
        out.run_id = join.run;
        out.sandbox_id = join.sandbox;

        explore(out.run_id);
        while (true) {
            auto run = orch_.run(out.run_id, who_);
            auto order = run.current_phase_order();
            if (run.state() == training::RunState::Finished || !order) break;
            const auto* phase = find_phase(*order);
            if (!phase) {
                out.violations.push_back("agent " + std::to_string(index_) + ": no phase " + std::to_string(*order));
                break;
            }
            if (const auto* t = phase->training()) {
                out.expected_score += solve(out.run_id, *t);
            } else if (const auto* q = std::get_if<definition::QuestionnairePhase>(&phase->body)) {
                std::vector<std::string> answers;
                for (std::size_t i = 0; i < q->questions.size(); ++i) answers.push_back("answer " + std::to_string(i));
                orch_.advance(out.run_id, who_, tick(), std::move(answers));
            } else {
                orch_.advance(out.run_id, who_, tick());
            }
        }
        auto final_run = orch_.run(out.run_id, who_);
        out.finished = final_run.state() == training::RunState::Finished;
        out.final_score = final_run.score().total_score;
        if (out.final_score != out.expected_score) {
            out.violations.push_back("agent " + std::to_string(index_) + ": score " + std::to_string(out.final_score) +
                                     " != expected " + std::to_string(out.expected_score));
        }

        AssignmentRecord release{AssignmentRecord::Release, who_.user_ref_id, out.sandbox_id};
        release.invoked = std::chrono::steady_clock::now();
        release.seq = orch_.release(kOperator, joined.run.ids().pool_id, out.sandbox_id);
        release.responded = std::chrono::steady_clock::now();
        record(history, history_mutex, release);
        return out;
    }

private:
    Timestamp tick() {
        if (options_.action_delay.count() > 0) std::this_thread::sleep_for(options_.action_delay);
        now_ += std::chrono::seconds(std::uniform_int_distribution<int>(5, 120)(rng_));
        return now_;
    }

    static void record(std::vector<AssignmentRecord>& history, std::mutex& m, const AssignmentRecord& r) {
        std::lock_guard lock(m);
        history.push_back(r);
    }

    const definition::Phase* find_phase(int order) const {
        for (const auto& p : definition_.phases) {
            if (p.order == order) return &p;
        }
        return nullptr;
    }

    void explore(std::int64_t run_id) {
        auto view = orch_.run_topology(run_id, who_);
        for (const auto& node : view.nodes) {
            if (node.role != compiler::NodeRole::Host || !node.running) continue;
            orch_.execute_command(run_id, who_, node.name, "/root", "ip addr", "bash", tick());
            orch_.execute_command(run_id, who_, node.name, "/root", "nmap -sV 10.10.0.0/16", "bash", tick());
            break;
        }
    }

    int solve(std::int64_t run_id, const definition::TrainingPhase& phase) {
        int penalties = 0;
        for (const auto* hint : phase.hints_in_display_order()) {
            bool reveal = false;
            if (options_.agent.scripted_hints) {
                const auto& wanted = *options_.agent.scripted_hints;
                reveal = std::find(wanted.begin(), wanted.end(), hint->order) != wanted.end();
            } else {
                reveal = std::bernoulli_distribution(options_.agent.hint_probability)(rng_);
            }
            if (!reveal) continue;
            orch_.reveal_hint(run_id, who_, hint->order, tick());
            penalties += hint->hint_penalty;
        }
        int wrong = options_.agent.scripted_hints
                        ? 0
                        : std::uniform_int_distribution<int>(0, std::max(0, options_.agent.max_wrong_flags))(rng_);
        bool forfeited = false;
        for (int i = 0; i < wrong; ++i) {
            auto guess = "guess-" + std::to_string(i);
            if (guess == phase.flag) guess += "x";
            if (orch_.submit_answer(run_id, who_, guess, tick()) == training::Verdict::LimitReached) {
                forfeited = true;
                break;
            }
        }
        orch_.submit_answer(run_id, who_, phase.flag, tick());
        return forfeited ? 0 : std::max(0, phase.max_score - penalties);
    }

    int index_;
    const SimulationOptions& options_;
    orchestrator::Orchestrator& orch_;
    const definition::TrainingDefinition& definition_;
    std::string token_;
    Principal who_;
    std::mt19937_64 rng_;
    Timestamp now_;
};

std::string canonical_export(const std::vector<training::TrainingEvent>& committed, std::int64_t first_sandbox) {
    std::map<std::int64_t, std::vector<const training::TrainingEvent*>> by_user;
    for (const auto& e : committed) by_user[e.ids.user_ref_id].push_back(&e);
    std::ostringstream out;
    for (const auto& [user, events] : by_user) {
        for (const auto* e : events) {
            auto copy = *e;
            copy.ids.training_run_id = user;
            copy.ids.sandbox_id = first_sandbox + user - 1;
            out << copy.to_json().dump() << '\n';
        }
    }
    return out.str();
}

}  // namespace

std::vector<std::string> check_linearizable(const std::vector<AssignmentRecord>& history) {
    std::vector<std::string> problems;
    std::set<std::uint64_t> seen;
    for (const auto& r : history) {
        if (!seen.insert(r.seq).second) problems.push_back("commit seq " + std::to_string(r.seq) + " reused");
    }
    for (const auto& a : history) {
        for (const auto& b : history) {
            if (a.responded < b.invoked && a.seq > b.seq) {
                problems.push_back("seq " + std::to_string(a.seq) + " completed before seq " + std::to_string(b.seq) +
                                   " started");
            }
        }
    }
    auto ordered = history;
    std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.seq < b.seq; });
    std::map<std::int64_t, std::int64_t> holder;  // sandbox -> user
    std::set<std::int64_t> released;
    for (const auto& r : ordered) {
        auto id = std::to_string(r.sandbox);
        if (r.kind == AssignmentRecord::Join) {
            if (released.count(r.sandbox)) problems.push_back("sandbox " + id + " reassigned after release");
            auto it = holder.find(r.sandbox);
            if (it != holder.end() && it->second != r.user) problems.push_back("sandbox " + id + " assigned twice");
            holder[r.sandbox] = r.user;
        } else {
            if (!holder.erase(r.sandbox)) problems.push_back("sandbox " + id + " released while unassigned");
            released.insert(r.sandbox);
        }
    }
    return problems;
}

int count_double_assignments(const std::vector<training::TrainingEvent>& events) {
    std::map<std::int64_t, std::set<std::int64_t>> runs_by_sandbox;
    for (const auto& e : events) {
        if (e.type == training::EventType::TrainingRunStarted) runs_by_sandbox[e.ids.sandbox_id].insert(e.ids.training_run_id);
    }
    int conflicts = 0;
    for (const auto& [sandbox, runs] : runs_by_sandbox) conflicts += static_cast<int>(runs.size()) - 1;
    return conflicts;
}

nlohmann::ordered_json SimulationReport::to_json() const {
    nlohmann::ordered_json histogram = nlohmann::ordered_json::object();
    for (const auto& [score, runs] : score_histogram) histogram[std::to_string(score)] = runs;
    nlohmann::ordered_json counts = nlohmann::ordered_json::object();
    for (const auto& [name, n] : event_counts) counts[name] = n;
    return {{"students", students},
            {"finished_runs", finished_runs},
            {"assignment_conflicts", assignment_conflicts},
            {"score_histogram", histogram},
            {"training_events", counts},
            {"command_events", command_events},
            {"violations", violations}};
}

std::string SimulationReport::to_text() const {
    std::ostringstream out;
    out << "students: " << students << '\n'
        << "finished runs: " << finished_runs << '\n'
        << "assignment conflicts: " << assignment_conflicts << '\n';
    if (!score_histogram.empty()) {
        long sum = 0;
        for (const auto& [score, runs] : score_histogram) sum += static_cast<long>(score) * runs;
        out << "score min/max/sum: " << score_histogram.begin()->first << '/' << score_histogram.rbegin()->first << '/'
            << sum << '\n';
    }
    out << "score distribution:\n";
    for (const auto& [score, runs] : score_histogram) out << "  " << score << ": " << runs << '\n';
    out << "training events:\n";
    for (const auto& [name, n] : event_counts) out << "  " << name << ": " << n << '\n';
    out << "command events: " << command_events << '\n';
    for (const auto& v : violations) out << "violation: " << v << '\n';
    return out.str();
}

SimulationResult simulate(const SimulationOptions& options) {
    if (options.students < 1) throw Error(ErrorCode::InvalidValue, "students must be at least 1");
    auto config = options.config;
    config.token_seed = options.seed;
    orchestrator::Orchestrator orch(config, options.database);

    auto sandbox_def = orch.add_sandbox_definition(kOperator, options.sandbox, "");
    auto training_def = orch.add_training_definition(kOperator, options.training_json);
    auto pool = orch.create_pool(kOperator, sandbox_def.id, options.students);
    if (!orch.wait_pool_settled(pool.id, 10min)) throw Error(ErrorCode::Io, "pool build timed out");
    auto built = orch.pool(pool.id);
    if (built.count(runtime::SandboxState::Ready) != static_cast<std::size_t>(options.students)) {
        throw Error(ErrorCode::InsufficientResources, "only " + std::to_string(built.count(runtime::SandboxState::Ready)) +
                                                          " sandboxes built");
    }
    auto instance = orch.create_instance(kOperator, training_def.id, pool.id, kWindowStart, kWindowStart + 24h * 30);

    SimulationResult result;
    result.pool_id = pool.id;
    std::vector<AgentOutcome> outcomes(options.students);
    std::mutex history_mutex;
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next++; i < options.students; i = next++) {
            Agent agent(i, options, orch, *training_def.definition, instance.access_token);
            try {
                outcomes[i] = agent.run(result.history, history_mutex);
            } catch (const std::exception& e) {
                outcomes[i].violations.push_back("agent " + std::to_string(i) + ": " + e.what());
            }
        }
    };
    unsigned threads = options.threads == 0 ? static_cast<unsigned>(options.students) : options.threads;
    std::vector<std::thread> pool_threads;
    for (unsigned t = 0; t < threads; ++t) pool_threads.emplace_back(worker);
    for (auto& t : pool_threads) t.join();

    auto& report = result.report;
    report.students = options.students;
    for (const auto& o : outcomes) {
        report.violations.insert(report.violations.end(), o.violations.begin(), o.violations.end());
        if (o.finished) ++report.score_histogram[o.final_score];
    }
    result.committed = orch.committed_events();
    for (const auto& e : result.committed) {
        auto name = training::qualified_name(e.type);
        ++report.event_counts[std::string(name.substr(name.rfind('.') + 1))];
        if (e.type == training::EventType::TrainingRunFinished) ++report.finished_runs;
    }
    analytics::TimelineFilter commands;
    commands.kind = analytics::EventKind::Command;
    report.command_events = static_cast<int>(orch.analytics().query_timeline(commands).size());
    analytics::TimelineFilter training_only;
    training_only.kind = analytics::EventKind::Training;
    auto analysed = orch.analytics().query_timeline(training_only).size();
    if (analysed != result.committed.size()) {
        report.violations.push_back("analytics holds " + std::to_string(analysed) + " training events, engine committed " +
                                    std::to_string(result.committed.size()));
    }
    report.assignment_conflicts = count_double_assignments(result.committed);
    for (auto& p : check_linearizable(result.history)) report.violations.push_back(std::move(p));
    if (report.assignment_conflicts > 0) {
        report.violations.push_back(std::to_string(report.assignment_conflicts) + " sandbox double-assignments");
    }
    if (report.finished_runs != options.students) {
        report.violations.push_back(std::to_string(report.finished_runs) + " of " + std::to_string(options.students) +
                                    " runs finished");
    }
    result.events_jsonl = canonical_export(result.committed, built.sandboxes.front().id);
    return result;
}

}  // namespace rangekit::sim
