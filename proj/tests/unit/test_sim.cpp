#include <doctest.h>

#include "rangekit/core/error.hpp"
#include "rangekit/sim/simulation.hpp"
#include "support/assignment_oracle.hpp"
#include "support/corpus.hpp"

using namespace rangekit;
using rangekit::test::read_corpus;

namespace {

sim::SimulationOptions reference_options(int students, std::uint64_t seed) {
    sim::SimulationOptions o;
    o.training_json = read_corpus("reference_training.json");
    o.sandbox = {"corpus", "", read_corpus("reference_topology.yml"), read_corpus("reference_playbook.yml")};
    o.students = students;
    o.seed = seed;
    return o;
}

std::vector<test::AssignmentOp> as_ops(const std::vector<sim::AssignmentRecord>& history) {
    std::vector<test::AssignmentOp> ops;
    for (const auto& r : history) {
        ops.push_back({r.kind == sim::AssignmentRecord::Join ? test::AssignmentOp::Join : test::AssignmentOp::Release,
                       r.user, r.sandbox, r.run, r.seq, r.invoked, r.responded});
    }
    return ops;
}

}  // namespace

TEST_CASE("scripted single agent scores 75") {
    auto o = reference_options(1, 3);
    o.agent.scripted_hints = std::vector<int>{0, 2};
    auto r = sim::simulate(o);
    CHECK(r.report.ok());
    CHECK(r.report.finished_runs == 1);
    CHECK(r.report.score_histogram == std::map<int, int>{{75, 1}});
    CHECK(r.report.event_counts["HintDisplayed"] == 2);
    CHECK(r.report.event_counts.count("WrongFlagSubmitted") == 0);
}

TEST_CASE("zero students is a usage error") {
    try {
        sim::simulate(reference_options(0, 1));
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidValue);
    }
}

TEST_CASE("concurrent agents are deterministic and exclusive") {
    auto a = sim::simulate(reference_options(40, 7));
    auto b = sim::simulate(reference_options(40, 7));
    CHECK(a.report.ok());
    CHECK(a.report.finished_runs == 40);
    CHECK(a.report.assignment_conflicts == 0);
    CHECK(a.report.to_text() == b.report.to_text());
    CHECK(a.events_jsonl == b.events_jsonl);
    CHECK(test::check_assignment_history([&] {
        std::set<std::int64_t> pool;
        for (const auto& r : a.history) pool.insert(r.sandbox);
        return pool;
    }(), as_ops(a.history)).empty());

    auto c = sim::simulate(reference_options(40, 8));
    CHECK(c.events_jsonl != a.events_jsonl);
}

TEST_CASE("single-threaded export equals the raw commit log") {
    auto o = reference_options(5, 11);
    o.threads = 1;
    auto r = sim::simulate(o);
    std::string raw;
    for (const auto& e : r.committed) raw += e.to_json().dump() + "\n";
    CHECK(r.events_jsonl == raw);
}

TEST_CASE("linearizability checker flags violations") {
    auto t0 = std::chrono::steady_clock::now();
    auto t = [&](int ms) { return t0 + std::chrono::milliseconds(ms); };
    std::vector<sim::AssignmentRecord> ok{{sim::AssignmentRecord::Join, 1, 10, 1, 1, t(0), t(1)},
                                          {sim::AssignmentRecord::Join, 2, 11, 2, 2, t(2), t(3)},
                                          {sim::AssignmentRecord::Release, 1, 10, 0, 3, t(4), t(5)}};
    CHECK(sim::check_linearizable(ok).empty());
    auto twice = ok;
    twice[1].sandbox = 10;
    CHECK(!sim::check_linearizable(twice).empty());
    auto reordered = ok;
    std::swap(reordered[0].seq, reordered[1].seq);
    CHECK(!sim::check_linearizable(reordered).empty());
}
