#include <doctest.h>

#include <random>
#include <set>
#include <thread>

#include "rangekit/core/error.hpp"
#include "rangekit/training/engine.hpp"
#include "support/corpus.hpp"

using namespace rangekit;
using namespace rangekit::training;
using rangekit::definition::parse_training;

namespace {

std::shared_ptr<const definition::TrainingDefinition> reference_definition() {
    static auto def = std::make_shared<const definition::TrainingDefinition>(
        parse_training(rangekit::test::read_corpus("reference_training.json")).value);
    return def;
}

std::shared_ptr<const definition::TrainingDefinition> three_phase_definition() {
    return std::make_shared<const definition::TrainingDefinition>(parse_training(R"({"title":"Three","phases":[
        {"title":"a","phase_type":"TRAINING","order":0,"max_score":100,"flag":"alpha",
         "hints":[{"title":"h","content":"first hint","hint_penalty":10,"order":0}]},
        {"title":"b","phase_type":"TRAINING","order":1,"max_score":100,"flag":"bravo",
         "hints":[{"title":"h","content":"x","hint_penalty":25,"order":0}]},
        {"title":"c","phase_type":"TRAINING","order":2,"max_score":100,"flag":"charlie","incorrect_flag_limit":2},
        {"title":"post","phase_type":"QUESTIONNAIRE","order":3,"questions":[{"prompt":"Fun?"}]}]})")
                                                                      .value);
}

RunIds sample_ids(std::int64_t run = 28) { return {run, 19, 12, 7, 104, 40}; }

const Timestamp t0 = from_epoch_ms(1610615634236);

Timestamp at(std::int64_t offset_ms) { return t0 + std::chrono::milliseconds{offset_ms}; }

std::vector<EventType> types(const EventList& events) {
    std::vector<EventType> out;
    for (const auto& e : events) out.push_back(e.type);
    return out;
}

}  // namespace

TEST_CASE("starting a run activates the lowest phase") {
    EventList events;
    auto run = TrainingRun::start(reference_definition(), sample_ids(), t0, events);
    CHECK(run.state() == RunState::Running);
    CHECK(run.current_phase_order() == 0);
    CHECK(run.score().total_score == 0);
    CHECK(types(events) == std::vector{EventType::TrainingRunStarted, EventType::PhaseStarted});

    EventList more;
    auto direct = TrainingRun::start(three_phase_definition(), sample_ids(), t0, more);
    CHECK(direct.current_phase_order() == 0);
    CHECK(direct.progress_for(0)->kind == definition::PhaseKind::Training);
}

TEST_CASE("flag submissions on the reference training phase") {
    EventList events;
    auto run = TrainingRun::start(reference_definition(), sample_ids(), t0, events);
    CHECK(run.advance(at(1000), events) == 1);

    SUBCASE("wrong flag event mirrors the portal record") {
        events.clear();
        CHECK(run.submit_answer(".invoices2019", at(3045985), events) == Verdict::Incorrect);
        REQUIRE(events.size() == 1);
        const auto& e = events[0];
        CHECK(e.type == EventType::WrongFlagSubmitted);
        CHECK(e.flag_content == ".invoices2019");
        CHECK(e.count == 1);
        CHECK(e.actual_score_in_level == 100);
        CHECK(e.game_time == 3045985);
        auto json = e.to_json();
        CHECK(json["type"] == "events.trainings.WrongFlagSubmitted");
        CHECK(json["sandbox_id"] == 104);
        CHECK(json["pool_id"] == 40);
    }
    SUBCASE("correct flag") {
        CHECK(run.submit_answer("service-name-1.23", at(5000), events) == Verdict::Correct);
        CHECK(run.state() == RunState::Finished);
        CHECK(run.score().total_score == 100);
    }
    SUBCASE("surrounding whitespace is ignored, case is not") {
        CHECK(run.submit_answer("  service-name-1.23  ", at(5000), events) == Verdict::Correct);
    }
    SUBCASE("case sensitive") {
        CHECK(run.submit_answer("Service-Name-1.23", at(5000), events) == Verdict::Incorrect);
    }
}

TEST_CASE("phase kind guards") {
    EventList events;
    auto run = TrainingRun::start(reference_definition(), sample_ids(), t0, events);
    auto expect_code = [](auto&& fn, ErrorCode code) {
        try {
            fn();
            FAIL("expected " << to_string(code));
        } catch (const Error& e) {
            CHECK(e.code() == code);
        }
    };
    expect_code([&] { run.submit_answer("x", at(1), events); }, ErrorCode::PhaseNotAnswerable);
    expect_code([&] { run.reveal_hint(0, at(1), events); }, ErrorCode::PhaseNotAnswerable);
    expect_code([&] { run.reveal_solution(at(1), events); }, ErrorCode::PhaseNotAnswerable);
    run.advance(at(2), events);
    expect_code([&] { run.advance(at(3), events); }, ErrorCode::PhaseNotAdvanceable);
    expect_code([&] { run.reveal_hint(7, at(3), events); }, ErrorCode::UnknownHint);
    run.submit_answer("service-name-1.23", at(4), events);
    expect_code([&] { run.submit_answer("x", at(5), events); }, ErrorCode::RunFinished);
    expect_code([&] { run.advance(at(5), events); }, ErrorCode::RunFinished);
}

TEST_CASE("hint penalties") {
    EventList events;
    auto run = TrainingRun::start(reference_definition(), sample_ids(), t0, events);
    run.advance(at(10), events);

    SUBCASE("hints 0 and 2 cost 10 and 15") {
        CHECK(run.reveal_hint(0, at(20), events) == "You should use **nmap** to scan the server (see **man nmap**).");
        run.reveal_hint(2, at(30), events);
        CHECK(run.progress_for(1)->actual_score_in_level == 75);
        run.submit_answer("service-name-1.23", at(40), events);
        CHECK(run.score().total_score == 75);
    }
    SUBCASE("revealing twice is idempotent") {
        events.clear();
        run.reveal_hint(0, at(20), events);
        run.reveal_hint(0, at(30), events);
        CHECK(run.progress_for(1)->actual_score_in_level == 90);
        CHECK(events.size() == 1);
        CHECK(events[0].hint_order == 0);
    }
}

TEST_CASE("solution reveal zeroes the phase and is emitted once") {
    EventList events;
    auto run = TrainingRun::start(reference_definition(), sample_ids(), t0, events);
    run.advance(at(10), events);
    events.clear();
    CHECK(run.reveal_solution(at(20), events).rfind("```root@attacker:~# nmap -sV", 0) == 0);
    run.reveal_solution(at(30), events);
    CHECK(std::count_if(events.begin(), events.end(), [](const auto& e) { return e.type == EventType::SolutionDisplayed; }) == 1);
    CHECK(run.progress_for(1)->actual_score_in_level == 0);
    CHECK(run.state() == RunState::Running);
    run.reveal_hint(1, at(35), events);
    CHECK(run.progress_for(1)->actual_score_in_level == 0);
    run.submit_answer("service-name-1.23", at(40), events);
    CHECK(run.score().total_score == 0);
}

TEST_CASE("incorrect flag limit reveals the solution once") {
    EventList events;
    auto run = TrainingRun::start(three_phase_definition(), sample_ids(), t0, events);
    run.submit_answer("alpha", at(1), events);
    run.submit_answer("bravo", at(2), events);
    events.clear();
    CHECK(run.submit_answer("nope", at(3), events) == Verdict::Incorrect);
    CHECK(run.submit_answer("nope", at(4), events) == Verdict::LimitReached);
    CHECK(run.progress_for(2)->solution_revealed);
    CHECK(run.submit_answer("nope", at(5), events) == Verdict::Incorrect);
    CHECK(run.progress_for(2)->wrong_submissions == 2);
    CHECK(types(events) == std::vector{EventType::WrongFlagSubmitted, EventType::WrongFlagSubmitted,
                                       EventType::SolutionDisplayed, EventType::WrongFlagSubmitted});
    CHECK(run.submit_answer("charlie", at(6), events) == Verdict::Correct);
    CHECK(run.score().total_score == 200);
}

TEST_CASE("scores across phases") {
    EventList events;
    auto run = TrainingRun::start(three_phase_definition(), sample_ids(), t0, events);
    CHECK(run.score().total_score == 0);
    run.reveal_hint(0, at(1), events);
    run.submit_answer("alpha", at(2), events);
    run.reveal_hint(0, at(3), events);
    CHECK(run.score().total_score == 90);
    CHECK(run.score().provisional_score == 75);
    run.submit_answer("bravo", at(4), events);
    CHECK(run.score().total_score == 165);
    run.submit_answer("charlie", at(5), events);
    CHECK(run.score().total_score == 265);
    CHECK(run.advance(at(6), events, {"yes"}) == std::nullopt);
    CHECK(run.state() == RunState::Finished);
    CHECK(run.progress_for(3)->answers == std::vector<std::string>{"yes"});
    CHECK(events.back().type == EventType::TrainingRunFinished);
    CHECK(events.back().total_score == 265);
}

TEST_CASE("three full-score phases add to 300") {
    auto def = std::make_shared<definition::TrainingDefinition>(*three_phase_definition());
    def->phases[2].training()->incorrect_flag_limit = 100;
    EventList events;
    auto run = TrainingRun::start(def, sample_ids(), t0, events);
    run.submit_answer("alpha", at(1), events);
    run.submit_answer("bravo", at(2), events);
    run.submit_answer("charlie", at(3), events);
    CHECK(run.score().total_score == 300);
}

TEST_CASE("event stream invariants") {
    std::mt19937_64 rng(7);
    auto def = three_phase_definition();
    for (int trial = 0; trial < 50; ++trial) {
        EventList events;
        auto run = TrainingRun::start(def, sample_ids(), t0, events);
        std::int64_t clock = 0;
        while (run.state() != RunState::Finished) {
            clock += std::uniform_int_distribution<int>(0, 5000)(rng);
            int action = std::uniform_int_distribution<int>(0, 4)(rng);
            auto order = *run.current_phase_order();
            const auto* phase = def->find_phase(order);
            if (!phase->training()) {
                run.advance(at(clock), events);
            } else if (action == 0 && !phase->training()->hints.empty()) {
                run.reveal_hint(0, at(clock), events);
            } else if (action == 1) {
                run.submit_answer("wrong", at(clock), events);
            } else if (action == 2 && std::uniform_int_distribution<int>(0, 9)(rng) == 0) {
                run.reveal_solution(at(clock), events);
            } else {
                run.submit_answer(phase->training()->flag, at(clock), events);
            }
        }
        std::int64_t last_game_time = 0;
        std::vector<std::int64_t> completed;
        for (const auto& e : events) {
            CHECK(e.game_time == to_epoch_ms(e.timestamp) - to_epoch_ms(t0));
            CHECK(e.game_time >= last_game_time);
            last_game_time = e.game_time;
            if (e.type == EventType::PhaseCompleted) completed.push_back(e.phase_id);
        }
        CHECK(completed == std::vector<std::int64_t>{0, 1, 2, 3});
        CHECK(events.back().total_score == run.score().total_score);
    }
}

TEST_CASE("a clock running backwards does not rewind game time") {
    EventList events;
    auto run = TrainingRun::start(reference_definition(), sample_ids(), t0, events);
    run.advance(at(5000), events);
    run.reveal_hint(0, at(1000), events);
    CHECK(events.back().game_time == 5000);
}

TEST_CASE("replay is deterministic and persistence round-trips") {
    auto script = [](TrainingRun::DefinitionPtr def) {
        EventList events;
        auto run = TrainingRun::start(def, sample_ids(), t0, events);
        run.advance(at(100), events);
        run.submit_answer("guess", at(200), events);
        run.reveal_hint(2, at(300), events);
        run.submit_answer("service-name-1.23", at(400), events);
        std::string wire;
        for (const auto& e : events) wire += e.to_json().dump() + "\n";
        return std::pair{run, wire};
    };
    auto [run_a, wire_a] = script(reference_definition());
    auto [run_b, wire_b] = script(reference_definition());
    CHECK(wire_a == wire_b);

    auto restored = TrainingRun::from_json(run_a.to_json(), reference_definition());
    CHECK(restored == run_a);

    EventList events;
    auto mid = TrainingRun::start(reference_definition(), sample_ids(), t0, events);
    mid.advance(at(100), events);
    mid.reveal_hint(0, at(150), events);
    auto copy = TrainingRun::from_json(nlohmann::json::parse(mid.to_json().dump()), reference_definition());
    CHECK(copy == mid);
    copy.submit_answer("service-name-1.23", at(200), events);
    CHECK(copy.score().total_score == 90);
}

TEST_CASE("event json round trip and schema errors") {
    auto doc = nlohmann::json::parse(rangekit::test::read_corpus("reference_wrong_flag_event.json"));
    auto e = TrainingEvent::from_json(doc);
    CHECK(e.ids == RunIds{28, 19, 12, 7, 104, 40});
    CHECK(e.phase_id == 36);
    CHECK(nlohmann::json(e.to_json()) == doc);

    auto bad = doc;
    bad["phase_id"] = -1;
    CHECK_THROWS_AS(TrainingEvent::from_json(bad), Error);
    bad = doc;
    bad.erase("training_run_id");
    CHECK_THROWS_AS(TrainingEvent::from_json(bad), Error);
    bad = doc;
    bad["type"] = "events.trainings.Teleported";
    CHECK_THROWS_AS(TrainingEvent::from_json(bad), Error);
}

TEST_CASE("engine registry") {
    std::vector<TrainingEvent> sunk;
    std::mutex sunk_mutex;
    TrainingEngine engine([&](const TrainingEvent& e) {
        std::lock_guard lock(sunk_mutex);
        sunk.push_back(e);
    });
    engine.start_run(reference_definition(), sample_ids(1), t0);
    try {
        engine.start_run(reference_definition(), sample_ids(1), t0);
        FAIL("expected DuplicateRun");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DuplicateRun);
    }
    CHECK_THROWS_AS(engine.score(99), Error);
    engine.advance(1, at(10));
    CHECK(engine.reveal_hint(1, 2, at(20)).find("-sV") != std::string::npos);
    CHECK(engine.submit_answer(1, "service-name-1.23", at(30)) == Verdict::Correct);
    CHECK(engine.score(1).total_score == 85);
    CHECK(sunk.back().type == EventType::TrainingRunFinished);
}

TEST_CASE("failed commit leaves the run untouched") {
    bool fail = false;
    TrainingEngine engine({}, [&](const TrainingRun&, const EventList&) {
        if (fail) throw Error(ErrorCode::Storage, "disk full");
    });
    engine.start_run(reference_definition(), sample_ids(1), t0);
    engine.advance(1, at(1));
    fail = true;
    CHECK_THROWS_AS(engine.reveal_hint(1, 0, at(2)), Error);
    CHECK(engine.snapshot(1).progress_for(1)->revealed_hints.empty());
    fail = false;
    engine.reveal_hint(1, 0, at(3));
    CHECK(engine.score(1).provisional_score == 90);
}

TEST_CASE("distinct runs proceed in parallel with per-run event order") {
    std::mutex m;
    std::map<std::int64_t, std::vector<EventType>> seen;
    TrainingEngine engine([&](const TrainingEvent& e) {
        std::lock_guard lock(m);
        seen[e.ids.training_run_id].push_back(e.type);
    });
    auto def = three_phase_definition();
    std::vector<std::thread> threads;
    for (int i = 1; i <= 8; ++i) {
        threads.emplace_back([&, i] {
            engine.start_run(def, sample_ids(i), t0);
            engine.submit_answer(i, "alpha", at(1));
            engine.submit_answer(i, "bravo", at(2));
            engine.submit_answer(i, "charlie", at(3));
            engine.advance(i, at(4));
        });
    }
    for (auto& t : threads) t.join();
    for (int i = 1; i <= 8; ++i) {
        CHECK(engine.score(i).total_score == 300);
        CHECK(seen[i].front() == EventType::TrainingRunStarted);
        CHECK(seen[i].back() == EventType::TrainingRunFinished);
    }
}

#include "support/scoring_oracle.hpp"

TEST_CASE("scores agree with an independent scorer on random scripts") {
    using rangekit::test::OracleOp;
    auto def = three_phase_definition();
    std::vector<rangekit::test::OraclePhase> table;
    for (const auto* p : def->phases_in_order()) {
        rangekit::test::OraclePhase row;
        if (const auto* t = p->training()) {
            row.training = true;
            row.max_score = t->max_score;
            row.flag = t->flag;
            row.limit = t->incorrect_flag_limit;
            for (const auto& h : t->hints) row.penalties[h.order] = h.hint_penalty;
        }
        table.push_back(row);
    }
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 200; ++trial) {
        EventList events;
        auto run = TrainingRun::start(def, sample_ids(), t0, events);
        std::vector<rangekit::test::OracleStep> script;
        std::int64_t clock = 0;
        while (run.state() != RunState::Finished) {
            ++clock;
            const auto& row = table[*run.current_phase_order()];
            if (!row.training) {
                script.push_back({OracleOp::Advance});
                run.advance(at(clock), events);
                continue;
            }
            int pick = std::uniform_int_distribution<int>(0, 9)(rng);
            if (pick < 3 && !row.penalties.empty()) {
                int h = row.penalties.begin()->first;
                script.push_back({OracleOp::Hint, h});
                run.reveal_hint(h, at(clock), events);
            } else if (pick == 3) {
                script.push_back({OracleOp::Solution});
                run.reveal_solution(at(clock), events);
            } else if (pick < 7) {
                script.push_back({OracleOp::Wrong});
                run.submit_answer("not-" + row.flag, at(clock), events);
            } else {
                script.push_back({OracleOp::Correct});
                run.submit_answer(row.flag, at(clock), events);
            }
        }
        CHECK(run.score().total_score == rangekit::test::oracle_total(table, script));
    }
}
