#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <sstream>
#include <thread>

#include "rangekit/analytics/command_log.hpp"
#include "rangekit/analytics/progress.hpp"
#include "rangekit/analytics/store.hpp"
#include "rangekit/analytics/syslog_listener.hpp"
#include "rangekit/core/error.hpp"
#include "rangekit/definition/training.hpp"
#include "rangekit/training/run.hpp"
#include "support/corpus.hpp"

using namespace rangekit;
using namespace rangekit::analytics;
using rangekit::test::read_corpus;
using ojson = nlohmann::ordered_json;

namespace {

std::string reference_line() {
    auto text = read_corpus("reference_command_log.txt");
    return text.substr(0, text.find_last_not_of("\r\n") + 1);
}

const UtcOffset kPlusTwo = UtcOffset::parse("+02:00");

// Escaper written independently of the parser: backslash before `"` and `\`.
std::string oracle_quote(const std::string& raw) {
    std::string out;
    for (char c : raw) {
        if (c == '\\') out += "\\\\";
        else if (c == '"') out += "\\\"";
        else out += c;
    }
    return "\"" + out + "\"";
}

std::string replace_all_copy(std::string s, const std::string& from, const std::string& to) {
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) s.replace(pos, from.size(), to);
    return s;
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error thrown");
    return ErrorCode::Io;
}

training::TrainingEvent flag_event() {
    return training::TrainingEvent::from_json(nlohmann::json::parse(read_corpus("reference_wrong_flag_event.json")));
}

std::filesystem::path temp_path(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("rangekit-" + std::to_string(::getpid()) + "-" + name);
    std::filesystem::remove(p);
    return p;
}

}  // namespace

TEST_CASE("reference log line becomes the stored entry") {
    auto entry = parse_syslog_line(reference_line(), kPlusTwo);
    auto expected = ojson::parse(read_corpus("reference_command_entry.json"));
    CHECK(entry.to_json() == expected);
    CHECK(entry.to_json().dump() == expected.dump());
    CHECK(entry.cmd == "ssh alice@server");
    CHECK(entry.sandbox_id == "1");
    CHECK(entry.cmd_type == "bash-command");
    CHECK(CommandLogEntry::from_json(expected) == entry);
}

TEST_CASE("syslog grammar") {
    SUBCASE("priority prefix") {
        CHECK(parse_syslog_line("<13>" + reference_line(), kPlusTwo) == parse_syslog_line(reference_line(), kPlusTwo));
    }
    SUBCASE("missing cmd") {
        CHECK(code_of([] { parse_syslog_line(R"(Feb 17 2021 9:17:33 username="root" client src="10.10.40.5")", kPlusTwo); }) ==
              ErrorCode::MalformedLine);
    }
    SUBCASE("missing timestamp") {
        CHECK(code_of([] { parse_syslog_line(R"(username="root" client cmd="ls")", kPlusTwo); }) == ErrorCode::MalformedLine);
        CHECK(code_of([] { parse_syslog_line(R"(Feb 30 2021 9:17:33 cmd="ls")", kPlusTwo); }) == ErrorCode::MalformedLine);
    }
    SUBCASE("unterminated quote and bad src") {
        CHECK(code_of([] { parse_syslog_line(R"(Feb 17 2021 9:17:33 cmd="ls)", kPlusTwo); }) == ErrorCode::MalformedLine);
        CHECK(code_of([] { parse_syslog_line(R"(Feb 17 2021 9:17:33 src="fe80::1" cmd="ls")", kPlusTwo); }) ==
              ErrorCode::MalformedLine);
    }
    SUBCASE("escaped quotes") {
        auto e = parse_syslog_line(R"(Feb 17 2021 9:17:33 client cmd="echo \"hi\"" uid="3")", kPlusTwo);
        CHECK(e.cmd == "echo \"hi\"");
    }
    SUBCASE("unknown keys are kept") {
        auto e = parse_syslog_line(R"(Feb 17 2021 10:00:00 client cmd="ls" tty="pts/1" pid=42)", UtcOffset{});
        CHECK(e.extras == std::vector<std::pair<std::string, std::string>>{{"tty", "pts/1"}, {"pid", "42"}});
        CHECK(e.to_json()["extras"]["pid"] == "42");
        CHECK(e.to_json()["timestamp"] == "2021-02-17T10:00:00+00:00");
    }
}

TEST_CASE("quoting oracle: arbitrary command text survives the line format") {
    std::mt19937 rng(99);
    const std::string alphabet = "ab \"\\'=$|;/\t-x0";
    for (int i = 0; i < 500; ++i) {
        std::string raw;
        int len = std::uniform_int_distribution<int>(1, 24)(rng);
        for (int k = 0; k < len; ++k) raw += alphabet[std::uniform_int_distribution<std::size_t>(0, alphabet.size() - 1)(rng)];
        if (raw.find_first_not_of(" \t") == std::string::npos) raw += "z";
        auto line = "Mar 1 2022 23:59:59 username=" + oracle_quote("u") + " node src=\"10.0.0.1\" wd=\"/\" cmd=" +
                    oracle_quote(raw) + " cmd_type=\"zsh\" uid=\"7\"";
        auto entry = parse_syslog_line(line, UtcOffset{});
        REQUIRE(entry.cmd == raw);
        CHECK(oracle_quote(entry.cmd) == oracle_quote(raw));
        CHECK(format_syslog_line(entry) == replace_all_copy(line, "cmd_type=\"zsh\"", "cmd_type=\"zsh-command\""));
        auto reparsed = CommandLogEntry::from_json(ojson::parse(entry.to_json().dump()));
        CHECK(reparsed == entry);
        CHECK(parse_syslog_line(format_syslog_line(entry), UtcOffset{}) == entry);
    }
}

TEST_CASE("cmd_type normalization") {
    CHECK(normalize_cmd_type("bash") == "bash-command");
    CHECK(normalize_cmd_type("bash-command") == "bash-command");
    CHECK(normalize_cmd_type("") == "");
}

TEST_CASE("store ingest and dedup") {
    EventStore store;
    auto flag = ojson::parse(read_corpus("reference_wrong_flag_event.json"));
    auto first = store.ingest(flag, "portal", 5);
    CHECK(first.inserted);
    auto again = store.ingest(flag, "portal", 5);
    CHECK_FALSE(again.inserted);
    CHECK(again.seq == first.seq);
    CHECK(store.size() == 1);
    CHECK(store.ingest(flag, "portal").inserted);
    CHECK(store.size() == 2);

    TimelineFilter by_run;
    by_run.run_id = 28;
    auto hits = store.query_timeline(by_run);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].payload.dump() == flag.dump());
    CHECK(store.training_events(by_run).front() == flag_event());

    auto bad = flag;
    bad["phase_id"] = -1;
    CHECK(code_of([&] { store.ingest(bad, "portal"); }) == ErrorCode::SchemaError);
    CHECK(code_of([&] { store.ingest(ojson{{"hello", 1}}, "portal"); }) == ErrorCode::SchemaError);
    CHECK(code_of([&] { store.ingest(ojson::array(), "portal"); }) == ErrorCode::SchemaError);
    CHECK(store.size() == 2);
}

TEST_CASE("timeline queries") {
    EventStore store;
    CHECK(store.query_timeline().empty());

    store.ingest(parse_syslog_line(reference_line(), kPlusTwo), "udp:test");
    TimelineFilter by_sandbox;
    by_sandbox.sandbox_id = "1";
    auto hits = store.query_timeline(by_sandbox);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].payload == ojson::parse(read_corpus("reference_command_entry.json")));
    by_sandbox.sandbox_id = "2";
    CHECK(store.query_timeline(by_sandbox).empty());
}

TEST_CASE("sort oracle: 100 random events come back in timestamp order") {
    std::mt19937_64 rng(5);
    EventStore store;
    std::vector<std::pair<std::int64_t, std::uint64_t>> expected;  // (ms, seq)
    auto base = flag_event();
    for (int i = 0; i < 100; ++i) {
        std::int64_t ms = 1610618680000 + std::uniform_int_distribution<int>(0, 40)(rng) * 1000;
        std::uint64_t seq;
        if (i % 2) {
            auto e = base;
            e.timestamp = from_epoch_ms(ms);
            seq = store.ingest(e, "portal").seq;
        } else {
            auto c = parse_syslog_line(reference_line(), UtcOffset{});
            c.timestamp.instant = from_epoch_ms(ms);
            seq = store.ingest(c, "udp").seq;
        }
        expected.emplace_back(ms, seq);
    }
    std::sort(expected.begin(), expected.end());
    TimelineFilter all;
    all.from = from_epoch_ms(0);
    all.to = from_epoch_ms(4102444800000);
    auto got = store.query_timeline(all);
    REQUIRE(got.size() == 100);
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(to_epoch_ms(got[i].timestamp) == expected[i].first);
        CHECK(got[i].seq == expected[i].second);
    }
    auto again = store.query_timeline(all);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(again[i].seq == got[i].seq);

    TimelineFilter window;
    window.from = from_epoch_ms(1610618690000);
    window.to = from_epoch_ms(1610618700000);
    auto in_window = std::count_if(expected.begin(), expected.end(), [](auto& p) {
        return p.first >= 1610618690000 && p.first < 1610618700000;
    });
    CHECK(store.query_timeline(window).size() == static_cast<std::size_t>(in_window));
    TimelineFilter commands;
    commands.kind = EventKind::Command;
    CHECK(store.query_timeline(commands).size() == 50);
}

TEST_CASE("journal survives reopen and drops a torn tail") {
    auto path = temp_path("journal.jsonl");
    {
        EventStore store(path);
        store.ingest(ojson::parse(read_corpus("reference_wrong_flag_event.json")), "portal", 1);
        store.ingest(parse_syslog_line(reference_line(), kPlusTwo), "udp");
    }
    {
        std::ofstream torn(path, std::ios::app);
        torn << R"({"seq":3,"source":"x","payl)";
    }
    EventStore reopened(path);
    CHECK(reopened.size() == 2);
    CHECK(reopened.last_seq() == 2);
    CHECK_FALSE(reopened.ingest(ojson::parse(read_corpus("reference_wrong_flag_event.json")), "portal", 1).inserted);
    std::ostringstream out;
    reopened.export_jsonl(out);
    auto text = out.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    std::filesystem::remove(path);
}

TEST_CASE("progress fold on a scripted stream") {
    training::RunIds ids{1, 2, 3, 4, 5, 6};
    auto ev = [&](training::EventType type, std::int64_t phase, std::int64_t gt, int score = 0) {
        training::TrainingEvent e;
        e.type = type;
        e.phase_id = phase;
        e.game_time = gt;
        e.timestamp = from_epoch_ms(gt);
        e.actual_score_in_level = score;
        e.ids = ids;
        return e;
    };
    using T = training::EventType;
    CHECK(summarize({}).empty());

    std::vector<training::TrainingEvent> stream{ev(T::TrainingRunStarted, 0, 0), ev(T::PhaseStarted, 0, 0),
                                                ev(T::PhaseCompleted, 0, 500), ev(T::PhaseStarted, 1, 500, 100)};
    auto hint = ev(T::HintDisplayed, 1, 900, 90);
    hint.hint_order = 0;
    stream.push_back(hint);
    auto s = summarize(stream);
    REQUIRE(s.size() == 1);
    CHECK(s[0].current_phase == 1);
    CHECK(s[0].find_phase(1)->state == PhaseState::Active);
    CHECK(s[0].find_phase(1)->hints.size() == 1);
    CHECK(s[0].find_phase(0)->duration_ms() == 500);
    CHECK(s[0].provisional_score == 90);
    CHECK_FALSE(s[0].find_phase(1)->solution_displayed);

    stream.push_back(ev(T::SolutionDisplayed, 1, 1000, 0));
    s = summarize(stream);
    CHECK(s[0].find_phase(1)->solution_displayed);
    CHECK(s[0].to_json()["phases"][1]["solution_displayed"] == true);
}

TEST_CASE("progress fold ignores cross-run interleaving") {
    auto def = std::make_shared<const definition::TrainingDefinition>(
        definition::parse_training(read_corpus("reference_training.json")).value);
    std::mt19937_64 rng(11);
    std::vector<std::vector<training::TrainingEvent>> per_run;
    for (int r = 1; r <= 6; ++r) {
        training::EventList events;
        auto run = training::TrainingRun::start(def, {r, 100 + r, 9, 7, 200 + r, 40}, from_epoch_ms(0), events);
        run.advance(from_epoch_ms(10 * r), events);
        if (r % 2) run.reveal_hint(r % 3, from_epoch_ms(20 * r), events);
        if (r == 3) run.reveal_solution(from_epoch_ms(70), events);
        if (r < 5) run.submit_answer("service-name-1.23", from_epoch_ms(100 * r), events);
        per_run.push_back(events);
    }
    std::vector<training::TrainingEvent> sequential;
    for (const auto& evs : per_run) sequential.insert(sequential.end(), evs.begin(), evs.end());
    auto reference = summarize(sequential);
    CHECK(reference.size() == 6);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::size_t> cursor(per_run.size(), 0);
        std::vector<training::TrainingEvent> mixed;
        while (mixed.size() < sequential.size()) {
            auto r = std::uniform_int_distribution<std::size_t>(0, per_run.size() - 1)(rng);
            if (cursor[r] < per_run[r].size()) mixed.push_back(per_run[r][cursor[r]++]);
        }
        CHECK(summarize(mixed) == reference);
    }
    CHECK(reference[2].find_phase(1)->solution_displayed);
    CHECK(reference[0].finished);
    CHECK_FALSE(reference[4].finished);
}

TEST_CASE("syslog listener feeds the store over udp and tcp") {
    EventStore store;
    std::atomic<std::uint64_t> rejected{0};
    SyslogListener listener(store_handler(store, kPlusTwo, &rejected));
    auto udp_port = listener.listen_udp("127.0.0.1", 0);
    auto tcp_port = listener.listen_tcp("127.0.0.1", 0);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);

    int u = socket(AF_INET, SOCK_DGRAM, 0);
    addr.sin_port = htons(udp_port);
    auto line = reference_line();
    sendto(u, line.data(), line.size(), 0, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    std::string junk = "not a log line";
    sendto(u, junk.data(), junk.size(), 0, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    close(u);

    int t = socket(AF_INET, SOCK_STREAM, 0);
    addr.sin_port = htons(tcp_port);
    REQUIRE(connect(t, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    std::string two = line + "\n" + line + "\n";
    send(t, two.data(), two.size(), 0);
    close(t);

    for (int i = 0; i < 100 && (store.size() < 3 || rejected < 1); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(20));
    listener.stop();
    CHECK(store.size() == 3);
    CHECK(rejected == 1);
    for (const auto& e : store.query_timeline()) CHECK(e.payload == ojson::parse(read_corpus("reference_command_entry.json")));
}
