#include <doctest.h>
#include <httplib.h>

#include <json.hpp>
#include <sstream>

#include "rangekit/orchestrator/http_api.hpp"
#include "support/corpus.hpp"

using namespace rangekit;
using namespace rangekit::orchestrator;
using rangekit::test::read_corpus;
using json = nlohmann::json;
using namespace std::chrono_literals;

namespace {

const Timestamp kStart = from_epoch_ms(1610611200000);  // 2021-01-14T08:00:00Z

struct Fixture {
    Fixture() : orch(OrchestratorConfig{}) {
        options.bearer_tokens = {{"staff-token", {1, Role::Instructor, "Ivy Instructor"}},
                                 {"alice-token", {2, Role::Trainee, "Alice"}},
                                 {"bob-token", {3, Role::Trainee, "Bob"}}};
        options.clock = [this] { return now; };
        options.access_log = &log;
        server = std::make_unique<ApiServer>(orch, options);
        port = server->bind("127.0.0.1", 0);
        server->start();
        client = std::make_unique<httplib::Client>("127.0.0.1", port);
    }

    httplib::Headers auth(const std::string& token) { return {{"Authorization", "Bearer " + token}}; }

    std::pair<int, json> post(const std::string& token, const std::string& path, const json& body = json::object()) {
        auto res = client->Post(path, auth(token), body.dump(), "application/json");
        REQUIRE(res);
        return {res->status, res->body.empty() ? json() : json::parse(res->body)};
    }

    std::pair<int, json> get(const std::string& token, const std::string& path) {
        auto res = client->Get(path, auth(token));
        REQUIRE(res);
        return {res->status, json::parse(res->body)};
    }

    Orchestrator orch;
    ApiOptions options;
    std::ostringstream log;
    Timestamp now = kStart + 1min;
    std::unique_ptr<ApiServer> server;
    int port = 0;
    std::unique_ptr<httplib::Client> client;
};

}  // namespace

TEST_CASE("full trainee session over HTTP") {
    Fixture f;
    auto topology = test::replace_once(read_corpus("reference_topology.yml"), "  - name: server\n",
                                       "  - name: server\n    hidden: true\n");
    auto [s1, sdef] = f.post("staff-token", "/definitions",
                             {{"kind", "sandbox"}, {"topology", topology},
                              {"provisioning", read_corpus("reference_playbook.yml")}});
    REQUIRE(s1 == 201);
    auto [s2, tdef] = f.post("staff-token", "/definitions",
                             {{"kind", "training"}, {"text", read_corpus("reference_training.json")}});
    REQUIRE(s2 == 201);
    CHECK(f.get("staff-token", "/definitions/training/" + std::to_string(tdef["id"].get<int>())).first == 200);
    CHECK(f.get("staff-token", "/definitions/sandbox/77").first == 404);

    auto [s3, pool] = f.post("staff-token", "/pools", {{"definition_id", sdef["id"]}, {"size", 2}});
    REQUIRE(s3 == 201);
    REQUIRE(f.orch.wait_pool_settled(pool["id"].get<std::int64_t>(), 10s));

    auto [s4, inst] = f.post("staff-token", "/instances",
                             {{"training_definition_id", tdef["id"]}, {"pool_id", pool["id"]},
                              {"start", "2021-01-14T08:00:00Z"}, {"end", "2021-01-14T12:00:00Z"}});
    REQUIRE(s4 == 201);
    auto token = inst["access_token"].get<std::string>();

    auto [s5, run] = f.post("alice-token", "/runs", {{"access_token", token}});
    CHECK(s5 == 201);
    auto run_path = "/runs/" + std::to_string(run["training_run_id"].get<int>());
    CHECK(f.post("alice-token", "/runs", {{"access_token", token}}).first == 200);
    CHECK(f.post("alice-token", "/runs", {{"access_token", "nope-0000"}}).first == 404);

    CHECK(f.post("alice-token", run_path + "/answers", {{"answer", "x"}}).first == 409);
    auto [sa, adv] = f.post("alice-token", run_path + "/advance");
    CHECK(sa == 200);
    CHECK(adv["current_phase"] == 1);
    auto [sh, hint] = f.post("alice-token", run_path + "/hints/0");
    CHECK(sh == 200);
    CHECK(!hint["content"].get<std::string>().empty());
    CHECK(f.post("alice-token", run_path + "/hints/9").first == 404);
    auto [s6, verdict] = f.post("alice-token", run_path + "/answers", {{"answer", "service-name-1.23"}});
    CHECK(s6 == 200);
    CHECK(verdict["verdict"] == "correct");
    CHECK(verdict["run"]["total_score"] == 90);
    CHECK(f.post("bob-token", run_path + "/answers", {{"answer", "x"}}).first == 403);
    CHECK(f.post("alice-token", run_path + "/answers", json::object()).first == 422);

    auto [s7, view] = f.get("alice-token", run_path + "/topology");
    CHECK(s7 == 200);
    CHECK(view.dump().find("\"server\"") == std::string::npos);
    auto [s8, full] = f.get("staff-token", run_path + "/topology");
    CHECK(s8 == 200);
    CHECK(full.dump().find("\"server\"") != std::string::npos);

    auto [s9, cmd] = f.post("alice-token", run_path + "/commands", {{"node", "home"}, {"cmd", "ls -la"}});
    CHECK(s9 == 200);
    CHECK(f.post("alice-token", run_path + "/commands", {{"node", "server"}, {"cmd", "id"}}).first == 404);

    auto [s10, progress] = f.get("staff-token", "/instances/" + std::to_string(inst["id"].get<int>()) + "/progress?privacy=1");
    CHECK(s10 == 200);
    CHECK(progress["trainees"].size() == 1);
    CHECK(progress.dump().find("Alice") == std::string::npos);
    CHECK(f.get("alice-token", "/instances/" + std::to_string(inst["id"].get<int>()) + "/progress").first == 403);

    auto exported = f.client->Get("/export/events?kind=command", f.auth("staff-token"));
    REQUIRE(exported);
    CHECK(exported->status == 200);
    CHECK(exported->body.find("ls -la") != std::string::npos);

    f.now = kStart + 5h;
    CHECK(f.post("alice-token", run_path + "/advance").first == 409);

    auto log = f.log.str();
    CHECK(log.find("POST /runs 201 2/trainee") != std::string::npos);
    CHECK(log.find(" 403 3/trainee") != std::string::npos);
}

TEST_CASE("authentication and error bodies") {
    Fixture f;
    auto res = f.client->Get("/pools/1");
    REQUIRE(res);
    CHECK(res->status == 401);
    CHECK(json::parse(res->body)["error"] == "Unauthorized");
    CHECK(f.get("wrong", "/pools/1").first == 401);
    CHECK(f.get("staff-token", "/pools/1").first == 404);
    CHECK(f.get("staff-token", "/runs/abc").first == 422);
    auto bad = f.client->Post("/pools", f.auth("staff-token"), "{oops", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 422);
    CHECK(f.post("alice-token", "/definitions", {{"kind", "training"}, {"text", "{}"}}).first == 403);
    CHECK(f.log.str().find(" 401 -") != std::string::npos);
}

TEST_CASE("status mapping") {
    CHECK(http_status(ErrorCode::PoolExhausted) == 409);
    CHECK(http_status(ErrorCode::InvalidWindow) == 422);
    CHECK(http_status(ErrorCode::InstanceNotFound) == 404);
    CHECK(http_status(ErrorCode::Storage) == 500);
}
