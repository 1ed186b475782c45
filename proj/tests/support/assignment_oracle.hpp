#pragma once

// Sequential reference for sandbox assignment. Replays a recorded concurrent
// history in commit order against a plain map model, and checks that commit
// order respects real-time order between non-overlapping operations.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace rangekit::test {

struct AssignmentOp {
    enum Kind { Join, Release } kind = Join;
    std::int64_t user = 0;  // Join only
    std::int64_t sandbox = 0;
    std::int64_t run = 0;  // Join only
    std::uint64_t seq = 0;
    std::chrono::steady_clock::time_point invoked;
    std::chrono::steady_clock::time_point responded;
};

inline std::vector<std::string> check_assignment_history(const std::set<std::int64_t>& pool,
                                                         std::vector<AssignmentOp> history) {
    std::vector<std::string> problems;
    std::set<std::uint64_t> seqs;
    for (const auto& op : history) {
        if (!seqs.insert(op.seq).second) problems.push_back("commit sequence " + std::to_string(op.seq) + " reused");
    }
    for (const auto& a : history) {
        for (const auto& b : history) {
            if (a.responded < b.invoked && !(a.seq < b.seq)) {
                problems.push_back("op " + std::to_string(a.seq) + " finished before op " + std::to_string(b.seq) +
                                   " started but commits later");
            }
        }
    }
    std::sort(history.begin(), history.end(), [](const auto& a, const auto& b) { return a.seq < b.seq; });
    std::map<std::int64_t, std::int64_t> holder;    // sandbox -> user
    std::map<std::int64_t, std::pair<std::int64_t, std::int64_t>> seat;  // user -> (sandbox, run)
    std::set<std::int64_t> released;
    for (const auto& op : history) {
        auto tag = "op " + std::to_string(op.seq) + ": ";
        if (op.kind == AssignmentOp::Join) {
            if (auto it = seat.find(op.user); it != seat.end()) {
                if (it->second != std::pair{op.sandbox, op.run}) problems.push_back(tag + "rejoin returned a different seat");
                continue;
            }
            if (!pool.count(op.sandbox)) problems.push_back(tag + "sandbox outside the pool");
            if (holder.count(op.sandbox)) problems.push_back(tag + "sandbox " + std::to_string(op.sandbox) + " double-assigned");
            if (released.count(op.sandbox)) problems.push_back(tag + "released sandbox reassigned");
            holder[op.sandbox] = op.user;
            seat[op.user] = {op.sandbox, op.run};
        } else {
            if (!holder.count(op.sandbox) || released.count(op.sandbox)) {
                problems.push_back(tag + "release of an unassigned sandbox");
            }
            released.insert(op.sandbox);
        }
    }
    return problems;
}

}  // namespace rangekit::test
