#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "rangekit/analytics/command_log.hpp"
#include "rangekit/core/time.hpp"
#include "rangekit/training/events.hpp"

namespace rangekit::analytics {

enum class EventKind { Command, Training };

std::string_view to_string(EventKind kind);

struct StoredEvent {
    std::uint64_t seq = 0;
    EventKind kind = EventKind::Command;
    std::string source;
    std::optional<std::uint64_t> source_offset;
    Timestamp timestamp{};
    nlohmann::ordered_json payload;  // exactly as ingested

    // Index keys extracted from the payload.
    std::string sandbox_id;
    std::optional<std::int64_t> run_id;
    std::optional<std::int64_t> instance_id;
    std::string user;  // username for commands, user_ref_id for training events
};

struct TimelineFilter {
    std::optional<std::string> sandbox_id;
    std::optional<std::int64_t> run_id;
    std::optional<std::int64_t> instance_id;
    std::optional<std::string> user;
    std::optional<EventKind> kind;
    std::optional<Timestamp> from;  // inclusive
    std::optional<Timestamp> to;    // exclusive

    bool matches(const StoredEvent& e) const;
};

struct IngestResult {
    std::uint64_t seq = 0;
    bool inserted = false;  // false when (source, offset) was seen before
};

/// Append-only event log with secondary indexes by sandbox, run, instance,
/// user and time. With a journal path, every append is written (and flushed)
/// as one JSON line before it becomes visible, and the journal is replayed on
/// construction. Queries run concurrently with ingest and see a prefix of it.
class EventStore {
public:
    EventStore() = default;
    explicit EventStore(std::filesystem::path journal);

    /// Validates and appends a payload. Training events are recognised by an
    /// `events.trainings.*` type, commands by a `cmd` key. Throws
    /// Error{SchemaError}.
    IngestResult ingest(const nlohmann::ordered_json& payload, const std::string& source,
                        std::optional<std::uint64_t> offset = std::nullopt);
    IngestResult ingest(const CommandLogEntry& entry, const std::string& source,
                        std::optional<std::uint64_t> offset = std::nullopt);
    IngestResult ingest(const training::TrainingEvent& event, const std::string& source,
                        std::optional<std::uint64_t> offset = std::nullopt);

    /// Matching events ordered by timestamp, then sequence number.
    std::vector<StoredEvent> query_timeline(const TimelineFilter& filter = {}) const;
    std::vector<training::TrainingEvent> training_events(const TimelineFilter& filter = {}) const;

    /// One payload per line, in timeline order.
    void export_jsonl(std::ostream& out, const TimelineFilter& filter = {}) const;

    std::size_t size() const;
    std::uint64_t last_seq() const;

private:
    IngestResult append(StoredEvent event);
    void index(std::size_t pos);
    static StoredEvent classify(const nlohmann::ordered_json& payload);

    mutable std::shared_mutex mutex_;
    std::vector<StoredEvent> events_;
    std::map<std::pair<std::string, std::uint64_t>, std::uint64_t> seen_;
    std::map<std::string, std::vector<std::size_t>> by_sandbox_;
    std::map<std::int64_t, std::vector<std::size_t>> by_run_;
    std::map<std::int64_t, std::vector<std::size_t>> by_instance_;
    std::map<std::string, std::vector<std::size_t>> by_user_;
    std::optional<std::filesystem::path> journal_path_;
    std::ofstream journal_;
};

}  // namespace rangekit::analytics
