#include "rangekit/analytics/store.hpp"

#include <algorithm>
#include <mutex>
#include <ostream>

#include "rangekit/core/error.hpp"

namespace rangekit::analytics {

std::string_view to_string(EventKind kind) { return kind == EventKind::Command ? "command" : "training"; }

bool TimelineFilter::matches(const StoredEvent& e) const {
    if (sandbox_id && e.sandbox_id != *sandbox_id) return false;
    if (run_id && e.run_id != *run_id) return false;
    if (instance_id && e.instance_id != *instance_id) return false;
    if (user && e.user != *user) return false;
    if (kind && e.kind != *kind) return false;
    if (from && e.timestamp < *from) return false;
    if (to && e.timestamp >= *to) return false;
    return true;
}

StoredEvent EventStore::classify(const nlohmann::ordered_json& payload) {
    if (!payload.is_object()) throw Error(ErrorCode::SchemaError, "event payload must be an object");
    StoredEvent e;
    e.payload = payload;
    auto type = payload.find("type");
    if (type != payload.end() && type->is_string() && type->get<std::string>().rfind("events.trainings.", 0) == 0) {
        auto ev = training::TrainingEvent::from_json(nlohmann::json(payload));
        e.kind = EventKind::Training;
        e.timestamp = ev.timestamp;
        e.sandbox_id = std::to_string(ev.ids.sandbox_id);
        e.run_id = ev.ids.training_run_id;
        e.instance_id = ev.ids.training_instance_id;
        e.user = std::to_string(ev.ids.user_ref_id);
    } else if (payload.contains("cmd")) {
        auto entry = CommandLogEntry::from_json(payload);
        e.kind = EventKind::Command;
        e.timestamp = entry.timestamp.instant;
        e.sandbox_id = entry.sandbox_id;
        e.user = entry.username;
    } else {
        throw Error(ErrorCode::SchemaError, "payload is neither a training event nor a command entry");
    }
    return e;
}

EventStore::EventStore(std::filesystem::path journal) : journal_path_(journal) {
    if (std::filesystem::exists(journal)) {
        std::ifstream in(journal);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            nlohmann::ordered_json rec;
            try {
                rec = nlohmann::ordered_json::parse(line);
            } catch (const nlohmann::json::parse_error&) {
                // A torn final line from a crash mid-append is dropped.
                if (in.peek() == std::char_traits<char>::eof()) break;
                throw Error(ErrorCode::Storage, journal.string() + ":" + std::to_string(lineno) + ": corrupt journal line");
            }
            auto e = classify(rec.at("payload"));
            e.seq = rec.at("seq").get<std::uint64_t>();
            e.source = rec.at("source").get<std::string>();
            if (rec.contains("offset")) e.source_offset = rec.at("offset").get<std::uint64_t>();
            if (e.source_offset) seen_[{e.source, *e.source_offset}] = e.seq;
            events_.push_back(std::move(e));
            index(events_.size() - 1);
        }
    }
    journal_.open(journal, std::ios::app);
    if (!journal_) throw Error(ErrorCode::Io, "cannot open journal " + journal.string());
}

IngestResult EventStore::ingest(const nlohmann::ordered_json& payload, const std::string& source,
                                std::optional<std::uint64_t> offset) {
    auto e = classify(payload);
    e.source = source;
    e.source_offset = offset;
    return append(std::move(e));
}

IngestResult EventStore::ingest(const CommandLogEntry& entry, const std::string& source,
                                std::optional<std::uint64_t> offset) {
    return ingest(entry.to_json(), source, offset);
}

IngestResult EventStore::ingest(const training::TrainingEvent& event, const std::string& source,
                                std::optional<std::uint64_t> offset) {
    return ingest(event.to_json(), source, offset);
}

IngestResult EventStore::append(StoredEvent e) {
    std::unique_lock lock(mutex_);
    if (e.source_offset) {
        auto it = seen_.find({e.source, *e.source_offset});
        if (it != seen_.end()) return {it->second, false};
    }
    e.seq = events_.empty() ? 1 : events_.back().seq + 1;
    if (journal_path_) {
        nlohmann::ordered_json rec{{"seq", e.seq}, {"source", e.source}};
        if (e.source_offset) rec["offset"] = *e.source_offset;
        rec["payload"] = e.payload;
        journal_ << rec.dump() << '\n';
        journal_.flush();
        if (!journal_) throw Error(ErrorCode::Storage, "journal write failed");
    }
    if (e.source_offset) seen_[{e.source, *e.source_offset}] = e.seq;
    events_.push_back(std::move(e));
    index(events_.size() - 1);
    return {events_.back().seq, true};
}

void EventStore::index(std::size_t pos) {
    const auto& e = events_[pos];
    by_sandbox_[e.sandbox_id].push_back(pos);
    by_user_[e.user].push_back(pos);
    if (e.run_id) by_run_[*e.run_id].push_back(pos);
    if (e.instance_id) by_instance_[*e.instance_id].push_back(pos);
}

std::vector<StoredEvent> EventStore::query_timeline(const TimelineFilter& filter) const {
    std::shared_lock lock(mutex_);
    static const std::vector<std::size_t> kNone;
    const std::vector<std::size_t>* candidates = nullptr;
    auto narrow = [&](const auto& index, const auto& key) {
        auto it = index.find(key);
        const auto* list = it == index.end() ? &kNone : &it->second;
        if (!candidates || list->size() < candidates->size()) candidates = list;
    };
    if (filter.run_id) narrow(by_run_, *filter.run_id);
    if (filter.sandbox_id) narrow(by_sandbox_, *filter.sandbox_id);
    if (filter.instance_id) narrow(by_instance_, *filter.instance_id);
    if (filter.user) narrow(by_user_, *filter.user);

    std::vector<StoredEvent> out;
    auto consider = [&](const StoredEvent& e) {
        if (filter.matches(e)) out.push_back(e);
    };
    if (candidates) {
        for (auto pos : *candidates) consider(events_[pos]);
    } else {
        for (const auto& e : events_) consider(e);
    }
    std::stable_sort(out.begin(), out.end(), [](const StoredEvent& a, const StoredEvent& b) {
        return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.seq < b.seq;
    });
    return out;
}

std::vector<training::TrainingEvent> EventStore::training_events(const TimelineFilter& filter) const {
    auto f = filter;
    f.kind = EventKind::Training;
    std::vector<training::TrainingEvent> out;
    for (const auto& e : query_timeline(f)) out.push_back(training::TrainingEvent::from_json(nlohmann::json(e.payload)));
    return out;
}

void EventStore::export_jsonl(std::ostream& out, const TimelineFilter& filter) const {
    for (const auto& e : query_timeline(filter)) out << e.payload.dump() << '\n';
}

std::size_t EventStore::size() const {
    std::shared_lock lock(mutex_);
    return events_.size();
}

std::uint64_t EventStore::last_seq() const {
    std::shared_lock lock(mutex_);
    return events_.empty() ? 0 : events_.back().seq;
}

}  // namespace rangekit::analytics
