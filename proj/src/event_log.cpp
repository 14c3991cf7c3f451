#include "homellm/event_log.hpp"

#include <chrono>

#include "homellm/error.hpp"

namespace homellm {

namespace {

constexpr EventKind kKinds[] = {EventKind::command_received,  EventKind::completion_received,
                                EventKind::proposal_created,  EventKind::proposal_applied,
                                EventKind::proposal_rejected, EventKind::validation_violation,
                                EventKind::adapter_error};

} // namespace

std::string_view to_string(EventKind kind) noexcept {
    switch (kind) {
    case EventKind::command_received: return "command_received";
    case EventKind::completion_received: return "completion_received";
    case EventKind::proposal_created: return "proposal_created";
    case EventKind::proposal_applied: return "proposal_applied";
    case EventKind::proposal_rejected: return "proposal_rejected";
    case EventKind::validation_violation: return "validation_violation";
    case EventKind::adapter_error: return "adapter_error";
    }
    return "?";
}

EventKind parse_event_kind(std::string_view text) {
    for (auto k : kKinds)
        if (to_string(k) == text) return k;
    throw Error(Errc::StructureError, "unknown event kind '" + std::string(text) + "'");
}

Json to_json(const EventRecord& r) {
    Json doc = Json::object();
    doc["seq"] = r.seq;
    doc["ts_us"] = r.timestamp_us;
    doc["kind"] = to_string(r.kind);
    doc["payload"] = r.payload;
    return doc;
}

EventRecord event_from_json(const Json& doc) {
    try {
        return {doc.at("seq").get<std::uint64_t>(), doc.at("ts_us").get<std::int64_t>(),
                parse_event_kind(doc.at("kind").get<std::string>()), doc.at("payload")};
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::StructureError, std::string("event record: ") + e.what());
    }
}

EventLog::EventLog(std::filesystem::path file) : file_(std::move(file)) {
    if (file_.empty()) return;
    if (std::filesystem::exists(file_)) {
        records_ = read_event_log(file_);
        if (!records_.empty()) last_timestamp_ = records_.back().timestamp_us;
    }
    out_.open(file_, std::ios::app);
    if (!out_) throw Error(Errc::IoError, "cannot open event log " + file_.string());
}

EventRecord EventLog::append(EventKind kind, Json payload) {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::duration_cast<std::chrono::microseconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
    last_timestamp_ = std::max<std::int64_t>(now, last_timestamp_ + 1);
    EventRecord record{records_.empty() ? 1 : records_.back().seq + 1, last_timestamp_, kind, std::move(payload)};
    if (out_.is_open()) {
        out_ << to_json(record).dump() << '\n';
        out_.flush();
        if (!out_) throw Error(Errc::IoError, "event log write failed");
    }
    records_.push_back(record);
    return record;
}

std::vector<EventRecord> EventLog::since(std::uint64_t seq) const {
    std::lock_guard lock(mutex_);
    std::vector<EventRecord> out;
    for (const auto& r : records_)
        if (r.seq > seq) out.push_back(r);
    return out;
}

std::vector<EventRecord> read_event_log(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(Errc::IoError, "cannot read event log " + file.string());
    std::vector<EventRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            records.push_back(event_from_json(Json::parse(line)));
        } catch (const nlohmann::json::parse_error&) {
            // A torn final line from a crash mid-write is skipped.
            if (in.peek() == std::char_traits<char>::eof()) break;
            throw Error(Errc::SyntaxError, "corrupt event log line in " + file.string());
        }
    }
    return records;
}

} // namespace homellm
