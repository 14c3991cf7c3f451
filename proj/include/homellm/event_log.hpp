#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "homellm/context.hpp"

namespace homellm {

enum class EventKind {
    command_received,
    completion_received,
    proposal_created,
    proposal_applied,
    proposal_rejected,
    validation_violation,
    adapter_error,
};

std::string_view to_string(EventKind kind) noexcept;
EventKind parse_event_kind(std::string_view text);

struct EventRecord {
    std::uint64_t seq = 0;
    /// Microseconds since the Unix epoch; strictly increasing per log.
    std::int64_t timestamp_us = 0;
    EventKind kind = EventKind::command_received;
    Json payload = Json::object();
};

Json to_json(const EventRecord& record);
EventRecord event_from_json(const Json& doc);

/// Append-only JSON-lines log, flushed after every record. An empty path
/// keeps the log in memory only.
class EventLog {
public:
    explicit EventLog(std::filesystem::path file = {});

    EventRecord append(EventKind kind, Json payload);

    std::vector<EventRecord> since(std::uint64_t seq) const;
    std::vector<EventRecord> all() const { return since(0); }
    const std::filesystem::path& file() const noexcept { return file_; }

private:
    std::filesystem::path file_;
    std::ofstream out_;
    mutable std::mutex mutex_;
    std::vector<EventRecord> records_;
    std::int64_t last_timestamp_ = 0;
};

/// Reads a log file written by EventLog. Throws IoError / SyntaxError.
std::vector<EventRecord> read_event_log(const std::filesystem::path& file);

} // namespace homellm
