#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "homellm/context.hpp"
#include "homellm/gateway.hpp"
#include "homellm/prompt.hpp"
#include "homellm/response.hpp"

namespace homellm::eval {

enum class ContextName { Simple, Medium, Complex };
enum class CommandName { Direct, Indirect, Ambiguous, AmbiguousWork, AmbiguousSleep };

std::string_view to_string(ContextName name) noexcept;
std::string_view to_string(CommandName name) noexcept;
/// Report label: Direct, Indirect, Ambiguous, Ambiguous*, Ambiguous**.
std::string_view command_label(CommandName name) noexcept;
std::string_view command_text(CommandName name) noexcept;

/// Both throw UnknownFixture.
ContextName parse_context_name(std::string_view text);
CommandName parse_command_name(std::string_view text);

struct Scenario {
    ContextName context_name = ContextName::Simple;
    CommandName command_name = CommandName::Direct;
    HomeContext context;
    Command command;

    std::string cell_id() const;
};

HomeContext fixture_context(ContextName name);
SchemaRegistry fixture_registry(ContextName name);

Scenario build_fixture(ContextName context, CommandName command);
Scenario build_fixture(std::string_view context, std::string_view command);

/// The eleven reported cells: the 3x3 grid, then Ambiguous*/Ambiguous** on Complex.
std::vector<Scenario> default_cells();
/// "all" or a comma-separated list of Context/Command ids. Throws UnknownFixture.
std::vector<Scenario> parse_cells(std::string_view spec);

struct RaterLabel {
    std::string rater;
    int label = 0;
};

struct TrialError {
    std::string code;
    std::string message;
};

struct TrialRecord {
    std::string id;
    ContextName context_name = ContextName::Simple;
    CommandName command_name = CommandName::Direct;
    int trial_index = 1;
    std::string raw_response;
    double latency_seconds = 0.0;
    std::optional<ChangeSet> changeset;
    std::string shape;
    std::optional<TrialError> error;
    std::vector<RaterLabel> labels;
};

Json to_json(const TrialRecord& record);
TrialRecord trial_from_json(const Json& doc);

using RecordSink = std::function<void(const TrialRecord&)>;

/// Runs `trials` sequential trials per cell. Backend and processing failures
/// are recorded in the trial. Each finished record is handed to `sink`
/// before the next trial starts. Throws InvalidArgument if trials < 1.
std::vector<TrialRecord> run_matrix(std::span<const Scenario> cells, int trials, Gateway& gateway,
                                    const RecordSink& sink = {});

/// One label per record, in record order. Throws LabelOutOfDomain,
/// DuplicateRater or InvalidArgument (count mismatch). Records are untouched
/// on error.
void rate_trials(std::vector<TrialRecord>& records, const std::string& rater, std::span<const double> labels);

struct ReportRow {
    ContextName context_name = ContextName::Simple;
    CommandName command_name = CommandName::Direct;
    double avg_quality = 0.0;
    double avg_latency = 0.0;
    std::size_t trials = 0;
    std::size_t raters = 0;
    std::size_t labels = 0;
};

struct ScenarioReport {
    std::vector<ReportRow> rows;
};

/// Throws UnratedTrials if any record has no label.
ScenarioReport aggregate(std::span<const TrialRecord> records);

std::string format_table(const ScenarioReport& report);
std::string format_csv(const ScenarioReport& report);

// Record files: one JSON document per line.
std::vector<TrialRecord> load_records(const std::filesystem::path& file);
void save_records(const std::filesystem::path& file, std::span<const TrialRecord> records);
void append_record(const std::filesystem::path& file, const TrialRecord& record);

/// Review file for one rater: one line per record with an empty "label" slot.
void write_review_file(const std::filesystem::path& file, std::span<const TrialRecord> records);
/// Reads filled-in labels back, ordered like `records`. Throws InvalidArgument
/// when a record has no label line or the slot is still empty.
std::vector<double> read_review_labels(const std::filesystem::path& file, std::span<const TrialRecord> records);

} // namespace homellm::eval
