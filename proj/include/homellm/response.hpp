#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "homellm/context.hpp"

namespace homellm {

/// The first balanced top-level {...} object in a completion, with offsets
/// into the original text: text == completion.substr(start, end - start).
struct RawPayload {
    std::string text;
    std::size_t start_offset = 0;
    std::size_t end_offset = 0;
};

/// Scans left to right, honoring string literals and escapes inside the
/// object. Throws NoPayload.
RawPayload extract_payload(std::string_view completion);

enum class ProposalShape { full_context, devices_only, partial_devices };

std::string_view to_string(ProposalShape shape) noexcept;

struct OverlayEntry {
    DevicePath path;
    std::string property;
    Json value;
};

/// A proposal normalized to a flat list of property writes, in document order.
struct ProposalOverlay {
    ProposalShape shape = ProposalShape::partial_devices;
    std::vector<OverlayEntry> entries;
    /// The proposal's "user" block, if it carried one.
    std::optional<Json> user;

    std::size_t device_count() const;
};

/// Accepts a full context document, a {"devices": ...} document or a bare
/// room -> type -> device -> property subtree. Throws SyntaxError or
/// StructureError.
ProposalOverlay parse_proposal(const RawPayload& raw);

struct Change {
    DevicePath path;
    std::string property;
    PropertyValue old_value;
    PropertyValue new_value;

    friend bool operator==(const Change&, const Change&) = default;
};

struct ChangeSet {
    std::vector<Change> changes;
    /// Proposal entries rejected by validation.
    std::vector<Violation> dropped;

    bool empty() const noexcept { return changes.empty(); }
};

enum class ValidationPolicy { drop_invalid_fields, reject_all_on_violation };

ChangeSet validate_and_diff(const HomeContext& current, const ProposalOverlay& overlay, const SchemaRegistry& registry,
                            ValidationPolicy policy = ValidationPolicy::drop_invalid_fields);

/// Brute-force reference diff of two contexts with identical room/device/
/// property structure. Throws StructureMismatch.
ChangeSet diff_oracle(const HomeContext& current, const HomeContext& proposed);

/// extract -> parse -> validate_and_diff in one step.
struct ProcessedProposal {
    ProposalShape shape = ProposalShape::partial_devices;
    ChangeSet changeset;
};

ProcessedProposal process_completion(std::string_view completion, const HomeContext& current,
                                     const SchemaRegistry& registry,
                                     ValidationPolicy policy = ValidationPolicy::drop_invalid_fields);

Json to_json(const Change& change);
Json to_json(const Violation& violation);
Json to_json(const ChangeSet& changeset);
Change change_from_json(const Json& doc);
Violation violation_from_json(const Json& doc);
ChangeSet changeset_from_json(const Json& doc);

} // namespace homellm
