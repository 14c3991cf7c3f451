#include "homellm/response.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <tuple>

#include "homellm/error.hpp"

namespace homellm {

std::string_view to_string(ProposalShape shape) noexcept {
    switch (shape) {
    case ProposalShape::full_context: return "full_context";
    case ProposalShape::devices_only: return "devices_only";
    case ProposalShape::partial_devices: return "partial_devices";
    }
    return "?";
}

RawPayload extract_payload(std::string_view text) {
    const auto open = text.find('{');
    if (open == std::string_view::npos) throw Error(Errc::NoPayload, "no '{' in completion");

    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = open; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (escaped) escaped = false;
            else if (c == '\\') escaped = true;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0)
            return RawPayload{std::string(text.substr(open, i + 1 - open)), open, i + 1};
    }
    throw Error(Errc::NoPayload, "unbalanced braces in completion");
}

std::size_t ProposalOverlay::device_count() const {
    std::set<DevicePath> seen;
    for (const auto& e : entries) seen.insert(e.path);
    return seen.size();
}

namespace {

void walk_devices(const Json& rooms, std::vector<OverlayEntry>& out) {
    auto require = [](const Json& v, const std::string& where) {
        if (!v.is_object()) throw Error(Errc::StructureError, where + " is not an object");
    };
    require(rooms, "devices");
    for (const auto& [room, types] : rooms.items()) {
        require(types, "room '" + room + "'");
        for (const auto& [type, devices] : types.items()) {
            require(devices, room + "/" + type);
            for (const auto& [device, props] : devices.items()) {
                require(props, room + "/" + type + "/" + device);
                for (const auto& [prop, value] : props.items())
                    out.push_back({DevicePath{room, type, device}, prop, value});
            }
        }
    }
}

std::optional<std::string> switch_text(const Json& value) {
    if (!value.is_string()) return std::nullopt;
    std::string s = value.get<std::string>();
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

/// Converts a proposed JSON value under its schema, or names the violation.
std::variant<PropertyValue, ViolationKind> convert(const PropertySchema& schema, const Json& value) {
    switch (schema.kind) {
    case PropertyKind::Switch: {
        auto s = switch_text(value);
        if (s == "on") return PropertyValue{Switch::on};
        if (s == "off") return PropertyValue{Switch::off};
        return ViolationKind::WrongKind;
    }
    case PropertyKind::Integer:
        if (!value.is_number_integer()) return ViolationKind::WrongKind;
        if (value.is_number_unsigned() && value.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX))
            return ViolationKind::OutOfRange;
        return PropertyValue{value.get<std::int64_t>()};
    case PropertyKind::Text:
        if (!value.is_string()) return ViolationKind::WrongKind;
        return PropertyValue{value.get<std::string>()};
    }
    return ViolationKind::WrongKind;
}

} // namespace

ProposalOverlay parse_proposal(const RawPayload& raw) {
    Json doc;
    try {
        doc = Json::parse(raw.text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(Errc::SyntaxError, e.what());
    }
    if (!doc.is_object()) throw Error(Errc::StructureError, "proposal is not an object");

    ProposalOverlay overlay;
    if (doc.contains("devices")) {
        for (const auto& [key, _] : doc.items())
            if (key != "devices" && key != "user")
                throw Error(Errc::StructureError, "unexpected top-level key '" + key + "'");
        if (doc.contains("user")) {
            if (!doc.at("user").is_object()) throw Error(Errc::StructureError, "user is not an object");
            overlay.user = doc.at("user");
            overlay.shape = ProposalShape::full_context;
        } else {
            overlay.shape = ProposalShape::devices_only;
        }
        walk_devices(doc.at("devices"), overlay.entries);
    } else {
        overlay.shape = ProposalShape::partial_devices;
        walk_devices(doc, overlay.entries);
    }
    return overlay;
}

ChangeSet validate_and_diff(const HomeContext& current, const ProposalOverlay& overlay, const SchemaRegistry& registry,
                            ValidationPolicy policy) {
    ChangeSet out;
    if (overlay.user && *overlay.user != user_to_json(current.user))
        out.dropped.push_back({DevicePath{}, "user", ViolationKind::ImmutableViolation, "user context is immutable"});

    std::set<std::tuple<DevicePath, std::string>> seen;
    for (const auto& entry : overlay.entries) {
        auto drop = [&](ViolationKind kind, std::string detail) {
            out.dropped.push_back({entry.path, entry.property, kind, std::move(detail)});
        };
        const Device* device = current.find_device(entry.path);
        if (!device) {
            if (!registry.find(entry.path.device_type))
                drop(ViolationKind::UnknownDeviceType, "no schema for type '" + entry.path.device_type + "'");
            else
                drop(ViolationKind::UnknownDevice, "no such device in the home");
            continue;
        }
        const DeviceSchema* device_schema = registry.find(entry.path.device_type);
        if (!device_schema) {
            drop(ViolationKind::UnknownDeviceType, "no schema for type '" + entry.path.device_type + "'");
            continue;
        }
        const PropertySchema* schema = device_schema->properties.find(entry.property);
        const PropertyValue* old_value = device->properties.find(entry.property);
        if (!schema || !old_value) {
            drop(ViolationKind::InventedField, "device has no property '" + entry.property + "'");
            continue;
        }
        auto converted = convert(*schema, entry.value);
        if (auto* kind = std::get_if<ViolationKind>(&converted)) {
            drop(*kind, "value " + entry.value.dump());
            continue;
        }
        PropertyValue new_value = std::get<PropertyValue>(std::move(converted));
        if (auto kind = check_value(*schema, new_value)) {
            drop(*kind, "value " + entry.value.dump());
            continue;
        }
        if (new_value == *old_value) continue;
        if (!schema->is_mutable) {
            drop(ViolationKind::ImmutableViolation, "property is read-only");
            continue;
        }
        if (!seen.emplace(entry.path, entry.property).second) continue;
        out.changes.push_back({entry.path, entry.property, *old_value, std::move(new_value)});
    }

    if (policy == ValidationPolicy::reject_all_on_violation && !out.dropped.empty()) out.changes.clear();
    return out;
}

ChangeSet diff_oracle(const HomeContext& current, const HomeContext& proposed) {
    auto mismatch = [](const std::string& what) { return Error(Errc::StructureMismatch, what); };
    if (current.rooms.size() != proposed.rooms.size()) throw mismatch("room sets differ");

    ChangeSet out;
    for (const auto& [room_name, room] : current.rooms) {
        const Room* other_room = proposed.rooms.find(room_name);
        if (!other_room || other_room->devices.size() != room.devices.size()) throw mismatch("room " + room_name);
        for (const auto& [type, devices] : room.devices) {
            const auto* other_devices = other_room->devices.find(type);
            if (!other_devices || other_devices->size() != devices.size()) throw mismatch(room_name + "/" + type);
            for (const auto& [name, device] : devices) {
                const Device* other = other_devices->find(name);
                if (!other || other->properties.size() != device.properties.size())
                    throw mismatch(room_name + "/" + type + "/" + name);
                for (const auto& [prop, value] : device.properties) {
                    const PropertyValue* other_value = other->properties.find(prop);
                    if (!other_value) throw mismatch(room_name + "/" + type + "/" + name + "." + prop);
                    if (*other_value != value)
                        out.changes.push_back({DevicePath{room_name, type, name}, prop, value, *other_value});
                }
            }
        }
    }
    return out;
}

ProcessedProposal process_completion(std::string_view completion, const HomeContext& current,
                                     const SchemaRegistry& registry, ValidationPolicy policy) {
    const RawPayload raw = extract_payload(completion);
    const ProposalOverlay overlay = parse_proposal(raw);
    return {overlay.shape, validate_and_diff(current, overlay, registry, policy)};
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

Json path_fields(const DevicePath& path) {
    Json doc = Json::object();
    doc["room"] = path.room;
    doc["device_type"] = path.device_type;
    doc["device"] = path.device;
    return doc;
}

DevicePath path_from(const Json& doc) {
    return {doc.at("room").get<std::string>(), doc.at("device_type").get<std::string>(),
            doc.at("device").get<std::string>()};
}

PropertyValue value_from(const Json& doc) {
    auto v = property_value_from_json(doc);
    if (!v) throw Error(Errc::StructureError, "not a property value: " + doc.dump());
    return *v;
}

} // namespace

Json to_json(const Change& change) {
    Json doc = path_fields(change.path);
    doc["property"] = change.property;
    doc["old"] = to_json(change.old_value);
    doc["new"] = to_json(change.new_value);
    return doc;
}

Json to_json(const Violation& violation) {
    Json doc = path_fields(violation.path);
    doc["property"] = violation.property;
    doc["kind"] = to_string(violation.kind);
    doc["detail"] = violation.detail;
    return doc;
}

Json to_json(const ChangeSet& changeset) {
    Json changes = Json::array();
    for (const auto& c : changeset.changes) changes.push_back(to_json(c));
    Json dropped = Json::array();
    for (const auto& v : changeset.dropped) dropped.push_back(to_json(v));
    Json doc = Json::object();
    doc["changes"] = std::move(changes);
    doc["dropped"] = std::move(dropped);
    return doc;
}

Change change_from_json(const Json& doc) {
    try {
        return {path_from(doc), doc.at("property").get<std::string>(), value_from(doc.at("old")),
                value_from(doc.at("new"))};
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::StructureError, std::string("change: ") + e.what());
    }
}

Violation violation_from_json(const Json& doc) {
    static constexpr ViolationKind kinds[] = {
        ViolationKind::UnknownDeviceType, ViolationKind::UnknownDevice,   ViolationKind::InventedField,
        ViolationKind::OutOfRange,        ViolationKind::WrongKind,       ViolationKind::DisallowedValue,
        ViolationKind::ImmutableViolation};
    try {
        Violation v{path_from(doc), doc.at("property").get<std::string>(), ViolationKind::InventedField,
                    doc.value("detail", std::string())};
        const auto kind = doc.at("kind").get<std::string>();
        auto it = std::find_if(std::begin(kinds), std::end(kinds), [&](ViolationKind k) { return to_string(k) == kind; });
        if (it == std::end(kinds)) throw Error(Errc::StructureError, "unknown violation kind '" + kind + "'");
        v.kind = *it;
        return v;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::StructureError, std::string("violation: ") + e.what());
    }
}

ChangeSet changeset_from_json(const Json& doc) {
    ChangeSet cs;
    for (const auto& c : doc.at("changes")) cs.changes.push_back(change_from_json(c));
    for (const auto& v : doc.at("dropped")) cs.dropped.push_back(violation_from_json(v));
    return cs;
}

} // namespace homellm
