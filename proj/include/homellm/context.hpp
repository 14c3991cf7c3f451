#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "homellm/named_map.hpp"

namespace homellm {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Property values
// ---------------------------------------------------------------------------

enum class Switch { off, on };

/// A device property: a switch ("on"/"off"), a unitless integer (color
/// channels, volume, brightness) or free text (effect names).
using PropertyValue = std::variant<Switch, std::int64_t, std::string>;

std::string to_string(const PropertyValue& value);
Json to_json(const PropertyValue& value);

/// Maps a JSON scalar onto a PropertyValue. Exact "on"/"off" become switches,
/// other strings text, integral numbers integers. Anything else yields nullopt.
std::optional<PropertyValue> property_value_from_json(const Json& value);

// ---------------------------------------------------------------------------
// Schema registry
// ---------------------------------------------------------------------------

enum class PropertyKind { Switch, Integer, Text };

std::string_view to_string(PropertyKind kind) noexcept;

struct IntRange {
    std::int64_t min = 0;
    std::int64_t max = 0;
    friend bool operator==(const IntRange&, const IntRange&) = default;
};

struct PropertySchema {
    std::string name;
    PropertyKind kind = PropertyKind::Switch;
    std::optional<IntRange> range;
    std::optional<std::vector<std::string>> allowed;
    bool is_mutable = true;

    friend bool operator==(const PropertySchema&, const PropertySchema&) = default;
};

struct DeviceSchema {
    std::string device_type;
    NamedMap<PropertySchema> properties;

    friend bool operator==(const DeviceSchema&, const DeviceSchema&) = default;
};

class SchemaRegistry {
public:
    SchemaRegistry() = default;

    /// Throws StructureError on a broken invariant (inverted range, empty
    /// allowed set, duplicate device type).
    void add(DeviceSchema schema);

    const DeviceSchema* find(std::string_view device_type) const { return schemas_.find(device_type); }
    const PropertySchema* find(std::string_view device_type, std::string_view property) const;

    const NamedMap<DeviceSchema>& schemas() const noexcept { return schemas_; }

    friend bool operator==(const SchemaRegistry&, const SchemaRegistry&) = default;

private:
    NamedMap<DeviceSchema> schemas_;
};

/// Registry document: device_type -> property -> {kind, min, max, allowed, mutable}.
SchemaRegistry parse_registry(std::string_view text);
std::string serialize_registry(const SchemaRegistry& registry);

/// Built-in registries: "simple", "medium", "complex" (the evaluation
/// contexts) and "demo" (hue light group + smart plug).
SchemaRegistry builtin_registry(std::string_view name);

// ---------------------------------------------------------------------------
// Context
// ---------------------------------------------------------------------------

struct DevicePath {
    std::string room;
    std::string device_type;
    std::string device;

    std::string str() const { return room + "/" + device_type + "/" + device; }
    /// Parses "room/type/device". Throws InvalidArgument.
    static DevicePath parse(std::string_view text);

    friend auto operator<=>(const DevicePath&, const DevicePath&) = default;
};

struct Device {
    std::string name;
    std::string device_type;
    NamedMap<PropertyValue> properties;

    friend bool operator==(const Device&, const Device&) = default;
};

struct Room {
    std::string name;
    /// device_type -> device name -> device
    NamedMap<NamedMap<Device>> devices;

    friend bool operator==(const Room&, const Room&) = default;
};

struct UserContext {
    std::string location;
    /// Additional facts about the user, kept verbatim. Always an object.
    Json extra = Json::object();

    friend bool operator==(const UserContext&, const UserContext&) = default;
};

struct HomeContext {
    UserContext user;
    NamedMap<Room> rooms;

    const Device* find_device(const DevicePath& path) const;
    Device* find_device(const DevicePath& path);

    std::size_t device_count() const;
    std::size_t property_count() const;

    /// Visits devices in document order: fn(const DevicePath&, const Device&).
    template <class Fn>
    void for_each_device(Fn&& fn) const {
        for (const auto& [room_name, room] : rooms)
            for (const auto& [type, devices] : room.devices)
                for (const auto& [name, device] : devices)
                    fn(DevicePath{room_name, type, name}, device);
    }

    friend bool operator==(const HomeContext&, const HomeContext&) = default;
};

/// Parses a context document ({"user": {...}, "devices": {...}}).
/// Throws SyntaxError or StructureError.
HomeContext parse_context(std::string_view text);
HomeContext context_from_json(const Json& doc);

Json devices_to_json(const HomeContext& context);
Json user_to_json(const UserContext& user);
Json context_to_json(const HomeContext& context);

/// Canonical two-space-indented forms. serialize_devices and serialize_user
/// emit the wrapped {"devices": ...} / {"user": ...} documents used in prompts.
std::string serialize_context(const HomeContext& context);
std::string serialize_devices(const HomeContext& context);
std::string serialize_user(const UserContext& user);

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

enum class ViolationKind {
    UnknownDeviceType,
    UnknownDevice,
    InventedField,
    OutOfRange,
    WrongKind,
    DisallowedValue,
    ImmutableViolation,
};

std::string_view to_string(ViolationKind kind) noexcept;

struct Violation {
    DevicePath path;
    std::string property;
    ViolationKind kind = ViolationKind::InventedField;
    std::string detail;

    friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const noexcept { return violations.empty(); }
};

/// Checks a value against its schema; nullopt means the value is acceptable.
std::optional<ViolationKind> check_value(const PropertySchema& schema, const PropertyValue& value);

ValidationReport validate_context(const HomeContext& context, const SchemaRegistry& registry);

} // namespace homellm
