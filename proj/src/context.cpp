#include "homellm/context.hpp"

#include <algorithm>
#include <climits>
#include <type_traits>
#include <utility>

#include "homellm/error.hpp"

namespace homellm {

namespace {

const char* kind_name(PropertyKind kind) {
    switch (kind) {
    case PropertyKind::Switch: return "switch";
    case PropertyKind::Integer: return "integer";
    case PropertyKind::Text: return "text";
    }
    return "?";
}

PropertyKind parse_kind(const std::string& text) {
    if (text == "switch") return PropertyKind::Switch;
    if (text == "integer") return PropertyKind::Integer;
    if (text == "text") return PropertyKind::Text;
    throw Error(Errc::StructureError, "unknown property kind '" + text + "'");
}

Json parse_json(std::string_view text) {
    try {
        return Json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(Errc::SyntaxError, e.what());
    }
}

void require_object(const Json& value, const std::string& where) {
    if (!value.is_object()) throw Error(Errc::StructureError, where + " must be an object");
}

} // namespace

std::string to_string(const PropertyValue& value) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Switch>) return v == Switch::on ? "on" : "off";
            else if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(v);
            else return v;
        },
        value);
}

Json to_json(const PropertyValue& value) {
    if (const auto* i = std::get_if<std::int64_t>(&value)) return *i;
    return to_string(value);
}

std::optional<PropertyValue> property_value_from_json(const Json& value) {
    if (value.is_string()) {
        const auto& s = value.get_ref<const std::string&>();
        if (s == "on") return Switch::on;
        if (s == "off") return Switch::off;
        return PropertyValue{s};
    }
    if (value.is_number_integer()) {
        if (value.is_number_unsigned() && value.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX))
            return std::nullopt;
        return PropertyValue{value.get<std::int64_t>()};
    }
    return std::nullopt;
}

std::string_view to_string(PropertyKind kind) noexcept { return kind_name(kind); }

std::string_view to_string(ViolationKind kind) noexcept {
    switch (kind) {
    case ViolationKind::UnknownDeviceType: return "UnknownDeviceType";
    case ViolationKind::UnknownDevice: return "UnknownDevice";
    case ViolationKind::InventedField: return "InventedField";
    case ViolationKind::OutOfRange: return "OutOfRange";
    case ViolationKind::WrongKind: return "WrongKind";
    case ViolationKind::DisallowedValue: return "DisallowedValue";
    case ViolationKind::ImmutableViolation: return "ImmutableViolation";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

void SchemaRegistry::add(DeviceSchema schema) {
    for (const auto& [name, prop] : schema.properties) {
        if (prop.kind == PropertyKind::Integer && prop.range && prop.range->min > prop.range->max)
            throw Error(Errc::StructureError, schema.device_type + "." + name + ": min > max");
        if (prop.kind == PropertyKind::Text && prop.allowed && prop.allowed->empty())
            throw Error(Errc::StructureError, schema.device_type + "." + name + ": empty allowed set");
    }
    std::string key = schema.device_type;
    if (!schemas_.insert(key, std::move(schema)))
        throw Error(Errc::StructureError, "duplicate device type '" + key + "'");
}

const PropertySchema* SchemaRegistry::find(std::string_view device_type, std::string_view property) const {
    const auto* device = schemas_.find(device_type);
    return device ? device->properties.find(property) : nullptr;
}

SchemaRegistry parse_registry(std::string_view text) {
    Json doc = parse_json(text);
    require_object(doc, "registry");
    SchemaRegistry registry;
    for (const auto& [type, props] : doc.items()) {
        require_object(props, "registry." + type);
        DeviceSchema schema{type, {}};
        for (const auto& [name, spec] : props.items()) {
            require_object(spec, "registry." + type + "." + name);
            PropertySchema prop;
            prop.name = name;
            try {
                prop.kind = parse_kind(spec.at("kind").get<std::string>());
                if (spec.contains("min") || spec.contains("max"))
                    prop.range = IntRange{spec.at("min").get<std::int64_t>(), spec.at("max").get<std::int64_t>()};
                if (spec.contains("allowed")) prop.allowed = spec.at("allowed").get<std::vector<std::string>>();
                prop.is_mutable = spec.value("mutable", true);
            } catch (const nlohmann::json::exception& e) {
                throw Error(Errc::StructureError, "registry." + type + "." + name + ": " + e.what());
            }
            if (!schema.properties.insert(name, std::move(prop)))
                throw Error(Errc::StructureError, "duplicate property '" + name + "'");
        }
        registry.add(std::move(schema));
    }
    return registry;
}

std::string serialize_registry(const SchemaRegistry& registry) {
    Json doc = Json::object();
    for (const auto& [type, schema] : registry.schemas()) {
        Json props = Json::object();
        for (const auto& [name, prop] : schema.properties) {
            Json spec = Json::object();
            spec["kind"] = kind_name(prop.kind);
            if (prop.range) {
                spec["min"] = prop.range->min;
                spec["max"] = prop.range->max;
            }
            if (prop.allowed) spec["allowed"] = *prop.allowed;
            spec["mutable"] = prop.is_mutable;
            props[name] = std::move(spec);
        }
        doc[type] = std::move(props);
    }
    return doc.dump(2);
}

namespace {

PropertySchema switch_prop(std::string name) { return {std::move(name), PropertyKind::Switch, {}, {}, true}; }
PropertySchema int_prop(std::string name, std::int64_t lo, std::int64_t hi) {
    return {std::move(name), PropertyKind::Integer, IntRange{lo, hi}, {}, true};
}

DeviceSchema make_schema(std::string type, std::initializer_list<PropertySchema> props) {
    DeviceSchema schema{std::move(type), {}};
    for (const auto& p : props) schema.properties.insert(p.name, p);
    return schema;
}

} // namespace

SchemaRegistry builtin_registry(std::string_view name) {
    SchemaRegistry registry;
    if (name == "simple") {
        registry.add(make_schema("lights", {switch_prop("state")}));
    } else if (name == "medium") {
        registry.add(make_schema("lights", {switch_prop("state"), int_prop("r", 0, 255), int_prop("g", 0, 255),
                                            int_prop("b", 0, 255)}));
    } else if (name == "complex") {
        registry.add(make_schema("lights", {switch_prop("state"), int_prop("r", 0, 255), int_prop("g", 0, 255),
                                            int_prop("b", 0, 255)}));
        registry.add(make_schema("tvs", {switch_prop("state"), int_prop("volume", 0, 100)}));
        registry.add(make_schema("speakers", {switch_prop("state"), int_prop("volume", 0, 100)}));
    } else if (name == "demo") {
        PropertySchema effect{"effect", PropertyKind::Text, {}, std::vector<std::string>{"none", "colorloop"}, true};
        registry.add(make_schema("lights", {switch_prop("state"), int_prop("bri", 0, 254), effect}));
        registry.add(make_schema("plugs", {switch_prop("state")}));
    } else {
        throw Error(Errc::InvalidArgument, "no built-in registry named '" + std::string(name) + "'");
    }
    return registry;
}

// ---------------------------------------------------------------------------
// Context
// ---------------------------------------------------------------------------

DevicePath DevicePath::parse(std::string_view text) {
    auto first = text.find('/');
    auto second = first == std::string_view::npos ? first : text.find('/', first + 1);
    if (second == std::string_view::npos || text.find('/', second + 1) != std::string_view::npos)
        throw Error(Errc::InvalidArgument, "device path must be room/type/device: '" + std::string(text) + "'");
    DevicePath path{std::string(text.substr(0, first)), std::string(text.substr(first + 1, second - first - 1)),
                    std::string(text.substr(second + 1))};
    if (path.room.empty() || path.device_type.empty() || path.device.empty())
        throw Error(Errc::InvalidArgument, "empty component in device path '" + std::string(text) + "'");
    return path;
}

const Device* HomeContext::find_device(const DevicePath& path) const {
    const auto* room = rooms.find(path.room);
    if (!room) return nullptr;
    const auto* devices = room->devices.find(path.device_type);
    return devices ? devices->find(path.device) : nullptr;
}

Device* HomeContext::find_device(const DevicePath& path) {
    return const_cast<Device*>(std::as_const(*this).find_device(path));
}

std::size_t HomeContext::device_count() const {
    std::size_t n = 0;
    for_each_device([&](const DevicePath&, const Device&) { ++n; });
    return n;
}

std::size_t HomeContext::property_count() const {
    std::size_t n = 0;
    for_each_device([&](const DevicePath&, const Device& d) { n += d.properties.size(); });
    return n;
}

HomeContext context_from_json(const Json& doc) {
    require_object(doc, "context document");
    for (const auto& [key, _] : doc.items())
        if (key != "user" && key != "devices")
            throw Error(Errc::StructureError, "unexpected top-level key '" + key + "'");
    if (!doc.contains("user")) throw Error(Errc::StructureError, "missing \"user\" block");
    if (!doc.contains("devices")) throw Error(Errc::StructureError, "missing \"devices\" block");

    HomeContext context;
    const Json& user = doc.at("user");
    require_object(user, "user");
    for (const auto& [key, value] : user.items()) {
        if (key == "location") {
            if (!value.is_string()) throw Error(Errc::StructureError, "user.location must be a string");
            context.user.location = value.get<std::string>();
        } else {
            context.user.extra[key] = value;
        }
    }
    if (!user.contains("location")) throw Error(Errc::StructureError, "user.location missing");

    const Json& devices = doc.at("devices");
    require_object(devices, "devices");
    if (devices.empty()) throw Error(Errc::StructureError, "devices block has no rooms");
    for (const auto& [room_name, types] : devices.items()) {
        require_object(types, "devices." + room_name);
        Room room{room_name, {}};
        for (const auto& [type, members] : types.items()) {
            require_object(members, "devices." + room_name + "." + type);
            NamedMap<Device> collection;
            for (const auto& [device_name, props] : members.items()) {
                const std::string where = room_name + "/" + type + "/" + device_name;
                require_object(props, "device " + where);
                Device device{device_name, type, {}};
                for (const auto& [prop, value] : props.items()) {
                    auto parsed = property_value_from_json(value);
                    if (!parsed)
                        throw Error(Errc::StructureError,
                                    where + "." + prop + ": value must be a string or integer");
                    device.properties.insert_or_assign(prop, std::move(*parsed));
                }
                collection.insert_or_assign(device_name, std::move(device));
            }
            room.devices.insert_or_assign(type, std::move(collection));
        }
        context.rooms.insert_or_assign(room_name, std::move(room));
    }
    if (!context.rooms.contains(context.user.location))
        throw Error(Errc::StructureError, "user.location '" + context.user.location + "' is not a room");
    return context;
}

HomeContext parse_context(std::string_view text) { return context_from_json(parse_json(text)); }

Json devices_to_json(const HomeContext& context) {
    Json rooms = Json::object();
    for (const auto& [room_name, room] : context.rooms) {
        Json types = Json::object();
        for (const auto& [type, members] : room.devices) {
            Json devices = Json::object();
            for (const auto& [name, device] : members) {
                Json props = Json::object();
                for (const auto& [prop, value] : device.properties) props[prop] = to_json(value);
                devices[name] = std::move(props);
            }
            types[type] = std::move(devices);
        }
        rooms[room_name] = std::move(types);
    }
    return rooms;
}

Json user_to_json(const UserContext& user) {
    Json out = Json::object();
    out["location"] = user.location;
    for (const auto& [key, value] : user.extra.items()) out[key] = value;
    return out;
}

Json context_to_json(const HomeContext& context) {
    Json doc = Json::object();
    doc["user"] = user_to_json(context.user);
    doc["devices"] = devices_to_json(context);
    return doc;
}

std::string serialize_context(const HomeContext& context) { return context_to_json(context).dump(2); }

std::string serialize_devices(const HomeContext& context) {
    Json doc = Json::object();
    doc["devices"] = devices_to_json(context);
    return doc.dump(2);
}

std::string serialize_user(const UserContext& user) {
    Json doc = Json::object();
    doc["user"] = user_to_json(user);
    return doc.dump(2);
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

std::optional<ViolationKind> check_value(const PropertySchema& schema, const PropertyValue& value) {
    switch (schema.kind) {
    case PropertyKind::Switch:
        if (!std::holds_alternative<Switch>(value)) return ViolationKind::WrongKind;
        return std::nullopt;
    case PropertyKind::Integer: {
        const auto* i = std::get_if<std::int64_t>(&value);
        if (!i) return ViolationKind::WrongKind;
        if (schema.range && (*i < schema.range->min || *i > schema.range->max)) return ViolationKind::OutOfRange;
        return std::nullopt;
    }
    case PropertyKind::Text: {
        const auto* s = std::get_if<std::string>(&value);
        if (!s) return ViolationKind::WrongKind;
        if (schema.allowed && std::find(schema.allowed->begin(), schema.allowed->end(), *s) == schema.allowed->end())
            return ViolationKind::DisallowedValue;
        return std::nullopt;
    }
    }
    return ViolationKind::WrongKind;
}

ValidationReport validate_context(const HomeContext& context, const SchemaRegistry& registry) {
    ValidationReport report;
    context.for_each_device([&](const DevicePath& path, const Device& device) {
        const DeviceSchema* schema = registry.find(path.device_type);
        if (!schema) {
            report.violations.push_back(
                {path, "", ViolationKind::UnknownDeviceType, "no schema for type '" + path.device_type + "'"});
            return;
        }
        for (const auto& [name, value] : device.properties) {
            const PropertySchema* prop = schema->properties.find(name);
            if (!prop) {
                report.violations.push_back({path, name, ViolationKind::InventedField, "not in schema"});
                continue;
            }
            if (auto kind = check_value(*prop, value))
                report.violations.push_back({path, name, *kind, "value " + to_string(value)});
        }
    });
    return report;
}

} // namespace homellm
