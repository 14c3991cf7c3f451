#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "homellm/context.hpp"

namespace homellm::testing {

inline const std::filesystem::path kSourceDir = HOMELLM_SOURCE_DIR;
inline const std::filesystem::path kDataDir = kSourceDir / "data";
inline const std::filesystem::path kFixtureDir = kSourceDir / "tests" / "fixtures";

inline std::string read_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Canonical form of the example home, user and devices blocks.
inline constexpr const char* kExampleUserListing = R"({
  "user": {
    "location": "living_room"
  }
})";

inline constexpr const char* kExampleDevicesListing = R"({
  "devices": {
    "bedroom": {
      "lights": {
        "bedside_lamp": {
          "state": "off"
        }
      }
    },
    "living_room": {
      "lights": {
        "overhead": {
          "state": "on"
        },
        "lamp": {
          "state": "off"
        }
      },
      "tvs": {
        "living_room_tv": {
          "state": "off",
          "volume": 20
        }
      }
    }
  }
})";

inline HomeContext example_home() { return parse_context(read_file(kDataDir / "contexts" / "example.json")); }
inline HomeContext demo_context() { return parse_context(read_file(kDataDir / "contexts" / "demo.json")); }

/// lights{state, r/g/b, effect}, tvs/speakers{state, volume}, plugs{state}.
inline SchemaRegistry test_registry() {
    return parse_registry(R"({
      "lights": {
        "state": {"kind": "switch"},
        "r": {"kind": "integer", "min": 0, "max": 255},
        "g": {"kind": "integer", "min": 0, "max": 255},
        "b": {"kind": "integer", "min": 0, "max": 255},
        "effect": {"kind": "text", "allowed": ["none", "colorloop"]}
      },
      "tvs": {"state": {"kind": "switch"}, "volume": {"kind": "integer", "min": 0, "max": 100}},
      "speakers": {"state": {"kind": "switch"}, "volume": {"kind": "integer", "min": 0, "max": 100}},
      "plugs": {"state": {"kind": "switch"}}
    })");
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
    bool coin() { return uniform(0, 1) == 1; }
    template <class T>
    const T& pick(const std::vector<T>& items) {
        return items[static_cast<std::size_t>(uniform(0, static_cast<int>(items.size()) - 1))];
    }

    /// Identifier-ish names, occasionally with characters that need escaping.
    std::string name(const std::string& stem) {
        static const std::vector<std::string> odd{"", "", "", "_2", " \"quoted\"", "\\slash", "_\xC3\xA9t\xC3\xA9", "\t"};
        return stem + "_" + std::to_string(uniform(0, 999)) + pick(odd);
    }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

/// A random context that is valid under test_registry(): 1..max_rooms rooms,
/// 0..max_devices devices per room.
inline HomeContext random_context(Rng& rng, int max_rooms = 4, int max_devices = 4) {
    static const std::vector<std::string> types{"lights", "tvs", "speakers", "plugs"};
    HomeContext ctx;
    const int rooms = rng.uniform(1, max_rooms);
    for (int r = 0; r < rooms; ++r) {
        Room room{rng.name("room"), {}};
        if (ctx.rooms.contains(room.name)) continue;
        const int devices = rng.uniform(0, max_devices);
        for (int d = 0; d < devices; ++d) {
            const std::string type = rng.pick(types);
            Device dev{rng.name(type.substr(0, type.size() - 1)), type, {}};
            dev.properties.insert("state", rng.coin() ? Switch::on : Switch::off);
            if (type == "lights") {
                for (const char* c : {"r", "g", "b"})
                    if (rng.coin()) dev.properties.insert(c, std::int64_t{rng.uniform(0, 255)});
                if (rng.coin()) dev.properties.insert("effect", std::string(rng.coin() ? "none" : "colorloop"));
            } else if (type != "plugs") {
                dev.properties.insert("volume", std::int64_t{rng.uniform(0, 100)});
            }
            NamedMap<Device>* collection = room.devices.find(type);
            if (!collection) collection = &room.devices.insert_or_assign(type, {});
            const std::string key = dev.name;
            collection->insert(key, std::move(dev));
        }
        const std::string key = room.name;
        ctx.rooms.insert(key, std::move(room));
    }
    ctx.user.location = ctx.rooms.begin()->first;
    if (rng.uniform(0, 3) == 0) ctx.user.extra["mood"] = rng.name("mood");
    return ctx;
}

struct PropertySlot {
    DevicePath path;
    std::string property;
};

inline std::vector<PropertySlot> property_slots(const HomeContext& ctx) {
    std::vector<PropertySlot> out;
    ctx.for_each_device([&](const DevicePath& path, const Device& d) {
        for (const auto& [name, _] : d.properties) out.push_back({path, name});
    });
    return out;
}

/// A schema-valid value for the slot that differs from the current one.
inline PropertyValue different_valid_value(Rng& rng, const PropertySchema& schema, const PropertyValue& current) {
    switch (schema.kind) {
    case PropertyKind::Switch:
        return std::get<Switch>(current) == Switch::on ? Switch::off : Switch::on;
    case PropertyKind::Integer: {
        const auto now = std::get<std::int64_t>(current);
        for (;;) {
            const std::int64_t v = rng.uniform(static_cast<int>(schema.range->min), static_cast<int>(schema.range->max));
            if (v != now) return v;
        }
    }
    case PropertyKind::Text:
        for (const auto& candidate : *schema.allowed)
            if (PropertyValue{candidate} != current) return candidate;
        return current;
    }
    return current;
}

/// Changes `count` distinct properties to different valid values.
inline HomeContext mutate(Rng& rng, HomeContext ctx, const SchemaRegistry& registry, std::size_t count) {
    auto slots = property_slots(ctx);
    std::shuffle(slots.begin(), slots.end(), rng.engine());
    for (std::size_t i = 0; i < count && i < slots.size(); ++i) {
        const auto& slot = slots[i];
        PropertyValue& v = ctx.find_device(slot.path)->properties.at(slot.property);
        v = different_valid_value(rng, *registry.find(slot.path.device_type, slot.property), v);
    }
    return ctx;
}

} // namespace homellm::testing
