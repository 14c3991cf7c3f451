#include <gtest/gtest.h>

#include <set>

#include "homellm/error.hpp"
#include "homellm/response.hpp"
#include "homellm/simulator.hpp"
#include "support.hpp"

using namespace homellm;
using namespace homellm::testing;

namespace {

Errc error_code(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return Errc::InvalidArgument;
}

// Shortest prefix starting at the first '{' that is a complete JSON document.
std::optional<std::string> oracle_payload(const std::string& text) {
    const auto open = text.find('{');
    if (open == std::string::npos) return std::nullopt;
    for (std::size_t end = open + 1; end <= text.size(); ++end) {
        if (text[end - 1] != '}') continue;
        const std::string candidate = text.substr(open, end - open);
        if (Json::accept(candidate)) return candidate;
    }
    return std::nullopt;
}

std::string random_string(Rng& rng) {
    static const std::vector<std::string> pieces{"a", "b", "{", "}", "\\\"", "\\\\", " ", "x}y", "{{", "\\n"};
    std::string s = "\"";
    for (int i = rng.uniform(0, 6); i > 0; --i) s += rng.pick(pieces);
    return s + "\"";
}

std::string random_json(Rng& rng, int depth) {
    if (depth == 0 || rng.uniform(0, 2) == 0) {
        switch (rng.uniform(0, 3)) {
        case 0: return random_string(rng);
        case 1: return std::to_string(rng.uniform(-5, 300));
        case 2: return rng.coin() ? "true" : "null";
        default: return "[" + random_string(rng) + ", {}]";
        }
    }
    std::string s = "{";
    for (int i = rng.uniform(0, 3); i > 0; --i) {
        if (s.size() > 1) s += ", ";
        s += random_string(rng) + ": " + random_json(rng, depth - 1);
    }
    return s + "}";
}

std::string random_prose(Rng& rng, bool allow_braces) {
    static const std::vector<std::string> words{"Sure", "here", "is", "the", "state:", "\n", "```json", "```", "\"", "}"};
    std::string s;
    for (int i = rng.uniform(0, 8); i > 0; --i) {
        std::string w = rng.pick(words);
        if (!allow_braces && w == "}") continue;
        s += w + " ";
    }
    if (allow_braces && rng.coin()) s += "{\"more\": 1}";
    return s;
}

Change change(const std::string& path, const std::string& prop, PropertyValue from, PropertyValue to) {
    return Change{DevicePath::parse(path), prop, std::move(from), std::move(to)};
}

} // namespace

TEST(ExtractPayload, SkipsLeadingProse) {
    const auto raw = extract_payload("Sure! {\"devices\": {}}");
    EXPECT_EQ(raw.text, "{\"devices\": {}}");
    EXPECT_EQ(raw.start_offset, 6u);
    EXPECT_EQ(raw.end_offset, 21u);
}

TEST(ExtractPayload, NoBraceIsNoPayload) {
    EXPECT_EQ(error_code([] { extract_payload("I cannot help with that."); }), Errc::NoPayload);
    EXPECT_EQ(error_code([] { extract_payload("{\"devices\": {"); }), Errc::NoPayload);
}

TEST(ExtractPayload, BracesInsideStringsIgnored) {
    const std::string text = R"(x {"a": "}{", "b": "\"}"} tail})";
    EXPECT_EQ(extract_payload(text).text, R"({"a": "}{", "b": "\"}"})");
}

TEST(ExtractPayload, AgreesWithBruteForceOracle) {
    Rng rng(17);
    for (int i = 0; i < 2000; ++i) {
        const std::string payload = "{" + random_string(rng) + ": " + random_json(rng, 3) + "}";
        const std::string text = random_prose(rng, false) + payload + random_prose(rng, true);
        const auto raw = extract_payload(text);
        ASSERT_EQ(std::optional<std::string>(raw.text), oracle_payload(text)) << text;
        ASSERT_EQ(raw.text, payload);
        ASSERT_EQ(text.substr(raw.start_offset, raw.end_offset - raw.start_offset), raw.text);
        ASSERT_EQ(extract_payload(raw.text).text, raw.text);
    }
}

TEST(ParseProposal, ShapesAreNormalized) {
    const auto full = parse_proposal(extract_payload(R"({"user": {"location": "x"}, "devices": {"r": {"lights": {"l": {"state": "on"}}}}})"));
    const auto devices = parse_proposal(extract_payload(R"({"devices": {"r": {"lights": {"l": {"state": "on"}}}}})"));
    const auto partial = parse_proposal(extract_payload(R"({"r": {"lights": {"l": {"state": "on"}}}})"));
    EXPECT_EQ(full.shape, ProposalShape::full_context);
    EXPECT_EQ(devices.shape, ProposalShape::devices_only);
    EXPECT_EQ(partial.shape, ProposalShape::partial_devices);
    for (const auto* o : {&full, &devices, &partial}) {
        ASSERT_EQ(o->entries.size(), 1u);
        EXPECT_EQ(o->entries[0].path.str(), "r/lights/l");
        EXPECT_EQ(o->entries[0].property, "state");
        EXPECT_EQ(o->device_count(), 1u);
    }
}

TEST(ParseProposal, Errors) {
    EXPECT_EQ(error_code([] { parse_proposal(RawPayload{"{\"a\": ,}", 0, 0}); }), Errc::SyntaxError);
    EXPECT_EQ(error_code([] { parse_proposal(extract_payload(R"({"devices": {"r": "lights"}})")); }),
              Errc::StructureError);
    EXPECT_EQ(error_code([] { parse_proposal(extract_payload(R"({"devices": {}, "reasoning": "x"})")); }),
              Errc::StructureError);
}

TEST(ValidateAndDiff, TurnOnTheLight) {
    const auto ctx = example_home();
    const auto result = process_completion(
        R"({"devices": {"living_room": {"lights": {"overhead": {"state": "on"}, "lamp": {"state": "on"}}}}})", ctx,
        builtin_registry("complex"));
    ASSERT_EQ(result.changeset.changes.size(), 1u);
    EXPECT_EQ(result.changeset.changes[0], change("living_room/lights/lamp", "state", Switch::off, Switch::on));
    EXPECT_TRUE(result.changeset.dropped.empty());
}

TEST(ValidateAndDiff, InventedGenreDropped) {
    const auto ctx = demo_context();
    const auto result = process_completion(
        R"({"devices": {"living_room": {"plugs": {"stereo": {"state": "on", "genre": "groovy"}}}}})", ctx,
        builtin_registry("demo"));
    ASSERT_EQ(result.changeset.changes.size(), 1u);
    EXPECT_EQ(result.changeset.changes[0], change("living_room/plugs/stereo", "state", Switch::off, Switch::on));
    ASSERT_EQ(result.changeset.dropped.size(), 1u);
    EXPECT_EQ(result.changeset.dropped[0].kind, ViolationKind::InventedField);
    EXPECT_EQ(result.changeset.dropped[0].property, "genre");
}

TEST(ValidateAndDiff, RejectAllPolicy) {
    const auto result = process_completion(
        R"({"living_room": {"plugs": {"stereo": {"state": "on", "genre": "groovy"}}}})", demo_context(),
        builtin_registry("demo"), ValidationPolicy::reject_all_on_violation);
    EXPECT_TRUE(result.changeset.changes.empty());
    EXPECT_EQ(result.changeset.dropped.size(), 1u);
}

TEST(ValidateAndDiff, ViolationKinds) {
    const auto ctx = demo_context();
    const auto result = process_completion(R"({
        "living_room": {
          "lights": {"light_group": {"bri": 400, "effect": "strobe", "state": 1}},
          "fans": {"ceiling": {"state": "on"}},
          "plugs": {"kettle": {"state": "on"}}
        }})", ctx, builtin_registry("demo"));
    EXPECT_TRUE(result.changeset.changes.empty());
    std::vector<ViolationKind> kinds;
    for (const auto& v : result.changeset.dropped) kinds.push_back(v.kind);
    EXPECT_EQ(kinds, (std::vector<ViolationKind>{ViolationKind::OutOfRange, ViolationKind::DisallowedValue,
                                                 ViolationKind::WrongKind, ViolationKind::UnknownDeviceType,
                                                 ViolationKind::UnknownDevice}));
}

TEST(ValidateAndDiff, SwitchCaseNormalizedAndEqualValuesIgnored) {
    const auto result = process_completion(R"({"living_room": {"plugs": {"stereo": {"state": "ON"}},
        "lights": {"light_group": {"state": "on", "bri": 127}}}})", demo_context(), builtin_registry("demo"));
    ASSERT_EQ(result.changeset.changes.size(), 1u);
    EXPECT_EQ(result.changeset.changes[0].new_value, PropertyValue{Switch::on});
    EXPECT_TRUE(result.changeset.dropped.empty());
}

TEST(ValidateAndDiff, ImmutablePropertiesAndUserBlock) {
    auto registry = parse_registry(R"({"plugs": {"state": {"kind": "switch"}, "model": {"kind": "text", "mutable": false}}})");
    auto ctx = parse_context(R"({"user": {"location": "den"}, "devices": {"den": {"plugs": {"p": {"state": "off", "model": "X1"}}}}})");
    const auto result = process_completion(
        R"({"user": {"location": "kitchen"}, "devices": {"den": {"plugs": {"p": {"state": "on", "model": "X2"}}}}})",
        ctx, registry);
    ASSERT_EQ(result.changeset.changes.size(), 1u);
    ASSERT_EQ(result.changeset.dropped.size(), 2u);
    EXPECT_EQ(result.changeset.dropped[0].property, "user");
    EXPECT_EQ(result.changeset.dropped[0].kind, ViolationKind::ImmutableViolation);
    EXPECT_EQ(result.changeset.dropped[1].property, "model");
    EXPECT_EQ(result.changeset.dropped[1].kind, ViolationKind::ImmutableViolation);

    // Restating an immutable value unchanged is fine.
    const auto same = process_completion(R"({"den": {"plugs": {"p": {"model": "X1"}}}})", ctx, registry);
    EXPECT_TRUE(same.changeset.dropped.empty());
}

TEST(ValidateAndDiff, EchoedContextIsEmptyChangeset) {
    const auto ctx = example_home();
    const auto result = process_completion(serialize_context(ctx), ctx, builtin_registry("complex"));
    EXPECT_TRUE(result.changeset.changes.empty());
    EXPECT_TRUE(result.changeset.dropped.empty());
    EXPECT_EQ(result.shape, ProposalShape::full_context);
}

TEST(ValidateAndDiff, MatchesOracleOnRandomMutations) {
    Rng rng(23);
    const auto registry = test_registry();
    for (int i = 0; i < 500; ++i) {
        const auto ctx = random_context(rng);
        const auto proposed = mutate(rng, ctx, registry, static_cast<std::size_t>(rng.uniform(0, 5)));
        const auto ours = process_completion("Here you go: " + serialize_devices(proposed), ctx, registry);
        ASSERT_EQ(ours.changeset.changes, diff_oracle(ctx, proposed).changes) << serialize_devices(proposed);
        ASSERT_TRUE(ours.changeset.dropped.empty());
    }
}

TEST(ValidateAndDiff, OutputIsAlwaysSafeToApply) {
    Rng rng(29);
    const auto registry = test_registry();
    const std::vector<Json> junk{Json("on"), Json("OFF"), Json(-3), Json(256), Json(42), Json("colorloop"),
                                 Json("strobe"), Json(true), Json(nullptr), Json::array(), Json(1.5)};
    for (int i = 0; i < 500; ++i) {
        const auto ctx = random_context(rng);
        Json proposal = devices_to_json(ctx);
        const auto slots = property_slots(ctx);
        for (int k = rng.uniform(0, 6); k > 0; --k) {
            if (!slots.empty() && rng.coin()) {
                const auto& s = rng.pick(slots);
                proposal[s.path.room][s.path.device_type][s.path.device][s.property] = rng.pick(junk);
            } else {
                proposal[rng.coin() ? "attic" : ctx.rooms.begin()->first][rng.coin() ? "lights" : "robots"]
                        [rng.name("dev")][rng.coin() ? "state" : "mood"] = rng.pick(junk);
            }
        }
        const auto result = process_completion(proposal.dump(), ctx, registry);
        std::set<std::pair<std::string, std::string>> seen;
        for (const auto& c : result.changeset.changes) {
            ASSERT_TRUE(seen.emplace(c.path.str(), c.property).second);
            ASSERT_EQ(*ctx.find_device(c.path)->properties.find(c.property), c.old_value);
            ASSERT_NE(c.old_value, c.new_value);
        }
        const auto next = apply_changes(ctx, result.changeset.changes);
        ASSERT_TRUE(validate_context(next, registry).ok()) << proposal.dump();
        ASSERT_EQ(next.device_count(), ctx.device_count());
        ASSERT_EQ(next.property_count(), ctx.property_count());
    }
}

TEST(DiffOracle, StructureMismatch) {
    auto other = example_home();
    other.find_device({"bedroom", "lights", "bedside_lamp"})->properties.insert("r", std::int64_t{1});
    EXPECT_EQ(error_code([&] { diff_oracle(example_home(), other); }), Errc::StructureMismatch);
}

TEST(ChangeSetJson, RoundTrip) {
    ChangeSet cs;
    cs.changes.push_back(change("a/lights/b", "state", Switch::off, Switch::on));
    cs.changes.push_back(change("a/tvs/c", "volume", std::int64_t{20}, std::int64_t{35}));
    cs.changes.push_back(change("a/lights/b", "effect", std::string("none"), std::string("colorloop")));
    cs.dropped.push_back({DevicePath::parse("a/plugs/s"), "genre", ViolationKind::InventedField, "why"});
    const auto back = changeset_from_json(Json::parse(to_json(cs).dump()));
    EXPECT_EQ(back.changes, cs.changes);
    EXPECT_EQ(back.dropped, cs.dropped);
    EXPECT_EQ(to_json(cs.changes[0]).dump(),
              R"({"room":"a","device_type":"lights","device":"b","property":"state","old":"off","new":"on"})");
}
