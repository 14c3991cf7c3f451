#include <gtest/gtest.h>

#include <thread>

#include "homellm/error.hpp"
#include "homellm/service.hpp"
#include "support.hpp"

using namespace homellm;
using namespace homellm::testing;
using namespace std::chrono_literals;

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

class TempDir {
public:
    TempDir() {
        path_ = std::filesystem::temp_directory_path() /
                ("homellm-service-" + std::to_string(::getpid()) + "-" + std::to_string(counter_++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    const std::filesystem::path& path() const { return path_; }

private:
    static inline int counter_ = 0;
    std::filesystem::path path_;
};

ServiceParts parts_for(HomeContext ctx, SchemaRegistry registry, ServiceMode mode) {
    ServiceParts parts;
    parts.mode = mode;
    parts.bindings = BindingTable::all_in_memory(ctx);
    parts.context = std::move(ctx);
    parts.registry = std::move(registry);
    return parts;
}

ServiceParts demo_parts(ServiceMode mode) { return parts_for(demo_context(), builtin_registry("demo"), mode); }

class FailingTransport : public WireTransport {
public:
    void send(const std::string&, const WireCommand&) override { throw Error(Errc::TransportError, "bridge offline"); }
    Json get(const std::string&, const std::string&) override { throw Error(Errc::TransportError, "bridge offline"); }
};

std::vector<EventKind> kinds(const std::vector<EventRecord>& events) {
    std::vector<EventKind> out;
    for (const auto& e : events) out.push_back(e.kind);
    return out;
}

void expect_replay_matches(const ControllerService& service) {
    const auto events = service.events_since(0);
    const auto replayed = replay_event_log(service.initial_context(), events);
    EXPECT_EQ(replayed.state, service.get_state());
    auto history = service.get_history(1000);
    std::reverse(history.begin(), history.end());
    ASSERT_EQ(replayed.proposals.size(), history.size());
    for (std::size_t i = 0; i < history.size(); ++i) {
        EXPECT_EQ(replayed.proposals[i].id, history[i].id);
        EXPECT_EQ(replayed.proposals[i].status, history[i].status) << history[i].id;
        EXPECT_EQ(to_json(replayed.proposals[i]), to_json(history[i]));
    }
}

} // namespace

TEST(ControllerService, LeavingTurnsOffTheWholeHome) {
    ControllerService service(parts_for(example_home(), builtin_registry("complex"), ServiceMode::auto_apply));
    const auto p = service.handle_command("I'm leaving");
    EXPECT_EQ(p.status, ProposalStatus::auto_applied);
    EXPECT_EQ(p.changeset.changes.size(), 1u); // only the overhead light was on
    service.get_state().for_each_device([](const DevicePath& path, const Device& d) {
        EXPECT_EQ(d.properties.at("state"), PropertyValue{Switch::off}) << path.str();
    });
    EXPECT_EQ(kinds(service.events_since(0)),
              (std::vector<EventKind>{EventKind::command_received, EventKind::completion_received,
                                      EventKind::proposal_created, EventKind::proposal_applied}));
}

TEST(ControllerService, BlankCommandRejectedWithoutSideEffects) {
    ControllerService service(demo_parts(ServiceMode::auto_apply));
    EXPECT_EQ(error_code([&] { service.handle_command(""); }), Errc::EmptyCommand);
    EXPECT_EQ(error_code([&] { service.handle_command("  \n"); }), Errc::EmptyCommand);
    EXPECT_TRUE(service.get_history(10).empty());
    EXPECT_TRUE(service.events_since(0).empty());
}

TEST(ControllerService, ReviewModeHoldsGroovyUntilApproved) {
    SimulatedDeviceServer server;
    auto parts = demo_parts(ServiceMode::review);
    BindingTable bindings;
    bindings.add({DevicePath::parse("living_room/lights/light_group"), AdapterKind::hue_group, server.url(), 1});
    bindings.add({DevicePath::parse("living_room/plugs/stereo"), AdapterKind::smart_plug, server.url(), 0});
    seed_simulated_devices(server, parts.context, bindings);
    parts.bindings = bindings;
    ControllerService service(std::move(parts));

    const auto p = service.handle_command("make it groovy");
    EXPECT_EQ(p.status, ProposalStatus::pending);
    ASSERT_EQ(p.changeset.dropped.size(), 1u);
    EXPECT_EQ(p.changeset.dropped[0].kind, ViolationKind::InventedField);
    EXPECT_EQ(p.changeset.dropped[0].property, "genre");
    EXPECT_EQ(p.changeset.changes.size(), 2u);
    EXPECT_EQ(service.get_state(), demo_context());
    EXPECT_TRUE(server.requests().empty());

    const auto applied = service.resolve_proposal(p.id, Decision::approve);
    EXPECT_EQ(applied.status, ProposalStatus::applied);
    const auto requests = server.requests();
    ASSERT_EQ(requests.size(), 2u);
    EXPECT_EQ(requests[0].body, R"({"effect": "colorloop"})");
    EXPECT_EQ(requests[1].body, R"({"state": "on"})");
    EXPECT_EQ(service.get_state().find_device(DevicePath::parse("living_room/plugs/stereo"))->properties.at("state"),
              PropertyValue{Switch::on});

    EXPECT_EQ(error_code([&] { service.resolve_proposal(p.id, Decision::approve); }), Errc::NotPending);
    EXPECT_EQ(error_code([&] { service.resolve_proposal("p-999999", Decision::reject); }), Errc::NotFound);
    expect_replay_matches(service);
}

TEST(ControllerService, RejectLeavesStateAlone) {
    ControllerService service(demo_parts(ServiceMode::review));
    const auto p = service.handle_command("I'm home");
    const auto rejected = service.resolve_proposal(p.id, Decision::reject);
    EXPECT_EQ(rejected.status, ProposalStatus::rejected);
    EXPECT_EQ(service.get_state(), demo_context());
    EXPECT_EQ(service.get_proposal(p.id)->status, ProposalStatus::rejected);
    EXPECT_EQ(error_code([&] { service.resolve_proposal(p.id, Decision::approve); }), Errc::NotPending);
}

TEST(ControllerService, SecondConflictingApprovalFailsStale) {
    ControllerService service(demo_parts(ServiceMode::review));
    const auto a = service.handle_command("I'm home");
    const auto b = service.handle_command("make it groovy");
    EXPECT_EQ(service.resolve_proposal(a.id, Decision::approve).status, ProposalStatus::applied);
    const auto second = service.resolve_proposal(b.id, Decision::approve);
    EXPECT_EQ(second.status, ProposalStatus::failed);
    EXPECT_TRUE(second.error.starts_with("StaleChange")) << second.error;
    EXPECT_EQ(service.events_since(0).back().kind, EventKind::adapter_error);
    expect_replay_matches(service);
}

TEST(ControllerService, HistoryIsNewestFirstAndLimited) {
    ControllerService service(demo_parts(ServiceMode::review));
    for (int i = 0; i < 8; ++i) service.handle_command("I am tired " + std::to_string(i));
    const auto history = service.get_history(5);
    ASSERT_EQ(history.size(), 5u);
    EXPECT_EQ(history.front().id, "p-000008");
    EXPECT_EQ(history.back().id, "p-000004");
    EXPECT_EQ(service.get_history(100).size(), 8u);
    EXPECT_TRUE(service.get_history(0).empty());
}

TEST(ControllerService, BackendFailureStoredAsFailedProposal) {
    auto parts = demo_parts(ServiceMode::auto_apply);
    parts.generator = [](const Prompt&) -> std::string { throw Error(Errc::Timeout, "backend too slow"); };
    ControllerService service(std::move(parts));
    EXPECT_EQ(error_code([&] { service.handle_command("I'm home"); }), Errc::BackendError);
    const auto history = service.get_history(1);
    ASSERT_EQ(history.size(), 1u);
    EXPECT_EQ(history[0].status, ProposalStatus::failed);
    EXPECT_TRUE(history[0].error.starts_with("Timeout")) << history[0].error;
    EXPECT_EQ(service.events_since(0).back().kind, EventKind::adapter_error);
    EXPECT_EQ(service.get_state(), demo_context());
    expect_replay_matches(service);
}

TEST(ControllerService, GarbledCompletionIsFailedNotThrown) {
    auto parts = demo_parts(ServiceMode::auto_apply);
    parts.generator = [](const Prompt&) { return std::string("As an AI I cannot"); };
    ControllerService service(std::move(parts));
    const auto p = service.handle_command("I'm home");
    EXPECT_EQ(p.status, ProposalStatus::failed);
    EXPECT_TRUE(p.error.starts_with("NoPayload")) << p.error;
    EXPECT_EQ(service.get_state(), demo_context());
}

TEST(ControllerService, AdapterFailureKeepsStateAndLogsError) {
    auto parts = demo_parts(ServiceMode::auto_apply);
    BindingTable bindings;
    bindings.add({DevicePath::parse("living_room/lights/light_group"), AdapterKind::hue_group, "http://bridge", 1});
    bindings.add({DevicePath::parse("living_room/plugs/stereo"), AdapterKind::smart_plug, "http://plug", 0});
    parts.bindings = bindings;
    parts.transport = std::make_shared<FailingTransport>();
    ControllerService service(std::move(parts));
    const auto p = service.handle_command("I'm leaving");
    EXPECT_EQ(p.status, ProposalStatus::failed);
    EXPECT_TRUE(p.error.starts_with("TransportError")) << p.error;
    EXPECT_EQ(service.get_state(), demo_context());
    EXPECT_EQ(service.events_since(0).back().kind, EventKind::adapter_error);
    expect_replay_matches(service);
}

TEST(ControllerService, CompletionsAreServedInArrivalOrder) {
    std::mutex mu;
    std::vector<std::string> order;
    std::atomic<bool> release{false};
    auto parts = demo_parts(ServiceMode::review);
    parts.generator = [&](const Prompt& prompt) {
        const auto command = split_prompt(prompt.assembled).command;
        {
            std::lock_guard lock(mu);
            order.push_back(command);
        }
        if (command == "first") while (!release) std::this_thread::sleep_for(1ms);
        return mock_rules(prompt);
    };
    ControllerService service(std::move(parts));

    std::vector<std::thread> threads;
    for (const char* text : {"first", "second", "third", "fourth"}) {
        const auto before = service.events_since(0).size();
        threads.emplace_back([&service, text] { service.handle_command(text); });
        while (service.events_since(0).size() == before) std::this_thread::sleep_for(1ms);
        std::this_thread::sleep_for(30ms);
    }
    release = true;
    for (auto& t : threads) t.join();
    EXPECT_EQ(order, (std::vector<std::string>{"first", "second", "third", "fourth"}));
}

TEST(ControllerService, RestartRecoversFromEventLog) {
    TempDir dir;
    auto parts = demo_parts(ServiceMode::review);
    parts.event_log = dir.path() / "events.jsonl";
    std::vector<Proposal> before;
    HomeContext state_before;
    {
        ControllerService service(parts);
        const auto a = service.handle_command("make it groovy");
        service.resolve_proposal(a.id, Decision::approve);
        const auto b = service.handle_command("I'm leaving");
        service.resolve_proposal(b.id, Decision::reject);
        service.handle_command("gotta relax");
        before = service.get_history(100);
        state_before = service.get_state();
    }
    ControllerService restarted(parts);
    EXPECT_EQ(restarted.get_state(), state_before);
    const auto after = restarted.get_history(100);
    ASSERT_EQ(after.size(), before.size());
    for (std::size_t i = 0; i < after.size(); ++i) EXPECT_EQ(to_json(after[i]), to_json(before[i]));
    EXPECT_EQ(after[0].status, ProposalStatus::pending);

    EXPECT_EQ(restarted.resolve_proposal(after[0].id, Decision::approve).status, ProposalStatus::applied);
    EXPECT_EQ(restarted.handle_command("I'm home").id, "p-000004");
    expect_replay_matches(restarted);
    EXPECT_EQ(read_event_log(parts.event_log).size(), restarted.events_since(0).size());
}

TEST(ControllerService, InvalidInitialContextRejected) {
    auto ctx = demo_context();
    ctx.find_device(DevicePath::parse("living_room/lights/light_group"))->properties.insert_or_assign("bri", std::int64_t{999});
    EXPECT_EQ(error_code([&] { ControllerService s(parts_for(ctx, builtin_registry("demo"), ServiceMode::review)); }),
              Errc::InvalidArgument);
}

TEST(ServiceConfig, DemoConfigLoadsAndServesSimulatedDevices) {
    const auto cfg = load_service_config(kDataDir / "config" / "demo.json");
    EXPECT_EQ(cfg.mode, ServiceMode::review);
    EXPECT_EQ(cfg.backend.kind, BackendKind::mock);
    EXPECT_EQ(cfg.listen_port(), 8080);
    EXPECT_TRUE(std::filesystem::exists(cfg.context));

    TempDir dir;
    auto local = cfg;
    local.event_log = dir.path() / "events.jsonl";
    local.mode = ServiceMode::auto_apply;
    auto service = ControllerService::from_config(local);
    ASSERT_NE(service->device_server(), nullptr);
    service->handle_command("make it groovy");
    EXPECT_EQ(service->device_server()->group_action(1).at("effect"), "colorloop");
}

TEST(ServiceConfig, MissingInputsAreIoErrors) {
    TempDir dir;
    const auto file = dir.path() / "config.json";
    std::ofstream(file) << R"({"registry": "builtin:demo", "bindings": "nope.json", "context": "nope.json",
                               "event_log": "events.jsonl"})";
    EXPECT_EQ(error_code([&] { load_service_config(file); }), Errc::IoError);
    std::ofstream(file, std::ios::trunc) << R"({"mode": "yolo"})";
    EXPECT_EQ(error_code([&] { load_service_config(file); }), Errc::InvalidArgument);
}
