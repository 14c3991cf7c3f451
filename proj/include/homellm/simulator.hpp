#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "homellm/context.hpp"
#include "homellm/response.hpp"

namespace httplib {
class Server;
}

namespace homellm {

enum class AdapterKind { hue_group, smart_plug, in_memory };

std::string_view to_string(AdapterKind kind) noexcept;

struct AdapterBinding {
    DevicePath path;
    AdapterKind kind = AdapterKind::in_memory;
    /// Base URL for network adapters ("http://host:port[/prefix]"), or a local
    /// identifier for in_memory.
    std::string address;
    /// hue_group only.
    int group_id = 0;

    friend bool operator==(const AdapterBinding&, const AdapterBinding&) = default;
};

class BindingTable {
public:
    /// Throws InvalidArgument if the path is already bound.
    void add(AdapterBinding binding);
    const AdapterBinding* find(const DevicePath& path) const;
    const std::vector<AdapterBinding>& all() const noexcept { return bindings_; }
    std::vector<AdapterBinding>& all() noexcept { return bindings_; }

    /// Binds every device of the context to the in_memory adapter.
    static BindingTable all_in_memory(const HomeContext& context);

private:
    std::vector<AdapterBinding> bindings_;
};

/// Bindings document: [{"path": "room/type/device", "kind": ..., "address": ..., "group_id": N}, ...]
BindingTable parse_bindings(std::string_view text);
std::string serialize_bindings(const BindingTable& table);

struct WireCommand {
    std::string method;
    std::string path;
    std::string body;

    friend bool operator==(const WireCommand&, const WireCommand&) = default;
};

/// PUT /groups/{id}/action with body keys in the fixed order on, bri, effect.
/// Throws UnsupportedProperty for anything else (raw r/g/b included).
WireCommand hue_group_payload(int group_id, std::span<const Change> changes);

/// PUT /plug/{id} with body {"state": "on"|"off"}. Throws UnsupportedProperty.
WireCommand smart_plug_payload(std::string_view plug_id, std::span<const Change> changes);

/// Carries wire commands to network adapters.
class WireTransport {
public:
    virtual ~WireTransport() = default;
    /// Throws TransportError on connection failure or a non-2xx status.
    virtual void send(const std::string& address, const WireCommand& command) = 0;
    /// GET returning the parsed JSON body. Throws TransportError.
    virtual Json get(const std::string& address, const std::string& path) = 0;
};

std::shared_ptr<WireTransport> make_http_transport(double timeout_seconds = 5.0);

/// Reads a network adapter's state translated into context properties.
/// Throws TransportError.
NamedMap<PropertyValue> read_network_adapter_state(const AdapterBinding& binding, WireTransport& transport);

/// Folds changes into a context with the optimistic old-value check.
/// Throws StaleChange.
HomeContext apply_changes(HomeContext context, std::span<const Change> changes);

struct SentCommand {
    std::string address;
    WireCommand command;
};

/// Ground-truth device state. Writers are serialized; readers get immutable
/// snapshots.
class HomeSimulator {
public:
    HomeSimulator(HomeContext initial, BindingTable bindings,
                  std::shared_ptr<WireTransport> transport = make_http_transport());

    struct ApplyResult {
        HomeContext state;
        std::vector<SentCommand> wire;
    };

    /// All-or-nothing. Throws StaleChange, UnboundDevice, UnsupportedProperty
    /// or TransportError; on any failure the stored state is untouched.
    ApplyResult apply_changeset(const ChangeSet& changeset);

    std::shared_ptr<const HomeContext> snapshot() const;

    /// Throws NotFound if nothing is bound at the path, TransportError for
    /// unreachable network adapters.
    NamedMap<PropertyValue> read_adapter_state(const AdapterBinding& binding) const;

    const BindingTable& bindings() const noexcept { return bindings_; }

    /// Every wire command sent so far, in order.
    std::vector<SentCommand> wire_log() const;

private:
    BindingTable bindings_;
    std::shared_ptr<WireTransport> transport_;

    std::mutex write_mutex_;
    mutable std::mutex snapshot_mutex_;
    std::shared_ptr<const HomeContext> state_;
    std::vector<SentCommand> wire_log_;
};

/// In-process loopback HTTP server speaking the Hue group-action and smart
/// plug dialects. Records every request it receives byte-for-byte.
class SimulatedDeviceServer {
public:
    SimulatedDeviceServer();
    ~SimulatedDeviceServer();

    SimulatedDeviceServer(const SimulatedDeviceServer&) = delete;
    SimulatedDeviceServer& operator=(const SimulatedDeviceServer&) = delete;

    std::string url() const;

    void seed_group(int group_id, Json action);
    void seed_plug(const std::string& plug_id, Switch state);

    struct Request {
        std::string method;
        std::string path;
        std::string body;
    };
    std::vector<Request> requests() const;
    Json group_action(int group_id) const;

private:
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;

    mutable std::mutex mutex_;
    std::map<int, Json> groups_;
    std::map<std::string, std::string> plugs_;
    std::vector<Request> requests_;
};

/// Seeds the server with the initial state of every network-bound device
/// whose binding address is the server's URL.
void seed_simulated_devices(SimulatedDeviceServer& server, const HomeContext& context, const BindingTable& bindings);

} // namespace homellm
