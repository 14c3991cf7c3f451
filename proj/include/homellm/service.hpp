#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "homellm/context.hpp"
#include "homellm/event_log.hpp"
#include "homellm/gateway.hpp"
#include "homellm/prompt.hpp"
#include "homellm/response.hpp"
#include "homellm/simulator.hpp"

namespace homellm {

enum class ServiceMode { auto_apply, review };
enum class ProposalStatus { pending, applied, rejected, failed, auto_applied };
enum class Decision { approve, reject };

std::string_view to_string(ServiceMode mode) noexcept;
std::string_view to_string(ProposalStatus status) noexcept;
ProposalStatus parse_proposal_status(std::string_view text);

struct Proposal {
    std::string id;
    Command command;
    ChangeSet changeset;
    double latency_seconds = 0.0;
    ProposalStatus status = ProposalStatus::pending;
    std::chrono::system_clock::time_point created_at;
    /// Shape of the model's payload, empty if processing failed.
    std::string shape;
    /// Set for failed proposals: "<Errc>: message".
    std::string error;
};

Json to_json(const Proposal& proposal);
Proposal proposal_from_json(const Json& doc);

struct ServiceConfig {
    ServiceMode mode = ServiceMode::review;
    BackendConfig backend;
    ValidationPolicy policy = ValidationPolicy::drop_invalid_fields;
    /// A file path, or "builtin:<name>".
    std::string registry;
    std::filesystem::path bindings;
    std::filesystem::path context;
    std::filesystem::path event_log;
    std::string listen = "127.0.0.1:8080";
    std::optional<std::filesystem::path> static_dir;

    std::string listen_host() const;
    int listen_port() const;
};

/// Relative paths resolve against the config file's directory. Throws
/// IoError for unreadable inputs, InvalidArgument for bad values.
ServiceConfig load_service_config(const std::filesystem::path& file);

/// Everything the service needs, already loaded. Used directly by tests.
struct ServiceParts {
    ServiceMode mode = ServiceMode::review;
    ValidationPolicy policy = ValidationPolicy::drop_invalid_fields;
    HomeContext context;
    SchemaRegistry registry;
    BindingTable bindings;
    BackendConfig backend;
    /// Replaces the backend with an in-process generator when set.
    TextGenerator generator;
    std::filesystem::path event_log;
    std::shared_ptr<WireTransport> transport;
};

/// Rebuilt from an event log on top of the initial context.
struct ReplayResult {
    HomeContext state;
    /// In creation order.
    std::vector<Proposal> proposals;
};

/// Throws StaleChange if the log's applied changes do not fold cleanly.
ReplayResult replay_event_log(const HomeContext& initial, std::span<const EventRecord> events);

class ControllerService {
public:
    explicit ControllerService(ServiceParts parts);
    ~ControllerService();

    /// Loads every file named by the config. Bindings whose address is
    /// "simulated" are served by an in-process SimulatedDeviceServer.
    static std::unique_ptr<ControllerService> from_config(const ServiceConfig& config);

    /// Throws EmptyCommand, or BackendError (the proposal is stored as failed).
    Proposal handle_command(std::string_view text);

    /// Throws NotFound or NotPending.
    Proposal resolve_proposal(std::string_view id, Decision decision);

    HomeContext get_state() const;
    /// Newest first.
    std::vector<Proposal> get_history(std::size_t limit) const;
    std::optional<Proposal> get_proposal(std::string_view id) const;
    std::vector<EventRecord> events_since(std::uint64_t seq) const;

    ServiceMode mode() const noexcept { return mode_; }
    const HomeContext& initial_context() const noexcept { return initial_; }
    const HomeSimulator& simulator() const noexcept { return *simulator_; }
    const SimulatedDeviceServer* device_server() const noexcept { return device_server_.get(); }

private:
    /// FIFO admission for completions: one in flight, the rest queue in order.
    class TicketQueue {
    public:
        std::uint64_t enter();
        void leave();

    private:
        std::mutex mutex_;
        std::condition_variable cv_;
        std::uint64_t next_ticket_ = 0;
        std::uint64_t serving_ = 0;
    };

    std::string next_id();
    void store(const Proposal& proposal);
    /// Applies and logs; returns the resulting status.
    ProposalStatus apply_and_log(Proposal& proposal, ProposalStatus success_status);

    ServiceMode mode_;
    ValidationPolicy policy_;
    HomeContext initial_;
    SchemaRegistry registry_;
    std::unique_ptr<SimulatedDeviceServer> device_server_;
    std::unique_ptr<HomeSimulator> simulator_;
    std::unique_ptr<Gateway> gateway_;
    std::unique_ptr<EventLog> log_;

    TicketQueue queue_;
    std::mutex apply_mutex_;
    mutable std::mutex proposals_mutex_;
    std::vector<Proposal> proposals_;
    std::uint64_t id_counter_ = 0;

};

/// HTTP front end for a ControllerService.
class HttpApi {
public:
    HttpApi(ControllerService& service, std::optional<std::filesystem::path> static_dir = std::nullopt);
    ~HttpApi();

    HttpApi(const HttpApi&) = delete;
    HttpApi& operator=(const HttpApi&) = delete;

    /// Binds and serves on a background thread; port 0 picks a free port.
    /// Returns the bound port. Throws TransportError.
    int start(const std::string& host, int port);
    /// Blocks serving on the calling thread.
    void run(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace homellm
