#include "homellm/service.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "homellm/error.hpp"

namespace homellm {

namespace {

std::int64_t to_us(std::chrono::system_clock::time_point t) {
    return std::chrono::duration_cast<std::chrono::microseconds>(t.time_since_epoch()).count();
}

std::chrono::system_clock::time_point from_us(std::int64_t us) {
    return std::chrono::system_clock::time_point(std::chrono::microseconds(us));
}

std::string read_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot read " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool is_blank(std::string_view text) { return text.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos; }

std::string describe(const Error& e) { return e.what(); }

} // namespace

std::string_view to_string(ServiceMode mode) noexcept { return mode == ServiceMode::auto_apply ? "auto" : "review"; }

std::string_view to_string(ProposalStatus status) noexcept {
    switch (status) {
    case ProposalStatus::pending: return "pending";
    case ProposalStatus::applied: return "applied";
    case ProposalStatus::rejected: return "rejected";
    case ProposalStatus::failed: return "failed";
    case ProposalStatus::auto_applied: return "auto_applied";
    }
    return "?";
}

ProposalStatus parse_proposal_status(std::string_view text) {
    for (auto s : {ProposalStatus::pending, ProposalStatus::applied, ProposalStatus::rejected, ProposalStatus::failed,
                   ProposalStatus::auto_applied})
        if (to_string(s) == text) return s;
    throw Error(Errc::StructureError, "unknown proposal status '" + std::string(text) + "'");
}

Json to_json(const Proposal& p) {
    Json doc = Json::object();
    doc["id"] = p.id;
    doc["command"] = Json{{"text", p.command.text}, {"issued_at_us", to_us(p.command.issued_at)}};
    doc["changeset"] = to_json(p.changeset);
    doc["latency"] = p.latency_seconds;
    doc["status"] = to_string(p.status);
    doc["created_at_us"] = to_us(p.created_at);
    doc["shape"] = p.shape;
    doc["error"] = p.error;
    return doc;
}

Proposal proposal_from_json(const Json& doc) {
    try {
        Proposal p;
        p.id = doc.at("id").get<std::string>();
        p.command.text = doc.at("command").at("text").get<std::string>();
        p.command.issued_at = from_us(doc.at("command").at("issued_at_us").get<std::int64_t>());
        p.changeset = changeset_from_json(doc.at("changeset"));
        p.latency_seconds = doc.at("latency").get<double>();
        p.status = parse_proposal_status(doc.at("status").get<std::string>());
        p.created_at = from_us(doc.at("created_at_us").get<std::int64_t>());
        p.shape = doc.value("shape", std::string());
        p.error = doc.value("error", std::string());
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::StructureError, std::string("proposal: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

std::string ServiceConfig::listen_host() const {
    auto colon = listen.rfind(':');
    if (colon == std::string::npos || colon == 0) throw Error(Errc::InvalidArgument, "listen must be host:port");
    return listen.substr(0, colon);
}

int ServiceConfig::listen_port() const {
    auto colon = listen.rfind(':');
    if (colon == std::string::npos) throw Error(Errc::InvalidArgument, "listen must be host:port");
    try {
        std::size_t used = 0;
        const int port = std::stoi(listen.substr(colon + 1), &used);
        if (used != listen.size() - colon - 1 || port < 0 || port > 65535) throw std::out_of_range("port");
        return port;
    } catch (const std::exception&) {
        throw Error(Errc::InvalidArgument, "bad port in listen address '" + listen + "'");
    }
}

ServiceConfig load_service_config(const std::filesystem::path& file) {
    Json doc;
    try {
        doc = Json::parse(read_file(file));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(Errc::SyntaxError, file.string() + ": " + e.what());
    }
    const auto base = file.parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_absolute() ? path : base / path;
    };
    auto readable = [](const std::filesystem::path& p) {
        if (!std::ifstream(p)) throw Error(Errc::IoError, "cannot read " + p.string());
        return p;
    };

    ServiceConfig cfg;
    try {
        const auto mode = doc.value("mode", std::string("review"));
        if (mode == "auto") cfg.mode = ServiceMode::auto_apply;
        else if (mode == "review") cfg.mode = ServiceMode::review;
        else throw Error(Errc::InvalidArgument, "mode must be auto or review");
        const auto policy = doc.value("policy", std::string("drop_invalid_fields"));
        if (policy == "drop_invalid_fields") cfg.policy = ValidationPolicy::drop_invalid_fields;
        else if (policy == "reject_all_on_violation") cfg.policy = ValidationPolicy::reject_all_on_violation;
        else throw Error(Errc::InvalidArgument, "unknown policy '" + policy + "'");
        cfg.backend = backend_config_from_json(doc.value("backend", Json::object()));

        cfg.registry = doc.at("registry").get<std::string>();
        if (cfg.registry.rfind("builtin:", 0) != 0) cfg.registry = readable(resolve(cfg.registry)).string();
        cfg.bindings = readable(resolve(doc.at("bindings").get<std::string>()));
        cfg.context = readable(resolve(doc.at("context").get<std::string>()));
        cfg.event_log = resolve(doc.at("event_log").get<std::string>());
        if (!std::filesystem::is_directory(cfg.event_log.parent_path()))
            throw Error(Errc::IoError, "event log directory " + cfg.event_log.parent_path().string() + " missing");
        cfg.listen = doc.value("listen", cfg.listen);
        if (doc.contains("static_dir")) cfg.static_dir = resolve(doc.at("static_dir").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidArgument, file.string() + ": " + e.what());
    }
    cfg.listen_port();
    return cfg;
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

ReplayResult replay_event_log(const HomeContext& initial, std::span<const EventRecord> events) {
    ReplayResult out{initial, {}};
    auto find = [&](const Json& payload) -> Proposal* {
        const auto id = payload.value("id", std::string());
        auto it = std::find_if(out.proposals.begin(), out.proposals.end(), [&](const Proposal& p) { return p.id == id; });
        return it == out.proposals.end() ? nullptr : &*it;
    };
    for (const auto& e : events) {
        switch (e.kind) {
        case EventKind::proposal_created:
            out.proposals.push_back(proposal_from_json(e.payload.at("proposal")));
            break;
        case EventKind::proposal_applied: {
            std::vector<Change> changes;
            for (const auto& c : e.payload.at("changes")) changes.push_back(change_from_json(c));
            out.state = apply_changes(std::move(out.state), changes);
            if (auto* p = find(e.payload)) p->status = parse_proposal_status(e.payload.at("status").get<std::string>());
            break;
        }
        case EventKind::proposal_rejected:
            if (auto* p = find(e.payload)) p->status = ProposalStatus::rejected;
            break;
        case EventKind::adapter_error:
            if (auto* p = find(e.payload); p && e.payload.contains("status")) {
                p->status = parse_proposal_status(e.payload.at("status").get<std::string>());
                p->error = e.payload.value("error", std::string());
            }
            break;
        default:
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Service
// ---------------------------------------------------------------------------

std::uint64_t ControllerService::TicketQueue::enter() {
    std::unique_lock lock(mutex_);
    const auto ticket = next_ticket_++;
    cv_.wait(lock, [&] { return serving_ == ticket; });
    return ticket;
}

void ControllerService::TicketQueue::leave() {
    {
        std::lock_guard lock(mutex_);
        ++serving_;
    }
    cv_.notify_all();
}

ControllerService::ControllerService(ServiceParts parts)
    : mode_(parts.mode), policy_(parts.policy), initial_(std::move(parts.context)), registry_(std::move(parts.registry)) {
    const auto report = validate_context(initial_, registry_);
    if (!report.ok()) {
        const auto& v = report.violations.front();
        throw Error(Errc::InvalidArgument, "initial context violates schema at " + v.path.str() + "." + v.property +
                                               " (" + std::string(to_string(v.kind)) + ")");
    }
    gateway_ = parts.generator ? std::make_unique<Gateway>(parts.backend, std::move(parts.generator))
                               : std::make_unique<Gateway>(parts.backend);
    log_ = std::make_unique<EventLog>(parts.event_log);

    HomeContext state = initial_;
    const auto history = log_->all();
    if (!history.empty()) {
        ReplayResult replayed = replay_event_log(initial_, history);
        state = std::move(replayed.state);
        proposals_ = std::move(replayed.proposals);
        for (const auto& p : proposals_) {
            if (p.id.size() > 2 && p.id.rfind("p-", 0) == 0)
                id_counter_ = std::max<std::uint64_t>(id_counter_, std::stoull(p.id.substr(2)));
        }
    }
    auto transport = parts.transport ? parts.transport : make_http_transport();
    simulator_ = std::make_unique<HomeSimulator>(std::move(state), std::move(parts.bindings), std::move(transport));
}

ControllerService::~ControllerService() = default;

std::unique_ptr<ControllerService> ControllerService::from_config(const ServiceConfig& config) {
    ServiceParts parts;
    parts.mode = config.mode;
    parts.policy = config.policy;
    parts.backend = config.backend;
    parts.context = parse_context(read_file(config.context));
    parts.registry = config.registry.rfind("builtin:", 0) == 0 ? builtin_registry(config.registry.substr(8))
                                                               : parse_registry(read_file(config.registry));
    parts.bindings = parse_bindings(read_file(config.bindings));
    parts.event_log = config.event_log;

    std::unique_ptr<SimulatedDeviceServer> server;
    for (auto& b : parts.bindings.all()) {
        if (b.kind == AdapterKind::in_memory || b.address != "simulated") continue;
        if (!server) server = std::make_unique<SimulatedDeviceServer>();
        b.address = server->url();
    }
    auto service = std::make_unique<ControllerService>(std::move(parts));
    if (server) {
        seed_simulated_devices(*server, *service->simulator_->snapshot(), service->simulator_->bindings());
        service->device_server_ = std::move(server);
    }
    return service;
}

std::string ControllerService::next_id() {
    std::lock_guard lock(proposals_mutex_);
    char buf[32];
    std::snprintf(buf, sizeof buf, "p-%06llu", static_cast<unsigned long long>(++id_counter_));
    return buf;
}

void ControllerService::store(const Proposal& proposal) {
    std::lock_guard lock(proposals_mutex_);
    auto it = std::find_if(proposals_.begin(), proposals_.end(), [&](const Proposal& p) { return p.id == proposal.id; });
    if (it == proposals_.end()) proposals_.push_back(proposal);
    else *it = proposal;
}

ProposalStatus ControllerService::apply_and_log(Proposal& proposal, ProposalStatus success_status) {
    try {
        simulator_->apply_changeset(proposal.changeset);
        proposal.status = success_status;
    } catch (const Error& e) {
        proposal.status = ProposalStatus::failed;
        proposal.error = describe(e);
    }
    return proposal.status;
}

Proposal ControllerService::handle_command(std::string_view text) {
    if (is_blank(text)) throw Error(Errc::EmptyCommand, "command text is empty");

    Proposal p;
    p.id = next_id();
    p.command = Command{std::string(text), std::chrono::system_clock::now()};
    log_->append(EventKind::command_received, Json{{"id", p.id}, {"text", p.command.text}});

    queue_.enter();
    struct Leave {
        TicketQueue& q;
        ~Leave() { q.leave(); }
    } leave{queue_};

    const auto state = simulator_->snapshot();
    const Prompt prompt = build_prompt(*state, p.command);
    p.created_at = std::chrono::system_clock::now();

    Completion completion;
    try {
        completion = gateway_->complete(prompt);
    } catch (const Error& e) {
        p.status = ProposalStatus::failed;
        p.error = describe(e);
        store(p);
        log_->append(EventKind::proposal_created, Json{{"proposal", to_json(p)}});
        log_->append(EventKind::adapter_error, Json{{"id", p.id},
                                                    {"stage", "backend"},
                                                    {"status", "failed"},
                                                    {"error", p.error}});
        throw Error(Errc::BackendError, p.id + ": " + p.error);
    }
    p.latency_seconds = completion.latency_seconds;
    log_->append(EventKind::completion_received, Json{{"id", p.id},
                                                      {"backend", to_string(completion.backend_kind)},
                                                      {"model", gateway_->config().model_name},
                                                      {"latency", completion.latency_seconds},
                                                      {"text", completion.text}});

    try {
        auto processed = process_completion(completion.text, *state, registry_, policy_);
        p.shape = to_string(processed.shape);
        p.changeset = std::move(processed.changeset);
    } catch (const Error& e) {
        p.status = ProposalStatus::failed;
        p.error = describe(e);
        store(p);
        log_->append(EventKind::proposal_created, Json{{"proposal", to_json(p)}});
        return p;
    }
    for (const auto& v : p.changeset.dropped)
        log_->append(EventKind::validation_violation, Json{{"id", p.id}, {"violation", to_json(v)}});

    if (mode_ == ServiceMode::review) {
        p.status = ProposalStatus::pending;
        store(p);
        log_->append(EventKind::proposal_created, Json{{"proposal", to_json(p)}});
        return p;
    }

    std::lock_guard apply_lock(apply_mutex_);
    apply_and_log(p, ProposalStatus::auto_applied);
    store(p);
    log_->append(EventKind::proposal_created, Json{{"proposal", to_json(p)}});
    if (p.status == ProposalStatus::auto_applied) {
        log_->append(EventKind::proposal_applied,
                     Json{{"id", p.id}, {"status", "auto_applied"}, {"changes", to_json(p.changeset).at("changes")}});
    } else {
        log_->append(EventKind::adapter_error, Json{{"id", p.id}, {"stage", "apply"}, {"status", "failed"},
                                                    {"error", p.error}});
    }
    return p;
}

Proposal ControllerService::resolve_proposal(std::string_view id, Decision decision) {
    std::lock_guard apply_lock(apply_mutex_);
    Proposal p;
    {
        std::lock_guard lock(proposals_mutex_);
        auto it = std::find_if(proposals_.begin(), proposals_.end(), [&](const Proposal& q) { return q.id == id; });
        if (it == proposals_.end()) throw Error(Errc::NotFound, "no proposal " + std::string(id));
        if (it->status != ProposalStatus::pending)
            throw Error(Errc::NotPending, std::string(id) + " is " + std::string(to_string(it->status)));
        p = *it;
    }

    if (decision == Decision::reject) {
        p.status = ProposalStatus::rejected;
        store(p);
        log_->append(EventKind::proposal_rejected, Json{{"id", p.id}});
        return p;
    }

    apply_and_log(p, ProposalStatus::applied);
    store(p);
    if (p.status == ProposalStatus::applied) {
        log_->append(EventKind::proposal_applied,
                     Json{{"id", p.id}, {"status", "applied"}, {"changes", to_json(p.changeset).at("changes")}});
    } else {
        log_->append(EventKind::adapter_error, Json{{"id", p.id}, {"stage", "apply"}, {"status", "failed"},
                                                    {"error", p.error}});
    }
    return p;
}

HomeContext ControllerService::get_state() const { return *simulator_->snapshot(); }

std::vector<Proposal> ControllerService::get_history(std::size_t limit) const {
    std::lock_guard lock(proposals_mutex_);
    std::vector<Proposal> out;
    for (auto it = proposals_.rbegin(); it != proposals_.rend() && out.size() < limit; ++it) out.push_back(*it);
    return out;
}

std::optional<Proposal> ControllerService::get_proposal(std::string_view id) const {
    std::lock_guard lock(proposals_mutex_);
    auto it = std::find_if(proposals_.begin(), proposals_.end(), [&](const Proposal& p) { return p.id == id; });
    if (it == proposals_.end()) return std::nullopt;
    return *it;
}

std::vector<EventRecord> ControllerService::events_since(std::uint64_t seq) const { return log_->since(seq); }

} // namespace homellm
