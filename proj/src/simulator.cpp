#include "homellm/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <optional>

#include <httplib.h>

#include "homellm/error.hpp"

namespace homellm {

std::string_view to_string(AdapterKind kind) noexcept {
    switch (kind) {
    case AdapterKind::hue_group: return "hue_group";
    case AdapterKind::smart_plug: return "smart_plug";
    case AdapterKind::in_memory: return "in_memory";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Bindings
// ---------------------------------------------------------------------------

void BindingTable::add(AdapterBinding binding) {
    if (find(binding.path)) throw Error(Errc::InvalidArgument, "device " + binding.path.str() + " bound twice");
    bindings_.push_back(std::move(binding));
}

const AdapterBinding* BindingTable::find(const DevicePath& path) const {
    auto it = std::find_if(bindings_.begin(), bindings_.end(), [&](const AdapterBinding& b) { return b.path == path; });
    return it == bindings_.end() ? nullptr : &*it;
}

BindingTable BindingTable::all_in_memory(const HomeContext& context) {
    BindingTable table;
    context.for_each_device([&](const DevicePath& path, const Device&) {
        table.add({path, AdapterKind::in_memory, "memory", 0});
    });
    return table;
}

BindingTable parse_bindings(std::string_view text) {
    Json doc;
    try {
        doc = Json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(Errc::SyntaxError, e.what());
    }
    if (!doc.is_array()) throw Error(Errc::StructureError, "bindings document must be an array");
    BindingTable table;
    for (const auto& item : doc) {
        try {
            AdapterBinding b;
            b.path = DevicePath::parse(item.at("path").get<std::string>());
            const auto kind = item.at("kind").get<std::string>();
            if (kind == "hue_group") b.kind = AdapterKind::hue_group;
            else if (kind == "smart_plug") b.kind = AdapterKind::smart_plug;
            else if (kind == "in_memory") b.kind = AdapterKind::in_memory;
            else throw Error(Errc::StructureError, "unknown adapter kind '" + kind + "'");
            b.address = item.value("address", std::string("memory"));
            b.group_id = item.value("group_id", 0);
            if (b.kind == AdapterKind::hue_group && b.group_id < 0)
                throw Error(Errc::StructureError, "hue_group binding needs a group_id");
            table.add(std::move(b));
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::StructureError, std::string("binding: ") + e.what());
        }
    }
    return table;
}

std::string serialize_bindings(const BindingTable& table) {
    Json doc = Json::array();
    for (const auto& b : table.all()) {
        Json item = Json::object();
        item["path"] = b.path.str();
        item["kind"] = to_string(b.kind);
        item["address"] = b.address;
        if (b.kind == AdapterKind::hue_group) item["group_id"] = b.group_id;
        doc.push_back(std::move(item));
    }
    return doc.dump(2);
}

// ---------------------------------------------------------------------------
// Wire payloads
// ---------------------------------------------------------------------------

namespace {

// Flat object with ": " and ", " separators, which is the byte form the
// adapters put on the wire.
std::string flat_object(const std::vector<std::pair<std::string, Json>>& fields) {
    std::string out = "{";
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ", ";
        out += Json(fields[i].first).dump() + ": " + fields[i].second.dump();
    }
    return out + "}";
}

std::string unsupported(const Change& c, const char* dialect) {
    return c.path.str() + "." + c.property + " has no " + dialect + " mapping";
}

} // namespace

WireCommand hue_group_payload(int group_id, std::span<const Change> changes) {
    std::optional<bool> on;
    std::optional<std::int64_t> bri;
    std::optional<std::string> effect;
    for (const auto& c : changes) {
        if (c.property == "state" && std::holds_alternative<Switch>(c.new_value)) {
            on = std::get<Switch>(c.new_value) == Switch::on;
        } else if ((c.property == "bri" || c.property == "brightness") &&
                   std::holds_alternative<std::int64_t>(c.new_value)) {
            bri = std::clamp<std::int64_t>(std::get<std::int64_t>(c.new_value), 0, 254);
        } else if (c.property == "effect" && std::holds_alternative<std::string>(c.new_value)) {
            effect = std::get<std::string>(c.new_value);
        } else {
            throw Error(Errc::UnsupportedProperty, unsupported(c, "hue group-action"));
        }
    }
    std::vector<std::pair<std::string, Json>> fields;
    if (on) fields.emplace_back("on", *on);
    if (bri) fields.emplace_back("bri", *bri);
    if (effect) fields.emplace_back("effect", *effect);
    return {"PUT", "/groups/" + std::to_string(group_id) + "/action", flat_object(fields)};
}

WireCommand smart_plug_payload(std::string_view plug_id, std::span<const Change> changes) {
    std::optional<Switch> state;
    for (const auto& c : changes) {
        if (c.property != "state" || !std::holds_alternative<Switch>(c.new_value))
            throw Error(Errc::UnsupportedProperty, unsupported(c, "smart plug"));
        state = std::get<Switch>(c.new_value);
    }
    std::vector<std::pair<std::string, Json>> fields;
    if (state) fields.emplace_back("state", *state == Switch::on ? "on" : "off");
    return {"PUT", "/plug/" + std::string(plug_id), flat_object(fields)};
}

// ---------------------------------------------------------------------------
// HTTP transport
// ---------------------------------------------------------------------------

namespace {

struct SplitAddress {
    std::string origin;
    std::string prefix;
};

SplitAddress split_address(const std::string& address) {
    auto scheme_end = address.find("://");
    if (scheme_end == std::string::npos) throw Error(Errc::TransportError, "not a URL: '" + address + "'");
    auto path_at = address.find('/', scheme_end + 3);
    if (path_at == std::string::npos) return {address, ""};
    std::string prefix = address.substr(path_at);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {address.substr(0, path_at), prefix};
}

class HttpTransport final : public WireTransport {
public:
    explicit HttpTransport(double timeout) : timeout_(timeout) {}

    void send(const std::string& address, const WireCommand& command) override {
        auto [origin, prefix] = split_address(address);
        auto client = make_client(origin);
        const std::string path = prefix + command.path;
        httplib::Result res = command.method == "POST" ? client->Post(path, command.body, "application/json")
                                                       : client->Put(path, command.body, "application/json");
        check(res, command.method + " " + address + command.path);
    }

    Json get(const std::string& address, const std::string& path) override {
        auto [origin, prefix] = split_address(address);
        auto client = make_client(origin);
        auto res = client->Get(prefix + path);
        check(res, "GET " + address + path);
        try {
            return Json::parse(res->body);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(Errc::TransportError, std::string("malformed adapter response: ") + e.what());
        }
    }

private:
    std::unique_ptr<httplib::Client> make_client(const std::string& origin) const {
        auto client = std::make_unique<httplib::Client>(origin);
        const auto t = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(timeout_));
        client->set_connection_timeout(t);
        client->set_read_timeout(t);
        client->set_write_timeout(t);
        return client;
    }

    static void check(const httplib::Result& res, const std::string& what) {
        if (!res) throw Error(Errc::TransportError, what + ": " + httplib::to_string(res.error()));
        if (res->status < 200 || res->status >= 300)
            throw Error(Errc::TransportError, what + ": HTTP " + std::to_string(res->status));
    }

    double timeout_;
};

} // namespace

std::shared_ptr<WireTransport> make_http_transport(double timeout_seconds) {
    return std::make_shared<HttpTransport>(timeout_seconds);
}

NamedMap<PropertyValue> read_network_adapter_state(const AdapterBinding& binding, WireTransport& transport) {
    NamedMap<PropertyValue> props;
    try {
        if (binding.kind == AdapterKind::hue_group) {
            const Json doc = transport.get(binding.address, "/groups/" + std::to_string(binding.group_id));
            const Json& action = doc.at("action");
            if (action.contains("on")) props.insert("state", action.at("on").get<bool>() ? Switch::on : Switch::off);
            if (action.contains("bri")) props.insert("bri", action.at("bri").get<std::int64_t>());
            if (action.contains("effect")) props.insert("effect", action.at("effect").get<std::string>());
        } else if (binding.kind == AdapterKind::smart_plug) {
            const Json doc = transport.get(binding.address, "/plug/" + binding.path.device);
            props.insert("state", doc.at("state").get<std::string>() == "on" ? Switch::on : Switch::off);
        } else {
            throw Error(Errc::InvalidArgument, "in_memory bindings are read through the simulator");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::TransportError, std::string("unexpected adapter state: ") + e.what());
    }
    return props;
}

// ---------------------------------------------------------------------------
// Simulator
// ---------------------------------------------------------------------------

HomeContext apply_changes(HomeContext context, std::span<const Change> changes) {
    for (const auto& c : changes) {
        Device* device = context.find_device(c.path);
        PropertyValue* stored = device ? device->properties.find(c.property) : nullptr;
        if (!stored) throw Error(Errc::StaleChange, c.path.str() + "." + c.property + " no longer exists");
        if (*stored != c.old_value)
            throw Error(Errc::StaleChange, c.path.str() + "." + c.property + " is " + to_string(*stored) +
                                               ", expected " + to_string(c.old_value));
        *stored = c.new_value;
    }
    return context;
}

HomeSimulator::HomeSimulator(HomeContext initial, BindingTable bindings, std::shared_ptr<WireTransport> transport)
    : bindings_(std::move(bindings)),
      transport_(std::move(transport)),
      state_(std::make_shared<const HomeContext>(std::move(initial))) {}

std::shared_ptr<const HomeContext> HomeSimulator::snapshot() const {
    std::lock_guard lock(snapshot_mutex_);
    return state_;
}

std::vector<SentCommand> HomeSimulator::wire_log() const {
    std::lock_guard lock(snapshot_mutex_);
    return wire_log_;
}

namespace {

struct AdapterTarget {
    AdapterKind kind;
    std::string address;
    std::string id; // group id or plug id

    friend bool operator==(const AdapterTarget&, const AdapterTarget&) = default;
};

WireCommand build_payload(const AdapterTarget& target, std::span<const Change> changes) {
    if (target.kind == AdapterKind::hue_group) return hue_group_payload(std::stoi(target.id), changes);
    return smart_plug_payload(target.id, changes);
}

Change reversed(const Change& c) { return {c.path, c.property, c.new_value, c.old_value}; }

} // namespace

HomeSimulator::ApplyResult HomeSimulator::apply_changeset(const ChangeSet& changeset) {
    std::lock_guard writer(write_mutex_);
    const auto current = snapshot();

    for (const auto& c : changeset.changes)
        if (!bindings_.find(c.path)) throw Error(Errc::UnboundDevice, c.path.str() + " has no adapter binding");
    HomeContext next = apply_changes(*current, changeset.changes);

    // One wire command per touched network adapter, in first-touch order.
    std::vector<std::pair<AdapterTarget, std::vector<Change>>> groups;
    for (const auto& c : changeset.changes) {
        const AdapterBinding& b = *bindings_.find(c.path);
        if (b.kind == AdapterKind::in_memory) continue;
        AdapterTarget target{b.kind, b.address,
                             b.kind == AdapterKind::hue_group ? std::to_string(b.group_id) : b.path.device};
        auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == target; });
        if (it == groups.end()) groups.push_back({target, {c}});
        else it->second.push_back(c);
    }
    std::vector<SentCommand> wire;
    std::vector<std::vector<Change>> inverses;
    for (const auto& [target, changes] : groups) {
        wire.push_back({target.address, build_payload(target, changes)});
        std::vector<Change> inverse;
        for (auto it = changes.rbegin(); it != changes.rend(); ++it) inverse.push_back(reversed(*it));
        inverses.push_back(std::move(inverse));
    }

    for (std::size_t i = 0; i < wire.size(); ++i) {
        try {
            transport_->send(wire[i].address, wire[i].command);
        } catch (const Error&) {
            for (std::size_t j = i; j-- > 0;) {
                try {
                    transport_->send(wire[j].address, build_payload(groups[j].first, inverses[j]));
                } catch (const Error&) {
                    // best effort: the adapter is already unreachable or rejecting writes
                }
            }
            throw;
        }
    }

    auto published = std::make_shared<const HomeContext>(next);
    {
        std::lock_guard lock(snapshot_mutex_);
        state_ = std::move(published);
        wire_log_.insert(wire_log_.end(), wire.begin(), wire.end());
    }
    return {std::move(next), std::move(wire)};
}

NamedMap<PropertyValue> HomeSimulator::read_adapter_state(const AdapterBinding& binding) const {
    if (binding.kind != AdapterKind::in_memory) return read_network_adapter_state(binding, *transport_);
    const auto state = snapshot();
    const Device* device = state->find_device(binding.path);
    if (!device) throw Error(Errc::NotFound, binding.path.str() + " is not in the home");
    return device->properties;
}

// ---------------------------------------------------------------------------
// Simulated device server
// ---------------------------------------------------------------------------

SimulatedDeviceServer::SimulatedDeviceServer() : server_(std::make_unique<httplib::Server>()) {
    auto& srv = *server_;
    auto bad_request = [](httplib::Response& res, const std::string& why) {
        res.status = 400;
        res.set_content(Json{{"error", why}}.dump(), "application/json");
    };

    srv.Put(R"(/groups/(\d+)/action)", [this, bad_request](const httplib::Request& req, httplib::Response& res) {
        const int id = std::stoi(req.matches[1]);
        std::lock_guard lock(mutex_);
        requests_.push_back({req.method, req.path, req.body});
        auto group = groups_.find(id);
        if (group == groups_.end()) {
            res.status = 404;
            return;
        }
        Json body = Json::parse(req.body, nullptr, false);
        if (!body.is_object()) return bad_request(res, "body must be an object");
        for (const auto& [key, value] : body.items()) {
            const bool ok = (key == "on" && value.is_boolean()) ||
                            (key == "bri" && value.is_number_integer() && value.get<int>() >= 0 &&
                             value.get<int>() <= 254) ||
                            (key == "effect" && value.is_string());
            if (!ok) return bad_request(res, "invalid field '" + key + "'");
        }
        Json reply = Json::array();
        for (const auto& [key, value] : body.items()) {
            group->second[key] = value;
            reply.push_back({{"success", {{"/groups/" + std::to_string(id) + "/action/" + key, value}}}});
        }
        res.set_content(reply.dump(), "application/json");
    });

    srv.Get(R"(/groups/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
        const int id = std::stoi(req.matches[1]);
        std::lock_guard lock(mutex_);
        auto group = groups_.find(id);
        if (group == groups_.end()) {
            res.status = 404;
            return;
        }
        res.set_content(Json{{"action", group->second}}.dump(), "application/json");
    });

    srv.Put(R"(/plug/([^/]+))", [this, bad_request](const httplib::Request& req, httplib::Response& res) {
        std::lock_guard lock(mutex_);
        requests_.push_back({req.method, req.path, req.body});
        auto plug = plugs_.find(req.matches[1]);
        if (plug == plugs_.end()) {
            res.status = 404;
            return;
        }
        Json body = Json::parse(req.body, nullptr, false);
        if (!body.is_object() || body.size() != 1 || !body.contains("state") || !body["state"].is_string())
            return bad_request(res, "expected {\"state\": \"on\"|\"off\"}");
        const auto state = body["state"].get<std::string>();
        if (state != "on" && state != "off") return bad_request(res, "state must be on or off");
        plug->second = state;
        res.set_content(Json{{"state", state}}.dump(), "application/json");
    });

    srv.Get(R"(/plug/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        std::lock_guard lock(mutex_);
        auto plug = plugs_.find(req.matches[1]);
        if (plug == plugs_.end()) {
            res.status = 404;
            return;
        }
        res.set_content(Json{{"state", plug->second}}.dump(), "application/json");
    });

    port_ = srv.bind_to_any_port("127.0.0.1");
    if (port_ <= 0) throw Error(Errc::TransportError, "simulated device server could not bind");
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

SimulatedDeviceServer::~SimulatedDeviceServer() {
    server_->stop();
    if (thread_.joinable()) thread_.join();
}

std::string SimulatedDeviceServer::url() const { return "http://127.0.0.1:" + std::to_string(port_); }

void SimulatedDeviceServer::seed_group(int group_id, Json action) {
    std::lock_guard lock(mutex_);
    groups_[group_id] = std::move(action);
}

void SimulatedDeviceServer::seed_plug(const std::string& plug_id, Switch state) {
    std::lock_guard lock(mutex_);
    plugs_[plug_id] = state == Switch::on ? "on" : "off";
}

std::vector<SimulatedDeviceServer::Request> SimulatedDeviceServer::requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

Json SimulatedDeviceServer::group_action(int group_id) const {
    std::lock_guard lock(mutex_);
    auto it = groups_.find(group_id);
    return it == groups_.end() ? Json() : it->second;
}

void seed_simulated_devices(SimulatedDeviceServer& server, const HomeContext& context, const BindingTable& bindings) {
    const std::string url = server.url();
    for (const auto& b : bindings.all()) {
        if (b.address != url) continue;
        const Device* device = context.find_device(b.path);
        if (!device) continue;
        if (b.kind == AdapterKind::hue_group) {
            Json action = server.group_action(b.group_id);
            if (!action.is_object()) action = Json::object();
            if (const auto* s = device->properties.find("state"))
                if (const auto* sw = std::get_if<Switch>(s)) action["on"] = *sw == Switch::on;
            for (const char* key : {"bri", "brightness"})
                if (const auto* v = device->properties.find(key))
                    if (const auto* i = std::get_if<std::int64_t>(v)) action["bri"] = *i;
            if (const auto* e = device->properties.find("effect"))
                if (const auto* s = std::get_if<std::string>(e)) action["effect"] = *s;
            server.seed_group(b.group_id, std::move(action));
        } else if (b.kind == AdapterKind::smart_plug) {
            const auto* s = device->properties.find("state");
            const auto* sw = s ? std::get_if<Switch>(s) : nullptr;
            server.seed_plug(b.path.device, sw ? *sw : Switch::off);
        }
    }
}

} // namespace homellm
