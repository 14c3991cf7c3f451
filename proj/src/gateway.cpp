#include "homellm/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>

#include <httplib.h>

#include "homellm/error.hpp"

namespace homellm {

std::string_view to_string(BackendKind kind) noexcept { return kind == BackendKind::remote ? "remote" : "mock"; }

void BackendConfig::validate() const {
    if (!(timeout_seconds > 0)) throw Error(Errc::InvalidArgument, "backend timeout must be > 0");
    if (max_response_length == 0) throw Error(Errc::InvalidArgument, "max_response_length must be > 0");
    if (kind == BackendKind::remote) {
        if (endpoint.empty()) throw Error(Errc::InvalidArgument, "remote backend needs an endpoint");
        if (credential_env_var.empty()) throw Error(Errc::InvalidArgument, "remote backend needs credential_env_var");
        if (max_tokens <= 0) throw Error(Errc::InvalidArgument, "max_tokens must be > 0");
    }
}

BackendConfig backend_config_from_json(const Json& doc) {
    BackendConfig cfg;
    try {
        const auto kind = doc.value("kind", std::string("mock"));
        if (kind == "remote") cfg.kind = BackendKind::remote;
        else if (kind == "mock") cfg.kind = BackendKind::mock;
        else throw Error(Errc::InvalidArgument, "unknown backend kind '" + kind + "'");
        if (doc.contains("credential")) throw Error(Errc::InvalidArgument, "credentials belong in the environment, not the config");
        cfg.endpoint = doc.value("endpoint", cfg.endpoint);
        cfg.model_name = doc.value("model_name", cfg.model_name);
        cfg.credential_env_var = doc.value("credential_env_var", cfg.credential_env_var);
        cfg.credential_header = doc.value("credential_header", cfg.credential_header);
        cfg.credential_prefix = doc.value("credential_prefix", cfg.credential_prefix);
        const auto style = doc.value("api_style", std::string("completions"));
        if (style == "chat") cfg.api_style = ApiStyle::chat;
        else if (style == "completions") cfg.api_style = ApiStyle::completions;
        else throw Error(Errc::InvalidArgument, "unknown api_style '" + style + "'");
        cfg.timeout_seconds = doc.value("timeout", cfg.timeout_seconds);
        cfg.max_response_length = doc.value("max_response_length", cfg.max_response_length);
        cfg.max_tokens = doc.value("max_tokens", cfg.max_tokens);
        cfg.stop = doc.value("stop", cfg.stop);
        cfg.retry_on_transport_error = doc.value("retry_on_transport_error", false);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidArgument, std::string("backend config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

Json to_json(const BackendConfig& cfg) {
    Json doc = Json::object();
    doc["kind"] = to_string(cfg.kind);
    doc["endpoint"] = cfg.endpoint;
    doc["model_name"] = cfg.model_name;
    doc["credential_env_var"] = cfg.credential_env_var;
    doc["credential_header"] = cfg.credential_header;
    doc["credential_prefix"] = cfg.credential_prefix;
    doc["api_style"] = cfg.api_style == ApiStyle::chat ? "chat" : "completions";
    doc["timeout"] = cfg.timeout_seconds;
    doc["max_response_length"] = cfg.max_response_length;
    doc["max_tokens"] = cfg.max_tokens;
    doc["stop"] = cfg.stop;
    doc["retry_on_transport_error"] = cfg.retry_on_transport_error;
    return doc;
}

// ---------------------------------------------------------------------------
// Mock rule table
// ---------------------------------------------------------------------------

namespace {

std::string lowercase(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

void set_if_present(Device& d, std::string_view prop, PropertyValue value) {
    if (auto* v = d.properties.find(prop)) *v = std::move(value);
}

bool is_media(std::string_view type) { return type == "tvs" || type == "speakers" || type == "plugs"; }
bool is_audio(std::string_view type) { return type == "speakers" || type == "plugs"; }

template <class Fn>
void for_each_device(HomeContext& ctx, Fn&& fn) {
    for (auto& [room_name, room] : ctx.rooms)
        for (auto& [type, devices] : room.devices)
            for (auto& [name, device] : devices) fn(room_name, type, device);
}

void all_lights_on(HomeContext& ctx) {
    for_each_device(ctx, [](const std::string&, const std::string& type, Device& d) {
        if (type == "lights") set_if_present(d, "state", Switch::on);
    });
}

void audio_on(HomeContext& ctx) {
    for_each_device(ctx, [](const std::string&, const std::string& type, Device& d) {
        if (is_audio(type)) set_if_present(d, "state", Switch::on);
    });
}

/// Returns false when no rule matched (the input is echoed unchanged).
bool apply_rules(HomeContext& ctx, const std::string& command) {
    const auto said = [&](std::string_view needle) { return command.find(needle) != std::string::npos; };
    const std::string here = ctx.user.location;

    if (said("turn on the light")) {
        for_each_device(ctx, [&](const std::string& room, const std::string& type, Device& d) {
            if (type == "lights" && room == here) set_if_present(d, "state", Switch::on);
        });
    } else if (said("party")) {
        for_each_device(ctx, [](const std::string&, const std::string& type, Device& d) {
            if (type == "lights") {
                set_if_present(d, "state", Switch::on);
                set_if_present(d, "r", std::int64_t{255});
                set_if_present(d, "g", std::int64_t{0});
                set_if_present(d, "b", std::int64_t{255});
                set_if_present(d, "effect", std::string("colorloop"));
            } else if (is_audio(type)) {
                set_if_present(d, "state", Switch::on);
            }
        });
    } else if (said("sleep")) {
        for_each_device(ctx, [](const std::string& room, const std::string& type, Device& d) {
            const bool bedside = type == "lights" && (room == "bedroom" || d.name.find("bedside") != std::string::npos);
            set_if_present(d, "state", bedside ? Switch::on : Switch::off);
        });
    } else if (said("leaving")) {
        for_each_device(ctx, [](const std::string&, const std::string&, Device& d) {
            set_if_present(d, "state", Switch::off);
        });
    } else if (said("work")) {
        for_each_device(ctx, [&](const std::string& room, const std::string& type, Device& d) {
            if (type == "lights" && room == here) set_if_present(d, "state", Switch::on);
            else if (is_media(type)) set_if_present(d, "state", Switch::off);
        });
    } else if (said("bright")) {
        for_each_device(ctx, [](const std::string&, const std::string& type, Device& d) {
            if (type != "lights") return;
            set_if_present(d, "state", Switch::on);
            set_if_present(d, "bri", std::int64_t{254});
            for (const char* c : {"r", "g", "b"}) set_if_present(d, c, std::int64_t{255});
        });
    } else if (said("groovy")) {
        all_lights_on(ctx);
        for_each_device(ctx, [](const std::string&, const std::string& type, Device& d) {
            if (type == "lights") set_if_present(d, "effect", std::string("colorloop"));
            if (is_audio(type)) {
                set_if_present(d, "state", Switch::on);
                // Reproduces the observed model failure: an invented field.
                d.properties.insert_or_assign("genre", std::string("groovy"));
            }
        });
    } else if (said("relax")) {
        all_lights_on(ctx);
        audio_on(ctx);
        for_each_device(ctx, [](const std::string&, const std::string& type, Device& d) {
            if (type != "lights") return;
            set_if_present(d, "bri", std::int64_t{80});
            set_if_present(d, "effect", std::string("none"));
        });
    } else if (said("cold")) {
        all_lights_on(ctx);
        audio_on(ctx);
        for_each_device(ctx, [](const std::string&, const std::string& type, Device& d) {
            if (type != "lights") return;
            set_if_present(d, "bri", std::int64_t{200});
            set_if_present(d, "effect", std::string("none"));
            set_if_present(d, "r", std::int64_t{255});
            set_if_present(d, "g", std::int64_t{170});
            set_if_present(d, "b", std::int64_t{80});
        });
    } else if (said("home")) {
        all_lights_on(ctx);
        audio_on(ctx);
    } else {
        return false;
    }
    return true;
}

} // namespace

std::string mock_rules(std::string_view assembled) {
    PromptParts parts = split_prompt(assembled);
    HomeContext ctx;
    try {
        Json doc = Json::object();
        doc["user"] = Json::parse(parts.user_json).at("user");
        doc["devices"] = Json::parse(parts.devices_json).at("devices");
        ctx = context_from_json(doc);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::UnparseablePrompt, std::string("context segment: ") + e.what());
    } catch (const Error& e) {
        throw Error(Errc::UnparseablePrompt, e.what());
    }
    apply_rules(ctx, lowercase(parts.command));
    return serialize_devices(ctx);
}

std::string mock_rules(const Prompt& prompt) { return mock_rules(prompt.assembled); }

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

Gateway::Gateway(BackendConfig config) : config_(std::move(config)) {
    config_.validate();
    if (config_.kind == BackendKind::mock) generator_ = [](const Prompt& p) { return mock_rules(p); };
}

Gateway::Gateway(BackendConfig config, TextGenerator generator)
    : config_(std::move(config)), generator_(std::move(generator)) {
    config_.kind = BackendKind::mock;
    config_.validate();
}

Completion Gateway::complete(const Prompt& prompt) {
    struct InFlight {
        std::atomic<int>& n;
        explicit InFlight(std::atomic<int>& c) : n(c) { ++n; }
        ~InFlight() { --n; }
    } guard(in_flight_);

    const auto start = std::chrono::steady_clock::now();
    std::string text;
    if (config_.kind == BackendKind::mock) {
        text = generator_(prompt);
    } else {
        try {
            text = remote_complete(prompt);
        } catch (const Error& e) {
            if (e.code() != Errc::TransportError || !config_.retry_on_transport_error) throw;
            text = remote_complete(prompt);
        }
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

    if (text.size() > config_.max_response_length)
        throw Error(Errc::OversizeResponse, std::to_string(text.size()) + " characters exceeds limit of " +
                                                std::to_string(config_.max_response_length));
    return Completion{std::move(text), elapsed.count(), config_.kind};
}

namespace {

struct Url {
    std::string origin; // scheme://host[:port]
    std::string path;
};

Url split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(Errc::InvalidArgument, "endpoint must be an absolute URL");
    auto path_at = url.find('/', scheme_end + 3);
    if (path_at == std::string::npos) return {url, "/"};
    return {url.substr(0, path_at), url.substr(path_at)};
}

} // namespace

std::string Gateway::remote_complete(const Prompt& prompt) const {
    const char* secret = std::getenv(config_.credential_env_var.c_str());
    if (!secret || !*secret)
        throw Error(Errc::AuthError, "environment variable " + config_.credential_env_var + " is not set");

    const Url url = split_url(config_.endpoint);
    httplib::Client client(url.origin);
    const auto timeout = std::chrono::duration<double>(config_.timeout_seconds);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));

    Json body = Json::object();
    body["model"] = config_.model_name;
    if (config_.api_style == ApiStyle::chat) {
        body["messages"] = Json::array({Json{{"role", "user"}, {"content", prompt.assembled}}});
    } else {
        body["prompt"] = prompt.assembled;
    }
    body["max_tokens"] = config_.max_tokens;
    if (!config_.stop.empty()) body["stop"] = config_.stop;

    httplib::Headers headers{{config_.credential_header, config_.credential_prefix + secret}};
    const auto start = std::chrono::steady_clock::now();
    auto res = client.Post(url.path, headers, body.dump(), "application/json");
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

    if (!res) {
        const auto err = res.error();
        if (err == httplib::Error::ConnectionTimeout ||
            (err == httplib::Error::Read && elapsed.count() >= config_.timeout_seconds * 0.9))
            throw Error(Errc::Timeout, "no response within " + std::to_string(config_.timeout_seconds) + " s");
        throw Error(Errc::TransportError, httplib::to_string(err));
    }
    if (res->status == 401 || res->status == 403)
        throw Error(Errc::AuthError, "backend rejected credential (HTTP " + std::to_string(res->status) + ")");
    if (res->status < 200 || res->status >= 300)
        throw Error(Errc::TransportError, "backend returned HTTP " + std::to_string(res->status));
    if (res->body.size() > config_.max_response_length * 4 + 4096)
        throw Error(Errc::OversizeResponse, "response body of " + std::to_string(res->body.size()) + " bytes");

    try {
        const Json doc = Json::parse(res->body);
        const Json& choice = doc.at("choices").at(0);
        if (choice.contains("message")) return choice.at("message").at("content").get<std::string>();
        return choice.at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::TransportError, std::string("unexpected backend response: ") + e.what());
    }
}

Completion complete(const Prompt& prompt, const BackendConfig& config) {
    Gateway gateway(config);
    return gateway.complete(prompt);
}

} // namespace homellm
