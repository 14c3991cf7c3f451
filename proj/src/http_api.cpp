#include <thread>

#include <httplib.h>

#include "homellm/error.hpp"
#include "homellm/service.hpp"

namespace homellm {

namespace {

int status_for(Errc code) {
    switch (code) {
    case Errc::EmptyCommand:
    case Errc::InvalidArgument:
    case Errc::SyntaxError: return 400;
    case Errc::NotFound: return 404;
    case Errc::NotPending: return 409;
    case Errc::BackendError: return 502;
    default: return 500;
    }
}

void send_json(httplib::Response& res, const Json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(2), "application/json");
}

void send_error(httplib::Response& res, const Error& e, Json extra = Json::object()) {
    extra["error"] = to_string(e.code());
    extra["message"] = e.what();
    send_json(res, extra, status_for(e.code()));
}

std::size_t query_number(const httplib::Request& req, const char* key, std::size_t fallback) {
    if (!req.has_param(key)) return fallback;
    try {
        return static_cast<std::size_t>(std::stoull(req.get_param_value(key)));
    } catch (const std::exception&) {
        throw Error(Errc::InvalidArgument, std::string("query parameter ") + key + " must be a number");
    }
}

} // namespace

struct HttpApi::Impl {
    ControllerService& service;
    httplib::Server server;
    std::thread thread;

    explicit Impl(ControllerService& s) : service(s) {}
};

HttpApi::HttpApi(ControllerService& service, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>(service)) {
    auto& srv = impl_->server;
    auto& svc = impl_->service;

    srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
    srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const Error& e) {
            send_error(res, e);
        } catch (const std::exception& e) {
            send_json(res, Json{{"error", "Internal"}, {"message", e.what()}}, 500);
        }
    });

    srv.Get("/state", [&svc](const httplib::Request&, httplib::Response& res) {
        send_json(res, context_to_json(svc.get_state()));
    });

    srv.Post("/command", [&svc](const httplib::Request& req, httplib::Response& res) {
        const Json body = Json::parse(req.body, nullptr, false);
        if (!body.is_object() || !body.contains("text") || !body["text"].is_string())
            throw Error(Errc::InvalidArgument, "body must be {\"text\": \"...\"}");
        const auto text = body["text"].get<std::string>();
        try {
            send_json(res, to_json(svc.handle_command(text)));
        } catch (const Error& e) {
            if (e.code() != Errc::BackendError) throw;
            Json extra = Json::object();
            // The message carries the failed proposal's id: "BackendError: p-000123: ...".
            const std::string msg = e.what();
            const auto at = msg.find("p-");
            if (at != std::string::npos) {
                if (auto p = svc.get_proposal(msg.substr(at, msg.find(':', at) - at))) extra["proposal"] = to_json(*p);
            }
            send_error(res, e, std::move(extra));
        }
    });

    srv.Get("/proposals", [&svc](const httplib::Request& req, httplib::Response& res) {
        Json list = Json::array();
        for (const auto& p : svc.get_history(query_number(req, "limit", 20))) list.push_back(to_json(p));
        send_json(res, Json{{"proposals", list}});
    });

    srv.Get(R"(/proposals/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
        auto p = svc.get_proposal(req.matches[1].str());
        if (!p) throw Error(Errc::NotFound, "no proposal " + req.matches[1].str());
        send_json(res, to_json(*p));
    });

    srv.Post(R"(/proposals/([^/]+)/approve)", [&svc](const httplib::Request& req, httplib::Response& res) {
        send_json(res, to_json(svc.resolve_proposal(req.matches[1].str(), Decision::approve)));
    });

    srv.Post(R"(/proposals/([^/]+)/reject)", [&svc](const httplib::Request& req, httplib::Response& res) {
        send_json(res, to_json(svc.resolve_proposal(req.matches[1].str(), Decision::reject)));
    });

    srv.Get("/events", [&svc](const httplib::Request& req, httplib::Response& res) {
        Json list = Json::array();
        for (const auto& e : svc.events_since(query_number(req, "since", 0))) list.push_back(to_json(e));
        send_json(res, Json{{"events", list}});
    });

    if (static_dir && !srv.set_mount_point("/", static_dir->string()))
        throw Error(Errc::IoError, "static_dir " + static_dir->string() + " is not a directory");
}

HttpApi::~HttpApi() { stop(); }

int HttpApi::start(const std::string& host, int port) {
    auto& srv = impl_->server;
    const int bound = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
    if (bound <= 0) throw Error(Errc::TransportError, "cannot listen on " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([&srv] { srv.listen_after_bind(); });
    srv.wait_until_ready();
    return bound;
}

void HttpApi::run(const std::string& host, int port) {
    if (!impl_->server.listen(host, port))
        throw Error(Errc::TransportError, "cannot listen on " + host + ":" + std::to_string(port));
}

void HttpApi::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

} // namespace homellm
