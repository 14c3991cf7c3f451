// homectl: runs the controller service, or talks to a running one.

#include <csignal>
#include <iostream>

#include <CLI11.hpp>
#include <httplib.h>

#include "homellm/error.hpp"
#include "homellm/service.hpp"

using namespace homellm;

namespace {

HttpApi* g_api = nullptr;

void on_signal(int) {
    if (g_api) g_api->stop();
}

int print_response(const httplib::Result& res, const std::string& url) {
    if (!res) {
        std::cerr << "homectl: cannot reach " << url << ": " << httplib::to_string(res.error()) << '\n';
        return 2;
    }
    std::cout << res->body << '\n';
    return res->status >= 200 && res->status < 300 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Language-model smart home controller"};
    app.require_subcommand(1);
    std::string url = "http://127.0.0.1:8080";

    auto* serve = app.add_subcommand("serve", "run the controller service");
    std::filesystem::path config_file;
    serve->add_option("--config", config_file, "service config file")->required();

    auto* cmd = app.add_subcommand("cmd", "send a natural-language command");
    std::string text;
    cmd->add_option("text", text, "command text")->required();

    auto* state = app.add_subcommand("state", "print the current home state");
    auto* proposals = app.add_subcommand("proposals", "list recent proposals");
    std::size_t limit = 20;
    proposals->add_option("--limit", limit);

    auto* approve = app.add_subcommand("approve", "approve a pending proposal");
    auto* reject = app.add_subcommand("reject", "reject a pending proposal");
    std::string id;
    approve->add_option("id", id)->required();
    reject->add_option("id", id)->required();

    for (auto* sub : {cmd, state, proposals, approve, reject}) sub->add_option("--url", url, "service base URL");
    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve) {
            const auto config = load_service_config(config_file);
            auto service = ControllerService::from_config(config);
            HttpApi api(*service, config.static_dir);
            g_api = &api;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "homectl: serving on http://" << config.listen << " (" << to_string(config.mode)
                      << " mode, " << to_string(config.backend.kind) << " backend)\n";
            api.run(config.listen_host(), config.listen_port());
            g_api = nullptr;
            return 0;
        }

        httplib::Client client(url);
        client.set_read_timeout(std::chrono::seconds(120));
        if (*cmd) return print_response(client.Post("/command", Json{{"text", text}}.dump(), "application/json"), url);
        if (*state) return print_response(client.Get("/state"), url);
        if (*proposals) return print_response(client.Get("/proposals?limit=" + std::to_string(limit)), url);
        if (*approve) return print_response(client.Post("/proposals/" + id + "/approve"), url);
        if (*reject) return print_response(client.Post("/proposals/" + id + "/reject"), url);
    } catch (const std::exception& e) {
        std::cerr << "homectl: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
