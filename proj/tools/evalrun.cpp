// evalrun: runs the evaluation grid against a backend and writes one trial
// record per line to DIR/records.jsonl.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "homellm/error.hpp"
#include "homellm/eval.hpp"

using namespace homellm;

int main(int argc, char** argv) {
    CLI::App app{"Run evaluation trials"};
    std::string backend = "mock";
    int trials = 10;
    std::string cells = "all";
    std::filesystem::path out_dir;
    std::filesystem::path backend_config;
    app.add_option("--backend", backend, "mock or remote")->check(CLI::IsMember({"mock", "remote"}));
    app.add_option("--trials", trials, "trials per cell");
    app.add_option("--cells", cells, "all, or Context/Command[,Context/Command...]");
    app.add_option("--out", out_dir, "output directory")->required();
    app.add_option("--backend-config", backend_config, "JSON backend settings for the remote backend");
    CLI11_PARSE(app, argc, argv);

    try {
        BackendConfig cfg;
        if (!backend_config.empty()) {
            std::ifstream in(backend_config);
            if (!in) throw Error(Errc::IoError, "cannot read " + backend_config.string());
            cfg = backend_config_from_json(Json::parse(in));
        }
        cfg.kind = backend == "remote" ? BackendKind::remote : BackendKind::mock;
        Gateway gateway(cfg);

        const auto scenarios = eval::parse_cells(cells);
        std::filesystem::create_directories(out_dir);
        const auto records_file = out_dir / "records.jsonl";
        std::ofstream(records_file, std::ios::trunc);

        std::size_t failed = 0;
        const auto records = eval::run_matrix(scenarios, trials, gateway, [&](const eval::TrialRecord& r) {
            eval::append_record(records_file, r);
            if (r.error) ++failed;
            std::cerr << r.id << "  " << r.latency_seconds << " s"
                      << (r.error ? "  " + r.error->code : "") << '\n';
        });
        std::cout << "wrote " << records.size() << " records (" << failed << " with errors) to "
                  << records_file.string() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "evalrun: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
