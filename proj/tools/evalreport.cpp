// evalreport: aggregates rated trial records into the results table.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "homellm/eval.hpp"

using namespace homellm;

int main(int argc, char** argv) {
    CLI::App app{"Summarize rated trials"};
    std::filesystem::path in_dir;
    std::string format = "table";
    app.add_option("--in", in_dir, "directory written by evalrun")->required();
    app.add_option("--format", format, "table or csv")->check(CLI::IsMember({"table", "csv"}));
    CLI11_PARSE(app, argc, argv);

    try {
        const auto records = eval::load_records(in_dir / "records.jsonl");
        const auto report = eval::aggregate(records);
        std::cout << (format == "csv" ? eval::format_csv(report) : eval::format_table(report));
    } catch (const std::exception& e) {
        std::cerr << "evalreport: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
