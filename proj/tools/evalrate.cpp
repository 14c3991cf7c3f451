// evalrate: exports a review file for a rater, or imports the rater's
// filled-in labels into DIR/records.jsonl.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "homellm/eval.hpp"

using namespace homellm;

int main(int argc, char** argv) {
    CLI::App app{"Collect rater labels"};
    std::filesystem::path in_dir;
    std::string rater;
    bool do_export = false;
    std::filesystem::path labels_file;
    app.add_option("--in", in_dir, "directory written by evalrun")->required();
    app.add_option("--rater", rater, "rater id")->required();
    app.add_flag("--export", do_export, "write DIR/review-<rater>.jsonl with empty label slots");
    app.add_option("--labels", labels_file, "filled review file (default DIR/review-<rater>.jsonl)");
    CLI11_PARSE(app, argc, argv);

    try {
        const auto records_file = in_dir / "records.jsonl";
        auto records = eval::load_records(records_file);
        const auto review = labels_file.empty() ? in_dir / ("review-" + rater + ".jsonl") : labels_file;
        if (do_export) {
            eval::write_review_file(review, records);
            std::cout << "review file for " << records.size() << " records: " << review.string() << '\n';
            return 0;
        }
        const auto labels = eval::read_review_labels(review, records);
        eval::rate_trials(records, rater, labels);
        eval::save_records(records_file, records);
        std::cout << "recorded " << labels.size() << " labels from rater " << rater << '\n';
    } catch (const std::exception& e) {
        std::cerr << "evalrate: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
