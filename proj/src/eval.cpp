#include "homellm/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "homellm/error.hpp"

namespace homellm::eval {

namespace {

constexpr ContextName kContexts[] = {ContextName::Simple, ContextName::Medium, ContextName::Complex};
constexpr CommandName kCommands[] = {CommandName::Direct, CommandName::Indirect, CommandName::Ambiguous,
                                     CommandName::AmbiguousWork, CommandName::AmbiguousSleep};

bool is_amended(CommandName c) { return c == CommandName::AmbiguousWork || c == CommandName::AmbiguousSleep; }

} // namespace

std::string_view to_string(ContextName name) noexcept {
    switch (name) {
    case ContextName::Simple: return "Simple";
    case ContextName::Medium: return "Medium";
    case ContextName::Complex: return "Complex";
    }
    return "?";
}

std::string_view to_string(CommandName name) noexcept {
    switch (name) {
    case CommandName::Direct: return "Direct";
    case CommandName::Indirect: return "Indirect";
    case CommandName::Ambiguous: return "Ambiguous";
    case CommandName::AmbiguousWork: return "AmbiguousWork";
    case CommandName::AmbiguousSleep: return "AmbiguousSleep";
    }
    return "?";
}

std::string_view command_label(CommandName name) noexcept {
    switch (name) {
    case CommandName::AmbiguousWork: return "Ambiguous*";
    case CommandName::AmbiguousSleep: return "Ambiguous**";
    default: return to_string(name);
    }
}

std::string_view command_text(CommandName name) noexcept {
    switch (name) {
    case CommandName::Direct: return "Turn on the light.";
    case CommandName::Indirect: return "Get ready for a party.";
    case CommandName::Ambiguous: return "I am tired.";
    case CommandName::AmbiguousWork: return "I am tired and I need to work.";
    case CommandName::AmbiguousSleep: return "I am tired and I want to sleep.";
    }
    return "";
}

ContextName parse_context_name(std::string_view text) {
    for (auto c : kContexts)
        if (to_string(c) == text) return c;
    throw Error(Errc::UnknownFixture, "unknown context '" + std::string(text) + "'");
}

CommandName parse_command_name(std::string_view text) {
    for (auto c : kCommands)
        if (to_string(c) == text || command_label(c) == text) return c;
    throw Error(Errc::UnknownFixture, "unknown command '" + std::string(text) + "'");
}

std::string Scenario::cell_id() const {
    return std::string(to_string(context_name)) + "/" + std::string(to_string(command_name));
}

HomeContext fixture_context(ContextName name) {
    const bool colors = name != ContextName::Simple;
    auto light = [&](const std::string& device) {
        Device d{device, "lights", {}};
        d.properties.insert("state", Switch::off);
        if (colors) {
            for (const char* channel : {"r", "g", "b"}) d.properties.insert(channel, std::int64_t{255});
        }
        return d;
    };
    auto media = [](const std::string& device, const std::string& type) {
        Device d{device, type, {}};
        d.properties.insert("state", Switch::off);
        d.properties.insert("volume", std::int64_t{20});
        return d;
    };

    HomeContext ctx;
    ctx.user.location = "living_room";

    Room bedroom{"bedroom", {}};
    NamedMap<Device> bedroom_lights;
    bedroom_lights.insert("bedside_lamp", light("bedside_lamp"));
    bedroom.devices.insert("lights", std::move(bedroom_lights));

    Room living{"living_room", {}};
    NamedMap<Device> living_lights;
    living_lights.insert("overhead", light("overhead"));
    living_lights.insert("lamp", light("lamp"));
    living.devices.insert("lights", std::move(living_lights));

    if (name == ContextName::Complex) {
        bedroom.devices.insert("tvs", NamedMap<Device>{{"bedroom_tv", media("bedroom_tv", "tvs")}});
        living.devices.insert("tvs", NamedMap<Device>{{"living_room_tv", media("living_room_tv", "tvs")}});
        living.devices.insert("speakers", NamedMap<Device>{{"speaker", media("speaker", "speakers")}});
    }
    ctx.rooms.insert("bedroom", std::move(bedroom));
    ctx.rooms.insert("living_room", std::move(living));
    return ctx;
}

SchemaRegistry fixture_registry(ContextName name) {
    switch (name) {
    case ContextName::Simple: return builtin_registry("simple");
    case ContextName::Medium: return builtin_registry("medium");
    case ContextName::Complex: return builtin_registry("complex");
    }
    throw Error(Errc::UnknownFixture, "unknown context");
}

Scenario build_fixture(ContextName context, CommandName command) {
    Scenario s;
    s.context_name = context;
    s.command_name = command;
    s.context = fixture_context(context);
    s.command = Command{std::string(command_text(command)), std::chrono::system_clock::time_point{}};
    return s;
}

Scenario build_fixture(std::string_view context, std::string_view command) {
    return build_fixture(parse_context_name(context), parse_command_name(command));
}

std::vector<Scenario> default_cells() {
    std::vector<Scenario> cells;
    for (auto ctx : kContexts)
        for (auto cmd : {CommandName::Direct, CommandName::Indirect, CommandName::Ambiguous})
            cells.push_back(build_fixture(ctx, cmd));
    cells.push_back(build_fixture(ContextName::Complex, CommandName::AmbiguousWork));
    cells.push_back(build_fixture(ContextName::Complex, CommandName::AmbiguousSleep));
    return cells;
}

std::vector<Scenario> parse_cells(std::string_view spec) {
    if (spec == "all") return default_cells();
    std::vector<Scenario> cells;
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        auto comma = spec.find(',', pos);
        if (comma == std::string_view::npos) comma = spec.size();
        const auto item = spec.substr(pos, comma - pos);
        const auto sep = item.find_first_of("/:");
        if (sep == std::string_view::npos)
            throw Error(Errc::UnknownFixture, "cell must be Context/Command: '" + std::string(item) + "'");
        cells.push_back(build_fixture(item.substr(0, sep), item.substr(sep + 1)));
        pos = comma + 1;
    }
    return cells;
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

Json to_json(const TrialRecord& r) {
    Json doc = Json::object();
    doc["id"] = r.id;
    doc["context"] = to_string(r.context_name);
    doc["command"] = to_string(r.command_name);
    doc["command_text"] = command_text(r.command_name);
    doc["trial"] = r.trial_index;
    doc["raw_response"] = r.raw_response;
    doc["latency"] = r.latency_seconds;
    doc["shape"] = r.shape;
    doc["changeset"] = r.changeset ? homellm::to_json(*r.changeset) : Json();
    doc["error"] = r.error ? Json{{"code", r.error->code}, {"message", r.error->message}} : Json();
    Json labels = Json::array();
    for (const auto& l : r.labels) labels.push_back(Json{{"rater", l.rater}, {"label", l.label}});
    doc["labels"] = std::move(labels);
    return doc;
}

TrialRecord trial_from_json(const Json& doc) {
    try {
        TrialRecord r;
        r.id = doc.at("id").get<std::string>();
        r.context_name = parse_context_name(doc.at("context").get<std::string>());
        r.command_name = parse_command_name(doc.at("command").get<std::string>());
        r.trial_index = doc.at("trial").get<int>();
        r.raw_response = doc.at("raw_response").get<std::string>();
        r.latency_seconds = doc.at("latency").get<double>();
        r.shape = doc.value("shape", std::string());
        if (!doc.at("changeset").is_null()) r.changeset = changeset_from_json(doc.at("changeset"));
        if (!doc.at("error").is_null())
            r.error = TrialError{doc.at("error").at("code").get<std::string>(),
                                 doc.at("error").at("message").get<std::string>()};
        for (const auto& l : doc.at("labels"))
            r.labels.push_back({l.at("rater").get<std::string>(), l.at("label").get<int>()});
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::StructureError, std::string("trial record: ") + e.what());
    }
}

std::vector<TrialRecord> run_matrix(std::span<const Scenario> cells, int trials, Gateway& gateway,
                                    const RecordSink& sink) {
    if (trials < 1) throw Error(Errc::InvalidArgument, "trials must be >= 1");
    std::vector<TrialRecord> records;
    for (const auto& cell : cells) {
        const SchemaRegistry registry = fixture_registry(cell.context_name);
        const Prompt prompt = build_prompt(cell.context, cell.command);
        for (int t = 1; t <= trials; ++t) {
            TrialRecord r;
            char suffix[16];
            std::snprintf(suffix, sizeof suffix, "/%02d", t);
            r.id = cell.cell_id() + suffix;
            r.context_name = cell.context_name;
            r.command_name = cell.command_name;
            r.trial_index = t;

            const auto start = std::chrono::steady_clock::now();
            try {
                Completion completion = gateway.complete(prompt);
                r.raw_response = std::move(completion.text);
                r.latency_seconds = completion.latency_seconds;
            } catch (const Error& e) {
                r.latency_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                r.error = TrialError{std::string(homellm::to_string(e.code())), e.what()};
            }
            if (!r.error) {
                try {
                    auto processed = process_completion(r.raw_response, cell.context, registry);
                    r.shape = homellm::to_string(processed.shape);
                    r.changeset = std::move(processed.changeset);
                } catch (const Error& e) {
                    r.error = TrialError{std::string(homellm::to_string(e.code())), e.what()};
                }
            }
            if (sink) sink(r);
            records.push_back(std::move(r));
        }
    }
    return records;
}

void rate_trials(std::vector<TrialRecord>& records, const std::string& rater, std::span<const double> labels) {
    if (labels.size() != records.size())
        throw Error(Errc::InvalidArgument, "expected " + std::to_string(records.size()) + " labels, got " +
                                               std::to_string(labels.size()));
    for (double l : labels)
        if (!(l == 0.0 || l == 1.0))
            throw Error(Errc::LabelOutOfDomain, "label " + std::to_string(l) + " is not 0 (Poor) or 1 (Good)");
    for (const auto& r : records)
        for (const auto& existing : r.labels)
            if (existing.rater == rater)
                throw Error(Errc::DuplicateRater, "rater '" + rater + "' already labeled " + r.id);
    for (std::size_t i = 0; i < records.size(); ++i)
        records[i].labels.push_back({rater, labels[i] == 1.0 ? 1 : 0});
}

ScenarioReport aggregate(std::span<const TrialRecord> records) {
    struct Acc {
        double label_sum = 0;
        std::size_t label_count = 0;
        double latency_sum = 0;
        std::size_t trials = 0;
        std::set<std::string> raters;
    };
    std::map<std::pair<ContextName, CommandName>, Acc> cells;
    for (const auto& r : records) {
        if (r.labels.empty()) throw Error(Errc::UnratedTrials, r.id + " has no rater labels");
        auto& acc = cells[{r.context_name, r.command_name}];
        for (const auto& l : r.labels) {
            acc.label_sum += l.label;
            ++acc.label_count;
            acc.raters.insert(l.rater);
        }
        acc.latency_sum += r.latency_seconds;
        ++acc.trials;
    }

    ScenarioReport report;
    auto emit = [&](bool amended) {
        for (const auto& [key, acc] : cells) {
            if (is_amended(key.second) != amended) continue;
            report.rows.push_back({key.first, key.second, acc.label_sum / static_cast<double>(acc.label_count),
                                   acc.latency_sum / static_cast<double>(acc.trials), acc.trials, acc.raters.size(),
                                   acc.label_count});
        }
    };
    emit(false);
    emit(true);
    return report;
}

namespace {

std::string two_decimals(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

} // namespace

std::string format_table(const ScenarioReport& report) {
    const std::vector<std::string> header{"Context", "Command", "Avg. Quality", "Avg Latency (sec)"};
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : report.rows)
        rows.push_back({std::string(to_string(r.context_name)), std::string(command_label(r.command_name)),
                        two_decimals(r.avg_quality), two_decimals(r.avg_latency)});

    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        width[c] = header[c].size();
        for (const auto& row : rows) width[c] = std::max(width[c], row[c].size());
    }
    auto line = [&](const std::vector<std::string>& cells) {
        std::string out = "|";
        for (std::size_t c = 0; c < cells.size(); ++c)
            out += " " + cells[c] + std::string(width[c] - cells[c].size(), ' ') + " |";
        return out + "\n";
    };
    std::string out = line(header);
    out += "|";
    for (auto w : width) out += std::string(w + 2, '-') + "|";
    out += "\n";
    for (const auto& row : rows) out += line(row);
    return out;
}

std::string format_csv(const ScenarioReport& report) {
    std::string out = "Context,Command,Avg. Quality,Avg Latency (sec)\n";
    for (const auto& r : report.rows)
        out += std::string(to_string(r.context_name)) + "," + std::string(command_label(r.command_name)) + "," +
               two_decimals(r.avg_quality) + "," + two_decimals(r.avg_latency) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

namespace {

std::vector<Json> read_lines(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(Errc::IoError, "cannot read " + file.string());
    std::vector<Json> docs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            docs.push_back(Json::parse(line));
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(Errc::SyntaxError, file.string() + ": " + e.what());
        }
    }
    return docs;
}

} // namespace

std::vector<TrialRecord> load_records(const std::filesystem::path& file) {
    std::vector<TrialRecord> records;
    for (const auto& doc : read_lines(file)) records.push_back(trial_from_json(doc));
    return records;
}

void save_records(const std::filesystem::path& file, std::span<const TrialRecord> records) {
    const auto tmp = std::filesystem::path(file.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw Error(Errc::IoError, "cannot write " + tmp.string());
        for (const auto& r : records) out << to_json(r).dump() << '\n';
        if (!out.flush()) throw Error(Errc::IoError, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, file);
}

void append_record(const std::filesystem::path& file, const TrialRecord& record) {
    std::ofstream out(file, std::ios::app);
    if (!out) throw Error(Errc::IoError, "cannot append to " + file.string());
    out << to_json(record).dump() << '\n';
    out.flush();
}

void write_review_file(const std::filesystem::path& file, std::span<const TrialRecord> records) {
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot write " + file.string());
    for (const auto& r : records) {
        Json doc = Json::object();
        doc["id"] = r.id;
        doc["command"] = command_text(r.command_name);
        doc["raw_response"] = r.raw_response;
        doc["proposed_changes"] = r.changeset ? homellm::to_json(*r.changeset) : Json();
        doc["error"] = r.error ? Json(r.error->code + ": " + r.error->message) : Json();
        doc["label"] = nullptr;
        out << doc.dump() << '\n';
    }
}

std::vector<double> read_review_labels(const std::filesystem::path& file, std::span<const TrialRecord> records) {
    std::map<std::string, double> by_id;
    for (const auto& doc : read_lines(file)) {
        const auto id = doc.at("id").get<std::string>();
        const Json& label = doc.at("label");
        if (label.is_null()) throw Error(Errc::InvalidArgument, "record " + id + " has no label yet");
        if (!label.is_number()) throw Error(Errc::LabelOutOfDomain, "record " + id + ": label is not a number");
        by_id[id] = label.get<double>();
    }
    std::vector<double> labels;
    for (const auto& r : records) {
        auto it = by_id.find(r.id);
        if (it == by_id.end()) throw Error(Errc::InvalidArgument, "review file has no label for " + r.id);
        labels.push_back(it->second);
    }
    return labels;
}

} // namespace homellm::eval
