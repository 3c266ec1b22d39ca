#include "lobexec/serialization.hpp"

#include "lobexec/error.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace lobexec {

using nlohmann::json;

namespace {

json binning_json(const Binning& b) {
    json cuts = json::array();
    for (const auto& c : b.cuts) cuts.push_back(c);
    return json{{"features", b.names}, {"bin_counts", b.bin_counts()}, {"cuts", cuts}};
}

Binning binning_of(const json& j) {
    Binning b;
    b.names = j.at("features").get<std::vector<std::string>>();
    b.cuts = j.at("cuts").get<std::vector<std::vector<double>>>();
    if (b.names.size() != b.cuts.size()) throw Error("parse", "binning: feature and cut lists differ in length");
    return b;
}

std::vector<int> parse_bins(const std::string& text) {
    std::vector<int> out;
    std::istringstream in(text);
    std::string part;
    while (std::getline(in, part, '-')) out.push_back(std::stoi(part));
    return out;
}

}  // namespace

std::string table_to_json(const TableDocument& doc) {
    const auto& q = doc.table;
    const auto counts = q.bin_counts();
    json entries = json::array();
    for (std::size_t c = 0; c < q.cell_count(); ++c) {
        const auto bins = format_bins(DiscretizedState{unflatten_cell(c, counts), false});
        for (auto a : kActions) {
            entries.push_back({{"state_bins", bins},
                               {"action", std::string(action_name(a))},
                               {"q", q.q_cell(c, a)},
                               {"visits", q.visits_cell(c, a)}});
        }
    }
    const auto& l = doc.learn;
    const json out{{"binning", binning_json(doc.binning)},
                   {"learning",
                    {{"beta", l.beta},
                     {"gamma", l.gamma},
                     {"alpha_c", l.alpha_c},
                     {"alpha_offset", l.alpha_offset},
                     {"trace_decay", l.trace_decay},
                     {"episodes", l.episodes},
                     {"seed", l.seed}}},
                   {"entries", entries}};
    return out.dump(2) + "\n";
}

TableDocument table_from_json(std::string_view text) {
    try {
        const auto j = json::parse(text);
        TableDocument doc;
        doc.binning = binning_of(j.at("binning"));
        if (j.contains("learning")) {
            const auto& l = j.at("learning");
            doc.learn.beta = l.value("beta", doc.learn.beta);
            doc.learn.gamma = l.value("gamma", doc.learn.gamma);
            doc.learn.alpha_c = l.value("alpha_c", doc.learn.alpha_c);
            doc.learn.alpha_offset = l.value("alpha_offset", doc.learn.alpha_offset);
            doc.learn.trace_decay = l.value("trace_decay", doc.learn.trace_decay);
            doc.learn.episodes = l.value("episodes", doc.learn.episodes);
            doc.learn.seed = l.value("seed", doc.learn.seed);
        }
        const auto counts = doc.binning.bin_counts();
        doc.table = QTable(counts);
        for (const auto& e : j.at("entries")) {
            const auto bins = parse_bins(e.at("state_bins").get<std::string>());
            if (bins.size() != counts.size()) throw Error("parse", "table entry has the wrong number of bins");
            const auto cell = flatten_cell(bins, counts);
            const auto a = parse_action(e.at("action").get<std::string>());
            doc.table.set_q_cell(cell, a, e.at("q").get<double>());
            doc.table.set_visits_cell(cell, a, e.at("visits").get<std::uint64_t>());
        }
        return doc;
    } catch (const json::exception& e) {
        throw Error("parse", std::string("table json: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw Error("parse", "table json: malformed state bins");
    } catch (const std::out_of_range&) {
        throw Error("parse", "table json: state bins out of range");
    }
}

std::string binning_to_json(const Binning& b) { return binning_json(b).dump(2) + "\n"; }

Binning binning_from_json(std::string_view text) {
    try {
        return binning_of(json::parse(text));
    } catch (const json::exception& e) {
        throw Error("parse", std::string("binning json: ") + e.what());
    }
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io", "cannot write " + path.string());
    out << text;
    if (!out) throw Error("io", "write failed for " + path.string());
}

}  // namespace lobexec
