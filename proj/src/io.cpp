#include "vaetpp/io.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vaetpp/errors.hpp"

namespace vaetpp {

using nlohmann::json;

namespace {

struct RawSequence {
    std::string id;
    std::optional<int> num_types;
    std::optional<double> horizon;
    std::vector<Event> events;
};

Dataset finalize(std::vector<RawSequence> raw, std::optional<int> declared_types = std::nullopt) {
    int num_types = declared_types.value_or(0);
    for (const auto& r : raw) {
        num_types = std::max(num_types, r.num_types.value_or(0));
        for (const auto& e : r.events) {
            num_types = std::max(num_types, e.type + 1);
        }
    }
    Dataset ds;
    ds.sequences.reserve(raw.size());
    for (auto& r : raw) {
        double horizon = r.horizon.value_or(0.0);
        if (!r.horizon) {
            for (const auto& e : r.events) {
                horizon = std::max(horizon, e.t);
            }
        }
        ds.sequences.emplace_back(std::move(r.id), std::max(num_types, 1), horizon, std::move(r.events));
    }
    return ds;
}

Event parse_event(const json& j, std::size_t line) {
    if (!j.is_object() || !j.contains("t") || !j.contains("type")) {
        throw ParseError(line, "event must be an object with fields 't' and 'type'");
    }
    if (!j["t"].is_number() || !j["type"].is_number_integer()) {
        throw ParseError(line, "event 't' must be a number and 'type' an integer");
    }
    Event e;
    e.t = j["t"].get<double>();
    e.type = j["type"].get<int>();
    if (e.t < 0.0) {
        throw ValidationError("line " + std::to_string(line) + ": negative timestamp " + std::to_string(e.t));
    }
    if (e.type < 0) {
        throw ValidationError("line " + std::to_string(line) + ": negative type id");
    }
    if (j.contains("mark") && !j["mark"].is_null()) {
        if (!j["mark"].is_number_integer()) {
            throw ParseError(line, "'mark' must be an integer");
        }
        e.mark = j["mark"].get<int>();
    }
    return e;
}

} // namespace

SequenceFormat format_for_path(const std::string& path) {
    const auto ext = std::filesystem::path(path).extension().string();
    return ext == ".csv" ? SequenceFormat::csv : SequenceFormat::jsonl;
}

Dataset parse_jsonl(std::istream& in) {
    std::vector<RawSequence> raw;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object() || !j.contains("events") || !j["events"].is_array()) {
            throw ParseError(lineno, "record must be an object with an 'events' array");
        }
        RawSequence r;
        r.id = j.contains("seq_id") ? j["seq_id"].get<std::string>() : "seq-" + std::to_string(raw.size());
        if (j.contains("U")) {
            if (!j["U"].is_number_integer() || j["U"].get<int>() <= 0) {
                throw ParseError(lineno, "'U' must be a positive integer");
            }
            r.num_types = j["U"].get<int>();
        }
        if (j.contains("T")) {
            if (!j["T"].is_number()) {
                throw ParseError(lineno, "'T' must be a number");
            }
            r.horizon = j["T"].get<double>();
        }
        for (const auto& ev : j["events"]) {
            r.events.push_back(parse_event(ev, lineno));
        }
        if (r.num_types) {
            for (const auto& e : r.events) {
                if (e.type >= *r.num_types) {
                    throw ValidationError("line " + std::to_string(lineno) + ": type id " +
                                          std::to_string(e.type) + " not below U=" + std::to_string(*r.num_types));
                }
            }
        }
        raw.push_back(std::move(r));
    }
    return finalize(std::move(raw));
}

Dataset parse_csv(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) {
        throw ParseError(1, "empty CSV file");
    }
    ++lineno;
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, ',')) {
            col.erase(std::remove_if(col.begin(), col.end(), [](char c) { return c == ' ' || c == '\r'; }),
                      col.end());
            header.push_back(col);
        }
    }
    auto column = [&](const std::string& name) -> int {
        auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : static_cast<int>(it - header.begin());
    };
    const int c_id = column("seq_id"), c_t = column("t"), c_type = column("type"), c_mark = column("mark");
    if (c_id < 0 || c_t < 0 || c_type < 0) {
        throw ParseError(1, "CSV header must contain seq_id,t,type");
    }

    std::vector<RawSequence> raw;
    std::map<std::string, std::size_t> index;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cells.push_back(cell);
        }
        if (cells.size() < header.size() - (c_mark >= 0 ? 1 : 0)) {
            throw ParseError(lineno, "expected " + std::to_string(header.size()) + " columns");
        }
        Event e;
        try {
            std::size_t used = 0;
            e.t = std::stod(cells[c_t], &used);
            e.type = std::stoi(cells[c_type]);
            if (c_mark >= 0 && c_mark < static_cast<int>(cells.size()) && !cells[c_mark].empty()) {
                e.mark = std::stoi(cells[c_mark]);
            }
        } catch (const std::logic_error&) {
            throw ParseError(lineno, "non-numeric t/type field");
        }
        if (e.t < 0.0) {
            throw ValidationError("line " + std::to_string(lineno) + ": negative timestamp " + std::to_string(e.t));
        }
        if (e.type < 0) {
            throw ValidationError("line " + std::to_string(lineno) + ": negative type id");
        }
        const std::string& id = cells[c_id];
        auto [it, inserted] = index.emplace(id, raw.size());
        if (inserted) {
            raw.push_back(RawSequence{id, std::nullopt, std::nullopt, {}});
        }
        raw[it->second].events.push_back(e);
    }
    return finalize(std::move(raw));
}

Dataset load_sequences(const std::string& path, SequenceFormat format) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open '" + path + "'");
    }
    if (format == SequenceFormat::jsonl) {
        return parse_jsonl(in);
    }
    Dataset ds = parse_csv(in);
    const std::string meta_path = path + ".meta.json";
    if (!std::filesystem::exists(meta_path)) {
        return ds;
    }
    std::ifstream meta_in(meta_path);
    json meta = json::parse(meta_in);
    int num_types = ds.num_types();
    if (meta.contains("U")) {
        num_types = std::max(num_types, meta["U"].get<int>());
    }
    std::vector<EventSequence> rebuilt;
    for (const auto& s : ds.sequences) {
        double horizon = s.horizon();
        if (meta.contains("T")) {
            if (meta["T"].is_number()) {
                horizon = meta["T"].get<double>();
            } else if (meta["T"].contains(s.id())) {
                horizon = meta["T"][s.id()].get<double>();
            }
        }
        rebuilt.emplace_back(s.id(), num_types, horizon, s.events());
    }
    ds.sequences = std::move(rebuilt);
    return ds;
}

Dataset load_sequences(const std::string& path) {
    return load_sequences(path, format_for_path(path));
}

void write_jsonl(const std::vector<EventSequence>& sequences, std::ostream& out) {
    for (const auto& s : sequences) {
        json events = json::array();
        for (const auto& e : s.events()) {
            json je = {{"t", e.t}, {"type", e.type}};
            if (e.mark) {
                je["mark"] = *e.mark;
            }
            events.push_back(std::move(je));
        }
        json rec = {{"seq_id", s.id()}, {"U", s.num_types()}, {"T", s.horizon()}, {"events", std::move(events)}};
        out << rec.dump() << '\n';
    }
}

void write_jsonl(const std::vector<EventSequence>& sequences, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write '" + path + "'");
    }
    write_jsonl(sequences, out);
}

void write_split_assignment(const Dataset& ds, const std::string& path) {
    json j = {{"train", json::array()}, {"val", json::array()}, {"test", json::array()}};
    for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
        j[to_string(ds.splits.at(i))].push_back(ds.sequences[i].id());
    }
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write '" + path + "'");
    }
    out << j.dump(2) << '\n';
}

Dataset apply_split_assignment(Dataset ds, const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open split file '" + path + "'");
    }
    std::map<std::string, Split> by_id;
    try {
        const json j = json::parse(in);
        for (const Split s : {Split::train, Split::val, Split::test}) {
            if (j.contains(to_string(s))) {
                for (const auto& id : j[to_string(s)]) {
                    by_id[id.get<std::string>()] = s;
                }
            }
        }
    } catch (const json::exception& e) {
        throw ValidationError("split file '" + path + "' is malformed: " + e.what());
    }
    ds.splits.clear();
    for (const auto& s : ds.sequences) {
        auto it = by_id.find(s.id());
        if (it == by_id.end()) {
            throw ValidationError("sequence '" + s.id() + "' missing from split file");
        }
        ds.splits.push_back(it->second);
    }
    return ds;
}

} // namespace vaetpp
