#include "etdp/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "etdp/errors.hpp"
#include "json.hpp"

namespace etdp {

namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
    const char* ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

double parse_double(const std::string& text, const std::string& where) {
    const std::string t = trim(text);
    double value = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
        throw input_error(where + ": cannot parse '" + t + "' as a number");
    return value;
}

long long parse_int(const std::string& text, const std::string& where) {
    const std::string t = trim(text);
    long long value = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
        throw input_error(where + ": cannot parse '" + t + "' as an integer");
    return value;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open '" + path + "' for reading");
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw input_error("cannot open '" + path + "' for writing");
    return out;
}

void check_matrix_header(const std::string& line, int& m_out) {
    const auto fields = split(line, ',');
    if (fields.empty() || trim(fields[0]) != "time")
        throw input_error("line 1: header must start with 'time'");
    if (fields.size() < 2)
        throw input_error("line 1: header needs at least one hypothesis column");
    for (std::size_t i = 1; i < fields.size(); ++i) {
        if (trim(fields[i]) != "h" + std::to_string(i))
            throw input_error("line 1: column " + std::to_string(i + 1) +
                              " must be named h" + std::to_string(i));
    }
    m_out = static_cast<int>(fields.size()) - 1;
}

json family_to_json(const EProcessFamily& family) {
    json j;
    j["kind"] = to_string(family.kind);
    j["delta"] = family.delta;
    j["delta_min"] = family.delta_min;
    j["quadrature_nodes"] = family.quadrature_nodes;
    j["prior_side"] = to_string(family.prior_side);
    return j;
}

EProcessFamily family_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw config_error(where + ": family must be an object");
    EProcessFamily family;
    bool kind_seen = false;
    for (const auto& [key, value] : j.items()) {
        if (key == "kind") {
            if (!value.is_string()) throw config_error(where + ": family.kind must be a string");
            family.kind = family_kind_from_string(value.get<std::string>());
            kind_seen = true;
        } else if (key == "delta") {
            if (!value.is_number()) throw config_error(where + ": family.delta must be a number");
            family.delta = value.get<double>();
        } else if (key == "delta_min") {
            if (!value.is_number())
                throw config_error(where + ": family.delta_min must be a number");
            family.delta_min = value.get<double>();
        } else if (key == "quadrature_nodes") {
            if (!value.is_number_integer())
                throw config_error(where + ": family.quadrature_nodes must be an integer");
            family.quadrature_nodes = value.get<int>();
        } else if (key == "prior_side") {
            if (!value.is_string())
                throw config_error(where + ": family.prior_side must be a string");
            family.prior_side = prior_side_from_string(value.get<std::string>());
        } else {
            throw config_error(where + ": unknown family key '" + key + "'");
        }
    }
    if (!kind_seen) throw config_error(where + ": family.kind is required");
    return family;
}

} // namespace

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

MatrixBlock read_matrix_block(std::istream& in, bool nonnegative_required) {
    std::string line;
    if (!std::getline(in, line)) throw input_error("line 1: missing header row");
    MatrixBlock block;
    check_matrix_header(line, block.m);

    int line_no = 1;
    bool first = true;
    int expected_time = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            // A blank line is only tolerated as trailing whitespace.
            if (in.peek() == std::char_traits<char>::eof()) break;
            throw input_error("line " + std::to_string(line_no) + ": blank row");
        }
        const std::string where = "line " + std::to_string(line_no);
        const auto fields = split(line, ',');
        if (static_cast<int>(fields.size()) != block.m + 1)
            throw input_error(where + ": expected " + std::to_string(block.m + 1) +
                              " fields, got " + std::to_string(fields.size()));
        const long long t = parse_int(fields[0], where);
        if (t < 0) throw input_error(where + ": negative time index");
        if (first) {
            block.first_time = static_cast<int>(t);
            expected_time = block.first_time;
            first = false;
        }
        if (t != expected_time)
            throw input_error(where + ": expected time " + std::to_string(expected_time) +
                              ", got " + std::to_string(t));
        ++expected_time;
        std::vector<double> row(block.m);
        for (int j = 0; j < block.m; ++j) {
            row[j] = parse_double(fields[j + 1], where);
            if (!std::isfinite(row[j]))
                throw input_error(where + ": non-finite value in column h" +
                                  std::to_string(j + 1));
            if (nonnegative_required && row[j] < 0.0)
                throw input_error(where + ": negative e-value in column h" +
                                  std::to_string(j + 1));
        }
        block.rows.push_back(std::move(row));
    }
    if (block.rows.empty()) throw input_error("no data rows after the header");
    return block;
}

MatrixBlock read_matrix_block_file(const std::string& path, bool nonnegative_required) {
    auto in = open_input(path);
    try {
        return read_matrix_block(in, nonnegative_required);
    } catch (const input_error& e) {
        throw input_error(path + ": " + e.what());
    }
}

EValueMatrix read_evalue_matrix(std::istream& in) {
    const MatrixBlock block = read_matrix_block(in, true);
    EValueMatrix matrix;
    matrix.m = block.m;
    if (block.first_time == 0) {
        for (int j = 0; j < block.m; ++j) {
            if (block.rows[0][j] != 1.0)
                throw input_error("time-0 row must be all ones (pre-data e-values)");
        }
        matrix.values = block.rows;
    } else if (block.first_time == 1) {
        matrix.values.reserve(block.rows.size() + 1);
        matrix.values.emplace_back(block.m, 1.0);
        matrix.values.insert(matrix.values.end(), block.rows.begin(), block.rows.end());
    } else {
        throw input_error("e-matrix must start at time 0 or 1, got time " +
                          std::to_string(block.first_time));
    }
    validate_evalue_matrix(matrix);
    return matrix;
}

EValueMatrix read_evalue_matrix_file(const std::string& path) {
    auto in = open_input(path);
    try {
        return read_evalue_matrix(in);
    } catch (const input_error& e) {
        throw input_error(path + ": " + e.what());
    }
}

void write_evalue_matrix(const EValueMatrix& matrix, std::ostream& out) {
    validate_evalue_matrix(matrix);
    out << "time";
    for (int j = 1; j <= matrix.m; ++j) out << ",h" << j;
    out << '\n';
    for (std::size_t t = 0; t < matrix.values.size(); ++t) {
        out << t;
        for (double v : matrix.values[t]) out << ',' << format_double(v);
        out << '\n';
    }
}

void write_evalue_matrix_file(const EValueMatrix& matrix, const std::string& path) {
    auto out = open_output(path);
    write_evalue_matrix(matrix, out);
}

void write_bound_header(std::ostream& out) {
    out << "time,set_label,c_inst,c_ard,tdp_inst,tdp_ard\n";
}

void write_bound_rows(const LabeledBoundSeries& series, int from_time, std::ostream& out) {
    if (series.empty()) throw input_error("no bound series to write");
    const int horizon = series.front().second.horizon();
    for (const auto& [label, s] : series) {
        if (s.horizon() != horizon)
            throw input_error("bound series horizons differ across sets");
    }
    if (from_time < 0 || from_time > horizon)
        throw input_error("bound output start time outside series range");
    for (int t = from_time; t <= horizon; ++t) {
        for (const auto& [label, s] : series) {
            out << t << ',' << label << ',' << s.c_inst[t] << ',' << s.c_ard[t] << ','
                << format_double(s.tdp_inst[t]) << ',' << format_double(s.tdp_ard[t])
                << '\n';
        }
    }
}

void write_metrics_csv(const MetricsTable& table, std::ostream& out) {
    out << "time,pi1,violation_prop,mean_bound,q10,q50,q90\n";
    for (const auto& row : table.rows) {
        out << row.time << ',' << format_double(row.pi1) << ','
            << format_double(row.violation_prop) << ',' << format_double(row.mean_bound)
            << ',' << format_double(row.q10) << ',' << format_double(row.q50) << ','
            << format_double(row.q90) << '\n';
    }
}

void write_metrics_csv_file(const MetricsTable& table, const std::string& path) {
    auto out = open_output(path);
    write_metrics_csv(table, out);
}

std::vector<DiscoverySet> read_sets(std::istream& in) {
    std::vector<DiscoverySet> sets;
    std::set<std::string> labels;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = trim(line);
        if (text.empty() || text[0] == '#') continue;
        const std::string where = "line " + std::to_string(line_no);
        const auto colon = text.find(':');
        if (colon == std::string::npos)
            throw input_error(where + ": expected 'label:indices'");
        DiscoverySet set;
        set.label = trim(text.substr(0, colon));
        if (set.label.empty()) throw input_error(where + ": empty set label");
        if (set.label.find(',') != std::string::npos)
            throw input_error(where + ": set label must not contain ','");
        if (!labels.insert(set.label).second)
            throw input_error(where + ": duplicate set label '" + set.label + "'");
        for (const std::string& tok : split(text.substr(colon + 1), ',')) {
            const std::string t = trim(tok);
            const auto dash = t.find('-', 1); // position 0 would be a sign
            if (dash == std::string::npos) {
                const long long idx = parse_int(t, where);
                set.indices.push_back(static_cast<int>(idx));
            } else {
                const long long lo = parse_int(t.substr(0, dash), where);
                const long long hi = parse_int(t.substr(dash + 1), where);
                if (lo > hi)
                    throw input_error(where + ": descending range '" + t + "'");
                for (long long i = lo; i <= hi; ++i)
                    set.indices.push_back(static_cast<int>(i));
            }
        }
        if (set.indices.empty()) throw input_error(where + ": set has no indices");
        std::sort(set.indices.begin(), set.indices.end());
        for (std::size_t i = 0; i < set.indices.size(); ++i) {
            if (set.indices[i] < 1)
                throw input_error(where + ": indices are 1-based");
            if (i > 0 && set.indices[i] == set.indices[i - 1])
                throw input_error(where + ": duplicate index " +
                                  std::to_string(set.indices[i]));
        }
        sets.push_back(std::move(set));
    }
    if (sets.empty()) throw input_error("no discovery sets in file");
    return sets;
}

std::vector<DiscoverySet> read_sets_file(const std::string& path) {
    auto in = open_input(path);
    try {
        return read_sets(in);
    } catch (const input_error& e) {
        throw input_error(path + ": " + e.what());
    }
}

namespace {

ScenarioConfig scenario_from_json(const json& j) {
    if (!j.is_object()) throw config_error("scenario: JSON root must be an object");
    ScenarioConfig config;
    std::set<std::string> seen;
    const auto require_int = [](const json& v, const std::string& key) {
        if (!v.is_number_integer())
            throw config_error("scenario: '" + key + "' must be an integer");
        return v.get<long long>();
    };
    const auto require_num = [](const json& v, const std::string& key) {
        if (!v.is_number())
            throw config_error("scenario: '" + key + "' must be a number");
        return v.get<double>();
    };
    for (const auto& [key, value] : j.items()) {
        seen.insert(key);
        if (key == "m") config.m = static_cast<int>(require_int(value, key));
        else if (key == "n_false") config.n_false = static_cast<int>(require_int(value, key));
        else if (key == "N") config.horizon = static_cast<int>(require_int(value, key));
        else if (key == "mu_alt") config.mu_alt = require_num(value, key);
        else if (key == "rho") config.rho = require_num(value, key);
        else if (key == "alpha") config.alpha = require_num(value, key);
        else if (key == "r_size") config.r_size = static_cast<int>(require_int(value, key));
        else if (key == "iterations")
            config.iterations = static_cast<int>(require_int(value, key));
        else if (key == "burn_in") config.burn_in = static_cast<int>(require_int(value, key));
        else if (key == "ard") {
            if (!value.is_boolean()) throw config_error("scenario: 'ard' must be a boolean");
            config.ard = value.get<bool>();
        } else if (key == "seed") {
            if (value.is_number_unsigned())
                config.seed = value.get<std::uint64_t>();
            else if (value.is_number_integer() && value.get<long long>() >= 0)
                config.seed = static_cast<std::uint64_t>(value.get<long long>());
            else
                throw config_error("scenario: 'seed' must be a nonnegative integer");
        } else if (key == "pi1_list") {
            if (!value.is_array()) throw config_error("scenario: 'pi1_list' must be an array");
            for (const auto& item : value)
                config.pi1_list.push_back(require_num(item, "pi1_list"));
        } else if (key == "family") {
            config.family = family_from_json(value, "scenario");
        } else {
            throw config_error("scenario: unknown key '" + key + "'");
        }
    }
    for (const char* req : {"m", "n_false", "N", "mu_alt", "rho", "alpha", "pi1_list",
                            "iterations", "family"}) {
        if (!seen.count(req))
            throw config_error(std::string("scenario: missing required key '") + req + "'");
    }
    return config;
}

ScenarioConfig scenario_from_kv(const std::string& text) {
    ScenarioConfig config;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::string where = "scenario line " + std::to_string(line_no);
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw config_error(where + ": expected 'key = value'");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty() || value.empty())
            throw config_error(where + ": empty key or value");
        if (!seen.insert(key).second)
            throw config_error(where + ": duplicate key '" + key + "'");
        try {
            if (key == "m") config.m = static_cast<int>(parse_int(value, where));
            else if (key == "n_false")
                config.n_false = static_cast<int>(parse_int(value, where));
            else if (key == "N") config.horizon = static_cast<int>(parse_int(value, where));
            else if (key == "mu_alt") config.mu_alt = parse_double(value, where);
            else if (key == "rho") config.rho = parse_double(value, where);
            else if (key == "alpha") config.alpha = parse_double(value, where);
            else if (key == "r_size")
                config.r_size = static_cast<int>(parse_int(value, where));
            else if (key == "iterations")
                config.iterations = static_cast<int>(parse_int(value, where));
            else if (key == "burn_in")
                config.burn_in = static_cast<int>(parse_int(value, where));
            else if (key == "seed") {
                const long long s = parse_int(value, where);
                if (s < 0) throw config_error(where + ": seed must be nonnegative");
                config.seed = static_cast<std::uint64_t>(s);
            } else if (key == "ard") {
                if (value == "true" || value == "1") config.ard = true;
                else if (value == "false" || value == "0") config.ard = false;
                else throw config_error(where + ": 'ard' must be true or false");
            } else if (key == "pi1_list") {
                for (const std::string& tok : split(value, ','))
                    config.pi1_list.push_back(parse_double(tok, where));
            } else if (key == "family") {
                config.family.kind = family_kind_from_string(value);
            } else if (key == "delta") {
                config.family.delta = parse_double(value, where);
            } else if (key == "delta_min") {
                config.family.delta_min = parse_double(value, where);
            } else if (key == "quadrature_nodes") {
                config.family.quadrature_nodes =
                    static_cast<int>(parse_int(value, where));
            } else if (key == "prior_side") {
                config.family.prior_side = prior_side_from_string(value);
            } else {
                throw config_error(where + ": unknown key '" + key + "'");
            }
        } catch (const input_error& e) {
            // Number / name parse failures inside a scenario are configuration
            // problems, not stream corruption.
            throw config_error(e.what());
        }
    }
    for (const char* req : {"m", "n_false", "N", "mu_alt", "rho", "alpha", "pi1_list",
                            "iterations", "family"}) {
        if (!seen.count(req))
            throw config_error(std::string("scenario: missing required key '") + req + "'");
    }
    return config;
}

} // namespace

ScenarioConfig read_scenario(std::istream& in) {
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) throw config_error("scenario file is empty");
    if (text[first] == '{') {
        json j;
        try {
            j = json::parse(text);
        } catch (const json::exception& e) {
            throw config_error(std::string("scenario: invalid JSON: ") + e.what());
        }
        return scenario_from_json(j);
    }
    return scenario_from_kv(text);
}

ScenarioConfig read_scenario_file(const std::string& path) {
    auto in = open_input(path);
    try {
        return read_scenario(in);
    } catch (const config_error& e) {
        throw config_error(path + ": " + e.what());
    }
}

void write_snapshot(const Snapshot& snapshot, const std::string& path) {
    if (snapshot.mode != "observations" && snapshot.mode != "evalues")
        throw internal_error("snapshot mode must be 'observations' or 'evalues'");
    json j;
    j["schema_version"] = snapshot.schema_version;
    j["mode"] = snapshot.mode;
    j["m"] = snapshot.m;
    j["alpha"] = snapshot.alpha;
    j["time"] = snapshot.time;
    if (snapshot.mode == "observations") {
        j["family"] = family_to_json(snapshot.family);
        json states = json::array();
        for (const auto& s : snapshot.states) {
            if (!std::isfinite(s.sum) || !std::isfinite(s.sumsq) || !std::isfinite(s.log_e))
                throw internal_error("snapshot state contains non-finite values");
            states.push_back({{"n", s.n},
                              {"sum", s.sum},
                              {"sumsq", s.sumsq},
                              {"log_e", s.log_e},
                              {"capped", s.capped}});
        }
        j["states"] = std::move(states);
    }
    json sets = json::array();
    for (const auto& s : snapshot.sets)
        sets.push_back({{"label", s.label}, {"indices", s.indices}, {"c_min", s.c_min}});
    j["sets"] = std::move(sets);

    // Write-and-rename so an interrupted save never corrupts resumable state.
    const std::string tmp = path + ".tmp";
    {
        auto out = open_output(tmp);
        out << j.dump(2) << '\n';
        if (!out) throw input_error("failed writing snapshot to '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw input_error("failed moving snapshot into place at '" + path + "'");
}

Snapshot read_snapshot(const std::string& path) {
    auto in = open_input(path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw input_error(path + ": invalid snapshot JSON: " + e.what());
    }
    try {
        Snapshot snap;
        snap.schema_version = j.at("schema_version").get<int>();
        if (snap.schema_version != 1)
            throw config_error(path + ": unsupported snapshot schema version " +
                               std::to_string(snap.schema_version));
        snap.mode = j.at("mode").get<std::string>();
        if (snap.mode != "observations" && snap.mode != "evalues")
            throw input_error(path + ": unknown snapshot mode '" + snap.mode + "'");
        snap.m = j.at("m").get<int>();
        snap.alpha = j.at("alpha").get<double>();
        snap.time = j.at("time").get<int>();
        if (snap.mode == "observations") {
            snap.family = family_from_json(j.at("family"), "snapshot");
            for (const auto& s : j.at("states")) {
                ElementaryState state;
                state.n = s.at("n").get<std::int64_t>();
                state.sum = s.at("sum").get<double>();
                state.sumsq = s.at("sumsq").get<double>();
                state.log_e = s.at("log_e").get<double>();
                state.capped = s.at("capped").get<bool>();
                snap.states.push_back(state);
            }
            if (static_cast<int>(snap.states.size()) != snap.m)
                throw input_error(path + ": snapshot state count does not match m");
        }
        for (const auto& s : j.at("sets")) {
            SetSnapshot set;
            set.label = s.at("label").get<std::string>();
            set.indices = s.at("indices").get<std::vector<int>>();
            set.c_min = s.at("c_min").get<int>();
            snap.sets.push_back(std::move(set));
        }
        return snap;
    } catch (const json::exception& e) {
        throw input_error(path + ": malformed snapshot: " + e.what());
    }
}

} // namespace etdp
