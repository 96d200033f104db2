#pragma once

#include "deltak/partial.hpp"
#include "deltak/points.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace deltak {

using Json = nlohmann::ordered_json;

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

/// "?" and the empty field mean missing; anything else must be a finite number.
inline bool parse_field(std::string_view raw, std::optional<double>* out) {
    const std::string_view f = trim(raw);
    if (f.empty() || f == "?") {
        out->reset();
        return true;
    }
    std::string_view body = f;
    if (body.front() == '+') body.remove_prefix(1);
    double v = 0.0;
    const auto* first = body.data();
    const auto* last = body.data() + body.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last || !std::isfinite(v)) return false;
    *out = v;
    return true;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    for (;;) {
        const std::size_t comma = line.find(',', pos);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(pos));
            return fields;
        }
        fields.push_back(line.substr(pos, comma - pos));
        pos = comma + 1;
    }
}

}  // namespace detail

/// Reads a rectangular CSV of numbers where "?" or an empty field marks a
/// missing coordinate.  A first row containing any non-numeric field is taken
/// as a header.  The 0-based data row index becomes the point id.  Ragged
/// rows, unparsable fields, and rows with every coordinate missing are input
/// errors.
inline Instance load_csv(std::istream& in) {
    std::vector<DeltaPoint> pts;
    std::string line;
    Eigen::Index d = -1;
    int data_row = 0;
    int file_line = 0;
    bool first_content_line = true;
    while (std::getline(in, line)) {
        ++file_line;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv(line);

        std::vector<std::optional<double>> vals(fields.size());
        bool all_numeric = true;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (!detail::parse_field(fields[i], &vals[i])) {
                all_numeric = false;
                break;
            }
        }
        if (first_content_line) {
            first_content_line = false;
            if (!all_numeric) continue;  // header row
        } else if (!all_numeric) {
            throw std::invalid_argument("csv line " + std::to_string(file_line) +
                                        ": non-numeric field");
        }

        if (d < 0) {
            d = static_cast<Eigen::Index>(fields.size());
        } else if (static_cast<Eigen::Index>(fields.size()) != d) {
            throw std::invalid_argument("csv line " + std::to_string(file_line) + ": expected " +
                                        std::to_string(d) + " fields, found " +
                                        std::to_string(fields.size()));
        }
        MaskedVector v(d);
        for (Eigen::Index i = 0; i < d; ++i)
            if (vals[static_cast<std::size_t>(i)]) v.set(i, *vals[static_cast<std::size_t>(i)]);
        if (v.defined_count() == 0)
            throw std::invalid_argument("csv line " + std::to_string(file_line) + " (row " +
                                        std::to_string(data_row) +
                                        "): every coordinate is missing");
        pts.emplace_back(data_row, std::move(v));
        ++data_row;
    }
    if (pts.empty()) throw std::invalid_argument("csv input contains no data rows");
    return make_instance(std::move(pts), d);
}

inline Instance load_csv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open input file: " + path);
    return load_csv(f);
}

// ---- run reports ---------------------------------------------------------

struct AlgoResult {
    std::string algorithm;  // "ptas", "lloyd", or "exact"
    ClusteringSolution solution;
    long long repetitions = 0;  // trials, iterations, or labelings examined
    long long failures = 0;
    bool fallback = false;
    double wall_ms = 0.0;
};

struct RunReport {
    int version = 1;
    Eigen::Index n = 0;
    Eigen::Index d = 0;
    int delta = 0;
    Json config;
    std::vector<AlgoResult> results;
};

inline Json center_to_json(const Center& c) {
    Json arr = Json::array();
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        if (c.defined_at(i)) arr.push_back(c.values[i]);
        else arr.push_back(nullptr);
    }
    return arr;
}

inline Json report_to_json(const RunReport& rep) {
    Json j;
    j["version"] = rep.version;
    j["instance"] = {{"n", rep.n}, {"d", rep.d}, {"delta", rep.delta}};
    j["config"] = rep.config;
    Json results = Json::array();
    for (const AlgoResult& r : rep.results) {
        Json e;
        e["algorithm"] = r.algorithm;
        e["cost"] = r.solution.cost;
        Json centers = Json::array();
        for (const Center& c : r.solution.centers) centers.push_back(center_to_json(c));
        e["centers"] = centers;
        e["assignment"] = r.solution.assignment;
        e["repetitions"] = r.repetitions;
        e["failures"] = r.failures;
        e["fallback"] = r.fallback;
        e["wall_ms"] = r.wall_ms;
        results.push_back(std::move(e));
    }
    j["results"] = std::move(results);
    return j;
}

/// Scalar fields only; centers and assignments live in the JSON form.
inline std::string report_to_csv(const RunReport& rep) {
    std::ostringstream out;
    out << "version,n,d,delta,algorithm,cost,repetitions,failures,fallback,wall_ms\n";
    for (const AlgoResult& r : rep.results) {
        out << rep.version << ',' << rep.n << ',' << rep.d << ',' << rep.delta << ','
            << r.algorithm << ',';
        out.precision(17);
        out << r.solution.cost << ',' << r.repetitions << ',' << r.failures << ','
            << (r.fallback ? 1 : 0) << ',' << r.wall_ms << '\n';
    }
    return out.str();
}

/// Inverse of report_to_json; throws invalid_argument on any schema problem.
inline RunReport report_from_json(const Json& j) try {
    auto need = [&](const Json& o, const char* key) -> const Json& {
        if (!o.is_object() || !o.contains(key))
            throw std::invalid_argument(std::string("report is missing key '") + key + "'");
        return o.at(key);
    };
    RunReport rep;
    rep.version = need(j, "version").get<int>();
    if (rep.version != 1)
        throw std::invalid_argument("unsupported report version " + std::to_string(rep.version));
    const Json& inst = need(j, "instance");
    rep.n = need(inst, "n").get<Eigen::Index>();
    rep.d = need(inst, "d").get<Eigen::Index>();
    rep.delta = need(inst, "delta").get<int>();
    if (rep.n < 1 || rep.d < 1 || rep.delta < 0 || rep.delta >= rep.d)
        throw std::invalid_argument("report instance summary out of range");
    rep.config = need(j, "config");
    for (const Json& e : need(j, "results")) {
        AlgoResult r;
        r.algorithm = need(e, "algorithm").get<std::string>();
        if (r.algorithm != "ptas" && r.algorithm != "lloyd" && r.algorithm != "exact")
            throw std::invalid_argument("unknown algorithm in report: " + r.algorithm);
        r.solution.cost = need(e, "cost").get<double>();
        for (const Json& cj : need(e, "centers")) {
            Center c(rep.d);
            if (static_cast<Eigen::Index>(cj.size()) != rep.d)
                throw std::invalid_argument("center length does not match dimension");
            for (Eigen::Index i = 0; i < rep.d; ++i)
                if (!cj.at(static_cast<std::size_t>(i)).is_null())
                    c.set(i, cj.at(static_cast<std::size_t>(i)).get<double>());
            r.solution.centers.push_back(std::move(c));
        }
        r.solution.assignment = need(e, "assignment").get<std::vector<int>>();
        if (static_cast<Eigen::Index>(r.solution.assignment.size()) != rep.n)
            throw std::invalid_argument("assignment length does not match n");
        for (int a : r.solution.assignment)
            if (a < 0 || a >= static_cast<int>(r.solution.centers.size()))
                throw std::invalid_argument("assignment label out of range");
        r.repetitions = need(e, "repetitions").get<long long>();
        r.failures = need(e, "failures").get<long long>();
        r.fallback = need(e, "fallback").get<bool>();
        r.wall_ms = need(e, "wall_ms").get<double>();
        rep.results.push_back(std::move(r));
    }
    return rep;
} catch (const Json::exception& e) {
    // wrongly typed fields surface as schema errors, not parser internals
    throw std::invalid_argument(std::string("malformed report: ") + e.what());
}

/// Re-derives every cost from its assignment and centers; a relative mismatch
/// beyond tol is an invariant violation (the CLI refuses to emit and verify
/// refuses to accept such a report).
inline void check_report(const Instance& inst, const RunReport& rep, double tol = 1e-6) {
    if (rep.n != inst.size() || rep.d != inst.d || rep.delta != inst.delta)
        throw InvariantViolation("report instance summary does not match the instance");
    for (const AlgoResult& r : rep.results) {
        const double re = solution_cost(inst, r.solution.assignment, r.solution.centers);
        const double scale = std::max({std::abs(re), std::abs(r.solution.cost), 1e-300});
        if (std::abs(re - r.solution.cost) > tol * scale)
            throw InvariantViolation("report cost for " + r.algorithm + " (" +
                                     std::to_string(r.solution.cost) +
                                     ") does not match recomputation (" + std::to_string(re) + ")");
    }
}

}  // namespace deltak
