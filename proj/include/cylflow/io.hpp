#pragma once

// File formats.
//
// CSV: optional "# key=value" comment lines, one header row, then rows with
// every real printed with 17 significant digits.
//
// Snapshot: first line is a JSON header
//   {"format":"cylflow-snapshot","version":1,"spec":{...},"nz":..,"ntheta":..,
//    "mode":"axisymmetric"|"full","t":..}
// followed by nz lines of ntheta values (row j holds z_j).

#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cylflow/config.hpp"
#include "cylflow/flow.hpp"
#include "cylflow/spectral.hpp"
#include "cylflow/stationary.hpp"

namespace cylflow {

inline std::string format_real(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::vector<std::string> diagnostics_columns(int n) {
    std::vector<std::string> cols = {"t", "volume", "area", "h", "sup_rho", "stable_norm"};
    for (int k = 0; k <= n; ++k) cols.push_back("y" + std::to_string(k));
    cols.push_back("min_radius");
    return cols;
}

inline void write_diagnostics_csv(std::ostream& out, const std::vector<DiagnosticsRecord>& records, int n) {
    const auto cols = diagnostics_columns(n);
    for (size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& r : records) {
        out << format_real(r.t) << ',' << format_real(r.volume) << ',' << format_real(r.area) << ','
            << format_real(r.h) << ',' << format_real(r.sup_rho) << ',' << format_real(r.stable_norm);
        for (int k = 0; k <= n; ++k) out << ',' << format_real(k < static_cast<int>(r.y.size()) ? r.y[k] : 0.0);
        out << ',' << format_real(r.min_radius) << '\n';
    }
}

/// Branch CSV: a, h, min_r, max_r, volume, area, residual_inf.
inline void write_branch_csv(std::ostream& out, const Branch& branch) {
    out << "a,h,min_r,max_r,volume,area,residual_inf\n";
    for (size_t i = 0; i < branch.profiles.size(); ++i) {
        const CmcProfile& p = branch.profiles[i];
        const Grid g = cmc_grid(p);
        const Field rho = profile_height(p, g);
        out << format_real(branch.amplitudes[i]) << ',' << format_real(p.h) << ',' << format_real(p.r.minCoeff()) << ','
            << format_real(p.r.maxCoeff()) << ',' << format_real(volume(rho)) << ',' << format_real(area(rho)) << ','
            << format_real(cmc_residual(p).lpNorm<Eigen::Infinity>()) << '\n';
    }
}

inline void write_spectrum_csv(std::ostream& out, const std::vector<SpectrumEntry>& rows) {
    out << "l,m,lambda,multiplicity\n";
    for (const auto& e : rows) out << e.l << ',' << e.m << ',' << format_real(e.lambda) << ',' << e.multiplicity << '\n';
}

/// Cells of a CSV file keyed by header name; comment lines are skipped.
struct CsvTable {
    std::vector<std::string> header;
    std::map<std::string, std::vector<std::string>> cells;
    std::map<std::string, std::string> comments;

    const std::vector<std::string>& text(const std::string& name) const {
        const auto it = cells.find(name);
        if (it == cells.end()) throw InvalidArgument("csv: no column \"" + name + "\"");
        return it->second;
    }

    /// The column parsed as reals.
    std::vector<double> column(const std::string& name) const {
        const auto& raw = text(name);
        std::vector<double> out;
        out.reserve(raw.size());
        for (size_t i = 0; i < raw.size(); ++i) {
            try {
                size_t used = 0;
                out.push_back(std::stod(raw[i], &used));
                if (used != raw[i].size()) throw std::invalid_argument(raw[i]);
            } catch (const std::exception&) {
                throw InvalidArgument("csv: column " + name + ", row " + std::to_string(i + 1) +
                                      ": cannot parse \"" + raw[i] + "\"");
            }
        }
        return out;
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

inline CsvTable read_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq != std::string::npos) {
                std::string key = line.substr(1, eq - 1);
                key.erase(0, key.find_first_not_of(' '));
                t.comments[key] = line.substr(eq + 1);
            }
            continue;
        }
        const auto cells = split_csv_line(line);
        if (t.header.empty()) {
            t.header = cells;
            for (const auto& h : cells) t.cells[h];
            continue;
        }
        ++row;
        if (cells.size() != t.header.size())
            throw InvalidArgument("csv: row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                                  " cells, expected " + std::to_string(t.header.size()));
        for (size_t i = 0; i < cells.size(); ++i) t.cells[t.header[i]].push_back(cells[i]);
    }
    if (t.header.empty()) throw InvalidArgument("csv: no header row");
    return t;
}

inline CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("csv: cannot read " + path);
    return read_csv(in);
}

inline void write_snapshot(std::ostream& out, const Field& rho, double t) {
    const Grid& g = rho.grid();
    nlohmann::json header = {{"format", "cylflow-snapshot"},
                             {"version", 1},
                             {"spec", to_json(g.spec())},
                             {"nz", g.nz()},
                             {"ntheta", g.ntheta()},
                             {"mode", g.full() ? "full" : "axisymmetric"},
                             {"t", t}};
    out << header.dump() << '\n';
    for (int j = 0; j < g.nz(); ++j) {
        for (int k = 0; k < g.ntheta(); ++k) out << (k ? " " : "") << format_real(rho(j, k));
        out << '\n';
    }
}

struct LoadedSnapshot {
    Field rho;
    double t = 0.0;
};

inline LoadedSnapshot read_snapshot(std::istream& in) {
    std::string first;
    if (!std::getline(in, first)) throw InvalidArgument("snapshot: empty input");
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(first);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("snapshot: bad header: ") + e.what());
    }
    if (h.value("format", "") != "cylflow-snapshot") throw InvalidArgument("snapshot: not a cylflow snapshot");
    const CylinderSpec spec = parse_spec(h.at("spec"));
    const int nz = h.at("nz").get<int>();
    const int nt = h.at("ntheta").get<int>();
    const bool full = h.at("mode").get<std::string>() == "full";
    const Grid g = make_grid(spec, nz, full ? std::optional<int>(nt) : std::nullopt);
    Eigen::MatrixXd v(nz, g.ntheta());
    for (int j = 0; j < nz; ++j)
        for (int k = 0; k < g.ntheta(); ++k)
            if (!(in >> v(j, k))) throw InvalidArgument("snapshot: truncated data");
    return {Field(g, v), h.at("t").get<double>()};
}

} // namespace cylflow
