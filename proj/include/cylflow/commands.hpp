#pragma once

// Subcommands of the cylflow driver. Each returns a process exit code:
// 0 success (including runs that terminated physically), 2 usage or
// configuration error, 3 internal error.

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "cylflow/config.hpp"
#include "cylflow/flow.hpp"
#include "cylflow/io.hpp"
#include "cylflow/spectral.hpp"
#include "cylflow/stationary.hpp"

namespace cylflow {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitInternal = 3 };

namespace fs = std::filesystem;

namespace detail {

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
}

inline void write_file(const fs::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << contents;
    if (!out) throw Error("write failed for " + path.string());
}

inline void ensure_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw InvalidArgument("cannot create output directory " + dir.string());
}

/// Writes to out_dir/name when out_dir is set, otherwise to `fallback`.
inline void emit(const std::optional<std::string>& out_dir, const std::string& name, const std::string& contents,
                 std::ostream& fallback) {
    if (!out_dir) {
        fallback << contents;
        return;
    }
    ensure_directory(*out_dir);
    write_file(fs::path(*out_dir) / name, contents);
}

} // namespace detail

// ---------------------------------------------------------------------------

struct SpectrumArgs {
    CylinderSpec spec;
    int l_max = 4;
    int m_max = 4;
    std::optional<std::string> out_dir;
};

inline int cmd_spectrum(const SpectrumArgs& args, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        args.spec.validate();
        const auto rows = spectrum(args.spec, args.l_max, args.m_max);
        std::ostringstream csv;
        csv << "# n=" << args.spec.n << "\n# R=" << format_real(args.spec.R) << "\n# d=" << format_real(args.spec.d)
            << '\n';
        csv << "# critical_radius=" << format_real(critical_radius(args.spec.n, args.spec.d)) << '\n';
        std::string gap = "none";
        try {
            gap = format_real(spectral_gap(args.spec));
        } catch (const NonPositiveGap&) {
        }
        csv << "# spectral_gap=" << gap << '\n';
        csv << "# kernel_dimension=" << kernel_dimension(args.spec) << '\n';
        write_spectrum_csv(csv, rows);
        detail::emit(args.out_dir, "spectrum.csv", csv.str(), out);
        return static_cast<int>(kExitOk);
    });
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
};

struct RunOutputs {
    Trajectory trajectory;
    nlohmann::json manifest;
};

/// Runs one experiment and writes diagnostics.csv, final_state.txt,
/// optional snapshots/ and manifest.json under out_dir.
inline RunOutputs execute_run(const ExperimentConfig& ec, const fs::path& out_dir) {
    const std::string started = detail::utc_timestamp();
    RunOutputs res;
    res.trajectory = run(ec.flow);
    const Trajectory& traj = res.trajectory;
    const int n = ec.flow.spec.n;

    detail::ensure_directory(out_dir);
    std::vector<std::string> outputs;
    {
        std::ostringstream csv;
        write_diagnostics_csv(csv, traj.diagnostics, n);
        detail::write_file(out_dir / "diagnostics.csv", csv.str());
        outputs.push_back((out_dir / "diagnostics.csv").string());
    }
    {
        std::ostringstream snap;
        write_snapshot(snap, traj.final_state, traj.final_time);
        detail::write_file(out_dir / "final_state.txt", snap.str());
        outputs.push_back((out_dir / "final_state.txt").string());
    }
    if (!traj.snapshots.empty()) {
        detail::ensure_directory(out_dir / "snapshots");
        for (size_t i = 0; i < traj.snapshots.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "snap_%06zu.txt", i);
            std::ostringstream snap;
            write_snapshot(snap, traj.snapshots[i].rho, traj.snapshots[i].t);
            detail::write_file(out_dir / "snapshots" / name, snap.str());
            outputs.push_back((out_dir / "snapshots" / name).string());
        }
    }

    const DiagnosticsRecord& last = traj.diagnostics.back();
    nlohmann::json manifest = {{"code_version", kVersion},
                               {"config", to_json(ec)},
                               {"started", started},
                               {"finished", detail::utc_timestamp()},
                               {"termination", to_string(traj.termination)},
                               {"message", traj.message},
                               {"steps", traj.steps},
                               {"final",
                                {{"t", last.t},
                                 {"volume", last.volume},
                                 {"area", last.area},
                                 {"stable_norm", last.stable_norm},
                                 {"dist", last.dist},
                                 {"y", last.y}}},
                               {"outputs", outputs}};
    detail::write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
    res.manifest = std::move(manifest);
    return res;
}

inline int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        ExperimentConfig ec = load_config(args.config_path);
        if (args.seed) {
            ec.seed = *args.seed;
            if (ec.flow.initial.random) ec.flow.initial.random->seed = *args.seed;
        }
        const RunOutputs res = execute_run(ec, args.out_dir);
        out << "termination=" << res.manifest["termination"].get<std::string>() << '\n'
            << "final_t=" << format_real(res.trajectory.final_time) << '\n'
            << "final_dist=" << format_real(res.trajectory.diagnostics.back().dist) << '\n'
            << "manifest=" << (fs::path(args.out_dir) / "manifest.json").string() << '\n';
        return static_cast<int>(kExitOk);
    });
}

// ---------------------------------------------------------------------------

enum class SweepParameter { R, amplitude };

struct SweepArgs {
    std::string config_path;
    SweepParameter parameter = SweepParameter::R;
    std::vector<double> values;
    std::string out_dir = "sweep";
    int threads = 1;
    std::optional<std::uint64_t> seed;
};

struct SweepRow {
    double value = 0.0;
    double rate = NAN;
    bool decaying = false;
    int fit_points = 0;
    double final_dist = NAN;
    std::string termination = "none";
    std::string status = "pending";
};

/// Applies one sweep value to the base configuration. `amplitude` rescales
/// the initial mode list so that its first entry has the given amplitude.
inline ExperimentConfig apply_sweep_value(ExperimentConfig ec, SweepParameter p, double value) {
    if (p == SweepParameter::R) {
        ec.flow.spec.R = value;
    } else {
        auto& modes = ec.flow.initial.modes;
        if (modes.empty()) throw ConfigError("sweep: amplitude sweep needs at least one initial mode");
        if (modes.front().amplitude == 0.0) throw ConfigError("sweep: first initial mode has zero amplitude");
        const double s = value / modes.front().amplitude;
        for (auto& m : modes) m.amplitude *= s;
    }
    ec.flow.validate();
    (void)initial_field(ec.flow);
    return ec;
}

inline SweepRow sweep_row(const ExperimentConfig& base, SweepParameter p, double value, const fs::path& dir) {
    SweepRow row;
    row.value = value;
    try {
        const ExperimentConfig ec = apply_sweep_value(base, p, value);
        const RunOutputs res = execute_run(ec, dir);
        const Trajectory& traj = res.trajectory;
        row.termination = to_string(traj.termination);
        row.final_dist = traj.diagnostics.back().dist;
        const auto w = ec.window();
        try {
            const DecayFit fit = fit_decay_rate(traj, w[0], std::min(w[1], traj.final_time));
            row.rate = fit.rate;
            row.decaying = fit.decaying;
            row.fit_points = fit.points;
            row.status = fit.decaying ? "ok" : "non_decaying";
        } catch (const InsufficientData& e) {
            row.status = "insufficient_data";
        }
    } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
        for (char& c : row.status)
            if (c == ',' || c == '\n') c = ';';
    }
    return row;
}

inline std::string format_sweep_csv(SweepParameter p, const std::vector<SweepRow>& rows) {
    std::ostringstream csv;
    csv << "# parameter=" << (p == SweepParameter::R ? "R" : "amplitude") << '\n';
    csv << "value,rate,decaying,fit_points,final_dist,termination,status\n";
    for (const auto& r : rows)
        csv << format_real(r.value) << ',' << format_real(r.rate) << ',' << (r.decaying ? 1 : 0) << ',' << r.fit_points
            << ',' << format_real(r.final_dist) << ',' << r.termination << ',' << r.status << '\n';
    return csv.str();
}

inline std::vector<SweepRow> run_sweep(const ExperimentConfig& base, SweepParameter p, const std::vector<double>& values,
                                       const fs::path& out_dir, int threads) {
    std::vector<SweepRow> rows(values.size());
    std::atomic<size_t> next{0};
    const auto worker = [&] {
        for (size_t i = next++; i < values.size(); i = next++) {
            char name[32];
            std::snprintf(name, sizeof name, "run_%03zu", i);
            rows[i] = sweep_row(base, p, values[i], out_dir / name);
        }
    };
    const int nthreads = std::max(1, std::min<int>(threads, static_cast<int>(values.size())));
    std::vector<std::thread> pool;
    for (int k = 1; k < nthreads; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return rows;
}

inline int cmd_sweep(const SweepArgs& args, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        if (args.values.empty()) throw InvalidArgument("sweep: no values given");
        for (double v : args.values)
            if (!std::isfinite(v)) throw InvalidArgument("sweep: values must be finite");
        ExperimentConfig base = load_config(args.config_path);
        if (args.seed) {
            base.seed = *args.seed;
            if (base.flow.initial.random) base.flow.initial.random->seed = *args.seed;
        }
        if (args.parameter == SweepParameter::amplitude && base.flow.initial.modes.empty())
            throw ConfigError("sweep: amplitude sweep needs at least one initial mode");
        detail::ensure_directory(args.out_dir);
        const auto rows = run_sweep(base, args.parameter, args.values, args.out_dir, args.threads);
        const std::string csv = format_sweep_csv(args.parameter, rows);
        detail::write_file(fs::path(args.out_dir) / "sweep.csv", csv);
        out << csv;
        return static_cast<int>(kExitOk);
    });
}

// ---------------------------------------------------------------------------

struct StationaryArgs {
    CylinderSpec spec;
    double a_max = 0.05;
    int steps = 10;
    int nz = 33;
    std::optional<std::string> out_dir;
};

inline int cmd_stationary(const StationaryArgs& args, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        args.spec.validate();
        if (args.steps < 1) throw InvalidArgument("stationary: steps must be >= 1");
        if (!(args.a_max >= 0.0)) throw InvalidArgument("stationary: a_max must be >= 0");
        if (args.nz < 4) throw InvalidArgument("stationary: nz must be >= 4");
        const double rstar = critical_radius(args.spec.n, args.spec.d);
        const BifurcationTest bt = bifurcation_test(args.spec, args.nz);

        std::ostringstream csv;
        csv << "# critical_radius=" << format_real(rstar) << '\n'
            << "# R=" << format_real(args.spec.R) << '\n'
            << "# kernel_singular_ratio=" << format_real(bt.smallest_ratio) << '\n'
            << "# kernel_cos_dominance=" << format_real(bt.cos_dominance) << '\n';
        Branch branch;
        if (std::abs(args.spec.R - rstar) > 1e-6 || !bt.has_kernel) {
            csv << "# status=empty_branch\n";
            err << "stationary: no bifurcation at R = " << args.spec.R << " (critical radius " << rstar
                << "); branch is empty\n";
        } else {
            branch = trace_branch(args.spec, args.a_max, args.steps, args.nz);
            csv << "# status=" << (branch.complete ? "complete" : "partial") << '\n';
            if (!branch.complete) {
                csv << "# message=" << branch.message << '\n';
                err << "stationary: branch stopped early: " << branch.message << '\n';
            }
        }
        write_branch_csv(csv, branch);
        detail::emit(args.out_dir, "branch.csv", csv.str(), out);
        return static_cast<int>(kExitOk);
    });
}

// ---------------------------------------------------------------------------

struct DecayFitArgs {
    std::string csv_path;
    double t_a = 0.0;
    double t_b = 0.0;
    std::string column = "stable_norm";
};

inline int cmd_decay_fit(const DecayFitArgs& args, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        const CsvTable table = read_csv_file(args.csv_path);
        const std::vector<double> t = table.column("t");
        const std::vector<double> v = table.column(args.column);
        DecayFit fit;
        try {
            fit = fit_decay_rate(t, v, args.t_a, args.t_b);
        } catch (const InsufficientData& e) {
            throw InvalidArgument(e.what());
        }
        out << "rate,decaying,points\n" << format_real(fit.rate) << ',' << (fit.decaying ? 1 : 0) << ',' << fit.points << '\n';
        if (!fit.decaying) err << "decay-fit: series is not decaying (NonDecaying)\n";
        return static_cast<int>(kExitOk);
    });
}

} // namespace cylflow
