// cylflow: batch driver for volume-preserving mean curvature flow near cylinders.
//
//   cylflow spectrum   --n 2 --R 1 --d 2 --l-max 2 --m-max 2
//   cylflow simulate   --config configs/stable_axisym.json --out runs/stable
//   cylflow sweep      --config configs/threshold_base.json --param R --values 0.8,0.9,1.1,1.2 --out runs/sweep
//   cylflow stationary --n 2 --d 3.141592653589793 --a-max 0.05 --steps 10
//   cylflow decay-fit  --csv runs/stable/diagnostics.csv --t-a 0.5 --t-b 2

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cylflow/commands.hpp"

namespace {

using namespace cylflow;

struct SpecOptions {
    std::optional<std::string> config;
    std::optional<int> n;
    std::optional<double> R;
    std::optional<double> d;

    void attach(CLI::App* app) {
        app->add_option("--config", config, "Experiment config (JSON); its spec is used unless overridden");
        app->add_option("--n", n, "Hypersurface dimension (>= 2)");
        app->add_option("--R", R, "Reference radius");
        app->add_option("--d", d, "Slab width");
    }

    /// Resolves the cylinder; with `critical_default` a missing radius
    /// becomes the critical radius d sqrt(n-1) / pi.
    CylinderSpec resolve(bool critical_default = false, int* nz = nullptr) const {
        CylinderSpec spec;
        bool have_R = false;
        if (config) {
            const ExperimentConfig ec = load_config(*config);
            spec = ec.flow.spec;
            have_R = true;
            if (nz) *nz = ec.flow.nz;
        } else if (!d) {
            throw InvalidArgument("either --config or --d (with --n, --R) is required");
        }
        if (n) spec.n = *n;
        if (d) spec.d = *d;
        if (R) {
            spec.R = *R;
            have_R = true;
        }
        if (!have_R) {
            if (!critical_default) throw InvalidArgument("--R is required");
            spec.R = critical_radius(spec.n, spec.d);
        }
        return spec;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Volume-preserving mean curvature flow near cylinders"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    // spectrum
    auto* spectrum_cmd = app.add_subcommand("spectrum", "Eigenvalues of the linearized flow, threshold and gap");
    SpecOptions spectrum_spec;
    spectrum_spec.attach(spectrum_cmd);
    SpectrumArgs spectrum_args;
    spectrum_cmd->add_option("--l-max", spectrum_args.l_max, "Largest angular order")->check(CLI::NonNegativeNumber);
    spectrum_cmd->add_option("--m-max", spectrum_args.m_max, "Largest axial order")->check(CLI::NonNegativeNumber);
    std::optional<std::string> spectrum_out;
    spectrum_cmd->add_option("--out", spectrum_out, "Output directory (default: stdout)");

    // simulate
    auto* simulate_cmd = app.add_subcommand("simulate", "Integrate the flow from a JSON config");
    SimulateArgs simulate_args;
    std::optional<std::uint64_t> simulate_seed;
    simulate_cmd->add_option("--config", simulate_args.config_path, "Experiment config (JSON)")->required();
    simulate_cmd->add_option("--out", simulate_args.out_dir, "Output directory")->capture_default_str();
    simulate_cmd->add_option("--seed", simulate_seed, "Seed for randomized initial data");
    int simulate_threads = 1;
    simulate_cmd->add_option("--threads", simulate_threads, "Ignored (single run)");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "Run a family of simulations varying R or the amplitude");
    SweepArgs sweep_args;
    std::string sweep_param = "R";
    std::optional<std::uint64_t> sweep_seed;
    sweep_cmd->add_option("--config", sweep_args.config_path, "Base experiment config (JSON)")->required();
    sweep_cmd->add_option("--param", sweep_param, "Swept parameter")->check(CLI::IsMember({"R", "amplitude"}));
    sweep_cmd->add_option("--values", sweep_args.values, "Comma separated values")->delimiter(',')->required();
    sweep_cmd->add_option("--out", sweep_args.out_dir, "Output directory")->capture_default_str();
    sweep_cmd->add_option("--threads", sweep_args.threads, "Concurrent runs")->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--seed", sweep_seed, "Seed for randomized initial data");

    // stationary
    auto* stationary_cmd = app.add_subcommand("stationary", "Unduloid branch from the critical cylinder");
    SpecOptions stationary_spec;
    stationary_spec.attach(stationary_cmd);
    StationaryArgs stationary_args;
    std::optional<int> stationary_nz;
    stationary_cmd->add_option("--a-max", stationary_args.a_max, "Largest cos(pi z/d) amplitude");
    stationary_cmd->add_option("--steps", stationary_args.steps, "Continuation steps");
    stationary_cmd->add_option("--nz", stationary_nz, "Axial grid points (default 33)");
    std::optional<std::string> stationary_out;
    stationary_cmd->add_option("--out", stationary_out, "Output directory (default: stdout)");

    // decay-fit
    auto* fit_cmd = app.add_subcommand("decay-fit", "Exponential decay rate from a diagnostics CSV");
    DecayFitArgs fit_args;
    fit_cmd->add_option("--csv", fit_args.csv_path, "Diagnostics CSV")->required();
    fit_cmd->add_option("--t-a", fit_args.t_a, "Window start")->required();
    fit_cmd->add_option("--t-b", fit_args.t_b, "Window end")->required();
    fit_cmd->add_option("--column", fit_args.column, "Column to fit")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    const auto with_spec = [](auto&& fn) {
        try {
            return fn();
        } catch (const InvalidArgument& e) {
            std::cerr << "error: " << e.what() << '\n';
            return static_cast<int>(kExitUsage);
        } catch (const std::exception& e) {
            std::cerr << "internal error: " << e.what() << '\n';
            return static_cast<int>(kExitInternal);
        }
    };

    if (spectrum_cmd->parsed()) {
        return with_spec([&] {
            spectrum_args.spec = spectrum_spec.resolve();
            spectrum_args.out_dir = spectrum_out;
            return cmd_spectrum(spectrum_args, std::cout, std::cerr);
        });
    }
    if (simulate_cmd->parsed()) {
        simulate_args.seed = simulate_seed;
        return cmd_simulate(simulate_args, std::cout, std::cerr);
    }
    if (sweep_cmd->parsed()) {
        sweep_args.parameter = sweep_param == "R" ? SweepParameter::R : SweepParameter::amplitude;
        sweep_args.seed = sweep_seed;
        return cmd_sweep(sweep_args, std::cout, std::cerr);
    }
    if (stationary_cmd->parsed()) {
        return with_spec([&] {
            int nz = 33;
            stationary_args.spec = stationary_spec.resolve(true, &nz);
            stationary_args.nz = stationary_nz.value_or(nz);
            stationary_args.out_dir = stationary_out;
            return cmd_stationary(stationary_args, std::cout, std::cerr);
        });
    }
    if (fit_cmd->parsed()) return cmd_decay_fit(fit_args, std::cout, std::cerr);
    return kExitUsage;
}
