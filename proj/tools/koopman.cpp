// Command-line front end: simulate, fit, predict, basin, augment, bench.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "koopman/basin.hpp"
#include "koopman/dynamics.hpp"
#include "koopman/edmd.hpp"
#include "koopman/harness.hpp"
#include "koopman/io.hpp"
#include "koopman/symmetry.hpp"

namespace {

using namespace koopman;

constexpr int kExitConfigError = 2;
constexpr int kExitCheckFailed = 3;

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open '" + path + "' for writing");
    return os;
}

std::vector<Trajectory> read_trajectories(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open '" + path + "'");
    return read_trajectories_csv(is);
}

json parse_json_arg(const std::string& text) {
    // Accept either inline JSON or a path to a JSON file.
    if (!text.empty() && text.front() == '{') {
        try {
            return json::parse(text);
        } catch (const json::parse_error& e) {
            throw FormatError(std::string("invalid JSON: ") + e.what());
        }
    }
    return read_json_file(text);
}

ExperimentConfig load_config(const std::string& path) {
    if (path.empty()) return ExperimentConfig{};
    return config_from_json(read_json_file(path));
}

int cmd_simulate(const std::string& system, const std::string& x0_text, double dt, std::size_t steps,
                 const std::string& out) {
    const StateVector x0 = parse_state(x0_text);
    Trajectory traj;
    if (system == "duffing") {
        if (x0.size() != 2) throw FormatError("duffing needs a 2-dimensional x0");
        traj = simulate(duffing_field(), x0, dt, steps);
    } else if (system == "lorenz") {
        if (x0.size() != 3) throw FormatError("lorenz needs a 3-dimensional x0");
        traj = simulate(lorenz_field(), x0, dt, steps);
    } else {
        throw FormatError("unknown system '" + system + "'");
    }
    auto os = open_out(out);
    write_trajectory_csv(os, traj);
    return 0;
}

int cmd_fit(const std::string& data, const std::string& dict_text, double svd_rtol, double ridge,
            const std::string& out) {
    const auto trajs = read_trajectories(data);
    const auto pairs = build_snapshot_pairs(trajs);
    const auto states = all_states(trajs);
    const auto dict = dictionary_from_json(parse_json_arg(dict_text), pairs.dim(), states);
    const auto model = fit(pairs, dict, FitOptions{svd_rtol, ridge});
    save_model(out, model, ModelFileInfo{std::nullopt, trajs.size()});
    std::cout << "pairs " << pairs.size() << ", D " << dict.dimension() << ", rank " << model.metadata().rank
              << ", fit residual " << format_double(model.fit_residual()) << ", reconstruction residual "
              << format_double(model.reconstruction_residual()) << '\n';
    if (!model.has_invertible_eigenvectors()) {
        std::cerr << "warning: eigenvector matrix is ill-conditioned (cond " << model.eigenvector_condition() << ")\n";
    }
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& x0_text, std::size_t steps, const std::string& out) {
    const auto model = load_model(model_path);
    const StateVector x0 = parse_state(x0_text);
    if (x0.size() != model.state_dim()) throw FormatError("x0 dimension does not match the model");
    auto os = open_out(out);
    write_trajectory_csv(os, predict_trajectory(model, x0, steps));
    return 0;
}

int cmd_basin(int grid, const std::string& domain_text, bool oracle, const std::string& config, const std::string& out) {
    if (grid < 2) throw FormatError("grid must have at least 2 points per axis");
    const StateVector domain = parse_state(domain_text);
    if (domain.size() != 2 || !(domain(0) < domain(1))) throw FormatError("domain must be 'lo,hi' with lo < hi");
    const auto cfg = load_config(config);
    const auto field = duffing_field(cfg.duffing);
    const auto targets = duffing_attractors(cfg.duffing);
    std::optional<BasinIndicator> indicator;
    if (!oracle) indicator = prepare_duffing(cfg).indicator;

    const auto axis = linspace(domain(0), domain(1), grid);
    auto os = open_out(out);
    os << "x1,x2,label\n";
    std::size_t unresolved = 0;
    for (double x2 : axis) {
        for (double x1 : axis) {
            const Eigen::Vector2d x(x1, x2);
            int label = 0;
            if (indicator) {
                label = indicator->classify(x).value;
            } else {
                try {
                    label = label_by_integration(x, field, targets, cfg.basin_t_extend, cfg.basin_tol).value;
                } catch (const UnresolvedBasin&) {
                    ++unresolved;
                }
            }
            os << format_double(x1) << ',' << format_double(x2) << ',' << label << '\n';
        }
    }
    if (unresolved > 0) std::cerr << unresolved << " grid points did not settle (label 0)\n";
    return 0;
}

int cmd_augment(const std::string& data, const std::string& action_path, const std::string& out) {
    const auto trajs = read_trajectories(data);
    const auto actions = actions_from_json(read_json_file(action_path));
    // With an "actions" list the identity entry is skipped; every other action adds one image.
    std::vector<Trajectory> result(trajs.begin(), trajs.end());
    for (const auto& a : actions) {
        if (a.is_identity() && actions.size() > 1) continue;
        if (a.dim() != trajs.front().dim()) throw FormatError("action dimension does not match the data");
        auto aug = augment(trajs, a);
        result.insert(result.end(), aug.begin() + static_cast<std::ptrdiff_t>(trajs.size()), aug.end());
    }
    auto os = open_out(out);
    write_trajectories_csv(os, result);
    std::cout << count_states(trajs) << " -> " << count_states(result) << " states\n";
    return 0;
}

std::string sweep_path(const std::string& out, int centers) {
    const std::filesystem::path p(out);
    const auto name = p.stem().string() + "_rbf" + std::to_string(centers) + p.extension().string();
    return (p.parent_path() / name).string();
}

int cmd_bench(const std::string& system, const std::string& config, std::optional<std::uint64_t> seed,
              const std::string& out, bool check) {
    auto cfg = load_config(config);
    if (seed) cfg.seed = *seed;
    if (system == "duffing") {
        const auto bench = run_duffing_benchmark(cfg);
        {
            auto os = open_out(out);
            write_duffing_csv(os, bench.rows);
        }
        std::cout << "training pairs: vanilla " << bench.n_vanilla_pairs << ", symmetry " << bench.n_symmetry_pairs
                  << " (" << bench.n_m1_trajectories << " M1 trajectories)\n";
        bool ok = true;
        for (const auto& t : tally_symmetry_wins(bench.rows)) {
            std::cout << to_string(t.kind) << ": symmetry better in " << t.symmetry_wins << "/" << t.configurations
                      << (t.majority() ? "" : "  [deviation]") << '\n';
            ok = ok && t.majority();
        }
        return (check && !ok) ? kExitCheckFailed : 0;
    }
    if (system == "lorenz") {
        const auto bench = run_lorenz_benchmark(cfg);
        {
            auto os = open_out(out);
            write_lorenz_csv(os, bench.primary);
        }
        std::cout << "points: raw " << bench.raw_points << ", augmented " << bench.augmented_points
                  << ", half augmented " << bench.half_augmented_points << '\n';
        auto report = [](const LorenzTable& t) {
            const auto m = t.upper_half_means();
            std::cout << "rbf " << t.dictionary.n_centers << ": upper-half mse raw " << format_double(m[0]) << ", aug "
                      << format_double(m[1]) << ", half_aug " << format_double(m[2])
                      << (t.ordinal_holds() ? "" : "  [reproduction deviation]") << '\n';
        };
        report(bench.primary);
        std::size_t holds = 0;
        for (const auto& t : bench.sweep) {
            auto os = open_out(sweep_path(out, t.dictionary.n_centers));
            write_lorenz_csv(os, t);
            report(t);
            if (t.ordinal_holds()) ++holds;
        }
        const bool ok = bench.sweep.empty() ? bench.primary.ordinal_holds() : 2 * holds > bench.sweep.size();
        return (check && !ok) ? kExitCheckFailed : 0;
    }
    throw FormatError("unknown benchmark '" + system + "'");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Koopman operator / EDMD toolkit with symmetry-constrained prediction"};
    app.require_subcommand(1);

    std::string system = "duffing", x0, out, data, dict, model_path, domain = "-2,2", action, config;
    double dt = 0.2, svd_rtol = 1e-10, ridge = 0.0;
    std::size_t steps = 50;
    int grid = 101;
    bool oracle = false, check = false;
    std::optional<std::uint64_t> seed;

    auto* sim = app.add_subcommand("simulate", "integrate a benchmark system with RK4");
    sim->add_option("--system", system, "duffing or lorenz")->capture_default_str();
    sim->add_option("--x0", x0, "initial state, comma separated")->required();
    sim->add_option("--dt", dt, "output sampling interval")->capture_default_str();
    sim->add_option("--steps", steps, "number of output intervals")->capture_default_str();
    sim->add_option("--out", out, "trajectory CSV")->required();

    auto* fit_cmd = app.add_subcommand("fit", "fit an EDMD model to trajectory data");
    fit_cmd->add_option("--data", data, "trajectory CSV")->required();
    fit_cmd->add_option("--dict", dict, "dictionary JSON (inline or file)")->required();
    fit_cmd->add_option("--svd-rtol", svd_rtol, "relative singular value cutoff")->capture_default_str();
    fit_cmd->add_option("--ridge", ridge, "Tikhonov parameter (0 = minimum-norm least squares)")->capture_default_str();
    fit_cmd->add_option("--out", out, "model JSON")->required();

    auto* pred = app.add_subcommand("predict", "roll a fitted model forward");
    pred->add_option("--model", model_path, "model JSON")->required();
    pred->add_option("--x0", x0, "initial state, comma separated")->required();
    pred->add_option("--steps", steps, "number of steps")->capture_default_str();
    pred->add_option("--out", out, "predicted trajectory CSV")->required();

    auto* basin = app.add_subcommand("basin", "label a grid of Duffing states by basin");
    basin->add_option("--grid", grid, "points per axis")->capture_default_str();
    basin->add_option("--domain", domain, "lo,hi of the square domain")->capture_default_str();
    basin->add_flag("--oracle", oracle, "label by long integration instead of the classifier");
    basin->add_option("--config", config, "experiment config JSON");
    basin->add_option("--out", out, "labels CSV")->required();

    auto* aug = app.add_subcommand("augment", "append symmetry images of trajectory data");
    aug->add_option("--data", data, "trajectory CSV")->required();
    aug->add_option("--action", action, "group action JSON")->required();
    aug->add_option("--out", out, "augmented trajectory CSV")->required();

    auto* bench = app.add_subcommand("bench", "run a benchmark experiment");
    bench->add_option("system", system, "duffing or lorenz")->required();
    bench->add_option("--config", config, "experiment config JSON");
    bench->add_option("--seed", seed, "override the config seed");
    bench->add_option("--out", out, "results CSV")->required();
    bench->add_flag("--check", check, "exit with status 3 when an ordinal check fails");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*sim) return cmd_simulate(system, x0, dt, steps, out);
        if (*fit_cmd) return cmd_fit(data, dict, svd_rtol, ridge, out);
        if (*pred) return cmd_predict(model_path, x0, steps, out);
        if (*basin) return cmd_basin(grid, domain, oracle, config, out);
        if (*aug) return cmd_augment(data, action, out);
        if (*bench) return cmd_bench(system, config, seed, out, check);
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
