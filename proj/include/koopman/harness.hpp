#pragma once

// End-to-end experiments:
//   Duffing  vanilla EDMD on all 49 training trajectories against
//            symmetry-constrained EDMD fitted on the M1 trajectories only,
//            swept over dictionary families and hyperparameters.
//   Lorenz   vanilla EDMD on raw, symmetry-augmented and halved-augmented
//            data, scored by horizon-conditioned MSE on a continuation.
//
// Randomness: the only random draw is the Duffing test set, taken once per
// run from std::mt19937_64 seeded with cfg.seed (53-bit uniform mantissas,
// x1 then x2 for each initial condition). Sweep cells consume no randomness,
// so cell order and parallelism cannot change the output.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "koopman/basin.hpp"
#include "koopman/dynamics.hpp"
#include "koopman/edmd.hpp"
#include "koopman/error.hpp"
#include "koopman/group_action.hpp"
#include "koopman/observables.hpp"
#include "koopman/symmetry.hpp"

namespace koopman {

struct SweepAxis {
    DictionaryKind kind = DictionaryKind::rbf;
    std::vector<int> values;
};

struct TestSetSpec {
    int count = 100;
    double domain_min = -2.0;
    double domain_max = 2.0;
    int horizon = 50;
    double dt_out = 0.2;
};

struct LorenzSetup {
    LorenzParams params;
    StateVector x0 = Eigen::Vector3d(1.0, 0.0, 0.0);
    double dt = 0.005;
    int steps = 2000;
    int stride = 4;
    int test_steps = 1000;
    int horizon = 50;
    DictionarySpec dictionary = DictionarySpec::with_hyperparameter(DictionaryKind::rbf, 100);
    std::vector<int> sweep_centers{50, 100, 200};
};

struct ExperimentConfig {
    std::string system = "duffing";
    std::vector<SweepAxis> sweep{
        {DictionaryKind::rbf, {10, 25, 50, 100, 200}},
        {DictionaryKind::fourier, {1, 2, 3, 4, 5, 6}},
        {DictionaryKind::polynomial, {1, 2, 3, 4, 5, 6, 7}},
    };
    std::uint64_t seed = 20230611;
    TestSetSpec test;
    int knn_k = BasinIndicator::kDefaultK;
    double svd_rtol = 1e-10;
    double fourier_half_width = 2.0;
    double basin_tol = 0.05;
    double basin_t_extend = 50.0;
    DuffingParams duffing;
    DuffingGridConfig grid;
    LorenzSetup lorenz;
};

/// Uniform draw in [lo, hi) from the top 53 bits of a 64-bit engine output.
inline double uniform_draw(std::mt19937_64& rng, double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

inline std::vector<StateVector> uniform_box_samples(std::uint64_t seed, std::size_t count, Eigen::Index dim,
                                                    double lo, double hi) {
    std::mt19937_64 rng(seed);
    std::vector<StateVector> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        StateVector x(dim);
        for (Eigen::Index j = 0; j < dim; ++j) x(j) = uniform_draw(rng, lo, hi);
        out.push_back(std::move(x));
    }
    return out;
}

struct MseStats {
    std::vector<double> per_horizon;  // index i holds horizon l_first + i
    double aggregate = 0.0;           // mean over the horizon range
};

/// Squared Euclidean error |pred_l - truth_l|^2 for l in [l_first, l_last].
inline MseStats mse(const Trajectory& predicted, const Trajectory& truth, std::size_t l_first, std::size_t l_last) {
    if (l_first > l_last) throw InvalidArgument("empty horizon range");
    if (predicted.size() <= l_last || truth.size() <= l_last) throw InvalidArgument("trajectories shorter than horizon range");
    if (predicted.dim() != truth.dim()) throw InvalidArgument("trajectory dimensions differ");
    if (std::abs(predicted.dt - truth.dt) > 1e-9 * std::abs(truth.dt)) throw InvalidArgument("trajectory sampling intervals differ");
    MseStats out;
    double sum = 0.0;
    for (std::size_t l = l_first; l <= l_last; ++l) {
        const double e = (predicted.states[l] - truth.states[l]).squaredNorm();
        out.per_horizon.push_back(e);
        sum += e;
    }
    out.aggregate = sum / static_cast<double>(l_last - l_first + 1);
    return out;
}

// ---------------------------------------------------------------------------
// Duffing

struct DuffingSetup {
    std::vector<Trajectory> training;
    std::vector<BasinLabel> trajectory_labels;  // one per training trajectory
    BasinIndicator indicator;
    std::vector<Trajectory> m1_training;
    std::vector<StateVector> test_initial;
    std::vector<Trajectory> test_truth;
};

inline std::vector<GroupAction> duffing_actions() {
    return {GroupAction::identity(2), GroupAction(-Eigen::MatrixXd::Identity(2, 2))};
}

/// Training set, trajectory labels, indicator and ground-truth test set.
inline DuffingSetup prepare_duffing(const ExperimentConfig& cfg) {
    const auto field = duffing_field(cfg.duffing);
    const auto targets = duffing_attractors(cfg.duffing);
    auto training = generate_duffing_training_set(cfg.duffing, cfg.grid);

    std::vector<BasinLabel> traj_labels;
    std::vector<StateVector> points;
    std::vector<BasinLabel> point_labels;
    std::vector<Trajectory> m1;
    for (const auto& t : training) {
        const auto label = label_trajectory(t, field, targets, cfg.basin_tol, cfg.basin_t_extend);
        traj_labels.push_back(label);
        for (const auto& s : t.states) {
            points.push_back(s);
            point_labels.push_back(label);
        }
        if (label == BasinLabel(1)) m1.push_back(t);
    }
    auto indicator = BasinIndicator::train(points, point_labels, cfg.knn_k);

    auto test_initial = uniform_box_samples(cfg.seed, static_cast<std::size_t>(cfg.test.count), 2,
                                            cfg.test.domain_min, cfg.test.domain_max);
    std::vector<Trajectory> truth;
    truth.reserve(test_initial.size());
    for (const auto& x0 : test_initial) {
        truth.push_back(simulate(field, x0, cfg.test.dt_out, static_cast<std::size_t>(cfg.test.horizon)));
    }
    return DuffingSetup{std::move(training), std::move(traj_labels), std::move(indicator), std::move(m1),
                        std::move(test_initial), std::move(truth)};
}

inline std::vector<StateVector> all_states(std::span<const Trajectory> trajs) {
    std::vector<StateVector> out;
    for (const auto& t : trajs) out.insert(out.end(), t.states.begin(), t.states.end());
    return out;
}

/// Fits EDMD on the given trajectories; rbf centers are placed on their states.
inline KoopmanModel fit_on(std::span<const Trajectory> trajs, const DictionarySpec& spec, double svd_rtol) {
    const auto pairs = build_snapshot_pairs(trajs);
    const auto states = all_states(trajs);
    const auto dict = build_dictionary(spec, pairs.dim(), states);
    return fit(pairs, dict, FitOptions{svd_rtol, 0.0});
}

struct BenchmarkRow {
    std::string method;  // "vanilla" or "symmetry"
    DictionaryKind kind = DictionaryKind::rbf;
    int hyperparam = 0;
    double mse = 0.0;
    std::size_t n_train_pairs = 0;
    bool diverged = false;
};

struct DuffingBenchmark {
    std::vector<BenchmarkRow> rows;
    std::size_t n_vanilla_pairs = 0;
    std::size_t n_symmetry_pairs = 0;
    std::size_t n_m1_trajectories = 0;
};

namespace detail {

template <class Predictor>
BenchmarkRow score_duffing(const DuffingSetup& setup, std::size_t horizon, Predictor&& predictor) {
    BenchmarkRow row;
    double sum = 0.0;
    for (std::size_t i = 0; i < setup.test_initial.size(); ++i) {
        const Trajectory pred = predictor(setup.test_initial[i]);
        sum += mse(pred, setup.test_truth[i], 1, horizon).aggregate;
    }
    row.mse = sum / static_cast<double>(setup.test_initial.size());
    if (!std::isfinite(row.mse)) {
        row.diverged = true;
        row.mse = std::numeric_limits<double>::max();
    }
    return row;
}

} // namespace detail

/// Mean over test trajectories and horizons 1..H of |x_hat_l - x_l|^2 for
/// both methods, one row per (method, dictionary family, hyperparameter).
inline DuffingBenchmark run_duffing_benchmark(const ExperimentConfig& cfg, const DuffingSetup& setup) {
    DuffingBenchmark out;
    out.n_vanilla_pairs = build_snapshot_pairs(setup.training).size();
    out.n_symmetry_pairs = build_snapshot_pairs(setup.m1_training).size();
    out.n_m1_trajectories = setup.m1_training.size();
    const auto horizon = static_cast<std::size_t>(cfg.test.horizon);

    for (const auto& axis : cfg.sweep) {
        for (int value : axis.values) {
            const auto spec = DictionarySpec::with_hyperparameter(axis.kind, value, cfg.fourier_half_width);

            BenchmarkRow vanilla;
            try {
                const auto model = fit_on(setup.training, spec, cfg.svd_rtol);
                vanilla = detail::score_duffing(setup, horizon, [&](const StateVector& x0) {
                    return predict_trajectory(model, x0, horizon);
                });
            } catch (const Error&) {
                vanilla.diverged = true;
                vanilla.mse = std::numeric_limits<double>::max();
            }
            vanilla.method = "vanilla";
            vanilla.kind = axis.kind;
            vanilla.hyperparam = value;
            vanilla.n_train_pairs = out.n_vanilla_pairs;

            BenchmarkRow sym;
            try {
                SymmetryModel model(fit_on(setup.m1_training, spec, cfg.svd_rtol), duffing_actions(), setup.indicator);
                sym = detail::score_duffing(setup, horizon, [&](const StateVector& x0) {
                    return symmetry_predict_trajectory(model, x0, horizon);
                });
            } catch (const Error&) {
                sym.diverged = true;
                sym.mse = std::numeric_limits<double>::max();
            }
            sym.method = "symmetry";
            sym.kind = axis.kind;
            sym.hyperparam = value;
            sym.n_train_pairs = out.n_symmetry_pairs;

            out.rows.push_back(vanilla);
            out.rows.push_back(sym);
        }
    }
    return out;
}

inline DuffingBenchmark run_duffing_benchmark(const ExperimentConfig& cfg) {
    return run_duffing_benchmark(cfg, prepare_duffing(cfg));
}

struct FamilyTally {
    DictionaryKind kind = DictionaryKind::rbf;
    int symmetry_wins = 0;
    int configurations = 0;

    bool majority() const noexcept { return 2 * symmetry_wins > configurations; }
};

/// Per dictionary family: how many swept configurations the symmetry arm wins.
inline std::vector<FamilyTally> tally_symmetry_wins(std::span<const BenchmarkRow> rows) {
    std::vector<FamilyTally> out;
    for (std::size_t i = 0; i + 1 < rows.size(); i += 2) {
        const auto& v = rows[i];
        const auto& s = rows[i + 1];
        auto it = std::find_if(out.begin(), out.end(), [&](const FamilyTally& t) { return t.kind == v.kind; });
        if (it == out.end()) {
            out.push_back({v.kind, 0, 0});
            it = out.end() - 1;
        }
        ++it->configurations;
        const bool wins = !s.diverged && (v.diverged || s.mse < v.mse);
        if (wins) ++it->symmetry_wins;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Lorenz

struct LorenzData {
    Trajectory raw;                       // subsampled training trajectory
    Trajectory test;                      // continuation after the last raw state
    std::vector<Trajectory> raw_set;      // dataset A
    std::vector<Trajectory> augmented;    // dataset B
    std::vector<Trajectory> half_augmented;  // dataset C
};

inline GroupAction lorenz_action() {
    Eigen::MatrixXd g = Eigen::MatrixXd::Identity(3, 3);
    g(0, 0) = -1.0;
    g(1, 1) = -1.0;
    return GroupAction(g);
}

inline LorenzData prepare_lorenz(const LorenzSetup& setup) {
    const auto field = lorenz_field(setup.params);
    const auto stride = static_cast<std::size_t>(setup.stride);
    LorenzData d;
    const Trajectory fine = integrate(field, setup.x0, setup.dt, static_cast<std::size_t>(setup.steps));
    d.raw = subsample(fine, stride);

    Trajectory fine_test = integrate(field, fine.back(), setup.dt, static_cast<std::size_t>(setup.test_steps));
    fine_test.t0 = fine.time(fine.size() - 1);
    Trajectory test = subsample(fine_test, stride);
    test.states.erase(test.states.begin());  // drop the shared starting state
    test.t0 += test.dt;
    d.test = std::move(test);

    const auto gamma = lorenz_action();
    d.raw_set = {d.raw};
    d.augmented = augment(d.raw_set, gamma);
    Trajectory half = d.raw;
    half.states.resize((d.raw.size() + 1) / 2);
    const std::vector<Trajectory> half_set{half};
    d.half_augmented = augment(half_set, gamma);
    return d;
}

struct LorenzRow {
    int horizon = 0;
    double mse_raw = 0.0;
    double mse_aug = 0.0;
    double mse_half_aug = 0.0;
};

struct LorenzTable {
    DictionarySpec dictionary;
    std::vector<LorenzRow> rows;
    double fit_residual_raw = 0.0;
    double fit_residual_aug = 0.0;
    double fit_residual_half_aug = 0.0;

    /// Means over horizons in the upper half of the range: raw, aug, half_aug.
    std::array<double, 3> upper_half_means() const {
        std::array<double, 3> m{0.0, 0.0, 0.0};
        const int max_h = rows.empty() ? 0 : rows.back().horizon;
        int n = 0;
        for (const auto& r : rows) {
            if (2 * r.horizon <= max_h) continue;
            m[0] += r.mse_raw;
            m[1] += r.mse_aug;
            m[2] += r.mse_half_aug;
            ++n;
        }
        for (auto& v : m) v /= std::max(n, 1);
        return m;
    }

    bool ordinal_holds() const {
        const auto m = upper_half_means();
        return m[2] <= m[0] && m[1] <= m[0];
    }
};

namespace detail {

/// MSE(l) averaged over every start index n with n + l inside the test data.
inline std::vector<double> horizon_mse(const KoopmanModel& model, const Trajectory& test, std::size_t horizon) {
    std::vector<double> sum(horizon + 1, 0.0);
    std::vector<std::size_t> count(horizon + 1, 0);
    for (std::size_t n = 0; n + 1 < test.size(); ++n) {
        const std::size_t reach = std::min(horizon, test.size() - 1 - n);
        const Trajectory pred = predict_trajectory(model, test.states[n], reach);
        for (std::size_t l = 1; l <= reach; ++l) {
            sum[l] += (pred.states[l] - test.states[n + l]).squaredNorm();
            ++count[l];
        }
    }
    std::vector<double> out(horizon + 1, 0.0);
    for (std::size_t l = 1; l <= horizon; ++l) {
        out[l] = count[l] ? sum[l] / static_cast<double>(count[l]) : 0.0;
        if (!std::isfinite(out[l])) out[l] = std::numeric_limits<double>::max();
    }
    return out;
}

} // namespace detail

inline LorenzTable run_lorenz_cell(const LorenzData& data, const DictionarySpec& spec, int horizon, double svd_rtol) {
    const auto h = static_cast<std::size_t>(horizon);
    if (data.test.size() <= h) throw InvalidArgument("lorenz test data shorter than the horizon");
    const auto raw = fit_on(data.raw_set, spec, svd_rtol);
    const auto aug = fit_on(data.augmented, spec, svd_rtol);
    const auto half = fit_on(data.half_augmented, spec, svd_rtol);
    const auto e_raw = detail::horizon_mse(raw, data.test, h);
    const auto e_aug = detail::horizon_mse(aug, data.test, h);
    const auto e_half = detail::horizon_mse(half, data.test, h);

    LorenzTable t;
    t.dictionary = spec;
    t.fit_residual_raw = raw.fit_residual();
    t.fit_residual_aug = aug.fit_residual();
    t.fit_residual_half_aug = half.fit_residual();
    for (std::size_t l = 1; l <= h; ++l) t.rows.push_back({static_cast<int>(l), e_raw[l], e_aug[l], e_half[l]});
    return t;
}

struct LorenzBenchmark {
    std::size_t raw_points = 0;
    std::size_t augmented_points = 0;
    std::size_t half_augmented_points = 0;
    LorenzTable primary;
    std::vector<LorenzTable> sweep;
};

inline LorenzBenchmark run_lorenz_benchmark(const ExperimentConfig& cfg) {
    const auto& ls = cfg.lorenz;
    const auto data = prepare_lorenz(ls);
    LorenzBenchmark out;
    out.raw_points = count_states(data.raw_set);
    out.augmented_points = count_states(data.augmented);
    out.half_augmented_points = count_states(data.half_augmented);
    out.primary = run_lorenz_cell(data, ls.dictionary, ls.horizon, cfg.svd_rtol);
    for (int centers : ls.sweep_centers) {
        auto spec = ls.dictionary;
        spec.kind = DictionaryKind::rbf;
        spec.n_centers = centers;
        if (ls.dictionary.kind == DictionaryKind::rbf && ls.dictionary.n_centers == centers) {
            out.sweep.push_back(out.primary);
        } else {
            out.sweep.push_back(run_lorenz_cell(data, spec, ls.horizon, cfg.svd_rtol));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV output

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_duffing_csv(std::ostream& os, std::span<const BenchmarkRow> rows) {
    os << "method,dict_kind,hyperparam,mse,n_train_pairs,diverged\n";
    for (const auto& r : rows) {
        os << r.method << ',' << to_string(r.kind) << ',' << r.hyperparam << ',' << format_double(r.mse) << ','
           << r.n_train_pairs << ',' << (r.diverged ? 1 : 0) << '\n';
    }
}

inline void write_lorenz_csv(std::ostream& os, const LorenzTable& table) {
    os << "horizon,mse_raw,mse_aug,mse_half_aug\n";
    for (const auto& r : table.rows) {
        os << r.horizon << ',' << format_double(r.mse_raw) << ',' << format_double(r.mse_aug) << ','
           << format_double(r.mse_half_aug) << '\n';
    }
}

} // namespace koopman
