#pragma once

// Benchmark vector fields, a fixed-step RK4 integrator and trajectory
// generation for the Duffing and Lorenz experiments.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "koopman/error.hpp"
#include "koopman/group_action.hpp"

namespace koopman {

using VectorField = std::function<StateVector(const StateVector&)>;

/// Internal RK4 step used by all trajectory generation.
inline constexpr double kInternalStep = 0.005;
/// Any |coordinate| above this aborts integration.
inline constexpr double kDivergenceBound = 1e6;

struct Trajectory {
    std::vector<StateVector> states;
    double dt = 1.0;
    double t0 = 0.0;

    std::size_t size() const noexcept { return states.size(); }
    Eigen::Index dim() const noexcept { return states.empty() ? 0 : states.front().size(); }
    double time(std::size_t i) const noexcept { return t0 + static_cast<double>(i) * dt; }
    const StateVector& back() const { return states.back(); }
};

inline void validate(const Trajectory& traj) {
    if (traj.states.empty()) throw InvalidArgument("trajectory must contain at least one state");
    if (!(traj.dt > 0.0) || !std::isfinite(traj.dt)) throw InvalidArgument("trajectory dt must be positive");
    const auto n = traj.states.front().size();
    for (const auto& s : traj.states) {
        if (s.size() != n) throw InvalidArgument("trajectory states have mixed dimensions");
        if (!s.allFinite()) throw InvalidArgument("trajectory contains non-finite states");
    }
}

struct DuffingParams {
    double delta = 0.5;
    double beta = -1.0;
    double alpha = 1.0;
};

struct LorenzParams {
    double sigma = 10.0;
    double rho = 28.0;
    double beta = 8.0 / 3.0;
};

inline StateVector duffing_rhs(const StateVector& x, const DuffingParams& p = {}) {
    if (x.size() != 2) throw InvalidArgument("duffing state must be 2-dimensional");
    StateVector dx(2);
    dx(0) = x(1);
    dx(1) = -p.delta * x(1) - x(0) * (p.beta + p.alpha * x(0) * x(0));
    return dx;
}

inline StateVector lorenz_rhs(const StateVector& x, const LorenzParams& p = {}) {
    if (x.size() != 3) throw InvalidArgument("lorenz state must be 3-dimensional");
    StateVector dx(3);
    dx(0) = p.sigma * (x(1) - x(0));
    dx(1) = x(0) * (p.rho - x(2)) - x(1);
    dx(2) = x(0) * x(1) - p.beta * x(2);
    return dx;
}

inline VectorField duffing_field(DuffingParams p = {}) {
    return [p](const StateVector& x) { return duffing_rhs(x, p); };
}

inline VectorField lorenz_field(LorenzParams p = {}) {
    return [p](const StateVector& x) { return lorenz_rhs(x, p); };
}

/// One classical fourth-order Runge-Kutta step.
template <class Field>
StateVector rk4_step(const Field& rhs, const StateVector& x, double h) {
    const StateVector k1 = rhs(x);
    const StateVector k2 = rhs(x + (0.5 * h) * k1);
    const StateVector k3 = rhs(x + (0.5 * h) * k2);
    const StateVector k4 = rhs(x + h * k3);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

namespace detail {

inline bool diverged(const StateVector& x) {
    return !x.allFinite() || x.cwiseAbs().maxCoeff() > kDivergenceBound;
}

inline void check_step_args(const StateVector& x0, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("integration step must be positive");
    if (x0.size() == 0 || !x0.allFinite()) throw InvalidArgument("initial state must be finite and non-empty");
}

} // namespace detail

/// Integrates n_steps RK4 steps of size dt; the result holds n_steps + 1 states.
template <class Field>
Trajectory integrate(const Field& rhs, const StateVector& x0, double dt, std::size_t n_steps) {
    detail::check_step_args(x0, dt);
    Trajectory traj;
    traj.dt = dt;
    traj.states.reserve(n_steps + 1);
    traj.states.push_back(x0);
    for (std::size_t k = 1; k <= n_steps; ++k) {
        StateVector next = rk4_step(rhs, traj.states.back(), dt);
        if (detail::diverged(next)) throw IntegrationDiverged(k);
        traj.states.push_back(std::move(next));
    }
    return traj;
}

/// Same recurrence as integrate() but keeps only the final state.
template <class Field>
StateVector advance(const Field& rhs, const StateVector& x0, double dt, std::size_t n_steps) {
    detail::check_step_args(x0, dt);
    StateVector x = x0;
    for (std::size_t k = 1; k <= n_steps; ++k) {
        x = rk4_step(rhs, x, dt);
        if (detail::diverged(x)) throw IntegrationDiverged(k);
    }
    return x;
}

inline Trajectory subsample(const Trajectory& traj, std::size_t stride) {
    if (stride == 0) throw InvalidArgument("subsample stride must be positive");
    Trajectory out;
    out.dt = traj.dt * static_cast<double>(stride);
    out.t0 = traj.t0;
    for (std::size_t i = 0; i < traj.states.size(); i += stride) out.states.push_back(traj.states[i]);
    return out;
}

/// Number of internal steps per output interval so that the step does not exceed max_step.
inline std::size_t substeps_for(double dt_out, double max_step = kInternalStep) {
    if (!(dt_out > 0.0) || !(max_step > 0.0)) throw InvalidArgument("sampling intervals must be positive");
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(dt_out / max_step - 1e-9)));
}

/// Integrates with the internal step and emits n_out + 1 states spaced dt_out apart.
template <class Field>
Trajectory simulate(const Field& rhs, const StateVector& x0, double dt_out, std::size_t n_out,
                    double max_step = kInternalStep) {
    const std::size_t sub = substeps_for(dt_out, max_step);
    const double h = dt_out / static_cast<double>(sub);
    Trajectory fine = integrate(rhs, x0, h, n_out * sub);
    Trajectory out = subsample(fine, sub);
    out.dt = dt_out;
    return out;
}

struct EquivarianceCheck {
    bool equivariant = false;
    double max_residual = 0.0;
};

/// Max-norm residual of F(gamma x) - gamma F(x) over the samples.
template <class Field>
EquivarianceCheck check_equivariance(const Field& rhs, const GroupAction& gamma,
                                     std::span<const StateVector> samples, double tol) {
    if (samples.empty()) throw InvalidArgument("equivariance check needs at least one sample");
    EquivarianceCheck out;
    for (const auto& x : samples) {
        if (x.size() != gamma.dim()) throw InvalidArgument("sample dimension does not match group action");
        const StateVector lhs = rhs(gamma.apply(x));
        const StateVector rhs_side = gamma.apply(rhs(x));
        out.max_residual = std::max(out.max_residual, (lhs - rhs_side).cwiseAbs().maxCoeff());
    }
    out.equivariant = out.max_residual <= tol;
    return out;
}

/// Initial-condition layout for the 49-trajectory Duffing training set.
struct DuffingGridConfig {
    int n_upper = 25;            // x1 values paired with x2 = x2_upper
    int n_lower = 24;            // x1 values paired with x2 = x2_lower
    double x1_min = -2.0;
    double x1_max = 2.0;
    double x2_upper = 2.0;
    double x2_lower = -2.0;
    std::vector<double> refinement{-0.085, -0.08, -0.075};
    std::size_t refinement_start = 2;  // zero-based: replaces the 3rd, 4th and 5th values
    bool refine_lower_row = false;  // the basin boundary crosses the x2 = +2 row near x1 = -0.0756
    double t_final = 10.0;
    double dt_out = 0.2;
};

inline std::vector<double> linspace(double lo, double hi, int n) {
    if (n < 1) throw InvalidArgument("linspace needs at least one point");
    std::vector<double> v(static_cast<std::size_t>(n));
    if (n == 1) {
        v[0] = lo;
        return v;
    }
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = lo + step * static_cast<double>(i);
    v.back() = hi;
    return v;
}

inline std::vector<StateVector> duffing_initial_conditions(const DuffingGridConfig& grid = {}) {
    auto upper = linspace(grid.x1_min, grid.x1_max, grid.n_upper);
    auto lower = linspace(grid.x1_min, grid.x1_max, grid.n_lower);
    auto& refined = grid.refine_lower_row ? lower : upper;
    if (grid.refinement_start + grid.refinement.size() > refined.size()) {
        throw InvalidArgument("refinement does not fit into the initial-condition row");
    }
    std::copy(grid.refinement.begin(), grid.refinement.end(),
              refined.begin() + static_cast<std::ptrdiff_t>(grid.refinement_start));

    std::vector<StateVector> ics;
    ics.reserve(upper.size() + lower.size());
    for (double x1 : upper) ics.push_back(Eigen::Vector2d(x1, grid.x2_upper));
    for (double x1 : lower) ics.push_back(Eigen::Vector2d(x1, grid.x2_lower));
    return ics;
}

inline std::vector<Trajectory> generate_duffing_training_set(const DuffingParams& p = {},
                                                             const DuffingGridConfig& grid = {}) {
    const auto n_out = static_cast<std::size_t>(std::llround(grid.t_final / grid.dt_out));
    const auto field = duffing_field(p);
    std::vector<Trajectory> out;
    for (const auto& x0 : duffing_initial_conditions(grid)) out.push_back(simulate(field, x0, grid.dt_out, n_out));
    return out;
}

} // namespace koopman
