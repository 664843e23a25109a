#pragma once

// Approximation of invariant-set indicator functions. Ground truth comes from
// integrating a state forward and matching the endpoint to an attractor; the
// fast approximation is a k-nearest-neighbor vote over labeled states.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "koopman/dynamics.hpp"
#include "koopman/error.hpp"

namespace koopman {

/// 1-based index of an invariant set M_j.
struct BasinLabel {
    int value = 1;

    constexpr BasinLabel() = default;
    constexpr explicit BasinLabel(int v) : value(v) {}
    friend constexpr auto operator<=>(BasinLabel, BasinLabel) = default;
};

/// Stable fixed points (+-sqrt(-beta/alpha), 0); label 1 is the positive one.
inline std::vector<StateVector> duffing_attractors(const DuffingParams& p = {}) {
    const double r = p.beta / p.alpha;
    if (!(r < 0.0)) throw InvalidArgument("duffing parameters do not give two off-origin fixed points");
    const double a = std::sqrt(-r);
    return {Eigen::Vector2d(a, 0.0), Eigen::Vector2d(-a, 0.0)};
}

namespace detail {

inline BasinLabel match_target(const StateVector& end, std::span<const StateVector> targets, double tol) {
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (targets[i].size() != end.size()) throw InvalidArgument("attractor target dimension mismatch");
        const double d = (end - targets[i]).norm();
        if (d < best_dist) {
            best_dist = d;
            best = i;
        }
    }
    if (!(best_dist <= tol)) {
        throw UnresolvedBasin("endpoint is " + std::to_string(best_dist) + " from the nearest attractor (tol " +
                              std::to_string(tol) + ")");
    }
    return BasinLabel(static_cast<int>(best) + 1);
}

} // namespace detail

/// Integrates x0 to t_final with RK4 and returns the label of the nearest target within tol.
template <class Field>
BasinLabel label_by_integration(const StateVector& x0, const Field& rhs, std::span<const StateVector> targets,
                                double t_final, double tol, double dt = kInternalStep) {
    if (!(t_final > 0.0)) throw InvalidArgument("t_final must be positive");
    if (targets.empty()) throw InvalidArgument("need at least one attractor target");
    const auto steps = static_cast<std::size_t>(std::ceil(t_final / dt - 1e-9));
    return detail::match_target(advance(rhs, x0, t_final / static_cast<double>(steps), steps), targets, tol);
}

/// Labels a trajectory by its endpoint, integrating further (up to total
/// time t_extend) when the endpoint has not yet reached a target.
template <class Field>
BasinLabel label_trajectory(const Trajectory& traj, const Field& rhs, std::span<const StateVector> targets,
                            double tol, double t_extend = 50.0) {
    validate(traj);
    try {
        return detail::match_target(traj.back(), targets, tol);
    } catch (const UnresolvedBasin&) {
        const double elapsed = traj.dt * static_cast<double>(traj.size() - 1);
        if (!(t_extend > elapsed)) throw;
        return label_by_integration(traj.back(), rhs, targets, t_extend - elapsed, tol);
    }
}

class BasinIndicator {
public:
    static constexpr int kDefaultK = 5;

    static BasinIndicator train(std::span<const StateVector> points, std::span<const BasinLabel> labels,
                                int k = kDefaultK) {
        if (points.empty()) throw InvalidArgument("indicator needs training points");
        if (points.size() != labels.size()) throw InvalidArgument("points and labels differ in length");
        if (k < 1 || k % 2 == 0) throw InvalidArgument("k must be a positive odd integer");
        if (static_cast<std::size_t>(k) > points.size()) throw InvalidArgument("k exceeds the number of training points");

        BasinIndicator ind;
        ind.k_ = k;
        const auto n = points.front().size();
        ind.points_.resize(n, static_cast<Eigen::Index>(points.size()));
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (points[i].size() != n) throw InvalidArgument("training points have mixed dimensions");
            if (!points[i].allFinite()) throw InvalidArgument("training points must be finite");
            if (labels[i].value < 1) throw InvalidArgument("basin labels are 1-based");
            ind.points_.col(static_cast<Eigen::Index>(i)) = points[i];
        }
        ind.labels_.assign(labels.begin(), labels.end());
        const auto [lo, hi] = std::minmax_element(ind.labels_.begin(), ind.labels_.end());
        if (*lo == *hi) throw InvalidArgument("training set contains a single basin label");
        ind.max_label_ = *hi;
        return ind;
    }

    int k() const noexcept { return k_; }
    Eigen::Index dim() const noexcept { return points_.rows(); }
    std::size_t size() const noexcept { return labels_.size(); }
    BasinLabel max_label() const noexcept { return max_label_; }
    const Eigen::MatrixXd& points() const noexcept { return points_; }
    const std::vector<BasinLabel>& labels() const noexcept { return labels_; }

    /// Majority label of the k nearest training points (Euclidean). Distance
    /// ties prefer the lower training index; vote ties prefer the lower label.
    BasinLabel classify(const StateVector& x) const {
        if (x.size() != dim()) throw InvalidArgument("state dimension does not match indicator");
        const auto kk = static_cast<std::size_t>(k_);
        std::vector<double> best_d(kk, std::numeric_limits<double>::infinity());
        std::vector<std::size_t> best_i(kk, 0);
        const Eigen::VectorXd d2 = (points_.colwise() - x).colwise().squaredNorm().transpose();
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            const double d = d2(static_cast<Eigen::Index>(i));
            if (!(d < best_d[kk - 1])) continue;
            std::size_t pos = kk - 1;
            while (pos > 0 && d < best_d[pos - 1]) {
                best_d[pos] = best_d[pos - 1];
                best_i[pos] = best_i[pos - 1];
                --pos;
            }
            best_d[pos] = d;
            best_i[pos] = i;
        }
        std::map<BasinLabel, int> votes;
        for (std::size_t j = 0; j < kk; ++j) ++votes[labels_[best_i[j]]];
        BasinLabel winner = votes.begin()->first;
        int most = 0;
        for (const auto& [label, count] : votes) {
            if (count > most) {
                most = count;
                winner = label;
            }
        }
        return winner;
    }

    /// chi_{M_j}(x): 1 when x is classified into set j.
    double indicator(const StateVector& x, BasinLabel j) const { return classify(x) == j ? 1.0 : 0.0; }

private:
    BasinIndicator() = default;

    int k_ = kDefaultK;
    Eigen::MatrixXd points_;
    std::vector<BasinLabel> labels_;
    BasinLabel max_label_{1};
};

} // namespace koopman
