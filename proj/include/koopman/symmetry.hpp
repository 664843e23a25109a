#pragma once

// Discrete symmetries among invariant sets.
//
// A SymmetryModel holds a Koopman model fitted on the fundamental domain M1
// only, the actions gamma_1 = I, gamma_2, ..., gamma_J with gamma_j M1 = M_j,
// and an indicator that tells which M_j a state belongs to. A global l-step
// prediction from x is gamma_j C K^l Phi(gamma_j^{-1} x), with j selected by
// the indicator at the initial state.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "koopman/basin.hpp"
#include "koopman/dynamics.hpp"
#include "koopman/edmd.hpp"
#include "koopman/error.hpp"
#include "koopman/group_action.hpp"
#include "koopman/observables.hpp"

namespace koopman {

/// Returns the input trajectories followed by their gamma-images.
inline std::vector<Trajectory> augment(std::span<const Trajectory> trajs, const GroupAction& gamma) {
    std::vector<Trajectory> out(trajs.begin(), trajs.end());
    out.reserve(2 * trajs.size());
    for (const auto& t : trajs) {
        Trajectory image;
        image.dt = t.dt;
        image.t0 = t.t0;
        image.states.reserve(t.size());
        for (const auto& x : t.states) image.states.push_back(gamma.apply(x));
        out.push_back(std::move(image));
    }
    return out;
}

inline std::size_t count_states(std::span<const Trajectory> trajs) {
    return std::accumulate(trajs.begin(), trajs.end(), std::size_t{0},
                           [](std::size_t acc, const Trajectory& t) { return acc + t.size(); });
}

class SymmetryModel {
public:
    SymmetryModel(KoopmanModel base, std::vector<GroupAction> actions, BasinIndicator indicator)
        : base_(std::move(base)), actions_(std::move(actions)), indicator_(std::move(indicator)) {
        if (actions_.empty() || !actions_.front().is_identity()) {
            throw InvalidArgument("the first group action must be the identity");
        }
        for (const auto& a : actions_) {
            if (a.dim() != base_.state_dim()) throw InvalidArgument("group action dimension does not match model");
        }
        if (indicator_.dim() != base_.state_dim()) throw InvalidArgument("indicator dimension does not match model");
        if (indicator_.max_label().value > static_cast<int>(actions_.size())) {
            throw InvalidArgument("indicator has more labels than there are group actions");
        }
    }

    const KoopmanModel& base() const noexcept { return base_; }
    const std::vector<GroupAction>& actions() const noexcept { return actions_; }
    const BasinIndicator& indicator() const noexcept { return indicator_; }
    std::size_t n_sets() const noexcept { return actions_.size(); }

    const GroupAction& action(BasinLabel j) const { return actions_.at(static_cast<std::size_t>(j.value - 1)); }

private:
    KoopmanModel base_;
    std::vector<GroupAction> actions_;
    BasinIndicator indicator_;
};

struct CanonicalState {
    StateVector state;  // gamma_j^{-1} x
    BasinLabel set;     // j
};

inline CanonicalState canonicalize(const SymmetryModel& model, const StateVector& x) {
    const BasinLabel j = model.indicator().classify(x);
    const auto& gamma = model.action(j);
    if (gamma.is_identity()) return {x, j};
    return {gamma.apply_inverse(x), j};
}

inline StateVector symmetry_predict(const SymmetryModel& model, const StateVector& x0, std::size_t l) {
    const auto c = canonicalize(model, x0);
    const auto& gamma = model.action(c.set);
    StateVector y = predict(model.base(), c.state, l);
    if (gamma.is_identity()) return y;
    return gamma.apply(y);
}

/// symmetry_predict() for l = 0..l_max, classifying the initial state once.
inline Trajectory symmetry_predict_trajectory(const SymmetryModel& model, const StateVector& x0, std::size_t l_max) {
    const auto c = canonicalize(model, x0);
    const auto& gamma = model.action(c.set);
    Trajectory out = predict_trajectory(model.base(), c.state, l_max);
    if (!gamma.is_identity()) {
        for (auto& s : out.states) s = gamma.apply(s);
    }
    return out;
}

/// s Phi(s x) with s = 2 chi_{M1}(x) - 1, for a two-set model whose second action is -I.
/// C K^l applied to this vector reproduces symmetry_predict().
inline Eigen::VectorXd compact_duffing_lift(const SymmetryModel& model, const StateVector& x) {
    if (model.base().state_dim() != 2) throw InvalidArgument("compact lift needs a 2-dimensional state");
    if (model.n_sets() != 2) throw InvalidArgument("compact lift needs exactly two invariant sets");
    const auto c = model.actions()[1].scalar();
    if (!c || *c != -1.0) throw InvalidArgument("compact lift needs the second action to be -I");
    const double s = model.indicator().classify(x) == BasinLabel(1) ? 1.0 : -1.0;
    if (s > 0.0) return model.base().dictionary().evaluate(x);
    return -model.base().dictionary().evaluate(-x);
}

/// Observable vector [chi_{M1} Phi_1, ..., chi_{MJ} Phi_J] with one dictionary per invariant set.
class StitchedDictionary {
public:
    StitchedDictionary(std::vector<Dictionary> dicts, BasinIndicator indicator)
        : dicts_(std::move(dicts)), indicator_(std::move(indicator)) {
        if (dicts_.empty()) throw InvalidArgument("stitched dictionary needs at least one block");
        const auto n = dicts_.front().state_dim();
        for (const auto& d : dicts_) {
            if (d.state_dim() != n) throw InvalidArgument("stitched blocks have mixed state dimensions");
            offsets_.push_back(dimension_);
            dimension_ += d.dimension();
        }
        if (indicator_.dim() != n) throw InvalidArgument("indicator dimension does not match dictionaries");
        if (indicator_.max_label().value > static_cast<int>(dicts_.size())) {
            throw InvalidArgument("indicator has more labels than there are dictionary blocks");
        }
    }

    Eigen::Index state_dim() const noexcept { return dicts_.front().state_dim(); }
    Eigen::Index dimension() const noexcept { return dimension_; }
    std::size_t n_blocks() const noexcept { return dicts_.size(); }
    Eigen::Index block_offset(std::size_t j) const { return offsets_.at(j); }
    const Dictionary& block(std::size_t j) const { return dicts_.at(j); }

    Eigen::VectorXd evaluate(const StateVector& x) const {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(dimension_);
        evaluate_into(x, out);
        return out;
    }

    void evaluate_into(const StateVector& x, Eigen::Ref<Eigen::VectorXd> out) const {
        out.setZero();
        const auto j = static_cast<std::size_t>(indicator_.classify(x).value - 1);
        dicts_[j].evaluate_into(x, out.segment(offsets_[j], dicts_[j].dimension()));
    }

    Eigen::MatrixXd lift(std::span<const StateVector> states) const {
        Eigen::MatrixXd out(dimension_, static_cast<Eigen::Index>(states.size()));
        for (std::size_t i = 0; i < states.size(); ++i) evaluate_into(states[i], out.col(static_cast<Eigen::Index>(i)));
        return out;
    }

private:
    std::vector<Dictionary> dicts_;
    BasinIndicator indicator_;
    std::vector<Eigen::Index> offsets_;
    Eigen::Index dimension_ = 0;
};

struct CommutationCheck {
    bool commutes = false;
    double max_residual = 0.0;
};

/// Action of gamma on a lifted vector: scalar actions c I scale the whole
/// vector; any other action acts on the identity block (entries 1..n) only.
inline Eigen::VectorXd lifted_action(const GroupAction& gamma, const Eigen::VectorXd& v) {
    if (const auto c = gamma.scalar()) return *c * v;
    Eigen::VectorXd out = v;
    out.segment(1, gamma.dim()) = gamma.matrix() * v.segment(1, gamma.dim());
    return out;
}

/// Tests gamma C K^l v == C K^l (gamma v) on v = Phi(gamma^{-1} x) for each sample x,
/// i.e. whether the J*D-dimensional global lift collapses to D dimensions.
inline CommutationCheck check_commutation(const GroupAction& gamma, const KoopmanModel& model, std::size_t l,
                                          std::span<const StateVector> samples, double tol = 1e-10) {
    if (gamma.dim() != model.state_dim()) throw InvalidArgument("group action dimension does not match model");
    if (samples.empty()) throw InvalidArgument("commutation check needs at least one sample");
    CommutationCheck out;
    for (const auto& x : samples) {
        Eigen::VectorXd v = model.dictionary().evaluate(gamma.apply_inverse(x));
        Eigen::VectorXd w = lifted_action(gamma, v);
        for (std::size_t i = 0; i < l; ++i) {
            model.step(v);
            model.step(w);
        }
        const StateVector lhs = gamma.apply(model.project(v));
        const StateVector rhs = model.project(w);
        out.max_residual = std::max(out.max_residual, (lhs - rhs).cwiseAbs().maxCoeff());
    }
    out.commutes = out.max_residual <= tol;
    return out;
}

} // namespace koopman
