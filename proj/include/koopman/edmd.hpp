#pragma once

// Extended dynamic mode decomposition.
//
// Lifted data are laid out with observables as rows and snapshots as
// columns, so K acts on column vectors: Phi(x_{n+1}) ~= K Phi(x_n).
// K and the measurement matrix C (x ~= C Phi(x)) are least-squares solutions
// through a truncated SVD pseudoinverse of the lifted snapshot matrix.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "koopman/dynamics.hpp"
#include "koopman/error.hpp"
#include "koopman/observables.hpp"

namespace koopman {

struct SnapshotPairs {
    std::vector<StateVector> x;  // states x_n
    std::vector<StateVector> y;  // successors x_{n+1}
    double dt = 1.0;

    std::size_t size() const noexcept { return x.size(); }
    Eigen::Index dim() const noexcept { return x.empty() ? 0 : x.front().size(); }
};

/// Concatenates consecutive-state pairs of every trajectory. Pairs never
/// straddle two trajectories.
inline SnapshotPairs build_snapshot_pairs(std::span<const Trajectory> trajs) {
    if (trajs.empty()) throw InvalidArgument("no trajectories given");
    SnapshotPairs pairs;
    pairs.dt = trajs.front().dt;
    const auto n = trajs.front().dim();
    for (const auto& t : trajs) {
        validate(t);
        if (t.size() < 2) throw InvalidArgument("every trajectory needs at least two states");
        if (t.dim() != n) throw InvalidArgument("trajectories have mixed state dimensions");
        if (std::abs(t.dt - pairs.dt) > 1e-9 * pairs.dt) throw InvalidArgument("trajectories have mixed sampling intervals");
        for (std::size_t i = 0; i + 1 < t.size(); ++i) {
            pairs.x.push_back(t.states[i]);
            pairs.y.push_back(t.states[i + 1]);
        }
    }
    return pairs;
}

struct FitOptions {
    double svd_rtol = 1e-10;  // singular values below svd_rtol * s_max are dropped
    double ridge = 0.0;       // > 0 switches to a Tikhonov-regularized normal-equation solve
};

struct FitMetadata {
    std::size_t n_pairs = 0;
    Eigen::Index rank = 0;
    double lifted_condition = 0.0;  // s_max / s_min of the lifted data matrix
    double dt = 1.0;
    double svd_rtol = 1e-10;
    double ridge = 0.0;
};

class KoopmanModel {
public:
    /// Eigenvector matrices above this condition number are treated as singular.
    static constexpr double kMaxEigenvectorCondition = 1e12;

    KoopmanModel(Eigen::MatrixXd K, Eigen::MatrixXd C, Dictionary dict, FitMetadata meta = {},
                 double fit_residual = 0.0, double reconstruction_residual = 0.0)
        : K_(std::move(K)),
          C_(std::move(C)),
          dict_(std::move(dict)),
          meta_(meta),
          fit_residual_(fit_residual),
          reconstruction_residual_(reconstruction_residual) {
        const auto D = dict_.dimension();
        if (K_.rows() != D || K_.cols() != D) throw InvalidArgument("K must be D x D");
        if (C_.rows() != dict_.state_dim() || C_.cols() != D) throw InvalidArgument("C must be n x D");
        decompose();
    }

    const Eigen::MatrixXd& K() const noexcept { return K_; }
    const Eigen::MatrixXd& C() const noexcept { return C_; }
    const Dictionary& dictionary() const noexcept { return dict_; }
    const FitMetadata& metadata() const noexcept { return meta_; }
    Eigen::Index state_dim() const noexcept { return dict_.state_dim(); }
    double dt() const noexcept { return meta_.dt; }

    /// RMS over training pairs of |Phi(y) - K Phi(x)|.
    double fit_residual() const noexcept { return fit_residual_; }
    /// RMS over training states of |x - C Phi(x)|.
    double reconstruction_residual() const noexcept { return reconstruction_residual_; }

    const Eigen::VectorXcd& eigenvalues() const noexcept { return eigenvalues_; }
    const Eigen::MatrixXcd& eigenvectors() const noexcept { return eigenvectors_; }
    double eigenvector_condition() const noexcept { return eigenvector_condition_; }
    bool has_invertible_eigenvectors() const noexcept { return eigenvector_inverse_.has_value(); }

    const Eigen::MatrixXcd& eigenvector_inverse() const {
        if (!eigenvector_inverse_) {
            throw IllConditionedEigendecomposition("eigenvector matrix is numerically singular (condition " +
                                                   std::to_string(eigenvector_condition_) + ")");
        }
        return *eigenvector_inverse_;
    }

    double spectral_radius() const { return eigenvalues_.cwiseAbs().maxCoeff(); }

    /// Advances a lifted vector one step: v <- K v.
    void step(Eigen::VectorXd& v) const {
        Eigen::VectorXd next = K_ * v;
        v.swap(next);
    }

    StateVector project(const Eigen::VectorXd& v) const { return C_ * v; }

private:
    void decompose() {
        Eigen::EigenSolver<Eigen::MatrixXd> es(K_, true);
        if (es.info() != Eigen::Success) {
            eigenvalues_ = Eigen::VectorXcd::Constant(K_.rows(), std::numeric_limits<double>::quiet_NaN());
            eigenvectors_ = Eigen::MatrixXcd::Zero(K_.rows(), K_.cols());
            eigenvector_condition_ = std::numeric_limits<double>::infinity();
            return;
        }
        eigenvalues_ = es.eigenvalues();
        eigenvectors_ = es.eigenvectors();
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(eigenvectors_);
        const auto& s = svd.singularValues();
        const double smin = s(s.size() - 1);
        eigenvector_condition_ = smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
        if (eigenvector_condition_ <= kMaxEigenvectorCondition) {
            eigenvector_inverse_ = Eigen::FullPivLU<Eigen::MatrixXcd>(eigenvectors_).inverse();
        }
    }

    Eigen::MatrixXd K_;
    Eigen::MatrixXd C_;
    Dictionary dict_;
    FitMetadata meta_;
    double fit_residual_ = 0.0;
    double reconstruction_residual_ = 0.0;
    Eigen::VectorXcd eigenvalues_;
    Eigen::MatrixXcd eigenvectors_;
    std::optional<Eigen::MatrixXcd> eigenvector_inverse_;
    double eigenvector_condition_ = 0.0;
};

namespace detail {

inline Eigen::MatrixXd stack_states(std::span<const StateVector> states) {
    Eigen::MatrixXd out(states.front().size(), static_cast<Eigen::Index>(states.size()));
    for (std::size_t j = 0; j < states.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = states[j];
    return out;
}

inline double rms_column_norm(const Eigen::MatrixXd& residual) {
    if (residual.cols() == 0) return 0.0;
    return std::sqrt(residual.squaredNorm() / static_cast<double>(residual.cols()));
}

} // namespace detail

/// Least-squares fit of K and C. Rank-deficient lifted data yield the
/// minimum-norm solution.
inline KoopmanModel fit(const SnapshotPairs& pairs, const Dictionary& dict, const FitOptions& opts = {}) {
    if (pairs.size() == 0 || pairs.x.size() != pairs.y.size()) throw InvalidArgument("need at least one snapshot pair");
    if (!(opts.svd_rtol > 0.0 && opts.svd_rtol < 1.0)) throw InvalidArgument("svd_rtol must lie in (0, 1)");
    if (opts.ridge < 0.0) throw InvalidArgument("ridge must be nonnegative");
    if (pairs.dim() != dict.state_dim()) throw InvalidArgument("snapshot dimension does not match dictionary");

    const Eigen::MatrixXd lifted_x = dict.lift(pairs.x);
    const Eigen::MatrixXd lifted_y = dict.lift(pairs.y);
    const Eigen::MatrixXd states = detail::stack_states(pairs.x);

    Eigen::BDCSVD<Eigen::MatrixXd> svd(lifted_x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const double smax = s.size() > 0 ? s(0) : 0.0;
    Eigen::Index rank = 0;
    while (rank < s.size() && smax > 0.0 && s(rank) > opts.svd_rtol * smax) ++rank;
    if (rank == 0) throw DegenerateDictionary("every singular value of the lifted data was truncated");

    FitMetadata meta;
    meta.n_pairs = pairs.size();
    meta.rank = rank;
    meta.dt = pairs.dt;
    meta.svd_rtol = opts.svd_rtol;
    meta.ridge = opts.ridge;
    const double smin = s(s.size() - 1);
    meta.lifted_condition = (smin > 0.0 && s.size() == lifted_x.rows()) ? smax / smin
                                                                       : std::numeric_limits<double>::infinity();

    Eigen::MatrixXd K;
    Eigen::MatrixXd C;
    if (opts.ridge > 0.0) {
        const Eigen::MatrixXd gram =
            lifted_x * lifted_x.transpose() +
            opts.ridge * Eigen::MatrixXd::Identity(lifted_x.rows(), lifted_x.rows());
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
        K = ldlt.solve(lifted_x * lifted_y.transpose()).transpose();
        C = ldlt.solve(lifted_x * states.transpose()).transpose();
    } else {
        // pinv(lifted_x) = V_r diag(1/s_r) U_r^T
        const Eigen::MatrixXd v_scaled = svd.matrixV().leftCols(rank) * s.head(rank).cwiseInverse().asDiagonal();
        const Eigen::MatrixXd u_t = svd.matrixU().leftCols(rank).transpose();
        K = (lifted_y * v_scaled) * u_t;
        C = (states * v_scaled) * u_t;
    }

    const double fit_residual = detail::rms_column_norm(lifted_y - K * lifted_x);
    const double recon_residual = detail::rms_column_norm(states - C * lifted_x);
    return KoopmanModel(std::move(K), std::move(C), dict, meta, fit_residual, recon_residual);
}

/// Least-squares C with states ~= C lifted, through the same truncated pseudoinverse as fit().
inline Eigen::MatrixXd fit_measurement_matrix(const Eigen::MatrixXd& lifted, const Eigen::MatrixXd& states,
                                              double svd_rtol = 1e-10) {
    if (lifted.cols() != states.cols() || lifted.cols() == 0) throw InvalidArgument("lifted data and states differ in count");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(lifted, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const double smax = s.size() > 0 ? s(0) : 0.0;
    Eigen::Index rank = 0;
    while (rank < s.size() && smax > 0.0 && s(rank) > svd_rtol * smax) ++rank;
    if (rank == 0) throw DegenerateDictionary("every singular value of the lifted data was truncated");
    const Eigen::MatrixXd v_scaled = svd.matrixV().leftCols(rank) * s.head(rank).cwiseInverse().asDiagonal();
    return (states * v_scaled) * svd.matrixU().leftCols(rank).transpose();
}

/// Psi(x) = P^{-1} Phi(x).
inline Eigen::VectorXcd eigenfunctions(const KoopmanModel& model, const StateVector& x) {
    const Eigen::VectorXcd phi = model.dictionary().evaluate(x).cast<std::complex<double>>();
    return model.eigenvector_inverse() * phi;
}

/// Koopman modes B = C P, so that x = B Psi(x).
inline Eigen::MatrixXcd koopman_modes(const KoopmanModel& model) {
    model.eigenvector_inverse();  // throws when the decomposition is unusable
    return model.C().cast<std::complex<double>>() * model.eigenvectors();
}

/// C K^l Phi(x0), with K^l applied by repeated real multiplication.
inline StateVector predict(const KoopmanModel& model, const StateVector& x0, std::size_t l) {
    Eigen::VectorXd v = model.dictionary().evaluate(x0);
    for (std::size_t i = 0; i < l; ++i) model.step(v);
    return model.project(v);
}

/// predict() for l = 0..l_max, lifting once and stepping in lifted space.
inline Trajectory predict_trajectory(const KoopmanModel& model, const StateVector& x0, std::size_t l_max) {
    Trajectory out;
    out.dt = model.dt();
    out.states.reserve(l_max + 1);
    Eigen::VectorXd v = model.dictionary().evaluate(x0);
    out.states.push_back(model.project(v));
    for (std::size_t l = 1; l <= l_max; ++l) {
        model.step(v);
        out.states.push_back(model.project(v));
    }
    return out;
}

} // namespace koopman
