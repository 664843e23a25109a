#pragma once

#include <cmath>
#include <optional>
#include <utility>

#include <Eigen/Dense>

#include "koopman/error.hpp"

namespace koopman {

using StateVector = Eigen::VectorXd;

/// Invertible matrix representation of a discrete symmetry acting on states.
class GroupAction {
public:
    static constexpr double kInverseTolerance = 1e-12;
    static constexpr int kMaxOrderSearch = 64;

    explicit GroupAction(Eigen::MatrixXd matrix) : matrix_(std::move(matrix)) {
        if (matrix_.rows() == 0 || matrix_.rows() != matrix_.cols()) {
            throw InvalidArgument("group action must be a non-empty square matrix");
        }
        if (!matrix_.allFinite()) {
            throw InvalidArgument("group action has non-finite entries");
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(matrix_);
        if (!lu.isInvertible()) {
            throw InvalidArgument("group action matrix is singular");
        }
        inverse_ = lu.inverse();
        const auto eye = Eigen::MatrixXd::Identity(dim(), dim());
        if (((matrix_ * inverse_) - eye).cwiseAbs().maxCoeff() > kInverseTolerance) {
            throw InvalidArgument("group action matrix is too ill-conditioned to invert");
        }
        order_ = find_order();
    }

    static GroupAction identity(Eigen::Index n) { return GroupAction(Eigen::MatrixXd::Identity(n, n)); }

    Eigen::Index dim() const noexcept { return matrix_.rows(); }
    const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }
    const Eigen::MatrixXd& inverse() const noexcept { return inverse_; }

    /// Smallest m with gamma^m = I, if one exists up to kMaxOrderSearch.
    std::optional<int> order() const noexcept { return order_; }

    bool is_identity() const noexcept { return order_ == 1; }

    /// The scalar c when the action is c * I, otherwise empty.
    std::optional<double> scalar() const {
        const double c = matrix_(0, 0);
        const auto scaled = (c * Eigen::MatrixXd::Identity(dim(), dim())).eval();
        if ((matrix_ - scaled).cwiseAbs().maxCoeff() == 0.0) return c;
        return std::nullopt;
    }

    StateVector apply(const StateVector& x) const {
        check_dim(x);
        return matrix_ * x;
    }

    StateVector apply_inverse(const StateVector& x) const {
        check_dim(x);
        return inverse_ * x;
    }

private:
    void check_dim(const StateVector& x) const {
        if (x.size() != dim()) throw InvalidArgument("state dimension does not match group action");
    }

    std::optional<int> find_order() const {
        const auto eye = Eigen::MatrixXd::Identity(dim(), dim());
        Eigen::MatrixXd power = matrix_;
        for (int m = 1; m <= kMaxOrderSearch; ++m) {
            if ((power - eye).cwiseAbs().maxCoeff() <= kInverseTolerance) return m;
            power = (power * matrix_).eval();
        }
        return std::nullopt;
    }

    Eigen::MatrixXd matrix_;
    Eigen::MatrixXd inverse_;
    std::optional<int> order_;
};

} // namespace koopman
