#pragma once

// Observable dictionaries Phi(x). Every dictionary starts with the constant
// observable followed by the identity coordinates x1..xn, then the
// family-specific observables in canonical order:
//   polynomial  monomials x^a with 2 <= |a| <= p, graded lexicographic
//   rbf         exp(-|x - c_k|^2 / (2 w^2)) per center k
//   fourier     for each coordinate i, for k = 1..n_pairs:
//               sin(k pi x_i / L), cos(k pi x_i / L)

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "koopman/error.hpp"
#include "koopman/group_action.hpp"

namespace koopman {

enum class DictionaryKind { polynomial, rbf, fourier };

inline std::string to_string(DictionaryKind kind) {
    switch (kind) {
        case DictionaryKind::polynomial: return "polynomial";
        case DictionaryKind::rbf: return "rbf";
        case DictionaryKind::fourier: return "fourier";
    }
    return "unknown";
}

inline DictionaryKind parse_dictionary_kind(const std::string& s) {
    if (s == "polynomial") return DictionaryKind::polynomial;
    if (s == "rbf") return DictionaryKind::rbf;
    if (s == "fourier") return DictionaryKind::fourier;
    throw InvalidArgument("unknown dictionary kind '" + s + "'");
}

/// Unresolved dictionary description as it appears in configuration files.
/// RBF centers are placed from data when the dictionary is built.
struct DictionarySpec {
    DictionaryKind kind = DictionaryKind::polynomial;
    int max_order = 1;
    int n_centers = 10;
    int n_pairs = 1;
    double box_half_width = 2.0;
    std::optional<double> width;  // rbf width override; median pairwise distance otherwise

    /// The value swept by the benchmark harness for this family.
    int hyperparameter() const noexcept {
        switch (kind) {
            case DictionaryKind::polynomial: return max_order;
            case DictionaryKind::rbf: return n_centers;
            case DictionaryKind::fourier: return n_pairs;
        }
        return 0;
    }

    static DictionarySpec with_hyperparameter(DictionaryKind kind, int value, double box_half_width = 2.0) {
        DictionarySpec spec;
        spec.kind = kind;
        spec.box_half_width = box_half_width;
        switch (kind) {
            case DictionaryKind::polynomial: spec.max_order = value; break;
            case DictionaryKind::rbf: spec.n_centers = value; break;
            case DictionaryKind::fourier: spec.n_pairs = value; break;
        }
        return spec;
    }
};

inline std::size_t binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::size_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

namespace detail {

inline void append_exponents(std::vector<int>& prefix, int remaining, std::size_t n,
                             std::vector<std::vector<int>>& out) {
    if (prefix.size() + 1 == n) {
        prefix.push_back(remaining);
        out.push_back(prefix);
        prefix.pop_back();
        return;
    }
    for (int a = remaining; a >= 0; --a) {
        prefix.push_back(a);
        append_exponents(prefix, remaining - a, n, out);
        prefix.pop_back();
    }
}

} // namespace detail

/// Exponent vectors of total degree 2..max_order in graded lexicographic order.
inline std::vector<std::vector<int>> graded_lex_exponents(std::size_t n, int max_order) {
    std::vector<std::vector<int>> out;
    std::vector<int> prefix;
    for (int degree = 2; degree <= max_order; ++degree) detail::append_exponents(prefix, degree, n, out);
    return out;
}

class Dictionary {
public:
    static Dictionary polynomial(Eigen::Index state_dim, int max_order) {
        if (state_dim < 1) throw InvalidArgument("state dimension must be positive");
        if (max_order < 1) throw InvalidArgument("polynomial max order must be at least 1");
        Dictionary d(DictionaryKind::polynomial, state_dim);
        d.max_order_ = max_order;
        d.exponents_ = graded_lex_exponents(static_cast<std::size_t>(state_dim), max_order);
        d.dimension_ = 1 + state_dim + static_cast<Eigen::Index>(d.exponents_.size());
        return d;
    }

    static Dictionary rbf(std::vector<StateVector> centers, double width) {
        if (centers.empty()) throw InvalidArgument("rbf dictionary needs at least one center");
        if (!(width > 0.0) || !std::isfinite(width)) throw InvalidArgument("rbf width must be positive");
        const auto n = centers.front().size();
        if (n < 1) throw InvalidArgument("state dimension must be positive");
        for (const auto& c : centers) {
            if (c.size() != n) throw InvalidArgument("rbf centers have mixed dimensions");
        }
        Dictionary d(DictionaryKind::rbf, n);
        d.width_ = width;
        d.dimension_ = 1 + n + static_cast<Eigen::Index>(centers.size());
        d.centers_ = std::move(centers);
        return d;
    }

    static Dictionary fourier(Eigen::Index state_dim, int n_pairs, double box_half_width = 2.0) {
        if (state_dim < 1) throw InvalidArgument("state dimension must be positive");
        if (n_pairs < 1) throw InvalidArgument("fourier dictionary needs at least one frequency pair");
        if (!(box_half_width > 0.0)) throw InvalidArgument("fourier box half-width must be positive");
        Dictionary d(DictionaryKind::fourier, state_dim);
        d.n_pairs_ = n_pairs;
        d.box_half_width_ = box_half_width;
        d.dimension_ = 1 + state_dim + 2 * state_dim * n_pairs;
        return d;
    }

    DictionaryKind kind() const noexcept { return kind_; }
    Eigen::Index state_dim() const noexcept { return state_dim_; }
    Eigen::Index dimension() const noexcept { return dimension_; }

    int max_order() const noexcept { return max_order_; }
    const std::vector<std::vector<int>>& exponents() const noexcept { return exponents_; }
    const std::vector<StateVector>& centers() const noexcept { return centers_; }
    double width() const noexcept { return width_; }
    int n_pairs() const noexcept { return n_pairs_; }
    double box_half_width() const noexcept { return box_half_width_; }

    /// Spec that rebuilds this dictionary (for rbf, centers still have to be supplied).
    DictionarySpec spec() const {
        DictionarySpec s;
        s.kind = kind_;
        s.max_order = max_order_;
        s.n_centers = static_cast<int>(centers_.size());
        s.n_pairs = n_pairs_;
        s.box_half_width = box_half_width_;
        if (kind_ == DictionaryKind::rbf) s.width = width_;
        return s;
    }

    Eigen::VectorXd evaluate(const StateVector& x) const {
        Eigen::VectorXd out(dimension_);
        evaluate_into(x, out);
        return out;
    }

    void evaluate_into(const StateVector& x, Eigen::Ref<Eigen::VectorXd> out) const {
        if (x.size() != state_dim_) throw InvalidArgument("state dimension does not match dictionary");
        out(0) = 1.0;
        out.segment(1, state_dim_) = x;
        Eigen::Index k = 1 + state_dim_;
        switch (kind_) {
            case DictionaryKind::polynomial:
                for (const auto& a : exponents_) {
                    double m = 1.0;
                    for (Eigen::Index i = 0; i < state_dim_; ++i) {
                        for (int e = 0; e < a[static_cast<std::size_t>(i)]; ++e) m *= x(i);
                    }
                    out(k++) = m;
                }
                break;
            case DictionaryKind::rbf: {
                const double scale = 1.0 / (2.0 * width_ * width_);
                for (const auto& c : centers_) out(k++) = std::exp(-(x - c).squaredNorm() * scale);
                break;
            }
            case DictionaryKind::fourier:
                for (Eigen::Index i = 0; i < state_dim_; ++i) {
                    for (int f = 1; f <= n_pairs_; ++f) {
                        const double arg = f * std::numbers::pi * x(i) / box_half_width_;
                        out(k++) = std::sin(arg);
                        out(k++) = std::cos(arg);
                    }
                }
                break;
        }
    }

    /// Lifted data matrix: observables as rows, states as columns.
    Eigen::MatrixXd lift(std::span<const StateVector> states) const {
        Eigen::MatrixXd out(dimension_, static_cast<Eigen::Index>(states.size()));
        for (std::size_t j = 0; j < states.size(); ++j) evaluate_into(states[j], out.col(static_cast<Eigen::Index>(j)));
        return out;
    }

    /// Human-readable observable names in canonical order (used for CSV headers).
    std::vector<std::string> observable_names() const {
        std::vector<std::string> names{"1"};
        for (Eigen::Index i = 0; i < state_dim_; ++i) names.push_back("x" + std::to_string(i + 1));
        switch (kind_) {
            case DictionaryKind::polynomial:
                for (const auto& a : exponents_) {
                    std::string term;
                    for (std::size_t i = 0; i < a.size(); ++i) {
                        if (a[i] == 0) continue;
                        if (!term.empty()) term += "*";
                        term += "x" + std::to_string(i + 1);
                        if (a[i] > 1) term += "^" + std::to_string(a[i]);
                    }
                    names.push_back(term);
                }
                break;
            case DictionaryKind::rbf:
                for (std::size_t k = 0; k < centers_.size(); ++k) names.push_back("rbf" + std::to_string(k));
                break;
            case DictionaryKind::fourier:
                for (Eigen::Index i = 0; i < state_dim_; ++i) {
                    for (int f = 1; f <= n_pairs_; ++f) {
                        const auto arg = std::to_string(f) + "*pi*x" + std::to_string(i + 1) + "/L";
                        names.push_back("sin(" + arg + ")");
                        names.push_back("cos(" + arg + ")");
                    }
                }
                break;
        }
        return names;
    }

private:
    Dictionary(DictionaryKind kind, Eigen::Index state_dim) : kind_(kind), state_dim_(state_dim) {}

    DictionaryKind kind_;
    Eigen::Index state_dim_;
    Eigen::Index dimension_ = 0;
    int max_order_ = 1;
    std::vector<std::vector<int>> exponents_;
    std::vector<StateVector> centers_;
    double width_ = 1.0;
    int n_pairs_ = 0;
    double box_half_width_ = 2.0;
};

/// Closed-form dictionary dimension, without building the dictionary.
inline Eigen::Index dictionary_dimension(const DictionarySpec& spec, Eigen::Index state_dim) {
    const auto n = static_cast<std::size_t>(state_dim);
    switch (spec.kind) {
        case DictionaryKind::polynomial:
            return static_cast<Eigen::Index>(binomial(n + static_cast<std::size_t>(spec.max_order),
                                                      static_cast<std::size_t>(spec.max_order)));
        case DictionaryKind::rbf: return 1 + state_dim + spec.n_centers;
        case DictionaryKind::fourier: return 1 + state_dim + 2 * state_dim * spec.n_pairs;
    }
    return 0;
}

/// Farthest-point sampling. The first center is the data point nearest the
/// centroid; each following center maximizes its distance to the chosen set.
/// Ties go to the lowest index.
inline std::vector<StateVector> place_rbf_centers(std::span<const StateVector> data, std::size_t n_centers) {
    if (data.empty()) throw InvalidArgument("cannot place rbf centers on empty data");
    if (n_centers == 0 || n_centers > data.size()) {
        throw InvalidArgument("number of rbf centers must be in [1, number of data points]");
    }
    const auto n = data.front().size();
    StateVector centroid = StateVector::Zero(n);
    for (const auto& x : data) {
        if (x.size() != n) throw InvalidArgument("data points have mixed dimensions");
        centroid += x;
    }
    centroid /= static_cast<double>(data.size());

    std::size_t first = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double d = (data[i] - centroid).squaredNorm();
        if (d < best) {
            best = d;
            first = i;
        }
    }

    std::vector<StateVector> centers{data[first]};
    std::vector<double> min_dist(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) min_dist[i] = (data[i] - data[first]).squaredNorm();
    while (centers.size() < n_centers) {
        std::size_t next = 0;
        double far = -1.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (min_dist[i] > far) {
                far = min_dist[i];
                next = i;
            }
        }
        centers.push_back(data[next]);
        for (std::size_t i = 0; i < data.size(); ++i) {
            min_dist[i] = std::min(min_dist[i], (data[i] - data[next]).squaredNorm());
        }
    }
    return centers;
}

/// Median of the pairwise center distances (mean of the two middle values for an even count).
inline double default_rbf_width(std::span<const StateVector> centers) {
    if (centers.size() < 2) throw InvalidArgument("default rbf width needs at least two centers");
    std::vector<double> d;
    d.reserve(centers.size() * (centers.size() - 1) / 2);
    for (std::size_t i = 0; i < centers.size(); ++i) {
        for (std::size_t j = i + 1; j < centers.size(); ++j) d.push_back((centers[i] - centers[j]).norm());
    }
    std::sort(d.begin(), d.end());
    const std::size_t m = d.size() / 2;
    return d.size() % 2 == 1 ? d[m] : 0.5 * (d[m - 1] + d[m]);
}

/// Resolves a spec into a dictionary; rbf centers are placed on `data`.
inline Dictionary build_dictionary(const DictionarySpec& spec, Eigen::Index state_dim,
                                   std::span<const StateVector> data = {}) {
    switch (spec.kind) {
        case DictionaryKind::polynomial: return Dictionary::polynomial(state_dim, spec.max_order);
        case DictionaryKind::fourier: return Dictionary::fourier(state_dim, spec.n_pairs, spec.box_half_width);
        case DictionaryKind::rbf: {
            if (spec.n_centers < 1) throw InvalidArgument("rbf dictionary needs at least one center");
            auto centers = place_rbf_centers(data, static_cast<std::size_t>(spec.n_centers));
            if (centers.front().size() != state_dim) throw InvalidArgument("data dimension does not match state dimension");
            double width = 1.0;
            if (spec.width) {
                width = *spec.width;
            } else if (centers.size() >= 2) {
                width = default_rbf_width(centers);
            }
            return Dictionary::rbf(std::move(centers), width);
        }
    }
    throw InvalidArgument("unknown dictionary kind");
}

} // namespace koopman
