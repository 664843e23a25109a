#pragma once

// File formats: trajectory CSV, model JSON, dictionary / group-action /
// experiment-config JSON.
//
// Trajectory CSV: header "t,x1,...,xn", one row per sample, 17 significant
// digits. Files holding several trajectories carry a leading integer "traj"
// column; rows of one trajectory are contiguous.

#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "koopman/dynamics.hpp"
#include "koopman/edmd.hpp"
#include "koopman/error.hpp"
#include "koopman/group_action.hpp"
#include "koopman/harness.hpp"
#include "koopman/observables.hpp"

namespace koopman {

using json = nlohmann::json;

/// Malformed or inconsistent file / configuration content.
class FormatError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw FormatError("trailing characters in number '" + s + "'");
        return v;
    } catch (const std::logic_error&) {
        throw FormatError("cannot parse number '" + s + "'");
    }
}

inline void write_state_columns(std::ostream& os, const StateVector& x) {
    for (Eigen::Index i = 0; i < x.size(); ++i) os << ',' << format_double(x(i));
}

inline std::string state_header(Eigen::Index n) {
    std::string h;
    for (Eigen::Index i = 0; i < n; ++i) h += ",x" + std::to_string(i + 1);
    return h;
}

} // namespace detail

/// Parses "a,b[,c]" into a state vector.
inline StateVector parse_state(const std::string& text) {
    const auto cells = detail::split(text, ',');
    if (cells.empty()) throw FormatError("empty state");
    StateVector x(static_cast<Eigen::Index>(cells.size()));
    for (std::size_t i = 0; i < cells.size(); ++i) x(static_cast<Eigen::Index>(i)) = detail::parse_double(detail::trim(cells[i]));
    return x;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    os << 't' << detail::state_header(traj.dim()) << '\n';
    for (std::size_t i = 0; i < traj.size(); ++i) {
        os << format_double(traj.time(i));
        detail::write_state_columns(os, traj.states[i]);
        os << '\n';
    }
}

inline void write_trajectories_csv(std::ostream& os, std::span<const Trajectory> trajs) {
    if (trajs.empty()) throw InvalidArgument("no trajectories to write");
    os << "traj,t" << detail::state_header(trajs.front().dim()) << '\n';
    for (std::size_t k = 0; k < trajs.size(); ++k) {
        for (std::size_t i = 0; i < trajs[k].size(); ++i) {
            os << k << ',' << format_double(trajs[k].time(i));
            detail::write_state_columns(os, trajs[k].states[i]);
            os << '\n';
        }
    }
}

/// Reads one or more trajectories. The sampling interval comes from the t
/// column and must be uniform within each trajectory.
inline std::vector<Trajectory> read_trajectories_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw FormatError("empty trajectory file");
    auto header = detail::split(detail::trim(line), ',');
    for (auto& h : header) h = detail::trim(h);
    const bool has_id = !header.empty() && header.front() == "traj";
    const std::size_t t_col = has_id ? 1 : 0;
    if (header.size() < t_col + 2 || header[t_col] != "t") throw FormatError("trajectory header must be [traj,]t,x1,...");
    const auto n = static_cast<Eigen::Index>(header.size() - t_col - 1);

    struct Raw {
        std::string id;
        std::vector<double> times;
        std::vector<StateVector> states;
    };
    std::vector<Raw> raws;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto cells = detail::split(line, ',');
        if (cells.size() != header.size()) throw FormatError("wrong column count on line " + std::to_string(lineno));
        const std::string id = has_id ? detail::trim(cells[0]) : std::string{};
        if (raws.empty() || raws.back().id != id) raws.push_back({id, {}, {}});
        raws.back().times.push_back(detail::parse_double(detail::trim(cells[t_col])));
        StateVector x(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            x(i) = detail::parse_double(detail::trim(cells[t_col + 1 + static_cast<std::size_t>(i)]));
        }
        raws.back().states.push_back(std::move(x));
    }
    if (raws.empty()) throw FormatError("trajectory file has no rows");

    std::vector<Trajectory> out;
    for (auto& r : raws) {
        Trajectory t;
        t.t0 = r.times.front();
        if (r.times.size() >= 2) {
            t.dt = (r.times.back() - r.times.front()) / static_cast<double>(r.times.size() - 1);
            if (!(t.dt > 0.0)) throw FormatError("time column must increase");
            for (std::size_t i = 1; i < r.times.size(); ++i) {
                if (std::abs((r.times[i] - r.times[i - 1]) - t.dt) > 1e-6 * t.dt) {
                    throw FormatError("non-uniform sampling in trajectory '" + r.id + "'");
                }
            }
        }
        t.states = std::move(r.states);
        out.push_back(std::move(t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON helpers

namespace detail {

inline json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) throw FormatError(what + " must be a non-empty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j.front().size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw FormatError(what + " has ragged rows");
        for (Eigen::Index k = 0; k < cols; ++k) {
            const auto& v = row[static_cast<std::size_t>(k)];
            if (!v.is_number()) throw FormatError(what + " entries must be numbers");
            m(i, k) = v.get<double>();
        }
    }
    return m;
}

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double number_or_inf(const json& j) {
    return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

inline void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) throw FormatError("unknown key '" + key + "' in " + where);
    }
}

template <class T>
T get_as(const json& j, const std::string& key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw FormatError("bad or missing '" + key + "' in " + where + ": " + e.what());
    }
}

inline DictionaryKind kind_from_json(const json& j, const std::string& where) {
    try {
        return parse_dictionary_kind(get_as<std::string>(j, "kind", where));
    } catch (const FormatError&) {
        throw;
    } catch (const InvalidArgument& e) {
        throw FormatError(e.what());
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Dictionary JSON: {"kind":"rbf","n_centers":10} | {"kind":"fourier","n_pairs":3,"L":2.0}
//                  | {"kind":"polynomial","max_order":4}
// A resolved rbf dictionary also carries "width" and "centers".

inline DictionarySpec dictionary_spec_from_json(const json& j) {
    if (!j.is_object()) throw FormatError("dictionary spec must be a JSON object");
    detail::reject_unknown_keys(j, {"kind", "max_order", "n_centers", "n_pairs", "L", "width", "centers"}, "dictionary");
    DictionarySpec s;
    s.kind = detail::kind_from_json(j, "dictionary");
    switch (s.kind) {
        case DictionaryKind::polynomial: s.max_order = detail::get_as<int>(j, "max_order", "dictionary"); break;
        case DictionaryKind::rbf:
            s.n_centers = j.contains("centers") ? static_cast<int>(j.at("centers").size())
                                                : detail::get_as<int>(j, "n_centers", "dictionary");
            if (j.contains("width")) s.width = detail::get_as<double>(j, "width", "dictionary");
            break;
        case DictionaryKind::fourier:
            s.n_pairs = detail::get_as<int>(j, "n_pairs", "dictionary");
            if (j.contains("L")) s.box_half_width = detail::get_as<double>(j, "L", "dictionary");
            break;
    }
    return s;
}

inline json dictionary_spec_to_json(const DictionarySpec& s) {
    json j{{"kind", to_string(s.kind)}};
    switch (s.kind) {
        case DictionaryKind::polynomial: j["max_order"] = s.max_order; break;
        case DictionaryKind::rbf:
            j["n_centers"] = s.n_centers;
            if (s.width) j["width"] = *s.width;
            break;
        case DictionaryKind::fourier:
            j["n_pairs"] = s.n_pairs;
            j["L"] = s.box_half_width;
            break;
    }
    return j;
}

inline json dictionary_to_json(const Dictionary& d) {
    json j = dictionary_spec_to_json(d.spec());
    if (d.kind() == DictionaryKind::rbf) {
        json centers = json::array();
        for (const auto& c : d.centers()) centers.push_back(std::vector<double>(c.data(), c.data() + c.size()));
        j["centers"] = std::move(centers);
    }
    return j;
}

/// Builds a dictionary from JSON; rbf specs without explicit centers are placed on `data`.
inline Dictionary dictionary_from_json(const json& j, Eigen::Index state_dim, std::span<const StateVector> data = {}) {
    const auto spec = dictionary_spec_from_json(j);
    if (spec.kind == DictionaryKind::rbf && j.contains("centers")) {
        const Eigen::MatrixXd m = detail::matrix_from_json(j.at("centers"), "rbf centers");
        if (m.cols() != state_dim) throw FormatError("rbf center dimension does not match state dimension");
        std::vector<StateVector> centers;
        for (Eigen::Index i = 0; i < m.rows(); ++i) centers.push_back(m.row(i).transpose());
        if (!spec.width) throw FormatError("rbf dictionary with explicit centers needs a width");
        return Dictionary::rbf(std::move(centers), *spec.width);
    }
    return build_dictionary(spec, state_dim, data);
}

// ---------------------------------------------------------------------------
// Model JSON

struct ModelFileInfo {
    std::optional<std::uint64_t> seed;
    std::size_t n_trajectories = 0;
};

inline json model_to_json(const KoopmanModel& model, const ModelFileInfo& info = {}) {
    json eig = json::array();
    for (Eigen::Index i = 0; i < model.eigenvalues().size(); ++i) {
        eig.push_back({model.eigenvalues()(i).real(), model.eigenvalues()(i).imag()});
    }
    const auto& meta = model.metadata();
    json metadata{{"n_pairs", meta.n_pairs},
                  {"n_trajectories", info.n_trajectories},
                  {"rank", meta.rank},
                  {"dt", meta.dt},
                  {"svd_rtol", meta.svd_rtol},
                  {"ridge", meta.ridge},
                  {"fit_residual", model.fit_residual()},
                  {"reconstruction_residual", model.reconstruction_residual()},
                  {"lifted_condition", detail::finite_or_null(meta.lifted_condition)},
                  {"eigenvector_condition", detail::finite_or_null(model.eigenvector_condition())},
                  {"seed", info.seed ? json(*info.seed) : json(nullptr)}};
    return json{{"format", "koopman-edmd-model"},
                {"version", 1},
                {"state_dim", model.state_dim()},
                {"dimension", model.dictionary().dimension()},
                {"dictionary", dictionary_to_json(model.dictionary())},
                {"K", detail::matrix_to_json(model.K())},
                {"C", detail::matrix_to_json(model.C())},
                {"eigenvalues", std::move(eig)},
                {"metadata", std::move(metadata)}};
}

/// Rebuilds a model; the eigendecomposition is recomputed from K.
inline KoopmanModel model_from_json(const json& j) {
    if (!j.is_object() || j.value("format", std::string{}) != "koopman-edmd-model") {
        throw FormatError("not a koopman-edmd-model file");
    }
    const auto n = detail::get_as<Eigen::Index>(j, "state_dim", "model");
    auto dict = dictionary_from_json(j.at("dictionary"), n);
    Eigen::MatrixXd K = detail::matrix_from_json(j.at("K"), "K");
    Eigen::MatrixXd C = detail::matrix_from_json(j.at("C"), "C");
    FitMetadata meta;
    double fit_res = 0.0;
    double recon_res = 0.0;
    if (j.contains("metadata")) {
        const auto& m = j.at("metadata");
        meta.n_pairs = m.value("n_pairs", std::size_t{0});
        meta.rank = m.value("rank", Eigen::Index{0});
        meta.dt = m.value("dt", 1.0);
        meta.svd_rtol = m.value("svd_rtol", 1e-10);
        meta.ridge = m.value("ridge", 0.0);
        if (m.contains("lifted_condition")) meta.lifted_condition = detail::number_or_inf(m.at("lifted_condition"));
        fit_res = m.value("fit_residual", 0.0);
        recon_res = m.value("reconstruction_residual", 0.0);
    }
    try {
        return KoopmanModel(std::move(K), std::move(C), std::move(dict), meta, fit_res, recon_res);
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("inconsistent model file: ") + e.what());
    }
}

inline void save_model(const std::string& path, const KoopmanModel& model, const ModelFileInfo& info = {}) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open '" + path + "' for writing");
    os << model_to_json(model, info).dump(2) << '\n';
}

inline json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open '" + path + "'");
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw FormatError("invalid JSON in '" + path + "': " + e.what());
    }
}

inline KoopmanModel load_model(const std::string& path) { return model_from_json(read_json_file(path)); }

// ---------------------------------------------------------------------------
// Group actions: {"actions": [[[1,0],[0,1]], [[-1,0],[0,-1]]]} or {"action": [[-1,0],[0,-1]]}

inline std::vector<GroupAction> actions_from_json(const json& j) {
    std::vector<GroupAction> out;
    try {
        if (j.contains("actions")) {
            for (const auto& m : j.at("actions")) out.emplace_back(detail::matrix_from_json(m, "action"));
        } else if (j.contains("action")) {
            out.emplace_back(detail::matrix_from_json(j.at("action"), "action"));
        } else {
            throw FormatError("expected an 'actions' or 'action' key");
        }
    } catch (const FormatError&) {
        throw;
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("invalid group action: ") + e.what());
    }
    if (out.empty()) throw FormatError("no group actions given");
    return out;
}

inline json actions_to_json(std::span<const GroupAction> actions) {
    json arr = json::array();
    for (const auto& a : actions) arr.push_back(detail::matrix_to_json(a.matrix()));
    return json{{"actions", std::move(arr)}};
}

// ---------------------------------------------------------------------------
// Experiment config. Every key is optional; omitted keys keep their defaults.
//
// {
//   "system": "duffing" | "lorenz",
//   "seed": 20230611,
//   "sweep": [{"kind": "rbf", "values": [10, 25, 50, 100, 200]}, ...],
//   "test": {"count": 100, "domain": [-2, 2], "horizon": 50},
//   "knn_k": 5, "svd_rtol": 1e-10, "fourier_L": 2.0,
//   "basin_tol": 0.05, "basin_t_extend": 50.0,
//   "grid": {"n_upper": 25, "n_lower": 24, "refine_lower_row": false,
//            "refinement": [-0.085, -0.08, -0.075], "refinement_start": 2},
//   "lorenz": {"dictionary": {"kind": "rbf", "n_centers": 100},
//              "sweep_centers": [50, 100, 200], "horizon": 50,
//              "steps": 2000, "test_steps": 1000, "stride": 4, "dt": 0.005,
//              "x0": [1, 0, 0]}
// }

inline ExperimentConfig config_from_json(const json& j) {
    if (!j.is_object()) throw FormatError("config must be a JSON object");
    detail::reject_unknown_keys(j, {"system", "seed", "sweep", "test", "knn_k", "svd_rtol", "fourier_L", "basin_tol",
                                    "basin_t_extend", "grid", "lorenz"},
                                "config");
    ExperimentConfig cfg;
    const std::string where = "config";
    if (j.contains("system")) {
        cfg.system = detail::get_as<std::string>(j, "system", where);
        if (cfg.system != "duffing" && cfg.system != "lorenz") throw FormatError("system must be 'duffing' or 'lorenz'");
    }
    if (j.contains("seed")) cfg.seed = detail::get_as<std::uint64_t>(j, "seed", where);
    if (j.contains("sweep")) {
        cfg.sweep.clear();
        for (const auto& axis : j.at("sweep")) {
            detail::reject_unknown_keys(axis, {"kind", "values"}, "sweep axis");
            SweepAxis a;
            a.kind = detail::kind_from_json(axis, "sweep axis");
            a.values = detail::get_as<std::vector<int>>(axis, "values", "sweep axis");
            if (a.values.empty()) throw FormatError("sweep axis has no values");
            for (int v : a.values) {
                if (v < 1) throw FormatError("sweep values must be positive");
            }
            cfg.sweep.push_back(std::move(a));
        }
    }
    if (j.contains("test")) {
        const auto& t = j.at("test");
        detail::reject_unknown_keys(t, {"count", "domain", "horizon"}, "test");
        if (t.contains("count")) cfg.test.count = detail::get_as<int>(t, "count", "test");
        if (t.contains("horizon")) cfg.test.horizon = detail::get_as<int>(t, "horizon", "test");
        if (t.contains("domain")) {
            const auto d = detail::get_as<std::vector<double>>(t, "domain", "test");
            if (d.size() != 2 || !(d[0] < d[1])) throw FormatError("test domain must be [lo, hi] with lo < hi");
            cfg.test.domain_min = d[0];
            cfg.test.domain_max = d[1];
        }
        if (cfg.test.count < 1 || cfg.test.horizon < 1) throw FormatError("test count and horizon must be positive");
    }
    if (j.contains("knn_k")) cfg.knn_k = detail::get_as<int>(j, "knn_k", where);
    if (j.contains("svd_rtol")) cfg.svd_rtol = detail::get_as<double>(j, "svd_rtol", where);
    if (j.contains("fourier_L")) cfg.fourier_half_width = detail::get_as<double>(j, "fourier_L", where);
    if (j.contains("basin_tol")) cfg.basin_tol = detail::get_as<double>(j, "basin_tol", where);
    if (j.contains("basin_t_extend")) cfg.basin_t_extend = detail::get_as<double>(j, "basin_t_extend", where);
    if (cfg.knn_k < 1 || cfg.knn_k % 2 == 0) throw FormatError("knn_k must be a positive odd integer");
    if (!(cfg.svd_rtol > 0.0 && cfg.svd_rtol < 1.0)) throw FormatError("svd_rtol must lie in (0, 1)");
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        detail::reject_unknown_keys(g, {"n_upper", "n_lower", "refine_lower_row", "refinement", "refinement_start"}, "grid");
        if (g.contains("n_upper")) cfg.grid.n_upper = detail::get_as<int>(g, "n_upper", "grid");
        if (g.contains("n_lower")) cfg.grid.n_lower = detail::get_as<int>(g, "n_lower", "grid");
        if (g.contains("refine_lower_row")) cfg.grid.refine_lower_row = detail::get_as<bool>(g, "refine_lower_row", "grid");
        if (g.contains("refinement")) cfg.grid.refinement = detail::get_as<std::vector<double>>(g, "refinement", "grid");
        if (g.contains("refinement_start")) {
            cfg.grid.refinement_start = detail::get_as<std::size_t>(g, "refinement_start", "grid");
        }
    }
    if (j.contains("lorenz")) {
        const auto& l = j.at("lorenz");
        detail::reject_unknown_keys(l, {"dictionary", "sweep_centers", "horizon", "steps", "test_steps", "stride", "dt", "x0"},
                                    "lorenz");
        auto& ls = cfg.lorenz;
        if (l.contains("dictionary")) ls.dictionary = dictionary_spec_from_json(l.at("dictionary"));
        if (l.contains("sweep_centers")) ls.sweep_centers = detail::get_as<std::vector<int>>(l, "sweep_centers", "lorenz");
        if (l.contains("horizon")) ls.horizon = detail::get_as<int>(l, "horizon", "lorenz");
        if (l.contains("steps")) ls.steps = detail::get_as<int>(l, "steps", "lorenz");
        if (l.contains("test_steps")) ls.test_steps = detail::get_as<int>(l, "test_steps", "lorenz");
        if (l.contains("stride")) ls.stride = detail::get_as<int>(l, "stride", "lorenz");
        if (l.contains("dt")) ls.dt = detail::get_as<double>(l, "dt", "lorenz");
        if (l.contains("x0")) {
            const auto x0 = detail::get_as<std::vector<double>>(l, "x0", "lorenz");
            if (x0.size() != 3) throw FormatError("lorenz x0 must have three entries");
            ls.x0 = Eigen::Vector3d(x0[0], x0[1], x0[2]);
        }
        if (ls.horizon < 1 || ls.steps < 2 || ls.test_steps < 1 || ls.stride < 1 || !(ls.dt > 0.0)) {
            throw FormatError("lorenz integration settings must be positive");
        }
        for (int c : ls.sweep_centers) {
            if (c < 1) throw FormatError("lorenz sweep centers must be positive");
        }
    }
    return cfg;
}

} // namespace koopman
