#pragma once
// JSON experiment configurations and the scenario runners behind the command
// line tool.  Parsing is strict: unknown keys and wrong types are ConfigError.
// Runners return their artifacts in memory so nothing is written on failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "correlation.hpp"
#include "periodic_orbits.hpp"

namespace wwsc::experiment {

using json = nlohmann::ordered_json;

struct ScenarioInfo {
    const char* name;
    const char* summary;
};

inline const std::vector<ScenarioInfo>& scenarios() {
    static const std::vector<ScenarioInfo> s{
        {"metaplectic_validation", "estimators vs the oracle for quadratic Hamiltonians"},
        {"anharmonic_hbar_sweep", "estimator error against the oracle over a list of hbar values"},
        {"heisenberg_classical", "per-observable Heisenberg evolutions: classical transport, collapsed phase"},
        {"echo_single", "Loschmidt echo tr(U_b^dag U_f rho) over a list of times"},
        {"echo_double", "doubled echo with the |S'(double) - 2 S'(single)| area diagnostic"},
        {"orbit_family", "periodic points of a compound map over a grid of reflection centres"},
        {"polygon_gallery", "zero-duration reflection products: polygon areas vs oracle trace phases"},
    };
    return s;
}

struct Tolerances {
    double sigma = 3.0;
    double absolute = 1e-6;
};

struct EchoSpec {
    std::string forward, backward;
    std::vector<double> times;
    long diagnostic_samples = 2000;
};

struct FamilySpec {
    std::vector<PhasePoint> base;
    int moving = 0;
    double p_lo = 0.0, p_hi = 0.0, q_lo = 0.0, q_hi = 0.0;
    int nx = 5, ny = 5;
    PhasePoint seed;
    NewtonOptions newton;
};

struct ExperimentConfig {
    std::string scenario;
    std::string name = "experiment";
    std::string output_dir = "results";
    std::uint64_t seed = 1;
    std::map<std::string, HamiltonianPtr> hamiltonians;
    CorrelationTask task;
    std::vector<EstimatorKind> estimators;
    SamplerConfig sampler;
    bool use_oracle = true;
    Tolerances tol;
    std::vector<double> hbar_values;
    EchoSpec echo;
    FamilySpec family;
    std::vector<std::vector<PhasePoint>> polygons;
};

// ---------------------------------------------------------------------------
// Parsing helpers

namespace detail {

inline void allow(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : keys) ok = ok || it.key() == k;
        if (!ok) throw ConfigError(where + ": unknown field '" + it.key() + "'");
    }
}

inline const json& need(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
    return j.at(key);
}

inline double number(const json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError(where + ": expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(where + ": not finite");
    return x;
}

inline double number_or(const json& j, const char* key, double dflt, const std::string& where) {
    return j.contains(key) ? number(j.at(key), where + "." + key) : dflt;
}

inline long integer_or(const json& j, const char* key, long dflt, const std::string& where) {
    if (!j.contains(key)) return dflt;
    if (!j.at(key).is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
    return j.at(key).get<long>();
}

inline bool bool_or(const json& j, const char* key, bool dflt, const std::string& where) {
    if (!j.contains(key)) return dflt;
    if (!j.at(key).is_boolean()) throw ConfigError(where + "." + key + ": expected true or false");
    return j.at(key).get<bool>();
}

inline std::string string_of(const json& v, const std::string& where) {
    if (!v.is_string()) throw ConfigError(where + ": expected a string");
    return v.get<std::string>();
}

inline Vec vec_of(const json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) throw ConfigError(where + ": expected a non-empty array of numbers");
    Vec x(static_cast<long>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) x(static_cast<long>(i)) = number(v[i], where);
    return x;
}

inline Mat mat_of(const json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) throw ConfigError(where + ": expected an array of rows");
    const std::size_t n = v.size();
    Mat M(static_cast<long>(n), static_cast<long>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const Vec r = vec_of(v[i], where);
        if (static_cast<std::size_t>(r.size()) != n) throw ConfigError(where + ": matrix must be square");
        M.row(static_cast<long>(i)) = r.transpose();
    }
    return M;
}

inline Poly poly_of(const json& v, int N, const std::string& where) {
    if (!v.is_object() || v.empty()) throw ConfigError(where + ": expected a map monomial -> coefficient");
    Poly P(2 * N);
    for (auto it = v.begin(); it != v.end(); ++it) P.add_term(parse_monomial(it.key(), N), number(it.value(), where));
    return P;
}

inline PhasePoint point_of(const json& v, int N, const std::string& where) {
    const Vec x = vec_of(v, where);
    if (x.size() != 2 * N) throw ConfigError(where + ": expected " + std::to_string(2 * N) + " coordinates");
    return x;
}

inline Hamiltonian hamiltonian_of(const json& j, const std::string& where) {
    const std::string preset = string_of(need(j, "preset", where), where + ".preset");
    if (preset == "harmonic") {
        allow(j, {"preset", "omega", "dof"}, where);
        const long N = integer_or(j, "dof", 1, where);
        if (N < 1) throw ConfigError(where + ": dof must be positive");
        return Hamiltonian::harmonic(number_or(j, "omega", 1.0, where), static_cast<int>(N));
    }
    if (preset == "quartic") {
        allow(j, {"preset", "a", "b"}, where);
        return Hamiltonian::quartic(number_or(j, "a", 1.0, where), number_or(j, "b", 1.0, where));
    }
    if (preset == "kerr") {
        allow(j, {"preset", "lambda"}, where);
        return Hamiltonian::kerr_like(number_or(j, "lambda", 1.0, where));
    }
    if (preset == "quadratic") {
        allow(j, {"preset", "Q", "b"}, where);
        const Mat Q = mat_of(need(j, "Q", where), where + ".Q");
        const Vec b = j.contains("b") ? vec_of(j.at("b"), where + ".b") : Vec(Vec::Zero(Q.rows()));
        if (Q.rows() % 2) throw ConfigError(where + ": Q must be 2N x 2N");
        return Hamiltonian::quadratic(Q, b);
    }
    if (preset == "polynomial") {
        allow(j, {"preset", "terms", "dof"}, where);
        const long N = integer_or(j, "dof", 1, where);
        if (N < 1) throw ConfigError(where + ": dof must be positive");
        return Hamiltonian::polynomial(poly_of(need(j, "terms", where), static_cast<int>(N), where + ".terms"));
    }
    throw ConfigError(where + ": unknown preset '" + preset + "'");
}

inline HamiltonianPtr lookup(const std::map<std::string, HamiltonianPtr>& hs, const json& v, const std::string& where) {
    const std::string name = string_of(v, where);
    auto it = hs.find(name);
    if (it == hs.end()) throw ConfigError(where + ": unknown Hamiltonian '" + name + "'");
    return it->second;
}

inline EvolutionSpec evolution_of(const json& j, const std::map<std::string, HamiltonianPtr>& hs,
                                  const std::string& where) {
    if (j.contains("pieces")) {
        allow(j, {"pieces"}, where);
        const json& p = j.at("pieces");
        if (!p.is_array() || p.empty()) throw ConfigError(where + ".pieces: expected a non-empty array");
        EvolutionSpec e;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const std::string w = where + ".pieces[" + std::to_string(k) + "]";
            allow(p[k], {"hamiltonian", "duration"}, w);
            auto H = lookup(hs, need(p[k], "hamiltonian", w), w + ".hamiltonian");
            const double t = number(need(p[k], "duration", w), w + ".duration");
            if (k == 0) {
                e.hamiltonian = H;
                e.duration = t;
            } else {
                e.then.emplace_back(H, t);
            }
        }
        return e;
    }
    allow(j, {"hamiltonian", "duration"}, where);
    return {lookup(hs, need(j, "hamiltonian", where), where + ".hamiltonian"),
            number(need(j, "duration", where), where + ".duration"), {}};
}

inline Observable observable_of(const json& j, int N, const std::filesystem::path& base, const std::string& where) {
    if (!j.is_object() || j.size() != 1) throw ConfigError(where + ": expected exactly one of polynomial, gaussian, grid");
    if (j.contains("polynomial")) return Observable::polynomial(poly_of(j.at("polynomial"), N, where + ".polynomial"));
    if (j.contains("gaussian")) {
        const json& g = j.at("gaussian");
        const std::string w = where + ".gaussian";
        allow(g, {"centre", "beta", "amplitude"}, w);
        GaussianObservable o{point_of(need(g, "centre", w), N, w + ".centre"), number_or(g, "beta", 1.0, w),
                             number_or(g, "amplitude", 1.0, w)};
        if (!(o.beta > 0.0)) throw ConfigError(w + ": beta must be positive");
        return {o};
    }
    if (j.contains("grid")) {
        const json& g = j.at("grid");
        const std::string w = where + ".grid";
        allow(g, {"path", "format"}, w);
        std::filesystem::path p = string_of(need(g, "path", w), w + ".path");
        if (p.is_relative()) p = base / p;
        const std::string fmt = g.contains("format") ? string_of(g.at("format"), w + ".format") : "csv";
        if (!std::filesystem::exists(p)) throw ConfigError(w + ": file not found: " + p.string());
        try {
            if (fmt == "csv") return {read_csv(p.string())};
            if (fmt == "binary") return {read_binary(p.string())};
        } catch (const Error& e) {
            throw ConfigError(w + ": " + e.what());
        }
        throw ConfigError(w + ": unknown format '" + fmt + "'");
    }
    throw ConfigError(where + ": expected exactly one of polynomial, gaussian, grid");
}

inline IntegrationMode mode_of(const std::string& s, const std::string& where) {
    if (s == "auto") return IntegrationMode::automatic;
    if (s == "exact") return IntegrationMode::exact;
    if (s == "monte_carlo") return IntegrationMode::monte_carlo;
    throw ConfigError(where + ": mode must be auto, exact or monte_carlo");
}

inline SamplerConfig sampler_of(const json& j, const std::string& where) {
    allow(j, {"samples", "batches", "inflation", "control_variate", "mode", "workers", "track_sign", "max_step",
              "maslov_step", "checkpoints", "max_nodal_fraction", "fd_step"},
          where);
    SamplerConfig s;
    s.samples = integer_or(j, "samples", s.samples, where);
    s.batches = static_cast<int>(integer_or(j, "batches", s.batches, where));
    s.inflation = number_or(j, "inflation", s.inflation, where);
    s.control_variate = bool_or(j, "control_variate", s.control_variate, where);
    if (j.contains("mode")) s.mode = mode_of(string_of(j.at("mode"), where + ".mode"), where + ".mode");
    s.workers = static_cast<int>(integer_or(j, "workers", s.workers, where));
    s.track_sign = bool_or(j, "track_sign", s.track_sign, where);
    s.integrator.max_step = number_or(j, "max_step", s.integrator.max_step, where);
    s.maslov.integrator.max_step = number_or(j, "maslov_step", s.maslov.integrator.max_step, where);
    s.maslov.checkpoints = static_cast<int>(integer_or(j, "checkpoints", s.maslov.checkpoints, where));
    s.max_nodal_fraction = number_or(j, "max_nodal_fraction", s.max_nodal_fraction, where);
    s.fd_step = number_or(j, "fd_step", s.fd_step, where);
    if (s.samples < 2 || s.batches < 2 || s.samples < s.batches)
        throw ConfigError(where + ": need samples >= batches >= 2");
    if (!(s.inflation >= 1.0)) throw ConfigError(where + ": inflation must be at least 1");
    if (s.workers < 1) throw ConfigError(where + ": workers must be positive");
    if (!(s.integrator.max_step > 0.0) || !(s.maslov.integrator.max_step > 0.0))
        throw ConfigError(where + ": integrator steps must be positive");
    if (s.maslov.checkpoints < 1 || s.maslov.checkpoints > 8)
        throw ConfigError(where + ": checkpoints must be between 1 and 8");
    if (!(s.max_nodal_fraction >= 0.0 && s.max_nodal_fraction <= 1.0))
        throw ConfigError(where + ": max_nodal_fraction must lie in [0, 1]");
    if (!(s.fd_step > 0.0)) throw ConfigError(where + ": fd_step must be positive");
    return s;
}

}  // namespace detail

inline bool needs_task_evolutions(const std::string& sc) {
    return sc == "metaplectic_validation" || sc == "anharmonic_hbar_sweep" || sc == "orbit_family";
}

inline ExperimentConfig parse_config(const json& root, const std::filesystem::path& base = ".") {
    using namespace detail;
    ExperimentConfig c;
    allow(root, {"scenario", "name", "description", "seed", "output", "task", "sampler", "oracle", "tolerances",
                 "sweep", "echo", "family", "gallery"},
          "config");
    c.scenario = string_of(need(root, "scenario", "config"), "scenario");
    bool known = false;
    for (const auto& s : scenarios()) known = known || c.scenario == s.name;
    if (!known) throw ConfigError("unknown scenario '" + c.scenario + "'");
    if (root.contains("name")) c.name = string_of(root.at("name"), "name");
    if (c.name.empty() || c.name.find_first_of("/\\") != std::string::npos)
        throw ConfigError("name must be a plain file stem");
    if (root.contains("description")) string_of(root.at("description"), "description");
    if (root.contains("seed")) {
        if (!root.at("seed").is_number_unsigned()) throw ConfigError("seed: expected a non-negative integer");
        c.seed = root.at("seed").get<std::uint64_t>();
    }
    if (root.contains("output")) {
        const json& o = root.at("output");
        allow(o, {"dir"}, "output");
        c.output_dir = string_of(need(o, "dir", "output"), "output.dir");
    }
    if (root.contains("sampler")) c.sampler = sampler_of(root.at("sampler"), "sampler");
    c.sampler.seed = c.seed;
    int cutoff = 128;
    if (root.contains("oracle")) {
        const json& o = root.at("oracle");
        allow(o, {"enabled", "cutoff"}, "oracle");
        c.use_oracle = bool_or(o, "enabled", true, "oracle");
        cutoff = static_cast<int>(integer_or(o, "cutoff", cutoff, "oracle"));
        if (cutoff < 16) throw ConfigError("oracle.cutoff must be at least 16");
    }
    if (root.contains("tolerances")) {
        const json& t = root.at("tolerances");
        allow(t, {"sigma", "absolute"}, "tolerances");
        c.tol.sigma = number_or(t, "sigma", c.tol.sigma, "tolerances");
        c.tol.absolute = number_or(t, "absolute", c.tol.absolute, "tolerances");
        if (!(c.tol.sigma > 0.0) || !(c.tol.absolute >= 0.0)) throw ConfigError("tolerances must be positive");
    }

    // task
    const json& t = need(root, "task", "config");
    allow(t, {"hbar", "state", "hamiltonians", "observables", "evolutions", "heisenberg", "estimators",
              "symmetrization"},
          "task");
    CorrelationTask& task = c.task;
    task.hbar = number(need(t, "hbar", "task"), "task.hbar");
    if (!(task.hbar > 0.0)) throw ConfigError("task.hbar must be positive");
    task.oracle_dim = cutoff;
    const json& st = need(t, "state", "task");
    allow(st, {"mean", "G"}, "task.state");
    task.state.mean = vec_of(need(st, "mean", "task.state"), "task.state.mean");
    if (task.state.mean.size() % 2) throw ConfigError("task.state.mean needs 2N coordinates");
    const int N = static_cast<int>(task.state.mean.size() / 2);
    task.state.G = st.contains("G") ? mat_of(st.at("G"), "task.state.G") : Mat(Mat::Identity(2 * N, 2 * N));
    try {
        task.state.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("task.state: ") + e.what());
    }
    if (t.contains("hamiltonians")) {
        const json& hs = t.at("hamiltonians");
        if (!hs.is_object()) throw ConfigError("task.hamiltonians: expected an object");
        for (auto it = hs.begin(); it != hs.end(); ++it) {
            auto H = std::make_shared<const Hamiltonian>(hamiltonian_of(it.value(), "task.hamiltonians." + it.key()));
            if (H->dof() != N) throw ConfigError("task.hamiltonians." + it.key() + ": dimension differs from the state");
            c.hamiltonians[it.key()] = H;
        }
    }
    auto evolutions_of = [&](const char* key) {
        std::vector<EvolutionSpec> out;
        const json& a = t.at(key);
        if (!a.is_array()) throw ConfigError(std::string("task.") + key + ": expected an array");
        for (std::size_t k = 0; k < a.size(); ++k)
            out.push_back(evolution_of(a[k], c.hamiltonians, std::string("task.") + key + "[" + std::to_string(k) + "]"));
        return out;
    };
    if (t.contains("observables")) {
        const json& a = t.at("observables");
        if (!a.is_array()) throw ConfigError("task.observables: expected an array");
        for (std::size_t k = 0; k < a.size(); ++k)
            task.observables.push_back(observable_of(a[k], N, base, "task.observables[" + std::to_string(k) + "]"));
    }
    if (t.contains("heisenberg")) {
        if (t.contains("evolutions")) throw ConfigError("task: give either evolutions or heisenberg, not both");
        const auto V = evolutions_of("heisenberg");
        if (V.size() != task.observables.size())
            throw ConfigError("task.heisenberg: need one evolution per observable");
        const auto obs = task.observables;
        task = heisenberg_task(obs, V, task.state, task.hbar);
        task.oracle_dim = cutoff;
    } else if (t.contains("evolutions")) {
        task.evolutions = evolutions_of("evolutions");
    }
    if (t.contains("symmetrization")) {
        const std::string s = string_of(t.at("symmetrization"), "task.symmetrization");
        if (s == "none") task.symmetrization = Symmetrization::none;
        else if (s == "real_part") task.symmetrization = Symmetrization::real_part;
        else throw ConfigError("task.symmetrization must be none or real_part");
    }
    if (t.contains("estimators")) {
        const json& a = t.at("estimators");
        if (!a.is_array() || a.empty()) throw ConfigError("task.estimators: expected a non-empty array");
        for (const auto& e : a) c.estimators.push_back(estimator_from_string(string_of(e, "task.estimators")));
    }

    // scenario sections
    auto forbid = [&](const char* key) {
        if (root.contains(key)) throw ConfigError(std::string("section '") + key + "' does not apply to " + c.scenario);
    };
    const std::string& sc = c.scenario;
    if (sc != "anharmonic_hbar_sweep") forbid("sweep");
    if (sc != "echo_single" && sc != "echo_double") forbid("echo");
    if (sc != "orbit_family") forbid("family");
    if (sc != "polygon_gallery") forbid("gallery");

    if (needs_task_evolutions(sc) && task.evolutions.empty()) throw ConfigError(sc + ": task.evolutions required");
    if (sc == "metaplectic_validation" || sc == "anharmonic_hbar_sweep" || sc == "heisenberg_classical") {
        if (task.observables.empty()) throw ConfigError(sc + ": task.observables required");
        if (task.evolutions.empty()) throw ConfigError(sc + ": task needs evolutions or heisenberg");
        try {
            task.validate();
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("task: ") + e.what());
        }
    }
    if (sc == "metaplectic_validation") {
        if (!task.metaplectic()) throw ConfigError(sc + ": all Hamiltonians must be quadratic");
        if (c.estimators.empty()) c.estimators = {EstimatorKind::ivr_full};
    }
    if (sc == "anharmonic_hbar_sweep") {
        const json& s = need(root, "sweep", "config");
        allow(s, {"hbar_values"}, "sweep");
        const Vec h = vec_of(need(s, "hbar_values", "sweep"), "sweep.hbar_values");
        for (long i = 0; i < h.size(); ++i) {
            if (!(h(i) > 0.0)) throw ConfigError("sweep.hbar_values must be positive");
            c.hbar_values.push_back(h(i));
        }
        if (c.estimators.empty()) c.estimators = {EstimatorKind::ivr_full};
    }
    if (sc == "heisenberg_classical") {
        if (task.heisenberg.empty()) throw ConfigError(sc + ": task.heisenberg required");
        if (c.estimators.empty()) c.estimators = {EstimatorKind::classical_heisenberg, EstimatorKind::mechanical};
    }
    for (auto e : c.estimators) {
        if (e == EstimatorKind::classical_heisenberg && task.heisenberg.empty())
            throw ConfigError("classical_heisenberg needs task.heisenberg");
        if (e == EstimatorKind::chord_odd && task.nu() % 2 == 0) throw ConfigError("chord_odd needs odd nu");
        if (e == EstimatorKind::initial && !task.zero_time()) throw ConfigError("initial needs zero durations");
    }
    const bool oracle_used = c.use_oracle && sc != "orbit_family";
    if ((oracle_used || sc == "polygon_gallery") && N != 1) {
        if (sc == "polygon_gallery") throw ConfigError("polygon_gallery needs N=1");
        c.use_oracle = false;
    }
    if (sc == "echo_single" || sc == "echo_double") {
        const json& e = need(root, "echo", "config");
        allow(e, {"forward", "backward", "times", "diagnostic_samples"}, "echo");
        c.echo.forward = string_of(need(e, "forward", "echo"), "echo.forward");
        c.echo.backward = string_of(need(e, "backward", "echo"), "echo.backward");
        lookup(c.hamiltonians, e.at("forward"), "echo.forward");
        lookup(c.hamiltonians, e.at("backward"), "echo.backward");
        const Vec ts = vec_of(need(e, "times", "echo"), "echo.times");
        c.echo.times.assign(ts.data(), ts.data() + ts.size());
        c.echo.diagnostic_samples = integer_or(e, "diagnostic_samples", c.echo.diagnostic_samples, "echo");
        if (c.echo.diagnostic_samples < 1) throw ConfigError("echo.diagnostic_samples must be positive");
    }
    if (sc == "orbit_family") {
        const json& f = need(root, "family", "config");
        allow(f, {"base_centres", "moving", "p_range", "q_range", "nx", "ny", "seed_point", "max_iterations",
                  "tolerance"},
              "family");
        const json& b = need(f, "base_centres", "family");
        if (!b.is_array() || b.empty()) throw ConfigError("family.base_centres: expected an array of points");
        for (const auto& p : b) c.family.base.push_back(point_of(p, N, "family.base_centres"));
        if (c.family.base.size() != task.evolutions.size())
            throw ConfigError("family: need one base centre per evolution");
        if (c.family.base.size() % 2 == 0) throw ConfigError("family: the number of reflections must be odd");
        c.family.moving = static_cast<int>(integer_or(f, "moving", 0, "family"));
        if (c.family.moving < 0 || c.family.moving >= static_cast<int>(c.family.base.size()))
            throw ConfigError("family.moving out of range");
        const Vec pr = vec_of(need(f, "p_range", "family"), "family.p_range");
        const Vec qr = vec_of(need(f, "q_range", "family"), "family.q_range");
        if (pr.size() != 2 || qr.size() != 2) throw ConfigError("family ranges need [lo, hi]");
        c.family.p_lo = pr(0);
        c.family.p_hi = pr(1);
        c.family.q_lo = qr(0);
        c.family.q_hi = qr(1);
        c.family.nx = static_cast<int>(integer_or(f, "nx", 5, "family"));
        c.family.ny = static_cast<int>(integer_or(f, "ny", 5, "family"));
        if (c.family.nx < 1 || c.family.ny < 1) throw ConfigError("family grid must be at least 1 x 1");
        c.family.seed = f.contains("seed_point") ? point_of(f.at("seed_point"), N, "family.seed_point")
                                                 : PhasePoint(task.state.mean);
        c.family.newton.max_iterations = static_cast<int>(integer_or(f, "max_iterations", 50, "family"));
        c.family.newton.tolerance = number_or(f, "tolerance", 1e-10, "family");
        c.family.newton.integrator = c.sampler.integrator;
    }
    if (sc == "polygon_gallery") {
        const json& g = need(root, "gallery", "config");
        allow(g, {"polygons"}, "gallery");
        const json& ps = need(g, "polygons", "gallery");
        if (!ps.is_array() || ps.empty()) throw ConfigError("gallery.polygons: expected a non-empty array");
        for (const auto& poly : ps) {
            if (!poly.is_array() || poly.size() % 2 == 0)
                throw ConfigError("gallery.polygons: each polygon needs an odd number of centres");
            std::vector<PhasePoint> pts;
            for (const auto& p : poly) pts.push_back(point_of(p, N, "gallery.polygons"));
            c.polygons.push_back(pts);
        }
    }
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config '" + path + "'");
    json root;
    try {
        root = json::parse(is);
    } catch (const json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    try {
        auto c = parse_config(root, std::filesystem::path(path).parent_path());
        if (!root.contains("name")) c.name = std::filesystem::path(path).stem().string();
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Artifacts

struct Artifacts {
    std::vector<std::pair<std::string, std::string>> files;  // file name, CSV text
    std::vector<json> records;                              // JSON-lines entries
};

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

// Rows share their keys; "wall_time" stays out of the CSV so reruns are byte-identical.
inline std::string to_csv(const std::vector<json>& rows) {
    std::ostringstream os;
    if (rows.empty()) return "";
    bool first = true;
    for (auto it = rows.front().begin(); it != rows.front().end(); ++it) {
        if (it.key() == "wall_time") continue;
        os << (first ? "" : ",") << it.key();
        first = false;
    }
    os << "\n";
    for (const auto& r : rows) {
        first = true;
        for (auto it = rows.front().begin(); it != rows.front().end(); ++it) {
            if (it.key() == "wall_time") continue;
            os << (first ? "" : ",");
            first = false;
            const json& v = r.contains(it.key()) ? r.at(it.key()) : json();
            if (v.is_number_integer()) os << v.get<long long>();
            else if (v.is_number()) os << fmt(v.get<double>());
            else if (v.is_boolean()) os << (v.get<bool>() ? "true" : "false");
            else if (v.is_string()) os << v.get<std::string>();
        }
        os << "\n";
    }
    return os.str();
}

namespace detail {

inline json result_row(const std::string& estimator, double hbar, const CorrelationResult& r) {
    json j;
    j["estimator"] = estimator;
    j["hbar"] = hbar;
    j["re"] = r.value.real();
    j["im"] = r.value.imag();
    j["std_error"] = r.std_error;
    j["samples"] = r.samples;
    j["rejected_nodal"] = r.rejected_nodal;
    j["sign_flips"] = r.sign_flips;
    j["method"] = r.method;
    j["wall_time"] = r.wall_time;
    return j;
}

inline void compare(json& row, const CorrelationResult& r, const cplx& ref, const Tolerances& tol, bool have_ref) {
    if (!have_ref) {
        row["oracle_re"] = nullptr;
        row["oracle_im"] = nullptr;
        row["abs_dev"] = nullptr;
        row["pass"] = nullptr;
        return;
    }
    const double dev = std::abs(r.value - ref);
    row["oracle_re"] = ref.real();
    row["oracle_im"] = ref.imag();
    row["abs_dev"] = dev;
    row["pass"] = dev < std::max(tol.absolute, tol.sigma * r.std_error);
}

inline std::string path_csv(const std::vector<std::pair<std::string, std::vector<PhasePoint>>>& legs) {
    std::ostringstream os;
    os << "leg,index,p,q\n";
    for (const auto& [name, pts] : legs)
        for (std::size_t i = 0; i < pts.size(); ++i) {
            os << name << "," << i;
            for (long k = 0; k < pts[i].size(); ++k) os << "," << fmt(pts[i](k));
            os << "\n";
        }
    return os.str();
}

inline std::vector<PhasePoint> evolution_path(const EvolutionSpec& e, const PhasePoint& x0, const IntegratorOptions& o) {
    std::vector<PhasePoint> out;
    PhasePoint cur = x0;
    for (const auto& [H, t] : e.pieces()) {
        auto p = trajectory_samples(*H, cur, t, o);
        out.insert(out.end(), p.begin(), p.end());
        cur = p.back();
    }
    return out;
}

}  // namespace detail

inline Artifacts run_metaplectic(const ExperimentConfig& c) {
    Artifacts a;
    std::vector<json> rows;
    const bool have = c.use_oracle;
    const cplx ref = have ? correlation_oracle(c.task).value : cplx(0.0);
    for (auto e : c.estimators) {
        CorrelationTask t = c.task;
        t.estimator = e;
        const auto r = correlate(t, c.sampler);
        json row = detail::result_row(to_string(e), t.hbar, r);
        detail::compare(row, r, ref, c.tol, have);
        rows.push_back(row);
    }
    a.files.emplace_back(c.name + "_summary.csv", to_csv(rows));
    if (c.task.nu() % 2 == 0) {
        std::ostringstream os;
        write_compound_csv(collapsed_compound(c.task.state.mean, c.task.evolutions, c.sampler.integrator), os,
                           c.sampler.integrator);
        a.files.emplace_back(c.name + "_compound.csv", os.str());
    }
    a.records = rows;
    return a;
}

inline Artifacts run_sweep(const ExperimentConfig& c) {
    Artifacts a;
    std::vector<json> rows;
    std::map<std::string, std::vector<double>> devs;
    for (double h : c.hbar_values) {
        CorrelationTask base = c.task;
        base.hbar = h;
        const bool have = c.use_oracle;
        const cplx ref = have ? correlation_oracle(base).value : cplx(0.0);
        for (auto e : c.estimators) {
            CorrelationTask t = base;
            t.estimator = e;
            const auto r = correlate(t, c.sampler);
            json row = detail::result_row(to_string(e), h, r);
            detail::compare(row, r, ref, c.tol, have);
            if (have) devs[to_string(e)].push_back(std::abs(r.value - ref));
            rows.push_back(row);
        }
    }
    a.files.emplace_back(c.name + "_summary.csv", to_csv(rows));
    std::vector<json> trend;
    for (const auto& [name, d] : devs) {
        bool mono = true;
        for (std::size_t i = 1; i < d.size(); ++i) mono = mono && d[i] < d[i - 1];
        json t;
        t["estimator"] = name;
        t["points"] = static_cast<long>(d.size());
        t["monotone_decrease"] = mono;
        trend.push_back(t);
    }
    if (!trend.empty()) a.files.emplace_back(c.name + "_trend.csv", to_csv(trend));
    a.records = rows;
    a.records.insert(a.records.end(), trend.begin(), trend.end());
    return a;
}

inline Artifacts run_heisenberg(const ExperimentConfig& c) {
    Artifacts a;
    std::vector<json> rows;
    const bool have = c.use_oracle;
    CorrelationTask o = c.task;
    const cplx ref = have ? correlation_oracle(o).value : cplx(0.0);
    IntegratorOptions io = c.sampler.integrator;
    io.want_monodromy = false;
    const double phase = reduced_action(collapsed_compound(c.task.state.mean, c.task.evolutions, io));
    for (auto e : c.estimators) {
        CorrelationTask t = c.task;
        t.estimator = e;
        const auto r = correlate(t, c.sampler);
        json row = detail::result_row(to_string(e), t.hbar, r);
        detail::compare(row, r, ref, c.tol, have);
        row["collapsed_action"] = phase;
        rows.push_back(row);
    }
    a.files.emplace_back(c.name + "_summary.csv", to_csv(rows));
    std::vector<std::pair<std::string, std::vector<PhasePoint>>> legs;
    for (std::size_t j = 0; j < c.task.heisenberg.size(); ++j)
        legs.emplace_back("leg" + std::to_string(j + 1),
                          detail::evolution_path(c.task.heisenberg[j], c.task.state.mean, io));
    a.files.emplace_back(c.name + "_spider.csv", detail::path_csv(legs));
    a.records = rows;
    return a;
}

inline Artifacts run_echo(const ExperimentConfig& c, int repeats) {
    Artifacts a;
    std::vector<json> rows;
    const auto& Hf = *c.hamiltonians.at(c.echo.forward);
    const auto& Hb = *c.hamiltonians.at(c.echo.backward);
    const auto& st = c.task.state;
    const double h = c.task.hbar;
    for (double t : c.echo.times) {
        const auto er = loschmidt_echo(Hf, Hb, t, repeats, st, h, c.sampler, false, c.echo.diagnostic_samples);
        json row;
        row["t"] = t;
        row["repeats"] = repeats;
        row["re"] = er.result.value.real();
        row["im"] = er.result.value.imag();
        row["modulus"] = std::abs(er.result.value);
        row["std_error"] = er.result.std_error;
        row["samples"] = er.result.samples;
        row["method"] = er.result.method;
        row["wall_time"] = er.result.wall_time;
        if (c.use_oracle) {
            const auto oe = loschmidt_echo(Hf, Hb, t, repeats, st, h, c.sampler, true, 0);
            CorrelationResult r = er.result;
            detail::compare(row, r, oe.result.value, c.tol, true);
        } else {
            detail::compare(row, er.result, 0.0, c.tol, false);
        }
        row["area_gap"] = repeats == 2 ? json(er.mean_area_gap) : json(nullptr);
        rows.push_back(row);
    }
    a.files.emplace_back(c.name + "_summary.csv", to_csv(rows));
    if (!c.echo.times.empty()) {
        IntegratorOptions io = c.sampler.integrator;
        io.want_monodromy = false;
        const auto U = echo_evolution(Hf, Hb, c.echo.times.back(), repeats);
        a.files.emplace_back(c.name + "_path.csv", detail::path_csv({{"echo", detail::evolution_path(U, st.mean, io)}}));
    }
    a.records = rows;
    return a;
}

inline Artifacts run_family(const ExperimentConfig& c) {
    Artifacts a;
    const auto& f = c.family;
    std::vector<std::vector<PhasePoint>> grid;
    for (int ix = 0; ix < f.nx; ++ix)
        for (int iy = 0; iy < f.ny; ++iy) {
            auto cs = f.base;
            const double dp = f.nx > 1 ? f.p_lo + (f.p_hi - f.p_lo) * ix / (f.nx - 1.0) : f.p_lo;
            const double dq = f.ny > 1 ? f.q_lo + (f.q_hi - f.q_lo) * iy / (f.ny - 1.0) : f.q_lo;
            const int N = dof_of(cs[f.moving]);
            cs[f.moving].head(N).array() += dp;
            cs[f.moving].tail(N).array() += dq;
            grid.push_back(cs);
        }
    const auto fr = continue_family(grid, f.nx, f.ny, c.task.evolutions, f.seed, c.task.hbar, f.newton);
    std::ostringstream os;
    write_family_csv(fr, os);
    a.files.emplace_back(c.name + "_family.csv", os.str());
    json row;
    row["nodes"] = static_cast<long>(fr.orbits.size());
    row["solved"] = static_cast<long>(fr.orbits.size() - fr.failures.size());
    row["success_rate"] = fr.success_rate();
    row["resonance_crossings"] = static_cast<long>(fr.resonance_crossings.size());
    a.files.emplace_back(c.name + "_summary.csv", to_csv({row}));
    a.records = {row};
    return a;
}

inline Artifacts run_gallery(const ExperimentConfig& c) {
    Artifacts a;
    std::vector<json> rows;
    const double h = c.task.hbar;
    Oracle orc(h, c.task.oracle_dim);
    const auto idle = evolution(Hamiltonian::harmonic(1.0), 0.0);
    std::vector<std::pair<std::string, std::vector<PhasePoint>>> shapes;
    for (std::size_t k = 0; k < c.polygons.size(); ++k) {
        const auto& cs = c.polygons[k];
        const double area = polygon_area_from_centres(cs);
        auto corners = polygon_corners(cs);
        json row;
        row["polygon"] = static_cast<long>(k);
        row["centres"] = static_cast<long>(cs.size());
        row["area"] = area;
        row["expected_modulus"] = 0.5;
        row["expected_phase"] = std::remainder(area / h, 2.0 * pi);
        if (c.use_oracle) {
            const cplx tr = orc.compound_trace(cs, std::vector<EvolutionSpec>(cs.size(), idle), corners.front());
            row["oracle_modulus"] = std::abs(tr);
            row["oracle_phase"] = std::arg(tr);
            row["phase_dev"] = std::abs(std::remainder(std::arg(tr) - area / h, 2.0 * pi));
        } else {
            row["oracle_modulus"] = nullptr;
            row["oracle_phase"] = nullptr;
            row["phase_dev"] = nullptr;
        }
        rows.push_back(row);
        corners.push_back(corners.front());
        shapes.emplace_back("polygon" + std::to_string(k), corners);
    }
    a.files.emplace_back(c.name + "_summary.csv", to_csv(rows));
    a.files.emplace_back(c.name + "_polygons.csv", detail::path_csv(shapes));
    a.records = rows;
    return a;
}

inline Artifacts run_experiment(const ExperimentConfig& c) {
    Artifacts a;
    const std::string& s = c.scenario;
    if (s == "metaplectic_validation") a = run_metaplectic(c);
    else if (s == "anharmonic_hbar_sweep") a = run_sweep(c);
    else if (s == "heisenberg_classical") a = run_heisenberg(c);
    else if (s == "echo_single") a = run_echo(c, 1);
    else if (s == "echo_double") a = run_echo(c, 2);
    else if (s == "orbit_family") a = run_family(c);
    else if (s == "polygon_gallery") a = run_gallery(c);
    else throw ConfigError("unknown scenario '" + s + "'");
    for (auto& r : a.records) {
        json j;
        j["scenario"] = s;
        j["name"] = c.name;
        j["seed"] = c.seed;
        j.update(r);
        r = j;
    }
    return a;
}

// WWSC_OUTPUT_DIR, when set, replaces the configured directory.
inline std::filesystem::path output_dir(const ExperimentConfig& c) {
    if (const char* env = std::getenv("WWSC_OUTPUT_DIR"); env && *env) return env;
    return c.output_dir;
}

inline std::vector<std::filesystem::path> write_artifacts(const Artifacts& a, const std::filesystem::path& dir,
                                                          const std::string& name) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    for (const auto& [file, text] : a.files) {
        const auto p = dir / file;
        std::ofstream os(p, std::ios::binary);
        if (!os) throw Error("cannot write " + p.string());
        os << text;
        written.push_back(p);
    }
    const auto log = dir / (name + "_results.jsonl");
    std::ofstream os(log, std::ios::app);
    if (!os) throw Error("cannot write " + log.string());
    for (const auto& r : a.records) os << r.dump() << "\n";
    written.push_back(log);
    return written;
}

}  // namespace wwsc::experiment
