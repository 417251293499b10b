#pragma once
// Multi-time correlations C = tr U_{nu+1} A_nu U_nu ... A_1 U_1 rho.
//
// Every semiclassical estimator is an integral over a kernel that maps the
// integration variables z to the Wigner argument x0, the observable arguments
// x_j, an action S and an amplitude |det(I+M')|^{1/2} e^{-i pi k/2}.  A
// quadratic model of the kernel around a reference point is integrated in
// closed form; it is exact for quadratic Hamiltonians and otherwise serves as
// the control variate of an importance-sampled Monte Carlo estimate.

#include <chrono>
#include <random>
#include <thread>

#include "compound.hpp"
#include "gaussian_integral.hpp"
#include "oracle.hpp"

namespace wwsc {

enum class EstimatorKind { initial, ivr_full, mechanical, classical_heisenberg, chord_odd, oracle_exact };
enum class Symmetrization { none, real_part };
enum class IntegrationMode { automatic, exact, monte_carlo };

inline const char* to_string(EstimatorKind e) {
    switch (e) {
        case EstimatorKind::initial: return "initial";
        case EstimatorKind::ivr_full: return "ivr_full";
        case EstimatorKind::mechanical: return "mechanical";
        case EstimatorKind::classical_heisenberg: return "classical_heisenberg";
        case EstimatorKind::chord_odd: return "chord_odd";
        case EstimatorKind::oracle_exact: return "oracle_exact";
    }
    return "?";
}

inline EstimatorKind estimator_from_string(const std::string& s) {
    for (auto e : {EstimatorKind::initial, EstimatorKind::ivr_full, EstimatorKind::mechanical,
                   EstimatorKind::classical_heisenberg, EstimatorKind::chord_odd, EstimatorKind::oracle_exact})
        if (s == to_string(e)) return e;
    throw ConfigError("unknown estimator '" + s + "'");
}

struct SamplerConfig {
    std::uint64_t seed = 1;
    long samples = 200000;
    int batches = 20;
    double inflation = 1.4;           // proposal covariance factor
    bool control_variate = true;
    double max_nodal_fraction = 0.05;
    IntegrationMode mode = IntegrationMode::automatic;
    int workers = 1;
    bool track_sign = true;           // per-sample continuity of det(I+M')^{1/2}
    double fd_step = 1e-3;            // model derivatives for non-quadratic kernels
    IntegratorOptions integrator{0.05, true};
    MaslovOptions maslov;
};

struct CorrelationTask {
    std::vector<Observable> observables;    // A_1..A_nu
    std::vector<EvolutionSpec> evolutions;  // U_1..U_{nu+1}
    std::vector<EvolutionSpec> heisenberg;  // V_1..V_nu (classical estimator)
    GaussianState state;
    double hbar = 1.0;
    EstimatorKind estimator = EstimatorKind::ivr_full;
    Symmetrization symmetrization = Symmetrization::none;
    int oracle_dim = 128;

    std::size_t nu() const { return observables.size(); }
    int dof() const { return state.dof(); }

    bool zero_time() const {
        for (const auto& e : evolutions)
            if (!e.is_zero()) return false;
        return true;
    }
    bool metaplectic() const {
        auto quad = [](const std::vector<EvolutionSpec>& evs) {
            for (const auto& e : evs)
                for (const auto& [H, t] : e.pieces())
                    if (t != 0.0 && H->kind() != Hamiltonian::Kind::quadratic) return false;
            return true;
        };
        return quad(evolutions) && quad(heisenberg);
    }
    bool analytic_observables() const {
        for (const auto& o : observables)
            if (!o.is_analytic()) return false;
        return true;
    }

    void validate() const {
        state.validate();
        const int N = dof();
        if (!(hbar > 0.0)) throw ConfigError("hbar must be positive");
        if (observables.empty()) throw ConfigError("need at least one observable");
        if (evolutions.size() != nu() + 1) throw ConfigError("need nu+1 evolutions for nu observables");
        if (!heisenberg.empty() && heisenberg.size() != nu())
            throw ConfigError("need one Heisenberg evolution per observable");
        for (const auto& evs : {evolutions, heisenberg})
            for (const auto& e : evs)
                for (const auto& [H, t] : e.pieces()) {
                    if (!H) throw ConfigError("evolution without Hamiltonian");
                    if (H->dof() != N) throw ConfigError("Hamiltonian and state dimensions differ");
                    if (!std::isfinite(t)) throw ConfigError("non-finite duration");
                }
        for (const auto& o : observables) {
            if (o.is_polynomial() && o.poly().nvars() != 2 * N) throw ConfigError("observable dimension mismatch");
            if (o.is_gaussian() && (o.gaussian().centre.size() != 2 * N || !(o.gaussian().beta > 0.0)))
                throw ConfigError("Gaussian observable needs a centre of size 2N and beta > 0");
            if (o.is_grid()) {
                o.grid().validate();
                if (o.grid().grid.N != N || o.grid().kind != SymbolKind::weyl)
                    throw ConfigError("grid observables must be Weyl symbols of matching dimension");
            }
        }
        if (estimator == EstimatorKind::classical_heisenberg && heisenberg.empty())
            throw ConfigError("classical_heisenberg needs per-observable Heisenberg evolutions");
        if (estimator == EstimatorKind::chord_odd && nu() % 2 == 0)
            throw ConfigError("chord_odd needs an odd number of observables");
        if (estimator == EstimatorKind::initial && !zero_time())
            throw ConfigError("initial estimator needs all durations zero");
        if (estimator == EstimatorKind::oracle_exact && N != 1) throw ConfigError("the oracle supports N=1 only");
    }
};

struct CorrelationResult {
    cplx value = 0.0;
    double std_error = 0.0;
    long samples = 0;
    long rejected_nodal = 0;
    long sign_flips = 0;
    double wall_time = 0.0;
    std::string method;
};

// A_j(t_j) = V_j^dag A_j V_j, so U_1 = V_1, U_j = V_j V_{j-1}^dag, U_{nu+1} = V_nu^dag.
inline CorrelationTask heisenberg_task(const std::vector<Observable>& observables, const std::vector<EvolutionSpec>& V,
                                       const GaussianState& state, double hbar,
                                       EstimatorKind estimator = EstimatorKind::classical_heisenberg) {
    if (V.size() != observables.size() || V.empty()) throw ConfigError("heisenberg_task: one evolution per observable");
    CorrelationTask t;
    t.observables = observables;
    t.heisenberg = V;
    t.state = state;
    t.hbar = hbar;
    t.estimator = estimator;
    t.evolutions.push_back(V[0]);
    for (std::size_t j = 1; j < V.size(); ++j) t.evolutions.push_back(V[j - 1].inverse().followed_by(V[j]));
    t.evolutions.push_back(V.back().inverse());
    return t;
}

// Compound with every reflection centred on the point the trajectory has
// reached, so all reflection chords vanish.
inline CompoundTrajectory collapsed_compound(const PhasePoint& x0_minus, const std::vector<EvolutionSpec>& evolutions,
                                             const IntegratorOptions& opt = {}) {
    CompoundTrajectory tr;
    tr.initial = x0_minus;
    tr.evolutions = evolutions;
    PhasePoint cur = x0_minus;
    for (std::size_t j = 0; j < evolutions.size(); ++j) {
        tr.segments.push_back(integrate_segment(evolutions[j], cur, opt));
        cur = tr.segments.back().end;
        if (j + 1 < evolutions.size()) {
            tr.centres.push_back(cur);
            tr.reflection_chords.push_back(Vec::Zero(cur.size()));
        }
    }
    tr.final_point = cur;
    tr.midpoint = 0.5 * (x0_minus + cur);
    return tr;
}

namespace detail {

struct KernelPoint {
    Vec x0;
    std::vector<Vec> xs;
    double action = 0.0;
    double det = 1.0;  // det(I+M'); the integrand carries sqrt|det|
    int k = 0;
};

struct Kernel {
    int dim = 0;
    double pref = 1.0;
    bool amplitude = false;  // whether det and k enter
    std::function<KernelPoint(const Vec&, bool)> eval;
};

inline int lift_index(const std::function<Mat(double)>& Ms, const MaslovOptions& mopt) {
    return maslov_lift(Ms, +1.0, mopt).k;
}

// z = (x0, x_1..x_nu): {A_nu..A_1}(x0) W(x0) with the odd polygon phase.
inline Kernel initial_even_kernel(int N, std::size_t nu, double hbar) {
    Kernel K;
    const int n = 2 * N;
    K.dim = n * static_cast<int>(nu + 1);
    K.pref = std::pow(pi * hbar, -static_cast<double>(nu * N));
    K.eval = [n, nu](const Vec& z, bool) {
        KernelPoint p;
        std::vector<PhasePoint> c;
        for (std::size_t j = 0; j <= nu; ++j) c.push_back(z.segment(n * j, n));
        p.x0 = c[0];
        p.xs.assign(c.begin() + 1, c.end());
        p.action = polygon_area_from_centres(c);
        return p;
    };
    return K;
}

// z = (x_1..x_nu), nu odd: W at the closure centre of the reflection chain.
inline Kernel initial_odd_kernel(int N, std::size_t nu, double hbar) {
    Kernel K;
    const int n = 2 * N;
    K.dim = n * static_cast<int>(nu);
    K.pref = std::pow(pi * hbar, -static_cast<double>((nu - 1) * N));
    K.eval = [n, nu](const Vec& z, bool) {
        KernelPoint p;
        for (std::size_t j = 0; j < nu; ++j) p.xs.push_back(z.segment(n * j, n));
        p.x0 = closure_centre(p.xs);
        p.action = nu > 1 ? polygon_area_from_centres(p.xs) : 0.0;
        return p;
    };
    return K;
}

// z = x0: classical symbols multiplied pointwise.
inline Kernel mechanical_initial_kernel(int N, std::size_t nu) {
    Kernel K;
    K.dim = 2 * N;
    K.eval = [nu](const Vec& z, bool) {
        KernelPoint p;
        p.x0 = z;
        p.xs.assign(nu, z);
        return p;
    };
    return K;
}

// z = (x0-, x_1..x_nu)
inline Kernel ivr_kernel(int N, const std::vector<EvolutionSpec>& evs, double hbar, const SamplerConfig& cfg) {
    Kernel K;
    const int n = 2 * N;
    const std::size_t nu = evs.size() - 1;
    K.dim = n * static_cast<int>(nu + 1);
    K.pref = std::pow(2.0, -N) * std::pow(pi * hbar, -static_cast<double>(nu * N));
    K.amplitude = true;
    K.eval = [n, nu, evs, cfg](const Vec& z, bool with_index) {
        KernelPoint p;
        const PhasePoint xm = z.head(n);
        for (std::size_t j = 0; j < nu; ++j) p.xs.push_back(z.segment(n * (j + 1), n));
        const auto tr = build_compound(xm, p.xs, evs, cfg.integrator);
        const auto r = evaluate_compound(tr, with_index && cfg.track_sign, cfg.maslov);
        p.x0 = tr.midpoint;
        p.action = r.action;
        p.det = (Mat::Identity(n, n) + r.monodromy).determinant();
        p.k = r.caustic_crossings;
        return p;
    };
    return K;
}

// z = x0-: observables at the corners of the collapsed compound.
inline Kernel collapsed_kernel(int N, const std::vector<EvolutionSpec>& evs, const SamplerConfig& cfg) {
    Kernel K;
    const int n = 2 * N;
    K.dim = n;
    K.pref = std::pow(2.0, -N);
    K.amplitude = true;
    K.eval = [n, evs, cfg](const Vec& z, bool with_index) {
        KernelPoint p;
        const auto tr = collapsed_compound(z, evs, cfg.integrator);
        const Mat M = compound_monodromy(tr);
        p.x0 = tr.midpoint;
        p.xs = tr.centres;
        p.action = reduced_action(tr);
        p.det = (Mat::Identity(n, n) + M).determinant();
        if (with_index && cfg.track_sign) {
            auto Ms = [&](double s) -> Mat {
                if (s == 1.0) return M;
                return compound_monodromy(collapsed_compound(z, scaled(evs, s), cfg.maslov.integrator));
            };
            p.k = lift_index(Ms, cfg.maslov);
        }
        return p;
    };
    return K;
}

// z = x0: each observable transported along its own flow.
inline Kernel classical_kernel(int N, const std::vector<EvolutionSpec>& V, const SamplerConfig& cfg) {
    Kernel K;
    K.dim = 2 * N;
    IntegratorOptions o = cfg.integrator;
    o.want_monodromy = false;
    K.eval = [V, o](const Vec& z, bool) {
        KernelPoint p;
        p.x0 = z;
        for (const auto& v : V) p.xs.push_back(v.is_zero() ? Vec(z) : integrate_segment(v, z, o).end);
        return p;
    };
    return K;
}

struct Model {
    Vec zr;
    GaussianIntegrand g;  // in d = z - zr
    bool exact = false;
    Mat env_A;            // real proposal precision
    Vec env_b;
    int k_ref = 0;
};

inline cplx amplitude_of(const KernelPoint& p, bool amp) {
    if (!amp) return 1.0;
    return std::sqrt(std::abs(p.det)) * std::exp(cplx(0.0, -0.5 * pi * p.k));
}

// Linear maps for x0 and x_j, quadratic action, all by central differences.
inline Model build_model(const Kernel& K, const Vec& zr, const CorrelationTask& task, bool quadratic_kernel,
                         double fd_step) {
    const int d = K.dim;
    const std::size_t nu = task.nu();
    const double hbar = task.hbar;
    const double h = quadratic_kernel ? 1.0 : fd_step;
    Model m;
    m.zr = zr;
    const KernelPoint pr = K.eval(zr, true);
    m.k_ref = pr.k;
    const long n = pr.x0.size();
    Mat G(n, d);
    std::vector<Mat> F(nu, Mat(n, d));
    Vec grad(d);
    Mat Hs(d, d);
    std::vector<double> Sp(d), Sm(d);
    for (int i = 0; i < d; ++i) {
        Vec zp = zr, zm = zr;
        zp(i) += h;
        zm(i) -= h;
        const auto a = K.eval(zp, false), b = K.eval(zm, false);
        G.col(i) = (a.x0 - b.x0) / (2 * h);
        for (std::size_t j = 0; j < nu; ++j) F[j].col(i) = (a.xs[j] - b.xs[j]) / (2 * h);
        grad(i) = (a.action - b.action) / (2 * h);
        Hs(i, i) = (a.action - 2.0 * pr.action + b.action) / (h * h);
        Sp[i] = a.action;
        Sm[i] = b.action;
    }
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            auto S_at = [&](double si, double sj) {
                Vec z = zr;
                z(i) += si * h;
                z(j) += sj * h;
                return K.eval(z, false).action;
            };
            Hs(i, j) = Hs(j, i) = (S_at(1, 1) - S_at(1, -1) - S_at(-1, 1) + S_at(-1, -1)) / (4 * h * h);
        }

    GaussianIntegrand& g = m.g;
    g = GaussianIntegrand::zero_form(d);
    m.env_A = Mat::Zero(d, d);
    m.env_b = Vec::Zero(d);
    // Wigner weight
    const Mat& GW = task.state.G;
    const Vec u = pr.x0 - task.state.mean;
    m.env_A += 2.0 * G.transpose() * GW * G / hbar;
    m.env_b += -2.0 * G.transpose() * GW * u / hbar;
    g.c += -u.dot(GW * u) / hbar;
    cplx pref = K.pref * std::pow(pi * hbar, -task.dof()) * std::sqrt(GW.determinant()) * amplitude_of(pr, K.amplitude);
    bool analytic = true;
    for (std::size_t j = 0; j < nu; ++j) {
        const auto& o = task.observables[j];
        if (o.is_gaussian()) {
            const auto& go = o.gaussian();
            const Vec v = pr.xs[j] - go.centre;
            m.env_A += 2.0 * go.beta * F[j].transpose() * F[j] / hbar;
            m.env_b += -2.0 * go.beta * F[j].transpose() * v / hbar;
            g.c += -go.beta * v.squaredNorm() / hbar;
            pref *= go.amplitude;
        } else if (o.is_polynomial()) {
            g.P = g.P * o.poly().substitute_affine(F[j].cast<cplx>(), pr.xs[j].cast<cplx>());
        } else {
            // envelope of |A| for the proposal only
            analytic = false;
            const auto& s = o.grid();
            Vec mu = Vec::Zero(n);
            Mat C = Mat::Zero(n, n);
            double w = 0.0;
            for (std::size_t q = 0; q < s.values.size(); ++q) {
                const double a = std::abs(s.values[q]);
                if (a == 0.0) continue;
                const Vec x = s.grid.point(q);
                w += a;
                mu += a * x;
                C += a * x * x.transpose();
            }
            if (w == 0.0) throw EstimatorError("grid observable vanishes identically");
            mu /= w;
            C = C / w - mu * mu.transpose();
            const Mat P = (C + 1e-12 * Mat::Identity(n, n)).inverse();
            m.env_A += F[j].transpose() * P * F[j];
            m.env_b += F[j].transpose() * P * (mu - pr.xs[j]);
        }
    }
    g.A = m.env_A.cast<cplx>() - I_unit * Hs.cast<cplx>() / hbar;
    g.b = m.env_b.cast<cplx>() + I_unit * grad.cast<cplx>() / hbar;
    g.c += I_unit * pr.action / hbar;
    g.pref = pref;
    // with grid observables the form carries only the envelope and serves the proposal
    m.exact = analytic && quadratic_kernel;
    return m;
}

inline cplx integrand(const Kernel& K, const KernelPoint& p, const CorrelationTask& task) {
    cplx v = K.pref * wigner_gaussian(task.state, p.x0, task.hbar);
    if (v == cplx(0.0)) return 0.0;
    for (std::size_t j = 0; j < task.nu(); ++j) {
        v *= task.observables[j](p.xs[j], task.hbar);
        if (v == cplx(0.0)) return 0.0;
    }
    return v * amplitude_of(p, K.amplitude) * std::exp(cplx(0.0, p.action / task.hbar));
}

struct BatchSum {
    cplx sum = 0.0;
    long n = 0, nodal = 0, flips = 0;
};

inline CorrelationResult monte_carlo(const Kernel& K, const Model& m, const CorrelationTask& task,
                                     const SamplerConfig& cfg) {
    const int d = K.dim;
    if (cfg.samples < 2 || cfg.batches < 2 || cfg.samples < cfg.batches)
        throw ConfigError("sampler needs at least two batches and one sample per batch");
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m.env_A + m.env_A.transpose()));
    const double lmax = es.eigenvalues().maxCoeff(), lmin = es.eigenvalues().minCoeff();
    if (!(lmin > 1e-10 * lmax))
        throw EstimatorError("sampler degenerate: integrand has no Gaussian envelope in some directions "
                             "(polynomial observables need quadratic Hamiltonians)");
    const Vec mu = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose() * m.env_b;
    // proposal N(mu, infl * env_A^-1)
    const Vec sd = (cfg.inflation * es.eigenvalues().cwiseInverse()).cwiseSqrt();
    const Mat L = es.eigenvectors() * sd.asDiagonal();
    const double log_norm = -0.5 * d * std::log(2.0 * pi) - sd.array().log().sum();
    cplx model_integral = 0.0;
    bool use_cv = false;
    if (cfg.control_variate && task.analytic_observables()) {
        model_integral = m.g.integral();
        use_cv = std::isfinite(model_integral.real()) && std::isfinite(model_integral.imag());
    }

    const long per = cfg.samples / cfg.batches;
    std::vector<BatchSum> sums(cfg.batches);
    auto run_batch = [&](int b) {
        std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                          static_cast<std::uint32_t>(b)};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> nd;
        BatchSum s;
        Vec w(d);
        for (long i = 0; i < per; ++i) {
            for (int k = 0; k < d; ++k) w(k) = nd(rng);
            const Vec dz = mu + L * w;
            const double logq = log_norm - 0.5 * w.squaredNorm();
            const double q = std::exp(logq);
            cplx f = 0.0;
            const auto p = K.eval(m.zr + dz, true);
            if (K.amplitude && std::abs(p.det) < 1e-12) {
                ++s.nodal;
            } else {
                f = integrand(K, p, task);
                if (p.k != m.k_ref) ++s.flips;
            }
            if (use_cv) f -= m.g(dz);
            s.sum += f / q;
            ++s.n;
        }
        sums[b] = s;
    };
    const int workers = std::max(1, std::min(cfg.workers, cfg.batches));
    if (workers == 1) {
        for (int b = 0; b < cfg.batches; ++b) run_batch(b);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errs(workers);
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                try {
                    for (int b = w; b < cfg.batches; b += workers) run_batch(b);
                } catch (...) {
                    errs[w] = std::current_exception();
                }
            });
        for (auto& t : pool) t.join();
        for (auto& e : errs)
            if (e) std::rethrow_exception(e);
    }
    CorrelationResult r;
    std::vector<cplx> means;
    cplx total = 0.0;
    for (const auto& s : sums) {
        means.push_back(s.sum / static_cast<double>(s.n));
        total += s.sum;
        r.samples += s.n;
        r.rejected_nodal += s.nodal;
        r.sign_flips += s.flips;
    }
    if (static_cast<double>(r.rejected_nodal) > cfg.max_nodal_fraction * r.samples)
        throw EstimatorError("excessive nodal rejections: " + std::to_string(r.rejected_nodal) + " of " +
                             std::to_string(r.samples));
    const cplx mean = total / static_cast<double>(r.samples);
    double var = 0.0;
    for (const auto& v : means) var += std::norm(v - mean);
    var /= (cfg.batches - 1.0);
    r.value = mean + model_integral * (use_cv ? 1.0 : 0.0);
    r.std_error = std::sqrt(var / cfg.batches);
    r.method = use_cv ? "monte_carlo+cv" : "monte_carlo";
    return r;
}

inline CorrelationResult integrate_kernel(const Kernel& K, const Vec& zr, const CorrelationTask& task,
                                          const SamplerConfig& cfg, bool quadratic_kernel) {
    const Model m = build_model(K, zr, task, quadratic_kernel, cfg.fd_step);
    const bool exact_ok = m.exact;
    if (cfg.mode == IntegrationMode::exact && !exact_ok)
        throw EstimatorError("exact integration needs quadratic Hamiltonians and analytic observables");
    if (exact_ok && cfg.mode != IntegrationMode::monte_carlo) {
        CorrelationResult r;
        r.value = m.g.integral();
        r.method = "gaussian_exact";
        return r;
    }
    return monte_carlo(K, m, task, cfg);
}

// Newton iteration on x0- so that x0(x0-) hits the state mean.
inline Vec aim_midpoint(const std::function<Vec(const Vec&)>& x0_of, const Vec& start, const Vec& target) {
    Vec x = start;
    const long n = x.size();
    for (int it = 0; it < 30; ++it) {
        const Vec f = x0_of(x) - target;
        if (f.norm() < 1e-12 * (1.0 + target.norm())) break;
        Mat Jm(n, n);
        const double h = 1e-6;
        for (long i = 0; i < n; ++i) {
            Vec a = x, b = x;
            a(i) += h;
            b(i) -= h;
            Jm.col(i) = (x0_of(a) - x0_of(b)) / (2 * h);
        }
        if (std::abs(Jm.determinant()) < 1e-8) break;
        const Vec step = Jm.partialPivLu().solve(f);
        if (!step.allFinite()) break;
        x -= step;
    }
    return x;
}

inline Vec observable_anchor(const Observable& o, const Vec& fallback) {
    if (o.is_gaussian()) return o.gaussian().centre;
    return fallback;
}

inline CorrelationTask padded_even(const CorrelationTask& t) {
    CorrelationTask p = t;
    p.observables.push_back(Observable::identity(t.dof()));
    auto last = t.evolutions.back().pieces().back().first;
    p.evolutions.push_back(EvolutionSpec{last, 0.0, {}});
    return p;
}

inline CorrelationResult finish(CorrelationResult r, const CorrelationTask& t,
                                std::chrono::steady_clock::time_point t0) {
    if (t.symmetrization == Symmetrization::real_part) r.value = r.value.real();
    if (!std::isfinite(r.value.real()) || !std::isfinite(r.value.imag()))
        throw EstimatorError("correlation estimate is not finite");
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

}  // namespace detail

// Zero-time correlation.  Polynomial observables use the exact Moyal product;
// otherwise the even product kernel (or the odd closure form) is integrated.
inline CorrelationResult correlation_initial(const CorrelationTask& task, bool mechanical = false,
                                             const SamplerConfig& cfg = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    task.validate();
    if (!task.zero_time()) throw ConfigError("initial estimator needs all durations zero");
    const int N = task.dof();
    const std::size_t nu = task.nu();
    bool all_poly = true, all_grid = true;
    for (const auto& o : task.observables) {
        all_poly = all_poly && o.is_polynomial();
        all_grid = all_grid && o.is_grid();
    }
    CorrelationResult r;
    if (all_poly) {
        std::vector<Poly> written;
        for (auto it = task.observables.rbegin(); it != task.observables.rend(); ++it) written.push_back(it->poly());
        Poly P = Poly::constant(2 * N, 1.0);
        if (mechanical)
            for (const auto& f : written) P = P * f;
        else
            P = weyl_product(written, task.hbar);
        r.value = gaussian_expectation(P, task.state.mean.cast<cplx>(), task.state.covariance(task.hbar).cast<cplx>());
        r.method = mechanical ? "moyal_pointwise" : "moyal_exact";
        return detail::finish(r, task, t0);
    }
    if (all_grid && !mechanical && nu == 2 && N == 1) {
        // trapezoid quadrature of {A_2 A_1}(x0) W(x0) over the observables' grid
        const GridSymbol& A1 = task.observables[0].grid();
        const GridSymbol& A2 = task.observables[1].grid();
        const GridSpec& g = A1.grid;
        cplx s = 0.0;
        for (std::size_t q = 0; q < g.size(); ++q) {
            const Vec x = g.point(q);
            const double w = wigner_gaussian(task.state, x, task.hbar);
            if (w < 1e-16 * wigner_gaussian(task.state, task.state.mean, task.hbar)) continue;
            s += w * weyl_product(std::vector<GridSymbol>{A2, A1}, x);
        }
        r.value = s * g.cell_volume();
        r.samples = static_cast<long>(g.size());
        r.method = "grid_quadrature";
        return detail::finish(r, task, t0);
    }
    detail::Kernel K;
    Vec zr;
    const Vec m = task.state.mean;
    if (mechanical) {
        K = detail::mechanical_initial_kernel(N, nu);
        zr = m;
    } else if (nu % 2 == 0) {
        K = detail::initial_even_kernel(N, nu, task.hbar);
        zr.resize(K.dim);
        zr.head(2 * N) = m;
        for (std::size_t j = 0; j < nu; ++j) zr.segment(2 * N * (j + 1), 2 * N) = detail::observable_anchor(task.observables[j], m);
    } else {
        K = detail::initial_odd_kernel(N, nu, task.hbar);
        zr.resize(K.dim);
        for (std::size_t j = 0; j < nu; ++j) zr.segment(2 * N * j, 2 * N) = detail::observable_anchor(task.observables[j], m);
    }
    r = detail::integrate_kernel(K, zr, task, cfg, true);
    return detail::finish(r, task, t0);
}

inline CorrelationResult correlation_chord(const CorrelationTask& task, const SamplerConfig& cfg = {});

// Full initial-value estimate over (x0-, x_1..x_nu).
inline CorrelationResult correlation_ivr(const CorrelationTask& task, const SamplerConfig& cfg = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    task.validate();
    if (task.nu() % 2 == 1) return correlation_chord(task, cfg);
    const int N = task.dof();
    const std::size_t nu = task.nu();
    const auto K = detail::ivr_kernel(N, task.evolutions, task.hbar, cfg);
    const Vec m = task.state.mean;
    IntegratorOptions o = cfg.integrator;
    o.want_monodromy = false;
    // centres on the observables, or on the running path for unlocalized ones
    auto centres_for = [&](const Vec& xm) {
        std::vector<PhasePoint> c;
        Vec cur = xm;
        for (std::size_t j = 0; j < nu; ++j) {
            cur = integrate_segment(task.evolutions[j], cur, o).end;
            const Vec a = detail::observable_anchor(task.observables[j], cur);
            c.push_back(a);
            cur = reflect(cur, a);
        }
        return c;
    };
    auto x0_of = [&](const Vec& xm) { return build_compound(xm, centres_for(xm), task.evolutions, o).midpoint; };
    const Vec xm = detail::aim_midpoint(x0_of, m, m);
    const auto c = centres_for(xm);
    Vec zr(K.dim);
    zr.head(2 * N) = xm;
    for (std::size_t j = 0; j < nu; ++j) zr.segment(2 * N * (j + 1), 2 * N) = c[j];
    auto r = detail::integrate_kernel(K, zr, task, cfg, task.metaplectic());
    return detail::finish(r, task, t0);
}

// Collapsed (mechanical) estimate over x0- alone.  Odd nu is padded with an
// identity observable and a zero-duration evolution so that det(I+M') does
// not vanish at zero time.
inline CorrelationResult correlation_mechanical(const CorrelationTask& task_in, const SamplerConfig& cfg = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    task_in.validate();
    const CorrelationTask task = task_in.nu() % 2 ? detail::padded_even(task_in) : task_in;
    const int N = task.dof();
    const auto K = detail::collapsed_kernel(N, task.evolutions, cfg);
    IntegratorOptions o = cfg.integrator;
    o.want_monodromy = false;
    auto x0_of = [&](const Vec& xm) { return collapsed_compound(xm, task.evolutions, o).midpoint; };
    const Vec zr = detail::aim_midpoint(x0_of, task.state.mean, task.state.mean);
    auto r = detail::integrate_kernel(K, zr, task, cfg, task.metaplectic());
    return detail::finish(r, task_in, t0);
}

inline CorrelationResult correlation_classical_heisenberg(const CorrelationTask& task, const SamplerConfig& cfg = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    task.validate();
    if (task.heisenberg.empty()) throw ConfigError("classical_heisenberg needs per-observable Heisenberg evolutions");
    const auto K = detail::classical_kernel(task.dof(), task.heisenberg, cfg);
    auto r = detail::integrate_kernel(K, task.state.mean, task, cfg, task.metaplectic());
    return detail::finish(r, task, t0);
}

// Odd nu.  At zero time this is the closure-centre form; with evolution the
// task is padded to even nu and handed to the full estimator.
inline CorrelationResult correlation_chord(const CorrelationTask& task, const SamplerConfig& cfg) {
    task.validate();
    if (task.nu() % 2 == 0) throw ConfigError("chord route needs an odd number of observables");
    if (task.zero_time()) {
        CorrelationTask t = task;
        t.estimator = EstimatorKind::initial;
        auto r = correlation_initial(t, false, cfg);
        return r;
    }
    const auto t0 = std::chrono::steady_clock::now();
    CorrelationTask p = detail::padded_even(task);
    p.estimator = EstimatorKind::ivr_full;
    p.symmetrization = Symmetrization::none;
    auto r = correlation_ivr(p, cfg);
    return detail::finish(r, task, t0);
}

inline CorrelationResult correlation_oracle(const CorrelationTask& task) {
    const auto t0 = std::chrono::steady_clock::now();
    task.validate();
    if (task.dof() != 1) throw ConfigError("the oracle supports N=1 only");
    Oracle orc(task.hbar, task.oracle_dim);
    CorrelationResult r;
    r.value = orc.correlation(task.observables, task.evolutions, task.state);
    r.method = "oracle";
    return detail::finish(r, task, t0);
}

inline CorrelationResult correlate(const CorrelationTask& task, const SamplerConfig& cfg = {}) {
    switch (task.estimator) {
        case EstimatorKind::initial: return correlation_initial(task, false, cfg);
        case EstimatorKind::ivr_full: return correlation_ivr(task, cfg);
        case EstimatorKind::mechanical: return correlation_mechanical(task, cfg);
        case EstimatorKind::classical_heisenberg: return correlation_classical_heisenberg(task, cfg);
        case EstimatorKind::chord_odd: return correlation_chord(task, cfg);
        case EstimatorKind::oracle_exact: return correlation_oracle(task);
    }
    throw ConfigError("unknown estimator");
}

// ---------------------------------------------------------------------------
// Loschmidt echo tr(U_b^dag U_f rho), optionally repeated.  The single echo is
// the nu=1 task with A_1 = I; integrating the identity over its reflection
// centre leaves the one composite evolution U_b^dag U_f.

struct EchoResult {
    CorrelationResult result;
    double mean_area_gap = 0.0;  // mean |S'(double) - 2 S'(single)|, repeats = 2 only
    long diagnostic_samples = 0;
};

inline EvolutionSpec echo_evolution(const Hamiltonian& H_fwd, const Hamiltonian& H_bwd, double t, int repeats) {
    if (repeats != 1 && repeats != 2) throw ConfigError("echo repeats must be 1 or 2");
    const EvolutionSpec single = evolution(H_fwd, t).followed_by(evolution(H_bwd, -t));
    return repeats == 1 ? single : single.followed_by(single);
}

inline EchoResult loschmidt_echo(const Hamiltonian& H_fwd, const Hamiltonian& H_bwd, double t, int repeats,
                                 const GaussianState& state, double hbar, const SamplerConfig& cfg = {},
                                 bool use_oracle = false, long diagnostic_samples = 2000) {
    const auto t0 = std::chrono::steady_clock::now();
    state.validate();
    if (H_fwd.dof() != state.dof() || H_bwd.dof() != state.dof())
        throw ConfigError("echo: Hamiltonian and state dimensions differ");
    const EvolutionSpec U = echo_evolution(H_fwd, H_bwd, t, repeats);
    CorrelationTask task;
    task.state = state;
    task.hbar = hbar;
    task.evolutions = {U};
    EchoResult er;
    if (use_oracle) {
        if (state.dof() != 1) throw ConfigError("the oracle supports N=1 only");
        Oracle orc(hbar);
        er.result.value = orc.correlation(std::vector<CMat>{}, std::vector<CMat>{orc.evolution_operator(U)},
                                          orc.density(state));
        er.result.method = "oracle";
    } else {
        const int N = state.dof();
        const auto K = detail::collapsed_kernel(N, task.evolutions, cfg);
        IntegratorOptions o = cfg.integrator;
        o.want_monodromy = false;
        auto x0_of = [&](const Vec& xm) { return integrate_segment(U, xm, o).centre; };
        const Vec zr = detail::aim_midpoint(x0_of, state.mean, state.mean);
        bool quad = H_fwd.kind() == Hamiltonian::Kind::quadratic && H_bwd.kind() == Hamiltonian::Kind::quadratic;
        er.result = detail::integrate_kernel(K, zr, task, cfg, quad);
    }
    if (repeats == 2 && diagnostic_samples > 0) {
        const EvolutionSpec single = echo_evolution(H_fwd, H_bwd, t, 1);
        IntegratorOptions o = cfg.integrator;
        o.want_monodromy = false;
        std::mt19937_64 rng(cfg.seed);
        std::normal_distribution<double> nd;
        Eigen::LLT<Mat> llt(state.covariance(hbar));
        const Mat L = llt.matrixL();
        double acc = 0.0;
        Vec w(state.mean.size());
        for (long i = 0; i < diagnostic_samples; ++i) {
            for (long k = 0; k < w.size(); ++k) w(k) = nd(rng);
            const Vec x = state.mean + L * w;
            const double s1 = integrate_segment(single, x, o).action;
            const double s2 = integrate_segment(U, x, o).action;
            acc += std::abs(s2 - 2.0 * s1);
        }
        er.mean_area_gap = acc / diagnostic_samples;
        er.diagnostic_samples = diagnostic_samples;
    }
    er.result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return er;
}

}  // namespace wwsc
