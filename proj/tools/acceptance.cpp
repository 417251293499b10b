// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "wwsc/experiment.hpp"

using namespace wwsc;
namespace ex = wwsc::experiment;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[200];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Poly mono(int np, int nq, cplx c = 1.0) {
    Poly r(2);
    r.add_term({np, nq}, c);
    return r;
}
Observable poly_obs(const Poly& p) { return Observable::polynomial(p); }
Observable gauss_obs(double p, double q, double beta) { return {GaussianObservable{make_vec({p, q}), beta, 1.0}}; }

const Hamiltonian harmonic = Hamiltonian::harmonic(1.0);
const GaussianState squeezed{make_vec({0.3, -0.4}), (Mat(2, 2) << 1.6, 0.2, 0.2, 0.6).finished()};

Hamiltonian tilted() {
    Mat Q(2, 2);
    Q << 0.5, 0.1, 0.1, 0.8;
    return Hamiltonian::quadratic(Q, make_vec({0.2, -0.1}));
}

CorrelationTask make_task(std::vector<Observable> obs, std::vector<EvolutionSpec> evs, const GaussianState& st,
                          double hbar, EstimatorKind e) {
    CorrelationTask t;
    t.observables = std::move(obs);
    t.evolutions = std::move(evs);
    t.state = st;
    t.hbar = hbar;
    t.estimator = e;
    return t;
}

cplx oracle_of(CorrelationTask t) {
    t.estimator = EstimatorKind::oracle_exact;
    return correlate(t).value;
}

SamplerConfig mc(long n, std::uint64_t seed) {
    SamplerConfig c;
    c.mode = IntegrationMode::monte_carlo;
    c.samples = n;
    c.seed = seed;
    return c;
}

// ---------------------------------------------------------------------------

Outcome metaplectic_exactness() {
    const auto H2 = tilted();
    const Hamiltonian& h = harmonic;
    const Poly q = mono(0, 1), p = mono(1, 0);
    struct Case {
        std::vector<Observable> obs;
        std::vector<EvolutionSpec> evs;
    };
    const std::vector<Case> cases{
        {{poly_obs(q), poly_obs(mono(2, 0) + q)}, {evolution(h, 0.3), evolution(H2, 0.7), evolution(h, -0.2)}},
        {{poly_obs(mono(0, 2))}, {evolution(H2, 0.9), evolution(h, -0.3)}},
        {{poly_obs(mono(1, 1))}, {evolution(h, 1.3), evolution(H2, 0.4)}},
        {{poly_obs(p), poly_obs(q)}, {evolution(H2, 0.5), evolution(h, 1.7), evolution(H2, -0.8)}},
        {{poly_obs(mono(0, 2)), poly_obs(mono(2, 0))}, {evolution(h, 3.6), evolution(H2, 0.6), evolution(h, 0.3)}},
        {{poly_obs(q + mono(1, 1, 0.5)), poly_obs(p + mono(0, 2, -0.3))}, {evolution(H2, 2.2), evolution(H2, -1.1), evolution(h, 0.9)}},
    };
    Outcome o;
    double worst = 0.0, slowest = 0.0;
    for (const auto& c : cases) {
        const auto t = make_task(c.obs, c.evs, squeezed, 0.5, c.obs.size() % 2 ? EstimatorKind::chord_odd : EstimatorKind::ivr_full);
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = correlate(t);
        slowest = std::max(slowest, seconds_since(t0));
        const double dev = std::abs(r.value - oracle_of(t));
        worst = std::max(worst, dev);
        if (!(dev < std::max(1e-6, 3.0 * r.std_error))) o.ok = false;
    }
    if (slowest > 120.0) o.ok = false;
    o.detail = std::to_string(cases.size()) + fmt(" quadratic tasks, worst |C - C_oracle| = %.2e, slowest %.2f s", worst, slowest);
    return o;
}

Outcome zero_time_anchor() {
    const double hbar = 0.5;
    Outcome o;
    double worst_q = 0.0, worst_sigma = 0.0;
    auto zeros = [](std::size_t n) { return std::vector<EvolutionSpec>(n, evolution(harmonic, 0.0)); };
    const std::vector<Observable> gauss{gauss_obs(0.2, 0.1, 0.7), gauss_obs(-0.3, 0.4, 1.1), gauss_obs(0.1, -0.2, 0.9)};
    const std::vector<Observable> mixed{poly_obs(mono(0, 1)), poly_obs(mono(1, 0)), poly_obs(mono(1, 1))};
    const std::vector<Observable> commuting{poly_obs(mono(0, 1)), poly_obs(mono(0, 2)), poly_obs(mono(0, 3))};
    auto check_q = [&](cplx a, cplx b) {
        const double d = std::abs(a - b);
        worst_q = std::max(worst_q, d);
        if (!(d < 1e-6)) o.ok = false;
    };
    for (std::size_t nu : {1, 2, 3}) {
        const auto full = nu % 2 ? EstimatorKind::chord_odd : EstimatorKind::ivr_full;
        for (const auto* set : {&gauss, &mixed}) {
            std::vector<Observable> obs(set->begin(), set->begin() + nu);
            auto t = make_task(obs, zeros(nu + 1), squeezed, hbar, EstimatorKind::initial);
            const cplx ref = correlate(t).value;
            check_q(ref, oracle_of(t));
            t.estimator = full;
            check_q(correlate(t).value, ref);
        }
        // sampled
        {
            std::vector<Observable> obs(gauss.begin(), gauss.begin() + nu);
            auto t = make_task(obs, zeros(nu + 1), squeezed, hbar, full);
            const cplx ref = oracle_of(t);
            auto cfg = mc(40000, 17 + nu);
            cfg.control_variate = false;
            const auto r = correlate(t, cfg);
            const double z = std::abs(r.value - ref) / r.std_error;
            worst_sigma = std::max(worst_sigma, z);
            if (!(z < 3.0)) o.ok = false;
        }
        // pointwise-product estimators on commuting symbols
        {
            std::vector<Observable> obs(commuting.begin(), commuting.begin() + nu);
            auto t = make_task(obs, zeros(nu + 1), squeezed, hbar, EstimatorKind::mechanical);
            const cplx ref = oracle_of(t);
            check_q(correlate(t).value, ref);
            const auto th = heisenberg_task(obs, std::vector<EvolutionSpec>(nu, evolution(harmonic, 0.0)), squeezed, hbar);
            check_q(correlate(th).value, ref);
        }
    }
    o.detail = fmt("quadrature worst %.2e, sampled worst %.2f sigma", worst_q, worst_sigma);
    return o;
}

Outcome trace_formula() {
    const double hbar = 0.5;
    Oracle orc(hbar);
    const auto idle = evolution(harmonic, 0.0);
    const std::vector<double> a{-0.4, -0.2, 0.0, 0.2, 0.4};
    double worst_mod = 0.0, worst_phase = 0.0, modulus = 0.0;
    const double expect_mod = std::pow(2.0, -2.0);  // 2^{-nu N} with nu = 2, N = 1
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            for (int k = 0; k < 5; ++k) {
                const std::vector<PhasePoint> cs{make_vec({a[i], 0.1}), make_vec({0.3, a[j]}), make_vec({a[k], -a[i]})};
                const cplx tr = orc.compound_trace(cs, {idle, idle, idle}, closure_centre(cs));
                modulus = std::abs(tr);
                worst_mod = std::max(worst_mod, std::abs(std::abs(tr) - expect_mod));
                worst_phase = std::max(worst_phase, std::abs(std::remainder(std::arg(tr) - polygon_area_from_centres(cs) / hbar, 2 * pi)));
            }
    const auto H2 = tilted();
    double worst_sc = 0.0;
    const std::vector<std::vector<PhasePoint>> sets{{make_vec({0.2, 0.1}), make_vec({-0.3, 0.3}), make_vec({0.1, -0.4})},
                                                    {make_vec({0.0, 0.0}), make_vec({0.5, 0.2}), make_vec({-0.3, 0.4})}};
    for (const auto& cs : sets)
        for (double t : {0.3, 0.8, 1.1}) {
            const std::vector<EvolutionSpec> evs{evolution(harmonic, t), evolution(H2, 0.7), evolution(harmonic, -0.4)};
            const auto po = find_periodic(cs, evs, Vec::Zero(2));
            const cplx sc = trace_sc(po, hbar);
            const cplx exv = orc.compound_trace(cs, evs, po.fixed_point);
            worst_sc = std::max(worst_sc, std::abs(sc - exv) / std::abs(exv));
        }
    Outcome o;
    o.ok = worst_mod < 1e-6 && worst_phase < 1e-6 && worst_sc < 1e-6;
    o.detail = fmt("zero-duration |tr| = %.6f against 2^-2 (worst dev %.2e), ", modulus, worst_mod) +
               fmt("phase worst %.2e; metaplectic trace_sc worst rel %.2e", worst_phase, worst_sc);
    return o;
}

struct RandomCompound {
    Vec x0m;
    std::vector<PhasePoint> centres;
    std::vector<EvolutionSpec> evs;
};

RandomCompound random_compound(std::mt19937_64& g, int nu, const Hamiltonian& Hq) {
    std::uniform_real_distribution<double> u(-1, 1), d(0.1, 2.0);
    RandomCompound s;
    s.x0m = make_vec({u(g), u(g)});
    for (int j = 0; j <= nu; ++j) {
        s.evs.push_back(evolution(u(g) > 0 ? Hq : harmonic, (u(g) > -0.6 ? 1.0 : -1.0) * d(g)));
        if (j < nu) s.centres.push_back(make_vec({0.5 * u(g), 0.5 * u(g)}));
    }
    return s;
}

Outcome ivr_jacobian_identity() {
    std::mt19937_64 g(404);
    const auto Hq = Hamiltonian::quartic(1.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const auto s = random_compound(g, 1 + k % 3, Hq);
        const auto r = evaluate_compound(build_compound(s.x0m, s.centres, s.evs), false);
        // Richardson-extrapolated central differences of the midpoint map
        auto fd = [&](double h) {
            Mat D(2, 2);
            for (int i = 0; i < 2; ++i) {
                Vec a = s.x0m, b = s.x0m;
                a(i) += h;
                b(i) -= h;
                D.col(i) = (build_compound(a, s.centres, s.evs).midpoint - build_compound(b, s.centres, s.evs).midpoint) / (2 * h);
            }
            return D;
        };
        const Mat D = (4.0 * fd(1e-4) - fd(2e-4)) / 3.0;
        const double jf = D.determinant();
        worst = std::max(worst, std::abs(r.jacobian - jf) / std::abs(jf));
    }
    Outcome o;
    o.ok = worst < 1e-5;
    o.detail = fmt("100 compounds, worst relative error %.2e", worst);
    return o;
}

Outcome parity_facts() {
    Outcome o;
    std::mt19937_64 g(5);
    std::uniform_real_distribution<double> u(-1, 1);
    int checked = 0;
    for (int N : {1, 2})
        for (int nu = 0; nu <= 5; ++nu) {
            std::vector<PhasePoint> cs;
            for (int j = 0; j < nu; ++j) {
                Vec c(2 * N);
                for (int d = 0; d < 2 * N; ++d) c(d) = u(g);
                cs.push_back(c);
            }
            Vec x(2 * N);
            for (int d = 0; d < 2 * N; ++d) x(d) = u(g);
            const auto tr = build_compound(x, cs, std::vector<EvolutionSpec>(nu + 1, evolution(Hamiltonian::harmonic(1.0, N), 0.0)));
            const double det = (Mat::Identity(2 * N, 2 * N) + compound_monodromy(tr)).determinant();
            const double expect = nu % 2 ? 0.0 : std::pow(2.0, 2 * N);
            if (det != expect) o.ok = false;
            ++checked;
        }
    o.detail = std::to_string(checked) + " cases (N = 1, 2; nu = 0..5), exact equality";
    return o;
}

// S_j(x') for the segment whose trajectory is centred on x'
double centred_segment_action(const EvolutionSpec& e, const Vec& c, Vec x) {
    for (int it = 0; it < 50; ++it) {
        const auto s = integrate_segment(e, x);
        const Vec f = s.centre - c;
        if (f.norm() < 1e-14) break;
        x -= (0.5 * (Mat::Identity(x.size(), x.size()) + s.monodromy)).partialPivLu().solve(f);
    }
    return integrate_segment(e, x).action;
}

// 2 sum_{j<k} (-1)^{j+k+1} c_j ^ c_k over the alternating chain of centres
double alternating_area(const std::vector<Vec>& c) {
    double a = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j)
        for (std::size_t k = j + 1; k < c.size(); ++k) a += ((j + k + 1) % 2 ? -1.0 : 1.0) * wedge(c[j], c[k]);
    return 2.0 * a;
}

Outcome stationarity() {
    std::mt19937_64 g(606);
    const auto Hq = Hamiltonian::quartic(1.0, 1.0);
    const double h = 1e-4;
    double worst = 0.0, worst_shell = 0.0, multiplier = 0.0;
    int redrawn = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const int nu = 1 + trial % 3;
        // S_j(x') is singular at a segment caustic, so stay clear of det(I + M_j) = 0
        auto near_caustic = [](const CompoundTrajectory& c) {
            for (const auto& seg : c.segments)
                if (std::abs((Mat::Identity(2, 2) + seg.monodromy).determinant()) < 0.5) return true;
            return false;
        };
        RandomCompound s = random_compound(g, nu, Hq);
        while (near_caustic(build_compound(s.x0m, s.centres, s.evs))) {
            s = random_compound(g, nu, Hq);
            ++redrawn;
        }
        const auto tr = build_compound(s.x0m, s.centres, s.evs);
        std::vector<Vec> xp;
        for (const auto& seg : tr.segments) xp.push_back(seg.centre);
        // off-shell S' as a function of the segment centres x'_j, fixed x_j and x0
        auto total = [&](const std::vector<Vec>& v) {
            double sum = 0.0;
            std::vector<Vec> chain;
            for (int j = 0; j <= nu; ++j) {
                sum += centred_segment_action(s.evs[j], v[j], tr.segments[j].start);
                chain.push_back(v[j]);
                if (j < nu) chain.push_back(s.centres[j]);
            }
            chain.push_back(tr.midpoint);
            return sum + alternating_area(chain);
        };
        worst_shell = std::max(worst_shell, std::abs(total(xp) - reduced_action(tr)));
        // the closure constraint fixes the alternating sum of all centres, so
        // admissible variations move neighbouring x'_j in opposite directions
        for (int j = 0; j <= nu; ++j)
            for (int d = 0; d < 2; ++d) {
                const int k = (j + 1) % (nu + 1);
                auto a = xp, b = xp;
                a[j](d) += h;
                b[j](d) -= h;
                if (k != j) {
                    a[k](d) -= h;
                    b[k](d) += h;
                }
                worst = std::max(worst, std::abs((total(a) - total(b)) / (2 * h)));
                auto c1 = xp, c2 = xp;
                c1[j](d) += h;
                c2[j](d) -= h;
                multiplier = std::max(multiplier, std::abs((total(c1) - total(c2)) / (2 * h)));
            }
    }
    Outcome o;
    o.ok = worst < 1e-6 && worst_shell < 1e-9;
    o.detail = fmt("50 compounds (%.0f redrawn near caustics), first-order coefficient worst %.2e (on-shell match %.1e; ",
                   double(redrawn), worst, worst_shell) +
               fmt("unconstrained single-centre gradient up to %.2f, common to all j)", multiplier);
    return o;
}

Outcome heisenberg_limit() {
    Outcome o;
    std::mt19937_64 g(707);
    std::uniform_real_distribution<double> u(-1, 1);
    const auto H2 = tilted();
    const auto Hq = Hamiltonian::quartic(1.0, 1.0);
    const double hbar_q = 0.2;
    double worst_meta = 0.0, worst_quartic = 0.0;
    const std::vector<Observable> two{poly_obs(mono(0, 1)), poly_obs(mono(1, 0))};
    for (int k = 0; k < 20; ++k) {
        const Vec x = make_vec({u(g), u(g)});
        const auto tm = heisenberg_task(two, {evolution(harmonic, 2.0 * std::abs(u(g))), evolution(H2, u(g))}, squeezed, 0.5);
        worst_meta = std::max(worst_meta, std::abs(reduced_action(collapsed_compound(x, tm.evolutions))));
        const auto tq = heisenberg_task(two, {evolution(Hq, 0.5 * std::abs(u(g))), evolution(Hq, 0.5 * u(g))}, squeezed, hbar_q);
        worst_quartic = std::max(worst_quartic, std::abs(reduced_action(collapsed_compound(x, tq.evolutions))));
    }
    if (!(worst_meta < 1e-8) || !(worst_quartic < 1e-3 * hbar_q)) o.ok = false;
    // classical estimator against the oracle
    double worst_dev = 0.0;
    struct Case {
        std::vector<Observable> obs;
        std::vector<EvolutionSpec> V;
    };
    const std::vector<Case> cases{
        {two, {evolution(harmonic, 0.7), evolution(H2, 0.4)}},
        {{poly_obs(mono(0, 2))}, {evolution(H2, 1.2)}},
        {{poly_obs(mono(1, 1))}, {evolution(harmonic, 2.1)}},
        {{gauss_obs(0.1, -0.2, 0.9)}, {evolution(H2, 0.8)}},
        {{poly_obs(mono(0, 1)), poly_obs(mono(0, 1))}, {evolution(harmonic, 0.0), evolution(harmonic, 1.3)}},
    };
    for (const auto& c : cases) {
        auto t = heisenberg_task(c.obs, c.V, squeezed, 0.5);
        t.symmetrization = Symmetrization::real_part;
        const auto r = correlate(t);
        const double dev = std::abs(r.value - cplx(oracle_of(t).real(), 0.0));
        worst_dev = std::max(worst_dev, dev);
        if (!(dev < std::max(1e-6, 3.0 * r.std_error))) o.ok = false;
    }
    o.detail = fmt("|S'| metaplectic %.1e, quartic %.1e (bound %.0e); ", worst_meta, worst_quartic, 1e-3 * hbar_q) +
               fmt("classical vs oracle worst %.2e", worst_dev);
    return o;
}

Outcome hbar_convergence() {
    CorrelationTask base;
    base.state = GaussianState::coherent(make_vec({0.5, 1.2}));
    const auto Hq = Hamiltonian::quartic(1.0, 1.0);
    base.observables = {gauss_obs(-0.96129173, 1.070527, 8.0), gauss_obs(-1.60077721, 0.39071703, 8.0)};
    base.evolutions = {evolution(Hq, 0.5), evolution(Hq, 0.5), evolution(Hq, -1.0)};
    base.oracle_dim = 220;
    SamplerConfig cfg;
    cfg.samples = 1000000;
    cfg.seed = 5;
    cfg.integrator.max_step = 0.1;
    cfg.maslov.integrator.max_step = 0.25;
    std::vector<double> err, sig;
    std::string d;
    for (double h : {0.4, 0.2, 0.1}) {
        auto t = base;
        t.hbar = h;
        const auto r = correlate(t, cfg);
        err.push_back(std::abs(r.value - oracle_of(t)));
        sig.push_back(r.std_error);
        d += fmt("hbar %.1f: %.2e (se %.1e); ", h, err.back(), r.std_error);
    }
    Outcome o;
    o.ok = err[0] > err[1] && err[1] > err[2];
    o.detail = d + "monotone decrease";
    return o;
}

Outcome echo_area() {
    const auto Hf = Hamiltonian::quartic(1.0, 0.5), Hb = Hamiltonian::quartic(1.0, 0.6);
    const GaussianState st = GaussianState::coherent(make_vec({0.3, -0.4}));
    SamplerConfig cfg;
    cfg.samples = 2000;
    cfg.seed = 4;
    cfg.integrator.max_step = 0.1;
    cfg.maslov.integrator.max_step = 0.25;
    std::vector<double> gap;
    std::string d;
    for (double t : {0.2, 0.4, 0.8}) {
        gap.push_back(loschmidt_echo(Hf, Hb, t, 2, st, 0.5, cfg, false, 2000).mean_area_gap);
        d += fmt("t %.1f: %.3e; ", t, gap.back());
    }
    Outcome o;
    o.ok = gap[0] > 0.0 && gap[0] < gap[1] && gap[1] < gap[2];
    o.detail = d + "positive and increasing";
    return o;
}

Outcome structural() {
    int pass = 0, total = 0;
    std::string failed;
    auto check = [&](const char* name, bool ok) {
        ++total;
        if (ok) ++pass;
        else failed += std::string(" ") + name;
    };
    std::mt19937_64 g(1010);
    std::uniform_real_distribution<double> u(-1, 1);
    auto rv = [&](int n) {
        Vec v(n);
        for (int i = 0; i < n; ++i) v(i) = u(g);
        return v;
    };

    Mat Q(4, 4);
    Q << 1.0, 0.2, 0.1, 0.0, 0.2, 0.7, 0.0, 0.3, 0.1, 0.0, 1.5, 0.1, 0.0, 0.3, 0.1, 0.9;
    double defect = 0.0;
    for (double t : {1.0, 5.0, 10.0}) {
        defect = std::max(defect, symplecticity_defect(monodromy(Hamiltonian::quartic(1.0, 1.0), rv(2), t)));
        defect = std::max(defect, symplecticity_defect(monodromy(Hamiltonian::kerr_like(0.3), rv(2), t)));
        defect = std::max(defect, symplecticity_defect(monodromy(Hamiltonian::quadratic(Q, rv(4)), rv(4), t)));
    }
    std::mt19937_64 gc(1011);
    for (int k = 0; k < 10; ++k) {
        const auto s = random_compound(gc, 1 + k % 3, Hamiltonian::quartic(1.0, 1.0));
        defect = std::max(defect, symplecticity_defect(compound_monodromy(build_compound(s.x0m, s.centres, s.evs))));
    }
    check("symplecticity", defect < 1e-9);

    bool anti = true, invol = true, orient = true;
    for (int k = 0; k < 50; ++k) {
        const Vec a = rv(4), b = rv(4), c = rv(4);
        anti = anti && std::abs(wedge(a, b) + wedge(b, a)) < 1e-15 && wedge(a, a) == 0.0;
        invol = invol && (reflect(reflect(b, c), c) - b).norm() < 1e-14 &&
                compose_reflections({c, c}).is_translation(1e-14) && (compose_reflections({c, c})(a) - a).norm() < 1e-14;
        const std::vector<PhasePoint> tri{rv(2), rv(2), rv(2)};
        const std::vector<PhasePoint> rev{tri[2], tri[1], tri[0]};
        orient = orient && std::abs(polygon_area_from_centres(tri) + polygon_area_from_centres(rev)) < 1e-12;
    }
    check("wedge antisymmetry", anti);
    check("reflection involution", invol);
    check("polygon orientation", orient);

    double rt = 0.0;
    {
        const auto gd = GridSpec::centred(make_vec({0.1, 0.2}), 5.0, 64, 0.4);
        const auto A = sample_symbol(gd, [](const Vec& x) { return cplx(std::exp(-x.squaredNorm()) * (1.0 + x(0)), 0.2 * x(1) * std::exp(-x.squaredNorm())); });
        const auto back = chord_to_centre(centre_to_chord(A), gd);
        for (std::size_t k = 0; k < A.values.size(); ++k) rt = std::max(rt, std::abs(back.values[k] - A.values[k]));
        const auto g4 = GridSpec::centred(Vec::Zero(4), 4.0, 20, 0.5);
        const auto A4 = sample_symbol(g4, [](const Vec& x) { return cplx(std::exp(-x.squaredNorm()), 0.0); });
        const auto b4 = chord_to_centre(centre_to_chord(A4), g4);
        for (std::size_t k = 0; k < A4.values.size(); ++k) rt = std::max(rt, std::abs(b4.values[k] - A4.values[k]));
    }
    check("centre-chord round trip", rt < 1e-10);
    double cay = 0.0;
    std::normal_distribution<double> nd(0.0, 0.3);
    for (int k = 0; k < 20; ++k) {
        Mat S(4, 4);
        for (long i = 0; i < S.size(); ++i) S.data()[i] = nd(g);
        S = 0.5 * (S + S.transpose()).eval();
        const Mat M = (symplectic_J(2) * S).exp();
        cay = std::max(cay, (cayley_M(cayley_B(M)) - M).cwiseAbs().maxCoeff());
    }
    check("Cayley round trip", cay < 1e-10);

    bool same = true;
    const auto root = std::filesystem::path(WWSC_CONFIGS);
    const auto tmp = std::filesystem::temp_directory_path() / "wwsc_acceptance";
    for (const char* name : {"metaplectic_validation.json", "polygon_gallery.json", "heisenberg_classical.json"}) {
        const auto cfg = ex::load_config((root / name).string());
        std::vector<std::string> texts[2];
        for (int rep = 0; rep < 2; ++rep) {
            const auto dir = tmp / std::to_string(rep);
            std::filesystem::remove_all(dir);
            for (const auto& p : ex::write_artifacts(ex::run_experiment(cfg), dir, cfg.name)) {
                if (p.extension() != ".csv") continue;
                std::ifstream is(p, std::ios::binary);
                std::ostringstream os;
                os << is.rdbuf();
                texts[rep].push_back(os.str());
            }
        }
        same = same && !texts[0].empty() && texts[0] == texts[1];
    }
    std::filesystem::remove_all(tmp);
    check("deterministic outputs", same);

    Outcome o;
    o.ok = pass == total;
    o.detail = std::to_string(pass) + "/" + std::to_string(total) + " checks" + (failed.empty() ? "" : ", failed:" + failed) +
               fmt(" (symplectic defect %.1e, round trip %.1e)", defect, std::max(rt, cay));
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"metaplectic exactness", metaplectic_exactness},
        {"zero-time anchor", zero_time_anchor},
        {"trace formula vs oracle", trace_formula},
        {"IVR Jacobian identity", ivr_jacobian_identity},
        {"monodromy parity", parity_facts},
        {"stationarity", stationarity},
        {"Heisenberg classical limit", heisenberg_limit},
        {"hbar convergence", hbar_convergence},
        {"double-echo area", echo_area},
        {"structural invariants", structural},
    };
    int failures = 0, k = 0;
    for (const auto& [name, run] : criteria) {
        ++k;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o.ok = false;
            o.detail = std::string("error: ") + e.what();
        }
        if (!o.ok) ++failures;
        std::cout << (o.ok ? "PASS" : "FAIL") << "  " << k << ". " << name << ": " << o.detail
                  << fmt(" [%.1f s]", seconds_since(t0)) << std::endl;
    }
    std::cout << (10 - failures) << "/10 criteria passed" << std::endl;
    return failures ? 1 : 0;
}
