#include <gtest/gtest.h>

#include "wwsc/correlation.hpp"

using namespace wwsc;

namespace {

const Hamiltonian harmonic = Hamiltonian::harmonic(1.0);
const GaussianState unit{Vec::Zero(2), Mat::Identity(2, 2)};
const GaussianState squeezed{make_vec({0.3, -0.4}), (Mat(2, 2) << 1.6, 0.2, 0.2, 0.6).finished()};

Poly mono(int np, int nq, cplx c = 1.0) {
    Poly r(2);
    r.add_term({np, nq}, c);
    return r;
}

Observable poly_obs(int np, int nq) { return Observable::polynomial(mono(np, nq)); }
Observable gauss_obs(double p, double q, double beta) { return {GaussianObservable{make_vec({p, q}), beta, 1.0}}; }

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

std::vector<EvolutionSpec> zeros(std::size_t n) { return std::vector<EvolutionSpec>(n, evolution(harmonic, 0.0)); }

cplx oracle_of(CorrelationTask t) {
    t.estimator = EstimatorKind::oracle_exact;
    return correlate(t).value;
}

SamplerConfig mc(long n, std::uint64_t seed = 1) {
    SamplerConfig c;
    c.mode = IntegrationMode::monte_carlo;
    c.samples = n;
    c.seed = seed;
    c.control_variate = false;
    return c;
}

}  // namespace

TEST(Initial, IdentityObservablesGiveOne) {
    const auto t = make_task({Observable::identity(1), Observable::identity(1)}, zeros(3), squeezed, 0.5, EstimatorKind::initial);
    EXPECT_NEAR(std::abs(correlate(t).value - 1.0), 0.0, 1e-12);
}

TEST(Initial, PositionVarianceOfTheGroundState) {
    const double hbar = 0.5;
    const auto t = make_task({poly_obs(0, 1), poly_obs(0, 1)}, zeros(3), unit, hbar, EstimatorKind::initial);
    EXPECT_NEAR(std::abs(correlate(t).value - hbar / 2), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(oracle_of(t) - hbar / 2), 0.0, 1e-8);
}

TEST(Initial, NonCommutingPairCarriesTheOrderingTerm) {
    // A_1 = q acts first: tr(P Q rho) = <pq> - i hbar / 2 for a centred state
    const double hbar = 0.5;
    const auto t = make_task({poly_obs(0, 1), poly_obs(1, 0)}, zeros(3), squeezed, hbar, EstimatorKind::initial);
    const cplx v = correlate(t).value;
    EXPECT_LT(std::abs(v - oracle_of(t)), 1e-8);
    const Mat C = squeezed.covariance(hbar);
    EXPECT_NEAR(v.real(), C(0, 1) + squeezed.mean(0) * squeezed.mean(1), 1e-12);
    EXPECT_NEAR(v.imag(), -hbar / 2, 1e-12);
}

TEST(Initial, GaussianObservablesMatchOracle) {
    const double hbar = 0.5;
    for (std::size_t nu : {1, 2, 3}) {
        std::vector<Observable> obs{gauss_obs(0.2, 0.1, 0.7), gauss_obs(-0.3, 0.4, 1.1), gauss_obs(0.1, -0.2, 0.9)};
        obs.resize(nu);
        const auto t = make_task(obs, zeros(nu + 1), squeezed, hbar, EstimatorKind::initial);
        const cplx ex = oracle_of(t);
        EXPECT_LT(std::abs(correlate(t).value - ex), 1e-8 * std::max(1.0, std::abs(ex))) << "nu=" << nu;
    }
}

TEST(Initial, RejectsEvolution) {
    const auto t = make_task({poly_obs(0, 1)}, {evolution(harmonic, 0.2), evolution(harmonic, 0.0)}, unit, 1.0,
                             EstimatorKind::initial);
    EXPECT_THROW(correlate(t), ConfigError);
}

TEST(Ivr, ZeroTimeReducesToInitial) {
    const double hbar = 0.5;
    auto t = make_task({gauss_obs(0.2, 0.1, 0.7), gauss_obs(-0.3, 0.4, 1.1)}, zeros(3), squeezed, hbar, EstimatorKind::ivr_full);
    const cplx v = correlate(t).value;
    t.estimator = EstimatorKind::initial;
    EXPECT_LT(std::abs(v - correlate(t).value), 1e-8);
}

TEST(Ivr, MetaplecticMatchesOracle) {
    const double hbar = 0.5;
    const auto H2 = tilted();
    const std::vector<EvolutionSpec> evs{evolution(harmonic, 0.3), evolution(H2, 0.7), evolution(harmonic, -0.2)};
    const auto tp = make_task({poly_obs(0, 1), Observable::polynomial(mono(2, 0) + mono(0, 1))}, evs, squeezed, hbar,
                              EstimatorKind::ivr_full);
    const cplx ex = oracle_of(tp);
    EXPECT_LT(std::abs(correlate(tp).value - ex), 1e-8);
    EXPECT_NEAR(ex.real(), -0.0949155659368, 1e-10);
    const auto tg = make_task({gauss_obs(0.2, 0.1, 0.7), gauss_obs(-0.3, 0.4, 1.1)}, evs, squeezed, hbar, EstimatorKind::ivr_full);
    const cplx eg = oracle_of(tg);
    EXPECT_LT(std::abs(correlate(tg).value - eg), 1e-8 * std::max(1.0, std::abs(eg)));
    // sampled without the model correction: within statistical error
    const auto r = correlate(tg, mc(100000));
    EXPECT_LT(std::abs(r.value - eg), 4.0 * r.std_error + 1e-12);
    EXPECT_GT(r.std_error, 0.0);
}

TEST(Mechanical, HeisenbergTaskHasZeroActionAndMatchesClassical) {
    const double hbar = 0.4;
    const auto Hq = Hamiltonian::quartic(1.0, 0.5);
    const std::vector<EvolutionSpec> V{evolution(Hq, 0.4), evolution(Hq, 0.9)};
    const std::vector<Observable> obs{gauss_obs(0.2, 0.1, 0.7), gauss_obs(-0.1, 0.3, 0.8)};
    auto tc = heisenberg_task(obs, V, squeezed, hbar);
    const auto tr = collapsed_compound(squeezed.mean, tc.evolutions);
    EXPECT_NEAR(reduced_action(tr), 0.0, 1e-9);
    EXPECT_LT((tr.final_point - squeezed.mean).norm(), 1e-9);
    const auto cfg = mc(4000, 3);
    const auto c = correlate(tc, cfg);
    tc.estimator = EstimatorKind::mechanical;
    const auto m = correlate(tc, cfg);
    EXPECT_LT(std::abs(c.value - m.value), 4.0 * std::hypot(c.std_error, m.std_error) + 1e-9);
}

TEST(Mechanical, LinearObservableUnderMetaplecticFlowIsExact) {
    const double hbar = 0.5;
    const auto H2 = tilted();
    const auto t = make_task({poly_obs(0, 1)}, {evolution(harmonic, 0.6), evolution(H2, 0.8)}, squeezed, hbar,
                             EstimatorKind::mechanical);
    EXPECT_LT(std::abs(correlate(t).value - oracle_of(t)), 1e-8);
}

TEST(Mechanical, CommutingObservablesAtZeroTime) {
    const double hbar = 0.5;
    const auto t = make_task({poly_obs(0, 1), poly_obs(0, 2)}, zeros(3), squeezed, hbar, EstimatorKind::mechanical);
    EXPECT_LT(std::abs(correlate(t).value - oracle_of(t)), 1e-8);
}

TEST(Classical, HarmonicHeisenbergPositionIsExact) {
    const double hbar = 0.5;
    const std::vector<EvolutionSpec> V{evolution(harmonic, 0.0), evolution(harmonic, 1.3)};
    auto t = heisenberg_task({poly_obs(0, 1), poly_obs(0, 1)}, V, squeezed, hbar);
    t.symmetrization = Symmetrization::real_part;
    const cplx c = correlate(t).value;
    EXPECT_EQ(c.imag(), 0.0);
    EXPECT_NEAR(c.real(), oracle_of(t).real(), 1e-8);
}

TEST(Classical, RequiresHeisenbergEvolutions) {
    const auto t = make_task({poly_obs(0, 1)}, zeros(2), unit, 1.0, EstimatorKind::classical_heisenberg);
    EXPECT_THROW(correlate(t), ConfigError);
}

TEST(Chord, SingleGaussianObservableUnderEvolution) {
    const double hbar = 0.5;
    const auto t = make_task({gauss_obs(0.2, -0.1, 0.8)}, {evolution(harmonic, 0.7), evolution(tilted(), -0.4)}, squeezed, hbar,
                             EstimatorKind::chord_odd);
    const cplx ex = oracle_of(t);
    EXPECT_LT(std::abs(correlate(t).value - ex), 1e-8 * std::max(1.0, std::abs(ex)));
}

TEST(Chord, PositionExpectation) {
    const auto t = make_task({poly_obs(0, 1)}, zeros(2), squeezed, 0.5, EstimatorKind::chord_odd);
    EXPECT_NEAR(std::abs(correlate(t).value - squeezed.mean(1)), 0.0, 1e-12);
}

TEST(Chord, ThreeGaussianObservablesMatchOracle) {
    const double hbar = 0.5;
    const auto t = make_task({gauss_obs(0.2, 0.1, 0.7), gauss_obs(-0.3, 0.4, 1.1), gauss_obs(0.1, -0.2, 0.9)},
                             {evolution(harmonic, 0.3), evolution(harmonic, 0.2), evolution(harmonic, 0.4), evolution(harmonic, -0.5)},
                             squeezed, hbar, EstimatorKind::chord_odd);
    const cplx ex = oracle_of(t);
    EXPECT_LT(std::abs(correlate(t).value - ex), 1e-8 * std::max(1.0, std::abs(ex)));
}

TEST(Chord, EvenCountRejected) {
    const auto t = make_task({poly_obs(0, 1), poly_obs(0, 1)}, zeros(3), unit, 1.0, EstimatorKind::chord_odd);
    EXPECT_THROW(correlate(t), ConfigError);
}

TEST(Echo, IdenticalHamiltoniansGiveOne) {
    const auto Hq = Hamiltonian::quartic(1.0, 0.5);
    SamplerConfig cfg = mc(2000);
    cfg.control_variate = true;
    const auto e = loschmidt_echo(Hq, Hq, 1.0, 1, squeezed, 0.5, cfg);
    EXPECT_LT(std::abs(e.result.value - 1.0), 1e-6);
}

TEST(Echo, MetaplecticMatchesOracle) {
    const double hbar = 0.5;
    const auto H2 = Hamiltonian::harmonic(1.1);
    for (double t : {0.5, 1.5, 3.0}) {
        const auto e = loschmidt_echo(harmonic, H2, t, 1, squeezed, hbar);
        const auto o = loschmidt_echo(harmonic, H2, t, 1, squeezed, hbar, {}, true);
        EXPECT_LT(std::abs(e.result.value - o.result.value), 1e-6) << "t=" << t;
        EXPECT_LE(std::abs(o.result.value), 1.0 + 1e-12);
    }
}

TEST(Echo, DoubleEchoAreaGapGrowsWithTime) {
    const auto Hf = Hamiltonian::quartic(1.0, 0.5), Hb = Hamiltonian::quartic(1.0, 0.6);
    double prev = 0.0;
    for (double t : {0.5, 1.0, 2.0}) {
        SamplerConfig cfg = mc(500);
        const auto e = loschmidt_echo(Hf, Hb, t, 2, squeezed, 0.5, cfg, false, 500);
        EXPECT_GT(e.mean_area_gap, prev);
        prev = e.mean_area_gap;
    }
    const auto same = loschmidt_echo(Hf, Hf, 1.0, 2, squeezed, 0.5, mc(200), false, 200);
    EXPECT_LT(same.mean_area_gap, 1e-9);
}

TEST(Symmetrization, RealPartOfANonHermitianProduct) {
    const double hbar = 0.5;
    auto t = make_task({poly_obs(0, 1), poly_obs(1, 0)}, zeros(3), squeezed, hbar, EstimatorKind::initial);
    const cplx raw = correlate(t).value;
    t.symmetrization = Symmetrization::real_part;
    const cplx sym = correlate(t).value;
    EXPECT_EQ(sym.imag(), 0.0);
    EXPECT_DOUBLE_EQ(sym.real(), raw.real());
}

TEST(Invariants, EstimatorsAgreeOnCommutingObservablesAtZeroTime) {
    const double hbar = 0.5;
    const std::vector<Observable> obs{poly_obs(0, 1), poly_obs(0, 2)};
    auto t = make_task(obs, zeros(3), squeezed, hbar, EstimatorKind::initial);
    const cplx ref = correlate(t).value;
    for (auto e : {EstimatorKind::ivr_full, EstimatorKind::mechanical, EstimatorKind::oracle_exact}) {
        t.estimator = e;
        EXPECT_LT(std::abs(correlate(t).value - ref), 1e-8) << to_string(e);
    }
    auto th = heisenberg_task(obs, {evolution(harmonic, 0.0), evolution(harmonic, 0.0)}, squeezed, hbar);
    EXPECT_LT(std::abs(correlate(th).value - ref), 1e-8);
}

TEST(Invariants, SeedAndSampleCountChangesStayWithinError) {
    const double hbar = 0.5;
    const auto H2 = tilted();
    const auto t = make_task({gauss_obs(0.2, 0.1, 0.7), gauss_obs(-0.3, 0.4, 1.1)},
                             {evolution(harmonic, 0.3), evolution(H2, 0.7), evolution(harmonic, -0.2)}, squeezed, hbar,
                             EstimatorKind::ivr_full);
    const auto a = correlate(t, mc(40000, 1));
    const auto b = correlate(t, mc(40000, 2));
    const auto c = correlate(t, mc(80000, 1));
    EXPECT_LT(std::abs(a.value - b.value), 4.0 * std::hypot(a.std_error, b.std_error));
    EXPECT_LT(std::abs(a.value - c.value), 4.0 * std::hypot(a.std_error, c.std_error));
    // same seed, same answer
    EXPECT_EQ(correlate(t, mc(40000, 1)).value, a.value);
}

TEST(Errors, PolynomialObservablesUnderNonlinearFlowNeedQuadrature) {
    const auto Hq = Hamiltonian::quartic(1.0, 0.5);
    const auto t = make_task({poly_obs(0, 1), poly_obs(0, 1)}, {evolution(Hq, 0.3), evolution(Hq, 0.3), evolution(Hq, 0.3)},
                             squeezed, 0.5, EstimatorKind::ivr_full);
    EXPECT_THROW(correlate(t, mc(1000)), EstimatorError);
}

TEST(Errors, NodalSurfaceRejection) {
    // a half turn: every collapsed compound sits on det(I + M') = 0
    const auto t = make_task({Observable::identity(1)}, {evolution(harmonic, pi / 2), evolution(harmonic, pi / 2)}, squeezed,
                             0.5, EstimatorKind::mechanical);
    EXPECT_THROW(correlate(t, mc(1000)), EstimatorError);
}

TEST(Errors, InvalidTasks) {
    auto t = make_task({poly_obs(0, 1)}, zeros(3), unit, 1.0, EstimatorKind::ivr_full);
    EXPECT_THROW(correlate(t), ConfigError);
    t.evolutions = zeros(2);
    t.hbar = -1.0;
    EXPECT_THROW(correlate(t), ConfigError);
}
