#include <gtest/gtest.h>

#include "wwsc/gaussian_integral.hpp"
#include "wwsc/propagators.hpp"

using namespace wwsc;

namespace {

const Hamiltonian harmonic = Hamiltonian::harmonic(1.0);

// launch point whose trajectory is centred on x (linear maps only)
Vec launch_for(const Hamiltonian& H, const Vec& x, double t) {
    const Mat M = monodromy(H, Vec::Zero(2), t);
    const Vec c = flow(H, Vec::Zero(2), t);
    return (Mat::Identity(2, 2) + M).partialPivLu().solve(2.0 * x - c);
}

}  // namespace

TEST(ScPropagator, ShortTimeIdentityLimit) {
    const auto v = sc_weyl_propagator(Hamiltonian::quartic(1.0, 1.0), make_vec({0.3, 0.4}), 1e-7, 0.5);
    EXPECT_NEAR(v.amplitude, 1.0, 1e-6);
    EXPECT_NEAR(v.phase, 0.0, 1e-5);
    EXPECT_EQ(v.sigma, 0);
}

TEST(ScPropagator, HarmonicClosedForm) {
    const double hbar = 0.7;
    for (double t : {0.4, 1.2, 2.8}) {
        const Vec x = make_vec({0.5, -0.3});
        const auto v = sc_weyl_propagator(harmonic, launch_for(harmonic, x, t), t, hbar);
        EXPECT_LT((v.centre - x).norm(), 1e-12);
        EXPECT_NEAR(v.amplitude, 1.0 / std::abs(std::cos(t / 2)), 1e-10);
        EXPECT_NEAR(v.phase, -std::tan(t / 2) * x.squaredNorm() / hbar, 1e-9);
        EXPECT_EQ(v.sigma, 0);
    }
}

TEST(ScPropagator, SignIndexStepsAtTheCaustic) {
    const double hbar = 0.5;
    const Vec x = make_vec({0.2, 0.1});
    const auto before = sc_weyl_propagator(harmonic, launch_for(harmonic, x, pi - 0.05), pi - 0.05, hbar);
    const auto after = sc_weyl_propagator(harmonic, launch_for(harmonic, x, pi + 0.05), pi + 0.05, hbar);
    EXPECT_EQ(before.sigma, 0);
    EXPECT_NE(after.sigma, 0);
    // away from the caustic the lifted value follows the exact propagator
    for (double t = pi + 0.05; t < 2 * pi - 0.1; t += 0.3) {
        const auto sc = sc_weyl_propagator(harmonic, launch_for(harmonic, x, t), t, hbar);
        const auto ex = metaplectic_propagator_exact(harmonic, x, t, hbar);
        EXPECT_LT(std::abs(sc.value() - ex.value()), 1e-9 * std::abs(ex.value()));
    }
    const auto at = sc_weyl_propagator(harmonic, make_vec({0.2, 0.1}), pi, hbar);
    EXPECT_TRUE(at.caustic);
}

TEST(ScPropagator, SigmaZeroBeforeFirstCaustic) {
    for (double t = 0.1; t < pi - 0.05; t += 0.25) {
        EXPECT_EQ(sc_weyl_propagator(harmonic, make_vec({0.3, 0.2}), t, 1.0).sigma, 0);
        EXPECT_EQ(sc_weyl_propagator(harmonic, make_vec({0.3, 0.2}), -t, 1.0).sigma, 0);
    }
}

TEST(ExactPropagator, Examples) {
    Mat Z = Mat::Zero(2, 2);
    const auto free = metaplectic_propagator_exact(Hamiltonian::quadratic(Z, Vec::Zero(2)), make_vec({0.4, 1.0}), 2.0, 0.5);
    EXPECT_NEAR(free.amplitude, 1.0, 1e-15);
    EXPECT_NEAR(free.phase, 0.0, 1e-15);
    const double hbar = 0.5;
    const Vec x = make_vec({0.3, -0.8});
    const auto q = metaplectic_propagator_exact(harmonic, x, pi / 2, hbar);
    EXPECT_NEAR(q.amplitude, std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(q.phase, -x.squaredNorm() / hbar, 1e-12);
    EXPECT_THROW(metaplectic_propagator_exact(Hamiltonian::quartic(1, 1), x, 1.0, hbar), Error);
}

TEST(ExactPropagator, AgreesWithScOnAGrid) {
    Mat Q(2, 2);
    Q << 0.5, 0.1, 0.1, 0.8;
    const Hamiltonian H = Hamiltonian::quadratic(Q, make_vec({0.2, -0.1}));
    const double hbar = 0.3;
    double worst = 0.0;
    for (double t : {0.3, 1.1, 2.0, 4.5, 6.0}) {
        for (double p = -1.0; p <= 1.0; p += 0.5)
            for (double qv = -1.0; qv <= 1.0; qv += 0.5) {
                const Vec xm = make_vec({p, qv});
                const auto sc = sc_weyl_propagator(H, xm, t, hbar);
                if (sc.caustic || std::abs(sc.det) < 1e-3) continue;
                const auto ex = metaplectic_propagator_exact(H, sc.centre, t, hbar);
                worst = std::max(worst, std::abs(sc.value() - ex.value()) / std::abs(ex.value()));
                EXPECT_EQ(sc.sigma, ex.sigma);
            }
    }
    EXPECT_LT(worst, 1e-9);
}

TEST(ExactPropagator, PhaseSpaceIntegralGivesTheTrace) {
    // integral of U(x) dx / (2 pi hbar) for the oscillator equals sum_n exp(-i t (n + 1/2)), Abel summed
    const double hbar = 0.4;
    for (double t : {0.5, 1.7, 2.6}) {
        const auto v = metaplectic_propagator_exact(harmonic, Vec::Zero(2), t, hbar);
        auto g = GaussianIntegrand::zero_form(2);
        g.A = CMat::Identity(2, 2) * cplx(0.0, 2.0 * std::tan(t / 2) / hbar);
        g.pref = v.amplitude * std::exp(cplx(0.0, -0.5 * pi * v.sigma)) / (2 * pi * hbar);
        const cplx tr = g.integral();
        const cplx expect = 1.0 / (2.0 * cplx(0.0, 1.0) * std::sin(t / 2));
        EXPECT_LT(std::abs(tr - expect), 1e-12);
    }
}
