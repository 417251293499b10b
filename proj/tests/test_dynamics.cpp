#include <gtest/gtest.h>

#include <random>

#include "wwsc/dynamics.hpp"

using namespace wwsc;

namespace {

const Hamiltonian harmonic = Hamiltonian::harmonic(1.0);
const Hamiltonian quartic = Hamiltonian::quartic(1.0, 1.0);

Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h = 1e-6) {
    Mat Jm(x.size(), x.size());
    for (long i = 0; i < x.size(); ++i) {
        Vec a = x, b = x;
        a(i) += h;
        b(i) -= h;
        Jm.col(i) = (f(a) - f(b)) / (2 * h);
    }
    return Jm;
}

}  // namespace

TEST(Hamiltonian, QuarticForm) {
    const Vec x = make_vec({0.7, -1.3});
    EXPECT_NEAR(quartic.value(x), 0.5 * 0.49 + 0.5 * 1.69 + 0.25 * std::pow(1.3, 4), 1e-14);
    EXPECT_TRUE(quartic.separable());
    EXPECT_EQ(harmonic.kind(), Hamiltonian::Kind::quadratic);
}

TEST(Flow, ZeroTimeIsIdentity) {
    const Vec x = make_vec({0.4, 0.2});
    EXPECT_EQ(flow(quartic, x, 0.0), x);
    EXPECT_TRUE(monodromy(quartic, x, 0.0).isIdentity());
    EXPECT_DOUBLE_EQ(centre_action(quartic, x, 0.0), 0.0);
}

TEST(Flow, HarmonicFullPeriod) {
    const Vec x = make_vec({0.4, -0.9});
    EXPECT_LT((flow(harmonic, x, 2 * pi) - x).norm(), 1e-10);
    // same flow through the generic polynomial integrator
    Poly H(2);
    H.add_term({2, 0}, 0.5);
    H.add_term({0, 2}, 0.5);
    const auto Hp = Hamiltonian::polynomial(H);
    EXPECT_LT((flow(Hp, x, 2 * pi) - x).norm(), 1e-10);
}

TEST(Flow, QuarticEnergyConservation) {
    const Vec x = make_vec({0.3, 1.1});
    const auto path = trajectory_samples(quartic, x, 10.0);
    double drift = 0.0;
    for (const auto& y : path) drift = std::max(drift, std::abs(quartic.value(y) - quartic.value(x)));
    EXPECT_LT(drift, 1e-9);
}

TEST(Flow, CompositionAndTimeReversal) {
    const Vec x = make_vec({-0.2, 0.8});
    for (const auto* H : {&harmonic, &quartic}) {
        const Vec a = flow(*H, flow(*H, x, 0.7), 0.5);
        EXPECT_LT((a - flow(*H, x, 1.2)).norm(), 1e-9);
        EXPECT_LT((flow(*H, flow(*H, x, 1.3), -1.3) - x).norm(), 1e-11);
        const auto fwd = integrate_segment(evolution(*H, 1.3), x);
        const auto back = integrate_segment(evolution(*H, -1.3), fwd.end);
        EXPECT_NEAR(fwd.action + back.action, 0.0, 1e-11);
    }
}

TEST(Monodromy, HarmonicIsARotation) {
    for (double t : {0.3, 1.0, 2.5, 4.0}) {
        const Mat M = monodromy(harmonic, make_vec({0.1, 0.2}), t);
        Mat R(2, 2);
        R << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
        EXPECT_LT((M - R).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT(symplecticity_defect(M), 1e-12);
    }
}

TEST(Monodromy, QuarticMatchesFiniteDifferences) {
    const Vec x = make_vec({0.5, -0.7});
    for (double t : {0.5, 2.0}) {
        const Mat M = monodromy(quartic, x, t);
        const Mat F = fd_jacobian([&](const Vec& y) { return flow(quartic, y, t); }, x);
        EXPECT_LT((M - F).norm() / M.norm(), 1e-5);
    }
}

TEST(Monodromy, SymplecticUpToLongTimes) {
    const Hamiltonian kerr = Hamiltonian::kerr_like(0.3);
    Mat Q(4, 4);
    Q << 1.0, 0.2, 0.1, 0.0, 0.2, 0.7, 0.0, 0.3, 0.1, 0.0, 1.5, 0.1, 0.0, 0.3, 0.1, 0.9;
    const Hamiltonian quad2 = Hamiltonian::quadratic(Q, make_vec({0.1, 0.0, -0.2, 0.3}));
    for (double t : {1.0, 5.0, 10.0}) {
        EXPECT_LT(symplecticity_defect(monodromy(quartic, make_vec({0.4, 0.9}), t)), 1e-9);
        EXPECT_LT(symplecticity_defect(monodromy(kerr, make_vec({0.4, 0.9}), t)), 1e-9);
        EXPECT_LT(symplecticity_defect(monodromy(quad2, make_vec({0.4, 0.9, -0.1, 0.2}), t)), 1e-9);
    }
}

TEST(CentreAction, ChordIsMinusJGradient) {
    // xi = -J dS/dx with S a function of the centre x
    for (const auto* H : {&harmonic, &quartic}) {
        const double t = 0.9;
        const Vec xm = make_vec({0.3, 0.6});
        const auto seg = integrate_segment(evolution(*H, t), xm);
        auto S_of_centre = [&](const Vec& c) {
            Vec y = seg.start;
            for (int it = 0; it < 40; ++it) {
                const auto s = integrate_segment(evolution(*H, t), y);
                const Vec f = s.centre - c;
                if (f.norm() < 1e-15) break;
                y -= (0.5 * (Mat::Identity(2, 2) + s.monodromy)).partialPivLu().solve(f);
            }
            return integrate_segment(evolution(*H, t), y).action;
        };
        Vec grad(2);
        const double h = 1e-5;
        for (int i = 0; i < 2; ++i) {
            Vec a = seg.centre, b = seg.centre;
            a(i) += h;
            b(i) -= h;
            grad(i) = (S_of_centre(a) - S_of_centre(b)) / (2 * h);
        }
        EXPECT_LT((seg.chord + apply_J(grad)).norm(), 1e-6);
    }
}

TEST(CentreAction, SplitSegmentsRecombine) {
    // S over [0, t1+t2] = S1 + S2 + area of the chord triangle
    const Vec x = make_vec({0.2, -0.5});
    const auto a = integrate_segment(evolution(quartic, 0.6), x);
    const auto b = integrate_segment(evolution(quartic, 0.8), a.end);
    const auto whole = integrate_segment(evolution(quartic, 1.4), x);
    EXPECT_NEAR(whole.action, a.action + b.action + 0.5 * wedge(a.chord, b.chord), 1e-9);
    const auto chained = integrate_segment(evolution(quartic, 0.6).followed_by(evolution(quartic, 0.8)), x);
    EXPECT_NEAR(whole.action, chained.action, 1e-9);
}

TEST(CentreAction, QuadraticHessianIsTwiceCayleyB) {
    Mat Q(2, 2);
    Q << 0.5, 0.1, 0.1, 0.8;
    const Hamiltonian H = Hamiltonian::quadratic(Q, Vec::Zero(2));
    const double t = 0.7;
    const Mat M = monodromy(H, Vec::Zero(2), t);
    const Mat B = cayley_B(M);
    // centre action of the linear map is x.B.x
    for (const auto& xm : {make_vec({0.3, 0.1}), make_vec({-0.6, 0.4})}) {
        const auto seg = integrate_segment(evolution(H, t), xm);
        EXPECT_NEAR(seg.action, seg.centre.dot(B * seg.centre), 1e-8);
    }
}

TEST(Cayley, Examples) {
    EXPECT_LT(cayley_B(Mat::Identity(2, 2)).norm(), 1e-15);
    EXPECT_THROW(cayley_B(monodromy(harmonic, Vec::Zero(2), pi)), CausticError);
}

TEST(Cayley, RandomRoundTrip) {
    std::mt19937_64 g(11);
    std::normal_distribution<double> nd(0.0, 0.3);
    for (int N : {1, 2}) {
        for (int k = 0; k < 20; ++k) {
            Mat S(2 * N, 2 * N);
            for (long i = 0; i < S.size(); ++i) S.data()[i] = nd(g);
            S = 0.5 * (S + S.transpose()).eval();
            const Mat M = (symplectic_J(N) * S).exp();
            EXPECT_LT(symplecticity_defect(M), 1e-12);
            const Mat B = cayley_B(M);
            EXPECT_LT((B - B.transpose()).cwiseAbs().maxCoeff(), 1e-10);
            EXPECT_LT((cayley_M(B) - M).cwiseAbs().maxCoeff(), 1e-10);
        }
    }
}

TEST(EvolutionSpec, InverseAndComposition) {
    const auto e = evolution(harmonic, 0.4).followed_by(evolution(quartic, 0.3));
    const Vec x = make_vec({0.5, 0.5});
    const Vec y = integrate_segment(e, x).end;
    EXPECT_LT((integrate_segment(e.inverse(), y).end - x).norm(), 1e-11);
    EXPECT_TRUE(e.scaled(0.0).is_zero());
}

TEST(Flow, DimensionMismatchThrows) {
    EXPECT_THROW(flow(harmonic, make_vec({1, 2, 3, 4}), 1.0), DimensionError);
}
