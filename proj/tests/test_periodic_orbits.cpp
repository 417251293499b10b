#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "wwsc/oracle.hpp"
#include "wwsc/periodic_orbits.hpp"

using namespace wwsc;

namespace {

const Hamiltonian harmonic = Hamiltonian::harmonic(1.0);

Hamiltonian tilted() {
    Mat Q(2, 2);
    Q << 0.5, 0.1, 0.1, 0.8;
    return Hamiltonian::quadratic(Q, make_vec({0.2, -0.1}));
}

}  // namespace

TEST(FindPeriodic, ZeroDurationsGiveTheClosureCentre) {
    const std::vector<PhasePoint> cs{make_vec({0.1, 0.2}), make_vec({0.5, -0.3}), make_vec({-0.2, 0.4})};
    const std::vector<EvolutionSpec> evs(3, evolution(harmonic, 0.0));
    const auto o = find_periodic(cs, evs, Vec::Zero(2));
    EXPECT_LT((o.fixed_point - closure_centre(cs)).norm(), 1e-12);
    EXPECT_NEAR(o.action, polygon_area_from_centres(cs), 1e-12);
}

TEST(FindPeriodic, HarmonicAboutTheOrigin) {
    const std::vector<PhasePoint> cs{Vec::Zero(2), Vec::Zero(2), Vec::Zero(2)};
    const std::vector<EvolutionSpec> evs{evolution(harmonic, 0.3), evolution(harmonic, 0.5), evolution(harmonic, 0.9)};
    const auto o = find_periodic(cs, evs, make_vec({0.3, -0.2}));
    EXPECT_LT(o.fixed_point.norm(), 1e-10);
}

TEST(FindPeriodic, MetaplecticMatchesAffineFixedPoint) {
    std::mt19937_64 g(31);
    std::uniform_real_distribution<double> u(-1, 1);
    const auto H2 = tilted();
    for (int k = 0; k < 5; ++k) {
        const std::vector<PhasePoint> cs{make_vec({u(g), u(g)}), make_vec({u(g), u(g)}), make_vec({u(g), u(g)})};
        const std::vector<EvolutionSpec> evs{evolution(harmonic, 0.5 + 0.3 * u(g)), evolution(H2, 0.7), evolution(harmonic, -0.4)};
        const auto o = find_periodic(cs, evs, Vec::Zero(2));
        // the compound map is affine: x -> M x + c
        const auto image = [&](const Vec& x) {
            const auto tr = build_compound(reflect(x, cs[0]), {cs[1], cs[2]}, evs);
            return Vec(tr.final_point);
        };
        const Vec c = image(Vec::Zero(2));
        const Vec xf = (Mat::Identity(2, 2) - o.monodromy).partialPivLu().solve(c);
        EXPECT_LT((o.fixed_point - xf).norm(), 1e-10);
    }
}

TEST(TraceSc, ZeroDurationsMatchOracle) {
    const double hbar = 0.5;
    Oracle orc(hbar);
    const std::vector<PhasePoint> cs{make_vec({0.1, 0.2}), make_vec({0.5, -0.3}), make_vec({-0.2, 0.4})};
    const std::vector<EvolutionSpec> evs(3, evolution(harmonic, 0.0));
    const auto o = find_periodic(cs, evs, Vec::Zero(2));
    const cplx sc = trace_sc(o, hbar);
    EXPECT_NEAR(std::abs(sc), 0.5, 1e-12);
    EXPECT_NEAR(std::arg(sc), std::remainder(polygon_area_from_centres(cs) / hbar, 2 * pi), 1e-12);
    EXPECT_LT(std::abs(sc - orc.compound_trace(cs, evs, o.fixed_point)), 1e-8);
}

TEST(TraceSc, MetaplecticMatchesOracle) {
    const double hbar = 0.5;
    Oracle orc(hbar);
    const auto H2 = tilted();
    const std::vector<PhasePoint> cs{make_vec({0.2, 0.1}), make_vec({-0.3, 0.3}), make_vec({0.1, -0.4})};
    for (double t : {0.3, 0.8, 1.1}) {
        const std::vector<EvolutionSpec> evs{evolution(harmonic, t), evolution(H2, 0.7), evolution(harmonic, -0.4)};
        const auto o = find_periodic(cs, evs, Vec::Zero(2));
        const cplx sc = trace_sc(o, hbar);
        const cplx ex = orc.compound_trace(cs, evs, o.fixed_point);
        EXPECT_LT(std::abs(sc - ex), 1e-6 * std::abs(ex)) << "t=" << t;
    }
}

TEST(TraceSc, AgreesWithTheReducedCompoundPropagator) {
    // tr(U' R_x0) = 2^-N U'(x0): the reduced compound propagator evaluated at the closing centre
    const double hbar = 0.4;
    const auto H2 = tilted();
    const std::vector<PhasePoint> cs{make_vec({0.2, 0.1}), make_vec({-0.3, 0.3}), make_vec({0.1, -0.4})};
    const std::vector<EvolutionSpec> evs{evolution(harmonic, 1.3), evolution(H2, 0.9), evolution(harmonic, 0.6)};
    const auto o = find_periodic(cs, evs, Vec::Zero(2));
    const auto r = evaluate_compound(o.trajectory);
    EXPECT_LT((o.trajectory.midpoint - cs[0]).norm(), 1e-9);
    const cplx ivr = std::exp(cplx(0.0, r.action / hbar - 0.5 * pi * r.caustic_crossings)) / std::sqrt(std::abs(std::pow(2.0, 2) * r.jacobian));
    const cplx sc = trace_sc(o, hbar);
    EXPECT_LT(std::abs(ivr - sc), 1e-4 * std::abs(sc));
}

TEST(TraceSc, ResonanceScaling) {
    // single reflection then a rotation by t: det(I - M) = 2 + 2 cos t vanishes at t = pi
    const double hbar = 1.0;
    std::vector<double> la, ld;
    for (double eps : {1e-1, 3e-2, 1e-2, 3e-3}) {
        const auto o = find_periodic({make_vec({0.1, 0.0})}, {evolution(harmonic, pi - eps)}, Vec::Zero(2));
        const auto d = trace_sc_detail(o, hbar);
        la.push_back(std::log(std::abs(d.value)));
        ld.push_back(std::log(std::abs(d.det)));
    }
    const double slope = (la.back() - la.front()) / (ld.back() - ld.front());
    EXPECT_NEAR(slope, -0.5, 0.05);
    const auto at = find_periodic({Vec::Zero(2)}, {evolution(harmonic, pi)}, Vec::Zero(2));
    EXPECT_THROW(trace_sc(at, hbar), ResonanceError);
}

TEST(TraceSc, EvenReflectionCountRejected) {
    const auto o = find_periodic({make_vec({0.1, 0.0}), make_vec({0.0, 0.1})}, {evolution(harmonic, 0.5), evolution(harmonic, 0.5)},
                                 Vec::Zero(2));
    EXPECT_THROW(trace_sc(o, 1.0), Error);
}

TEST(FindPeriodic, ActionInvariantUnderCyclicRelabelling) {
    const auto Hq = Hamiltonian::quartic(1.0, 0.5);
    const std::vector<PhasePoint> cs{make_vec({0.0, 0.0}), make_vec({0.5, 0.2}), make_vec({-0.3, 0.4})};
    const std::vector<EvolutionSpec> evs{evolution(Hq, 0.4), evolution(Hq, 0.3), evolution(Hq, 0.5)};
    const auto o = find_periodic(cs, evs, closure_centre(cs));
    const auto o2 = find_periodic({cs[1], cs[2], cs[0]}, {evs[1], evs[2], evs[0]}, o.trajectory.segments[0].end);
    EXPECT_NEAR(o.action, o2.action, 1e-10);
}

TEST(ContinueFamily, ConstantGridGivesOneOrbit) {
    const std::vector<PhasePoint> cs{make_vec({0.1, 0.2}), make_vec({0.5, -0.3}), make_vec({-0.2, 0.4})};
    const std::vector<EvolutionSpec> evs(3, evolution(harmonic, 0.4));
    const auto fr = continue_family(std::vector<std::vector<PhasePoint>>(9, cs), 3, 3, evs, Vec::Zero(2));
    ASSERT_EQ(fr.success_rate(), 1.0);
    for (const auto& o : fr.orbits) EXPECT_LT((o->fixed_point - fr.orbits[0]->fixed_point).norm(), 1e-12);
}

TEST(ContinueFamily, HarmonicFixedPointsMoveAffinely) {
    const std::vector<EvolutionSpec> evs{evolution(harmonic, 0.4), evolution(harmonic, 0.7), evolution(harmonic, 0.2)};
    std::vector<std::vector<PhasePoint>> grid;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const Vec v = make_vec({0.2 * i, 0.15 * j});
            grid.push_back({make_vec({0.1, 0.0}) + v, make_vec({0.3, 0.2}) + v, make_vec({-0.2, 0.1}) + v});
        }
    const auto fr = continue_family(grid, 3, 3, evs, Vec::Zero(2));
    ASSERT_EQ(fr.success_rate(), 1.0);
    const auto fp = [&](int i, int j) { return Vec(fr.orbits[i * 3 + j]->fixed_point); };
    EXPECT_LT((fp(2, 0) - 2.0 * fp(1, 0) + fp(0, 0)).norm(), 1e-10);
    EXPECT_LT((fp(0, 2) - 2.0 * fp(0, 1) + fp(0, 0)).norm(), 1e-10);
    EXPECT_LT((fp(1, 1) - fp(1, 0) - fp(0, 1) + fp(0, 0)).norm(), 1e-10);
}

TEST(ContinueFamily, QuarticBenchmarkSuccessRate) {
    const auto Hq = Hamiltonian::quartic(1.0, 0.5);
    const std::vector<EvolutionSpec> evs{evolution(Hq, 0.4), evolution(Hq, 0.3), evolution(Hq, 0.5)};
    const std::vector<PhasePoint> base{make_vec({0.0, 0.0}), make_vec({0.5, 0.2}), make_vec({-0.3, 0.4})};
    std::vector<std::vector<PhasePoint>> grid;
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
            auto cs = base;
            cs[1] += make_vec({-0.4 + 0.08 * i, -0.4 + 0.08 * j});
            grid.push_back(cs);
        }
    const auto fr = continue_family(grid, 11, 11, evs, closure_centre(base), 0.5);
    EXPECT_GE(fr.success_rate(), 0.95);
    std::ostringstream os;
    write_family_csv(fr, os);
    const std::string csv = os.str();
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 122);
}
