#include <gtest/gtest.h>

#include <filesystem>

#include "wwsc/oracle.hpp"
#include "wwsc/symbols.hpp"

using namespace wwsc;

namespace {

const GaussianState squeezed{make_vec({0.3, -0.4}), (Mat(2, 2) << 1.6, 0.2, 0.2, 0.6).finished()};

Poly mono(int np, int nq, cplx c = 1.0) {
    Poly r(2);
    r.add_term({np, nq}, c);
    return r;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("wwsc_test_" + name);
}

}  // namespace

TEST(Wigner, PeakAndNormalization) {
    const double hbar = 0.3;
    const auto s = GaussianState::coherent(make_vec({0.2, -0.1}));
    EXPECT_NEAR(wigner_gaussian(s, s.mean, hbar), 1.0 / (pi * hbar), 1e-14);
    const auto g = GridSpec::centred(s.mean, 3.0, 121, hbar);
    const auto W = sample_symbol(g, [&](const Vec& x) { return wigner_gaussian(s, x, hbar); });
    EXPECT_NEAR(W.integral().real(), 1.0, 1e-10);
}

TEST(Wigner, MatchesOracleDisplacedParity) {
    const double hbar = 0.5;
    Oracle orc(hbar);
    const CMat rho = orc.density(squeezed);
    for (const auto& x : {make_vec({0.3, -0.4}), make_vec({0.0, 0.0}), make_vec({0.9, 0.2}), make_vec({-0.5, -1.0})})
        EXPECT_NEAR(orc.wigner(rho, x), wigner_gaussian(squeezed, x, hbar), 1e-8);
}

TEST(ChordTransform, GaussianMatchesClosedForm) {
    const double hbar = 0.5;
    const auto g = GridSpec::centred(squeezed.mean, 6.0, 96, hbar);
    const auto W = sample_symbol(g, [&](const Vec& x) { return wigner_gaussian(squeezed, x, hbar); });
    const auto chi = centre_to_chord(W);
    double err = 0.0;
    for (std::size_t k = 0; k < chi.values.size(); ++k) {
        const Vec xi = chi.grid.point(k);
        // the discrete transform carries the (2 pi hbar)^-N normalization
        err = std::max(err, std::abs(chi.values[k] * (2 * pi * hbar) - chord_gaussian(squeezed, xi, hbar)));
    }
    EXPECT_LT(err, 1e-8);
}

TEST(ChordTransform, RoundTrip) {
    const double hbar = 0.4;
    const auto g = GridSpec::centred(make_vec({0.1, 0.2}), 5.0, 64, hbar);
    const auto A = sample_symbol(g, [&](const Vec& x) {
        return cplx(std::exp(-x.squaredNorm()) * (1.0 + x(0)), 0.3 * std::exp(-2.0 * (x - make_vec({0.5, 0})).squaredNorm()));
    });
    const auto back = chord_to_centre(centre_to_chord(A), g);
    double err = 0.0;
    for (std::size_t k = 0; k < A.values.size(); ++k) err = std::max(err, std::abs(back.values[k] - A.values[k]));
    EXPECT_LT(err, 1e-10);
}

TEST(ChordTransform, RoundTripTwoDegreesOfFreedom) {
    const double hbar = 0.5;
    const auto g = GridSpec::centred(Vec::Zero(4), 4.0, 20, hbar);
    const auto A = sample_symbol(g, [&](const Vec& x) { return cplx(std::exp(-x.squaredNorm()), 0.0); });
    const auto back = chord_to_centre(centre_to_chord(A), g);
    double err = 0.0;
    for (std::size_t k = 0; k < A.values.size(); ++k) err = std::max(err, std::abs(back.values[k] - A.values[k]));
    EXPECT_LT(err, 1e-10);
}

TEST(ChordTransform, ChordSymbolIsHermitianSymmetric) {
    const double hbar = 0.5;
    const auto g = GridSpec::centred(Vec::Zero(2), 5.0, 65, hbar);
    const auto A = sample_symbol(g, [&](const Vec& x) { return cplx(std::exp(-(x - make_vec({0.4, -0.3})).squaredNorm()), 0); });
    const auto chi = centre_to_chord(A);
    const Vec xi = make_vec({0.4, 0.25});
    EXPECT_NEAR(std::abs(chi.interpolate(-xi) - std::conj(chi.interpolate(xi))), 0.0, 1e-2 * std::abs(chi.interpolate(xi)));
    Oracle orc(hbar);
    const CMat Ahat = orc.quantize(GaussianObservable{make_vec({0.4, -0.3}), hbar, 1.0});
    EXPECT_NEAR(std::abs(orc.chord_symbol(Ahat, -xi) - std::conj(orc.chord_symbol(Ahat, xi))), 0.0, 1e-10);
}

TEST(ChordTransform, CoarseGridReportsLeakage) {
    const double hbar = 0.5;
    const auto g = GridSpec::centred(Vec::Zero(2), 1.0, 9, hbar);
    const auto A = sample_symbol(g, [&](const Vec& x) { return cplx(std::exp(-20.0 * x.squaredNorm()), 0); });
    EXPECT_THROW(centre_to_chord(A), GridError);
}

TEST(WeylProduct, PolynomialExamples) {
    const double hbar = 0.5;
    const Poly one = Poly::constant(2, 1.0), q = mono(0, 1), p = mono(1, 0);
    const Poly qp = weyl_product({q, p}, hbar);
    EXPECT_NEAR(std::abs(qp.eval(make_vec({0.7, 0.2})) - cplx(0.14, 0.5 * hbar)), 0.0, 1e-15);
    const Poly pq = weyl_product({p, q}, hbar);
    EXPECT_NEAR(std::abs(pq.eval(make_vec({0.7, 0.2})) - cplx(0.14, -0.5 * hbar)), 0.0, 1e-15);
    const Poly a = mono(2, 1) + mono(0, 3, 0.5);
    EXPECT_NEAR(std::abs(weyl_product({one, a}, hbar).eval(make_vec({0.3, 0.9})) - a.eval(make_vec({0.3, 0.9}))), 0.0,
                1e-15);
}

TEST(WeylProduct, PolynomialMatchesOracleExpectation) {
    // tr(Q P rho) against the integral of the Moyal product with W
    const double hbar = 0.5;
    Oracle orc(hbar);
    const CMat rho = orc.density(squeezed);
    const cplx exact = (orc.Q(orc.dim()) * orc.P(orc.dim()) * rho).trace();
    const Poly qp = weyl_product({mono(0, 1), mono(1, 0)}, hbar);
    const cplx via_symbol = gaussian_expectation(qp, squeezed.mean.cast<cplx>(), squeezed.covariance(hbar).cast<cplx>());
    EXPECT_NEAR(std::abs(exact - via_symbol), 0.0, 1e-10);
}

TEST(WeylProduct, GridQuadratureMatchesOracleProduct) {
    const double hbar = 0.5;
    const GaussianObservable g1{make_vec({0.2, 0.1}), 0.7, 1.0}, g2{make_vec({-0.3, 0.4}), 0.4, 1.0};
    const auto grid = GridSpec::centred(Vec::Zero(2), 4.5, 96, hbar);
    const Observable o1{g1}, o2{g2};
    const auto s1 = sample_symbol(grid, [&](const Vec& x) { return o1(x, hbar); });
    const auto s2 = sample_symbol(grid, [&](const Vec& x) { return o2(x, hbar); });
    Oracle orc(hbar);
    const CMat prod = orc.quantize(g2) * orc.quantize(g1);
    for (const auto& x0 : {make_vec({0, 0}), make_vec({0.3, -0.2}), make_vec({-0.5, 0.6})})
        EXPECT_NEAR(std::abs(weyl_product({s2, s1}, x0) - orc.weyl_symbol(prod, x0)), 0.0, 1e-6);
}

TEST(WeylProduct, OddCountRejected) {
    const auto g = GridSpec::centred(Vec::Zero(2), 2.0, 8, 0.5);
    const auto s = sample_symbol(g, [](const Vec&) { return cplx(1.0); });
    EXPECT_THROW(weyl_product(std::vector<GridSymbol>{s, s, s}, Vec::Zero(2)), Error);
}

TEST(Quantize, PolynomialOperators) {
    const double hbar = 0.5;
    Oracle orc(hbar, 64);
    const CMat one = orc.quantize(Poly::constant(2, 1.0));
    EXPECT_LT((one - CMat::Identity(64, 64)).cwiseAbs().maxCoeff(), 1e-12);
    const CMat H = orc.quantize(mono(2, 0) + mono(0, 2));
    for (int n = 0; n < 10; ++n) EXPECT_NEAR(H(n, n).real(), hbar * (2 * n + 1), 1e-10);
    const CMat Qm = orc.quantize(mono(0, 1));
    EXPECT_LT((Qm - orc.Q(64)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((Qm - Qm.adjoint()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Quantize, RealSymbolsGiveHermitianOperators) {
    const double hbar = 0.5;
    Oracle orc(hbar, 64);
    const CMat A = orc.quantize(GaussianObservable{make_vec({0.5, -0.2}), 0.6, 2.0});
    EXPECT_LT((A - A.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(orc.weyl_symbol(A, make_vec({0.1, 0.1})).imag(), 0.0, 1e-10);
}

TEST(GridIO, CsvAndBinaryRoundTrip) {
    const auto g = GridSpec::centred(make_vec({0.5, -0.5}), 2.0, 11, 0.25);
    const auto s = sample_symbol(g, [](const Vec& x) { return cplx(std::sin(x(0)) * x(1), 1.0 / 3.0 + x(0)); });
    const auto pc = temp_path("grid.csv"), pb = temp_path("grid.bin");
    write_csv(s, pc.string());
    write_binary(s, pb.string());
    for (const auto& r : {read_csv(pc.string()), read_binary(pb.string())}) {
        ASSERT_EQ(r.values.size(), s.values.size());
        EXPECT_EQ(r.grid.N, 1);
        EXPECT_DOUBLE_EQ(r.grid.hbar, 0.25);
        for (std::size_t k = 0; k < s.values.size(); ++k) EXPECT_EQ(r.values[k], s.values[k]);
    }
    std::filesystem::remove(pc);
    std::filesystem::remove(pb);
}

TEST(GridIO, MalformedFilesRejected) {
    const auto p = temp_path("bad.csv");
    {
        std::ofstream os(p);
        os << "not a grid\n";
    }
    EXPECT_THROW(read_csv(p.string()), Error);
    EXPECT_THROW(read_binary(p.string()), Error);
    std::filesystem::remove(p);
}
