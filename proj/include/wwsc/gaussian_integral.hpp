#pragma once
// Closed-form integrals of polynomial x complex Gaussian integrands:
//   pref * int dz P(z) exp(-1/2 z.A.z + b.z + c)
// with Re A positive semidefinite and A nonsingular.

#include <Eigen/Eigenvalues>

#include "polynomial.hpp"

namespace wwsc {

struct GaussianIntegrand {
    int dim = 0;
    CMat A;
    CVec b;
    cplx c = 0.0;
    cplx pref = 1.0;
    Poly P;

    static GaussianIntegrand zero_form(int d) {
        GaussianIntegrand g;
        g.dim = d;
        g.A = CMat::Zero(d, d);
        g.b = CVec::Zero(d);
        g.P = Poly::constant(d, 1.0);
        return g;
    }

    cplx operator()(const Vec& z) const {
        const CVec zc = z.cast<cplx>();
        const cplx e = -0.5 * zc.cwiseProduct(A * zc).sum() + b.cwiseProduct(zc).sum() + c;
        return pref * P.eval(z) * std::exp(e);
    }

    cplx integral() const {
        require_dim(A.rows(), dim, "GaussianIntegrand");
        const CMat As = 0.5 * (A + A.transpose());
        Eigen::ComplexEigenSolver<CMat> es(As);
        const double scale = As.cwiseAbs().maxCoeff();
        cplx sqrt_det = 1.0;
        for (int i = 0; i < dim; ++i) {
            const cplx l = es.eigenvalues()(i);
            if (std::abs(l) < 1e-13 * std::max(1.0, scale))
                throw EstimatorError("Gaussian integral: degenerate quadratic form");
            if (l.real() < -1e-9 * std::max(1.0, scale))
                throw EstimatorError("Gaussian integral: divergent quadratic form");
            sqrt_det *= std::sqrt(l);
        }
        const auto lu = As.partialPivLu();
        const CVec mu = lu.solve(b);
        const CMat S = lu.inverse();
        const cplx ep = P.degree() <= 0 ? P.constant_term() : gaussian_expectation(P, mu, S);
        const cplx quad = b.cwiseProduct(mu).sum();
        return pref * std::exp(c + 0.5 * quad) * std::pow(2.0 * pi, 0.5 * dim) / sqrt_det * ep;
    }
};

}  // namespace wwsc
