#pragma once
// Semiclassical Weyl propagator of a single evolution, with the sign of
// det(I+M)^{-1/2} followed by continuity from the identity.

#include <functional>

#include "dynamics.hpp"

namespace wwsc {

struct MaslovOptions {
    int checkpoints = 8;
    double eps0 = 0.5;
    int max_refine = 10;
    IntegratorOptions integrator{0.1, true};  // coarse steps suffice for a phase lift
};

struct MaslovResult {
    int k = 0;          // continuous arg det / pi at the end of the path
    double lift = 0.0;  // raw lift, close to k*pi
    double det = 0.0;   // final real determinant
};

namespace detail {

inline CMat regulariser(int N, double eps) {
    CMat K(2 * N, 2 * N);
    K.setZero();
    const cplx c(std::cosh(eps), 0.0), s(0.0, std::sinh(eps));
    for (int i = 0; i < N; ++i) {
        K(i, i) = c;
        K(N + i, N + i) = c;
        K(i, N + i) = s;
        K(N + i, i) = -s;
    }
    return K;
}

inline cplx reg_det(const Mat& M, double sign, double eps) {
    const int N = static_cast<int>(M.rows() / 2);
    CMat A = CMat::Identity(2 * N, 2 * N) + sign * M.cast<cplx>() * regulariser(N, eps);
    return A.determinant();
}

template <class F>
double lift_segment(const F& d_of, double a, cplx da, double b, cplx db, int depth, int max_depth) {
    const double step = std::arg(db / da);
    if (std::abs(step) <= 0.5 * pi || depth >= max_depth) return step;
    const double m = 0.5 * (a + b);
    const cplx dm = d_of(m);
    return lift_segment(d_of, a, da, m, dm, depth + 1, max_depth) +
           lift_segment(d_of, m, dm, b, db, depth + 1, max_depth);
}

}  // namespace detail

// Follow arg det(I + sign M(s) K_eps) from s = 0 to 1 at eps0, then eps -> 0.
// K_eps has eigenvalues e^{+-eps} and keeps the determinant off zero for every
// real symplectic M, so the lift is well defined.
inline MaslovResult maslov_lift(const std::function<Mat(double)>& M_of_s, double sign,
                                const MaslovOptions& opt = {}) {
    MaslovResult r;
    const int n = std::max(1, opt.checkpoints);
    auto d_s = [&](double s) { return detail::reg_det(M_of_s(s), sign, opt.eps0); };
    cplx prev = d_s(0.0);
    double lift = std::arg(prev);
    for (int i = 1; i <= n; ++i) {
        const double s = static_cast<double>(i) / n;
        const cplx cur = d_s(s);
        lift += detail::lift_segment(d_s, (i - 1.0) / n, prev, s, cur, 0, opt.max_refine);
        prev = cur;
    }
    const Mat M1 = M_of_s(1.0);
    auto d_e = [&](double e) { return detail::reg_det(M1, sign, e); };
    const int ne = 4;
    for (int i = 1; i <= ne; ++i) {
        const double e0 = opt.eps0 * (1.0 - (i - 1.0) / ne);
        double e1 = opt.eps0 * (1.0 - static_cast<double>(i) / ne);
        cplx cur = d_e(e1);
        if (i == ne && std::abs(cur) < caustic_threshold) {
            e1 = 1e-6 * opt.eps0;
            cur = d_e(e1);
        }
        lift += detail::lift_segment(d_e, e0, prev, e1, cur, 0, opt.max_refine);
        prev = cur;
    }
    r.lift = lift;
    r.k = static_cast<int>(std::lround(lift / pi));
    r.det = (Mat::Identity(M1.rows(), M1.cols()) + sign * M1).determinant();
    return r;
}

struct WeylPropagatorValue {
    double amplitude = 0.0;
    double phase = 0.0;  // S/hbar - k pi/2, never wrapped
    bool caustic = false;
    int sigma = 0;       // k: continuous arg det(I+M) in units of pi
    double det = 0.0;
    double action = 0.0;
    PhasePoint centre;

    cplx value() const { return caustic ? cplx(0.0) : amplitude * std::exp(cplx(0.0, phase)); }
};

// U(x) at the centre x of the trajectory launched from x_minus.
inline WeylPropagatorValue sc_weyl_propagator(const Hamiltonian& H, const PhasePoint& x_minus, double t, double hbar,
                                              const IntegratorOptions& integ = {}, const MaslovOptions& mopt = {}) {
    const int N = H.dof();
    const auto seg = integrate_segment(evolution(H, t), x_minus, integ);
    WeylPropagatorValue v;
    v.centre = seg.centre;
    v.action = seg.action;
    v.det = (Mat::Identity(2 * N, 2 * N) + seg.monodromy).determinant();
    if (std::abs(v.det) < caustic_threshold) {
        v.caustic = true;
        return v;
    }
    auto Ms = [&](double s) {
        if (s == 1.0) return seg.monodromy;
        return monodromy(H, x_minus, s * t, mopt.integrator);
    };
    const auto m = maslov_lift(Ms, +1.0, mopt);
    v.sigma = m.k;
    v.amplitude = std::pow(2.0, N) / std::sqrt(std::abs(v.det));
    v.phase = v.action / hbar - 0.5 * pi * m.k;
    return v;
}

// Closed form for quadratic H, evaluated at the centre x.
inline WeylPropagatorValue metaplectic_propagator_exact(const Hamiltonian& H, const PhasePoint& x, double t,
                                                        double hbar) {
    if (H.kind() != Hamiltonian::Kind::quadratic)
        throw Error("metaplectic_propagator_exact: Hamiltonian is not quadratic");
    const int N = H.dof();
    require_dim(x.size(), 2 * N, "metaplectic_propagator_exact");
    const Mat J = symplectic_J(N);
    const Mat I = Mat::Identity(2 * N, 2 * N);
    const Mat M = (t * J * H.Q()).exp();
    WeylPropagatorValue v;
    v.centre = x;
    v.det = (I + M).determinant();
    if (std::abs(v.det) < caustic_threshold) {
        v.caustic = true;
        return v;
    }
    const Mat B = cayley_B(M);
    if (H.b().cwiseAbs().maxCoeff() == 0.0) {
        v.action = x.dot(B * x);
    } else {
        // affine map x -> M x + c: locate the launch point of the centred trajectory
        const auto s0 = detail::flow_quadratic(H, Vec::Zero(2 * N), t);
        const Vec xm = (I + M).partialPivLu().solve(2.0 * x - s0.x);
        const auto s = detail::flow_quadratic(H, xm, t);
        v.action = s.F - 0.5 * (s.x.head(N) + xm.head(N)).dot(s.x.tail(N) - xm.tail(N));
    }
    MaslovOptions mo;
    const auto m = maslov_lift([&](double s) -> Mat { return (s * t * J * H.Q()).exp(); }, +1.0, mo);
    v.sigma = m.k;
    v.amplitude = std::pow(2.0, N) / std::sqrt(std::abs(v.det));
    v.phase = v.action / hbar - 0.5 * pi * m.k;
    return v;
}

}  // namespace wwsc
