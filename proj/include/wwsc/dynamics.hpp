#pragma once
// Classical flows with tangent maps and centre actions.

#include <memory>
#include <unsupported/Eigen/MatrixFunctions>

#include "phase_space.hpp"
#include "polynomial.hpp"

namespace wwsc {

// Polynomial flattened for repeated real evaluation.
class FlatPoly {
public:
    FlatPoly() = default;
    explicit FlatPoly(const Poly& p) : n_(p.nvars()) {
        for (const auto& [e, c] : p.terms()) {
            if (c == cplx(0.0)) continue;
            coef_.push_back(c.real());
            exps_.insert(exps_.end(), e.begin(), e.end());
        }
    }
    double operator()(const double* x) const {
        double s = 0.0;
        const int* e = exps_.data();
        for (double c : coef_) {
            double t = c;
            for (int v = 0; v < n_; ++v)
                for (int k = 0; k < e[v]; ++k) t *= x[v];
            s += t;
            e += n_;
        }
        return s;
    }
    bool empty() const { return coef_.empty(); }

private:
    int n_ = 0;
    std::vector<double> coef_;
    std::vector<int> exps_;
};

class Hamiltonian {
public:
    enum class Kind { quadratic, polynomial };

    // H = x.Q.x/2 + b.x
    static Hamiltonian quadratic(const Mat& Q, const Vec& b, std::string label = "quadratic") {
        require_dim(Q.rows(), Q.cols(), "Hamiltonian::quadratic");
        require_dim(Q.rows(), b.size(), "Hamiltonian::quadratic");
        if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + Q.cwiseAbs().maxCoeff()))
            throw ConfigError("quadratic Hamiltonian: Q must be symmetric");
        Hamiltonian h;
        h.kind_ = Kind::quadratic;
        h.label_ = std::move(label);
        h.N_ = dof_of(b);
        h.Q_ = 0.5 * (Q + Q.transpose());
        h.b_ = b;
        Poly P(2 * h.N_);
        for (int i = 0; i < 2 * h.N_; ++i) {
            Poly::Exps e(2 * h.N_, 0);
            e[i] = 1;
            P.add_term(e, b(i));
            for (int j = 0; j < 2 * h.N_; ++j) {
                Poly::Exps f(2 * h.N_, 0);
                f[i] += 1;
                f[j] += 1;
                P.add_term(f, 0.5 * h.Q_(i, j));
            }
        }
        h.set_poly(P);
        return h;
    }

    static Hamiltonian polynomial(const Poly& P, std::string label = "polynomial") {
        if (P.nvars() % 2 != 0 || P.nvars() == 0) throw ConfigError("Hamiltonian polynomial needs 2N variables");
        if (!P.is_real()) throw ConfigError("Hamiltonian coefficients must be real");
        Hamiltonian h;
        h.label_ = std::move(label);
        h.N_ = P.nvars() / 2;
        h.set_poly(P);
        if (P.degree() <= 2) {
            // exact linear flow
            const int n = 2 * h.N_;
            Vec b(n);
            Mat Q(n, n);
            const Vec z = Vec::Zero(n);
            b = h.gradient(z);
            Q = h.hessian(z);
            h.kind_ = Kind::quadratic;
            h.Q_ = Q;
            h.b_ = b;
        } else {
            h.kind_ = Kind::polynomial;
        }
        return h;
    }

    // omega (p^2 + q^2)/2 in every degree of freedom
    static Hamiltonian harmonic(double omega, int N = 1) {
        return quadratic(omega * Mat::Identity(2 * N, 2 * N), Vec::Zero(2 * N),
                         "harmonic(" + fmt(omega) + ")");
    }
    // p^2/2 + a q^2/2 + b q^4/4
    static Hamiltonian quartic(double a, double b) {
        Poly P(2);
        P.add_term({2, 0}, 0.5);
        P.add_term({0, 2}, 0.5 * a);
        P.add_term({0, 4}, 0.25 * b);
        auto h = polynomial(P, "quartic(" + fmt(a) + "," + fmt(b) + ")");
        return h;
    }
    // lambda ((p^2 + q^2)/2)^2
    static Hamiltonian kerr_like(double lambda) {
        Poly P(2);
        P.add_term({4, 0}, 0.25 * lambda);
        P.add_term({2, 2}, 0.5 * lambda);
        P.add_term({0, 4}, 0.25 * lambda);
        return polynomial(P, "kerr-like(" + fmt(lambda) + ")");
    }

    Kind kind() const { return kind_; }
    int dof() const { return N_; }
    const std::string& label() const { return label_; }
    const Poly& poly() const { return poly_; }
    const Mat& Q() const { return Q_; }
    const Vec& b() const { return b_; }
    bool separable() const { return separable_; }

    double value(const Vec& x) const { return H_(x.data()); }
    Vec gradient(const Vec& x) const {
        Vec g(2 * N_);
        for (int i = 0; i < 2 * N_; ++i) g(i) = grad_[i](x.data());
        return g;
    }
    Mat hessian(const Vec& x) const {
        const int n = 2 * N_;
        Mat h(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= i; ++j) h(i, j) = h(j, i) = hess_[i * n + j](x.data());
        return h;
    }
    // parts of a separable H = T(p) + V(q)
    double kinetic(const Vec& x) const { return split_.T(x.data()); }
    double potential(const Vec& x) const { return split_.V(x.data()); }

    struct SplitDerivatives {
        FlatPoly T, V;
        std::vector<FlatPoly> dT, dV, d2T, d2V;  // gradients and row-major Hessian blocks
    };
    const SplitDerivatives& split_derivatives() const { return split_; }

private:
    static std::string fmt(double v) {
        std::ostringstream os;
        os << v;
        return os.str();
    }
    void set_poly(const Poly& P) {
        poly_ = P;
        const int n = 2 * N_;
        H_ = FlatPoly(P);
        grad_.clear();
        hess_.clear();
        for (int i = 0; i < n; ++i) grad_.emplace_back(P.derivative(i));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) hess_.emplace_back(P.derivative(i).derivative(j));
        Poly T(n), V(n);
        separable_ = true;
        for (const auto& [e, c] : P.terms()) {
            bool has_p = false, has_q = false;
            for (int v = 0; v < N_; ++v) has_p |= e[v] > 0;
            for (int v = N_; v < n; ++v) has_q |= e[v] > 0;
            if (has_p && has_q) separable_ = false;
            (has_p ? T : V).add_term(e, c);
        }
        split_ = {};
        split_.T = FlatPoly(T);
        split_.V = FlatPoly(V);
        for (int i = 0; i < N_; ++i) {
            split_.dT.emplace_back(T.derivative(i));
            split_.dV.emplace_back(V.derivative(N_ + i));
        }
        for (int i = 0; i < N_; ++i)
            for (int j = 0; j < N_; ++j) {
                split_.d2T.emplace_back(T.derivative(i).derivative(j));
                split_.d2V.emplace_back(V.derivative(N_ + i).derivative(N_ + j));
            }
    }

    Kind kind_ = Kind::polynomial;
    std::string label_;
    int N_ = 1;
    Poly poly_{2};
    Mat Q_;
    Vec b_;
    bool separable_ = false;
    FlatPoly H_;
    SplitDerivatives split_;
    std::vector<FlatPoly> grad_, hess_;
};

using HamiltonianPtr = std::shared_ptr<const Hamiltonian>;

// U = exp(-i t_k H_k/hbar) ... exp(-i t_0 H_0/hbar): the first piece acts
// first and `then` holds any further pieces in order of application.
struct EvolutionSpec {
    HamiltonianPtr hamiltonian;
    double duration = 0.0;  // negative runs backward
    std::vector<std::pair<HamiltonianPtr, double>> then;

    std::vector<std::pair<HamiltonianPtr, double>> pieces() const {
        std::vector<std::pair<HamiltonianPtr, double>> p{{hamiltonian, duration}};
        p.insert(p.end(), then.begin(), then.end());
        return p;
    }
    bool is_zero() const {
        for (const auto& pc : pieces())
            if (pc.second != 0.0) return false;
        return true;
    }
    EvolutionSpec scaled(double s) const {
        EvolutionSpec e = *this;
        e.duration *= s;
        for (auto& pc : e.then) pc.second *= s;
        return e;
    }
    // this evolution followed by `next`
    EvolutionSpec followed_by(const EvolutionSpec& next) const {
        EvolutionSpec e = *this;
        for (const auto& pc : next.pieces()) e.then.push_back(pc);
        return e;
    }
    // U^dagger: reversed pieces with negated durations
    EvolutionSpec inverse() const {
        auto p = pieces();
        EvolutionSpec e{p.back().first, -p.back().second, {}};
        for (int k = static_cast<int>(p.size()) - 2; k >= 0; --k) e.then.emplace_back(p[k].first, -p[k].second);
        return e;
    }
};

inline EvolutionSpec evolution(const Hamiltonian& h, double t) {
    return {std::make_shared<const Hamiltonian>(h), t, {}};
}

struct IntegratorOptions {
    double max_step = 0.02;
    bool want_monodromy = true;
};

struct TrajectorySegment {
    PhasePoint start, end, centre;
    Chord chord;
    double action = 0.0;
    Mat monodromy;
    EvolutionSpec evolution;
};

namespace detail {

struct FlowState {
    Vec x;
    Mat M;
    double F = 0.0;  // integral of p.dq - H dt
};

inline Mat expm(const Mat& A) { return A.exp(); }

// Exact flow of H = x.Q.x/2 + b.x. The action integral uses
// integral_0^t E(s)^T K E(s) ds from a single block exponential.
inline FlowState flow_quadratic(const Hamiltonian& H, const Vec& x0, double t) {
    const int N = H.dof(), n = 2 * N, m = n + 1;
    const Mat J = symplectic_J(N);
    Mat A = Mat::Zero(m, m);
    A.topLeftCorner(n, n) = J * H.Q();
    A.topRightCorner(n, 1) = J * H.b();
    // p.qdot - H as a quadratic form in y = (x, 1): qdot = (Q x + b)_p
    Mat K = Mat::Zero(m, m);
    {
        Mat L = Mat::Zero(m, m);  // y^T L y = p . (Q x + b)_p
        L.block(0, 0, N, n) = H.Q().block(0, 0, N, n);
        L.block(0, n, N, 1) = H.b().head(N);
        Mat Hq = Mat::Zero(m, m);
        Hq.topLeftCorner(n, n) = 0.5 * H.Q();
        Hq.block(0, n, n, 1) = 0.5 * H.b();
        Hq.block(n, 0, 1, n) = 0.5 * H.b().transpose();
        K = 0.5 * (L + L.transpose()) - Hq;
    }
    Mat C = Mat::Zero(2 * m, 2 * m);
    C.topLeftCorner(m, m) = -A.transpose();
    C.topRightCorner(m, m) = K;
    C.bottomRightCorner(m, m) = A;
    const Mat E = expm(C * t);
    const Mat F3 = E.bottomRightCorner(m, m);
    const Mat integral = F3.transpose() * E.topRightCorner(m, m);
    Vec y0(m);
    y0.head(n) = x0;
    y0(n) = 1.0;
    FlowState s;
    const Vec y1 = F3 * y0;
    s.x = y1.head(n);
    s.M = F3.topLeftCorner(n, n);
    s.F = y0.dot(integral * y0);
    return s;
}

// Sixth-order Yoshida composition of the leapfrog for H = T(p) + V(q).
// Each kick/drift is an exact flow, so F is the exact generating sum of the
// discrete map.
inline FlowState flow_split(const Hamiltonian& H, const Vec& x0, double t, const IntegratorOptions& opt,
                            std::vector<Vec>* path) {
    static constexpr double w1 = -1.17767998417887, w2 = 0.235573213359357, w3 = 0.784513610477560;
    static constexpr double w0 = 1.0 - 2.0 * (w1 + w2 + w3);
    static constexpr double ws[7] = {w3, w2, w1, w0, w1, w2, w3};
    const int N = H.dof(), n = 2 * N;
    const auto& D = H.split_derivatives();
    const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(t) / opt.max_step)));
    const double h = t / steps;
    FlowState s;
    s.x = x0;
    double* x = s.x.data();
    const bool wantM = opt.want_monodromy;
    if (wantM) s.M = Mat::Identity(n, n);
    Mat hs(N, N), tmp(N, n);
    std::vector<double> g(N);
    auto kick = [&](double tau) {
        s.F -= tau * D.V(x);
        for (int i = 0; i < N; ++i) g[i] = D.dV[i](x);
        if (wantM) {
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < N; ++j) hs(i, j) = D.d2V[i * N + j](x);
            // dp -= tau V''(q) dq
            tmp.noalias() = hs * s.M.bottomRows(N);
            s.M.topRows(N) -= tau * tmp;
        }
        for (int i = 0; i < N; ++i) x[i] -= tau * g[i];
    };
    auto drift = [&](double tau) {
        s.F -= tau * D.T(x);
        for (int i = 0; i < N; ++i) g[i] = D.dT[i](x);
        if (wantM) {
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < N; ++j) hs(i, j) = D.d2T[i * N + j](x);
            tmp.noalias() = hs * s.M.topRows(N);
            s.M.bottomRows(N) += tau * tmp;
        }
        for (int i = 0; i < N; ++i) {
            const double dq = tau * g[i];
            s.F += x[i] * dq;
            x[N + i] += dq;
        }
    };
    if (path) path->push_back(s.x);
    for (int k = 0; k < steps; ++k) {
        for (int j = 0; j < 7; ++j) {
            const double tau = ws[j] * h;
            kick(0.5 * tau);
            drift(tau);
            kick(0.5 * tau);
        }
        if (path) path->push_back(s.x);
    }
    return s;
}

// Three-stage Gauss-Legendre collocation with variational equations. The
// action integrand is carried as an extra component of the same scheme.
inline FlowState flow_gauss(const Hamiltonian& H, const Vec& x0, double t, const IntegratorOptions& opt,
                            std::vector<Vec>* path) {
    const double r15 = std::sqrt(15.0);
    const double a[3][3] = {{5.0 / 36, 2.0 / 9 - r15 / 15, 5.0 / 36 - r15 / 30},
                            {5.0 / 36 + r15 / 24, 2.0 / 9, 5.0 / 36 - r15 / 24},
                            {5.0 / 36 + r15 / 30, 2.0 / 9 + r15 / 15, 5.0 / 36}};
    const double bw[3] = {5.0 / 18, 4.0 / 9, 5.0 / 18};
    const int N = H.dof(), n = 2 * N;
    const Mat J = symplectic_J(N);
    const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(t) / opt.max_step)));
    const double h = t / steps;
    FlowState s;
    s.x = x0;
    s.M = Mat::Identity(n, n);
    if (path) path->push_back(s.x);
    for (int k = 0; k < steps; ++k) {
        Vec K[3];
        const Vec f0 = J * H.gradient(s.x);
        for (auto& Ki : K) Ki = f0;
        Vec Y[3];
        double res = 1.0;
        int it = 0;
        for (; it < 100 && res > 1e-15; ++it) {
            res = 0.0;
            for (int i = 0; i < 3; ++i) {
                Y[i] = s.x;
                for (int j = 0; j < 3; ++j) Y[i] += h * a[i][j] * K[j];
            }
            for (int i = 0; i < 3; ++i) {
                Vec Kn = J * H.gradient(Y[i]);
                res = std::max(res, (Kn - K[i]).cwiseAbs().maxCoeff() * std::abs(h) /
                                        (1.0 + s.x.cwiseAbs().maxCoeff()));
                K[i] = Kn;
            }
        }
        if (res > 1e-12) throw ConvergenceError("implicit flow step did not converge", res);
        for (int i = 0; i < 3; ++i) {
            Y[i] = s.x;
            for (int j = 0; j < 3; ++j) Y[i] += h * a[i][j] * K[j];
        }
        if (opt.want_monodromy) {
            // stage derivatives of M solve (I - h A (x) JH''_i) dM = JH''_i M stacked
            Mat Ablk = Mat::Zero(3 * n, 3 * n);
            Mat JH[3];
            for (int i = 0; i < 3; ++i) JH[i] = J * H.hessian(Y[i]);
            for (int i = 0; i < 3; ++i) {
                Ablk.block(i * n, i * n, n, n) += Mat::Identity(n, n);
                for (int j = 0; j < 3; ++j) Ablk.block(i * n, j * n, n, n) -= h * a[i][j] * JH[i];
            }
            Mat rhs(3 * n, n);
            for (int i = 0; i < 3; ++i) rhs.block(i * n, 0, n, n) = JH[i] * s.M;
            const Mat dM = Ablk.partialPivLu().solve(rhs);
            for (int i = 0; i < 3; ++i) s.M += h * bw[i] * dM.block(i * n, 0, n, n);
        }
        for (int i = 0; i < 3; ++i) {
            const Vec gi = H.gradient(Y[i]);
            s.F += h * bw[i] * (Y[i].head(N).dot(gi.head(N)) - H.value(Y[i]));
            s.x += h * bw[i] * K[i];
        }
        if (path) path->push_back(s.x);
    }
    return s;
}

inline FlowState propagate(const Hamiltonian& H, const Vec& x0, double t, const IntegratorOptions& opt,
                           std::vector<Vec>* path = nullptr) {
    require_dim(x0.size(), 2 * H.dof(), "flow");
    if (!std::isfinite(t)) throw Error("flow: non-finite duration");
    if (!x0.allFinite()) throw Error("flow: non-finite initial point");
    if (!(opt.max_step > 0.0)) throw ConfigError("integrator max_step must be positive");
    FlowState s;
    if (t == 0.0) {
        s.x = x0;
        s.M = Mat::Identity(x0.size(), x0.size());
        if (path) path->push_back(x0);
        return s;
    }
    if (H.kind() == Hamiltonian::Kind::quadratic && !path) {
        s = flow_quadratic(H, x0, t);
    } else if (H.separable()) {
        s = flow_split(H, x0, t, opt, path);
    } else {
        s = flow_gauss(H, x0, t, opt, path);
    }
    if (!s.x.allFinite()) throw Error("flow: trajectory blew up");
    return s;
}

}  // namespace detail

inline PhasePoint flow(const Hamiltonian& H, const PhasePoint& x0, double t, IntegratorOptions opt = {}) {
    opt.want_monodromy = false;
    return detail::propagate(H, x0, t, opt).x;
}

inline Mat monodromy(const Hamiltonian& H, const PhasePoint& x0, double t, const IntegratorOptions& opt = {}) {
    IntegratorOptions o = opt;
    o.want_monodromy = true;
    return detail::propagate(H, x0, t, o).M;
}

inline TrajectorySegment integrate_segment(const EvolutionSpec& ev, const PhasePoint& x_minus,
                                           const IntegratorOptions& opt = {}) {
    const auto pieces = ev.pieces();
    for (const auto& pc : pieces)
        if (!pc.first) throw ConfigError("evolution without Hamiltonian");
    const int N = pieces.front().first->dof();
    const long n = 2 * N;
    TrajectorySegment seg;
    seg.start = x_minus;
    seg.evolution = ev;
    Vec cur = x_minus;
    Mat M = Mat::Identity(n, n);
    double S = 0.0;
    std::vector<Chord> chords;
    for (const auto& [H, t] : pieces) {
        require_dim(H->dof(), N, "composite evolution");
        auto s = detail::propagate(*H, cur, t, opt);
        // area between arc and chord minus the energy term
        S += s.F - 0.5 * (s.x.head(N) + cur.head(N)).dot(s.x.tail(N) - cur.tail(N));
        if (opt.want_monodromy) M = s.M * M;
        chords.push_back(s.x - cur);
        cur = s.x;
    }
    if (pieces.size() > 1) S += reduced_polygon_area(chords);
    seg.end = cur;
    seg.centre = 0.5 * (x_minus + cur);
    seg.chord = cur - x_minus;
    seg.action = S;
    if (opt.want_monodromy) seg.monodromy = M;
    return seg;
}

inline double centre_action(const Hamiltonian& H, const PhasePoint& x_minus, double t,
                            const IntegratorOptions& opt = {}) {
    IntegratorOptions o = opt;
    o.want_monodromy = false;
    return integrate_segment(evolution(H, t), x_minus, o).action;
}

// Sampled trajectory (for polyline export).
inline std::vector<PhasePoint> trajectory_samples(const Hamiltonian& H, const PhasePoint& x0, double t,
                                                  const IntegratorOptions& opt = {}) {
    std::vector<PhasePoint> path;
    IntegratorOptions o = opt;
    o.want_monodromy = false;
    detail::propagate(H, x0, t, o, &path);
    return path;
}

inline constexpr double caustic_threshold = 1e-10;

// B = -J (I - M)(I + M)^{-1}, so that M = (I + JB)^{-1}(I - JB).
inline Mat cayley_B(const Mat& M) {
    require_dim(M.rows(), M.cols(), "cayley_B");
    const long n = M.rows();
    if (n % 2) throw DimensionError("cayley_B: odd dimension");
    const Mat I = Mat::Identity(n, n);
    const double d = (I + M).determinant();
    if (std::abs(d) < caustic_threshold) throw CausticError("cayley_B: det(I+M) vanishes", d);
    const Mat J = symplectic_J(static_cast<int>(n / 2));
    const Mat B = -J * (I - M) * (I + M).inverse();
    return 0.5 * (B + B.transpose());
}

inline Mat cayley_M(const Mat& B) {
    const long n = B.rows();
    const Mat I = Mat::Identity(n, n);
    const Mat JB = symplectic_J(static_cast<int>(n / 2)) * B;
    return (I + JB).partialPivLu().solve(I - JB);
}

}  // namespace wwsc
