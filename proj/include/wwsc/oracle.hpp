#pragma once
// Exact quantum mechanics of one degree of freedom in a truncated number
// basis: displacement and displaced-parity operators, Weyl quantization,
// unitaries, Gaussian states and exact correlation traces.

#include <map>
#include <memory>
#include <mutex>

#include "dynamics.hpp"
#include "symbols.hpp"

namespace wwsc {

class Oracle {
public:
    explicit Oracle(double hbar, int D = 128, int pad = -1) : hbar_(hbar), D_(D), pad_(pad < 0 ? std::max(32, D / 2) : pad) {
        if (!(hbar > 0.0)) throw ConfigError("oracle: hbar must be positive");
        if (D < 16) throw ConfigError("oracle: cutoff must be at least 16");
    }

    int dim() const { return D_; }
    double hbar() const { return hbar_; }
    double tail_tolerance = 1e-10;

    cplx alpha_of(const Vec& x) const {
        require_dim(x.size(), 2, "oracle (N=1)");
        return cplx(x(1), x(0)) / std::sqrt(2.0 * hbar_);
    }

    static CMat annihilation(int dim) {
        CMat a = CMat::Zero(dim, dim);
        for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
        return a;
    }
    CMat Q(int dim) const {
        const CMat a = annihilation(dim);
        return std::sqrt(hbar_ / 2.0) * (a + a.adjoint());
    }
    CMat P(int dim) const {
        const CMat a = annihilation(dim);
        return cplx(0.0, std::sqrt(hbar_ / 2.0)) * (a.adjoint() - a);
    }

    // <m|D(alpha)|n> for m, n < dim; every entry is exact. Each diagonal
    // D_{n+a,n} = alpha^a e^{-x/2} sqrt(n!/(n+a)!) L_n^(a)(x), x = |alpha|^2,
    // runs the normalised Laguerre recurrence in n; the upper diagonals use
    // -conj(alpha).
    static CMat displacement_alpha(cplx alpha, int dim) {
        if (alpha == cplx(0.0)) return CMat::Identity(dim, dim);
        CMat Dm(dim, dim);
        const double x = std::norm(alpha);
        for (int a = 0; a < dim; ++a) {
            for (int side = 0; side < 2; ++side) {
                if (a == 0 && side == 1) continue;
                const cplx c = side == 0 ? alpha : -std::conj(alpha);
                cplx hm = 0.0;
                cplx h = std::exp(static_cast<double>(a) * std::log(c) - 0.5 * x - 0.5 * std::lgamma(a + 1.0));
                for (int n = 0; n + a < dim; ++n) {
                    if (side == 0) Dm(n + a, n) = h;
                    else Dm(n, n + a) = h;
                    const cplx hn = ((2.0 * n + 1 + a - x) * h - std::sqrt(double(n) * (n + a)) * hm) /
                                    std::sqrt((n + 1.0) * (n + 1.0 + a));
                    hm = h;
                    h = hn;
                }
            }
        }
        return Dm;
    }

    // T_xi = exp((i/hbar)(xi_p Q - xi_q P))
    CMat translation(const Chord& xi, int dim = -1) const {
        return displacement_alpha(alpha_of(xi), dim < 0 ? D_ : dim);
    }
    CMat parity(int dim = -1) const {
        const int d = dim < 0 ? D_ : dim;
        CMat Pm = CMat::Zero(d, d);
        for (int n = 0; n < d; ++n) Pm(n, n) = (n % 2) ? -1.0 : 1.0;
        return Pm;
    }
    // R_x = T_{2x} Pi
    CMat reflection(const PhasePoint& x, int dim = -1) const {
        CMat R = translation(2.0 * x, dim);
        for (long n = 1; n < R.cols(); n += 2) R.col(n) *= -1.0;
        return R;
    }
    CVec coherent(const PhasePoint& x, int dim = -1) const { return translation(x, dim).col(0); }

    // Weyl quantization of a polynomial in (p, q).
    CMat quantize(const Poly& A) const {
        if (A.nvars() != 2) throw DimensionError("oracle quantization supports N=1 only");
        const int dp = D_ + A.degree() + 2;
        const CMat Qp = Q(dp), Pp = P(dp);
        CMat out = CMat::Zero(dp, dp);
        std::vector<CMat> Qpow{CMat::Identity(dp, dp)}, Ppow{CMat::Identity(dp, dp)};
        auto qpow = [&](int k) -> const CMat& {
            while (static_cast<int>(Qpow.size()) <= k) Qpow.push_back(Qpow.back() * Qp);
            return Qpow[k];
        };
        auto ppow = [&](int k) -> const CMat& {
            while (static_cast<int>(Ppow.size()) <= k) Ppow.push_back(Ppow.back() * Pp);
            return Ppow[k];
        };
        for (const auto& [e, c] : A.terms()) {
            const int a = e[0], b = e[1];
            // p^a q^b -> 2^-b sum_k C(b,k) Q^k P^a Q^(b-k)
            CMat term = CMat::Zero(dp, dp);
            double binom = 1.0;
            for (int k = 0; k <= b; ++k) {
                term += binom * qpow(k) * ppow(a) * qpow(b - k);
                binom = binom * (b - k) / (k + 1);
            }
            out += c * std::pow(0.5, b) * term;
        }
        return out.topLeftCorner(D_, D_);
    }

    // amplitude * exp(-beta |x - a|^2/hbar) -> amplitude (1+r)/2 T_a r^N T_-a, r = (1-beta)/(1+beta)
    CMat quantize(const GaussianObservable& g) const {
        if (!(g.beta > 0.0)) throw ConfigError("Gaussian observable needs beta > 0");
        const int dp = D_ + pad_;
        const double r = (1.0 - g.beta) / (1.0 + g.beta);
        const CMat T = translation(g.centre, dp);
        CMat TR = T;
        double rn = 1.0;
        for (int n = 0; n < dp; ++n) {
            TR.col(n) *= rn;
            rn *= r;
        }
        const CMat full = TR * T.adjoint();
        return (g.amplitude * 0.5 * (1.0 + r)) * full.topLeftCorner(D_, D_);
    }

    // A = (pi hbar)^-1 sum_x A(x) R_x dV
    CMat quantize(const GridSymbol& s) const {
        s.validate();
        if (s.grid.N != 1) throw DimensionError("oracle quantization supports N=1 only");
        if (s.kind != SymbolKind::weyl) throw GridError("quantize expects a Weyl symbol");
        CMat out = CMat::Zero(D_, D_);
        const double w = s.grid.cell_volume() / (pi * hbar_);
        for (std::size_t k = 0; k < s.values.size(); ++k) {
            if (s.values[k] == cplx(0.0)) continue;
            out += (w * s.values[k]) * reflection(s.grid.point(k));
        }
        return out;
    }

    CMat quantize(const Observable& o) const {
        if (o.is_polynomial()) return quantize(o.poly());
        if (o.is_gaussian()) return quantize(o.gaussian());
        return quantize(o.grid());
    }

    CMat hamiltonian(const Hamiltonian& H) const {
        if (H.dof() != 1) throw DimensionError("oracle supports N=1 only");
        return quantize(H.poly());
    }

    // exp(-i t H/hbar) by eigendecomposition of the truncated Hermitian matrix
    CMat unitary(const Hamiltonian& H, double t) const {
        const auto& eig = eigen_of(H);
        const CVec ph = (eig.eigenvalues().cast<cplx>() * cplx(0.0, -t / hbar_)).array().exp();
        return eig.eigenvectors() * ph.asDiagonal() * eig.eigenvectors().adjoint();
    }

    // Density matrix whose Wigner function is the given Gaussian.
    CMat density(const GaussianState& st) const {
        st.validate();
        if (st.dof() != 1) throw DimensionError("oracle supports N=1 only");
        const double g = std::sqrt(st.G.determinant());
        if (g > 1.0 + 1e-12) throw ConfigError("Gaussian state violates the uncertainty bound (det G > 1)");
        const double r = (1.0 - std::min(g, 1.0)) / (1.0 + std::min(g, 1.0));
        const int dp = D_ + pad_;
        CMat rho = CMat::Zero(dp, dp);
        double rn = 1.0 - r;
        for (int n = 0; n < dp; ++n, rn *= r) rho(n, n) = rn;
        // symmetric symplectic S with G = g S^T S; W(x) ~ exp(-g |S(x-m)|^2/hbar)
        Eigen::SelfAdjointEigenSolver<Mat> es(st.G / g);
        const Mat logS = es.eigenvectors() * (0.5 * es.eigenvalues().array().log()).matrix().asDiagonal() *
                         es.eigenvectors().transpose();
        if (logS.cwiseAbs().maxCoeff() > 1e-14) {
            // U with U^dag x U = S^-1 x: generated by the quadratic form Q = J logS for unit time
            const Mat Qm = symplectic_J(1) * logS;
            const auto Hs = Hamiltonian::quadratic(0.5 * (Qm + Qm.transpose()), Vec::Zero(2), "squeeze");
            const CMat Hm = quantize_padded(Hs.poly(), dp);
            Eigen::SelfAdjointEigenSolver<CMat> eh(Hm);
            const CVec ph = (eh.eigenvalues().cast<cplx>() * cplx(0.0, -1.0 / hbar_)).array().exp();
            const CMat U = eh.eigenvectors() * ph.asDiagonal() * eh.eigenvectors().adjoint();
            rho = U * rho * U.adjoint();
        }
        const CMat T = translation(st.mean, dp);
        CMat out = (T * rho * T.adjoint()).topLeftCorner(D_, D_);
        check_tail(out, "density");
        return out;
    }

    double tail_norm(const CMat& A, int width = 8) const {
        const int d = static_cast<int>(A.rows());
        const int w = std::min(width, d);
        double t = A.bottomRows(w).cwiseAbs2().sum() + A.rightCols(w).cwiseAbs2().sum();
        return std::sqrt(t / std::max(1e-300, A.cwiseAbs2().sum()));
    }
    void check_tail(const CMat& A, const char* what) const {
        if (tail_norm(A) > tail_tolerance)
            throw GridError(std::string("oracle: cutoff too small for ") + what + " (tail norm " +
                            std::to_string(tail_norm(A)) + ")");
    }

    double wigner(const CMat& rho, const PhasePoint& x) const {
        return (reflection(x).cwiseProduct(rho.transpose()).sum() / (pi * hbar_)).real();
    }
    cplx weyl_symbol(const CMat& A, const PhasePoint& x) const {
        return 2.0 * reflection(x).cwiseProduct(A.transpose()).sum();
    }
    cplx chord_symbol(const CMat& A, const Chord& xi) const {
        return translation(-xi).cwiseProduct(A.transpose()).sum();
    }

    // tr U_{nu+1} A_nu U_nu ... A_1 U_1 rho
    cplx correlation(const std::vector<CMat>& observables, const std::vector<CMat>& unitaries, const CMat& rho) const {
        if (unitaries.size() != observables.size() + 1) throw Error("oracle correlation: need nu+1 unitaries");
        CMat X = unitaries[0] * rho;
        for (std::size_t j = 0; j < observables.size(); ++j) X = unitaries[j + 1] * (observables[j] * X);
        return X.trace();
    }
    cplx correlation(const std::vector<Observable>& observables, const std::vector<EvolutionSpec>& evolutions,
                     const GaussianState& state) const {
        std::vector<CMat> A, U;
        for (const auto& o : observables) A.push_back(quantize(o));
        for (const auto& e : evolutions) U.push_back(evolution_operator(e));
        return correlation(A, U, density(state));
    }

    CMat evolution_operator(const EvolutionSpec& e) const {
        CMat U = CMat::Identity(D_, D_);
        for (const auto& [H, t] : e.pieces())
            if (t != 0.0) U = unitary(*H, t) * U;
        return U;
    }

    // tr U_{nu+1} R_{x_nu} U_nu ... U_1 R_{x_0}, centres given as x_0..x_nu.
    // The trace is taken as a coherent-state phase-space integral around
    // `window_centre`; the integrand is localized near the classical fixed point.
    // Truncated products are not checked here; compare against a larger cutoff.
    cplx compound_trace(const std::vector<PhasePoint>& centres, const std::vector<EvolutionSpec>& evolutions,
                        const PhasePoint& window_centre, double halfwidth = -1.0, int n = 64) const {
        if (centres.size() != evolutions.size()) throw Error("compound_trace: need one evolution per centre");
        CMat Uc = CMat::Identity(D_, D_);
        for (std::size_t j = 0; j < centres.size(); ++j) Uc = evolution_operator(evolutions[j]) * (reflection(centres[j]) * Uc);
        double L = halfwidth > 0.0 ? halfwidth : 6.0 * std::sqrt(hbar_);
        for (int attempt = 0; attempt < 6; ++attempt, L *= 1.5) {
            const double h = 2.0 * L / (n - 1);
            cplx sum = 0.0;
            double peak = 0.0, edge = 0.0, err = 0.0;
            std::vector<std::pair<double, double>> tails;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    const Vec x = window_centre + make_vec({-L + i * h, -L + j * h});
                    const CVec c = coherent(x);
                    const CVec Uv = Uc * c;
                    const cplx v = c.dot(Uv);
                    tails.emplace_back(std::abs(v), c.tail(8).norm());
                    sum += v;
                    peak = std::max(peak, std::abs(v));
                    if (i == 0 || j == 0 || i == n - 1 || j == n - 1) edge = std::max(edge, std::abs(v));
                }
            // coherent states must be representable wherever the integrand matters
            for (const auto& [a, t] : tails)
                if (a > 1e-8 * peak) err = std::max(err, t);
            if (err > tail_tolerance)
                throw GridError("compound_trace: cutoff too small for the quadrature window");
            if (edge <= 1e-9 * peak || halfwidth > 0.0) return sum * h * h / (2.0 * pi * hbar_);
        }
        throw GridError("compound_trace: integrand not localized in the quadrature window");
    }

private:
    CMat quantize_padded(const Poly& A, int dim) const {
        Oracle big(hbar_, dim, 0);
        return big.quantize(A);
    }

    const Eigen::SelfAdjointEigenSolver<CMat>& eigen_of(const Hamiltonian& H) const {
        std::lock_guard<std::mutex> lk(*mu_);
        const std::string key = H.poly().to_string();
        auto it = cache_->find(key);
        if (it != cache_->end()) return *it->second;
        CMat Hm = hamiltonian(H);
        Hm = 0.5 * (Hm + Hm.adjoint());
        auto es = std::make_shared<Eigen::SelfAdjointEigenSolver<CMat>>(Hm);
        return *cache_->emplace(key, es).first->second;
    }

    double hbar_;
    int D_;
    int pad_;
    std::shared_ptr<std::mutex> mu_ = std::make_shared<std::mutex>();
    std::shared_ptr<std::map<std::string, std::shared_ptr<Eigen::SelfAdjointEigenSolver<CMat>>>> cache_ =
        std::make_shared<std::map<std::string, std::shared_ptr<Eigen::SelfAdjointEigenSolver<CMat>>>>();
};

}  // namespace wwsc
