#pragma once
// Sparse multivariate polynomials with complex coefficients, the exact Moyal
// star product of phase-space polynomials, and Gaussian moments.

#include <map>
#include <sstream>

#include "core.hpp"

namespace wwsc {

class Poly {
public:
    using Exps = std::vector<int>;

    explicit Poly(int nvars = 0) : n_(nvars) {}

    static Poly constant(int nvars, cplx c) {
        Poly p(nvars);
        p.add_term(Exps(nvars, 0), c);
        return p;
    }
    static Poly variable(int nvars, int i, cplx c = 1.0) {
        Exps e(nvars, 0);
        e.at(i) = 1;
        Poly p(nvars);
        p.add_term(e, c);
        return p;
    }

    int nvars() const { return n_; }
    const std::map<Exps, cplx>& terms() const { return t_; }
    bool empty() const { return t_.empty(); }

    void add_term(const Exps& e, cplx c) {
        require_dim(static_cast<long>(e.size()), n_, "Poly::add_term");
        if (c == cplx(0.0)) return;
        auto it = t_.find(e);
        if (it == t_.end()) {
            t_.emplace(e, c);
        } else {
            it->second += c;
            if (it->second == cplx(0.0)) t_.erase(it);
        }
    }

    int degree() const {
        int d = 0;
        for (const auto& [e, c] : t_) {
            int s = 0;
            for (int k : e) s += k;
            d = std::max(d, s);
        }
        return d;
    }

    bool is_real(double tol = 0.0) const {
        for (const auto& [e, c] : t_)
            if (std::abs(c.imag()) > tol) return false;
        return true;
    }

    Poly& operator+=(const Poly& o) {
        require_dim(o.n_, n_, "Poly::+");
        for (const auto& [e, c] : o.t_) add_term(e, c);
        return *this;
    }
    Poly& operator-=(const Poly& o) { return *this += o * cplx(-1.0); }
    Poly operator+(const Poly& o) const { Poly r = *this; return r += o; }
    Poly operator-(const Poly& o) const { Poly r = *this; return r -= o; }
    Poly operator*(cplx s) const {
        Poly r(n_);
        for (const auto& [e, c] : t_) r.add_term(e, c * s);
        return r;
    }
    Poly operator*(const Poly& o) const {
        require_dim(o.n_, n_, "Poly::*");
        Poly r(n_);
        Exps e(n_);
        for (const auto& [e1, c1] : t_)
            for (const auto& [e2, c2] : o.t_) {
                for (int k = 0; k < n_; ++k) e[k] = e1[k] + e2[k];
                r.add_term(e, c1 * c2);
            }
        return r;
    }

    Poly derivative(int i, int order = 1) const {
        Poly r(n_);
        for (const auto& [e, c] : t_) {
            if (e[i] < order) continue;
            double f = 1.0;
            for (int k = 0; k < order; ++k) f *= e[i] - k;
            Exps e2 = e;
            e2[i] -= order;
            r.add_term(e2, c * f);
        }
        return r;
    }

    template <class V>
    cplx eval(const V& x) const {
        require_dim(static_cast<long>(x.size()), n_, "Poly::eval");
        cplx s = 0.0;
        for (const auto& [e, c] : t_) {
            cplx m = c;
            for (int k = 0; k < n_; ++k)
                for (int j = 0; j < e[k]; ++j) m *= x[k];
            s += m;
        }
        return s;
    }

    // Substitute x = L y + c; the result is a polynomial in y (L.cols() variables).
    Poly substitute_affine(const CMat& L, const CVec& c) const {
        require_dim(L.rows(), n_, "Poly::substitute_affine");
        const int m = static_cast<int>(L.cols());
        std::vector<Poly> lin;
        for (int k = 0; k < n_; ++k) {
            Poly v = Poly::constant(m, c(k));
            for (int j = 0; j < m; ++j)
                if (L(k, j) != cplx(0.0)) v += Poly::variable(m, j, L(k, j));
            lin.push_back(v);
        }
        Poly r(m);
        for (const auto& [e, co] : t_) {
            Poly term = Poly::constant(m, co);
            for (int k = 0; k < n_; ++k)
                for (int j = 0; j < e[k]; ++j) term = term * lin[k];
            r += term;
        }
        return r;
    }

    // Place the variables at [offset, offset + nvars) of a larger variable set.
    Poly embed(int nvars_new, int offset) const {
        if (offset < 0 || offset + n_ > nvars_new) throw DimensionError("Poly::embed out of range");
        Poly r(nvars_new);
        for (const auto& [e, c] : t_) {
            Exps e2(nvars_new, 0);
            for (int k = 0; k < n_; ++k) e2[offset + k] = e[k];
            r.add_term(e2, c);
        }
        return r;
    }

    cplx constant_term() const {
        auto it = t_.find(Exps(n_, 0));
        return it == t_.end() ? cplx(0.0) : it->second;
    }

    // Names p1..pN,q1..qN (or p,q when N = 1) for phase-space polynomials.
    std::string to_string() const {
        std::ostringstream os;
        bool first = true;
        const int N = n_ / 2;
        for (const auto& [e, c] : t_) {
            if (!first) os << " + ";
            first = false;
            os << "(" << c.real();
            if (c.imag() != 0.0) os << (c.imag() < 0 ? "-" : "+") << std::abs(c.imag()) << "i";
            os << ")";
            for (int k = 0; k < n_; ++k) {
                if (e[k] == 0) continue;
                os << "*" << (k < N ? "p" : "q");
                if (N > 1) os << (k % N) + 1;
                if (e[k] > 1) os << "^" << e[k];
            }
        }
        return first ? "0" : os.str();
    }

private:
    int n_;
    std::map<Exps, cplx> t_;
};

// Parse a monomial such as "p^2 q", "p1*q2^3" or "1" for N degrees of freedom.
inline Poly::Exps parse_monomial(const std::string& s, int N) {
    Poly::Exps e(2 * N, 0);
    std::string tok;
    std::string cleaned;
    for (char ch : s) cleaned += (ch == '*') ? ' ' : ch;
    std::istringstream ts(cleaned);
    while (ts >> tok) {
        if (tok == "1") continue;
        int power = 1;
        auto caret = tok.find('^');
        std::string base = tok.substr(0, caret);
        if (caret != std::string::npos) {
            try {
                power = std::stoi(tok.substr(caret + 1));
            } catch (...) {
                throw ConfigError("bad exponent in monomial '" + s + "'");
            }
            if (power < 0) throw ConfigError("negative exponent in monomial '" + s + "'");
        }
        if (base.empty() || (base[0] != 'p' && base[0] != 'q'))
            throw ConfigError("unknown variable in monomial '" + s + "'");
        int idx = 1;
        if (base.size() > 1) {
            try {
                std::size_t used = 0;
                idx = std::stoi(base.substr(1), &used);
                if (used != base.size() - 1) throw 0;
            } catch (...) {
                throw ConfigError("bad variable index in monomial '" + s + "'");
            }
        }
        if (idx < 1 || idx > N) throw ConfigError("variable index out of range in '" + s + "'");
        e[(base[0] == 'p' ? 0 : N) + idx - 1] += power;
    }
    return e;
}

// Exact Moyal product a * b of polynomials in 2N phase-space variables, with
// the ordering convention (q * p)(x) = qp + i hbar/2.
inline Poly moyal_product(const Poly& a, const Poly& b, double hbar) {
    require_dim(a.nvars(), b.nvars(), "moyal_product");
    const int n = a.nvars();
    if (n % 2) throw DimensionError("moyal_product: odd number of variables");
    const int N = n / 2;
    using Key = std::pair<Poly::Exps, Poly::Exps>;
    std::map<Key, double> ops{{{Poly::Exps(n, 0), Poly::Exps(n, 0)}, 1.0}};
    Poly result = a * b;
    const int nmax = std::min(a.degree(), b.degree());
    cplx pref = 1.0;
    for (int order = 1; order <= nmax; ++order) {
        std::map<Key, double> next;
        for (const auto& [k, c] : ops) {
            for (int i = 0; i < N; ++i) {
                Key k1 = k;  // d/dq_i on a, d/dp_i on b
                k1.first[N + i] += 1;
                k1.second[i] += 1;
                next[k1] += c;
                Key k2 = k;  // -d/dp_i on a, d/dq_i on b
                k2.first[i] += 1;
                k2.second[N + i] += 1;
                next[k2] -= c;
            }
        }
        ops.swap(next);
        pref *= cplx(0.0, hbar / 2.0) / static_cast<double>(order);
        for (const auto& [k, c] : ops) {
            if (c == 0.0) continue;
            Poly da = a, db = b;
            for (int v = 0; v < n; ++v) {
                if (k.first[v]) da = da.derivative(v, k.first[v]);
                if (k.second[v]) db = db.derivative(v, k.second[v]);
            }
            if (da.empty() || db.empty()) continue;
            result += (da * db) * (pref * c);
        }
    }
    return result;
}

// E[P(z)] for z Gaussian with mean mu and covariance S (complex entries allowed,
// by analytic continuation): [exp(1/2 d.S.d) P](mu).
inline cplx gaussian_expectation(const Poly& P, const CVec& mu, const CMat& S) {
    const int n = P.nvars();
    require_dim(mu.size(), n, "gaussian_expectation");
    Poly term = P;
    cplx total = 0.0;
    double fact = 1.0;
    for (int k = 0; !term.empty(); ++k) {
        if (k > 0) fact *= k;
        total += term.eval(mu) / fact;
        Poly next(n);
        for (int a = 0; a < n; ++a) {
            Poly da = term.derivative(a);
            if (da.empty()) continue;
            for (int b = 0; b < n; ++b) {
                if (S(a, b) == cplx(0.0)) continue;
                Poly dab = da.derivative(b);
                if (!dab.empty()) next += dab * (0.5 * S(a, b));
            }
        }
        term = next;
    }
    return total;
}

}  // namespace wwsc
