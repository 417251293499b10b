#pragma once
// Weyl and chord symbols on uniform phase-space grids, Gaussian Wigner and
// chord functions, the centre<->chord Fourier transform and Weyl products.

#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <variant>

#include "phase_space.hpp"
#include "polynomial.hpp"

namespace wwsc {

struct Axis {
    double lo = 0.0, hi = 0.0;
    int n = 0;
    double step() const { return (hi - lo) / (n - 1); }
    double at(int k) const { return lo + k * step(); }
};

struct GridSpec {
    int N = 1;
    std::vector<Axis> axes;  // 2N axes ordered (p_1..p_N, q_1..q_N)
    double hbar = 1.0;

    void validate() const {
        if (N < 1) throw GridError("grid: N must be positive");
        if (static_cast<int>(axes.size()) != 2 * N) throw GridError("grid: need 2N axes");
        if (!(hbar > 0.0)) throw GridError("grid: hbar must be positive");
        for (const auto& a : axes) {
            if (a.n < 2) throw GridError("grid: at least 2 points per axis");
            if (!std::isfinite(a.lo) || !std::isfinite(a.hi) || !(a.hi > a.lo))
                throw GridError("grid: bounds must be finite with hi > lo");
        }
    }

    std::size_t size() const {
        std::size_t s = 1;
        for (const auto& a : axes) s *= static_cast<std::size_t>(a.n);
        return s;
    }
    double cell_volume() const {
        double v = 1.0;
        for (const auto& a : axes) v *= a.step();
        return v;
    }
    std::vector<int> unflatten(std::size_t flat) const {
        std::vector<int> idx(axes.size());
        for (int d = static_cast<int>(axes.size()) - 1; d >= 0; --d) {
            idx[d] = static_cast<int>(flat % axes[d].n);
            flat /= axes[d].n;
        }
        return idx;
    }
    Vec point(std::size_t flat) const {
        auto idx = unflatten(flat);
        Vec x(axes.size());
        for (std::size_t d = 0; d < axes.size(); ++d) x(d) = axes[d].at(idx[d]);
        return x;
    }

    static GridSpec centred(const Vec& centre, double halfwidth, int n, double hbar) {
        GridSpec g;
        g.N = dof_of(centre);
        g.hbar = hbar;
        for (long d = 0; d < centre.size(); ++d)
            g.axes.push_back({centre(d) - halfwidth, centre(d) + halfwidth, n});
        g.validate();
        return g;
    }
};

enum class SymbolKind { weyl, chord };

struct GridSymbol {
    GridSpec grid;
    std::vector<cplx> values;
    SymbolKind kind = SymbolKind::weyl;

    void validate() const {
        grid.validate();
        if (values.size() != grid.size()) throw GridError("grid symbol: value count does not match grid");
    }

    // Multilinear interpolation; zero outside the grid window.
    cplx interpolate(const Vec& x) const {
        const std::size_t D = grid.axes.size();
        require_dim(x.size(), static_cast<long>(D), "GridSymbol::interpolate");
        std::vector<int> base(D);
        std::vector<double> frac(D);
        for (std::size_t d = 0; d < D; ++d) {
            const auto& a = grid.axes[d];
            const double u = (x(d) - a.lo) / a.step();
            if (u < 0.0 || u > a.n - 1) return 0.0;
            int k = std::min(static_cast<int>(std::floor(u)), a.n - 2);
            base[d] = k;
            frac[d] = u - k;
        }
        cplx s = 0.0;
        for (std::size_t corner = 0; corner < (std::size_t(1) << D); ++corner) {
            double w = 1.0;
            std::size_t flat = 0;
            for (std::size_t d = 0; d < D; ++d) {
                const int bit = (corner >> d) & 1;
                w *= bit ? frac[d] : 1.0 - frac[d];
                flat = flat * grid.axes[d].n + base[d] + bit;
            }
            if (w != 0.0) s += w * values[flat];
        }
        return s;
    }

    cplx integral() const {
        cplx s = 0.0;
        for (const auto& v : values) s += v;
        return s * grid.cell_volume();
    }
};

inline GridSymbol sample_symbol(const GridSpec& g, const std::function<cplx(const Vec&)>& f,
                                SymbolKind kind = SymbolKind::weyl) {
    g.validate();
    GridSymbol s{g, std::vector<cplx>(g.size()), kind};
    for (std::size_t k = 0; k < g.size(); ++k) s.values[k] = f(g.point(k));
    return s;
}

// ---------------------------------------------------------------------------
// Gaussian states

struct GaussianState {
    PhasePoint mean;
    Mat G;  // W(x) ~ exp(-(x - mean).G.(x - mean)/hbar)

    void validate() const {
        const int N = dof_of(mean);
        require_dim(G.rows(), 2 * N, "GaussianState");
        require_dim(G.cols(), 2 * N, "GaussianState");
        if ((G - G.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + G.cwiseAbs().maxCoeff()))
            throw Error("GaussianState: G must be symmetric");
        Eigen::SelfAdjointEigenSolver<Mat> es(G);
        if (es.eigenvalues().minCoeff() <= 0.0) throw Error("GaussianState: G must be positive definite");
    }
    static GaussianState coherent(const PhasePoint& m) {
        return {m, Mat::Identity(m.size(), m.size())};
    }
    int dof() const { return dof_of(mean); }
    // covariance of the Wigner distribution
    Mat covariance(double hbar) const { return 0.5 * hbar * G.inverse(); }
};

inline double wigner_gaussian(const GaussianState& s, const Vec& x, double hbar) {
    const int N = s.dof();
    require_dim(x.size(), 2 * N, "wigner_gaussian");
    const Vec d = x - s.mean;
    return std::pow(pi * hbar, -N) * std::sqrt(s.G.determinant()) * std::exp(-d.dot(s.G * d) / hbar);
}

// chi(xi) = tr(T_{-xi} rho) = integral of W(x) exp(-(i/hbar) xi ^ x)
inline cplx chord_gaussian(const GaussianState& s, const Vec& xi, double hbar) {
    const Vec Jxi = apply_J(xi);
    const double quad = Jxi.dot(s.G.inverse() * Jxi) / (4.0 * hbar);
    return std::exp(cplx(-quad, -wedge(xi, s.mean) / hbar));
}

// ---------------------------------------------------------------------------
// Observables

struct GaussianObservable {
    PhasePoint centre;
    double beta = 1.0;  // symbol amplitude * exp(-beta |x - centre|^2 / hbar)
    double amplitude = 1.0;
};

struct Observable {
    std::variant<Poly, GaussianObservable, GridSymbol> rep;

    static Observable identity(int N) { return {Poly::constant(2 * N, 1.0)}; }
    static Observable polynomial(const Poly& p) {
        if (!p.is_real()) throw Error("observable polynomials need real coefficients");
        return {p};
    }

    bool is_polynomial() const { return std::holds_alternative<Poly>(rep); }
    bool is_gaussian() const { return std::holds_alternative<GaussianObservable>(rep); }
    bool is_grid() const { return std::holds_alternative<GridSymbol>(rep); }
    bool is_analytic() const { return !is_grid(); }
    const Poly& poly() const { return std::get<Poly>(rep); }
    const GaussianObservable& gaussian() const { return std::get<GaussianObservable>(rep); }
    const GridSymbol& grid() const { return std::get<GridSymbol>(rep); }

    cplx operator()(const Vec& x, double hbar) const {
        if (is_polynomial()) return poly().eval(x);
        if (is_gaussian()) {
            const auto& g = gaussian();
            return g.amplitude * std::exp(-g.beta * (x - g.centre).squaredNorm() / hbar);
        }
        return grid().interpolate(x);
    }
};

// ---------------------------------------------------------------------------
// Centre <-> chord transforms
//
// forward:  A~(xi) = (2 pi hbar)^-N  sum_x A(x) exp(-(i/hbar) xi ^ x) dV
// inverse:  A(x)   = (2 pi hbar)^-N  sum_xi A~(xi) exp(+(i/hbar) xi ^ x) dV~
// The xi_p axis is conjugate to the x_q axis and vice versa, with spacings
// chosen so the discrete pair is an exact inverse.

namespace detail {

inline std::vector<cplx> apply_along_axis(const std::vector<cplx>& in, const std::vector<int>& shape,
                                          int axis, const CMat& K) {
    std::size_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= shape[d];
    for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
    const int nin = shape[axis];
    const int nout = static_cast<int>(K.rows());
    std::vector<cplx> out(outer * nout * inner);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i)
            for (int r = 0; r < nout; ++r) {
                cplx s = 0.0;
                for (int c = 0; c < nin; ++c) s += K(r, c) * in[(o * nin + c) * inner + i];
                out[(o * nout + r) * inner + i] = s;
            }
    return out;
}

// swap the p and q axis blocks
inline std::vector<cplx> swap_pq_blocks(const std::vector<cplx>& in, const GridSpec& g_in) {
    const int N = g_in.N;
    std::vector<int> shape_in(2 * N), perm(2 * N);
    for (int d = 0; d < 2 * N; ++d) shape_in[d] = g_in.axes[d].n;
    for (int d = 0; d < 2 * N; ++d) perm[d] = d < N ? d + N : d - N;  // out axis d <- in axis perm[d]
    std::vector<int> shape_out(2 * N);
    for (int d = 0; d < 2 * N; ++d) shape_out[d] = shape_in[perm[d]];
    std::vector<cplx> out(in.size());
    std::vector<int> idx_in(2 * N);
    for (std::size_t flat = 0; flat < in.size(); ++flat) {
        std::size_t f = flat;
        for (int d = 2 * N - 1; d >= 0; --d) {
            idx_in[d] = static_cast<int>(f % shape_in[d]);
            f /= shape_in[d];
        }
        std::size_t o = 0;
        for (int d = 0; d < 2 * N; ++d) o = o * shape_out[d] + idx_in[perm[d]];
        out[o] = in[flat];
    }
    return out;
}

inline Axis dual_axis(const Axis& a, double hbar) {
    const double d = 2.0 * pi * hbar / (a.n * a.step());
    const double lo = -(a.n / 2) * d;
    return {lo, lo + (a.n - 1) * d, a.n};
}

inline double edge_energy_fraction(const GridSymbol& s) {
    const auto& g = s.grid;
    double tot = 0.0, edge = 0.0;
    for (std::size_t k = 0; k < s.values.size(); ++k) {
        const double e = std::norm(s.values[k]);
        tot += e;
        auto idx = g.unflatten(k);
        bool on_edge = false;
        for (std::size_t d = 0; d < idx.size(); ++d)
            if (idx[d] == 0 || idx[d] == g.axes[d].n - 1) on_edge = true;
        if (on_edge) edge += e;
    }
    return tot > 0.0 ? edge / tot : 0.0;
}

inline GridSymbol symplectic_fourier(const GridSymbol& in, const GridSpec& out_grid, double sign) {
    const auto& g = in.grid;
    const int N = g.N;
    const double hbar = g.hbar;
    // kernel exp(sign*(i/hbar) xi ^ x) with xi ^ x = xi_p x_q - xi_q x_p; the
    // p-type axes of the input are x_p (centre side) or xi_p (chord side).
    std::vector<int> shape(2 * N);
    for (int d = 0; d < 2 * N; ++d) shape[d] = g.axes[d].n;
    std::vector<cplx> work = in.values;
    for (int d = 0; d < 2 * N; ++d) {
        const bool is_p = d < N;
        const Axis& ain = g.axes[d];
        const Axis& aout = out_grid.axes[is_p ? d + N : d - N];
        const bool chord_in = in.kind == SymbolKind::chord;
        const double s = sign * ((is_p == chord_in) ? 1.0 : -1.0);
        CMat K(aout.n, ain.n);
        for (int r = 0; r < aout.n; ++r)
            for (int c = 0; c < ain.n; ++c)
                K(r, c) = std::exp(cplx(0.0, s * aout.at(r) * ain.at(c) / hbar)) * ain.step() /
                          std::sqrt(2.0 * pi * hbar);
        work = apply_along_axis(work, shape, d, K);
        shape[d] = aout.n;
    }
    GridSpec tmp = g;
    for (int d = 0; d < 2 * N; ++d) tmp.axes[d].n = shape[d];
    GridSymbol out{out_grid, swap_pq_blocks(work, tmp),
                   in.kind == SymbolKind::weyl ? SymbolKind::chord : SymbolKind::weyl};
    return out;
}

}  // namespace detail

struct TransformOptions {
    bool check_leakage = true;
    double leakage_tol = 1e-6;
};

// Chord grid conjugate to a centre grid.
inline GridSpec chord_grid_for(const GridSpec& g) {
    g.validate();
    GridSpec c = g;
    for (int i = 0; i < g.N; ++i) {
        c.axes[i] = detail::dual_axis(g.axes[g.N + i], g.hbar);
        c.axes[g.N + i] = detail::dual_axis(g.axes[i], g.hbar);
    }
    return c;
}

inline GridSymbol centre_to_chord(const GridSymbol& s, const TransformOptions& opt = {}) {
    s.validate();
    if (s.kind != SymbolKind::weyl) throw GridError("centre_to_chord: expected a Weyl symbol");
    auto out = detail::symplectic_fourier(s, chord_grid_for(s.grid), -1.0);
    if (opt.check_leakage && detail::edge_energy_fraction(out) > opt.leakage_tol)
        throw GridError("centre_to_chord: grid too coarse (chord energy reaches the grid edge)");
    return out;
}

// Inverse transform onto the centre grid `target` (the grid the chord grid was built from).
inline GridSymbol chord_to_centre(const GridSymbol& s, const GridSpec& target, const TransformOptions& opt = {}) {
    s.validate();
    target.validate();
    if (s.kind != SymbolKind::chord) throw GridError("chord_to_centre: expected a chord symbol");
    const GridSpec expect = chord_grid_for(target);
    for (std::size_t d = 0; d < expect.axes.size(); ++d)
        if (expect.axes[d].n != s.grid.axes[d].n ||
            std::abs(expect.axes[d].step() - s.grid.axes[d].step()) > 1e-12 * expect.axes[d].step())
            throw GridError("chord_to_centre: target grid is not conjugate to the chord grid");
    auto out = detail::symplectic_fourier(s, target, +1.0);
    if (opt.check_leakage && detail::edge_energy_fraction(out) > opt.leakage_tol)
        throw GridError("chord_to_centre: grid too coarse (centre energy reaches the grid edge)");
    return out;
}

// ---------------------------------------------------------------------------
// Weyl products

// Exact Weyl symbol of the written product a_0 a_1 ... (front acts last).
inline Poly weyl_product(const std::vector<Poly>& factors, double hbar) {
    if (factors.empty()) throw Error("weyl_product: no factors");
    Poly r = factors.back();
    for (int k = static_cast<int>(factors.size()) - 2; k >= 0; --k) r = moyal_product(factors[k], r, hbar);
    return r;
}

struct WeylProductOptions {
    double max_evaluations = 2e8;
};

// {A_nu ... A_1}(x0) by trapezoid quadrature, factors in written order
// (front = A_nu). Even factor counts only.
inline cplx weyl_product(const std::vector<GridSymbol>& factors, const PhasePoint& x0,
                         const WeylProductOptions& opt = {}) {
    const std::size_t nu = factors.size();
    if (nu == 0) throw Error("weyl_product: no factors");
    if (nu % 2) throw Error("weyl_product: odd factor count; use the chord form");
    for (const auto& f : factors) {
        f.validate();
        if (f.kind != SymbolKind::weyl) throw GridError("weyl_product: expects Weyl symbols");
    }
    const GridSpec& g = factors.front().grid;
    const int N = g.N;
    const double hbar = g.hbar;
    for (const auto& f : factors) {
        if (f.grid.axes.size() != g.axes.size() || std::abs(f.grid.hbar - hbar) > 0.0)
            throw GridError("weyl_product: grids are not commensurate");
        for (std::size_t d = 0; d < g.axes.size(); ++d)
            if (f.grid.axes[d].n != g.axes[d].n || std::abs(f.grid.axes[d].lo - g.axes[d].lo) > 1e-12 ||
                std::abs(f.grid.axes[d].hi - g.axes[d].hi) > 1e-12)
                throw GridError("weyl_product: grids are not commensurate");
    }
    require_dim(x0.size(), 2 * N, "weyl_product");
    const double dV = g.cell_volume();
    const double norm = std::pow(pi * hbar, -static_cast<double>(nu * N)) * std::pow(dV, static_cast<double>(nu));

    if (nu == 2 && N == 1) {
        // separable kernel exp((2i/hbar) u ^ v), u = x1 - x0, v = x2 - x0
        const auto& A2 = factors[0];
        const auto& A1 = factors[1];
        const int np = g.axes[0].n, nq = g.axes[1].n;
        CMat a1(np, nq), a2(np, nq);
        for (int i = 0; i < np; ++i)
            for (int j = 0; j < nq; ++j) {
                a1(i, j) = A1.values[i * nq + j];
                a2(i, j) = A2.values[i * nq + j];
            }
        CMat Ep(np, nq), Eq(nq, np);  // Ep(k,j): v_p(k), u_q(j); Eq(l,i): v_q(l), u_p(i)
        for (int k = 0; k < np; ++k)
            for (int j = 0; j < nq; ++j)
                Ep(k, j) = std::exp(cplx(0.0, -2.0 / hbar * (g.axes[1].at(j) - x0(1)) * (g.axes[0].at(k) - x0(0))));
        for (int l = 0; l < nq; ++l)
            for (int i = 0; i < np; ++i)
                Eq(l, i) = std::exp(cplx(0.0, 2.0 / hbar * (g.axes[0].at(i) - x0(0)) * (g.axes[1].at(l) - x0(1))));
        CMat T = a1 * Ep.transpose();  // (i, k)
        CMat F = (Eq * T).transpose();  // (k, l)
        return norm * a2.cwiseProduct(F).sum();
    }

    const double evals = std::pow(static_cast<double>(g.size()), static_cast<double>(nu));
    if (evals > opt.max_evaluations)
        throw GridError("weyl_product: quadrature cost " + std::to_string(evals) + " exceeds the limit");
    std::vector<std::size_t> idx(nu, 0);
    std::vector<PhasePoint> centres(nu + 1);
    centres[0] = x0;
    cplx total = 0.0;
    while (true) {
        cplx amp = 1.0;
        for (std::size_t j = 0; j < nu; ++j) {
            // path order: centres[1] carries A_1 = factors[nu-1]
            const auto& f = factors[nu - 1 - j];
            amp *= f.values[idx[j]];
            if (amp == cplx(0.0)) break;
        }
        if (amp != cplx(0.0)) {
            for (std::size_t j = 0; j < nu; ++j) centres[j + 1] = g.point(idx[j]);
            total += amp * std::exp(cplx(0.0, polygon_area_from_centres(centres) / hbar));
        }
        std::size_t d = 0;
        while (d < nu && ++idx[d] == g.size()) idx[d++] = 0;
        if (d == nu) break;
    }
    return norm * total;
}

// ---------------------------------------------------------------------------
// CSV / binary I/O
//
// CSV:    "# wwsc-grid kind=<weyl|chord> N=<N> hbar=<h>", one "# axis lo hi n"
//         line per axis, a "index,re,im" header, then one row per grid point
//         in row-major order (first axis slowest).
// Binary: little-endian; char[4] "WWSG", uint32 version=1, uint32 N,
//         uint32 kind (0 weyl, 1 chord), float64 hbar, then per axis
//         float64 lo, float64 hi, uint64 n, then the values as contiguous
//         (re, im) float64 pairs in row-major order.

inline void write_csv(const GridSymbol& s, const std::string& path) {
    s.validate();
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path);
    os << std::setprecision(17);
    os << "# wwsc-grid kind=" << (s.kind == SymbolKind::weyl ? "weyl" : "chord") << " N=" << s.grid.N
       << " hbar=" << s.grid.hbar << "\n";
    for (const auto& a : s.grid.axes) os << "# axis " << a.lo << " " << a.hi << " " << a.n << "\n";
    os << "index,re,im\n";
    for (std::size_t k = 0; k < s.values.size(); ++k)
        os << k << "," << s.values[k].real() << "," << s.values[k].imag() << "\n";
}

inline GridSymbol read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path);
    GridSymbol s;
    std::string line;
    if (!std::getline(is, line) || line.rfind("# wwsc-grid", 0) != 0) throw GridError("csv: missing header");
    {
        std::istringstream hs(line.substr(11));
        std::string tok;
        while (hs >> tok) {
            auto eq = tok.find('=');
            if (eq == std::string::npos) continue;
            auto k = tok.substr(0, eq), v = tok.substr(eq + 1);
            if (k == "kind") s.kind = (v == "chord") ? SymbolKind::chord : SymbolKind::weyl;
            else if (k == "N") s.grid.N = std::stoi(v);
            else if (k == "hbar") s.grid.hbar = std::stod(v);
        }
    }
    while (std::getline(is, line) && line.rfind("# axis", 0) == 0) {
        std::istringstream as(line.substr(6));
        Axis a;
        as >> a.lo >> a.hi >> a.n;
        s.grid.axes.push_back(a);
    }
    s.grid.validate();
    s.values.assign(s.grid.size(), 0.0);
    std::size_t count = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream rs(line);
        std::string a, b, c;
        std::getline(rs, a, ',');
        std::getline(rs, b, ',');
        std::getline(rs, c, ',');
        const std::size_t k = std::stoull(a);
        if (k >= s.values.size()) throw GridError("csv: index out of range");
        s.values[k] = {std::stod(b), std::stod(c)};
        ++count;
    }
    if (count != s.values.size()) throw GridError("csv: row count does not match grid");
    return s;
}

inline void write_binary(const GridSymbol& s, const std::string& path) {
    static_assert(sizeof(double) == 8);
    s.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path);
    auto put = [&](const auto& v) { os.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
    os.write("WWSG", 4);
    put(std::uint32_t{1});
    put(static_cast<std::uint32_t>(s.grid.N));
    put(static_cast<std::uint32_t>(s.kind == SymbolKind::weyl ? 0 : 1));
    put(s.grid.hbar);
    for (const auto& a : s.grid.axes) {
        put(a.lo);
        put(a.hi);
        put(static_cast<std::uint64_t>(a.n));
    }
    for (const auto& v : s.values) {
        put(v.real());
        put(v.imag());
    }
}

inline GridSymbol read_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path);
    auto get = [&](auto& v) {
        if (!is.read(reinterpret_cast<char*>(&v), sizeof(v))) throw GridError("binary: truncated file");
    };
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "WWSG") throw GridError("binary: bad magic");
    std::uint32_t version, N, kind;
    get(version);
    if (version != 1) throw GridError("binary: unsupported version");
    get(N);
    get(kind);
    GridSymbol s;
    s.grid.N = static_cast<int>(N);
    s.kind = kind == 0 ? SymbolKind::weyl : SymbolKind::chord;
    get(s.grid.hbar);
    for (std::uint32_t d = 0; d < 2 * N; ++d) {
        Axis a;
        std::uint64_t n;
        get(a.lo);
        get(a.hi);
        get(n);
        a.n = static_cast<int>(n);
        s.grid.axes.push_back(a);
    }
    s.grid.validate();
    s.values.resize(s.grid.size());
    for (auto& v : s.values) {
        double re, im;
        get(re);
        get(im);
        v = {re, im};
    }
    return s;
}

}  // namespace wwsc
