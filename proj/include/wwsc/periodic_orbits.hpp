#pragma once
// Compound periodic orbits by damped Newton, their trace contributions and
// continuation over reflection-centre families.

#include <deque>
#include <map>
#include <optional>

#include "compound.hpp"

namespace wwsc {

struct PeriodicOrbit {
    PhasePoint fixed_point;
    CompoundTrajectory trajectory;  // launched from the fixed point (after the closing reflection when present)
    bool closing_reflection = false;
    PhasePoint closing_centre;
    double action = 0.0;
    Mat monodromy;                  // map linearisation at the fixed point
    double stability = 0.0;         // |det(I - M)|
    int iterations = 0;
    double residual = 0.0;
};

struct NewtonOptions {
    int max_iterations = 50;
    double tolerance = 1e-10;
    IntegratorOptions integrator{};
};

namespace detail {

struct CompoundMap {
    std::vector<PhasePoint> centres;  // as given
    std::vector<EvolutionSpec> evolutions;
    bool full = false;

    // returns (image, monodromy of the full map, trajectory from the launch point)
    std::tuple<Vec, Mat, CompoundTrajectory> operator()(const Vec& x, const IntegratorOptions& opt) const {
        if (full) {
            const Vec launch = reflect(x, centres.front());
            std::vector<PhasePoint> rest(centres.begin() + 1, centres.end());
            auto tr = build_compound(launch, rest, evolutions, opt);
            Mat M = -compound_monodromy(tr);
            Vec img = tr.final_point;
            return {std::move(img), std::move(M), std::move(tr)};
        }
        auto tr = build_compound(x, centres, evolutions, opt);
        Mat M = compound_monodromy(tr);
        Vec img = tr.final_point;
        return {std::move(img), std::move(M), std::move(tr)};
    }
};

inline CompoundMap make_map(const std::vector<PhasePoint>& centres, const std::vector<EvolutionSpec>& evolutions) {
    CompoundMap m{centres, evolutions, false};
    if (evolutions.size() == centres.size() + 1) return m;
    if (evolutions.size() == centres.size() && !centres.empty()) {
        m.full = true;
        return m;
    }
    throw Error("periodic orbit: evolutions must number centres or centres + 1");
}

}  // namespace detail

// Fixed point of the compound map. With one more evolution than centres the
// map is the reduced compound x0- -> x0+; with equal counts centres[0] is the
// closing reflection applied first.
inline PeriodicOrbit find_periodic(const std::vector<PhasePoint>& centres, const std::vector<EvolutionSpec>& evolutions,
                                   const PhasePoint& seed, const NewtonOptions& opt = {}) {
    const auto F = detail::make_map(centres, evolutions);
    const long n = seed.size();
    const Mat I = Mat::Identity(n, n);
    Vec x = seed;
    auto [img, M, tr] = F(x, opt.integrator);
    Vec r = img - x;
    double res = r.norm();
    int it = 0;
    for (; it < opt.max_iterations && res >= opt.tolerance; ++it) {
        const Mat Jac = M - I;
        const double d = Jac.determinant();
        if (std::abs(d) < 1e-14) throw ConvergenceError("find_periodic: singular Jacobian (parabolic orbit)", res);
        const Vec dx = -Jac.partialPivLu().solve(r);
        double lam = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 30; ++ls, lam *= 0.5) {
            const Vec xt = x + lam * dx;
            try {
                auto [img2, M2, tr2] = F(xt, opt.integrator);
                const Vec r2 = img2 - xt;
                if (r2.norm() < res || ls == 29) {
                    x = xt;
                    img = img2;
                    M = M2;
                    tr = std::move(tr2);
                    r = r2;
                    accepted = r2.norm() < res;
                    res = r2.norm();
                    break;
                }
            } catch (const Error&) {
            }
        }
        if (!accepted && res >= opt.tolerance) throw ConvergenceError("find_periodic: line search failed", res);
    }
    if (!(res < opt.tolerance)) throw ConvergenceError("find_periodic: no convergence", res);
    PeriodicOrbit o;
    o.fixed_point = x;
    o.closing_reflection = F.full;
    if (F.full) o.closing_centre = centres.front();
    o.trajectory = tr;
    o.monodromy = M;
    o.stability = std::abs((I - M).determinant());
    o.iterations = it;
    o.residual = res;
    // closed-path action: segment actions plus the running-sum polygon area over
    // every chord, including the closing reflection when present
    std::vector<Chord> chords;
    if (F.full) chords.push_back(tr.initial - x);
    for (const auto& c : tr.chords()) chords.push_back(c);
    double s = reduced_polygon_area(chords);
    for (const auto& seg : tr.segments) s += seg.action;
    o.action = s;
    return o;
}

struct TraceOptions {
    double resonance_threshold = 1e-8;
    MaslovOptions maslov{};
};

struct TraceContribution {
    cplx value;
    int k = 0;  // continuous arg det(I - M) in units of pi, from the zero-time anchor
    double det = 0.0;
};

// e^{iS/hbar} e^{-i pi k/2} / |det(I - M)|^{1/2} for an orbit of an odd
// product of reflections.
inline TraceContribution trace_sc_detail(const PeriodicOrbit& o, double hbar, const TraceOptions& opt = {}) {
    const std::size_t refl = o.trajectory.centres.size() + (o.closing_reflection ? 1 : 0);
    if (refl % 2 == 0) throw Error("trace_sc: needs an odd number of reflections");
    const long n = o.fixed_point.size();
    const Mat I = Mat::Identity(n, n);
    const double d = (I - o.monodromy).determinant();
    if (std::abs(d) < opt.resonance_threshold) throw ResonanceError("trace_sc: det(I - M) vanishes", d);
    const auto& tr = o.trajectory;
    auto Ms = [&](double s) -> Mat {
        if (s == 1.0) return o.monodromy;
        auto t2 = build_compound(tr.initial, tr.centres, scaled(tr.evolutions, s), opt.maslov.integrator);
        Mat M = compound_monodromy(t2);
        return o.closing_reflection ? Mat(-M) : M;
    };
    const auto m = maslov_lift(Ms, -1.0, opt.maslov);
    TraceContribution t;
    t.k = m.k;
    t.det = d;
    t.value = std::exp(cplx(0.0, o.action / hbar - 0.5 * pi * m.k)) / std::sqrt(std::abs(d));
    return t;
}

inline cplx trace_sc(const PeriodicOrbit& o, double hbar, const TraceOptions& opt = {}) {
    return trace_sc_detail(o, hbar, opt).value;
}

struct FamilyResult {
    int nx = 0, ny = 0;
    std::vector<std::optional<PeriodicOrbit>> orbits;  // row-major (ix * ny + iy)
    std::vector<int> failures;
    std::vector<std::pair<int, int>> resonance_crossings;  // neighbouring nodes where det(I-M) changes sign
    std::vector<int> sigma;                                // trace index k per node (0 if unavailable)

    double success_rate() const {
        if (orbits.empty()) return 0.0;
        std::size_t ok = 0;
        for (const auto& o : orbits) ok += o.has_value();
        return static_cast<double>(ok) / orbits.size();
    }
};

// Breadth-first continuation over an nx x ny grid of centre sets, each node
// warm-started from an already solved neighbour.
inline FamilyResult continue_family(const std::vector<std::vector<PhasePoint>>& centre_grid, int nx, int ny,
                                    const std::vector<EvolutionSpec>& evolutions, const PhasePoint& seed,
                                    double hbar = 1.0, const NewtonOptions& opt = {}) {
    if (nx < 1 || ny < 1 || static_cast<int>(centre_grid.size()) != nx * ny)
        throw Error("continue_family: centre grid does not match its shape");
    FamilyResult fr;
    fr.nx = nx;
    fr.ny = ny;
    fr.orbits.assign(centre_grid.size(), std::nullopt);
    fr.sigma.assign(centre_grid.size(), 0);
    std::vector<char> visited(centre_grid.size(), 0);
    std::deque<std::pair<int, PhasePoint>> queue;
    queue.emplace_back(0, seed);
    visited[0] = 1;
    auto neighbours = [&](int node) {
        std::vector<int> nb;
        const int ix = node / ny, iy = node % ny;
        if (ix > 0) nb.push_back(node - ny);
        if (ix + 1 < nx) nb.push_back(node + ny);
        if (iy > 0) nb.push_back(node - 1);
        if (iy + 1 < ny) nb.push_back(node + 1);
        return nb;
    };
    while (!queue.empty()) {
        auto [node, guess] = queue.front();
        queue.pop_front();
        try {
            fr.orbits[node] = find_periodic(centre_grid[node], evolutions, guess, opt);
            try {
                fr.sigma[node] = trace_sc_detail(*fr.orbits[node], hbar).k;
            } catch (const ResonanceError&) {
            }
        } catch (const Error&) {
            fr.failures.push_back(node);
        }
        for (int nb : neighbours(node)) {
            if (visited[nb]) continue;
            // prefer a solved start; unsolved nodes pass on their own guess
            visited[nb] = 1;
            queue.emplace_back(nb, fr.orbits[node] ? fr.orbits[node]->fixed_point : guess);
        }
    }
    // retry failed nodes from any solved neighbour
    for (int node : std::vector<int>(fr.failures)) {
        for (int nb : neighbours(node)) {
            if (!fr.orbits[nb]) continue;
            try {
                fr.orbits[node] = find_periodic(centre_grid[node], evolutions, fr.orbits[nb]->fixed_point, opt);
                break;
            } catch (const Error&) {
            }
        }
    }
    fr.failures.clear();
    for (std::size_t i = 0; i < fr.orbits.size(); ++i)
        if (!fr.orbits[i]) fr.failures.push_back(static_cast<int>(i));
    const long n = seed.size();
    for (int node = 0; node < nx * ny; ++node) {
        if (!fr.orbits[node]) continue;
        for (int nb : neighbours(node)) {
            if (nb < node || !fr.orbits[nb]) continue;
            const double d1 = (Mat::Identity(n, n) - fr.orbits[node]->monodromy).determinant();
            const double d2 = (Mat::Identity(n, n) - fr.orbits[nb]->monodromy).determinant();
            if (d1 * d2 < 0.0) fr.resonance_crossings.emplace_back(node, nb);
        }
    }
    return fr;
}

inline void write_family_csv(const FamilyResult& fr, std::ostream& os) {
    os << std::setprecision(12) << "ix,iy,ok,fixed_p,fixed_q,action,stability,sigma\n";
    for (int node = 0; node < fr.nx * fr.ny; ++node) {
        os << node / fr.ny << "," << node % fr.ny << ",";
        if (const auto& o = fr.orbits[node]) {
            os << 1 << "," << o->fixed_point(0) << "," << o->fixed_point(o->fixed_point.size() / 2) << "," << o->action
               << "," << o->stability << "," << fr.sigma[node] << "\n";
        } else {
            os << "0,,,,,\n";
        }
    }
}

inline void write_family_csv(const FamilyResult& fr, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path);
    write_family_csv(fr, os);
}

}  // namespace wwsc
