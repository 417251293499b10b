#pragma once
// Symplectic geometry on (p,q) phase space: wedge product, point reflections,
// translations and areas of polygons described by their side centres.

#include "core.hpp"

namespace wwsc {

using PhasePoint = Vec;
using Chord = Vec;

// a ^ b = p_a.q_b - q_a.p_b = (J a).b
inline double wedge(const Vec& a, const Vec& b) {
    require_dim(a.size(), b.size(), "wedge");
    const int N = dof_of(a);
    return a.head(N).dot(b.tail(N)) - a.tail(N).dot(b.head(N));
}

inline PhasePoint reflect(const PhasePoint& x, const PhasePoint& centre) {
    require_dim(x.size(), centre.size(), "reflect");
    return 2.0 * centre - x;
}

struct AffineSymplecticMap {
    Mat linear;
    Vec shift;

    static AffineSymplecticMap identity(int N) {
        return {Mat::Identity(2 * N, 2 * N), Vec::Zero(2 * N)};
    }
    static AffineSymplecticMap reflection(const PhasePoint& c) {
        const auto n = c.size();
        return {-Mat::Identity(n, n), 2.0 * c};
    }
    static AffineSymplecticMap translation(const Chord& xi) {
        const auto n = xi.size();
        return {Mat::Identity(n, n), xi};
    }

    Vec operator()(const Vec& x) const { return linear * x + shift; }

    // (*this) o g
    AffineSymplecticMap after(const AffineSymplecticMap& g) const {
        require_dim(linear.cols(), g.linear.rows(), "affine compose");
        return {linear * g.linear, linear * g.shift + shift};
    }

    bool is_translation(double tol = 0.0) const {
        const auto n = linear.rows();
        return (linear - Mat::Identity(n, n)).cwiseAbs().maxCoeff() <= tol;
    }
    bool is_reflection(double tol = 0.0) const {
        const auto n = linear.rows();
        return (linear + Mat::Identity(n, n)).cwiseAbs().maxCoeff() <= tol;
    }
    // for a reflection x -> 2c - x
    PhasePoint reflection_centre() const { return 0.5 * shift; }
};

// Centres in written operator order: {c_k, ..., c_1, c_0} means R_{c_k} ... R_{c_0},
// so the last entry acts first.
inline AffineSymplecticMap compose_reflections(const std::vector<PhasePoint>& centres) {
    if (centres.empty()) throw Error("compose_reflections: empty centre list");
    const int N = dof_of(centres.front());
    auto m = AffineSymplecticMap::identity(N);
    for (auto it = centres.rbegin(); it != centres.rend(); ++it) {
        require_dim(it->size(), 2 * N, "compose_reflections");
        m = AffineSymplecticMap::reflection(*it).after(m);
    }
    return m;
}

// Centre of the reflection equal to R_{x_nu} ... R_{x_1} for an odd number of
// centres given in path order x_1, ..., x_nu (x_1 acts first).
inline PhasePoint closure_centre(const std::vector<PhasePoint>& path_centres) {
    if (path_centres.empty()) throw Error("closure_centre: empty centre list");
    if (path_centres.size() % 2 == 0)
        throw Error("closure_centre: needs an odd number of centres");
    const auto n = path_centres.front().size();
    Vec c = Vec::Zero(n);
    double s = 1.0;
    for (const auto& x : path_centres) {
        require_dim(x.size(), n, "closure_centre");
        c += s * x;
        s = -s;
    }
    return c;
}

inline double shoelace(const std::vector<PhasePoint>& corners) {
    double a = 0.0;
    const std::size_t n = corners.size();
    for (std::size_t k = 0; k < n; ++k) a += wedge(corners[k], corners[(k + 1) % n]);
    return 0.5 * a;
}

// Corners of the closed polygon whose sides are centred, in path order, on
// x_0, x_1, ..., x_nu (odd count). Corner 0 is the fixed point of the chain.
inline std::vector<PhasePoint> polygon_corners(const std::vector<PhasePoint>& path_centres) {
    if (path_centres.size() % 2 == 0)
        throw Error("polygon_corners: no unique closed polygon for an even number of centres");
    std::vector<PhasePoint> y;
    y.reserve(path_centres.size());
    y.push_back(closure_centre(path_centres));
    for (std::size_t k = 0; k + 1 < path_centres.size(); ++k)
        y.push_back(reflect(y.back(), path_centres[k]));
    return y;
}

// Symplectic area of the polygon centred on x_0..x_nu (path order). The
// reflection product R_{x_nu}...R_{x_0} equals exp(i area/hbar) times the
// reflection through corner 0.
inline double polygon_area_from_centres(const std::vector<PhasePoint>& path_centres) {
    if (path_centres.empty()) throw Error("polygon_area_from_centres: empty centre list");
    if (path_centres.size() % 2 == 0)
        throw Error("polygon_area_from_centres: no unique closed polygon for an even number of centres");
    return shoelace(polygon_corners(path_centres));
}

// Running-sum area of the path built from consecutive chords s_1, s_2, ...
// closed by the straight chord back to the start: (1/2) sum_{k<l} s_k ^ s_l.
inline double reduced_polygon_area(const std::vector<Chord>& chords) {
    if (chords.empty()) return 0.0;
    Vec run = Vec::Zero(chords.front().size());
    double a = 0.0;
    for (const auto& s : chords) {
        a += wedge(run, s);
        run += s;
    }
    return 0.5 * a;
}

}  // namespace wwsc
