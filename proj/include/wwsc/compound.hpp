#pragma once
// Compound trajectories: flow segments joined by point reflections, their
// reduced actions and monodromies, and the initial-value change of variables.

#include <fstream>
#include <iomanip>

#include "propagators.hpp"

namespace wwsc {

struct CompoundTrajectory {
    PhasePoint initial;                    // x0-
    std::vector<PhasePoint> centres;       // x_1..x_nu
    std::vector<EvolutionSpec> evolutions; // U_1..U_{nu+1}
    std::vector<TrajectorySegment> segments;
    std::vector<Chord> reflection_chords;  // xi_j
    PhasePoint final_point;                // x0+
    PhasePoint midpoint;                   // x0

    std::size_t nu() const { return centres.size(); }
    // path-order chords xi'_1, xi_1, ..., xi_nu, xi'_{nu+1}
    std::vector<Chord> chords() const {
        std::vector<Chord> c;
        for (std::size_t j = 0; j < segments.size(); ++j) {
            c.push_back(segments[j].chord);
            if (j < reflection_chords.size()) c.push_back(reflection_chords[j]);
        }
        return c;
    }
};

struct CompoundResult {
    double action = 0.0;   // S'
    Mat monodromy;         // M'
    double jacobian = 0.0; // det((I+M')/2)
    double phase_lift = 0.0;
    int caustic_crossings = 0;  // k of the continuous lift of arg det(I+M')
};

inline std::vector<EvolutionSpec> scaled(const std::vector<EvolutionSpec>& evs, double s) {
    std::vector<EvolutionSpec> out;
    for (const auto& e : evs) out.push_back(e.scaled(s));
    return out;
}

inline CompoundTrajectory build_compound(const PhasePoint& x0_minus, const std::vector<PhasePoint>& centres,
                                         const std::vector<EvolutionSpec>& evolutions,
                                         const IntegratorOptions& opt = {}) {
    if (evolutions.size() != centres.size() + 1)
        throw Error("build_compound: need one more evolution than reflection centres");
    const int N = dof_of(x0_minus);
    for (const auto& c : centres) require_dim(c.size(), 2 * N, "build_compound");
    CompoundTrajectory tr;
    tr.initial = x0_minus;
    tr.centres = centres;
    tr.evolutions = evolutions;
    PhasePoint cur = x0_minus;
    for (std::size_t j = 0; j < evolutions.size(); ++j) {
        for (const auto& pc : evolutions[j].pieces()) {
            if (!pc.first) throw ConfigError("build_compound: evolution without Hamiltonian");
            require_dim(pc.first->dof(), N, "build_compound");
        }
        try {
            tr.segments.push_back(integrate_segment(evolutions[j], cur, opt));
        } catch (const Error& e) {
            throw Error("segment " + std::to_string(j + 1) + ": " + e.what());
        }
        cur = tr.segments.back().end;
        if (j < centres.size()) {
            const PhasePoint nxt = reflect(cur, centres[j]);
            tr.reflection_chords.push_back(nxt - cur);
            cur = nxt;
        }
    }
    tr.final_point = cur;
    tr.midpoint = 0.5 * (x0_minus + cur);
    return tr;
}

inline double reduced_action(const CompoundTrajectory& tr) {
    double s = 0.0;
    for (const auto& seg : tr.segments) s += seg.action;
    return s + reduced_polygon_area(tr.chords());
}

// M' = M_{nu+1} (-I) M_nu ... (-I) M_1
inline Mat compound_monodromy(const CompoundTrajectory& tr) {
    const long n = tr.initial.size();
    Mat M = Mat::Identity(n, n);
    for (std::size_t j = 0; j < tr.segments.size(); ++j) {
        if (tr.segments[j].monodromy.size() == 0) throw Error("compound_monodromy: segments built without monodromy");
        M = tr.segments[j].monodromy * M;
        if (j < tr.centres.size()) M = -M;
    }
    return M;
}

inline double ivr_jacobian(const Mat& Mprime) {
    const long n = Mprime.rows();
    return (0.5 * (Mat::Identity(n, n) + Mprime)).determinant();
}

// Action, monodromy and sign index of the reduced compound launched at x0-.
// The index follows det(I+M') as all durations grow from zero.
inline CompoundResult evaluate_compound(const CompoundTrajectory& tr, bool with_index = true,
                                        const MaslovOptions& mopt = {}) {
    CompoundResult r;
    r.action = reduced_action(tr);
    r.monodromy = compound_monodromy(tr);
    r.jacobian = ivr_jacobian(r.monodromy);
    if (with_index) {
        auto Ms = [&](double s) -> Mat {
            if (s == 1.0) return r.monodromy;
            return compound_monodromy(build_compound(tr.initial, tr.centres, scaled(tr.evolutions, s), mopt.integrator));
        };
        const auto m = maslov_lift(Ms, +1.0, mopt);
        r.phase_lift = m.lift;
        r.caustic_crossings = m.k;
    }
    return r;
}

// Polyline export: one row per sample, with reflection markers.
inline void write_compound_csv(const CompoundTrajectory& tr, std::ostream& os, const IntegratorOptions& opt = {}) {
    const int N = dof_of(tr.initial);
    os << std::setprecision(12) << "kind,index";
    for (int i = 0; i < N; ++i) os << ",p" << i + 1;
    for (int i = 0; i < N; ++i) os << ",q" << i + 1;
    os << "\n";
    auto row = [&](const char* kind, std::size_t idx, const Vec& x) {
        os << kind << "," << idx;
        for (long i = 0; i < x.size(); ++i) os << "," << x(i);
        os << "\n";
    };
    for (std::size_t j = 0; j < tr.segments.size(); ++j) {
        const auto& seg = tr.segments[j];
        Vec cur = seg.start;
        for (const auto& [H, t] : seg.evolution.pieces()) {
            const auto path = trajectory_samples(*H, cur, t, opt);
            for (const auto& x : path) row("segment", j + 1, x);
            cur = path.back();
        }
        if (j < tr.centres.size()) row("reflection", j + 1, tr.centres[j]);
    }
    row("midpoint", 0, tr.midpoint);
}

inline void write_compound_csv(const CompoundTrajectory& tr, const std::string& path,
                               const IntegratorOptions& opt = {}) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path);
    write_compound_csv(tr, os, opt);
}

}  // namespace wwsc
