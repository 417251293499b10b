// Small tour: a reflection triangle, its periodic orbit and trace, and one
// two-time correlation checked against the truncated-space oracle.

#include <iostream>

#include "wwsc/correlation.hpp"
#include "wwsc/periodic_orbits.hpp"

using namespace wwsc;

int main() {
    const double hbar = 0.5;
    Oracle orc(hbar);

    const std::vector<PhasePoint> tri{make_vec({0.0, 0.0}), make_vec({1.0, 0.0}), make_vec({0.0, 1.0})};
    const auto idle = evolution(Hamiltonian::harmonic(1.0), 0.0);
    const auto still = find_periodic(tri, {idle, idle, idle}, Vec::Zero(2));
    std::cout << "triangle: area " << polygon_area_from_centres(tri) << ", fixed point " << still.fixed_point.transpose()
              << "\n  trace_sc " << trace_sc(still, hbar) << "  oracle " << orc.compound_trace(tri, {idle, idle, idle}, still.fixed_point)
              << "\n";

    Mat Q(2, 2);
    Q << 0.5, 0.1, 0.1, 0.8;
    const auto osc = Hamiltonian::harmonic(1.0);
    const auto tilted = Hamiltonian::quadratic(Q, make_vec({0.2, -0.1}));
    const std::vector<EvolutionSpec> evs{evolution(osc, 0.3), evolution(tilted, 0.7), evolution(osc, -0.4)};
    const auto orbit = find_periodic(tri, evs, Vec::Zero(2));
    std::cout << "with flow: fixed point " << orbit.fixed_point.transpose() << ", action " << orbit.action
              << "\n  trace_sc " << trace_sc(orbit, hbar) << "  oracle " << orc.compound_trace(tri, evs, orbit.fixed_point) << "\n";

    Poly q(2), p2(2);
    q.add_term({0, 1}, 1.0);
    p2.add_term({2, 0}, 1.0);
    CorrelationTask task;
    task.observables = {Observable::polynomial(q), Observable::polynomial(p2)};
    task.evolutions = {evolution(osc, 0.3), evolution(tilted, 0.7), evolution(osc, -0.2)};
    task.state = GaussianState{make_vec({0.3, -0.4}), Mat::Identity(2, 2)};
    task.hbar = hbar;
    const auto ivr = correlate(task);
    task.estimator = EstimatorKind::oracle_exact;
    std::cout << "correlation: ivr " << ivr.value << " (" << ivr.method << ")  oracle " << correlate(task).value << "\n";
    return 0;
}
