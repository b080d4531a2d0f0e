#pragma once

// Built-in example systems with analytic oracles. Oracles are computed by
// routes independent of the flow integrator (closed-form rotations, level
// set quadrature), so they can sit on the other side of a comparison.

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "liouville/flows.hpp"

namespace liouville {

struct system_oracles {
    /// Exact flow of direction j for time t, when known in closed form.
    std::function<vec(int j, const vec& p, double t)> exact_flow;
    /// Expected torus rank at the reference point; -1 when unspecified.
    int torus_rank = -1;
    /// Axis-aligned lattice periods (0 entries: no return in that direction).
    std::vector<double> periods;
    /// Energy-dependent fundamental period from level-set quadrature.
    std::function<double(const vec& p)> period_at;
};

struct named_system {
    std::string id;
    std::string summary;
    std::shared_ptr<const integrable_system_spec> spec;
    vec reference_point;
    system_oracles oracles;
};

namespace detail {

inline vec rotate_block(const vec& z, int block, int n, double angle) {
    // X_H = (-w p, w q) convention: counterclockwise rotation in (q_b, p_b)
    vec out = z;
    const double c = std::cos(angle), s = std::sin(angle);
    const double q = z[block], p = z[n + block];
    out[block] = c * q - s * p;
    out[n + block] = s * q + c * p;
    return out;
}

/// T(h) = int_0^{2pi} dq / sqrt(2(h + cos q)) by the trapezoid rule
/// (exponentially convergent for this smooth periodic integrand).
inline double pendulum_period_quadrature(double h, int nodes = 4096) {
    double acc = 0.0;
    for (int k = 0; k < nodes; ++k) {
        const double q = 2.0 * M_PI * k / nodes;
        acc += 1.0 / std::sqrt(2.0 * (h + std::cos(q)));
    }
    return acc * 2.0 * M_PI / nodes;
}

inline named_system make_harmonic_oscillator() {
    integrable_system_spec s;
    s.chart = chart_domain::box(1, -3, 3);
    s.omega = symplectic_structure::standard(1);
    s.hamiltonians = {field_from_expression("(q1^2+p1^2)/2", 2)};
    named_system sys;
    sys.id = "harmonic_oscillator";
    sys.summary = "planar oscillator H=(q^2+p^2)/2; circular orbits of period 2*pi";
    sys.spec = std::make_shared<const integrable_system_spec>(std::move(s));
    sys.reference_point = vec{{1.0, 0.0}};
    sys.oracles.torus_rank = 1;
    sys.oracles.periods = {2 * M_PI};
    sys.oracles.exact_flow = [](int, const vec& p, double t) {
        return rotate_block(p, 0, 1, t);
    };
    return sys;
}

inline named_system make_uncoupled_oscillators() {
    const double w2 = std::sqrt(2.0);
    integrable_system_spec s;
    s.chart = chart_domain::box(2, -3, 3);
    s.omega = symplectic_structure::standard(2);
    s.hamiltonians = {
        field_from_expression("(q1^2+p1^2)/2", 4),
        field_from_expression("1.4142135623730951*(q2^2+p2^2)/2", 4)};
    named_system sys;
    sys.id = "uncoupled_oscillators";
    sys.summary = "two oscillators with frequencies 1 and sqrt(2); rank-2 lattice";
    sys.spec = std::make_shared<const integrable_system_spec>(std::move(s));
    sys.reference_point = vec{{1.0, 1.0, 0.0, 0.0}};
    sys.oracles.torus_rank = 2;
    sys.oracles.periods = {2 * M_PI, 2 * M_PI / w2};
    sys.oracles.exact_flow = [w2](int j, const vec& p, double t) {
        return rotate_block(p, j, 2, (j == 0 ? 1.0 : w2) * t);
    };
    return sys;
}

inline named_system make_pendulum() {
    integrable_system_spec s;
    s.chart = chart_domain::box(1, -M_PI, M_PI);
    s.chart.lo[1] = 0.5;   // rotational regime only; separatrix excluded
    s.chart.hi[1] = 5.0;
    s.chart.period[0] = 2 * M_PI;  // q is an angle (cylinder chart)
    s.omega = symplectic_structure::standard(1);
    s.hamiltonians = {field_from_expression("p1^2/2 - cos(q1)", 2)};
    named_system sys;
    sys.id = "pendulum";
    sys.summary = "mathematical pendulum H=p^2/2-cos(q), rotation regime";
    sys.spec = std::make_shared<const integrable_system_spec>(std::move(s));
    sys.reference_point = vec{{0.0, 3.0}};
    sys.oracles.torus_rank = 1;
    auto spec = sys.spec;
    sys.oracles.period_at = [spec](const vec& p) {
        return pendulum_period_quadrature(spec->hamiltonians[0].eval(p));
    };
    return sys;
}

inline named_system make_free_translation() {
    integrable_system_spec s;
    s.chart = chart_domain::box(1, -30, 30);
    s.omega = symplectic_structure::standard(1);
    s.hamiltonians = {field_from_expression("p1", 2)};
    named_system sys;
    sys.id = "free_translation";
    sys.summary = "H=p on the plane; orbits are lines, the stabilizer is trivial";
    sys.spec = std::make_shared<const integrable_system_spec>(std::move(s));
    sys.reference_point = vec{{0.0, 1.0}};
    sys.oracles.torus_rank = 0;
    sys.oracles.exact_flow = [](int, const vec& p, double t) {
        vec out = p;
        out[0] -= t;  // X_p = (-1, 0) under the sign convention
        return out;
    };
    return sys;
}

inline named_system make_nonstandard_form_2d() {
    integrable_system_spec s;
    s.chart = chart_domain::box(1, -20, 20);
    s.omega = symplectic_structure::from_expressions(2, {{0, 1, expr::parse("1+q1^2", 2)}});
    s.hamiltonians = {field_from_expression("p1", 2)};
    named_system sys;
    sys.id = "nonstandard_form_2d";
    sys.summary = "omega=(1+q^2) dq^dp with H=p; the Darboux pipeline testbed";
    sys.spec = std::make_shared<const integrable_system_spec>(std::move(s));
    sys.reference_point = vec{{0.0, 0.5}};
    sys.oracles.torus_rank = 0;
    return sys;
}

inline named_system make_constant_skew_form_4d() {
    const double eps = 0.1;
    mat W = mat::Zero(4, 4);
    W(0, 2) = 1;
    W(2, 0) = -1;
    W(1, 3) = 1;
    W(3, 1) = -1;
    W(0, 1) = eps;
    W(1, 0) = -eps;
    integrable_system_spec s;
    s.chart = chart_domain::box(2, -30, 30);
    s.omega = symplectic_structure::constant(W);
    s.hamiltonians = {field_from_expression("q1", 4), field_from_expression("q2", 4)};
    named_system sys;
    sys.id = "constant_skew_form_4d";
    sys.summary = "constant form with eps dq1^dq2 coupling (eps=0.1)";
    sys.spec = std::make_shared<const integrable_system_spec>(std::move(s));
    sys.reference_point = vec{{0.2, 0.1, 0.0, 0.0}};
    sys.oracles.torus_rank = 0;
    return sys;
}

inline void validate_entry(const named_system& sys) {
    const auto& spec = *sys.spec;
    // sample a shrunken box so boundary degeneracies cannot mask failures
    chart_domain probe = spec.chart;
    const vec mid = 0.5 * (probe.lo + probe.hi);
    probe.lo = mid + 0.5 * (probe.lo - mid);
    probe.hi = mid + 0.5 * (probe.hi - mid);
    const auto grid = grid_points(probe, 3);

    auto omega = spec.omega;
    if (!omega.coeff_deriv) omega.use_fd_derivatives();
    const auto closed = check_closed(omega, grid, 1e-8);
    if (!closed.pass)
        throw validation_error("catalog entry " + sys.id + ": omega not closed");
    const auto comm = commutation_report(spec, grid);
    if (!comm.all_commute)
        throw validation_error("catalog entry " + sys.id + ": hamiltonians do not commute");
}

}  // namespace detail

/// The built-in systems; each entry is checked (closedness, commutation)
/// the first time the catalog is touched.
inline const std::vector<named_system>& catalog() {
    static const std::vector<named_system> entries = [] {
        std::vector<named_system> list = {
            detail::make_harmonic_oscillator(), detail::make_uncoupled_oscillators(),
            detail::make_pendulum(),            detail::make_free_translation(),
            detail::make_nonstandard_form_2d(), detail::make_constant_skew_form_4d()};
        for (const auto& sys : list) detail::validate_entry(sys);
        return list;
    }();
    return entries;
}

inline const named_system& lookup(const std::string& id) {
    for (const auto& sys : catalog())
        if (sys.id == id) return sys;
    throw unknown_system_error("unknown system '" + id + "'");
}

}  // namespace liouville
