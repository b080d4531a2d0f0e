#pragma once

// Hamiltonian flows of an integrable-system candidate: individual and joint
// flow maps (the R^n-action), commutation and cocycle diagnostics, orbit
// isotropy, and detection of the stabilizer lattice (orbit topology
// R^{n-m} x T^m with periods given by the lattice basis).

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "liouville/geometry.hpp"
#include "liouville/ode.hpp"

namespace liouville {

struct flow_params {
    ode_options ode;
    geometry_tolerances geom;
    double tol_commute = 1e-8;        // bracket magnitude accepted as zero
    double tol_conserve = 1e-8;       // first-integral drift along flows
    double tol_commute_flow = 1e-7;   // joint-flow order-permutation residual
    double regularity_floor = 1e-8;   // sigma_min/sigma_max of dF at a regular point
    double merge_angle = 1e-3;        // near-parallel lattice generators merge below this
    int newton_max_iter = 50;
};

/// Chart + symplectic form + the n hamiltonians f_1..f_n. The comomentum
/// data is the assignment e_j -> f_j; validity (pairwise commutation on a
/// grid) is checked by commutation diagnostics, not assumed.
struct integrable_system_spec {
    chart_domain chart;
    symplectic_structure omega;
    std::vector<scalar_field> hamiltonians;

    int dim() const { return chart.dim(); }
    int n() const { return chart.n(); }

    vec momentum_map(const vec& z) const {
        vec f(hamiltonians.size());
        for (std::size_t k = 0; k < hamiltonians.size(); ++k)
            f[k] = hamiltonians[k].eval(z);
        return f;
    }

    /// Rows are the gradients of f_1..f_n (the Jacobian of the momentum map).
    mat momentum_jacobian(const vec& z) const {
        mat J(hamiltonians.size(), dim());
        for (std::size_t k = 0; k < hamiltonians.size(); ++k)
            J.row(k) = hamiltonians[k].grad(z);
        return J;
    }

    vec field_at(int j, const vec& z, const geometry_tolerances& tol = {}) const {
        return hamiltonian_vector_field(omega, hamiltonians[j], z, tol);
    }

    vector_field field(int j, geometry_tolerances tol = {}) const {
        auto om = omega;
        auto f = hamiltonians[j];
        return vector_field{[om, f, tol](const vec& z) {
            return hamiltonian_vector_field(om, f, z, tol);
        }};
    }
};

// ---------------------------------------------------------------------------
// guarded flow integration

/// Integrates z' = X(z) from p over [0, t] inside the chart box. Periodic
/// axes never exit; on crossing a hard boundary the exit time/state are
/// estimated by linear interpolation and reported via left_domain_error.
inline vec integrate_field(const vector_field& X, const chart_domain& chart, vec p,
                           double t, const ode_options& opt,
                           const dopri5::observer_fn* extra_observer = nullptr) {
    if (t == 0.0) return p;
    chart.require_inside(p, "integrate_field");
    dopri5 solver([&X](double, const vec& y, vec& dy) { dy = X.eval(y); }, opt);
    double t_prev = 0.0;
    vec y_prev = p;
    dopri5::observer_fn obs = [&](double tk, const vec& yk) {
        if (!chart.contains(yk)) {
            double lambda = 1.0;
            for (int i = 0; i < chart.dim(); ++i) {
                if (chart.periodic(i)) continue;
                const double d = yk[i] - y_prev[i];
                if (yk[i] > chart.hi[i] && d > 0)
                    lambda = std::min(lambda, (chart.hi[i] - y_prev[i]) / d);
                if (yk[i] < chart.lo[i] && d < 0)
                    lambda = std::min(lambda, (chart.lo[i] - y_prev[i]) / d);
            }
            const double t_exit = t_prev + lambda * (tk - t_prev);
            throw left_domain_error("trajectory left the chart box", t_exit,
                                    y_prev + lambda * (yk - y_prev));
        }
        t_prev = tk;
        y_prev = yk;
        if (extra_observer) return (*extra_observer)(tk, yk);
        return true;
    };
    return solver.integrate(0.0, std::move(p), t, &obs);
}

/// Flow of the j-th hamiltonian field for time t.
inline vec integrate_flow(const integrable_system_spec& spec, int j, const vec& p,
                          double t, const flow_params& params = {}) {
    return integrate_field(spec.field(j, params.geom), spec.chart, p, t, params.ode);
}

/// rho(t)(p): composition of the n flows for times t_1..t_n (applied in
/// index order; order independence is a measured property, not an input).
inline vec joint_action(const integrable_system_spec& spec, const vec& times,
                        const vec& p, const flow_params& params = {}) {
    vec z = p;
    for (int j = 0; j < static_cast<int>(spec.hamiltonians.size()); ++j)
        if (times[j] != 0.0) z = integrate_flow(spec, j, z, times[j], params);
    return z;
}

/// Max deviation between the two extreme orderings of the joint flow.
inline double flow_permutation_residual(const integrable_system_spec& spec,
                                        const vec& times, const vec& p,
                                        const flow_params& params = {}) {
    vec fwd = p;
    for (int j = 0; j < spec.n(); ++j)
        if (times[j] != 0.0) fwd = integrate_flow(spec, j, fwd, times[j], params);
    vec rev = p;
    for (int j = spec.n() - 1; j >= 0; --j)
        if (times[j] != 0.0) rev = integrate_flow(spec, j, rev, times[j], params);
    return spec.chart.displacement(rev, fwd).norm();
}

// ---------------------------------------------------------------------------
// commutation / cocycle report

struct bracket_statistics {
    int j = 0;
    int k = 0;
    double max_abs = 0.0;
    double mean = 0.0;
    double variance = 0.0;
    vec worst_point;
    enum class verdict { commuting, constant_cocycle, nonconstant } classification =
        verdict::commuting;
};

struct commutation_summary {
    std::vector<bracket_statistics> pairs;
    bool all_commute = true;
    double worst = 0.0;

    /// Constant 2-cocycle matrix c_{jk} (zero where brackets vanish or are
    /// non-constant); meaningful entries only where classification says so.
    mat cocycle;
};

inline commutation_summary commutation_report(const integrable_system_spec& spec,
                                              const std::vector<vec>& grid,
                                              const flow_params& params = {}) {
    const int n = spec.n();
    commutation_summary rep;
    rep.cocycle = mat::Zero(n, n);
    for (int j = 0; j < n; ++j) {
        for (int k = j + 1; k < n; ++k) {
            bracket_statistics st;
            st.j = j;
            st.k = k;
            double sum = 0.0, sum2 = 0.0;
            for (const vec& z : grid) {
                const double b = poisson_bracket(spec.omega, spec.hamiltonians[j],
                                                 spec.hamiltonians[k], z, params.geom);
                sum += b;
                sum2 += b * b;
                if (std::abs(b) > st.max_abs) {
                    st.max_abs = std::abs(b);
                    st.worst_point = z;
                }
            }
            const double m = static_cast<double>(grid.size());
            st.mean = sum / m;
            st.variance = std::max(0.0, sum2 / m - st.mean * st.mean);
            if (st.max_abs <= params.tol_commute) {
                st.classification = bracket_statistics::verdict::commuting;
            } else if (std::sqrt(st.variance) <=
                       std::max(params.tol_commute, 1e-6 * std::abs(st.mean))) {
                st.classification = bracket_statistics::verdict::constant_cocycle;
                rep.cocycle(j, k) = st.mean;
                rep.cocycle(k, j) = -st.mean;
            } else {
                st.classification = bracket_statistics::verdict::nonconstant;
            }
            rep.all_commute =
                rep.all_commute &&
                st.classification == bracket_statistics::verdict::commuting;
            rep.worst = std::max(rep.worst, st.max_abs);
            rep.pairs.push_back(std::move(st));
        }
    }
    return rep;
}

/// Max |omega(X_j, X_k)| over points sampled along the orbit through p
/// (equals the bracket residual there; zero for isotropic orbits).
inline double isotropy_check(const integrable_system_spec& spec, const vec& p,
                             const std::vector<vec>& orbit_times,
                             const flow_params& params = {}) {
    double worst = 0.0;
    for (const vec& t : orbit_times) {
        const vec z = joint_action(spec, t, p, params);
        std::vector<vec> X;
        for (int j = 0; j < spec.n(); ++j) X.push_back(spec.field_at(j, z, params.geom));
        for (int j = 0; j < spec.n(); ++j)
            for (int k = j + 1; k < spec.n(); ++k)
                worst = std::max(worst, std::abs(spec.omega(z, X[j], X[k])));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// stabilizer lattice / orbit topology

struct orbit_topology {
    int m = 0;                       // torus rank
    std::vector<vec> lattice_basis;  // m generators in R^n
    bool regular = false;
    std::vector<double> return_residuals;
    std::vector<std::string> notes;
};

namespace detail {

/// One Newton polish of a candidate lattice vector: solve <g(t), V_k> = 0
/// restricted to the orbit directions, g(t) = rho(t)(p) - p (wrapped).
inline std::optional<std::pair<vec, double>> refine_lattice_candidate(
    const integrable_system_spec& spec, const vec& p, const mat& V, vec t,
    double horizon, double tol_return, const flow_params& params) {
    const int n = spec.n();
    for (int iter = 0; iter < params.newton_max_iter; ++iter) {
        vec z;
        try {
            z = joint_action(spec, t, p, params);
        } catch (const left_domain_error&) {
            return std::nullopt;
        }
        const vec g = spec.chart.displacement(p, z);
        if (g.norm() <= 0.05 * tol_return) break;
        vec h(n);
        mat J(n, n);
        for (int k = 0; k < n; ++k) h[k] = g.dot(V.col(k));
        for (int j = 0; j < n; ++j) {
            const vec Xj = spec.field_at(j, z, params.geom);
            for (int k = 0; k < n; ++k) J(k, j) = Xj.dot(V.col(k));
        }
        const vec delta = J.partialPivLu().solve(h);
        if (!delta.allFinite() || delta.norm() > 0.5 * horizon) return std::nullopt;
        t -= delta;
        if (delta.norm() <= 1e-16 * std::max(1.0, t.norm())) break;
    }
    try {
        const vec z = joint_action(spec, t, p, params);
        const double res = spec.chart.displacement(p, z).norm();
        return std::make_pair(t, res);
    } catch (const left_domain_error&) {
        return std::nullopt;
    }
}

}  // namespace detail

/// Finds up to n independent generators of the stabilizer {t : rho(t)p = p}
/// by per-direction return detection (coarse distance scan, then a section
/// crossing refined by Newton on the orbit directions), followed by merging
/// of near-parallel generators and pairwise lattice size reduction. m is a
/// lower bound when the search horizon truncates a return.
inline orbit_topology detect_period_lattice(const integrable_system_spec& spec,
                                            const vec& p, const flow_params& params,
                                            double horizon, double tol_return = 1e-8) {
    const int n = spec.n();
    orbit_topology out;

    // regularity of the momentum map at p
    const mat dF = spec.momentum_jacobian(p);
    Eigen::JacobiSVD<mat> svd(dF);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    if (!(smin > params.regularity_floor * std::max(1.0, smax)))
        throw not_regular_error("detect_period_lattice: dF rank deficient at p");
    out.regular = true;

    // orbit tangent frame at p
    mat X(spec.dim(), n);
    for (int j = 0; j < n; ++j) X.col(j) = spec.field_at(j, p, params.geom);
    Eigen::HouseholderQR<mat> qr(X);
    const mat V = qr.householderQ() * mat::Identity(spec.dim(), n);

    std::vector<vec> generators;
    for (int j = 0; j < n; ++j) {
        const vec Xj = X.col(j);
        const double speed = Xj.norm();
        if (speed < 1e-12) {
            out.notes.push_back("direction " + std::to_string(j + 1) +
                                ": vanishing field at p; skipped");
            continue;
        }

        // curvature time scale from a field probe along the flow direction
        const double hprobe = 1e-5 * (1.0 + p.norm());
        const vec Xp = spec.field_at(j, p + hprobe * (Xj / speed), params.geom);
        const double bend = (Xp - Xj).norm() / hprobe;  // ~ |J_X X| / |X|
        const double t_curv = bend > 1e-12 * speed ? speed / bend : horizon;
        const double dt = std::max(std::min(0.01 * horizon, 0.2 * t_curv),
                                   horizon / 200000.0);
        const double capture = std::max(1.5 * speed * dt, 50 * tol_return);

        // coarse scan: walk the flow, emit the first armed local minimum of
        // the (wrapped) distance to p
        double t_cand = -1.0;
        bool armed = false;
        double d_prev = 0.0, d_prev2 = 0.0, t_prev = 0.0;
        vec z = p;
        bool exited = false;
        for (double tk = dt; tk <= horizon + 0.5 * dt; tk += dt) {
            try {
                z = integrate_field(spec.field(j, params.geom), spec.chart, z, dt,
                                    params.ode);
            } catch (const left_domain_error& e) {
                out.notes.push_back("direction " + std::to_string(j + 1) +
                                    ": trajectory left the chart at t=" +
                                    std::to_string(e.t_exit + tk - dt) +
                                    "; no return detected");
                exited = true;
                break;
            }
            const double d = spec.chart.distance(p, z);
            if (!armed && d > 2.0 * capture) armed = true;
            if (armed && t_prev > 0.0 && d_prev <= d_prev2 && d_prev <= d &&
                d_prev < capture) {
                t_cand = t_prev;
                break;
            }
            d_prev2 = d_prev;
            d_prev = d;
            t_prev = tk;
        }
        if (t_cand < 0.0) {
            if (!exited)
                out.notes.push_back("direction " + std::to_string(j + 1) +
                                    ": no return within horizon T=" +
                                    std::to_string(horizon) + " (search exhausted)");
            continue;
        }

        // 1D refinement: Poincare section through p orthogonal to the orbit
        // direction, s(t) = <z(t) - p, X_j(p)>
        double ts = t_cand;
        for (int it = 0; it < 12; ++it) {
            vec zs;
            try {
                zs = integrate_flow(spec, j, p, ts, params);
            } catch (const left_domain_error&) {
                break;
            }
            const double s = spec.chart.displacement(p, zs).dot(Xj);
            const double sp = spec.field_at(j, zs, params.geom).dot(Xj);
            if (std::abs(sp) < 1e-14) break;
            const double step = s / sp;
            ts -= step;
            if (std::abs(step) < 1e-15 * std::max(1.0, ts)) break;
        }

        // multivariate polish on all flow directions
        vec t0 = vec::Zero(n);
        t0[j] = ts;
        auto refined =
            detail::refine_lattice_candidate(spec, p, V, t0, horizon, tol_return, params);
        if (refined && refined->second <= tol_return && refined->first.norm() > 1e-6) {
            generators.push_back(refined->first);
            out.return_residuals.push_back(refined->second);
        } else if (refined) {
            out.notes.push_back("direction " + std::to_string(j + 1) +
                                ": near-return rejected (residual " +
                                std::to_string(refined->second) + ")");
        }
    }

    // merge near-parallel generators (float lattices are ill-posed at
    // resonance; m may be underreported there)
    std::vector<vec> merged;
    std::vector<double> merged_res;
    for (std::size_t i = 0; i < generators.size(); ++i) {
        bool absorbed = false;
        for (std::size_t k = 0; k < merged.size(); ++k) {
            const double c = std::abs(generators[i].dot(merged[k])) /
                             (generators[i].norm() * merged[k].norm());
            if (std::acos(std::min(1.0, c)) < params.merge_angle) {
                if (generators[i].norm() < merged[k].norm()) {
                    merged[k] = generators[i];
                    merged_res[k] = out.return_residuals[i];
                }
                out.notes.push_back("merged near-parallel generators (resonance?)");
                absorbed = true;
                break;
            }
        }
        if (!absorbed) {
            merged.push_back(generators[i]);
            merged_res.push_back(out.return_residuals[i]);
        }
    }

    // pairwise Lagrange-style size reduction; every replacement re-verified
    // as an actual return before adoption
    bool changed = true;
    int rounds = 0;
    while (changed && ++rounds < 8) {
        changed = false;
        for (std::size_t i = 0; i < merged.size(); ++i) {
            for (std::size_t k = 0; k < merged.size(); ++k) {
                if (i == k) continue;
                const double mu =
                    std::round(merged[i].dot(merged[k]) / merged[k].squaredNorm());
                if (mu == 0.0) continue;
                const vec cand = merged[i] - mu * merged[k];
                if (cand.norm() >= merged[i].norm() - 1e-12) continue;
                try {
                    const vec z = joint_action(spec, cand, p, params);
                    const double res = spec.chart.displacement(p, z).norm();
                    if (res <= 10.0 * tol_return) {
                        merged[i] = cand;
                        merged_res[i] = res;
                        changed = true;
                    }
                } catch (const left_domain_error&) {
                }
            }
        }
    }

    out.lattice_basis = std::move(merged);
    out.return_residuals = std::move(merged_res);
    out.m = static_cast<int>(out.lattice_basis.size());
    return out;
}

}  // namespace liouville
