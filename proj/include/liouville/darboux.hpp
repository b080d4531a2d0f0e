#pragma once

// Darboux coordinates near a point of an arbitrary symplectic chart,
// obtained by constructing a free commuting hamiltonian family and then
// linearizing it as an integrable system. The construction turns the
// existence proof into an algorithm: a coordinate-seed hamiltonian whose
// field survives at p, a flow-box chart rectifying the current fields, and
// new hamiltonians pulled back from transversal coordinates (constant along
// the rectified directions, hence commuting up to chart error).

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "liouville/foliation.hpp"

namespace liouville {

struct darboux_params {
    foliation_params foliation;
    double seed_floor = 1e-6;
    double rank_floor = 1e-6;
    double tol_commute_cert = 1e-7;
    double tol_flow_commute = 1e-6;
    double working_halfwidth = 0.8;  // validation box around p
    double field_fd_step = 1e-4;     // FD gradients of Newton-backed fields
    int cert_samples = 100;
    double cert_radius = 0.05;
    std::uint64_t cert_seed = 42;
};

// ---------------------------------------------------------------------------
// seed hamiltonian

/// Coordinate seed (z_i - z_i(p) + 1)^2, the translated square of whichever
/// coordinate maximizes |X_f(p)|; its gradient at p is exactly 2 e_i, so
/// nondegeneracy of omega guarantees a usable candidate.
inline scalar_field seed_hamiltonian(const symplectic_structure& omega, const vec& p,
                                     double seed_floor = 1e-6) {
    const int dim = static_cast<int>(p.size());
    const mat W = omega.matrix(p);
    Eigen::PartialPivLU<mat> lu(W);
    if (std::abs(lu.determinant()) < 1e-12)
        throw singular_form_error("seed_hamiltonian: form degenerate at p", p,
                                  lu.determinant());
    int best_axis = -1;
    double best_norm = 0.0;
    for (int i = 0; i < dim; ++i) {
        const double norm = lu.solve(2.0 * vec::Unit(dim, i)).norm();
        if (norm > best_norm) {
            best_norm = norm;
            best_axis = i;
        }
    }
    if (best_norm < seed_floor)
        throw singular_form_error("seed_hamiltonian: every coordinate seed degenerate",
                                  p, best_norm);
    const auto e = expr::pow(
        expr::add(expr::variable(best_axis), expr::constant(1.0 - p[best_axis])),
        expr::constant(2));
    return field_from_expression(e, dim);
}

// ---------------------------------------------------------------------------
// flow-box (rectification) chart

/// Chart near p in which k given commuting fields become d/dy_i: forward
/// map is the joint flow from a transversal plane spanned by the
/// orthonormal complement of the fields at p.
struct flow_box_chart {
    vec p;
    int k = 0;
    mat span_frame;         // dim x k, orthonormal span of the fields at p
    mat transversal_frame;  // dim x (dim-k), its orthogonal complement
    std::vector<vector_field> fields;
    chart_domain domain;
    ode_options ode;
    double newton_tol = 1e-13;
    int newton_max_iter = 60;

    int dim() const { return static_cast<int>(p.size()); }

    /// xy = (x in R^{dim-k}, y in R^k) -> joint flow of the fields for
    /// times y from p + B x.
    vec forward(const vec& xy) const {
        vec z = p + transversal_frame * xy.head(dim() - k);
        for (int i = 0; i < k; ++i) {
            const double yi = xy[dim() - k + i];
            if (yi != 0.0) z = integrate_field(fields[i], domain, z, yi, ode);
        }
        return z;
    }

    /// Newton in the k flow times: flow backwards until the point lands on
    /// the transversal plane (components along the span frame vanish).
    vec inverse(const vec& z) const {
        vec y = vec::Zero(k);
        vec w = z;
        for (int it = 0;; ++it) {
            w = z;
            for (int i = 0; i < k; ++i)
                if (y[i] != 0.0) w = integrate_field(fields[i], domain, w, -y[i], ode);
            const vec g = span_frame.transpose() * (w - p);
            if (g.cwiseAbs().maxCoeff() <= newton_tol * (1.0 + z.norm())) break;
            if (it >= newton_max_iter)
                throw newton_divergence_error("flow_box inverse: Newton stalled");
            mat J(k, k);
            for (int i = 0; i < k; ++i) {
                const vec Xi = fields[i].eval(w);
                for (int c = 0; c < k; ++c) J(c, i) = -Xi.dot(span_frame.col(c));
            }
            const vec step = J.partialPivLu().solve(g);
            if (!step.allFinite())
                throw newton_divergence_error("flow_box inverse: singular system");
            y -= step;
        }
        vec xy(dim());
        xy.head(dim() - k) = transversal_frame.transpose() * (w - p);
        xy.tail(k) = y;
        return xy;
    }

    /// max over samples and fields of |(DPhi)^{-1} X_i - e_{dim-k+i}|.
    double rectification_residual(const std::vector<vec>& xy_samples,
                                  double fd_step = 1e-4) const {
        auto fwd = [this](const vec& xy) { return forward(xy); };
        auto jac = point_map::fd_jacobian(fwd, fd_step);
        double worst = 0.0;
        for (const vec& xy : xy_samples) {
            const vec z = forward(xy);
            const mat J = jac(xy);
            Eigen::PartialPivLU<mat> lu(J);
            for (int i = 0; i < k; ++i) {
                vec e = vec::Zero(dim());
                e[dim() - k + i] = 1.0;
                worst = std::max
                    (worst, (lu.solve(fields[i].eval(z)) - e).cwiseAbs().maxCoeff());
            }
        }
        return worst;
    }
};

inline flow_box_chart build_flow_box(std::vector<vector_field> fields, const vec& p,
                                     const chart_domain& domain,
                                     const darboux_params& params = {}) {
    const int dim = static_cast<int>(p.size());
    const int k = static_cast<int>(fields.size());
    mat X(dim, k);
    for (int i = 0; i < k; ++i) X.col(i) = fields[i].eval(p);
    Eigen::JacobiSVD<mat> svd(X, Eigen::ComputeFullU);
    const auto& sv = svd.singularValues();
    if (!(sv(k - 1) > params.rank_floor * std::max(1.0, sv(0))))
        throw rank_deficient_error("flow_box: fields dependent at p");

    flow_box_chart chart;
    chart.p = p;
    chart.k = k;
    chart.span_frame = svd.matrixU().leftCols(k);
    chart.transversal_frame = svd.matrixU().rightCols(dim - k);
    chart.fields = std::move(fields);
    chart.domain = domain;
    chart.ode = params.foliation.flow.ode;
    chart.newton_tol = params.foliation.newton_tol;
    chart.newton_max_iter = params.foliation.newton_max_iter;

    // measured flow commutation near p (precondition, not an assumption)
    const double s = 0.05;
    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            vec a = integrate_field(chart.fields[i], domain, p, s, chart.ode);
            a = integrate_field(chart.fields[j], domain, a, s, chart.ode);
            vec b = integrate_field(chart.fields[j], domain, p, s, chart.ode);
            b = integrate_field(chart.fields[i], domain, b, s, chart.ode);
            if ((a - b).norm() > params.tol_flow_commute)
                throw validation_error(
                    "flow_box: fields " + std::to_string(i + 1) + "," +
                    std::to_string(j + 1) + " fail to commute near p (residual " +
                    std::to_string((a - b).norm()) + ")");
        }
    }
    return chart;
}

// ---------------------------------------------------------------------------
// commuting family extension

struct commuting_family {
    std::vector<scalar_field> members;
    double bracket_residual = 0.0;  // certified max |{f_i, f_j}| on the cloud
    double rank_sigma = 0.0;        // smallest singular value of the field frame at p
    std::vector<std::string> notes;
};

namespace detail {
inline std::vector<vector_field> family_fields(const symplectic_structure& omega,
                                               const commuting_family& family,
                                               const geometry_tolerances& tol) {
    std::vector<vector_field> out;
    for (const auto& f : family.members) {
        auto om = omega;
        auto fc = f;
        out.push_back(vector_field{[om, fc, tol](const vec& z) {
            return hamiltonian_vector_field(om, fc, z, tol);
        }});
    }
    return out;
}
}  // namespace detail

/// Extends a commuting family of size k < n by the pullback of a
/// transversal flow-box coordinate: such a function is constant along the
/// rectified flows, so its brackets with the family vanish up to chart
/// error. Among the 2n-k transversal candidates the one maximizing the
/// smallest singular value of the extended field frame at p wins.
inline commuting_family extend_commuting_family(const symplectic_structure& omega,
                                                const commuting_family& family,
                                                const vec& p,
                                                const chart_domain& domain,
                                                const darboux_params& params = {}) {
    const int dim = static_cast<int>(p.size());
    const int k = static_cast<int>(family.members.size());
    const auto fields = detail::family_fields(omega, family, params.foliation.flow.geom);
    const auto box = std::make_shared<const flow_box_chart>(
        build_flow_box(fields, p, domain, params));

    mat Xp(dim, k + 1);
    for (int i = 0; i < k; ++i) Xp.col(i) = fields[i].eval(p);

    int best_axis = -1;
    double best_sigma = 0.0;
    scalar_field best_field;
    for (int axis = 0; axis < dim - k; ++axis) {
        auto candidate = scalar_field::from_function(
            [box, axis](const vec& z) { return box->inverse(z)[axis]; },
            params.field_fd_step);
        vec Xc;
        try {
            Xc = hamiltonian_vector_field(omega, candidate, p,
                                          params.foliation.flow.geom);
        } catch (const singular_form_error&) {
            continue;
        }
        Xp.col(k) = Xc;
        Eigen::JacobiSVD<mat> svd(Xp);
        const double sigma = svd.singularValues()(k);
        if (sigma > best_sigma) {
            best_sigma = sigma;
            best_axis = axis;
            best_field = candidate;
        }
    }
    if (best_axis < 0 || best_sigma < params.rank_floor)
        throw no_independent_candidate_error(
            "extend_commuting_family: no transversal candidate keeps rank " +
            std::to_string(k + 1) + " (best sigma " + std::to_string(best_sigma) +
            "); shrink the neighbourhood and retry");

    commuting_family out = family;
    out.members.push_back(best_field);
    out.rank_sigma = best_sigma;
    out.notes.push_back("extension " + std::to_string(k + 1) +
                        ": transversal axis " + std::to_string(best_axis + 1) +
                        ", sigma_min " + std::to_string(best_sigma));

    // certification: all pairwise brackets on a sample cloud around p
    rng r(params.cert_seed);
    double worst = 0.0;
    const int members = static_cast<int>(out.members.size());
    for (int s = 0; s < params.cert_samples; ++s) {
        vec z(dim);
        for (int i = 0; i < dim; ++i)
            z[i] = p[i] + params.cert_radius * (2.0 * r.uniform01() - 1.0);
        mat G(members, dim);
        for (int i = 0; i < members; ++i) G.row(i) = out.members[i].grad(z);
        Eigen::PartialPivLU<mat> lu(omega.matrix(z));
        for (int i = 0; i < members; ++i) {
            const vec Xi = lu.solve(G.row(i).transpose());
            for (int j = i + 1; j < members; ++j)
                worst = std::max(worst, std::abs(G.row(j).dot(Xi)));
        }
    }
    out.bracket_residual = worst;
    if (worst > params.tol_commute_cert)
        throw validation_error("extend_commuting_family: bracket certification "
                               "failed (residual " +
                               std::to_string(worst) + ")");
    return out;
}

// ---------------------------------------------------------------------------
// full pipeline

struct darboux_chart_result {
    canonical_chart chart;
    commuting_family family;
    residual_report closedness;
    nondegeneracy_report nondegeneracy;
    chart_domain working_box;
};

/// Seed, extend to n commuting hamiltonians, then linearize the constructed
/// free action; near p the stabilizer is generically trivial, so the chart
/// is a genuine Darboux chart. Failures carry their pipeline stage.
inline darboux_chart_result darboux_chart(const symplectic_structure& omega_in,
                                          const chart_domain& domain, const vec& p,
                                          const darboux_params& params = {}) {
    const int dim = domain.dim();
    const int n = domain.n();
    darboux_chart_result out;

    auto staged = [](const char* stage, auto&& fn) {
        try {
            return fn();
        } catch (const toolkit_error& e) {
            throw pipeline_stage_error(stage, e.what());
        }
    };

    symplectic_structure omega = omega_in;
    if (!omega.coeff_deriv) omega.use_fd_derivatives();

    // validation box around p clipped to the chart
    chart_domain wbox = domain;
    for (int i = 0; i < dim; ++i) {
        wbox.lo[i] = std::max(domain.lo[i], p[i] - params.working_halfwidth);
        wbox.hi[i] = std::min(domain.hi[i], p[i] + params.working_halfwidth);
    }
    out.working_box = wbox;

    staged("validate", [&] {
        out.closedness = check_closed(omega, grid_points(wbox, 3), 1e-6);
        if (!out.closedness.pass)
            throw not_closed_error("darboux_chart: omega not closed (residual " +
                                       std::to_string(out.closedness.max_residual) + ")",
                                   out.closedness.max_residual);
        out.nondegeneracy = check_nondegenerate(omega, grid_points(wbox, 3),
                                                params.foliation.flow.geom
                                                    .nondegeneracy_floor);
        if (!out.nondegeneracy.pass)
            throw singular_form_error("darboux_chart: omega degenerate inside the box",
                                      out.nondegeneracy.worst_point,
                                      out.nondegeneracy.min_abs_det);
        return 0;
    });

    commuting_family family;
    staged("seed", [&] {
        family.members.push_back(seed_hamiltonian(omega, p, params.seed_floor));
        family.rank_sigma =
            hamiltonian_vector_field(omega, family.members[0], p).norm();
        return 0;
    });

    staged("extend", [&] {
        while (static_cast<int>(family.members.size()) < n)
            family = extend_commuting_family(omega, family, p, domain, params);
        return 0;
    });

    auto system = std::make_shared<integrable_system_spec>();
    system->chart = domain;
    system->omega = omega;
    system->hamiltonians = family.members;
    out.family = std::move(family);

    staged("linearize", [&] {
        out.chart = canonical_coordinates(
            std::shared_ptr<const integrable_system_spec>(system), p, params.foliation);
        return 0;
    });
    return out;
}

}  // namespace liouville
