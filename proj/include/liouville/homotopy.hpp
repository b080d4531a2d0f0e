#pragma once

// Homotopy operator for closed 2-forms on a star-shaped box:
//
//   (K alpha)_x(u) = int_0^1 t * alpha_{c + t(x-c)}(x - c, u) dt
//
// For closed alpha, d(K alpha) = alpha, and (K alpha)(c) = 0 exactly.
// The radial t-weight is what makes the operator a genuine homotopy
// inverse of d on the box; the closedness precondition is checked, not
// assumed, and violations are reported with their residual.

#include <cmath>
#include <memory>
#include <vector>

#include "liouville/geometry.hpp"

namespace liouville {

struct quadrature_rule {
    std::vector<double> nodes;    // in (0,1)
    std::vector<double> weights;  // sum to 1
};

/// Gauss-Legendre rule on [0,1], nodes computed by Newton iteration on the
/// Legendre recurrence (machine precision, no hardcoded tables).
inline quadrature_rule gauss_legendre_01(int n) {
    quadrature_rule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));  // root guess on [-1,1]
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        rule.nodes[n - 1 - i] = 0.5 * (1.0 + x);
        rule.weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

struct homotopy_params {
    int quadrature_nodes = 16;
    int check_per_axis = 3;        // closedness pre-check grid
    double tol_closed = 1e-6;      // pre-check threshold
    bool richardson_check = true;  // compare against a doubled-node rule
};

struct primitive_result {
    one_form primitive;
    double closedness_residual = 0.0;
    double quadrature_error = 0.0;  // Richardson estimate at box corners
};

/// Primitive of a closed 2-form alpha on a box star-shaped about center.
/// Throws not_closed_error when the pre-check fails (the residual signals
/// either d omega != 0 or broken commutation upstream).
inline primitive_result homotopy_primitive(const two_form& alpha,
                                           const chart_domain& box, const vec& center,
                                           const homotopy_params& params = {}) {
    if (!box.contains(center))
        throw out_of_domain_error("homotopy_primitive: center outside the box");

    primitive_result out;
    if (alpha.dim >= 3) {
        if (!alpha.coeff_deriv)
            throw toolkit_error("homotopy_primitive: alpha has no derivative provider");
        const auto rep =
            check_closed(alpha, grid_points(box, params.check_per_axis), params.tol_closed);
        out.closedness_residual = rep.max_residual;
        if (!rep.pass)
            throw not_closed_error("homotopy_primitive: form is not closed (residual " +
                                       std::to_string(rep.max_residual) + ")",
                                   rep.max_residual);
    }

    auto src = alpha;
    auto apply = [src, center](const quadrature_rule& rule, const vec& x) {
        const vec r = x - center;
        vec acc = vec::Zero(x.size());
        if (r.norm() == 0.0) return acc;  // K alpha vanishes at the center exactly
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            const double t = rule.nodes[q];
            const mat A = src.matrix(center + t * r);
            acc += (rule.weights[q] * t) * (A.transpose() * r);
        }
        return acc;
    };

    const auto rule = gauss_legendre_01(params.quadrature_nodes);
    out.primitive.dim = alpha.dim;
    out.primitive.components = [apply, rule](const vec& x) { return apply(rule, x); };

    if (params.richardson_check) {
        const auto fine = gauss_legendre_01(2 * params.quadrature_nodes);
        double worst = 0.0;
        for (int corner = 0; corner < (1 << alpha.dim); ++corner) {
            vec x(alpha.dim);
            for (int i = 0; i < alpha.dim; ++i)
                x[i] = (corner >> i) & 1 ? box.hi[i] : box.lo[i];
            worst = std::max(worst, (apply(rule, x) - apply(fine, x)).norm());
        }
        out.quadrature_error = worst;
    }
    return out;
}

/// Finite-difference exterior derivative of a 1-form, as a two_form.
inline two_form exterior_derivative_fd(const one_form& beta, double fd_step = 1e-4) {
    two_form d;
    d.dim = beta.dim;
    auto comps = beta.components;
    d.coeff = [comps, fd_step](const vec& z, int i, int j) {
        vec zp = z, zm = z;
        const double hi = fd_step * (1.0 + std::abs(z[i]));
        zp[i] = z[i] + hi;
        zm[i] = z[i] - hi;
        const double dibj = (comps(zp)[j] - comps(zm)[j]) / (2 * hi);
        zp[i] = z[i];
        zm[i] = z[i];
        const double hj = fd_step * (1.0 + std::abs(z[j]));
        zp[j] = z[j] + hj;
        zm[j] = z[j] - hj;
        const double djbi = (comps(zp)[i] - comps(zm)[i]) / (2 * hj);
        return dibj - djbi;
    };
    d.use_fd_derivatives(fd_step);
    return d;
}

/// max_{grid, i<j} |d(K alpha)_ij - alpha_ij| with a finite-difference
/// exterior derivative; the post-condition check of the operator.
inline double primitive_defect(const two_form& alpha, const one_form& primitive,
                               const std::vector<vec>& grid, double fd_step = 1e-4) {
    const two_form d = exterior_derivative_fd(primitive, fd_step);
    double worst = 0.0;
    for (const vec& z : grid)
        for (int i = 0; i < alpha.dim; ++i)
            for (int j = i + 1; j < alpha.dim; ++j)
                worst = std::max(worst, std::abs(d.coeff(z, i, j) - alpha.coeff(z, i, j)));
    return worst;
}

}  // namespace liouville
