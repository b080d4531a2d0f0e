#pragma once

// Symplectic linear solves, Poisson brackets, and derivative-based checks.
//
// Sign convention (fixed once, all modules inherit it): a hamiltonian
// function f generates the field X with  i_X omega = -df.  With the
// coefficient matrix acting as omega(u,v) = u^T W(z) v and W_{q_k,p_k} = +1
// for the standard form, the defining equation reads  W(z) X = grad f(z).
// Consequently {q,p} = +1 and H = (q^2+p^2)/2 generates X_H = (-p, q).

#include <limits>
#include <memory>
#include <mutex>
#include <vector>

#include <Eigen/Dense>

#include "liouville/chart.hpp"
#include "liouville/forms.hpp"

namespace liouville {

struct geometry_tolerances {
    double tol_solve = 1e-12;             // linear solve residual
    double nondegeneracy_floor = 1e-10;   // |det W| below this is degenerate
};

/// X_f(p): unique solution of i_X omega = -df at p, i.e. W(p) X = grad f(p).
inline vec hamiltonian_vector_field(const symplectic_structure& omega,
                                    const scalar_field& f, const vec& p,
                                    const geometry_tolerances& tol = {}) {
    const mat W = omega.matrix(p);
    Eigen::PartialPivLU<mat> lu(W);
    const double det = lu.determinant();
    if (std::abs(det) < tol.nondegeneracy_floor)
        throw singular_form_error("symplectic form degenerate at requested point", p, det);
    const vec g = f.grad(p);
    const vec x = lu.solve(g);
    return x;
}

/// {f1,f2}_omega(p) = omega_p(X_{f1}, X_{f2}). Evaluation goes through the
/// strictly-upper expansion, so swapping f1 and f2 negates the result
/// exactly in floating point.
inline double poisson_bracket(const symplectic_structure& omega, const scalar_field& f1,
                              const scalar_field& f2, const vec& p,
                              const geometry_tolerances& tol = {}) {
    const vec x1 = hamiltonian_vector_field(omega, f1, p, tol);
    const vec x2 = hamiltonian_vector_field(omega, f2, p, tol);
    return omega(p, x1, x2);
}

struct residual_report {
    double max_residual = 0.0;
    vec worst_point;
    bool pass = false;
    double threshold = 0.0;
};

/// Regular grid over a box: per_axis samples per axis (cell centers offset
/// from the boundary so degenerate boundary points do not dominate).
inline std::vector<vec> grid_points(const chart_domain& box, int per_axis) {
    const int d = box.dim();
    std::vector<vec> pts;
    std::vector<int> idx(d, 0);
    for (;;) {
        vec z(d);
        for (int i = 0; i < d; ++i) {
            const double t = (idx[i] + 0.5) / per_axis;
            z[i] = box.lo[i] + t * (box.hi[i] - box.lo[i]);
        }
        pts.push_back(z);
        int k = 0;
        while (k < d && ++idx[k] == per_axis) idx[k++] = 0;
        if (k == d) break;
    }
    return pts;
}

/// max over the grid and index triples i<j<k of
/// |d_i w_jk - d_j w_ik + d_k w_ij|   (the components of d omega).
inline residual_report check_closed(const two_form& omega, const std::vector<vec>& grid,
                                    double tol_closed = 1e-8) {
    residual_report rep;
    rep.threshold = tol_closed;
    for (const vec& z : grid) {
        for (int i = 0; i < omega.dim; ++i)
            for (int j = i + 1; j < omega.dim; ++j)
                for (int k = j + 1; k < omega.dim; ++k) {
                    const double r = omega.coeff_deriv(z, j, k, i) -
                                     omega.coeff_deriv(z, i, k, j) +
                                     omega.coeff_deriv(z, i, j, k);
                    if (std::abs(r) > rep.max_residual) {
                        rep.max_residual = std::abs(r);
                        rep.worst_point = z;
                    }
                }
    }
    if (rep.worst_point.size() == 0 && !grid.empty()) rep.worst_point = grid.front();
    rep.pass = rep.max_residual <= tol_closed;
    return rep;
}

struct nondegeneracy_report {
    double min_abs_det = 0.0;
    vec worst_point;
    bool pass = false;
    double floor = 0.0;
};

inline nondegeneracy_report check_nondegenerate(const two_form& omega,
                                                const std::vector<vec>& grid,
                                                double floor = 1e-10) {
    nondegeneracy_report rep;
    rep.floor = floor;
    rep.min_abs_det = std::numeric_limits<double>::infinity();
    for (const vec& z : grid) {
        const double d = std::abs(omega.matrix(z).determinant());
        if (d < rep.min_abs_det) {
            rep.min_abs_det = d;
            rep.worst_point = z;
        }
    }
    rep.pass = rep.min_abs_det >= floor;
    return rep;
}

/// Pullback (Phi^* omega)_x(u,v) = omega_{Phi(x)}(DPhi u, DPhi v), realized
/// as a two_form whose coefficients are built from the Jacobian provider.
inline two_form pullback_two_form(const point_map& phi, const two_form& omega,
                                  const chart_domain* target = nullptr) {
    two_form out;
    out.dim = omega.dim;
    auto eval = phi.eval;
    auto jac = phi.jacobian;
    auto source = omega;
    const chart_domain* box = target;
    struct memo {
        std::mutex guard;
        vec x;
        vec y;
        mat J;
    };
    auto cache = std::make_shared<memo>();
    out.coeff = [eval, jac, box, cache, source](const vec& x, int i, int j) {
        std::scoped_lock lock(cache->guard);
        if (cache->x.size() != x.size() || cache->x != x) {
            vec y = eval(x);
            if (box && !box->contains(y))
                throw out_of_domain_error("pullback: map image left the chart box");
            cache->y = std::move(y);
            cache->J = jac(x);
            cache->x = x;
        }
        return source(cache->y, cache->J.col(i), cache->J.col(j));
    };
    out.use_fd_derivatives();
    return out;
}

}  // namespace liouville
