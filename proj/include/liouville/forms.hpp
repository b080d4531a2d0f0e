#pragma once

#include <functional>
#include <memory>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "liouville/chart.hpp"
#include "liouville/expression.hpp"

namespace liouville {

/// Pointwise covector field.
struct one_form {
    int dim = 0;
    std::function<vec(const vec&)> components;

    double operator()(const vec& z, const vec& u) const { return components(z).dot(u); }
};

/// Antisymmetric 2-form stored through its strictly upper-triangular
/// coefficients c_ij(z), i < j; antisymmetry is therefore unfalsifiable by
/// construction. Evaluation expands over i < j so that swapping the
/// arguments negates every term exactly (bitwise) in floating point.
struct two_form {
    int dim = 0;
    std::function<double(const vec&, int, int)> coeff;              // i < j
    std::function<double(const vec&, int, int, int)> coeff_deriv;   // d coeff(i,j) / dz_k

    double operator()(const vec& z, const vec& u, const vec& v) const {
        double acc = 0.0;
        for (int i = 0; i < dim; ++i)
            for (int j = i + 1; j < dim; ++j)
                acc += coeff(z, i, j) * (u[i] * v[j] - u[j] * v[i]);
        return acc;
    }

    /// Full antisymmetric coefficient matrix at z.
    mat matrix(const vec& z) const {
        mat M = mat::Zero(dim, dim);
        for (int i = 0; i < dim; ++i)
            for (int j = i + 1; j < dim; ++j) {
                const double c = coeff(z, i, j);
                M(i, j) = c;
                M(j, i) = -c;
            }
        return M;
    }

    /// Attaches a central finite-difference derivative provider.
    void use_fd_derivatives(double fd_step = kDefaultFdStep) {
        auto c = coeff;
        coeff_deriv = [c, fd_step](const vec& z, int i, int j, int k) {
            const double h = fd_step * (1.0 + std::abs(z[k]));
            vec zp = z, zm = z;
            zp[k] += h;
            zm[k] -= h;
            return (c(zp, i, j) - c(zm, i, j)) / (2.0 * h);
        };
    }
};

/// Symplectic structure: a two_form contracted to be closed and
/// nondegenerate on the chart (verified by check_closed /
/// check_nondegenerate, not assumed).
struct symplectic_structure : two_form {
    symplectic_structure() = default;
    explicit symplectic_structure(two_form f) : two_form(std::move(f)) {}

    /// Standard form sum_k dq_k ^ dp_k on R^{2n}, coordinates (q_1..q_n,p_1..p_n).
    static symplectic_structure standard(int n) {
        two_form f;
        f.dim = 2 * n;
        f.coeff = [n](const vec&, int i, int j) {
            return (j == i + n) ? 1.0 : 0.0;
        };
        f.coeff_deriv = [](const vec&, int, int, int) { return 0.0; };
        return symplectic_structure(f);
    }

    /// Constant-coefficient form from the strict upper triangle of M.
    static symplectic_structure constant(const mat& M) {
        two_form f;
        f.dim = static_cast<int>(M.rows());
        f.coeff = [M](const vec&, int i, int j) { return M(i, j); };
        f.coeff_deriv = [](const vec&, int, int, int) { return 0.0; };
        return symplectic_structure(f);
    }

    /// Expression-backed form: entries[k] holds (i, j, expression) with
    /// i < j, all other coefficients zero. Derivatives are exact.
    static symplectic_structure from_expressions(
        int dim, std::vector<std::tuple<int, int, expr::ptr>> entries) {
        struct slot {
            expr::ptr value;
            std::vector<expr::ptr> deriv;
        };
        auto table = std::make_shared<std::vector<std::vector<slot>>>(
            dim, std::vector<slot>(dim));
        for (auto& [i, j, e] : entries) {
            slot s;
            s.value = e;
            s.deriv.reserve(dim);
            for (int k = 0; k < dim; ++k) s.deriv.push_back(expr::diff(e, k));
            (*table)[i][j] = std::move(s);
        }
        two_form f;
        f.dim = dim;
        f.coeff = [table](const vec& z, int i, int j) {
            const auto& s = (*table)[i][j];
            return s.value ? expr::eval(s.value, z) : 0.0;
        };
        f.coeff_deriv = [table](const vec& z, int i, int j, int k) {
            const auto& s = (*table)[i][j];
            return s.value ? expr::eval(s.deriv[k], z) : 0.0;
        };
        return symplectic_structure(f);
    }
};

/// Builds a scalar field from an expression: exact gradient by symbolic
/// differentiation.
inline scalar_field field_from_expression(const expr::ptr& e, int dim) {
    auto grads = std::make_shared<std::vector<expr::ptr>>();
    grads->reserve(dim);
    for (int k = 0; k < dim; ++k) grads->push_back(expr::diff(e, k));
    scalar_field f;
    f.eval = [e](const vec& z) { return expr::eval(e, z); };
    f.grad = [grads, dim](const vec& z) {
        vec g(dim);
        for (int k = 0; k < dim; ++k) g[k] = expr::eval((*grads)[k], z);
        return g;
    };
    return f;
}

inline scalar_field field_from_expression(std::string_view text, int dim) {
    return field_from_expression(expr::parse(text, dim), dim);
}

}  // namespace liouville
