#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "liouville/errors.hpp"

namespace liouville {

using vec = Eigen::VectorXd;
using mat = Eigen::MatrixXd;

/// Axis-aligned box in R^{2n} holding one coordinate chart. Coordinates are
/// ordered z = (q_1..q_n, p_1..p_n). An axis may carry a period L > 0, in
/// which case the axis is read modulo L (a cylinder factor); distances and
/// containment respect the identification. Default: all axes aperiodic.
struct chart_domain {
    vec lo;
    vec hi;
    std::vector<double> period;  // per axis; 0 = aperiodic

    int dim() const { return static_cast<int>(lo.size()); }
    int n() const { return dim() / 2; }

    static chart_domain box(int n, double lo_, double hi_) {
        chart_domain c;
        c.lo = vec::Constant(2 * n, lo_);
        c.hi = vec::Constant(2 * n, hi_);
        c.period.assign(2 * n, 0.0);
        return c;
    }

    bool periodic(int axis) const { return period[axis] > 0.0; }

    bool contains(const vec& z, double pad = 0.0) const {
        for (int i = 0; i < dim(); ++i) {
            if (periodic(i)) continue;
            if (z[i] < lo[i] - pad || z[i] > hi[i] + pad) return false;
        }
        return true;
    }

    /// Reduces periodic axes into [lo, lo + L); aperiodic axes untouched.
    vec wrap(vec z) const {
        for (int i = 0; i < dim(); ++i) {
            if (!periodic(i)) continue;
            const double L = period[i];
            z[i] = lo[i] + std::fmod(std::fmod(z[i] - lo[i], L) + L, L);
        }
        return z;
    }

    /// b - a with each periodic component reduced to the nearest representative.
    vec displacement(const vec& a, const vec& b) const {
        vec d = b - a;
        for (int i = 0; i < dim(); ++i) {
            if (!periodic(i)) continue;
            const double L = period[i];
            d[i] -= L * std::round(d[i] / L);
        }
        return d;
    }

    double distance(const vec& a, const vec& b) const { return displacement(a, b).norm(); }

    void require_inside(const vec& z, const char* who) const {
        if (!contains(z))
            throw out_of_domain_error(std::string(who) + ": point left the chart box");
    }
};

/// Default relative step for central finite differences on closed-form
/// smooth fields.
inline constexpr double kDefaultFdStep = 1e-6;

/// Smooth function on the chart with a gradient provider. The provider is
/// either exact (expression-backed fields) or central finite differences
/// with per-axis step h = fd_step * (1 + |z_i|).
struct scalar_field {
    std::function<double(const vec&)> eval;
    std::function<vec(const vec&)> grad;

    static scalar_field from_function(std::function<double(const vec&)> f,
                                      double fd_step = kDefaultFdStep) {
        scalar_field s;
        s.eval = std::move(f);
        s.grad = fd_gradient(s.eval, fd_step);
        return s;
    }

    static std::function<vec(const vec&)> fd_gradient(
        std::function<double(const vec&)> f, double fd_step) {
        return [f = std::move(f), fd_step](const vec& z) {
            vec g(z.size());
            vec zp = z, zm = z;
            for (int i = 0; i < z.size(); ++i) {
                const double h = fd_step * (1.0 + std::abs(z[i]));
                zp[i] = z[i] + h;
                zm[i] = z[i] - h;
                g[i] = (f(zp) - f(zm)) / (2.0 * h);
                zp[i] = z[i];
                zm[i] = z[i];
            }
            return g;
        };
    }
};

struct vector_field {
    std::function<vec(const vec&)> eval;
};

/// Smooth map between charts with a Jacobian provider; finite-difference
/// fallback uses the 4th-order central stencil (noise-tolerant for maps
/// built on Newton solves and ODE flows).
struct point_map {
    std::function<vec(const vec&)> eval;
    std::function<mat(const vec&)> jacobian;

    static point_map from_function(std::function<vec(const vec&)> f,
                                   double fd_step = 1e-3) {
        point_map m;
        m.eval = std::move(f);
        m.jacobian = fd_jacobian(m.eval, fd_step);
        return m;
    }

    static std::function<mat(const vec&)> fd_jacobian(
        std::function<vec(const vec&)> f, double fd_step) {
        return [f = std::move(f), fd_step](const vec& x) {
            mat J;
            vec xs = x;
            for (int i = 0; i < x.size(); ++i) {
                const double h = fd_step * (1.0 + std::abs(x[i]));
                xs[i] = x[i] + h;
                const vec fp1 = f(xs);
                xs[i] = x[i] + 2 * h;
                const vec fp2 = f(xs);
                xs[i] = x[i] - h;
                const vec fm1 = f(xs);
                xs[i] = x[i] - 2 * h;
                const vec fm2 = f(xs);
                xs[i] = x[i];
                const vec col = (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * h);
                if (J.size() == 0) J.resize(col.size(), x.size());
                J.col(i) = col;
            }
            return J;
        };
    }
};

}  // namespace liouville
