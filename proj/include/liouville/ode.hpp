#pragma once

// Adaptive fifth-order Dormand-Prince integrator (embedded 5(4) pair, FSAL)
// after Hairer, Norsett & Wanner, "Solving Ordinary Differential Equations I".
// One explicit high-order scheme serves every flow in the toolkit; energy
// conservation along hamiltonian flows is *checked* downstream, not assumed
// from the integrator.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "liouville/chart.hpp"

namespace liouville {

struct ode_options {
    double rtol = 1e-12;
    double atol = 1e-13;
    double max_step = std::numeric_limits<double>::infinity();
    double init_step = 0.0;          // 0 -> automatic
    long max_steps = 4'000'000;
};

struct ode_stats {
    long n_accepted = 0;
    long n_rejected = 0;
    long n_rhs = 0;
};

class dopri5 {
  public:
    using rhs_fn = std::function<void(double, const vec&, vec&)>;

    /// Called after each accepted step with (t, y); return false to stop early.
    using observer_fn = std::function<bool(double, const vec&)>;

    dopri5(rhs_fn rhs, ode_options opt = {}) : rhs_(std::move(rhs)), opt_(opt) {}

    /// Integrates y' = f(t,y) from (t0,y0) to t1. Wrapping of periodic
    /// coordinates into a fundamental domain is handled by the caller,
    /// between segments.
    vec integrate(double t0, vec y, double t1, const observer_fn* observer = nullptr) {
        const double dir = (t1 >= t0) ? 1.0 : -1.0;
        if (t0 == t1) return y;
        double t = t0;
        vec k1(y.size()), k2(y.size()), k3(y.size()), k4(y.size()), k5(y.size()),
            k6(y.size()), k7(y.size()), ytmp(y.size()), y5(y.size()), err(y.size());
        rhs_(t, y, k1);
        ++stats_.n_rhs;
        double h = opt_.init_step > 0 ? opt_.init_step : initial_step(t, y, k1, dir);
        h = std::min(h, opt_.max_step);
        long steps = 0;
        for (;;) {
            if (++steps > opt_.max_steps)
                throw step_failure_error("dopri5: step budget exhausted");
            if (std::abs(t1 - t) <= 1e-15 * std::max(1.0, std::abs(t1))) break;
            h = std::min(h, std::abs(t1 - t));
            const double hs = dir * h;
            if (!(h > 1e-14 * std::max(1.0, std::abs(t))))
                throw step_failure_error("dopri5: step size underflow (controller stalled)");

            ytmp = y + hs * (a21 * k1);
            rhs_(t + c2 * hs, ytmp, k2);
            ytmp = y + hs * (a31 * k1 + a32 * k2);
            rhs_(t + c3 * hs, ytmp, k3);
            ytmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
            rhs_(t + c4 * hs, ytmp, k4);
            ytmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
            rhs_(t + c5 * hs, ytmp, k5);
            ytmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
            rhs_(t + hs, ytmp, k6);
            y5 = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
            rhs_(t + hs, y5, k7);
            stats_.n_rhs += 6;

            err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            double norm = 0.0;
            for (int i = 0; i < y.size(); ++i) {
                const double sc =
                    opt_.atol + opt_.rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
                const double q = err[i] / sc;
                norm += q * q;
            }
            norm = std::sqrt(norm / y.size());

            if (norm <= 1.0) {
                t += hs;
                y.swap(y5);
                k1.swap(k7);  // FSAL
                ++stats_.n_accepted;
                if (observer && !(*observer)(t, y)) return y;
                const double fac =
                    std::clamp(0.9 * std::pow(std::max(norm, 1e-30), -0.2), 0.2, 5.0);
                h = std::min(h * fac, opt_.max_step);
            } else {
                ++stats_.n_rejected;
                // k1 still matches (t, y); FSAL slot untouched on rejection
                h *= std::clamp(0.9 * std::pow(norm, -0.2), 0.1, 0.9);
            }
        }
        return y;
    }

    const ode_stats& stats() const { return stats_; }

  private:
    /// Step-size guess from the local Lipschitz scale (Hairer's heuristic,
    /// reduced: a second derivative probe on one Euler step).
    double initial_step(double t, const vec& y, const vec& f0, double dir) {
        double d0 = 0.0, d1 = 0.0;
        for (int i = 0; i < y.size(); ++i) {
            const double sc = opt_.atol + opt_.rtol * std::abs(y[i]);
            d0 += (y[i] / sc) * (y[i] / sc);
            d1 += (f0[i] / sc) * (f0[i] / sc);
        }
        d0 = std::sqrt(d0 / y.size());
        d1 = std::sqrt(d1 / y.size());
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * (d0 / d1);
        vec y1 = y + dir * h0 * f0;
        vec f1(y.size());
        rhs_(t + dir * h0, y1, f1);
        ++stats_.n_rhs;
        double d2 = (f1 - f0).norm() / h0;
        double h1 = (std::max(d1, d2) <= 1e-15)
                        ? std::max(1e-6, h0 * 1e-3)
                        : std::pow(0.01 / std::max(d1, d2), 0.2);
        return std::min({100 * h0, h1, opt_.max_step});
    }

    // Dormand-Prince RK5(4)7M tableau
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                            a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                            a75 = -2187.0 / 6784, a76 = 11.0 / 84;
    // y5 - y4 error weights
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    rhs_fn rhs_;
    ode_options opt_;
    ode_stats stats_;
};

}  // namespace liouville
