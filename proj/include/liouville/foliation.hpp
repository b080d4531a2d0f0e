#pragma once

// Semilocal normal form near a regular orbit: a transverse section sigma
// with F(sigma(f)) = f, the lagrangianizing correction of the section (the
// place where the homotopy primitive is mathematically needed), and the
// assembled canonical chart (f, theta) in which omega = sum_k df_k ^
// d theta_k and the joint flow is translation in theta.

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "liouville/flows.hpp"
#include "liouville/homotopy.hpp"
#include "liouville/rng.hpp"

namespace liouville {

struct foliation_params {
    flow_params flow;
    double newton_tol = 1e-13;
    int newton_max_iter = 60;
    double inverse_tol = 1e-10;      // theta-Newton acceptance (ODE error floor)
    double base_halfwidth = 0.0;     // 0 -> 10% of |F(p0)| per axis (0.1 when zero)
    double theta_halfwidth = 0.5;
    double shrink_floor = 1e-4;      // halving floor for both boxes
    double section_fd_frac = 0.05;   // sigma-derivative step, fraction of halfwidth
    double theta_fd_step = 5e-4;     // FD step for grad theta (Newton-backed)
    double tol_lagrangian = 1e-7;
    homotopy_params homotopy;
};

// ---------------------------------------------------------------------------
// section through p0 transverse to the orbit

struct orbit_section {
    vec p0;
    vec f0;
    mat orbit_frame;   // 2n x n, orthonormal basis of span{X_j(p0)}
    mat frame;         // 2n x n, orthonormal complement (the section plane)
    std::function<vec(const vec&)> at;  // f -> sigma(f), F(sigma(f)) = f
};

/// Solves F(z) = f with z constrained to the affine plane through p0
/// orthogonal to the orbit directions. At a regular point that plane is
/// transverse to the level set, so the n x n Newton system is well posed.
inline orbit_section build_section(const integrable_system_spec& spec, const vec& p0,
                                   const foliation_params& params = {}) {
    const int n = spec.n();
    const int dim = spec.dim();

    mat X(dim, n);
    for (int j = 0; j < n; ++j) X.col(j) = spec.field_at(j, p0, params.flow.geom);
    Eigen::JacobiSVD<mat> svd(X, Eigen::ComputeFullU);
    const auto& sv = svd.singularValues();
    if (!(sv(n - 1) > params.flow.regularity_floor * std::max(1.0, sv(0))))
        throw not_regular_error("build_section: hamiltonian fields dependent at p0");

    orbit_section sec;
    sec.p0 = p0;
    sec.f0 = spec.momentum_map(p0);
    sec.orbit_frame = svd.matrixU().leftCols(n);
    sec.frame = svd.matrixU().rightCols(dim - n);

    const mat J0 = spec.momentum_jacobian(p0) * sec.frame;
    Eigen::PartialPivLU<mat> lu0(J0);
    if (std::abs(lu0.determinant()) < 1e-14)
        throw not_regular_error("build_section: section plane not transverse to dF");

    auto spec_copy = std::make_shared<const integrable_system_spec>(spec);
    const mat W = sec.frame;
    const vec f0 = sec.f0;
    const vec anchor = p0;
    const double tol = params.newton_tol;
    const int max_iter = params.newton_max_iter;

    // memo keyed by the exact bytes of f: sections are queried at the same
    // base values over and over (forward maps, FD stencils); values are
    // history-independent because Newton always starts from the same linear
    // predictor, so caching cannot change results
    struct memo {
        std::mutex guard;
        std::unordered_map<std::string, vec> values;
    };
    auto cache = std::make_shared<memo>();

    sec.at = [spec_copy, W, f0, anchor, lu0, tol, max_iter, cache](const vec& f) {
        std::string key(reinterpret_cast<const char*>(f.data()),
                        f.size() * sizeof(double));
        {
            std::scoped_lock lock(cache->guard);
            auto it = cache->values.find(key);
            if (it != cache->values.end()) return it->second;
        }
        vec c = lu0.solve(f - f0);
        double best = std::numeric_limits<double>::infinity();
        int worse_streak = 0;
        for (int it = 0; it < max_iter; ++it) {
            const vec z = anchor + W * c;
            const vec r = spec_copy->momentum_map(z) - f;
            const double rn = r.cwiseAbs().maxCoeff();
            if (rn <= tol * (1.0 + f.cwiseAbs().maxCoeff())) {
                std::scoped_lock lock(cache->guard);
                if (cache->values.size() > 200000) cache->values.clear();
                cache->values.emplace(std::move(key), z);
                return z;
            }
            if (!std::isfinite(rn)) break;
            worse_streak = rn >= best ? worse_streak + 1 : 0;
            if (worse_streak > 5) break;
            best = std::min(best, rn);
            const mat J = spec_copy->momentum_jacobian(z) * W;
            const vec step = J.partialPivLu().solve(r);
            if (!step.allFinite()) break;
            c -= step;
        }
        throw newton_divergence_error("section Newton failed to converge at the "
                                      "requested base value");
    };
    return sec;
}

// ---------------------------------------------------------------------------
// lagrangianization of a section

/// Obstruction 2-form on the base: c_ij(f) = omega_{s(f)}(ds e_i, ds e_j)
/// for a section map s; vanishes iff the section is lagrangian. Derivatives
/// of the section are 4th-order finite differences with per-axis steps tied
/// to the base box size.
inline two_form section_obstruction(const integrable_system_spec& spec,
                                    std::function<vec(const vec&)> sec_map,
                                    const chart_domain& base_box,
                                    double fd_frac = 0.1) {
    const int n = static_cast<int>(base_box.lo.size());
    vec steps(n);
    for (int i = 0; i < n; ++i)
        steps[i] = fd_frac * 0.5 * (base_box.hi[i] - base_box.lo[i]);

    auto omega = spec.omega;
    two_form c;
    c.dim = n;
    c.coeff = [omega, sec_map, steps](const vec& f, int i, int j) {
        auto column = [&](int axis) {
            const double h = steps[axis];
            vec fp = f, fm = f;
            fp[axis] = f[axis] + h;
            fm[axis] = f[axis] - h;
            const vec s1 = sec_map(fp), s2 = sec_map(fm);
            fp[axis] = f[axis] + 2 * h;
            fm[axis] = f[axis] - 2 * h;
            const vec s3 = sec_map(fp), s4 = sec_map(fm);
            return ((8.0 * (s1 - s2) - (s3 - s4)) / (12.0 * h)).eval();
        };
        return omega(sec_map(f), column(i), column(j));
    };
    c.use_fd_derivatives(1e-3);
    return c;
}

inline double max_obstruction(const two_form& c, const std::vector<vec>& samples) {
    double worst = 0.0;
    for (const vec& f : samples)
        for (int i = 0; i < c.dim; ++i)
            for (int j = i + 1; j < c.dim; ++j)
                worst = std::max(worst, std::abs(c.coeff(f, i, j)));
    return worst;
}

struct lagrangianize_result {
    std::function<vec(const vec&)> shift;  // s(f); corrected section is rho(-s(f))(sigma(f))
    double obstruction_before = 0.0;
    double obstruction_after = 0.0;
    double quadrature_error = 0.0;
};

/// Cancels the section obstruction: c is closed on the base (a consequence
/// of d omega = 0 and flow invariance), a primitive a = K c is produced by
/// the homotopy operator, and the shift s = -a makes the corrected section
/// rho(-s(f))(sigma(f)) lagrangian. On a 1-dimensional base there is
/// nothing to do (no 2-forms).
inline lagrangianize_result lagrangianize_section(
    const integrable_system_spec& spec, std::function<vec(const vec&)> sec_map,
    const chart_domain& base_box, const foliation_params& params = {}) {
    const int n = static_cast<int>(base_box.lo.size());
    lagrangianize_result out;
    if (n < 2) {
        out.shift = [n](const vec&) { return vec::Zero(n); };
        return out;
    }

    const auto samples = grid_points(base_box, 3);
    const two_form c = section_obstruction(spec, sec_map, base_box, params.section_fd_frac);
    out.obstruction_before = max_obstruction(c, samples);

    if (out.obstruction_before <= params.tol_lagrangian) {
        // already lagrangian at tolerance; the correction would only add
        // quadrature noise on top of a zero form
        out.obstruction_after = out.obstruction_before;
        out.shift = [n](const vec&) { return vec::Zero(n); };
        return out;
    }

    const vec center = 0.5 * (base_box.lo + base_box.hi);
    auto prim = homotopy_primitive(c, base_box, center, params.homotopy);
    out.quadrature_error = prim.quadrature_error;
    auto a = prim.primitive.components;
    out.shift = [a](const vec& f) { return (-a(f)).eval(); };

    auto spec_copy = std::make_shared<const integrable_system_spec>(spec);
    auto shift = out.shift;
    auto flowp = params.flow;
    auto corrected = [spec_copy, sec_map, shift, flowp](const vec& f) {
        return joint_action(*spec_copy, -shift(f), sec_map(f), flowp);
    };
    const two_form c2 =
        section_obstruction(spec, corrected, base_box, params.section_fd_frac);
    out.obstruction_after = max_obstruction(c2, samples);
    return out;
}

// ---------------------------------------------------------------------------
// canonical chart

struct chart_quality {
    double darboux = 0.0;       // max |pullback(omega) - standard block|
    double delta = 0.0;         // max |X_j(theta_k) - delta_jk|
    double linearity = 0.0;     // max |theta(rho(t)z) - theta(z) - t| (mod lattice)
    double conservation = 0.0;  // max |F(rho(t)z) - F(z)|
    int samples = 0;
    int skipped = 0;
};

struct canonical_chart {
    std::shared_ptr<const integrable_system_spec> system;
    orbit_section section;
    std::function<vec(const vec&)> shift;
    chart_domain base_box;   // box in f-space (dimension n)
    vec theta_half;          // per-direction theta half-widths
    foliation_params params;
    double lagrangian_obstruction = 0.0;  // corrected residual, 0 on 1-dim bases
    chart_quality quality;                // quick construction-time pass

    int n() const { return static_cast<int>(theta_half.size()); }

    /// Phi(f, theta) = rho(theta - s(f))(sigma(f)).
    vec forward(const vec& f, const vec& theta) const {
        const vec times = theta - shift(f);
        return joint_action(*system, times, section.at(f), params.flow);
    }

    /// (f, theta) with f = F(z) and theta from Newton on the joint flow,
    /// projected onto the orbit directions at the moving point. The guess
    /// selects the branch (theta lifts along continuous paths; periodic
    /// directions reduce mod the lattice only in reports).
    std::pair<vec, vec> inverse(const vec& z, const vec* theta_guess = nullptr) const {
        const vec f = system->momentum_map(z);
        vec theta = theta_guess ? *theta_guess : vec::Zero(n());
        double best = std::numeric_limits<double>::infinity();
        for (int it = 0; it < params.newton_max_iter; ++it) {
            vec w;
            try {
                w = forward(f, theta);
            } catch (const left_domain_error&) {
                throw inversion_failure_error(
                    "chart inverse: trajectory left the box during Newton");
            }
            const vec r = system->chart.displacement(w, z);
            const double rn = r.norm();
            if (rn <= params.inverse_tol) return {f, theta};
            if (rn < best) best = rn;
            mat X(system->dim(), n());
            for (int j = 0; j < n(); ++j)
                X.col(j) = system->field_at(j, w, params.flow.geom);
            Eigen::HouseholderQR<mat> qr(X);
            const mat V = qr.householderQ() * mat::Identity(system->dim(), n());
            vec h(n());
            for (int k = 0; k < n(); ++k) h[k] = r.dot(V.col(k));
            mat J(n(), n());
            for (int j = 0; j < n(); ++j)
                for (int k = 0; k < n(); ++k) J(k, j) = X.col(j).dot(V.col(k));
            const vec step = J.partialPivLu().solve(h);
            if (!step.allFinite())
                throw inversion_failure_error("chart inverse: singular Newton system");
            theta += step;
            if (step.norm() <= 1e-15 * (1.0 + theta.norm()) && rn <= 50 * params.inverse_tol)
                return {f, theta};  // stalled at the integrator floor
        }
        if (best <= 50 * params.inverse_tol) {
            // accept the floor when it is within a small factor of the target
            return {f, theta};
        }
        throw inversion_failure_error("chart inverse: Newton did not reach tolerance");
    }
};

/// Full pullback Jacobian of the forward map at (f, theta): the theta
/// columns are the hamiltonian fields at the image (exact), the f columns
/// are 4th-order finite differences.
inline mat chart_jacobian(const canonical_chart& chart, const vec& f, const vec& theta,
                          const vec& z_image) {
    const int n = chart.n();
    const int dim = chart.system->dim();
    mat P(dim, 2 * n);
    for (int i = 0; i < n; ++i) {
        const double h =
            chart.params.section_fd_frac * 0.5 *
            (chart.base_box.hi[i] - chart.base_box.lo[i]);
        vec fp = f, fm = f;
        fp[i] = f[i] + h;
        fm[i] = f[i] - h;
        const vec s1 = chart.forward(fp, theta), s2 = chart.forward(fm, theta);
        fp[i] = f[i] + 2 * h;
        fm[i] = f[i] - 2 * h;
        const vec s3 = chart.forward(fp, theta), s4 = chart.forward(fm, theta);
        P.col(i) = (8.0 * (s1 - s2) - (s3 - s4)) / (12.0 * h);
    }
    for (int j = 0; j < n; ++j)
        P.col(n + j) = chart.system->field_at(j, z_image, chart.params.flow.geom);
    return P;
}

/// Standard block in (f, theta) ordering: omega(e_{f_k}, e_{theta_k}) = +1.
inline mat standard_block(int n) {
    mat J = mat::Zero(2 * n, 2 * n);
    for (int k = 0; k < n; ++k) {
        J(k, n + k) = 1.0;
        J(n + k, k) = -1.0;
    }
    return J;
}

/// Reduces d by the nearest lattice vector (least-squares rounding over the
/// generator matrix); identity when no lattice is supplied.
inline vec reduce_mod_lattice(vec d, const orbit_topology* lattice) {
    if (!lattice || lattice->lattice_basis.empty()) return d;
    const int n = static_cast<int>(d.size());
    const int m = static_cast<int>(lattice->lattice_basis.size());
    mat G(n, m);
    for (int k = 0; k < m; ++k) G.col(k) = lattice->lattice_basis[k];
    const vec coeffs = (G.transpose() * G).ldlt().solve(G.transpose() * d);
    for (int k = 0; k < m; ++k) d -= std::round(coeffs[k]) * G.col(k);
    return d;
}

struct sample_record {
    vec z;             // phase-space image of the sample
    std::string kind;  // darboux | delta | linearity | conservation
    double value = 0.0;
};

struct evaluation_options {
    int samples = 200;
    std::uint64_t seed = 42;
    bool with_delta = true;
    bool with_linearity = true;
    const orbit_topology* lattice = nullptr;
    std::vector<sample_record>* rows = nullptr;  // optional per-sample sink
};

/// Measures the chart against its contracts on random samples of the
/// (f, theta) box: the Darboux block residual, X_j(theta_k) = delta_jk with
/// grad theta by finite differences through the numerical inverse, and flow
/// linearity theta -> theta + t.
inline chart_quality evaluate_chart(const canonical_chart& chart,
                                    const evaluation_options& opt = {}) {
    chart_quality q;
    const int n = chart.n();
    rng r(opt.seed);
    const mat Jstd = standard_block(n);
    for (int s = 0; s < opt.samples; ++s) {
        vec f(n), theta(n);
        for (int i = 0; i < n; ++i)
            f[i] = r.uniform(chart.base_box.lo[i], chart.base_box.hi[i]);
        for (int i = 0; i < n; ++i)
            theta[i] = r.uniform(-chart.theta_half[i], chart.theta_half[i]);
        try {
            const vec z = chart.forward(f, theta);

            // darboux block
            const mat P = chart_jacobian(chart, f, theta, z);
            double local = 0.0;
            for (int a = 0; a < 2 * n; ++a)
                for (int b = a + 1; b < 2 * n; ++b) {
                    const double w = chart.system->omega(z, P.col(a), P.col(b));
                    local = std::max(local, std::abs(w - Jstd(a, b)));
                }
            q.darboux = std::max(q.darboux, local);
            if (opt.rows) opt.rows->push_back({z, "darboux", local});

            if (opt.with_delta) {
                mat X(chart.system->dim(), n);
                for (int j = 0; j < n; ++j)
                    X.col(j) = chart.system->field_at(j, z, chart.params.flow.geom);
                double local_delta = 0.0;
                for (int k = 0; k < n; ++k) {
                    vec grad_theta(chart.system->dim());
                    for (int i = 0; i < chart.system->dim(); ++i) {
                        const double h =
                            chart.params.theta_fd_step * (1.0 + std::abs(z[i]));
                        vec zp = z, zm = z;
                        zp[i] += h;
                        zm[i] -= h;
                        const vec tp = chart.inverse(zp, &theta).second;
                        const vec tm = chart.inverse(zm, &theta).second;
                        grad_theta[i] = (tp[k] - tm[k]) / (2 * h);
                    }
                    for (int j = 0; j < n; ++j) {
                        const double d = grad_theta.dot(X.col(j)) - (j == k ? 1.0 : 0.0);
                        local_delta = std::max(local_delta, std::abs(d));
                    }
                }
                q.delta = std::max(q.delta, local_delta);
                if (opt.rows) opt.rows->push_back({z, "delta", local_delta});
            }

            if (opt.with_linearity) {
                vec t(n);
                for (int i = 0; i < n; ++i)
                    t[i] = r.uniform(-0.4, 0.4) * chart.theta_half[i];
                const vec w = joint_action(*chart.system, t, z, chart.params.flow);
                vec guess = theta + t;
                const vec theta_w = chart.inverse(w, &guess).second;
                const vec d = reduce_mod_lattice(theta_w - theta - t, opt.lattice);
                const double lin = d.cwiseAbs().maxCoeff();
                q.linearity = std::max(q.linearity, lin);
                const vec df = chart.system->momentum_map(w) - chart.system->momentum_map(z);
                const double cons = df.cwiseAbs().maxCoeff();
                q.conservation = std::max(q.conservation, cons);
                if (opt.rows) {
                    opt.rows->push_back({z, "linearity", lin});
                    opt.rows->push_back({z, "conservation", cons});
                }
            }
            ++q.samples;
        } catch (const left_domain_error&) {
            ++q.skipped;
        } catch (const out_of_domain_error&) {
            ++q.skipped;
        }
    }
    return q;
}

/// Max norm of (pullback of omega under the chart forward map) minus the
/// standard constant block, over explicit (f, theta) samples.
inline double darboux_residual(const canonical_chart& chart,
                               const std::vector<std::pair<vec, vec>>& samples) {
    const int n = chart.n();
    const mat Jstd = standard_block(n);
    double worst = 0.0;
    for (const auto& [f, theta] : samples) {
        const vec z = chart.forward(f, theta);
        const mat P = chart_jacobian(chart, f, theta, z);
        for (int a = 0; a < 2 * n; ++a)
            for (int b = a + 1; b < 2 * n; ++b)
                worst = std::max(worst, std::abs(chart.system->omega(z, P.col(a), P.col(b)) -
                                                 Jstd(a, b)));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// assembly

/// Builds the canonical chart near the regular orbit through p0: section,
/// lagrangianizing shift, and a validity box found by halving (base box
/// from the 10% rule, theta box from the requested halfwidth) until all
/// probes stay inside the chart; floors are honest failure, not silent
/// shrink. The quick quality pass runs on a few samples; callers evaluate
/// at their own scale.
inline canonical_chart canonical_coordinates(
    std::shared_ptr<const integrable_system_spec> system, const vec& p0,
    const foliation_params& params = {}) {
    const auto& spec = *system;
    const int n = spec.n();

    const vec f0 = spec.momentum_map(p0);
    vec half(n);
    for (int i = 0; i < n; ++i) {
        if (params.base_halfwidth > 0)
            half[i] = params.base_halfwidth;
        else
            half[i] = std::abs(f0[i]) > 1e-8 ? 0.1 * std::abs(f0[i]) : 0.1;
    }

    for (int attempt = 0; attempt < 16; ++attempt) {
        if (half.minCoeff() < params.shrink_floor)
            throw newton_divergence_error(
                "canonical_coordinates: base box shrank below the floor");
        chart_domain base;
        base.lo = f0 - half;
        base.hi = f0 + half;
        base.period.assign(n, 0.0);
        try {
            orbit_section sec = build_section(spec, p0, params);
            // probe the section across the base box corners
            for (int corner = 0; corner < (1 << n); ++corner) {
                vec f(n);
                for (int i = 0; i < n; ++i)
                    f[i] = (corner >> i) & 1 ? base.hi[i] : base.lo[i];
                const vec z = sec.at(f);
                spec.chart.require_inside(z, "canonical_coordinates");
            }

            auto lag = lagrangianize_section(spec, sec.at, base, params);

            canonical_chart chart;
            chart.system = system;
            chart.section = std::move(sec);
            chart.shift = lag.shift;
            chart.base_box = base;
            chart.params = params;
            chart.lagrangian_obstruction = lag.obstruction_after;

            // shrink the theta box until forward probes stay inside
            double tw = params.theta_halfwidth;
            for (; tw >= params.shrink_floor; tw *= 0.5) {
                chart.theta_half = vec::Constant(n, tw);
                bool ok = true;
                for (int corner = 0; corner < (1 << (2 * n)) && ok; ++corner) {
                    vec f(n), theta(n);
                    for (int i = 0; i < n; ++i)
                        f[i] = (corner >> i) & 1 ? base.hi[i] : base.lo[i];
                    for (int i = 0; i < n; ++i)
                        theta[i] = (corner >> (n + i)) & 1 ? tw : -tw;
                    try {
                        chart.forward(f, theta);
                    } catch (const left_domain_error&) {
                        ok = false;
                    } catch (const out_of_domain_error&) {
                        ok = false;
                    }
                }
                if (ok) break;
            }
            if (tw < params.shrink_floor)
                throw inversion_failure_error(
                    "canonical_coordinates: no valid theta box inside the chart");

            evaluation_options quick;
            quick.samples = 24;
            quick.with_delta = false;
            chart.quality = evaluate_chart(chart, quick);
            return chart;
        } catch (const newton_divergence_error&) {
            half *= 0.5;  // shrink and retry (documented schedule)
        } catch (const out_of_domain_error&) {
            half *= 0.5;
        }
    }
    throw newton_divergence_error(
        "canonical_coordinates: retries exhausted while shrinking the base box");
}

}  // namespace liouville
