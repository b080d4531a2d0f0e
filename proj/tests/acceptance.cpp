// Acceptance suite: one line per criterion, exit 0 iff every criterion
// passes at its stated tolerance. Run through ctest (the CLI binary path
// arrives as argv[1]) or standalone:
//
//   ./acceptance /path/to/liouville

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "liouville/cli.hpp"
#include "liouville/darboux.hpp"
#include "liouville/homotopy.hpp"
#include "liouville/rng.hpp"
#include "liouville/systems.hpp"
#include "support/oracles.hpp"

using namespace liouville;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void verdict(int index, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] %2d. %s — %s\n", pass ? "PASS" : "FAIL", index, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string metric(const char* label, double value, double tol) {
    std::ostringstream ss;
    ss << label << " = " << expr::format_double(value) << " (tol "
       << expr::format_double(tol) << ")";
    return ss.str();
}

expr::ptr random_poly(rng& r, int dim, int terms = 5) {
    expr::ptr acc = expr::constant(r.uniform(-1, 1));
    for (int term = 0; term < terms; ++term) {
        expr::ptr t = expr::constant(r.uniform(-1, 1));
        const int deg = static_cast<int>(r.below(4));
        for (int d = 0; d < deg; ++d)
            t = expr::mul(t, expr::variable(static_cast<int>(r.below(dim))));
        acc = expr::add(acc, t);
    }
    return acc;
}

symplectic_structure closed_poly_form_4d(rng& r) {
    std::vector<expr::ptr> beta;
    for (int i = 0; i < 4; ++i) beta.push_back(random_poly(r, 4));
    std::vector<std::tuple<int, int, expr::ptr>> entries;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            entries.emplace_back(i, j,
                                 expr::sub(expr::diff(beta[j], i), expr::diff(beta[i], j)));
    return symplectic_structure::from_expressions(4, std::move(entries));
}

// ---------------------------------------------------------------------------

void criterion_1_bracket_convention() {
    auto omega = symplectic_structure::standard(1);
    auto q = field_from_expression("q1", 2);
    auto p = field_from_expression("p1", 2);
    rng r(101);
    double worst = 0.0;
    for (int s = 0; s < 100; ++s) {
        vec z(2);
        z << r.uniform(-2, 2), r.uniform(-2, 2);
        worst = std::max(worst, std::abs(poisson_bracket(omega, q, p, z) - 1.0));
    }
    verdict(1, "bracket convention {q,p} = +1", worst <= 1e-12,
            metric("max |{q,p} - 1|", worst, 1e-12));
}

void criterion_2_solver_oracle() {
    rng r(202);
    double worst = 0.0;
    int done = 0;
    while (done < 50) {
        const int dim = (done % 2 == 0) ? 4 : 6;
        mat W = mat::Zero(dim, dim);
        for (int i = 0; i < dim; ++i)
            for (int j = i + 1; j < dim; ++j) {
                W(i, j) = r.uniform(-1, 1);
                W(j, i) = -W(i, j);
            }
        if (std::abs(W.determinant()) < 1e-3) continue;
        ++done;
        auto omega = symplectic_structure::constant(W);
        auto f = field_from_expression(random_poly(r, dim), dim);
        vec z(dim);
        for (int i = 0; i < dim; ++i) z[i] = r.uniform(-1, 1);
        const vec mine = hamiltonian_vector_field(omega, f, z);
        const vec ref = oracles::gauss_solve(W, f.grad(z));
        worst = std::max(worst, (mine - ref).norm() / (1.0 + ref.norm()));
    }
    verdict(2, "hamiltonian solve matches an independent dense solve", worst <= 1e-12,
            metric("max relative deviation over 50 random forms", worst, 1e-12));
}

void criterion_3_conservation_commutation() {
    double worst_drift = 0.0;
    double worst_perm = 0.0;
    rng r(303);
    for (const auto& sys : catalog()) {
        const vec f0 = sys.spec->momentum_map(sys.reference_point);
        for (int j = 0; j < sys.spec->n(); ++j) {
            const vec z = integrate_flow(*sys.spec, j, sys.reference_point, 20.0);
            worst_drift = std::max(
                worst_drift, (sys.spec->momentum_map(z) - f0).cwiseAbs().maxCoeff());
        }
        if (sys.spec->n() >= 2) {
            for (int trial = 0; trial < 3; ++trial) {
                vec t(sys.spec->n());
                for (int i = 0; i < t.size(); ++i) t[i] = r.uniform(-0.5, 0.5);
                worst_perm = std::max(
                    worst_perm,
                    flow_permutation_residual(*sys.spec, t, sys.reference_point));
            }
        }
    }
    const bool pass = worst_drift <= 1e-8 && worst_perm <= 1e-7;
    verdict(3, "conservation over t in [0,20] and joint-flow commutation", pass,
            metric("max drift", worst_drift, 1e-8) + ", " +
                metric("max permutation residual", worst_perm, 1e-7));
}

void criterion_4_orbit_topology() {
    bool pass = true;
    std::string detail;

    const auto& ho = lookup("harmonic_oscillator");
    auto t1 =
        detect_period_lattice(*ho.spec, ho.reference_point, flow_params{}, 50.0, 1e-8);
    const double period_err =
        t1.m == 1 ? std::abs(std::abs(t1.lattice_basis[0][0]) - 2 * M_PI) : 1e9;
    pass = pass && t1.m == 1 && period_err <= 1e-8;
    detail += "oscillator m=" + std::to_string(t1.m) + ", " +
              metric("|period - 2pi|", period_err, 1e-8);

    const auto& ft = lookup("free_translation");
    auto t2 =
        detect_period_lattice(*ft.spec, ft.reference_point, flow_params{}, 40.0, 1e-8);
    pass = pass && t2.m == 0;
    detail += "; translation m=" + std::to_string(t2.m);

    const auto& uo = lookup("uncoupled_oscillators");
    auto t3 =
        detect_period_lattice(*uo.spec, uo.reference_point, flow_params{}, 50.0, 1e-8);
    double basis_err = 1e9;
    if (t3.m == 2) {
        const double a = 2 * M_PI;
        const double b = 2 * M_PI / std::sqrt(2.0);
        vec g1 = t3.lattice_basis[0], g2 = t3.lattice_basis[1];
        if (std::abs(g1[0]) < std::abs(g2[0])) std::swap(g1, g2);
        basis_err =
            std::max(std::max(std::abs(std::abs(g1[0]) - a), std::abs(g1[1])),
                     std::max(std::abs(g2[0]), std::abs(std::abs(g2[1]) - b)));
    }
    pass = pass && t3.m == 2 && basis_err <= 1e-6;
    detail += "; two-frequency m=" + std::to_string(t3.m) + ", " +
              metric("basis error", basis_err, 1e-6);
    verdict(4, "orbit topology R^{n-m} x T^m", pass, detail);
}

void criterion_5_pendulum_period() {
    const auto& sys = lookup("pendulum");
    const double h = sys.spec->hamiltonians[0].eval(sys.reference_point);
    const double oracle = oracles::pendulum_rotation_period(h);
    auto topo =
        detect_period_lattice(*sys.spec, sys.reference_point, flow_params{}, 30.0, 1e-8);
    const double err =
        topo.m == 1 ? std::abs(std::abs(topo.lattice_basis[0][0]) - oracle) : 1e9;
    verdict(5, "pendulum rotation period vs level-set quadrature", err <= 1e-6,
            metric("|detected - oracle|", err, 1e-6));
}

void criterion_6_homotopy_operator() {
    rng r(606);
    auto box = chart_domain::box(2, -1, 1);
    const auto grid = grid_points(box, 5);
    double worst_defect = 0.0;
    bool center_exact = true;
    for (int trial = 0; trial < 20; ++trial) {
        auto alpha = closed_poly_form_4d(r);
        const vec center = vec::Zero(4);
        auto res = homotopy_primitive(alpha, box, center);
        for (const vec& z : grid)
            for (int i = 0; i < 4; ++i)
                for (int j = i + 1; j < 4; ++j)
                    worst_defect = std::max(
                        worst_defect,
                        std::abs(
                            oracles::fd_exterior_derivative(res.primitive, z, i, j) -
                            alpha.coeff(z, i, j)));
        const vec at_center = res.primitive.components(center);
        for (int i = 0; i < 4; ++i) center_exact = center_exact && at_center[i] == 0.0;
    }

    // linearity on a fixed pair of closed forms
    double worst_linearity = 0.0;
    {
        auto alpha1 = closed_poly_form_4d(r);
        auto alpha2 = closed_poly_form_4d(r);
        const double ca = 1.3, cb = -0.7;
        two_form combo;
        combo.dim = 4;
        combo.coeff = [&alpha1, &alpha2, ca, cb](const vec& z, int i, int j) {
            return ca * alpha1.coeff(z, i, j) + cb * alpha2.coeff(z, i, j);
        };
        combo.coeff_deriv = [&alpha1, &alpha2, ca, cb](const vec& z, int i, int j,
                                                       int k) {
            return ca * alpha1.coeff_deriv(z, i, j, k) +
                   cb * alpha2.coeff_deriv(z, i, j, k);
        };
        auto k1 = homotopy_primitive(alpha1, box, vec::Zero(4));
        auto k2 = homotopy_primitive(alpha2, box, vec::Zero(4));
        auto kc = homotopy_primitive(combo, box, vec::Zero(4));
        for (int s = 0; s < 25; ++s) {
            vec z(4);
            for (int i = 0; i < 4; ++i) z[i] = r.uniform(-1, 1);
            const vec lhs = kc.primitive.components(z);
            const vec rhs =
                ca * k1.primitive.components(z) + cb * k2.primitive.components(z);
            worst_linearity =
                std::max(worst_linearity, (lhs - rhs).norm() / (1.0 + rhs.norm()));
        }
    }

    const bool pass = worst_defect <= 1e-6 && worst_linearity <= 1e-13 && center_exact;
    verdict(6, "homotopy operator d(K alpha) = alpha on 20 closed forms", pass,
            metric("max defect on 5^4 grid", worst_defect, 1e-6) + ", " +
                metric("linearity", worst_linearity, 1e-13) +
                (center_exact ? ", K(center) = 0 exact" : ", K(center) != 0"));
}

void criterion_7_linearization() {
    bool pass = true;
    std::string detail;
    for (const char* id : {"harmonic_oscillator", "uncoupled_oscillators"}) {
        const auto& sys = lookup(id);
        auto chart = canonical_coordinates(sys.spec, sys.reference_point);
        auto topo = detect_period_lattice(*sys.spec, sys.reference_point, flow_params{},
                                          50.0, 1e-8);
        evaluation_options opt;
        opt.samples = 1100;
        opt.lattice = &topo;
        auto q = evaluate_chart(chart, opt);
        const bool ok = q.samples >= 1000 && q.delta <= 1e-6 && q.darboux <= 1e-6 &&
                        q.linearity <= 1e-6;
        pass = pass && ok;
        detail += std::string(id) + ": " + std::to_string(q.samples) + " samples, " +
                  metric("delta", q.delta, 1e-6) + ", " +
                  metric("darboux", q.darboux, 1e-6) + ", " +
                  metric("linearity", q.linearity, 1e-6) + "; ";
    }
    verdict(7, "linearization X_j(theta_k) = delta_jk, omega = sum df^dtheta", pass,
            detail);
}

void criterion_8_skew_recovery() {
    integrable_system_spec s;
    s.chart = chart_domain::box(2, -3, 3);
    s.omega = symplectic_structure::standard(2);
    s.hamiltonians = {field_from_expression("(q1^2+p1^2)/2", 4),
                      field_from_expression("(q2^2+p2^2)/2", 4)};
    auto sys = std::make_shared<const integrable_system_spec>(std::move(s));
    vec p0(4);
    p0 << 1, 1, 0, 0;
    auto sec = build_section(*sys, p0);
    chart_domain base;
    base.lo = vec::Constant(2, 0.45);
    base.hi = vec::Constant(2, 0.55);
    base.period = {0.0, 0.0};
    const double kappa = 0.3;
    auto plain = sec.at;
    auto skewed = [sys, plain, kappa](const vec& f) {
        vec t(2);
        t << 0.0, kappa * f[0];
        return joint_action(*sys, t, plain(f));
    };
    auto lag = lagrangianize_section(*sys, skewed, base);
    verdict(8, "lagrangianization cancels an injected section skew",
            lag.obstruction_after <= 1e-7,
            metric("obstruction before", lag.obstruction_before, kappa + 1e-3) + ", " +
                metric("after", lag.obstruction_after, 1e-7));
}

void criterion_9_darboux() {
    bool pass = true;
    std::string detail;

    {
        auto omega = symplectic_structure::from_expressions(
            2, {{0, 1, expr::parse("1+q1^2", 2)}});
        vec p0(2);
        p0 << 0, 0;
        auto res = darboux_chart(omega, chart_domain::box(1, -2, 2), p0);
        evaluation_options opt;
        opt.samples = 150;
        auto q = evaluate_chart(res.chart, opt);

        // agreement with the analytic chart x = q + q^3/3, y = p: the
        // transition (f,theta) -> (x,y) between the two Darboux charts must
        // preserve the standard area form
        const auto& chart = res.chart;
        auto transition = [&chart](const vec& ft) {
            const vec z = chart.forward(ft.head(1), ft.tail(1));
            vec xy(2);
            xy << z[0] + z[0] * z[0] * z[0] / 3.0, z[1];
            return xy;
        };
        auto jac = point_map::fd_jacobian(transition, 1e-4);
        rng r(909);
        double worst_transition = 0.0;
        for (int s = 0; s < 40; ++s) {
            vec ft(2);
            ft[0] = r.uniform(chart.base_box.lo[0], chart.base_box.hi[0]);
            ft[1] = r.uniform(-chart.theta_half[0], chart.theta_half[0]);
            worst_transition =
                std::max(worst_transition, std::abs(jac(ft).determinant() - 1.0));
        }
        const bool ok =
            q.samples >= 120 && q.darboux <= 1e-6 && worst_transition <= 1e-6;
        pass = pass && ok;
        detail += "(1+q^2)dq^dp: " + metric("residual", q.darboux, 1e-6) + ", " +
                  metric("transition canonicity", worst_transition, 1e-6) + "; ";
    }

    {
        mat W = mat::Zero(4, 4);
        W(0, 2) = 1;
        W(2, 0) = -1;
        W(1, 3) = 1;
        W(3, 1) = -1;
        W(0, 1) = 0.1;
        W(1, 0) = -0.1;
        const mat S = oracles::symplectic_basis(W);
        const double oracle_defect =
            (S.transpose() * W * S - standard_block(2)).cwiseAbs().maxCoeff();

        auto res = darboux_chart(symplectic_structure::constant(W),
                                 chart_domain::box(2, -2, 2), vec::Zero(4));
        evaluation_options opt;
        opt.samples = 60;
        opt.with_delta = false;
        opt.with_linearity = false;
        auto q = evaluate_chart(res.chart, opt);
        // |DPhi^T W DPhi - J| is simultaneously the deviation of the
        // transition to the oracle chart z = S w from being canonical
        const bool ok = oracle_defect <= 1e-12 && q.samples >= 50 && q.darboux <= 1e-8;
        pass = pass && ok;
        detail += "eps-coupled 4d: " +
                  metric("oracle basis defect", oracle_defect, 1e-12) + ", " +
                  metric("residual", q.darboux, 1e-8);
    }
    verdict(9, "darboux charts vs analytic oracles", pass, detail);
}

void criterion_10_negative_controls() {
    auto bad = symplectic_structure::from_expressions(
        4, {{0, 2, expr::constant(1)}, {1, 3, expr::parse("1+q1", 4)}});
    const auto closed =
        check_closed(bad, grid_points(chart_domain::box(2, -1, 1), 3), 1e-8);
    const bool closed_ok = !closed.pass && std::abs(closed.max_residual - 1.0) <= 1e-10;

    integrable_system_spec cocycle_spec;
    cocycle_spec.chart = chart_domain::box(2, -2, 2);
    cocycle_spec.omega = symplectic_structure::standard(2);
    cocycle_spec.hamiltonians = {field_from_expression("q1", 4),
                                 field_from_expression("p1", 4)};
    const auto grid = grid_points(chart_domain::box(2, 0.2, 1.8), 3);
    const auto rep1 = commutation_report(cocycle_spec, grid);
    const bool cocycle_ok =
        !rep1.all_commute &&
        rep1.pairs[0].classification == bracket_statistics::verdict::constant_cocycle &&
        std::abs(rep1.cocycle(0, 1) - 1.0) <= 1e-10;

    integrable_system_spec nc_spec;
    nc_spec.chart = chart_domain::box(2, -2, 2);
    nc_spec.omega = symplectic_structure::standard(2);
    nc_spec.hamiltonians = {field_from_expression("q1", 4),
                            field_from_expression("q1*p1", 4)};
    const auto rep2 = commutation_report(nc_spec, grid);
    const bool nonconst_ok =
        rep2.pairs[0].classification == bracket_statistics::verdict::nonconstant;

    verdict(10, "negative controls (non-closed form, cocycle vs non-constant)",
            closed_ok && cocycle_ok && nonconst_ok,
            std::string("closedness residual 1: ") + (closed_ok ? "yes" : "NO") +
                ", cocycle detected: " + (cocycle_ok ? "yes" : "NO") +
                ", non-constant flagged: " + (nonconst_ok ? "yes" : "NO"));
}

void criterion_11_cli_determinism(const std::string& cli_path) {
    const fs::path dir = fs::temp_directory_path() / "liouville_acceptance_cli";
    fs::remove_all(dir);
    fs::create_directories(dir);

    auto spit = [](const fs::path& p, const std::string& text) {
        std::ofstream out(p, std::ios::binary);
        out << text;
    };
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    auto run = [&cli_path](const std::string& args) {
        const std::string cmd = cli_path + " " + args + " >/dev/null 2>&1";
        return WEXITSTATUS(std::system(cmd.c_str()));
    };

    spit(dir / "verify.ini", "[system]\nname = harmonic_oscillator\n[task]\ngrid = 5\n");
    spit(dir / "orbit.ini",
         "[system]\nname = uncoupled_oscillators\n[task]\nhorizon = 30\n");
    spit(dir / "linearize.ini",
         "[system]\nname = harmonic_oscillator\n[task]\nsamples = 30\nhorizon = 20\n");
    spit(dir / "darboux.ini",
         "[system]\nname = nonstandard_form_2d\n[task]\nsamples = 30\npoint = 0 0.5\n");

    bool identical = true;
    bool ran_ok = true;
    const char* commands[] = {"verify", "orbit", "linearize", "darboux"};
    for (const char* cmd : commands) {
        const std::string cfg = (dir / (std::string(cmd) + ".ini")).string();
        const int c1 = run(std::string(cmd) + " --config " + cfg + " --seed 5 --out " +
                           (dir / "a").string());
        const int c2 = run(std::string(cmd) + " --config " + cfg + " --seed 5 --out " +
                           (dir / "b").string());
        ran_ok = ran_ok && c1 == 0 && c2 == 0;
        const std::string name = std::string(cmd) + ".csv";
        const std::string a = slurp(dir / "a" / name);
        identical = identical && !a.empty() && a == slurp(dir / "b" / name);
    }
    const int r1 = run(std::string("report --config ") + (dir / "verify.ini").string() +
                       " --out " + (dir / "a").string());
    const int r2 = run(std::string("report --config ") + (dir / "verify.ini").string() +
                       " --out " + (dir / "b").string());
    ran_ok = ran_ok && r1 == 0 && r2 == 0;
    identical =
        identical && slurp(dir / "a" / "report.txt") == slurp(dir / "b" / "report.txt");

    spit(dir / "bad.ini",
         "[system]\nn = 1\nbox = -1 1 -1 1\n[omega]\nomega_12 = 1\n"
         "[hamiltonians]\nh1 = sin(\n");
    const int bad = run(std::string("verify --config ") + (dir / "bad.ini").string() +
                        " --out " + (dir / "c").string());
    const bool bad_ok = bad == 1;

    verdict(11, "CLI determinism and positioned config errors",
            ran_ok && identical && bad_ok,
            std::string("all commands exit 0: ") + (ran_ok ? "yes" : "NO") +
                ", byte-identical CSVs: " + (identical ? "yes" : "NO") +
                ", malformed config exit 1: " + (bad_ok ? "yes" : "NO"));
}

}  // namespace

int main(int argc, char** argv) {
    std::printf("acceptance suite (analytic oracles at desk scale)\n");
    criterion_1_bracket_convention();
    criterion_2_solver_oracle();
    criterion_3_conservation_commutation();
    criterion_4_orbit_topology();
    criterion_5_pendulum_period();
    criterion_6_homotopy_operator();
    criterion_7_linearization();
    criterion_8_skew_recovery();
    criterion_9_darboux();
    criterion_10_negative_controls();
    if (argc > 1) {
        criterion_11_cli_determinism(argv[1]);
    } else {
        verdict(11, "CLI determinism and positioned config errors", false,
                "CLI binary path not supplied (pass it as argv[1])");
    }
    if (g_failures == 0) {
        std::printf("acceptance: all criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d criterion(s) FAILED\n", g_failures);
    return 1;
}
