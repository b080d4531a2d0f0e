#pragma once

// Command layer: verify | orbit | linearize | darboux | report. Each command
// reads one config, writes a plain-text report and machine CSVs into the
// output directory, and exits 0 (all residuals under tolerance), 2
// (violations; artifacts still written), or 1 (errors). Identical config and
// seed produce byte-identical CSVs: doubles are printed as shortest
// round-trip literals and every random draw goes through the seeded
// generator.
//
// CSV schemas (fixed):
//   verify.csv     check,z1..z_dim,value,threshold,pass
//   orbit.csv      generator_index,t_1..t_n,return_residual
//   linearize.csv  z1..z_dim,residual_kind,value
//   darboux.csv    z1..z_dim,residual_kind,value

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "liouville/config.hpp"
#include "liouville/darboux.hpp"

namespace liouville::cli {

namespace fs = std::filesystem;

inline std::string fmt(double v) { return expr::format_double(v); }

class csv_file {
  public:
    explicit csv_file(const fs::path& path) : path_(path) {}

    void header(const std::vector<std::string>& cols) { row(cols); }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) body_ += ',';
            body_ += cells[i];
        }
        body_ += '\n';
    }

    void write() const {
        std::ofstream out(path_, std::ios::binary);
        out << body_;
    }

  private:
    fs::path path_;
    std::string body_;
};

inline std::vector<std::string> point_columns(int dim) {
    std::vector<std::string> cols;
    for (int i = 0; i < dim; ++i) cols.push_back("z" + std::to_string(i + 1));
    return cols;
}

inline void append_point(std::vector<std::string>& cells, const vec& z, int dim) {
    for (int i = 0; i < dim; ++i)
        cells.push_back(i < z.size() ? fmt(z[i]) : std::string("nan"));
}

inline foliation_params make_foliation_params(const task_options& t) {
    foliation_params p;
    p.flow.tol_commute = t.tol_commute;
    p.flow.geom.nondegeneracy_floor = t.nondegeneracy_floor;
    p.base_halfwidth = t.base_halfwidth;
    p.theta_halfwidth = t.theta_halfwidth;
    return p;
}

// ---------------------------------------------------------------------------
// commands

inline int cmd_verify(const config_document& cfg, const fs::path& out_dir,
                      std::ostream& log) {
    auto [spec, point] = cfg.realize();
    const int dim = spec->dim();
    auto omega = spec->omega;
    if (!omega.coeff_deriv) omega.use_fd_derivatives();
    const auto grid = grid_points(spec->chart, cfg.task.grid_per_axis);

    const auto closed = check_closed(omega, grid, cfg.task.tol_closed);
    const auto nondeg =
        check_nondegenerate(omega, grid, cfg.task.nondegeneracy_floor);
    flow_params fp;
    fp.tol_commute = cfg.task.tol_commute;
    const auto comm = commutation_report(*spec, grid, fp);

    csv_file csv(out_dir / "verify.csv");
    std::vector<std::string> cols{"check"};
    for (auto& c : point_columns(dim)) cols.push_back(c);
    cols.insert(cols.end(), {"value", "threshold", "pass"});
    csv.header(cols);

    auto emit = [&](const std::string& check, const vec& at, double value,
                    double threshold, bool pass) {
        std::vector<std::string> cells{check};
        append_point(cells, at, dim);
        cells.push_back(fmt(value));
        cells.push_back(fmt(threshold));
        cells.push_back(pass ? "true" : "false");
        csv.row(cells);
    };
    emit("closed", closed.worst_point, closed.max_residual, cfg.task.tol_closed,
         closed.pass);
    emit("nondegenerate", nondeg.worst_point, nondeg.min_abs_det,
         cfg.task.nondegeneracy_floor, nondeg.pass);
    for (const auto& st : comm.pairs) {
        const std::string tag =
            std::to_string(st.j + 1) + "_" + std::to_string(st.k + 1);
        emit("commute_" + tag, st.worst_point, st.max_abs, cfg.task.tol_commute,
             st.classification == bracket_statistics::verdict::commuting);
        if (st.classification == bracket_statistics::verdict::constant_cocycle)
            emit("cocycle_" + tag, st.worst_point, st.mean, cfg.task.tol_commute,
                 false);
    }
    csv.write();

    std::ofstream txt(out_dir / "verify.txt", std::ios::binary);
    txt << "verify: closedness residual " << fmt(closed.max_residual) << " (tol "
        << fmt(cfg.task.tol_closed) << ", " << (closed.pass ? "pass" : "FAIL")
        << ")\n";
    txt << "verify: min |det| " << fmt(nondeg.min_abs_det) << " (floor "
        << fmt(cfg.task.nondegeneracy_floor) << ", "
        << (nondeg.pass ? "pass" : "FAIL") << ")\n";
    for (const auto& st : comm.pairs) {
        txt << "verify: {f" << st.j + 1 << ",f" << st.k + 1 << "} max "
            << fmt(st.max_abs) << " mean " << fmt(st.mean) << " variance "
            << fmt(st.variance) << " -> ";
        switch (st.classification) {
            case bracket_statistics::verdict::commuting: txt << "commuting\n"; break;
            case bracket_statistics::verdict::constant_cocycle:
                txt << "constant 2-cocycle c=" << fmt(st.mean) << "\n";
                break;
            case bracket_statistics::verdict::nonconstant:
                txt << "NON-CONSTANT bracket (not an integrable family)\n";
                break;
        }
    }
    const bool pass = closed.pass && nondeg.pass && comm.all_commute;
    log << "verify: " << (pass ? "pass" : "residual violations") << "\n";
    return pass ? 0 : 2;
}

inline int cmd_orbit(const config_document& cfg, const fs::path& out_dir,
                     std::ostream& log) {
    auto [spec, point] = cfg.realize();
    const int n = spec->n();
    flow_params fp;
    fp.tol_commute = cfg.task.tol_commute;
    const auto topo =
        detect_period_lattice(*spec, point, fp, cfg.task.horizon, cfg.task.tol_return);

    csv_file csv(out_dir / "orbit.csv");
    std::vector<std::string> cols{"generator_index"};
    for (int i = 0; i < n; ++i) cols.push_back("t_" + std::to_string(i + 1));
    cols.push_back("return_residual");
    csv.header(cols);
    for (std::size_t g = 0; g < topo.lattice_basis.size(); ++g) {
        std::vector<std::string> cells{std::to_string(g + 1)};
        for (int i = 0; i < n; ++i) cells.push_back(fmt(topo.lattice_basis[g][i]));
        cells.push_back(fmt(topo.return_residuals[g]));
        csv.row(cells);
    }
    csv.write();

    std::ofstream txt(out_dir / "orbit.txt", std::ios::binary);
    txt << "orbit: torus rank m = " << topo.m << " (orbit topology R^{" << n - topo.m
        << "} x T^" << topo.m << ")\n";
    txt << "orbit: regular point: " << (topo.regular ? "yes" : "no") << "\n";
    for (std::size_t g = 0; g < topo.lattice_basis.size(); ++g) {
        txt << "orbit: generator " << g + 1 << " = (";
        for (int i = 0; i < n; ++i)
            txt << (i ? ", " : "") << fmt(topo.lattice_basis[g][i]);
        txt << "), return residual " << fmt(topo.return_residuals[g]) << "\n";
    }
    for (const auto& note : topo.notes) txt << "orbit: note: " << note << "\n";
    log << "orbit: m = " << topo.m << "\n";
    return 0;
}

inline int emit_chart_rows(const canonical_chart& chart, const task_options& task,
                           const orbit_topology* lattice, const fs::path& csv_path,
                           chart_quality& q) {
    std::vector<sample_record> rows;
    evaluation_options opt;
    opt.samples = task.samples;
    opt.seed = task.seed;
    opt.lattice = lattice;
    opt.rows = &rows;
    q = evaluate_chart(chart, opt);

    const int dim = chart.system->dim();
    csv_file csv(csv_path);
    std::vector<std::string> cols = point_columns(dim);
    cols.push_back("residual_kind");
    cols.push_back("value");
    csv.header(cols);
    for (const auto& rec : rows) {
        std::vector<std::string> cells;
        append_point(cells, rec.z, dim);
        cells.push_back(rec.kind);
        cells.push_back(fmt(rec.value));
        csv.row(cells);
    }
    csv.write();

    const bool pass = q.darboux <= task.tol_darboux && q.delta <= task.tol_delta &&
                      q.linearity <= task.tol_linear;
    return pass ? 0 : 2;
}

inline void chart_report(std::ostream& txt, const char* cmd,
                         const canonical_chart& chart, const chart_quality& q,
                         const task_options& task) {
    txt << cmd << ": base box";
    for (int i = 0; i < chart.base_box.lo.size(); ++i)
        txt << " [" << fmt(chart.base_box.lo[i]) << ", " << fmt(chart.base_box.hi[i])
            << "]";
    txt << "\n" << cmd << ": theta halfwidth " << fmt(chart.theta_half[0]) << "\n";
    txt << cmd << ": lagrangian obstruction (corrected) "
        << fmt(chart.lagrangian_obstruction) << "\n";
    txt << cmd << ": darboux residual " << fmt(q.darboux) << " (tol "
        << fmt(task.tol_darboux) << ")\n";
    txt << cmd << ": delta residual " << fmt(q.delta) << " (tol "
        << fmt(task.tol_delta) << ")\n";
    txt << cmd << ": linearity residual " << fmt(q.linearity) << " (tol "
        << fmt(task.tol_linear) << ")\n";
    txt << cmd << ": conservation drift " << fmt(q.conservation) << "\n";
    txt << cmd << ": samples " << q.samples << " (skipped " << q.skipped << ")\n";
}

inline int cmd_linearize(const config_document& cfg, const fs::path& out_dir,
                         std::ostream& log) {
    auto [spec, point] = cfg.realize();
    auto chart = canonical_coordinates(spec, point, make_foliation_params(cfg.task));
    flow_params fp;
    const auto topo =
        detect_period_lattice(*spec, point, fp, cfg.task.horizon, cfg.task.tol_return);

    chart_quality q;
    const int code =
        emit_chart_rows(chart, cfg.task, &topo, out_dir / "linearize.csv", q);
    std::ofstream txt(out_dir / "linearize.txt", std::ios::binary);
    txt << "linearize: torus rank m = " << topo.m << "\n";
    chart_report(txt, "linearize", chart, q, cfg.task);
    log << "linearize: darboux " << fmt(q.darboux) << ", delta " << fmt(q.delta)
        << ", linearity " << fmt(q.linearity) << "\n";
    return code;
}

inline int cmd_darboux(const config_document& cfg, const fs::path& out_dir,
                       std::ostream& log) {
    auto [spec, point] = cfg.realize();
    darboux_params dp;
    dp.foliation = make_foliation_params(cfg.task);
    dp.working_halfwidth = cfg.task.working_halfwidth;
    auto res = darboux_chart(spec->omega, spec->chart, point, dp);

    chart_quality q;
    const int code =
        emit_chart_rows(res.chart, cfg.task, nullptr, out_dir / "darboux.csv", q);
    std::ofstream txt(out_dir / "darboux.txt", std::ios::binary);
    txt << "darboux: closedness residual " << fmt(res.closedness.max_residual)
        << ", min |det| " << fmt(res.nondegeneracy.min_abs_det) << "\n";
    txt << "darboux: family of " << res.family.members.size()
        << " commuting hamiltonians, bracket residual "
        << fmt(res.family.bracket_residual) << ", rank sigma "
        << fmt(res.family.rank_sigma) << "\n";
    for (const auto& note : res.family.notes) txt << "darboux: " << note << "\n";
    chart_report(txt, "darboux", res.chart, q, cfg.task);
    log << "darboux: residual " << fmt(q.darboux) << "\n";
    return code;
}

inline int cmd_report(const config_document& cfg, const fs::path& out_dir,
                      std::ostream& log) {
    std::ofstream txt(out_dir / "report.txt", std::ios::binary);
    bool any = false;
    bool all_pass = true;
    for (const char* name : {"verify", "orbit", "linearize", "darboux"}) {
        const fs::path csv = out_dir / (std::string(name) + ".csv");
        if (!fs::exists(csv)) continue;
        any = true;
        std::ifstream in(csv);
        std::string line;
        std::getline(in, line);  // header
        std::vector<std::string> header;
        {
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) header.push_back(cell);
        }
        const bool has_pass = !header.empty() && header.back() == "pass";
        long rows = 0, failures = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            ++rows;
            if (has_pass && line.size() >= 5 &&
                line.compare(line.size() - 5, 5, "false") == 0)
                ++failures;
        }
        txt << "report: " << name << ".csv: " << rows << " rows";
        if (has_pass) {
            txt << ", " << failures << " failing";
            all_pass = all_pass && failures == 0;
        }
        txt << "\n";
        const fs::path sub = out_dir / (std::string(name) + ".txt");
        if (fs::exists(sub)) {
            std::ifstream subin(sub);
            std::string subline;
            while (std::getline(subin, subline)) txt << "  " << subline << "\n";
        }
    }
    if (!any) txt << "report: no artifacts found in " << out_dir.string() << "\n";
    log << "report: bundled into " << (out_dir / "report.txt").string() << "\n";
    return all_pass ? 0 : 2;
}

// ---------------------------------------------------------------------------

/// Runs one command against a config file. Returns the process exit code;
/// parse and validation problems surface as exceptions for the caller to
/// format (exit 1).
inline int run(const std::string& command, const std::string& config_path,
               const std::string& out_override, std::optional<std::uint64_t> seed,
               std::ostream& log) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in)
        throw validation_error("cannot open config file '" + config_path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    config_document cfg = parse_config(buffer.str());
    if (seed) cfg.task.seed = *seed;

    const fs::path out_dir = out_override.empty() ? fs::path(cfg.output_dir)
                                                  : fs::path(out_override);
    fs::create_directories(out_dir);

    if (command == "verify") return cmd_verify(cfg, out_dir, log);
    if (command == "orbit") return cmd_orbit(cfg, out_dir, log);
    if (command == "linearize") return cmd_linearize(cfg, out_dir, log);
    if (command == "darboux") return cmd_darboux(cfg, out_dir, log);
    if (command == "report") return cmd_report(cfg, out_dir, log);
    throw validation_error("unknown command '" + command + "'");
}

}  // namespace liouville::cli
