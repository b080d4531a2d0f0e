#pragma once

// Key-value configuration documents. Sections: [system] (catalog name or
// inline definition), [omega] (strictly-upper coefficient expressions),
// [hamiltonians] (h1..hn), [task] (point, tolerances, grid sizes, time
// horizons, seed), [output]. Diagnostics carry line and column.

#include <charconv>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "liouville/systems.hpp"

namespace liouville {

struct task_options {
    vec point;                       // empty: use the catalog reference point
    std::uint64_t seed = 42;
    int grid_per_axis = 5;           // verify grid
    double horizon = 50.0;           // orbit search time
    double tol_return = 1e-8;
    double tol_commute = 1e-8;
    double tol_closed = 1e-8;
    double nondegeneracy_floor = 1e-10;
    double tol_darboux = 1e-6;
    double tol_delta = 1e-6;
    double tol_linear = 1e-6;
    int samples = 200;               // chart residual samples
    double base_halfwidth = 0.0;     // 0: automatic
    double theta_halfwidth = 0.5;
    double working_halfwidth = 0.8;  // darboux validation box
};

struct inline_system {
    int n = 0;
    vec box_lo, box_hi;
    std::vector<double> periodic;                       // per axis, 0 = none
    std::vector<std::tuple<int, int, expr::ptr>> omega_entries;  // i < j
    std::vector<expr::ptr> hamiltonians;
};

struct config_document {
    std::string system_name;                  // catalog id, or empty
    std::optional<inline_system> inline_sys;  // set when defined inline
    task_options task;
    std::string output_dir = "out";

    /// Materializes the spec (catalog lookup or inline assembly) and the
    /// point the tasks operate at.
    std::pair<std::shared_ptr<const integrable_system_spec>, vec> realize() const {
        if (!system_name.empty()) {
            const auto& sys = lookup(system_name);
            vec p = task.point.size() ? task.point : sys.reference_point;
            return {sys.spec, p};
        }
        const auto& in = *inline_sys;
        integrable_system_spec s;
        s.chart.lo = in.box_lo;
        s.chart.hi = in.box_hi;
        s.chart.period =
            in.periodic.empty() ? std::vector<double>(2 * in.n, 0.0) : in.periodic;
        s.omega = symplectic_structure::from_expressions(2 * in.n, in.omega_entries);
        for (const auto& h : in.hamiltonians)
            s.hamiltonians.push_back(field_from_expression(h, 2 * in.n));
        vec p = task.point;
        if (!p.size()) p = 0.5 * (in.box_lo + in.box_hi);
        return {std::make_shared<const integrable_system_spec>(std::move(s)), p};
    }

    /// Canonical text form; parsing it back yields an equivalent document.
    std::string serialize() const;
};

namespace detail_config {

struct raw_entry {
    std::string value;
    int line = 0;
    int column = 0;  // of the value
};

using section_map = std::map<std::string, std::map<std::string, raw_entry>>;

inline section_map read_sections(const std::string& text) {
    section_map sections;
    std::string current;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string line = text.substr(pos, eol == std::string::npos ? std::string::npos
                                                                     : eol - pos);
        ++line_no;
        const std::size_t cut = line.find_first_of("#;");
        if (cut != std::string::npos) line = line.substr(0, cut);
        std::size_t b = line.find_first_not_of(" \t\r");
        if (b != std::string::npos) {
            if (line[b] == '[') {
                const std::size_t close = line.find(']', b);
                if (close == std::string::npos)
                    throw parse_error("unterminated section header", line_no,
                                      static_cast<int>(b) + 1);
                current = line.substr(b + 1, close - b - 1);
            } else {
                const std::size_t eq = line.find('=', b);
                if (eq == std::string::npos)
                    throw parse_error("expected 'key = value'", line_no,
                                      static_cast<int>(b) + 1);
                std::string key = line.substr(b, eq - b);
                key.erase(key.find_last_not_of(" \t") + 1);
                if (current.empty())
                    throw parse_error("entry before any [section]", line_no,
                                      static_cast<int>(b) + 1);
                std::size_t vb = line.find_first_not_of(" \t", eq + 1);
                if (vb == std::string::npos) vb = eq + 1;
                std::string value = line.substr(vb);
                value.erase(value.find_last_not_of(" \t\r") + 1);
                sections[current][key] =
                    raw_entry{value, line_no, static_cast<int>(vb) + 1};
            }
        }
        if (eol == std::string::npos) break;
        pos = eol + 1;
    }
    return sections;
}

inline std::vector<double> parse_numbers(const raw_entry& e) {
    std::vector<double> out;
    const char* cur = e.value.data();
    const char* end = cur + e.value.size();
    while (cur < end) {
        while (cur < end && (*cur == ' ' || *cur == '\t' || *cur == ',')) ++cur;
        if (cur >= end) break;
        double v = 0;
        auto [next, ec] = std::from_chars(cur, end, v);
        if (ec != std::errc())
            throw parse_error("malformed number in list", e.line,
                              e.column + static_cast<int>(cur - e.value.data()));
        out.push_back(v);
        cur = next;
    }
    return out;
}

inline double parse_one_number(const raw_entry& e) {
    const auto list = parse_numbers(e);
    if (list.size() != 1)
        throw parse_error("expected a single number", e.line, e.column);
    return list[0];
}

inline expr::ptr parse_expression(const raw_entry& e, int dim) {
    std::string text = e.value;
    if (text.size() >= 2 && text.front() == '"' && text.back() == '"')
        text = text.substr(1, text.size() - 2);
    try {
        return expr::parse(text, dim);
    } catch (const parse_error& pe) {
        throw parse_error(pe.what(), e.line, e.column + pe.column - 1);
    }
}

}  // namespace detail_config

inline config_document parse_config(const std::string& text) {
    using namespace detail_config;
    auto sections = read_sections(text);
    config_document doc;

    auto sys_it = sections.find("system");
    if (sys_it == sections.end())
        throw validation_error("config: missing [system] section");
    auto& sys = sys_it->second;

    if (sys.count("name")) {
        doc.system_name = sys.at("name").value;
        if (sections.count("omega") || sections.count("hamiltonians"))
            throw validation_error(
                "config: a named system does not take [omega]/[hamiltonians]");
        lookup(doc.system_name);  // unknown ids fail here
    } else {
        inline_system in;
        if (!sys.count("n"))
            throw validation_error("config: inline [system] needs n = <dof count>");
        in.n = static_cast<int>(parse_one_number(sys.at("n")));
        if (in.n < 1) throw validation_error("config: n must be positive");
        const int dim = 2 * in.n;
        if (!sys.count("box"))
            throw validation_error("config: inline [system] needs box = lo hi ... per axis");
        const auto nums = parse_numbers(sys.at("box"));
        if (static_cast<int>(nums.size()) != 2 * dim)
            throw validation_error("config: box needs " + std::to_string(2 * dim) +
                                   " numbers (lo hi per axis), got " +
                                   std::to_string(nums.size()));
        in.box_lo.resize(dim);
        in.box_hi.resize(dim);
        for (int i = 0; i < dim; ++i) {
            in.box_lo[i] = nums[2 * i];
            in.box_hi[i] = nums[2 * i + 1];
            if (!(in.box_lo[i] < in.box_hi[i]))
                throw validation_error("config: box axis " + std::to_string(i + 1) +
                                       " has lo >= hi");
        }
        if (sys.count("periodic")) {
            in.periodic = parse_numbers(sys.at("periodic"));
            if (static_cast<int>(in.periodic.size()) != dim)
                throw validation_error("config: periodic needs one entry per axis");
        }

        if (!sections.count("omega"))
            throw validation_error("config: inline system needs an [omega] section");
        for (const auto& [key, entry] : sections.at("omega")) {
            int i = 0, j = 0;
            if (std::sscanf(key.c_str(), "omega_%d_%d", &i, &j) != 2) {
                if (std::sscanf(key.c_str(), "omega_%1d%1d", &i, &j) != 2)
                    throw parse_error("omega keys look like omega_12 or omega_1_2",
                                      entry.line, 1);
            }
            if (i < 1 || j < 1 || i >= j || j > dim)
                throw validation_error("config: omega_" + std::to_string(i) +
                                       std::to_string(j) + " is not strictly upper");
            in.omega_entries.emplace_back(i - 1, j - 1, parse_expression(entry, dim));
        }

        if (!sections.count("hamiltonians"))
            throw validation_error("config: inline system needs [hamiltonians]");
        in.hamiltonians.resize(in.n);
        int found = 0;
        for (const auto& [key, entry] : sections.at("hamiltonians")) {
            int k = 0;
            if (std::sscanf(key.c_str(), "h%d", &k) != 1 || k < 1 || k > in.n)
                throw validation_error("config: hamiltonian keys are h1..h" +
                                       std::to_string(in.n));
            in.hamiltonians[k - 1] = parse_expression(entry, dim);
            ++found;
        }
        if (found != in.n)
            throw validation_error("config: expected " + std::to_string(in.n) +
                                   " hamiltonians, found " + std::to_string(found));
        doc.inline_sys = std::move(in);
    }

    if (sections.count("task")) {
        auto& task = sections.at("task");
        auto num = [&](const char* key, double& slot) {
            if (task.count(key)) slot = parse_one_number(task.at(key));
        };
        if (task.count("point")) {
            const auto nums = parse_numbers(task.at("point"));
            doc.task.point.resize(static_cast<int>(nums.size()));
            for (std::size_t i = 0; i < nums.size(); ++i) doc.task.point[i] = nums[i];
        }
        if (task.count("seed"))
            doc.task.seed =
                static_cast<std::uint64_t>(parse_one_number(task.at("seed")));
        if (task.count("grid"))
            doc.task.grid_per_axis = static_cast<int>(parse_one_number(task.at("grid")));
        if (task.count("samples"))
            doc.task.samples = static_cast<int>(parse_one_number(task.at("samples")));
        num("horizon", doc.task.horizon);
        num("tol_return", doc.task.tol_return);
        num("tol_commute", doc.task.tol_commute);
        num("tol_closed", doc.task.tol_closed);
        num("nondegeneracy_floor", doc.task.nondegeneracy_floor);
        num("tol_darboux", doc.task.tol_darboux);
        num("tol_delta", doc.task.tol_delta);
        num("tol_linear", doc.task.tol_linear);
        num("base_halfwidth", doc.task.base_halfwidth);
        num("theta_halfwidth", doc.task.theta_halfwidth);
        num("working_halfwidth", doc.task.working_halfwidth);
    }
    if (sections.count("output") && sections.at("output").count("dir"))
        doc.output_dir = sections.at("output").at("dir").value;

    // dimension consistency across sections
    const int dim = doc.system_name.empty() ? 2 * doc.inline_sys->n
                                            : lookup(doc.system_name).spec->dim();
    if (doc.task.point.size() && static_cast<int>(doc.task.point.size()) != dim)
        throw validation_error("config: point needs " + std::to_string(dim) +
                               " coordinates");
    return doc;
}

inline std::string config_document::serialize() const {
    std::string out;
    out += "[system]\n";
    if (!system_name.empty()) {
        out += "name = " + system_name + "\n";
    } else {
        const auto& in = *inline_sys;
        const int dim = 2 * in.n;
        out += "n = " + std::to_string(in.n) + "\n";
        out += "box =";
        for (int i = 0; i < dim; ++i)
            out += " " + expr::format_double(in.box_lo[i]) + " " +
                   expr::format_double(in.box_hi[i]);
        out += "\n";
        if (!in.periodic.empty()) {
            out += "periodic =";
            for (double p : in.periodic) out += " " + expr::format_double(p);
            out += "\n";
        }
        out += "\n[omega]\n";
        for (const auto& [i, j, e] : in.omega_entries)
            out += "omega_" + std::to_string(i + 1) + "_" + std::to_string(j + 1) +
                   " = " + expr::to_string(e, dim) + "\n";
        out += "\n[hamiltonians]\n";
        for (std::size_t k = 0; k < in.hamiltonians.size(); ++k)
            out += "h" + std::to_string(k + 1) + " = " +
                   expr::to_string(in.hamiltonians[k], dim) + "\n";
    }
    out += "\n[task]\n";
    if (task.point.size()) {
        out += "point =";
        for (int i = 0; i < task.point.size(); ++i)
            out += " " + expr::format_double(task.point[i]);
        out += "\n";
    }
    out += "seed = " + std::to_string(task.seed) + "\n";
    out += "grid = " + std::to_string(task.grid_per_axis) + "\n";
    out += "samples = " + std::to_string(task.samples) + "\n";
    out += "horizon = " + expr::format_double(task.horizon) + "\n";
    out += "tol_return = " + expr::format_double(task.tol_return) + "\n";
    out += "tol_commute = " + expr::format_double(task.tol_commute) + "\n";
    out += "tol_closed = " + expr::format_double(task.tol_closed) + "\n";
    out += "nondegeneracy_floor = " + expr::format_double(task.nondegeneracy_floor) + "\n";
    out += "tol_darboux = " + expr::format_double(task.tol_darboux) + "\n";
    out += "tol_delta = " + expr::format_double(task.tol_delta) + "\n";
    out += "tol_linear = " + expr::format_double(task.tol_linear) + "\n";
    out += "base_halfwidth = " + expr::format_double(task.base_halfwidth) + "\n";
    out += "theta_halfwidth = " + expr::format_double(task.theta_halfwidth) + "\n";
    out += "working_halfwidth = " + expr::format_double(task.working_halfwidth) + "\n";
    out += "\n[output]\ndir = " + output_dir + "\n";
    return out;
}

}  // namespace liouville
