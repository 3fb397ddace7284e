#include "bubblemesh/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "bubblemesh/errors.hpp"
#include "bubblemesh/fem.hpp"
#include "bubblemesh/mesh_io.hpp"

namespace bubblemesh {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',' || c == ' ' || c == '\t' || c == '{' || c == '}') {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

double to_double(std::string_view key, std::string_view v) {
    const std::string s(v);
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) throw ConfigError(fmt::format("'{}': expected a number, got '{}'", key, v));
    return out;
}

long long to_int(std::string_view key, std::string_view v) {
    const double d = to_double(key, v);
    if (d != std::floor(d)) throw ConfigError(fmt::format("'{}': expected an integer, got '{}'", key, v));
    return static_cast<long long>(d);
}

bool to_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(fmt::format("'{}': expected true or false, got '{}'", key, v));
}

std::string level_tag(const std::string& domain, double h) { return fmt::format("{}_h{:g}", domain, h); }

std::string num(double v) { return std::isfinite(v) ? fmt::format("{:.15g}", v) : (std::isnan(v) ? "" : "inf"); }

/// One table.csv row, shared by the in-memory report and the re-read CSV.
struct TableRow {
    std::string domain;
    double h = 0.0;
    double n_nodes = 0.0;
    double n_tris = 0.0;
    double dofs_p1 = 0.0;
    double dofs_p2 = 0.0;
    double q_avg = 0.0;
    double h_err = 0.0;
    double max_edge_err = 0.0;
    double alpha_hat = 0.0;
    double err_super_p1 = kNaN;
    double order_p1 = kNaN;
    double err_super_p2 = kNaN;
    double order_p2 = kNaN;
    double err_h1_p1 = kNaN;
    double err_h1_p2 = kNaN;
};

constexpr std::string_view kTableHeader =
    "domain,h,N_nodes,N_tris,N_dofs_p1,N_dofs_p2,q_avg,h_err,max_edge_err,alpha_hat,"
    "err_super_p1,order_p1,err_super_p2,order_p2,err_h1_p1,err_h1_p2";

std::vector<TableRow> table_rows(const ExperimentReport& report) {
    std::vector<TableRow> out;
    for (const auto& r : report.rows) {
        TableRow t;
        t.domain = report.config.domain;
        t.h = r.h;
        t.n_nodes = static_cast<double>(r.mesh.node_count());
        t.n_tris = static_cast<double>(r.mesh.tri_count());
        t.dofs_p1 = static_cast<double>(r.n_dofs_p1);
        t.dofs_p2 = static_cast<double>(r.n_dofs_p2);
        t.q_avg = r.report.q_avg;
        t.h_err = r.report.h_err;
        t.max_edge_err = r.report.max_edge_err;
        t.alpha_hat = report.alpha_hat;
        t.err_super_p1 = r.err_super_p1;
        t.order_p1 = r.order_p1;
        t.err_super_p2 = r.err_super_p2;
        t.order_p2 = r.order_p2;
        t.err_h1_p1 = r.err_h1_p1;
        t.err_h1_p2 = r.err_h1_p2;
        out.push_back(t);
    }
    return out;
}

std::optional<double> slope_vs_dofs(const std::vector<TableRow>& rows, bool p2) {
    std::vector<double> n;
    std::vector<double> e;
    for (const auto& r : rows) {
        const double err = p2 ? r.err_super_p2 : r.err_super_p1;
        const double dofs = p2 ? r.dofs_p2 : r.dofs_p1;
        if (std::isfinite(err) && err > 0.0 && dofs > 0.0) {
            n.push_back(dofs);
            e.push_back(err);
        }
    }
    if (n.size() < 2) return std::nullopt;
    return loglog_slope(n, e);
}

struct Check {
    std::string name;
    bool pass;
    std::string detail;
};

std::string join(const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += (s.empty() ? "" : " ") + fmt::format("{:.3f}", x);
    return s;
}

std::vector<double> finite_values(const std::vector<TableRow>& rows, double TableRow::*field) {
    std::vector<double> out;
    for (const auto& r : rows)
        if (std::isfinite(r.*field)) out.push_back(r.*field);
    return out;
}

bool all_in(const std::vector<double>& v, double lo, double hi) {
    if (v.empty()) return false;
    for (double x : v)
        if (!(x >= lo && x <= hi)) return false;
    return true;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? kNaN : s / static_cast<double>(v.size());
}

/// Thresholds of the reference study for each benchmark domain.
std::vector<Check> threshold_checks(const std::vector<TableRow>& rows) {
    std::vector<Check> out;
    if (rows.empty()) return out;
    const std::string& d = rows.front().domain;
    const auto o1 = finite_values(rows, &TableRow::order_p1);
    const auto o2 = finite_values(rows, &TableRow::order_p2);
    auto q_ok = [&](double min_q, double max_h) {
        bool ok = true;
        for (const auto& r : rows)
            if (r.h <= max_h + 1e-12 && !(r.q_avg >= min_q)) ok = false;
        return ok;
    };
    if (d == "equilateral_triangle") {
        out.push_back({"P1 orders in [1.9, 2.2]", all_in(o1, 1.9, 2.2), join(o1)});
        out.push_back({"P2 orders in [2.8, 3.2]", all_in(o2, 2.8, 3.2), join(o2)});
        out.push_back({"Q_avg >= 0.999 for h <= 0.1", q_ok(0.999, 0.1), ""});
    } else if (d == "unit_circle") {
        out.push_back({"P1 orders in [1.25, 1.75]", all_in(o1, 1.25, 1.75), join(o1)});
        out.push_back({"P2 orders in [2.2, 2.8]", all_in(o2, 2.2, 2.8), join(o2)});
        out.push_back({"Q_avg >= 0.95", q_ok(0.95, 1e300), ""});
    } else if (d == "regular_pentagon") {
        const double m1 = mean_of(o1);
        const double m2 = mean_of(o2);
        out.push_back({"mean P1 order in [1.3, 1.8]", m1 >= 1.3 && m1 <= 1.8, fmt::format("{:.3f}", m1)});
        out.push_back({"mean P2 order in [2.25, 2.8]", m2 >= 2.25 && m2 <= 2.8, fmt::format("{:.3f}", m2)});
        out.push_back({"Q_avg >= 0.95", q_ok(0.95, 1e300), ""});
    } else if (d == "l_shape") {
        const auto s1 = slope_vs_dofs(rows, false);
        const auto s2 = slope_vs_dofs(rows, true);
        const bool enough = rows.size() >= 4;
        out.push_back({"P1 supercloseness slope vs N < -0.5", enough && s1 && *s1 < -0.5,
                       s1 ? fmt::format("{:.3f}", *s1) : "absent"});
        out.push_back({"P2 supercloseness slope vs N < -1.0", enough && s2 && *s2 < -1.0,
                       s2 ? fmt::format("{:.3f}", *s2) : "absent"});
    }
    return out;
}

std::string render_summary(const std::vector<TableRow>& rows) {
    std::string s;
    if (rows.empty()) return "no rows\n";
    s += fmt::format("domain: {}\nlevels: {}\n", rows.front().domain, rows.size());
    s += fmt::format("{:>8} {:>8} {:>8} {:>8} {:>12} {:>7} {:>12} {:>7} {:>12}\n", "h", "nodes", "q_avg", "h_err",
                     "super_p1", "order", "super_p2", "order", "h1_p1");
    for (const auto& r : rows)
        s += fmt::format("{:>8g} {:>8g} {:>8.4f} {:>8.2e} {:>12.4e} {:>7.3f} {:>12.4e} {:>7.3f} {:>12.4e}\n", r.h,
                         r.n_nodes, r.q_avg, r.h_err, r.err_super_p1, r.order_p1, r.err_super_p2, r.order_p2,
                         r.err_h1_p1);
    s += fmt::format("alpha_hat: {}\n", num(rows.front().alpha_hat));
    if (rows.front().domain == "l_shape") {
        const auto s1 = slope_vs_dofs(rows, false);
        const auto s2 = slope_vs_dofs(rows, true);
        s += fmt::format("slope_p1 vs N: {} (reference -0.5)\n", s1 ? fmt::format("{:.4f}", *s1) : "absent");
        s += fmt::format("slope_p2 vs N: {} (reference -1.0)\n", s2 ? fmt::format("{:.4f}", *s2) : "absent");
    }
    const auto checks = threshold_checks(rows);
    for (const auto& c : checks)
        s += fmt::format("{} {}{}\n", c.pass ? "PASS" : "FAIL", c.name, c.detail.empty() ? "" : " (" + c.detail + ")");
    if (checks.empty()) s += "no acceptance thresholds for this domain\n";
    return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
    out << text;
    if (!out) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

} // namespace

void ExperimentConfig::validate() const {
    const DomainPreset preset = parse_domain_preset(domain);
    if (sizes.empty()) throw ConfigError("sizes must not be empty");
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (!(sizes[i] > 0.0)) throw ConfigError("sizes must be positive");
        if (i > 0 && !(sizes[i] < sizes[i - 1])) throw ConfigError("sizes must be strictly decreasing");
    }
    for (int d : degrees)
        if (d != 1 && d != 2) throw ConfigError(fmt::format("unsupported degree {}", d));
    for (int q : {load_degree_p1, load_degree_p2})
        if (q != 0 && q != 1 && q != 2 && q != 4 && q != 6)
            throw ConfigError(fmt::format("load quadrature degree must be 0, 1, 2, 4 or 6, got {}", q));
    if (fem) {
        const Benchmark b = benchmark.empty() ? benchmark_for_domain(preset) : parse_benchmark(benchmark);
        const BenchmarkProblem p = benchmark_problem(b);
        if (p.domain != domain)
            throw ConfigError(fmt::format("benchmark '{}' belongs to domain '{}', not '{}'", p.name, p.domain, domain));
    }
    if (bpm.max_inner_steps < 1) throw ConfigError("max_inner_steps must be at least 1");
    if (bpm.max_rounds < 0) throw ConfigError("max_rounds must be non-negative");
    if (!(bpm.tol_force > 0.0)) throw ConfigError("tol_force must be positive");
    (void)level_size_field(*this, sizes.front());
}

void apply_setting(ExperimentConfig& cfg, std::string_view key_in, std::string_view value_in) {
    const std::string key = trim(key_in);
    const std::string v = trim(value_in);
    auto& p = cfg.bpm;
    if (key == "domain") cfg.domain = v;
    else if (key == "benchmark") cfg.benchmark = v;
    else if (key == "sizes") {
        cfg.sizes.clear();
        for (const auto& t : split_list(v)) cfg.sizes.push_back(to_double(key, t));
    } else if (key == "degrees") {
        cfg.degrees.clear();
        for (const auto& t : split_list(v)) cfg.degrees.push_back(static_cast<int>(to_int(key, t)));
    } else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_int(key, v));
    else if (key == "output_dir") cfg.output_dir = v;
    else if (key == "size") cfg.size = v;
    else if (key == "fem") cfg.fem = to_bool(key, v);
    else if (key == "load_degree_p1") cfg.load_degree_p1 = static_cast<int>(to_int(key, v));
    else if (key == "load_degree_p2") cfg.load_degree_p2 = static_cast<int>(to_int(key, v));
    else if (key == "snapshot_every") cfg.snapshot_every = static_cast<int>(to_int(key, v));
    else if (key == "k0") p.k0 = to_double(key, v);
    else if (key == "c_damp") p.c_damp = to_double(key, v);
    else if (key == "dt") p.dt = to_double(key, v);
    else if (key == "tol_force") p.tol_force = to_double(key, v);
    else if (key == "max_inner_steps") p.max_inner_steps = static_cast<int>(to_int(key, v));
    else if (key == "max_rounds") p.max_rounds = static_cast<int>(to_int(key, v));
    else if (key == "churn") p.churn = to_double(key, v);
    else if (key == "adjust_ratio") p.adjust_ratio = to_double(key, v);
    else if (key == "adjust_floor") p.adjust_floor = to_double(key, v);
    else if (key == "interior_margin") p.interior_margin = to_double(key, v);
    else throw ConfigError(fmt::format("unknown configuration key '{}'", key));
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path.string()));
    ExperimentConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(fmt::format("{}:{}: expected 'key = value'", path.string(), lineno));
        try {
            apply_setting(cfg, std::string_view(line).substr(0, eq), std::string_view(line).substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
        }
    }
    return cfg;
}

SizeField level_size_field(const ExperimentConfig& cfg, double h) {
    if (cfg.size == "const") return SizeField::constant(h);
    if (cfg.size.starts_with("expr:")) {
        std::string text;
        for (char c : cfg.size.substr(5)) {
            if (c == 'h') text += fmt::format("({:.17g})", h);
            else text.push_back(c);
        }
        return SizeField::expression(text);
    }
    return SizeField::parse(cfg.size);
}

ExperimentReport run_experiment(const ExperimentConfig& config, const ProgressFn& progress) {
    config.validate();
    ExperimentReport report;
    report.config = config;
    const DomainGeometry geom = preset_domain(config.domain);
    std::optional<BenchmarkProblem> problem;
    if (config.fem)
        problem = benchmark_problem(config.benchmark.empty() ? benchmark_for_domain(parse_domain_preset(config.domain))
                                                             : parse_benchmark(config.benchmark));
    auto has_degree = [&](int d) { return config.fem && std::find(config.degrees.begin(), config.degrees.end(), d) != config.degrees.end(); };

    for (double h : config.sizes) {
        const auto t0 = std::chrono::steady_clock::now();
        LevelResult row;
        row.h = h;
        std::string stage = "bpm";
        try {
            const SizeField size = level_size_field(config, h);
            std::ostringstream snaps;
            SnapshotFn snap;
            if (config.snapshot_every > 0)
                snap = [&](int step, const BubbleSystem& sys) { append_bubble_snapshot(snaps, step, sys); };
            BpmResult bpm = run_bpm(geom, size, config.seed, config.bpm, snap, config.snapshot_every);
            row.snapshots = snaps.str();
            row.mesh = std::move(bpm.mesh);
            row.bubbles = bpm.system.bubbles;
            row.rounds = std::move(bpm.rounds);

            stage = "metrics";
            row.report = mesh_report(row.mesh, size);

            const FemSpace p1 = FemSpace::create(row.mesh, 1);
            const FemSpace p2 = FemSpace::create(row.mesh, 2);
            row.n_dofs_p1 = p1.free_dof_count();
            row.n_dofs_p2 = p2.free_dof_count();
            row.err_super_p1 = row.err_super_p2 = row.err_h1_p1 = row.err_h1_p2 = kNaN;
            row.semi_super_p1 = row.semi_super_p2 = kNaN;
            for (int degree : {1, 2}) {
                if (!has_degree(degree)) continue;
                stage = fmt::format("fem P{}", degree);
                const FemSpace& space = degree == 1 ? p1 : p2;
                const FemSolution uh =
                    solve_problem(space, *problem, 1e-10, degree == 1 ? config.load_degree_p1 : config.load_degree_p2);
                const FemSolution ui = interpolate(space, problem->exact_u);
                const H1Parts super = h1_parts_diff(uh, ui);
                const double full = h1_norm_vs_exact(uh, *problem);
                (degree == 1 ? row.err_super_p1 : row.err_super_p2) = super.full();
                (degree == 1 ? row.semi_super_p1 : row.semi_super_p2) = super.semi;
                (degree == 1 ? row.err_h1_p1 : row.err_h1_p2) = full;
            }
        } catch (const std::exception& e) {
            throw ExperimentError(fmt::format("{} h={:g} [{}]: {}", config.domain, h, stage, e.what()));
        }
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (progress)
            progress(fmt::format("{} h={:g}: {} nodes, {} triangles, eps={:.4f}, q_avg={:.4f}, super_p1={}, super_p2={} ({:.1f}s)",
                                 config.domain, h, row.mesh.node_count(), row.mesh.tri_count(),
                                 row.rounds.empty() ? 0.0 : row.rounds.back().epsilon, row.report.q_avg,
                                 num(row.err_super_p1), num(row.err_super_p2), row.seconds));
        report.rows.push_back(std::move(row));
    }

    // Orders between consecutive levels.
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        auto& r = report.rows[i];
        r.order_p1 = r.order_p2 = kNaN;
        if (i == 0) continue;
        const auto& prev = report.rows[i - 1];
        auto order = [&](double e0, double e1) {
            if (!(e0 > 0.0) || !(e1 > 0.0)) return kNaN;
            const std::pair<double, double> pts[] = {{prev.h, e0}, {r.h, e1}};
            return convergence_order(pts).front();
        };
        r.order_p1 = order(prev.err_super_p1, r.err_super_p1);
        r.order_p2 = order(prev.err_super_p2, r.err_super_p2);
    }

    // Mesh-condition exponent, then the bad-edge partition at that exponent.
    if (report.rows.size() >= 2) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& r : report.rows) pts.emplace_back(r.h, r.report.h_err);
        report.alpha_hat = estimate_alpha(pts);
        if (std::isfinite(report.alpha_hat))
            for (auto& r : report.rows)
                r.report.bad_edges = classify_bad_edges(r.mesh, level_size_field(config, r.h), 3.0, report.alpha_hat);
    } else {
        report.alpha_hat = kNaN;
    }
    if (config.domain == "l_shape") {
        const auto rows = table_rows(report);
        report.slope_p1 = slope_vs_dofs(rows, false);
        report.slope_p2 = slope_vs_dofs(rows, true);
    }
    return report;
}

ExperimentReport run_lshape_study(const ExperimentConfig& config, const ProgressFn& progress) {
    if (config.domain != "l_shape") throw ConfigError("run_lshape_study requires domain = l_shape");
    return run_experiment(config, progress);
}

std::string table_csv(const ExperimentReport& report) {
    std::string s(kTableHeader);
    s += '\n';
    for (const auto& r : table_rows(report))
        s += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.domain, num(r.h), num(r.n_nodes),
                         num(r.n_tris), num(r.dofs_p1), num(r.dofs_p2), num(r.q_avg), num(r.h_err),
                         num(r.max_edge_err), num(r.alpha_hat), num(r.err_super_p1), num(r.order_p1),
                         num(r.err_super_p2), num(r.order_p2), num(r.err_h1_p1), num(r.err_h1_p2));
    return s;
}

std::string metrics_csv(const ExperimentReport& report) {
    std::string s = "domain,h,N_nodes,N_tris,q_avg,q_min,edge_mean,edge_var,h_err,max_edge_err,n_bad_edges,alpha_hat\n";
    for (const auto& r : report.rows)
        s += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", report.config.domain, num(r.h), r.mesh.node_count(),
                         r.mesh.tri_count(), num(r.report.q_avg), num(r.report.q_min), num(r.report.edge_mean),
                         num(r.report.edge_var), num(r.report.h_err), num(r.report.max_edge_err),
                         r.report.bad_edges.bad.size(), num(report.alpha_hat));
    return s;
}

std::string summary_text(const ExperimentReport& report) { return render_summary(table_rows(report)); }

void emit_outputs(const ExperimentReport& report, const std::filesystem::path& dir) {
    if (report.rows.empty()) throw ArgumentError("emit_outputs: report has no rows");
    std::error_code ec;
    std::filesystem::create_directories(dir / "meshes", ec);
    std::filesystem::create_directories(dir / "bubbles", ec);
    if (ec) throw IoError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));

    write_text(dir / "table.csv", table_csv(report));
    write_text(dir / "metrics.csv", metrics_csv(report));
    for (const auto& r : report.rows) {
        const std::string tag = level_tag(report.config.domain, r.h);
        write_node_file(r.mesh, dir / "meshes" / (tag + ".node"));
        write_ele_file(r.mesh, dir / "meshes" / (tag + ".ele"));
        write_svg(r.mesh, dir / "meshes" / (tag + ".svg"));
        std::ofstream out(dir / "bubbles" / (tag + ".txt"));
        if (!out) throw IoError(fmt::format("cannot write bubbles for {}", tag));
        fmt::print(out, "# x y mobility\n");
        for (const auto& b : r.bubbles) fmt::print(out, "{:.17g} {:.17g} {}\n", b.pos.x, b.pos.y, to_string(b.mobility));
        if (!r.snapshots.empty()) write_text(dir / "bubbles" / (tag + "_snapshots.txt"), r.snapshots);
    }

    std::string rounds;
    for (const auto& r : report.rows) {
        rounds += fmt::format("h={:g} epsilon by round:", r.h);
        for (const auto& o : r.rounds) rounds += fmt::format(" {:.4f}", o.epsilon);
        rounds += '\n';
    }
    write_text(dir / "summary.txt", summary_text(report) + rounds);
}

std::string summarize_table_file(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw IoError(fmt::format("cannot open '{}'", csv_path.string()));
    std::string line;
    if (!std::getline(in, line) || trim(line) != kTableHeader)
        throw IoError(fmt::format("'{}' does not have the expected table header", csv_path.string()));
    std::vector<TableRow> rows;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(trim(cell));
        while (f.size() < 16) f.emplace_back();
        auto val = [&](std::size_t i) {
            if (f[i].empty()) return kNaN;
            if (f[i] == "inf") return std::numeric_limits<double>::infinity();
            return to_double("table.csv", f[i]);
        };
        TableRow r;
        r.domain = f[0];
        double* fields[] = {&r.h, &r.n_nodes, &r.n_tris, &r.dofs_p1, &r.dofs_p2, &r.q_avg, &r.h_err,
                            &r.max_edge_err, &r.alpha_hat, &r.err_super_p1, &r.order_p1, &r.err_super_p2,
                            &r.order_p2, &r.err_h1_p1, &r.err_h1_p2};
        for (std::size_t i = 0; i < 15; ++i) *fields[i] = val(i + 1);
        rows.push_back(r);
    }
    return render_summary(rows);
}

} // namespace bubblemesh
