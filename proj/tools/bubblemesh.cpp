// Command-line front end: run experiment series, generate single meshes,
// solve benchmarks on existing meshes and summarize result tables.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "bubblemesh/bubbles.hpp"
#include "bubblemesh/errors.hpp"
#include "bubblemesh/fem.hpp"
#include "bubblemesh/harness.hpp"
#include "bubblemesh/mesh_io.hpp"
#include "bubblemesh/metrics.hpp"

using namespace bubblemesh;

namespace {

struct BpmFlags {
    std::optional<std::uint64_t> seed;
    std::optional<int> max_inner_steps;
    std::optional<double> tol_force;
    std::optional<int> max_rounds;
    std::string dump_bubbles;
    int snapshot_every = 0;

    void add_to(CLI::App& app) {
        app.add_option("--seed", seed, "Random seed for bubble initialization");
        app.add_option("--max-inner-steps", max_inner_steps, "Inner-loop step limit")->check(CLI::PositiveNumber);
        app.add_option("--tol-force", tol_force, "Residual force tolerance (units of k0)")->check(CLI::PositiveNumber);
        app.add_option("--max-rounds", max_rounds, "Outer-loop round limit")->check(CLI::NonNegativeNumber);
        app.add_option("--dump-bubbles", dump_bubbles, "Write `x y mobility` bubble snapshots to this file");
        app.add_option("--snapshot-every", snapshot_every, "Snapshot cadence in inner steps (0: final state only)")
            ->check(CLI::NonNegativeNumber);
    }

    void apply(BpmParams& p) const {
        if (max_inner_steps) p.max_inner_steps = *max_inner_steps;
        if (tol_force) p.tol_force = *tol_force;
        if (max_rounds) p.max_rounds = *max_rounds;
    }
};

void print_progress(const std::string& line) { fmt::print(stderr, "{}\n", line); }

int cmd_run(const std::string& config_path, const std::string& out_dir, const BpmFlags& flags) {
    ExperimentConfig cfg = load_config(config_path);
    if (flags.seed) cfg.seed = *flags.seed;
    flags.apply(cfg.bpm);
    if (flags.snapshot_every > 0) cfg.snapshot_every = flags.snapshot_every;
    if (!out_dir.empty()) cfg.output_dir = out_dir;

    const ExperimentReport report =
        cfg.domain == "l_shape" && cfg.fem ? run_lshape_study(cfg, print_progress) : run_experiment(cfg, print_progress);
    emit_outputs(report, cfg.output_dir);
    if (!flags.dump_bubbles.empty()) {
        std::ofstream out(flags.dump_bubbles);
        if (!out) throw IoError(fmt::format("cannot open '{}' for writing", flags.dump_bubbles));
        for (const auto& r : report.rows) {
            fmt::print(out, "# h {}\n", r.h);
            out << r.snapshots;
            for (const auto& b : r.bubbles)
                fmt::print(out, "{:.17g} {:.17g} {}\n", b.pos.x, b.pos.y, to_string(b.mobility));
        }
    }
    fmt::print("{}", summary_text(report));
    fmt::print("outputs written to {}\n", cfg.output_dir.string());
    return 0;
}

int cmd_mesh(const std::string& domain, const std::string& size_spec, const std::string& out_prefix,
             const std::string& svg, const BpmFlags& flags) {
    const DomainGeometry geom = preset_domain(domain);
    const SizeField size = SizeField::parse(size_spec);
    BpmParams params;
    flags.apply(params);

    std::ofstream dump;
    if (!flags.dump_bubbles.empty()) {
        dump.open(flags.dump_bubbles);
        if (!dump) throw IoError(fmt::format("cannot open '{}' for writing", flags.dump_bubbles));
    }
    SnapshotFn snap;
    if (dump.is_open() && flags.snapshot_every > 0)
        snap = [&](int step, const BubbleSystem& sys) { append_bubble_snapshot(dump, step, sys); };

    const BpmResult r = run_bpm(geom, size, flags.seed.value_or(1), params, snap, flags.snapshot_every);
    if (dump.is_open()) append_bubble_snapshot(dump, -1, r.system);

    const MeshReport rep = mesh_report(r.mesh, size);
    fmt::print("domain {} size {}: {} bubbles, {} nodes, {} triangles\n", geom.name(), size.describe(),
               r.system.bubbles.size(), r.mesh.node_count(), r.mesh.tri_count());
    fmt::print("epsilon by round:");
    for (const auto& o : r.rounds) fmt::print(" {:.4f}", o.epsilon);
    fmt::print("\nq_avg {:.6f} q_min {:.6f} edge_mean {:.6g} edge_var {:.6g} h_err {:.6g} max_edge_err {:.6g}\n",
               rep.q_avg, rep.q_min, rep.edge_mean, rep.edge_var, rep.h_err, rep.max_edge_err);

    const std::string prefix = out_prefix.empty() ? geom.name() : out_prefix;
    write_node_file(r.mesh, prefix + ".node");
    write_ele_file(r.mesh, prefix + ".ele");
    fmt::print("wrote {0}.node and {0}.ele\n", prefix);
    if (!svg.empty()) {
        write_svg(r.mesh, svg);
        fmt::print("wrote {}\n", svg);
    }
    return 0;
}

int cmd_fem(const std::string& node, const std::string& ele, int degree, const std::string& bench,
            const std::string& values) {
    const TriMesh mesh = read_triangle_files(node, ele);
    const BenchmarkProblem problem = benchmark_problem(parse_benchmark(bench));
    const FemSpace space = FemSpace::create(mesh, degree);
    const FemSolution uh = solve_problem(space, problem);
    const FemSolution ui = interpolate(space, problem.exact_u);
    const H1Parts super = h1_parts_diff(uh, ui);
    const H1Parts full = h1_parts_vs_exact(uh, problem);
    fmt::print("benchmark {} P{}: {} nodes, {} triangles, {} free DOFs\n", problem.name, degree, mesh.node_count(),
               mesh.tri_count(), space.free_dof_count());
    fmt::print("|u_h - interpolant|_1 = {:.6e} (gradient part {:.6e})\n", super.full(), super.semi);
    fmt::print("|u_h - u|_1 = {:.6e} (gradient part {:.6e})\n", full.full(), full.semi);
    if (!values.empty()) write_values(uh.coeffs, values);
    return 0;
}

int cmd_report(const std::string& dir) {
    fmt::print("{}", summarize_table_file(std::filesystem::path(dir) / "table.csv"));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bubble placement mesh generation and finite element superconvergence study"};
    app.require_subcommand(1);

    BpmFlags run_flags;
    std::string config_path;
    std::string run_out;
    auto* run = app.add_subcommand("run", "Run an experiment series from a config file");
    run->add_option("--config", config_path, "Flat `key = value` config file")->required()->check(CLI::ExistingFile);
    run->add_option("--out", run_out, "Output directory (overrides output_dir)");
    run_flags.add_to(*run);

    BpmFlags mesh_flags;
    std::string domain;
    std::string size_spec;
    std::optional<double> size_const;
    std::string mesh_out;
    std::string svg;
    auto* mesh = app.add_subcommand("mesh", "Generate one bubble mesh");
    mesh->add_option("--domain", domain, "Domain preset")->required();
    auto* sc = mesh->add_option("--size-const", size_const, "Constant bubble size h")->check(CLI::PositiveNumber);
    mesh->add_option("--size", size_spec, "Size field: <number>, radial-ring or expr:<expression>")->excludes(sc);
    mesh->add_option("--out", mesh_out, "Prefix for the .node/.ele files (default: domain name)");
    mesh->add_option("--svg", svg, "Write an SVG rendering of the mesh");
    mesh_flags.add_to(*mesh);

    std::string node;
    std::string ele;
    int degree = 1;
    std::string bench;
    std::string values;
    auto* fem = app.add_subcommand("fem", "Solve a benchmark on an existing mesh");
    fem->add_option("--node", node, ".node file")->required()->check(CLI::ExistingFile);
    fem->add_option("--ele", ele, ".ele file")->required()->check(CLI::ExistingFile);
    fem->add_option("--degree", degree, "Element degree (1 or 2)")->check(CLI::IsMember({1, 2}));
    fem->add_option("--benchmark", bench, "cos-sin, sin-sin, exp, corner, or a domain name")->required();
    fem->add_option("--values", values, "Write `index value` solution coefficients to this file");

    std::string report_dir;
    auto* report = app.add_subcommand("report", "Summarize an existing output directory");
    report->add_option("--dir", report_dir, "Directory containing table.csv")->required()->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, run_out, run_flags);
        if (mesh->parsed()) {
            if (size_const) size_spec = fmt::format("{:.17g}", *size_const);
            if (size_spec.empty()) {
                fmt::print(stderr, "mesh: one of --size-const or --size is required\n");
                return 2;
            }
            return cmd_mesh(domain, size_spec, mesh_out, svg, mesh_flags);
        }
        if (fem->parsed()) return cmd_fem(node, ele, degree, bench, values);
        if (report->parsed()) return cmd_report(report_dir);
    } catch (const ConfigError& e) {
        fmt::print(stderr, "configuration error: {}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
