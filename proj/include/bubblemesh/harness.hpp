#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bubblemesh/bubbles.hpp"
#include "bubblemesh/metrics.hpp"
#include "bubblemesh/triangulate.hpp"

namespace bubblemesh {

struct ExperimentConfig {
    std::string domain = "equilateral_triangle";
    std::string benchmark;  // empty: the benchmark bound to the domain
    std::vector<double> sizes{0.2, 0.1, 0.05, 0.025, 0.0125};
    std::vector<int> degrees{1, 2};
    std::uint64_t seed = 1;
    std::filesystem::path output_dir = "out";
    // Size field per level: `const` (the level's h everywhere), `radial-ring`,
    // or `expr:<text>` where the variable `h` is replaced by the level's size.
    std::string size = "const";
    BpmParams bpm;
    int snapshot_every = 0;  // bubble snapshots every n inner steps (0: final state only)
    bool fem = true;         // false for mesh-statistics-only studies
    int load_degree_p1 = 0;  // load quadrature degree; 0 selects default_load_degree
    int load_degree_p2 = 0;

    void validate() const;
};

/// Applies one `key = value` setting; unknown keys raise ConfigError.
void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// Flat `key = value` file; `#` starts a comment.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Size field for one level of the series.
SizeField level_size_field(const ExperimentConfig& cfg, double h);

struct LevelResult {
    double h = 0.0;
    TriMesh mesh;
    std::vector<Bubble> bubbles;
    std::string snapshots;  // `x y mobility` dumps taken every snapshot_every inner steps
    std::vector<OuterRound> rounds;
    MeshReport report;
    std::size_t n_dofs_p1 = 0;  // free (non-Dirichlet) DOFs
    std::size_t n_dofs_p2 = 0;
    // NaN when the degree was not run or the order is undefined.
    double err_super_p1 = 0.0;  // |u_h - u_I|_1
    double err_super_p2 = 0.0;  // |u_h - Pi_Q u|_1
    double err_h1_p1 = 0.0;     // |u_h - u|_1
    double err_h1_p2 = 0.0;
    double semi_super_p1 = 0.0;  // gradient parts of the above
    double semi_super_p2 = 0.0;
    double order_p1 = 0.0;
    double order_p2 = 0.0;
    double seconds = 0.0;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<LevelResult> rows;
    double alpha_hat = 0.0;
    // Log-log slopes of the supercloseness norms against free DOFs (L-shape study).
    std::optional<double> slope_p1;
    std::optional<double> slope_p2;
};

/// Callback for progress lines; may be empty.
using ProgressFn = std::function<void(const std::string&)>;

/// BPM, triangulation, metrics and (optionally) FEM for every size level.
ExperimentReport run_experiment(const ExperimentConfig& config, const ProgressFn& progress = {});

/// run_experiment plus log-log slopes of both supercloseness norms against free DOFs.
ExperimentReport run_lshape_study(const ExperimentConfig& config, const ProgressFn& progress = {});

/// Writes table.csv, metrics.csv, meshes/, bubbles/ and summary.txt under `dir`.
void emit_outputs(const ExperimentReport& report, const std::filesystem::path& dir);

std::string table_csv(const ExperimentReport& report);
std::string metrics_csv(const ExperimentReport& report);
std::string summary_text(const ExperimentReport& report);

/// Regenerates summary text from an existing table.csv (for `report --dir`).
std::string summarize_table_file(const std::filesystem::path& csv_path);

} // namespace bubblemesh
