#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "bubblemesh/geometry.hpp"
#include "bubblemesh/sizing.hpp"
#include "bubblemesh/triangulate.hpp"
#include "bubblemesh/vec2.hpp"

namespace bubblemesh {

enum class Mobility { fixed_corner, boundary_slide, interior };

std::string_view to_string(Mobility m);

/// Position of a sliding bubble along a boundary loop. Polygon bubbles are
/// confined to the open segment between two corners; circle bubbles wrap.
struct BoundaryTrack {
    double s = 0.0;
    double s_min = 0.0;
    double s_max = 0.0;
    bool periodic = false;
};

struct Bubble {
    Vec2 pos;
    Vec2 vel;
    Mobility mobility = Mobility::interior;
    std::optional<std::size_t> boundary_id;
    BoundaryTrack track;
};

/// Simulation constants. Forces are k0 * f(w) scaled by the pair target length,
/// so the dynamics (and dt) are expressed in units of the local bubble size.
struct BpmParams {
    double k0 = 1.0;
    double c_damp = 1.4;
    double dt = 0.1;
    double tol_force = 1e-3;
    int max_inner_steps = 400;
    int max_rounds = 20;
    double churn = 0.1;
    // Consecutive rounds without improvement before the outer loop stops.
    int max_stalled = 3;
    double adjust_ratio = 0.8;
    double adjust_floor = 0.05;
    // Interior bubbles are kept at least this many local sizes inside the boundary.
    double interior_margin = 0.05;
    // Initial interior candidates closer than this many local sizes to the boundary are dropped.
    double seed_clearance = 0.3;
    double seed_jitter = 0.1;
};

class BubbleSystem {
public:
    BubbleSystem(const DomainGeometry& geom, const SizeField& size, BpmParams params = {});

    std::vector<Bubble> bubbles;

    const DomainGeometry& geom() const { return *geom_; }
    const SizeField& size() const { return *size_; }
    const BpmParams& params() const { return params_; }
    BpmParams& params() { return params_; }

    std::size_t count(Mobility m) const;
    std::vector<Vec2> positions() const;

private:
    const DomainGeometry* geom_;
    const SizeField* size_;
    BpmParams params_;
};

/// k0 * (1.25 w^3 - 2.375 w^2 + 1.125) on [0, 1.5], zero beyond; positive is repulsive.
double interbubble_force_magnitude(double w, double k0);

/// C = 1 - l_actual / l_target: positive overlap, zero tangency, negative gap.
double fusion_degree(double l_target, double l_actual);

/// Corner bubbles, 1D-subdivided boundary bubbles and a jittered hexagonal interior.
BubbleSystem initialize(const DomainGeometry& geom, const SizeField& size, std::uint64_t seed,
                        BpmParams params = {});

struct InnerLoopReport {
    int steps_taken = 0;
    double max_residual_force = 0.0;  // in units of k0
    double max_abs_fusion_degree = 0.0;  // over force-adjacent pairs
    double max_speed = 0.0;  // largest bubble speed seen during the loop
};

using SnapshotFn = std::function<void(int step, const BubbleSystem&)>;

/// Damped dynamics with semi-implicit Euler until the residual force drops
/// below tol_force * k0 or max_steps is reached.
InnerLoopReport inner_loop(BubbleSystem& sys, int max_steps, double tol_force,
                           const SnapshotFn& snapshot = {}, int snapshot_every = 0);

struct PairStats {
    double max_abs = 0.0;
    double mean = 0.0;
    double stddev = 0.0;  // over interior-interior pairs
    std::size_t pairs = 0;
};

/// Fusion degrees over pairs inside the force support (w <= 1.5).
PairStats force_pair_fusion(const BubbleSystem& sys);

/// Delaunay triangulation of the bubble centres, clipped to the domain.
TriMesh triangulate_bubbles(const BubbleSystem& sys);

/// Fusion degrees over the edges of `mesh` whose node origins index `sys.bubbles`.
PairStats mesh_edge_fusion(const BubbleSystem& sys, const TriMesh& mesh);

struct OuterRound {
    std::size_t bubbles = 0;
    std::size_t deleted = 0;
    std::size_t inserted = 0;
    int inner_steps = 0;
    double epsilon = 0.0;        // max |C| over triangulation edges (objective)
    double epsilon_force = 0.0;  // max |C| over force-support pairs
};

struct OuterLoopResult {
    BubbleSystem system;
    std::vector<double> epsilon_history;
    std::vector<OuterRound> rounds;  // rounds[0] is the incoming equilibrium
    std::size_t best_round = 0;
};

/// Insertion/deletion rounds; returns the population with the smallest epsilon.
OuterLoopResult outer_loop(BubbleSystem sys, int max_rounds, const SnapshotFn& snapshot = {},
                           int snapshot_every = 0);

struct BpmResult {
    BubbleSystem system;
    TriMesh mesh;
    InnerLoopReport first_equilibrium;
    std::vector<OuterRound> rounds;
    std::vector<double> epsilon_history;
};

/// initialize -> inner_loop -> outer_loop -> triangulate.
BpmResult run_bpm(const DomainGeometry& geom, const SizeField& size, std::uint64_t seed, BpmParams params = {},
                  const SnapshotFn& snapshot = {}, int snapshot_every = 0);

} // namespace bubblemesh
