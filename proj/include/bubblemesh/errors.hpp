#pragma once

#include <stdexcept>
#include <string>

namespace bubblemesh {

// Invalid user configuration (unknown preset, malformed config file, bad flag value).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A function was called outside its documented domain.
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Bubble dynamics produced a non-finite state.
struct SimulationDivergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Point set cannot be triangulated (too few points, all collinear).
struct DegenerateInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DuplicatePoints : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyMesh : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AssemblyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SolverError : std::runtime_error {
    SolverError(const std::string& what, double residual)
        : std::runtime_error(what), final_residual(residual) {}
    double final_residual;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A module error raised inside an experiment, with the domain, size and stage prepended.
struct ExperimentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace bubblemesh
