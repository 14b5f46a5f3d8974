#pragma once

#include "mset/circuit.hpp"
#include "mset/device.hpp"
#include "mset/physics.hpp"
#include "mset/solver.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace mset::test {

/// p+ (x < junction) / n strip with full-height contacts on both ends.
inline DeviceSpec junction_spec(double length, double junction, double n_a, double n_d, double height = 0.1) {
    DeviceSpec s;
    s.regions = {
        {"p", {0.0, junction, 0.0, height}, RegionKind::semiconductor, RegionRole::other, -n_a},
        {"n", {junction, length, 0.0, height}, RegionKind::semiconductor, RegionRole::bulk, n_d},
    };
    s.contacts = {
        {"anode", {0.0, 0.0}, {0.0, height}},
        {"cathode", {length, 0.0}, {length, height}},
    };
    return s;
}

/// Uniform n-type block with contacts on the left and right edges.
inline DeviceSpec slab_spec(double length, double height, double n_d) {
    DeviceSpec s;
    s.regions = {{"n", {0.0, length, 0.0, height}, RegionKind::semiconductor, RegionRole::bulk, n_d}};
    s.contacts = {
        {"left", {0.0, 0.0}, {0.0, height}},
        {"right", {length, 0.0}, {length, height}},
    };
    return s;
}

/// Largest |sum of terminal currents| allowed: 1e-6 of the largest current,
/// never below the rounding scale of the flux sums.
inline double conservation_bound(const Mesh& mesh, const FieldState& state) {
    double largest = 0.0;
    for (const auto& [name, i] : terminal_currents(mesh, state)) {
        largest = std::max(largest, std::abs(i));
    }
    return std::max(1e-6 * largest, 16.0 * terminal_current_noise(mesh, state));
}

inline double current_sum(const std::map<std::string, double>& currents) {
    double sum = 0.0;
    for (const auto& [name, i] : currents) {
        sum += i;
    }
    return sum;
}

inline bool conserves_current(const Mesh& mesh, const FieldState& state) {
    return std::abs(current_sum(terminal_currents(mesh, state))) <= conservation_bound(mesh, state);
}

inline bool conserves_current(const Mesh& mesh, const OperatingPoint& op) {
    if (!op.field_state) {
        return false;
    }
    return std::abs(current_sum(op.terminal_currents)) <= conservation_bound(mesh, op.field_state->state);
}

inline BiasSet zero_bias(const Mesh& mesh) {
    BiasSet b;
    for (const auto& [name, nodes] : mesh.contact_nodes) {
        b[name] = 0.0;
    }
    return b;
}

// Potential at the node nearest to x on the bottom row.
inline double psi_at(const Mesh& mesh, const FieldState& s, double x) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < mesh.nx(); ++i) {
        if (std::abs(mesh.x_lines[i] - x) < std::abs(mesh.x_lines[best] - x)) {
            best = i;
        }
    }
    return s.psi[mesh.node(best, 0)];
}

// Depleted-charge equivalent width (um) on the n side: integral of (N_D - n) / N_D.
inline double depleted_width(const Mesh& mesh, const FieldState& s, double junction, double n_d) {
    double w = 0.0;
    for (std::size_t i = 0; i + 1 < mesh.nx(); ++i) {
        const double xa = mesh.x_lines[i];
        const double xb = mesh.x_lines[i + 1];
        if (xa < junction - 1e-12) {
            continue;
        }
        const double da = 1.0 - s.n[mesh.node(i, 0)] / n_d;
        const double db = 1.0 - s.n[mesh.node(i + 1, 0)] / n_d;
        w += 0.5 * (da + db) * (xb - xa);
    }
    return w;
}

inline FieldState solve_at(const Mesh& mesh, const BiasSet& bias) {
    const SolverOptions opts;
    const FieldState eq = gummel_solve(mesh, equilibrium_init(mesh), zero_bias(mesh), opts).state;
    return continuation_solve(mesh, zero_bias(mesh), bias, opts, eq).state;
}

}  // namespace mset::test
