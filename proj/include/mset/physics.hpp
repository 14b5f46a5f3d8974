#pragma once

// Discrete drift-diffusion equations on a Mesh.
//
// Internally the potential is scaled by the thermal voltage and carrier
// densities by the intrinsic density; assembled LinearSystems are in those
// scaled units. FieldState and every other public quantity is unscaled
// (V, cm^-3, A).

#include "mset/device.hpp"

#include <Eigen/SparseCore>

#include <map>
#include <string>
#include <vector>

namespace mset {

/// Scharfetter-Gummel weight B(x) = x / (exp(x) - 1).
double bernoulli(double x);

struct OhmicValues {
    double psi_offset = 0.0;  // V, potential relative to the applied bias
    double n = 0.0;           // cm^-3
    double p = 0.0;           // cm^-3
};

/// Charge-neutral equilibrium values pinned at an ohmic contact.
OhmicValues ohmic_contact_values(double net_doping, const MaterialParams& material);

struct FieldState {
    std::vector<double> psi;  // V
    std::vector<double> n;    // cm^-3, zero on insulator nodes
    std::vector<double> p;    // cm^-3, zero on insulator nodes

    [[nodiscard]] std::size_t size() const { return psi.size(); }
    /// Electron quasi-Fermi potential (V); zero on insulator nodes.
    [[nodiscard]] std::vector<double> phi_n(const MaterialParams& material) const;
    [[nodiscard]] std::vector<double> phi_p(const MaterialParams& material) const;
};

using BiasSet = std::map<std::string, double>;

/// Throws InvalidArgument naming the first contact missing from (or unknown to) the bias.
void check_bias(const Mesh& mesh, const BiasSet& bias);

struct LinearSystem {
    Eigen::SparseMatrix<double> matrix;
    Eigen::VectorXd rhs;
    std::vector<std::size_t> unknown_nodes;  // row/column -> mesh node
};

enum class Carrier { electron, hole };

FieldState equilibrium_init(const Mesh& mesh);

/// Sets potential and carriers of every contact node to their ohmic values at `bias`.
void apply_contact_values(const Mesh& mesh, const BiasSet& bias, FieldState& state);

/// Scaled nonlinear Poisson residual. Carriers follow the Boltzmann relation
/// around `frozen` (quasi-Fermi potentials held fixed) evaluated at `psi`.
Eigen::VectorXd poisson_residual(const Mesh& mesh, const FieldState& frozen, const std::vector<double>& psi,
                                 const BiasSet& bias);

/// Newton system J * dpsi = -F for the scaled Poisson residual at `state`;
/// the solution is a potential update in units of the thermal voltage.
LinearSystem assemble_poisson(const Mesh& mesh, const FieldState& state, const BiasSet& bias);

/// Linear system for the scaled density of `carrier` at fixed potential.
LinearSystem assemble_continuity(const Mesh& mesh, const FieldState& state, Carrier carrier, const BiasSet& bias);

/// Current (A) through `contact`; positive when flowing out of the contact into the device.
double compute_terminal_current(const Mesh& mesh, const FieldState& state, const std::string& contact);

std::map<std::string, double> terminal_currents(const Mesh& mesh, const FieldState& state);

/// Rounding-level scale (A) of the terminal-current sums: machine epsilon
/// times the sum of magnitudes of every flux term that enters them.
double terminal_current_noise(const Mesh& mesh, const FieldState& state);

/// Semiconductor nodes that belong to a carrier domain without any contact.
std::vector<std::size_t> floating_semiconductor_nodes(const Mesh& mesh);

}  // namespace mset
