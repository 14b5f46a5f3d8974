#pragma once

#include "mset/solver.hpp"

#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mset {

struct CircuitConfig {
    std::map<std::string, double> drain_voltages;  // V
    std::map<std::string, double> gate_voltages;   // V
    double load_resistor = 10e6;                   // ohm
    std::string output_contact = "source";
    double voltage_tolerance = 1e-4;               // V; current tolerance is voltage_tolerance / load_resistor

    [[nodiscard]] double current_tolerance() const { return voltage_tolerance / load_resistor; }
    [[nodiscard]] double max_drain_voltage() const;
    /// Full contact bias with the output contact pinned at `v_out`.
    [[nodiscard]] BiasSet bias_at(double v_out) const;

    /// Throws ValidationError when names do not match the mesh contacts or R <= 0.
    /// Sign-convention violations (drain < 0, gate > 0) only warn.
    void validate(const Mesh& mesh) const;
};

/// A converged device state together with the bias it was solved at.
struct DeviceSolution {
    FieldState state;
    BiasSet bias;
};

struct OperatingPoint {
    std::map<std::string, double> gate_voltages;
    std::map<std::string, double> drain_voltages;
    double v_out = 0.0;
    std::map<std::string, double> terminal_currents;  // A, positive into the device
    bool converged = false;
    int device_solves = 0;
    std::shared_ptr<const DeviceSolution> field_state;

    /// Current delivered into the load by the output contact.
    [[nodiscard]] double output_current(const std::string& output_contact = "source") const;
};

/// Header matching write_operating_point_row for the given contact order.
void write_operating_point_header(std::ostream& os, const OperatingPoint& op);
void write_operating_point_row(std::ostream& os, const OperatingPoint& op);

/// Zero-bias equilibrium solution used as the cold start for circuit solves.
DeviceSolution equilibrium_solution(const Mesh& mesh, const SolverOptions& opts);

/// Solves the device with the output contact pinned at `v_out_trial` and
/// returns the current flowing out of that contact into the load.
/// `warm` (when given) seeds the continuation; `solved` receives the state.
double device_current_at(const Mesh& mesh, const CircuitConfig& circuit, double v_out_trial,
                         const SolverOptions& opts, const DeviceSolution* warm = nullptr,
                         DeviceSolution* solved = nullptr);

struct DividerRoot {
    double v_out = 0.0;
    double residual = 0.0;  // I(v_out) - v_out / R
    int evaluations = 0;
};

/// Finds v in [0, v_max] with source_current(v) = v / R, where source_current
/// is non-increasing. Bracketed bisection refined by secant (Illinois).
/// Throws Error when the bracket ends do not change sign.
DividerRoot solve_divider(const std::function<double(double)>& source_current, double v_max, double load_resistor,
                          double current_tolerance, std::optional<double> guess = std::nullopt,
                          int max_evaluations = 80);

OperatingPoint solve_operating_point(const Mesh& mesh, const CircuitConfig& circuit, const SolverOptions& opts,
                                     const OperatingPoint* warm = nullptr);

}  // namespace mset
