#pragma once

#include "mset/statemap.hpp"

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mset {

/// A logic signal: an integer level, high impedance, or undefined.
struct Level {
    enum class Kind { value, hiz, undefined };
    Kind kind = Kind::undefined;
    int value = 0;

    static Level of(int v) { return {Kind::value, v}; }
    static Level hiz() { return {Kind::hiz, 0}; }
    static Level undefined() { return {Kind::undefined, 0}; }

    bool operator==(const Level&) const = default;
};

std::string to_string(const Level& level);  // "<n>", "HiZ" or "UNDEFINED"

/// Which drain an MSET connects to the source for one gate-level tuple.
struct Selection {
    enum class Kind { drain, off, undefined };
    Kind kind = Kind::undefined;
    int drain = 0;  // 0-based

    static Selection of(int drain) { return {Kind::drain, drain}; }
    static Selection off() { return {Kind::off, 0}; }
    static Selection undefined() { return {Kind::undefined, 0}; }

    bool operator==(const Selection&) const = default;
};

std::string to_string(const Selection& selection);  // "d<k>" (1-based), "OFF" or "UNDEFINED"

using GateTuple = std::vector<int>;

struct BehavioralMSET {
    int n_gates = 2;
    int n_drains = 2;
    std::map<int, double> gate_levels;  // level -> gate voltage (V)
    std::map<GateTuple, Selection> state_table;

    /// Every tuple over the gate-level alphabet, lexicographic.
    [[nodiscard]] std::vector<GateTuple> tuples() const;
    /// Throws InvalidArgument for a tuple outside the table.
    [[nodiscard]] Selection select(const GateTuple& gates) const;
    /// Throws ValidationError unless the table is total, drains are in range and levels are <= 0 V.
    void check() const;
};

/// Samples the nearest map cell for every 2-gate level tuple.
BehavioralMSET behavioral_from_statemap(const StateMap& map, const std::map<int, double>& gate_levels);

BehavioralMSET declared_mset(int n_gates, int n_drains, const std::map<GateTuple, Selection>& state_table,
                             const std::map<int, double>& gate_levels);

/// 4-gate/4-drain row-column table over levels {0: on, 1: depleting}, gates
/// ordered (W, E, N, S). The grounded gate of each pair sets the column
/// (W -> 0, E -> 1) and row (N -> 0, S -> 1); drain = col + 2 * row. A pair
/// with both gates depleting gives OFF, both grounded gives UNDEFINED.
std::map<GateTuple, Selection> row_column_table();

struct NetElement {
    enum class Type { input, constant, inverter, mset, probe };
    Type type = Type::input;
    std::string name;
    std::vector<std::string> inputs;  // inverter: {in}; mset: gate nets; probe: {in}
    std::vector<std::string> drains;  // mset: drain nets
    std::string output;               // driven net (input, constant, inverter, mset)
    int value = 0;                    // constant level
    int radix = 2;                    // inverter alphabet size: L -> radix - 1 - L
    std::string model;                // mset: key into LogicNet::models
};

struct LogicNet {
    std::map<std::string, BehavioralMSET> models;
    std::vector<NetElement> elements;

    /// Throws ValidationError for duplicate names or drivers, undriven ports,
    /// unknown models, arity mismatches and cycles. Returns a topological order.
    [[nodiscard]] std::vector<std::size_t> evaluation_order() const;
    [[nodiscard]] std::vector<std::string> input_names() const;
    [[nodiscard]] std::vector<std::string> probe_names() const;
};

struct NetResult {
    std::map<std::string, Level> probes;
    std::map<std::string, Selection> selections;  // per MSET element
};

NetResult eval_net_detailed(const LogicNet& net, const std::map<std::string, int>& inputs);
std::map<std::string, Level> eval_net(const LogicNet& net, const std::map<std::string, int>& inputs);

/// One-trit multiplexer: the value on the drain selected by `gate_inputs`;
/// HiZ when OFF, UNDEFINED when the selection is undefined.
Level eval_ternary_mux(const BehavioralMSET& mset3, const GateTuple& gate_inputs,
                       const std::array<Level, 3>& drain_values);

struct LinearStage {
    double gain = 1.0;
    double offset = 0.0;  // V
};

struct ConcatViolation {
    enum class Kind { sign, magnitude, unpaired };
    Kind kind = Kind::sign;
    std::size_t index = 0;
    double output = 0.0;    // V, after the stage
    double expected = 0.0;  // V
    std::string message;
};

struct ConcatReport {
    std::vector<ConcatViolation> violations;
    [[nodiscard]] bool ok() const { return violations.empty(); }
};

/// Pairs outputs with gate levels by position. A positive (staged) output on a
/// gate is a sign violation; otherwise a mismatch beyond `tolerance` is a
/// magnitude violation.
ConcatReport check_concatenation(const std::vector<double>& stage_out_voltages,
                                 const std::vector<double>& next_gate_levels, double tolerance = 0.05,
                                 const std::optional<LinearStage>& stage = std::nullopt);

struct DeviceCounts {
    int mset = 0;
    int mosfet = 0;
    [[nodiscard]] int total() const { return mset + mosfet; }
};

struct CostComparison {
    DeviceCounts mset_solution;
    DeviceCounts cmos_solution;
    [[nodiscard]] double ratio() const {
        return static_cast<double>(cmos_solution.total()) / static_cast<double>(mset_solution.total());
    }
};

/// 4-input multiplexer: one 4-gate MSET plus two CMOS inverters against a CMOS transmission-gate tree.
CostComparison cmos_cost_compare();

struct TruthTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

/// Evaluates every combination of the enumerated inputs (first input varies
/// slowest) with the remaining inputs held at `fixed`.
TruthTable truth_table(const LogicNet& net, const std::vector<std::pair<std::string, std::vector<int>>>& enumerate,
                       const std::map<std::string, int>& fixed = {});

void write_truth_table_csv(std::ostream& os, const TruthTable& table);

}  // namespace mset
