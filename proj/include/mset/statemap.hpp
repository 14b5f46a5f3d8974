#pragma once

#include "mset/circuit.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace mset {

/// Conduction state of one map cell: S_k (drain k, 1-based), OFF, UNDEFINED or FAILED.
struct StateLabel {
    enum class Kind { state, off, undefined, failed };
    Kind kind = Kind::undefined;
    int drain = 0;  // 1-based, only for Kind::state

    static StateLabel selected(int drain) { return {Kind::state, drain}; }
    static StateLabel off() { return {Kind::off, 0}; }
    static StateLabel undefined() { return {Kind::undefined, 0}; }
    static StateLabel failed() { return {Kind::failed, 0}; }

    bool operator==(const StateLabel&) const = default;
};

std::string to_string(const StateLabel& label);
/// Parses "S<k>", "OFF", "UNDEFINED" or "FAILED"; throws ParseError otherwise.
StateLabel parse_label(const std::string& text);

/// S_k when |v - V_k| <= tol * V_k (nearest drain wins, ties to the lower
/// index), OFF when |v| <= tol * min(V), UNDEFINED otherwise.
StateLabel classify(double v_out, const std::vector<double>& drain_voltages, double tolerance);

struct StateMap {
    std::vector<double> vg1_axis;             // V, ascending
    std::vector<double> vg2_axis;             // V, ascending
    std::vector<std::vector<double>> v_out;   // [i][j] at (vg1_axis[i], vg2_axis[j]); NaN when FAILED
    std::vector<std::vector<StateLabel>> labels;
    std::vector<double> drain_voltages;       // V, in drain order d1, d2, ...
    double tolerance = 0.01;
    std::vector<std::string> failures;        // one message per FAILED cell

    [[nodiscard]] std::size_t rows() const { return vg1_axis.size(); }
    [[nodiscard]] std::size_t cols() const { return vg2_axis.size(); }
    [[nodiscard]] std::size_t count(const StateLabel& label) const;
    /// Checks dimensions and v_out bounds; throws ValidationError.
    void check() const;
};

struct GateRange {
    double min = -3.0;
    double max = 0.0;
};

std::vector<double> linspace(const GateRange& range, int steps);

struct SweepOptions {
    std::string gate1 = "jg1";
    std::string gate2 = "jg2";
    double tolerance = 0.01;
    int jobs = 1;  // >1: rows run concurrently, each from its own left edge
    std::function<void(std::size_t done, std::size_t total)> progress;
    /// Called with every converged operating point; calls are serialized.
    std::function<void(std::size_t i, std::size_t j, const OperatingPoint& op)> on_point;
};

/// Serpentine visiting order of an n1 x n2 grid as (i, j) pairs.
std::vector<std::pair<std::size_t, std::size_t>> serpentine_order(std::size_t n1, std::size_t n2);

/// Solves one operating point per grid cell and classifies it. Failed solves
/// become FAILED cells with a message in StateMap::failures.
StateMap sweep_gates(const Mesh& mesh, const CircuitConfig& circuit_template, const GateRange& vg1,
                     const GateRange& vg2, int steps1, int steps2, const SolverOptions& opts,
                     const SweepOptions& sweep = {});

/// Recomputes labels from v_out with a new tolerance.
void relabel(StateMap& map, double tolerance);

struct Polyline {
    std::vector<std::pair<double, double>> points;  // (vg1, vg2)
    bool closed = false;
};

struct ContourSet {
    double level = 0.0;
    std::vector<Polyline> polylines;
};

/// Marching-squares iso-lines of `field` (values at grid nodes, NaN = missing)
/// for every level k * spacing strictly inside the data range.
std::vector<ContourSet> contour_field(const std::vector<double>& x, const std::vector<double>& y,
                                      const std::vector<std::vector<double>>& field, double spacing);

std::vector<ContourSet> extract_isolines(const StateMap& map, double spacing);

/// Boundary curves (level 0.5 of the label indicator) around every state present in the map.
std::vector<std::pair<StateLabel, std::vector<Polyline>>> state_boundaries(const StateMap& map);

struct CsvMetadata {
    std::vector<std::pair<std::string, std::string>> entries;  // written as "# key: value"
};

void write_statemap_csv(std::ostream& os, const StateMap& map, const CsvMetadata& meta = {});
void write_statemap_csv(const std::string& path, const StateMap& map, const CsvMetadata& meta = {});
/// Inverse of write_statemap_csv; drain voltages and tolerance come from the metadata lines.
/// Other metadata lines are returned through `meta` in file order.
StateMap read_statemap_csv(std::istream& is, CsvMetadata* meta = nullptr);
StateMap read_statemap_csv(const std::string& path, CsvMetadata* meta = nullptr);

struct SvgOptions {
    int cell_px = 16;
    bool isolines = true;
    bool boundaries = true;
    std::string title;
    std::string generator = "mset";
};

void render_statemap_svg(std::ostream& os, const StateMap& map, const std::vector<ContourSet>& contours,
                         const SvgOptions& options = {});
void render_statemap_svg(const std::string& path, const StateMap& map, const std::vector<ContourSet>& contours,
                         const SvgOptions& options = {});

}  // namespace mset
