#pragma once

#include "mset/logic.hpp"
#include "mset/statemap.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>

namespace mset {

struct DeviceConfig {
    std::string builder = "two_drain";  // two_drain | three_drain | custom
    double scale = 1.0;
    TwoDrainGeometry two_drain;
    ThreeDrainGeometry three_drain;
    DeviceSpec custom;                  // regions and contacts when builder == custom
    MaterialParams material;
    double depth = 1.0;                 // um
    MeshResolution mesh;

    [[nodiscard]] DeviceSpec build_spec() const;
};

struct SweepConfig {
    GateRange vg1;
    GateRange vg2;
    int steps1 = 31;
    int steps2 = 31;
    double tolerance = 0.01;
    double contour_spacing = 0.025;  // V
    std::string gate1 = "jg1";
    std::string gate2 = "jg2";
    int jobs = 0;                    // 0: one per available core
};

struct LogicConfig {
    std::map<int, double> levels;  // level -> gate voltage (V)
    std::string netlist;           // resolved against the config directory
};

struct OutputConfig {
    std::string directory = "mset_out";
    std::string stem;              // file-name stem; defaults to the config file stem
    bool csv = true;
    bool svg = true;
};

struct RunConfig {
    DeviceConfig device;
    CircuitConfig circuit;
    SweepConfig sweep;
    SolverOptions solver;
    LogicConfig logic;
    OutputConfig output;
    std::string source_path;  // empty when parsed from text
    std::string hash;         // "fnv1a64:<hex>" of the source text

    /// Circuit template whose gate entries are filled with 0 V when absent.
    [[nodiscard]] CircuitConfig circuit_template() const;
    /// Metadata lines for exported artifacts.
    [[nodiscard]] CsvMetadata metadata() const;
};

/// FNV-1a 64-bit digest of `text`, formatted "fnv1a64:<16 hex digits>".
std::string config_hash(const std::string& text);

/// Parses YAML text. Unknown keys and malformed values throw ParseError with
/// the 1-based line of the offending node. Relative paths resolve against `base_dir`.
RunConfig parse_run_config(const std::string& text, const std::string& base_dir = ".");
/// Reads and parses a file; throws IoError when it cannot be read.
RunConfig load_run_config(const std::string& path);

/// Writes `spec` as a `device:` section with builder: custom.
void write_device_spec(std::ostream& os, const DeviceSpec& spec);
/// Parses a document with a `device:` section into a DeviceSpec.
DeviceSpec parse_device_spec(const std::string& text);

/// Loaded netlist with the truth-table request it carries.
struct NetlistFile {
    LogicNet net;
    std::vector<std::pair<std::string, std::vector<int>>> enumerate;
    std::map<std::string, int> fixed;
};

/// Parses a YAML netlist. Models of kind `statemap` read their CSV relative to
/// `base_dir` and sample it at the model levels, or at `default_levels` when
/// the model gives none.
NetlistFile parse_netlist(const std::string& text, const std::string& base_dir = ".",
                          const std::map<int, double>& default_levels = {});
NetlistFile load_netlist(const std::string& path, const std::map<int, double>& default_levels = {});

}  // namespace mset
