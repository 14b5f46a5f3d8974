#pragma once

// Device description and structured finite-volume mesh for split-drain
// electrostatically formed nanowire transistors.
//
// Lengths are in micrometres, doping in cm^-3 (positive = donors).

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace mset {

struct MaterialParams {
    double epsilon_r_semiconductor = 11.7;
    double epsilon_r_insulator = 3.9;
    double n_i = 1.08e10;          // cm^-3
    double mu_n = 1417.0;          // cm^2/(V s)
    double mu_p = 470.0;           // cm^2/(V s)
    double temperature = 300.0;    // K
    bool srh_recombination = false;
    double tau_n = 1e-7;           // s
    double tau_p = 1e-7;           // s

    /// kT/q in volts.
    [[nodiscard]] double thermal_voltage() const;
};

enum class RegionKind { semiconductor, insulator };

/// What a region is for. Only used to check doping signs.
enum class RegionRole { bulk, gate, source, drain, buffer, other };

struct Rect {
    double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;

    [[nodiscard]] double width() const { return x1 - x0; }
    [[nodiscard]] double height() const { return y1 - y0; }
    [[nodiscard]] double area() const { return width() * height(); }
    friend bool operator==(const Rect&, const Rect&) = default;
};

struct Region {
    std::string name;
    Rect bounds;
    RegionKind kind = RegionKind::semiconductor;
    RegionRole role = RegionRole::other;
    double net_doping = 0.0;
};

struct Point {
    double x = 0.0, y = 0.0;
    friend bool operator==(const Point&, const Point&) = default;
};

/// Ohmic contact on an axis-aligned piece of the outer boundary.
struct Contact {
    std::string name;
    Point a, b;
};

struct DeviceSpec {
    std::vector<Region> regions;
    std::vector<Contact> contacts;
    double scale = 1.0;
    MaterialParams material;
    double depth = 1.0;  // um, extrusion depth used for terminal currents

    [[nodiscard]] Rect bounding_box() const;
    [[nodiscard]] const Contact* find_contact(const std::string& name) const;
    [[nodiscard]] std::vector<std::string> contact_names() const;
};

/// Overridable dimensions of the two-drain device at scale 1.
struct TwoDrainGeometry {
    double width = 2.0;
    double height = 1.2;
    double source_thickness = 0.1;
    double gate_bottom = 0.25;
    double gate_top = 0.9;
    double gate_gap = 0.53;
    double drain_width = 0.35;
    double drain_thickness = 0.15;
    double buffer_width = 0.2;
    double buffer_bottom = 0.4;
    double bulk_doping = 1e17;
    double gate_doping = -5e19;
    double contact_doping = 5e19;
};

/// Overridable dimensions of the three-drain device at scale 1.
struct ThreeDrainGeometry {
    double width = 2.4;
    double height = 1.2;
    double source_thickness = 0.1;
    double gate_bottom = 0.25;
    double gate_top = 0.9;
    double gate_gap = 1.2;
    double n_minus_width = 1.2;  // centred in the gap
    double lateral_drain_width = 0.3;
    double middle_drain_width = 0.13;
    double drain_thickness = 0.15;
    double buffer_width = 0.09;
    double buffer_bottom = 0.4;
    double bulk_doping = 1e17;
    double n_minus_doping = 1e16;
    double gate_doping = -5e19;
    double contact_doping = 5e19;
};

DeviceSpec build_two_drain_spec(double scale, const TwoDrainGeometry& geometry = {});
DeviceSpec build_three_drain_spec(double scale, const ThreeDrainGeometry& geometry = {});

struct Violation {
    std::string subject;  // region or contact name
    std::string message;
};

using ValidationReport = std::vector<Violation>;

ValidationReport validate_spec(const DeviceSpec& spec);

/// Throws ValidationError listing every violation when the spec is invalid.
void require_valid(const DeviceSpec& spec);

struct MeshResolution {
    std::size_t nx = 40;      // target node count along x
    std::size_t ny = 26;      // target node count along y
    double refinement = 2.0;  // cell-size divisor near junctions
};

struct MeshEdge {
    std::size_t a = 0, b = 0;
    double length = 0.0;      // um
    double face = 0.0;        // total dual-face length, um
    double face_semi = 0.0;   // part of the face inside semiconductor cells
    double face_eps = 0.0;    // sum of epsilon_r * half-face lengths
};

enum class NodeKind { semiconductor, insulator };

struct Mesh {
    std::vector<double> x_lines;
    std::vector<double> y_lines;

    std::vector<double> node_doping;          // doping of the owning region
    std::vector<NodeKind> node_kind;
    std::vector<std::size_t> node_region;
    std::vector<std::size_t> cell_region;     // (nx-1)*(ny-1) cells

    std::vector<double> control_volumes;      // um^2
    std::vector<double> semi_volumes;         // semiconductor part, um^2
    std::vector<double> doping_integral;      // sum of N * quarter area over semiconductor quarters

    std::map<std::string, std::vector<std::size_t>> contact_nodes;
    std::map<std::string, double> contact_doping;
    std::vector<MeshEdge> edges;
    std::vector<std::vector<std::size_t>> node_edges;  // edge ids incident on each node

    MaterialParams material;
    double depth = 1.0;

    [[nodiscard]] std::size_t nx() const { return x_lines.size(); }
    [[nodiscard]] std::size_t ny() const { return y_lines.size(); }
    [[nodiscard]] std::size_t node_count() const { return x_lines.size() * y_lines.size(); }
    [[nodiscard]] std::size_t node(std::size_t i, std::size_t j) const { return j * nx() + i; }
    [[nodiscard]] Point position(std::size_t k) const { return {x_lines[k % nx()], y_lines[k / nx()]}; }
    [[nodiscard]] bool is_semiconductor(std::size_t k) const { return node_kind[k] == NodeKind::semiconductor; }
    [[nodiscard]] const std::vector<std::size_t>& nodes_of(const std::string& contact) const;

    /// Doping seen by the node's charge balance: the semiconductor-volume average.
    [[nodiscard]] double effective_doping(std::size_t k) const;
};

Mesh generate_mesh(const DeviceSpec& spec, const MeshResolution& resolution);

/// Analytic one-sided depletion width (um) of a p+/n junction against `doping`.
double depletion_width(double doping, const MaterialParams& material, double reverse_bias = 0.0);

std::string to_string(RegionKind kind);
std::string to_string(RegionRole role);
RegionKind region_kind_from_string(const std::string& s);
RegionRole region_role_from_string(const std::string& s);

}  // namespace mset
