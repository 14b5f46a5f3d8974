#include "mset/config.hpp"

#include "mset/errors.hpp"
#include "mset/format.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace mset {

namespace fs = std::filesystem;

std::string config_hash(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string("fnv1a64:") + buf;
}

namespace {

int line_of(const YAML::Node& n) {
    return n.Mark().line >= 0 ? n.Mark().line + 1 : 0;
}

YAML::Node load_yaml(const std::string& text) {
    try {
        return YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ParseError(e.msg, e.mark.line + 1);
    }
}

template <typename T>
T scalar(const YAML::Node& n, const std::string& where) {
    if (!n.IsScalar()) {
        throw ParseError(where + ": expected a scalar value", line_of(n));
    }
    try {
        return n.as<T>();
    } catch (const YAML::BadConversion&) {
        const char* what = std::is_same_v<T, bool>          ? "true or false"
                           : std::is_integral_v<T>          ? "an integer"
                           : std::is_floating_point_v<T>    ? "a number"
                                                            : "a string";
        throw ParseError(where + ": expected " + what + ", got '" + n.Scalar() + "'", line_of(n));
    }
}

double number(const YAML::Node& n, const std::string& where) {
    return scalar<double>(n, where);
}

/// Reads the keys of one mapping and rejects the ones nobody asked for.
class Section {
public:
    Section(const YAML::Node& node, std::string where) : node_(node), where_(std::move(where)) {
        if (node_ && !node_.IsNull() && !node_.IsMap()) {
            throw ParseError(where_ + ": expected a mapping", line_of(node_));
        }
    }

    YAML::Node take(const std::string& key) {
        used_.insert(key);
        if (!node_ || node_.IsNull()) {
            return YAML::Node();
        }
        return node_[key];
    }

    template <typename T>
    bool get(const std::string& key, T& out) {
        const YAML::Node n = take(key);
        if (!n || n.IsNull()) {
            return false;
        }
        out = scalar<T>(n, path(key));
        return true;
    }

    [[nodiscard]] std::string path(const std::string& key) const { return where_ + "." + key; }

    void finish() const {
        if (!node_ || node_.IsNull()) {
            return;
        }
        for (const auto& kv : node_) {
            const std::string key = kv.first.Scalar();
            if (!used_.count(key)) {
                throw ParseError(where_ + ": unknown key '" + key + "'", line_of(kv.first));
            }
        }
    }

private:
    YAML::Node node_;
    std::string where_;
    std::set<std::string> used_;
};

template <typename G>
using GeometryField = std::pair<const char*, double G::*>;

const std::vector<GeometryField<TwoDrainGeometry>>& two_drain_fields() {
    static const std::vector<GeometryField<TwoDrainGeometry>> f{
        {"width", &TwoDrainGeometry::width},
        {"height", &TwoDrainGeometry::height},
        {"source_thickness", &TwoDrainGeometry::source_thickness},
        {"gate_bottom", &TwoDrainGeometry::gate_bottom},
        {"gate_top", &TwoDrainGeometry::gate_top},
        {"gate_gap", &TwoDrainGeometry::gate_gap},
        {"drain_width", &TwoDrainGeometry::drain_width},
        {"drain_thickness", &TwoDrainGeometry::drain_thickness},
        {"buffer_width", &TwoDrainGeometry::buffer_width},
        {"buffer_bottom", &TwoDrainGeometry::buffer_bottom},
        {"bulk_doping", &TwoDrainGeometry::bulk_doping},
        {"gate_doping", &TwoDrainGeometry::gate_doping},
        {"contact_doping", &TwoDrainGeometry::contact_doping},
    };
    return f;
}

const std::vector<GeometryField<ThreeDrainGeometry>>& three_drain_fields() {
    static const std::vector<GeometryField<ThreeDrainGeometry>> f{
        {"width", &ThreeDrainGeometry::width},
        {"height", &ThreeDrainGeometry::height},
        {"source_thickness", &ThreeDrainGeometry::source_thickness},
        {"gate_bottom", &ThreeDrainGeometry::gate_bottom},
        {"gate_top", &ThreeDrainGeometry::gate_top},
        {"gate_gap", &ThreeDrainGeometry::gate_gap},
        {"n_minus_width", &ThreeDrainGeometry::n_minus_width},
        {"lateral_drain_width", &ThreeDrainGeometry::lateral_drain_width},
        {"middle_drain_width", &ThreeDrainGeometry::middle_drain_width},
        {"drain_thickness", &ThreeDrainGeometry::drain_thickness},
        {"buffer_width", &ThreeDrainGeometry::buffer_width},
        {"buffer_bottom", &ThreeDrainGeometry::buffer_bottom},
        {"bulk_doping", &ThreeDrainGeometry::bulk_doping},
        {"n_minus_doping", &ThreeDrainGeometry::n_minus_doping},
        {"gate_doping", &ThreeDrainGeometry::gate_doping},
        {"contact_doping", &ThreeDrainGeometry::contact_doping},
    };
    return f;
}

template <typename G>
void read_geometry(const YAML::Node& node, const std::string& where, const std::vector<GeometryField<G>>& fields,
                   G& g) {
    Section s(node, where);
    for (const auto& [key, member] : fields) {
        s.get(key, g.*member);
    }
    s.finish();
}

void read_material(const YAML::Node& node, MaterialParams& m) {
    Section s(node, "device.material");
    s.get("epsilon_r_semiconductor", m.epsilon_r_semiconductor);
    s.get("epsilon_r_insulator", m.epsilon_r_insulator);
    s.get("n_i", m.n_i);
    s.get("mu_n", m.mu_n);
    s.get("mu_p", m.mu_p);
    s.get("temperature", m.temperature);
    s.get("srh_recombination", m.srh_recombination);
    s.get("tau_n", m.tau_n);
    s.get("tau_p", m.tau_p);
    s.finish();
}

std::vector<double> number_list(const YAML::Node& n, const std::string& where, std::size_t count) {
    if (!n.IsSequence() || n.size() != count) {
        throw ParseError(where + ": expected a list of " + std::to_string(count) + " numbers", line_of(n));
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(number(n[i], where));
    }
    return out;
}

void read_regions(const YAML::Node& node, DeviceSpec& spec) {
    if (!node.IsSequence()) {
        throw ParseError("device.regions: expected a list", line_of(node));
    }
    for (std::size_t i = 0; i < node.size(); ++i) {
        const std::string where = "device.regions[" + std::to_string(i) + "]";
        Section s(node[i], where);
        Region r;
        if (!s.get("name", r.name)) {
            throw ParseError(where + ": missing name", line_of(node[i]));
        }
        const YAML::Node b = s.take("bounds");
        if (!b) {
            throw ParseError(where + ": missing bounds [x0, x1, y0, y1]", line_of(node[i]));
        }
        const auto v = number_list(b, s.path("bounds"), 4);
        r.bounds = {v[0], v[1], v[2], v[3]};
        std::string kind = "semiconductor";
        std::string role = "other";
        s.get("kind", kind);
        s.get("role", role);
        try {
            r.kind = region_kind_from_string(kind);
            r.role = region_role_from_string(role);
        } catch (const Error& e) {
            throw ParseError(where + ": " + e.what(), line_of(node[i]));
        }
        s.get("doping", r.net_doping);
        s.finish();
        spec.regions.push_back(r);
    }
}

void read_contacts(const YAML::Node& node, DeviceSpec& spec) {
    if (!node.IsSequence()) {
        throw ParseError("device.contacts: expected a list", line_of(node));
    }
    for (std::size_t i = 0; i < node.size(); ++i) {
        const std::string where = "device.contacts[" + std::to_string(i) + "]";
        Section s(node[i], where);
        Contact c;
        if (!s.get("name", c.name)) {
            throw ParseError(where + ": missing name", line_of(node[i]));
        }
        const YAML::Node a = s.take("from");
        const YAML::Node b = s.take("to");
        if (!a || !b) {
            throw ParseError(where + ": needs from: [x, y] and to: [x, y]", line_of(node[i]));
        }
        const auto pa = number_list(a, s.path("from"), 2);
        const auto pb = number_list(b, s.path("to"), 2);
        c.a = {pa[0], pa[1]};
        c.b = {pb[0], pb[1]};
        s.finish();
        spec.contacts.push_back(c);
    }
}

void read_device(const YAML::Node& node, DeviceConfig& d) {
    Section s(node, "device");
    s.get("builder", d.builder);
    if (d.builder != "two_drain" && d.builder != "three_drain" && d.builder != "custom") {
        throw ParseError("device.builder: expected two_drain, three_drain or custom, got '" + d.builder + "'",
                         line_of(s.take("builder")));
    }
    s.get("scale", d.scale);
    s.get("depth", d.depth);
    if (const YAML::Node g = s.take("geometry"); g && !g.IsNull()) {
        if (d.builder == "two_drain") {
            read_geometry(g, "device.geometry", two_drain_fields(), d.two_drain);
        } else if (d.builder == "three_drain") {
            read_geometry(g, "device.geometry", three_drain_fields(), d.three_drain);
        } else {
            throw ParseError("device.geometry: not used with builder custom", line_of(g));
        }
    }
    if (const YAML::Node m = s.take("material"); m) {
        read_material(m, d.material);
    }
    if (const YAML::Node m = s.take("mesh"); m) {
        Section ms(m, "device.mesh");
        int nx = static_cast<int>(d.mesh.nx);
        int ny = static_cast<int>(d.mesh.ny);
        ms.get("nx", nx);
        ms.get("ny", ny);
        ms.get("refinement", d.mesh.refinement);
        ms.finish();
        if (nx < 2 || ny < 2) {
            throw ParseError("device.mesh: nx and ny must be at least 2", line_of(m));
        }
        d.mesh.nx = static_cast<std::size_t>(nx);
        d.mesh.ny = static_cast<std::size_t>(ny);
    }
    const YAML::Node regions = s.take("regions");
    const YAML::Node contacts = s.take("contacts");
    if (d.builder == "custom") {
        if (!regions || !contacts) {
            throw ParseError("device: builder custom needs regions and contacts", line_of(node));
        }
        read_regions(regions, d.custom);
        read_contacts(contacts, d.custom);
    } else if (regions || contacts) {
        throw ParseError("device: regions and contacts are only read with builder custom",
                         line_of(regions ? regions : contacts));
    }
    s.finish();
}

std::map<std::string, double> voltage_map(const YAML::Node& n, const std::string& where) {
    std::map<std::string, double> out;
    if (!n || n.IsNull()) {
        return out;
    }
    if (!n.IsMap()) {
        throw ParseError(where + ": expected a mapping of contact: volts", line_of(n));
    }
    for (const auto& kv : n) {
        out[kv.first.Scalar()] = number(kv.second, where + "." + kv.first.Scalar());
    }
    return out;
}

void read_circuit(const YAML::Node& node, CircuitConfig& c) {
    Section s(node, "circuit");
    s.get("load_resistor", c.load_resistor);
    s.get("output_contact", c.output_contact);
    s.get("voltage_tolerance", c.voltage_tolerance);
    if (const YAML::Node d = s.take("drains"); d) {
        c.drain_voltages = voltage_map(d, "circuit.drains");
    }
    if (const YAML::Node g = s.take("gates"); g) {
        c.gate_voltages = voltage_map(g, "circuit.gates");
    }
    s.finish();
}

GateRange read_range(const YAML::Node& n, const std::string& where) {
    const auto v = number_list(n, where, 2);
    return {v[0], v[1]};
}

void read_sweep(const YAML::Node& node, SweepConfig& w) {
    Section s(node, "sweep");
    if (const YAML::Node r = s.take("vg1"); r) {
        w.vg1 = read_range(r, "sweep.vg1");
    }
    if (const YAML::Node r = s.take("vg2"); r) {
        w.vg2 = read_range(r, "sweep.vg2");
    }
    if (const YAML::Node st = s.take("steps"); st) {
        if (st.IsSequence()) {
            if (st.size() != 2) {
                throw ParseError("sweep.steps: expected one integer or a list of two", line_of(st));
            }
            w.steps1 = scalar<int>(st[0], "sweep.steps");
            w.steps2 = scalar<int>(st[1], "sweep.steps");
        } else {
            w.steps1 = w.steps2 = scalar<int>(st, "sweep.steps");
        }
    }
    s.get("tolerance", w.tolerance);
    s.get("contour_spacing", w.contour_spacing);
    s.get("gate1", w.gate1);
    s.get("gate2", w.gate2);
    s.get("jobs", w.jobs);
    s.finish();
    if (w.steps1 < 2 || w.steps2 < 2) {
        throw ParseError("sweep.steps: need at least 2 points per axis", line_of(node));
    }
    if (!(w.tolerance > 0.0 && w.tolerance < 0.5)) {
        throw ParseError("sweep.tolerance: must lie in (0, 0.5)", line_of(node));
    }
    if (!(w.contour_spacing > 0.0)) {
        throw ParseError("sweep.contour_spacing: must be positive", line_of(node));
    }
    if (w.jobs < 0) {
        throw ParseError("sweep.jobs: must be >= 0", line_of(node));
    }
}

void read_solver(const YAML::Node& node, SolverOptions& o) {
    Section s(node, "solver");
    s.get("gummel_tol_psi", o.gummel_tol_psi);
    s.get("gummel_tol_carrier", o.gummel_tol_carrier);
    s.get("max_gummel", o.max_gummel);
    s.get("newton_tol", o.newton_tol);
    s.get("max_newton", o.max_newton);
    s.get("psi_clamp", o.psi_clamp);
    s.get("linear_tol", o.linear_tol);
    s.get("continuation_step_max", o.continuation_step_max);
    s.get("anderson_depth", o.anderson_depth);
    s.finish();
}

std::map<int, double> read_levels(const YAML::Node& n, const std::string& where) {
    if (!n.IsMap()) {
        throw ParseError(where + ": expected a mapping of level: volts", line_of(n));
    }
    std::map<int, double> out;
    for (const auto& kv : n) {
        const int level = scalar<int>(kv.first, where);
        out[level] = number(kv.second, where + "." + kv.first.Scalar());
    }
    return out;
}

std::string resolve(const std::string& base_dir, const std::string& p) {
    if (p.empty() || fs::path(p).is_absolute()) {
        return p;
    }
    return (fs::path(base_dir) / p).lexically_normal().string();
}

void read_logic(const YAML::Node& node, LogicConfig& l, const std::string& base_dir) {
    Section s(node, "logic");
    if (const YAML::Node lv = s.take("levels"); lv) {
        l.levels = read_levels(lv, "logic.levels");
    }
    if (s.get("netlist", l.netlist)) {
        l.netlist = resolve(base_dir, l.netlist);
    }
    s.finish();
}

void read_output(const YAML::Node& node, OutputConfig& o) {
    Section s(node, "output");
    s.get("directory", o.directory);
    s.get("stem", o.stem);
    if (const YAML::Node f = s.take("formats"); f) {
        if (!f.IsSequence()) {
            throw ParseError("output.formats: expected a list", line_of(f));
        }
        o.csv = o.svg = false;
        for (const auto& item : f) {
            const std::string v = scalar<std::string>(item, "output.formats");
            if (v == "csv") {
                o.csv = true;
            } else if (v == "svg") {
                o.svg = true;
            } else {
                throw ParseError("output.formats: unknown format '" + v + "'", line_of(item));
            }
        }
    }
    s.finish();
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) {
        throw IoError("error while reading '" + path + "'");
    }
    return ss.str();
}

}  // namespace

DeviceSpec DeviceConfig::build_spec() const {
    DeviceSpec spec;
    if (builder == "two_drain") {
        spec = build_two_drain_spec(scale, two_drain);
    } else if (builder == "three_drain") {
        spec = build_three_drain_spec(scale, three_drain);
    } else if (builder == "custom") {
        spec = custom;
        spec.scale = scale;
    } else {
        throw InvalidArgument("unknown device builder '" + builder + "'");
    }
    spec.material = material;
    spec.depth = depth;
    return spec;
}

CircuitConfig RunConfig::circuit_template() const {
    CircuitConfig c = circuit;
    for (const auto& g : {sweep.gate1, sweep.gate2}) {
        c.gate_voltages.emplace(g, 0.0);
    }
    return c;
}

CsvMetadata RunConfig::metadata() const {
    CsvMetadata m;
    if (!source_path.empty()) {
        m.entries.emplace_back("config", fs::path(source_path).filename().string());
    }
    m.entries.emplace_back("config_hash", hash);
    m.entries.emplace_back("device", device.builder);
    m.entries.emplace_back("load_resistor_ohm", format_number(circuit.load_resistor));
    m.entries.emplace_back("grid", std::to_string(sweep.steps1) + "x" + std::to_string(sweep.steps2));
    m.entries.emplace_back("voltage_tolerance_V", format_number(circuit.voltage_tolerance));
    return m;
}

RunConfig parse_run_config(const std::string& text, const std::string& base_dir) {
    const YAML::Node root = load_yaml(text);
    RunConfig cfg;
    cfg.hash = config_hash(text);
    Section top(root, "config");
    if (const YAML::Node d = top.take("device"); d) {
        read_device(d, cfg.device);
    }
    if (cfg.device.builder == "three_drain") {
        cfg.circuit.drain_voltages = {{"d1", 0.75}, {"d2", 0.5}, {"d3", 0.25}};
        cfg.circuit.load_resistor = 1e9;
        cfg.sweep.vg1 = cfg.sweep.vg2 = {-8.0, 0.0};
    } else if (cfg.device.builder == "two_drain") {
        cfg.circuit.drain_voltages = {{"d1", 0.75}, {"d2", 0.5}};
        cfg.logic.levels = {{0, 0.0}, {1, -1.5}, {2, -3.0}};
    }
    if (const YAML::Node c = top.take("circuit"); c) {
        read_circuit(c, cfg.circuit);
    }
    if (const YAML::Node w = top.take("sweep"); w) {
        read_sweep(w, cfg.sweep);
    }
    if (const YAML::Node o = top.take("solver"); o) {
        read_solver(o, cfg.solver);
    }
    if (const YAML::Node l = top.take("logic"); l) {
        read_logic(l, cfg.logic, base_dir);
    }
    if (const YAML::Node o = top.take("output"); o) {
        read_output(o, cfg.output);
    }
    top.finish();
    try {
        cfg.solver.validate(cfg.device.material);
    } catch (const InvalidArgument& e) {
        throw ParseError(std::string("solver: ") + e.what(), line_of(root["solver"]));
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    const std::string text = read_text(path);
    const fs::path p(path);
    RunConfig cfg = parse_run_config(text, p.parent_path().empty() ? "." : p.parent_path().string());
    cfg.source_path = path;
    if (cfg.output.stem.empty()) {
        cfg.output.stem = p.stem().string();
    }
    return cfg;
}

void write_device_spec(std::ostream& os, const DeviceSpec& spec) {
    const MaterialParams& m = spec.material;
    os << "device:\n";
    os << "  builder: custom\n";
    os << "  scale: " << format_number(spec.scale) << '\n';
    os << "  depth: " << format_number(spec.depth) << '\n';
    os << "  material:\n";
    os << "    epsilon_r_semiconductor: " << format_number(m.epsilon_r_semiconductor) << '\n';
    os << "    epsilon_r_insulator: " << format_number(m.epsilon_r_insulator) << '\n';
    os << "    n_i: " << format_number(m.n_i) << '\n';
    os << "    mu_n: " << format_number(m.mu_n) << '\n';
    os << "    mu_p: " << format_number(m.mu_p) << '\n';
    os << "    temperature: " << format_number(m.temperature) << '\n';
    os << "    srh_recombination: " << (m.srh_recombination ? "true" : "false") << '\n';
    os << "    tau_n: " << format_number(m.tau_n) << '\n';
    os << "    tau_p: " << format_number(m.tau_p) << '\n';
    os << "  regions:\n";
    for (const auto& r : spec.regions) {
        os << "    - name: " << r.name << '\n';
        os << "      bounds: [" << format_number(r.bounds.x0) << ", " << format_number(r.bounds.x1) << ", "
           << format_number(r.bounds.y0) << ", " << format_number(r.bounds.y1) << "]\n";
        os << "      kind: " << to_string(r.kind) << '\n';
        os << "      role: " << to_string(r.role) << '\n';
        os << "      doping: " << format_number(r.net_doping) << '\n';
    }
    os << "  contacts:\n";
    for (const auto& c : spec.contacts) {
        os << "    - name: " << c.name << '\n';
        os << "      from: [" << format_number(c.a.x) << ", " << format_number(c.a.y) << "]\n";
        os << "      to: [" << format_number(c.b.x) << ", " << format_number(c.b.y) << "]\n";
    }
}

DeviceSpec parse_device_spec(const std::string& text) {
    const YAML::Node root = load_yaml(text);
    Section top(root, "config");
    DeviceConfig d;
    if (const YAML::Node n = top.take("device"); n) {
        read_device(n, d);
    } else {
        throw ParseError("missing device section", 1);
    }
    return d.build_spec();
}

namespace {

Selection parse_selection(const YAML::Node& n, const std::string& where, int n_drains) {
    const std::string v = scalar<std::string>(n, where);
    if (v == "OFF") {
        return Selection::off();
    }
    if (v == "UNDEFINED") {
        return Selection::undefined();
    }
    if (v.size() >= 2 && v[0] == 'd') {
        try {
            std::size_t used = 0;
            const int k = std::stoi(v.substr(1), &used);
            if (used == v.size() - 1 && k >= 1 && k <= n_drains) {
                return Selection::of(k - 1);
            }
        } catch (const std::exception&) {
        }
    }
    throw ParseError(where + ": expected d1..d" + std::to_string(n_drains) + ", OFF or UNDEFINED, got '" + v + "'",
                     line_of(n));
}

std::vector<std::string> name_list(const YAML::Node& n, const std::string& where) {
    std::vector<std::string> out;
    if (n.IsScalar()) {
        out.push_back(n.Scalar());
        return out;
    }
    if (!n.IsSequence()) {
        throw ParseError(where + ": expected a net name or a list of net names", line_of(n));
    }
    for (const auto& item : n) {
        out.push_back(scalar<std::string>(item, where));
    }
    return out;
}

BehavioralMSET read_model(const std::string& name, const YAML::Node& node, const std::string& base_dir,
                          const std::map<int, double>& default_levels) {
    const std::string where = "models." + name;
    Section s(node, where);
    std::string kind = "declared";
    s.get("kind", kind);
    std::map<int, double> levels = default_levels;
    if (const YAML::Node lv = s.take("levels"); lv) {
        levels = read_levels(lv, s.path("levels"));
    }
    int n_gates = 2;
    int n_drains = 2;
    const bool has_gates = s.get("gates", n_gates);
    const bool has_drains = s.get("drains", n_drains);
    const YAML::Node table = s.take("table");
    std::string statemap_path;
    s.get("statemap", statemap_path);
    s.finish();

    auto wrap = [&](const std::function<BehavioralMSET()>& make) {
        try {
            return make();
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            throw ValidationError("model '" + name + "': " + e.what());
        }
    };

    if (kind == "row_column") {
        if ((has_gates && n_gates != 4) || (has_drains && n_drains != 4) || table) {
            throw ParseError(where + ": row_column models have 4 gates, 4 drains and a built-in table",
                             line_of(node));
        }
        return wrap([&] { return declared_mset(4, 4, row_column_table(), levels); });
    }
    if (kind == "statemap") {
        if (statemap_path.empty() || table) {
            throw ParseError(where + ": statemap models need a statemap path and no table", line_of(node));
        }
        const std::string path = resolve(base_dir, statemap_path);
        const StateMap map = read_statemap_csv(path);
        return wrap([&] { return behavioral_from_statemap(map, levels); });
    }
    if (kind != "declared") {
        throw ParseError(where + ".kind: expected declared, row_column or statemap, got '" + kind + "'",
                         line_of(node));
    }
    if (!table || !table.IsSequence()) {
        throw ParseError(where + ": declared models need a table list", line_of(node));
    }
    std::map<GateTuple, Selection> entries;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const std::string w = where + ".table[" + std::to_string(i) + "]";
        Section row(table[i], w);
        const YAML::Node g = row.take("gates");
        const YAML::Node sel = row.take("select");
        row.finish();
        if (!g || !g.IsSequence() || !sel) {
            throw ParseError(w + ": needs gates: [levels...] and select", line_of(table[i]));
        }
        GateTuple t;
        for (const auto& v : g) {
            t.push_back(scalar<int>(v, w + ".gates"));
        }
        if (!entries.emplace(t, parse_selection(sel, w + ".select", n_drains)).second) {
            throw ParseError(w + ": duplicate gate tuple", line_of(table[i]));
        }
    }
    return wrap([&] { return declared_mset(n_gates, n_drains, entries, levels); });
}

NetElement read_element(const YAML::Node& node, std::size_t index) {
    const std::string where = "elements[" + std::to_string(index) + "]";
    Section s(node, where);
    NetElement e;
    if (!s.get("name", e.name)) {
        throw ParseError(where + ": missing name", line_of(node));
    }
    std::string type;
    if (!s.get("type", type)) {
        throw ParseError(where + " '" + e.name + "': missing type", line_of(node));
    }
    static const std::map<std::string, NetElement::Type> types{
        {"input", NetElement::Type::input},       {"constant", NetElement::Type::constant},
        {"inverter", NetElement::Type::inverter}, {"mset", NetElement::Type::mset},
        {"probe", NetElement::Type::probe},
    };
    auto it = types.find(type);
    if (it == types.end()) {
        throw ParseError(where + " '" + e.name + "': unknown type '" + type + "'", line_of(node));
    }
    e.type = it->second;
    if (const YAML::Node in = s.take("input"); in) {
        e.inputs = name_list(in, s.path("input"));
    }
    if (const YAML::Node g = s.take("gates"); g) {
        e.inputs = name_list(g, s.path("gates"));
    }
    if (const YAML::Node d = s.take("drains"); d) {
        e.drains = name_list(d, s.path("drains"));
    }
    s.get("output", e.output);
    s.get("value", e.value);
    s.get("radix", e.radix);
    s.get("model", e.model);
    s.finish();
    if (e.output.empty() && e.type != NetElement::Type::probe) {
        e.output = e.name;
    }
    return e;
}

}  // namespace

NetlistFile parse_netlist(const std::string& text, const std::string& base_dir,
                          const std::map<int, double>& default_levels) {
    const YAML::Node root = load_yaml(text);
    Section top(root, "netlist");
    NetlistFile out;
    if (const YAML::Node models = top.take("models"); models) {
        if (!models.IsMap()) {
            throw ParseError("models: expected a mapping of name: model", line_of(models));
        }
        for (const auto& kv : models) {
            const std::string name = kv.first.Scalar();
            out.net.models[name] = read_model(name, kv.second, base_dir, default_levels);
        }
    }
    const YAML::Node elements = top.take("elements");
    if (!elements || !elements.IsSequence()) {
        throw ParseError("elements: expected a list", line_of(root));
    }
    for (std::size_t i = 0; i < elements.size(); ++i) {
        out.net.elements.push_back(read_element(elements[i], i));
    }
    if (const YAML::Node tt = top.take("truth_table"); tt) {
        Section s(tt, "truth_table");
        if (const YAML::Node en = s.take("enumerate"); en) {
            if (!en.IsMap()) {
                throw ParseError("truth_table.enumerate: expected a mapping of input: [levels]", line_of(en));
            }
            for (const auto& kv : en) {
                std::vector<int> values;
                const std::string w = "truth_table.enumerate." + kv.first.Scalar();
                if (!kv.second.IsSequence()) {
                    throw ParseError(w + ": expected a list of levels", line_of(kv.second));
                }
                for (const auto& v : kv.second) {
                    values.push_back(scalar<int>(v, w));
                }
                out.enumerate.emplace_back(kv.first.Scalar(), values);
            }
        }
        if (const YAML::Node fx = s.take("fixed"); fx) {
            if (!fx.IsMap()) {
                throw ParseError("truth_table.fixed: expected a mapping of input: level", line_of(fx));
            }
            for (const auto& kv : fx) {
                out.fixed[kv.first.Scalar()] = scalar<int>(kv.second, "truth_table.fixed." + kv.first.Scalar());
            }
        }
        s.finish();
    }
    top.finish();
    (void)out.net.evaluation_order();
    return out;
}

NetlistFile load_netlist(const std::string& path, const std::map<int, double>& default_levels) {
    const std::string text = read_text(path);
    const fs::path p(path);
    return parse_netlist(text, p.parent_path().empty() ? "." : p.parent_path().string(), default_levels);
}

}  // namespace mset
