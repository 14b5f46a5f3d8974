#include "mset/device.hpp"

#include "mset/constants.hpp"
#include "mset/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mset {

double MaterialParams::thermal_voltage() const {
    return constants::k_boltzmann * temperature / constants::q;
}

Rect DeviceSpec::bounding_box() const {
    if (regions.empty()) {
        return {};
    }
    Rect box = regions.front().bounds;
    for (const auto& r : regions) {
        box.x0 = std::min(box.x0, r.bounds.x0);
        box.x1 = std::max(box.x1, r.bounds.x1);
        box.y0 = std::min(box.y0, r.bounds.y0);
        box.y1 = std::max(box.y1, r.bounds.y1);
    }
    return box;
}

const Contact* DeviceSpec::find_contact(const std::string& name) const {
    for (const auto& c : contacts) {
        if (c.name == name) {
            return &c;
        }
    }
    return nullptr;
}

std::vector<std::string> DeviceSpec::contact_names() const {
    std::vector<std::string> names;
    names.reserve(contacts.size());
    for (const auto& c : contacts) {
        names.push_back(c.name);
    }
    return names;
}

namespace {

struct Layer {
    std::string name;
    Rect bounds;
    RegionKind kind;
    RegionRole role;
    double doping;
};

// Paints layers in order (later layers win) over `box` filled with
// `background` and returns the result as non-overlapping rectangles. A layer
// that ends up fragmented yields regions named name, name.2, name.3, ...
std::vector<Region> compose_regions(const Rect& box, const Layer& background, const std::vector<Layer>& layers) {
    std::vector<double> xs{box.x0, box.x1};
    std::vector<double> ys{box.y0, box.y1};
    for (const auto& l : layers) {
        xs.push_back(l.bounds.x0);
        xs.push_back(l.bounds.x1);
        ys.push_back(l.bounds.y0);
        ys.push_back(l.bounds.y1);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());

    const std::size_t cx = xs.size() - 1;
    const std::size_t cy = ys.size() - 1;
    // owner index: 0 = background, l+1 = layers[l]
    std::vector<std::size_t> owner(cx * cy, 0);
    for (std::size_t j = 0; j < cy; ++j) {
        for (std::size_t i = 0; i < cx; ++i) {
            const double xm = 0.5 * (xs[i] + xs[i + 1]);
            const double ym = 0.5 * (ys[j] + ys[j + 1]);
            for (std::size_t l = 0; l < layers.size(); ++l) {
                const Rect& b = layers[l].bounds;
                if (xm > b.x0 && xm < b.x1 && ym > b.y0 && ym < b.y1) {
                    owner[j * cx + i] = l + 1;
                }
            }
        }
    }

    // Horizontal strips per row, then grow each strip upward while the rows
    // above hold an identical strip.
    std::vector<bool> used(cx * cy, false);
    std::vector<std::pair<std::size_t, Rect>> pieces;
    for (std::size_t j = 0; j < cy; ++j) {
        std::size_t i = 0;
        while (i < cx) {
            if (used[j * cx + i]) {
                ++i;
                continue;
            }
            const std::size_t o = owner[j * cx + i];
            std::size_t i_end = i;
            while (i_end < cx && owner[j * cx + i_end] == o && !used[j * cx + i_end]) {
                ++i_end;
            }
            std::size_t j_end = j + 1;
            while (j_end < cy) {
                bool same = true;
                for (std::size_t ii = i; ii < i_end && same; ++ii) {
                    same = owner[j_end * cx + ii] == o && !used[j_end * cx + ii];
                }
                // the strip must not extend sideways in the next row
                if (same && i > 0 && owner[j_end * cx + i - 1] == o && !used[j_end * cx + i - 1]) {
                    same = false;
                }
                if (same && i_end < cx && owner[j_end * cx + i_end] == o && !used[j_end * cx + i_end]) {
                    same = false;
                }
                if (!same) {
                    break;
                }
                ++j_end;
            }
            for (std::size_t jj = j; jj < j_end; ++jj) {
                for (std::size_t ii = i; ii < i_end; ++ii) {
                    used[jj * cx + ii] = true;
                }
            }
            pieces.emplace_back(o, Rect{xs[i], xs[i_end], ys[j], ys[j_end]});
            i = i_end;
        }
    }

    std::vector<std::size_t> count(layers.size() + 1, 0);
    std::vector<Region> regions;
    regions.reserve(pieces.size());
    for (const auto& [o, rect] : pieces) {
        const Layer& l = o == 0 ? background : layers[o - 1];
        ++count[o];
        Region r;
        r.name = count[o] == 1 ? l.name : l.name + "." + std::to_string(count[o]);
        r.bounds = rect;
        r.kind = l.kind;
        r.role = l.role;
        r.net_doping = l.kind == RegionKind::insulator ? 0.0 : l.doping;
        regions.push_back(std::move(r));
    }
    return regions;
}

Rect scaled(const Rect& r, double s) { return {r.x0 * s, r.x1 * s, r.y0 * s, r.y1 * s}; }

void check_scale(double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw InvalidArgument("device scale must be positive, got " + std::to_string(scale));
    }
}

}  // namespace

DeviceSpec build_two_drain_spec(double scale, const TwoDrainGeometry& g) {
    check_scale(scale);
    const double cx = 0.5 * g.width;
    const double gl = cx - 0.5 * g.gate_gap;
    const double gr = cx + 0.5 * g.gate_gap;
    const double bl = cx - 0.5 * g.buffer_width;
    const double br = cx + 0.5 * g.buffer_width;
    const double dy0 = g.height - g.drain_thickness;

    const Layer bulk{"bulk", {}, RegionKind::semiconductor, RegionRole::bulk, g.bulk_doping};
    std::vector<Layer> layers{
        {"source", {0.0, g.width, 0.0, g.source_thickness}, RegionKind::semiconductor, RegionRole::source, g.contact_doping},
        {"gate1", {0.0, gl, g.gate_bottom, g.gate_top}, RegionKind::semiconductor, RegionRole::gate, g.gate_doping},
        {"gate2", {gr, g.width, g.gate_bottom, g.gate_top}, RegionKind::semiconductor, RegionRole::gate, g.gate_doping},
        {"buffer", {bl, br, g.buffer_bottom, g.height}, RegionKind::insulator, RegionRole::buffer, 0.0},
        {"drain1", {bl - g.drain_width, bl, dy0, g.height}, RegionKind::semiconductor, RegionRole::drain, g.contact_doping},
        {"drain2", {br, br + g.drain_width, dy0, g.height}, RegionKind::semiconductor, RegionRole::drain, g.contact_doping},
    };
    for (auto& l : layers) {
        l.bounds = scaled(l.bounds, scale);
    }

    DeviceSpec spec;
    spec.scale = scale;
    const Rect box = scaled({0.0, g.width, 0.0, g.height}, scale);
    spec.regions = compose_regions(box, bulk, layers);

    const double s = scale;
    spec.contacts = {
        {"source", {0.0, 0.0}, {g.width * s, 0.0}},
        {"d1", {(bl - g.drain_width) * s, g.height * s}, {bl * s, g.height * s}},
        {"d2", {br * s, g.height * s}, {(br + g.drain_width) * s, g.height * s}},
        {"jg1", {0.0, g.gate_bottom * s}, {0.0, g.gate_top * s}},
        {"jg2", {g.width * s, g.gate_bottom * s}, {g.width * s, g.gate_top * s}},
    };
    return spec;
}

DeviceSpec build_three_drain_spec(double scale, const ThreeDrainGeometry& g) {
    check_scale(scale);
    const double cx = 0.5 * g.width;
    const double gl = cx - 0.5 * g.gate_gap;
    const double gr = cx + 0.5 * g.gate_gap;
    const double ml = cx - 0.5 * g.middle_drain_width;
    const double mr = cx + 0.5 * g.middle_drain_width;
    const double dy0 = g.height - g.drain_thickness;

    const Layer bulk{"bulk", {}, RegionKind::semiconductor, RegionRole::bulk, g.bulk_doping};
    std::vector<Layer> layers{
        {"source", {0.0, g.width, 0.0, g.source_thickness}, RegionKind::semiconductor, RegionRole::source, g.contact_doping},
        {"gate1", {0.0, gl, g.gate_bottom, g.gate_top}, RegionKind::semiconductor, RegionRole::gate, g.gate_doping},
        {"gate2", {gr, g.width, g.gate_bottom, g.gate_top}, RegionKind::semiconductor, RegionRole::gate, g.gate_doping},
        {"n_minus", {cx - 0.5 * g.n_minus_width, cx + 0.5 * g.n_minus_width, g.gate_bottom, g.height}, RegionKind::semiconductor, RegionRole::bulk, g.n_minus_doping},
        {"buffer1", {ml - g.buffer_width, ml, g.buffer_bottom, g.height}, RegionKind::insulator, RegionRole::buffer, 0.0},
        {"buffer2", {mr, mr + g.buffer_width, g.buffer_bottom, g.height}, RegionKind::insulator, RegionRole::buffer, 0.0},
        {"drain1", {ml - g.buffer_width - g.lateral_drain_width, ml - g.buffer_width, dy0, g.height},
         RegionKind::semiconductor, RegionRole::drain, g.contact_doping},
        {"drain2", {ml, mr, dy0, g.height}, RegionKind::semiconductor, RegionRole::drain, g.contact_doping},
        {"drain3", {mr + g.buffer_width, mr + g.buffer_width + g.lateral_drain_width, dy0, g.height},
         RegionKind::semiconductor, RegionRole::drain, g.contact_doping},
    };
    for (auto& l : layers) {
        l.bounds = scaled(l.bounds, scale);
    }

    DeviceSpec spec;
    spec.scale = scale;
    const Rect box = scaled({0.0, g.width, 0.0, g.height}, scale);
    spec.regions = compose_regions(box, bulk, layers);

    const double s = scale;
    const double top = g.height * s;
    const double d1l = ml - g.buffer_width - g.lateral_drain_width;
    const double d3l = mr + g.buffer_width;
    spec.contacts = {
        {"source", {0.0, 0.0}, {g.width * s, 0.0}},
        {"d1", {d1l * s, top}, {(ml - g.buffer_width) * s, top}},
        {"d2", {ml * s, top}, {mr * s, top}},
        {"d3", {d3l * s, top}, {(d3l + g.lateral_drain_width) * s, top}},
        {"jg1", {0.0, g.gate_bottom * s}, {0.0, g.gate_top * s}},
        {"jg2", {g.width * s, g.gate_bottom * s}, {g.width * s, g.gate_top * s}},
    };
    return spec;
}

namespace {

double geometry_eps(const Rect& box) {
    return 1e-9 * std::max({std::abs(box.width()), std::abs(box.height()), 1e-30});
}

double overlap_1d(double a0, double a1, double b0, double b1) {
    return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

}  // namespace

ValidationReport validate_spec(const DeviceSpec& spec) {
    ValidationReport report;
    if (!(spec.scale > 0.0)) {
        report.push_back({"device", "scale must be positive"});
    }
    if (!(spec.depth > 0.0)) {
        report.push_back({"device", "depth must be positive"});
    }
    const MaterialParams& m = spec.material;
    if (!(m.epsilon_r_semiconductor > 0.0 && m.epsilon_r_insulator > 0.0 && m.n_i > 0.0 && m.mu_n > 0.0 &&
          m.mu_p > 0.0 && m.temperature > 0.0 && m.tau_n > 0.0 && m.tau_p > 0.0)) {
        report.push_back({"material", "material parameters must be strictly positive"});
    }
    if (spec.regions.empty()) {
        report.push_back({"device", "no regions"});
        return report;
    }

    const Rect box = spec.bounding_box();
    const double eps = geometry_eps(box);

    for (const auto& r : spec.regions) {
        const Rect& b = r.bounds;
        if (!(b.x0 < b.x1) || !(b.y0 < b.y1)) {
            report.push_back({r.name, "degenerate bounds (need x0 < x1 and y0 < y1)"});
        }
        if (r.kind == RegionKind::insulator && r.net_doping != 0.0) {
            report.push_back({r.name, "insulator region carries nonzero doping"});
        }
        if (r.kind == RegionKind::semiconductor) {
            const double n = r.net_doping;
            bool ok = true;
            switch (r.role) {
                case RegionRole::gate: ok = n < 0.0; break;
                case RegionRole::source:
                case RegionRole::drain:
                case RegionRole::bulk: ok = n > 0.0; break;
                case RegionRole::buffer: ok = false; break;
                case RegionRole::other: break;
            }
            if (!ok) {
                report.push_back({r.name, "doping sign inconsistent with role '" + to_string(r.role) + "'"});
            }
        } else if (r.role != RegionRole::buffer && r.role != RegionRole::other) {
            report.push_back({r.name, "insulator region labelled '" + to_string(r.role) + "'"});
        }
    }

    for (std::size_t a = 0; a < spec.regions.size(); ++a) {
        for (std::size_t b = a + 1; b < spec.regions.size(); ++b) {
            const Rect& ra = spec.regions[a].bounds;
            const Rect& rb = spec.regions[b].bounds;
            const double ox = overlap_1d(ra.x0, ra.x1, rb.x0, rb.x1);
            const double oy = overlap_1d(ra.y0, ra.y1, rb.y0, rb.y1);
            if (ox > eps && oy > eps) {
                report.push_back({spec.regions[a].name, "overlaps region '" + spec.regions[b].name + "'"});
            }
        }
    }

    // Coverage on the compressed grid of all region edges.
    std::vector<double> xs, ys;
    for (const auto& r : spec.regions) {
        xs.insert(xs.end(), {r.bounds.x0, r.bounds.x1});
        ys.insert(ys.end(), {r.bounds.y0, r.bounds.y1});
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    double uncovered = 0.0;
    for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
        for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
            const double xm = 0.5 * (xs[i] + xs[i + 1]);
            const double ym = 0.5 * (ys[j] + ys[j + 1]);
            const bool covered = std::any_of(spec.regions.begin(), spec.regions.end(), [&](const Region& r) {
                return xm > r.bounds.x0 && xm < r.bounds.x1 && ym > r.bounds.y0 && ym < r.bounds.y1;
            });
            if (!covered) {
                uncovered += (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
            }
        }
    }
    if (uncovered > eps * eps) {
        std::ostringstream os;
        os << "regions leave " << uncovered << " um^2 of the bounding box uncovered";
        report.push_back({"device", os.str()});
    }

    for (std::size_t a = 0; a < spec.contacts.size(); ++a) {
        const Contact& c = spec.contacts[a];
        for (std::size_t b = 0; b < a; ++b) {
            if (spec.contacts[b].name == c.name) {
                report.push_back({c.name, "duplicate contact name"});
            }
        }
        const bool vertical = std::abs(c.a.x - c.b.x) <= eps;
        const bool horizontal = std::abs(c.a.y - c.b.y) <= eps;
        if (vertical == horizontal) {
            report.push_back({c.name, "contact segment must be a non-degenerate axis-aligned span"});
            continue;
        }
        const double lo = vertical ? std::min(c.a.y, c.b.y) : std::min(c.a.x, c.b.x);
        const double hi = vertical ? std::max(c.a.y, c.b.y) : std::max(c.a.x, c.b.x);
        const double at = vertical ? c.a.x : c.a.y;
        const double box_lo = vertical ? box.x0 : box.y0;
        const double box_hi = vertical ? box.x1 : box.y1;
        if (std::abs(at - box_lo) > eps && std::abs(at - box_hi) > eps) {
            report.push_back({c.name, "contact does not lie on the device boundary"});
            continue;
        }
        // Regions whose boundary edge contains part of the segment.
        std::vector<const Region*> touching;
        for (const auto& r : spec.regions) {
            const Rect& b = r.bounds;
            const double edge_lo = vertical ? b.y0 : b.x0;
            const double edge_hi = vertical ? b.y1 : b.x1;
            const bool on_edge = vertical ? (std::abs(b.x0 - at) <= eps || std::abs(b.x1 - at) <= eps)
                                          : (std::abs(b.y0 - at) <= eps || std::abs(b.y1 - at) <= eps);
            if (on_edge && overlap_1d(lo, hi, edge_lo, edge_hi) > eps) {
                touching.push_back(&r);
            }
        }
        if (touching.size() != 1) {
            report.push_back({c.name, "contact touches " + std::to_string(touching.size()) +
                                          " regions (expected exactly one)"});
        } else if (touching.front()->kind != RegionKind::semiconductor) {
            report.push_back({c.name, "contact lies on insulator region '" + touching.front()->name + "'"});
        }
    }
    return report;
}

void require_valid(const DeviceSpec& spec) {
    const auto report = validate_spec(spec);
    if (!report.empty()) {
        std::ostringstream os;
        os << "invalid device spec:";
        for (const auto& v : report) {
            os << "\n  " << v.subject << ": " << v.message;
        }
        throw ValidationError(os.str());
    }
}

double depletion_width(double doping, const MaterialParams& m, double reverse_bias) {
    const double n = std::abs(doping);
    if (n <= 0.0) {
        return 0.0;
    }
    const double vt = m.thermal_voltage();
    const double n_plus = 5e19;
    const double vbi = vt * std::log(n_plus * n / (m.n_i * m.n_i));
    const double eps = m.epsilon_r_semiconductor * constants::epsilon_0;
    const double w_cm = std::sqrt(2.0 * eps * std::max(vbi + reverse_bias, 0.0) / (constants::q * n));
    return w_cm / constants::cm_per_um;
}

const std::vector<std::size_t>& Mesh::nodes_of(const std::string& contact) const {
    auto it = contact_nodes.find(contact);
    if (it == contact_nodes.end()) {
        throw InvalidArgument("unknown contact '" + contact + "'");
    }
    return it->second;
}

double Mesh::effective_doping(std::size_t k) const {
    return semi_volumes[k] > 0.0 ? doping_integral[k] / semi_volumes[k] : 0.0;
}

namespace {

struct Zone {
    double lo, hi;
};

std::vector<double> axis_lines(double lo, double hi, std::vector<double> breaks, const std::vector<Zone>& zones,
                               std::size_t target, double refinement) {
    const double span = hi - lo;
    const double eps = 1e-9 * span;
    const double h = span / static_cast<double>(target - 1);

    for (const auto& z : zones) {
        breaks.push_back(std::clamp(z.lo, lo, hi));
        breaks.push_back(std::clamp(z.hi, lo, hi));
    }
    breaks.push_back(lo);
    breaks.push_back(hi);
    std::sort(breaks.begin(), breaks.end());
    std::vector<double> split;
    for (double b : breaks) {
        if (b < lo - eps || b > hi + eps) {
            continue;
        }
        if (split.empty() || b - split.back() > eps) {
            split.push_back(b);
        }
    }
    split.front() = lo;
    split.back() = hi;

    std::vector<double> lines{lo};
    for (std::size_t s = 0; s + 1 < split.size(); ++s) {
        const double u = split[s];
        const double v = split[s + 1];
        const double mid = 0.5 * (u + v);
        const bool refined = std::any_of(zones.begin(), zones.end(),
                                         [&](const Zone& z) { return mid > z.lo && mid < z.hi; });
        const double hl = refined ? h / refinement : h;
        const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil((v - u) / hl - 1e-9)));
        for (std::size_t k = 1; k < n; ++k) {
            lines.push_back(u + (v - u) * static_cast<double>(k) / static_cast<double>(n));
        }
        lines.push_back(v);
    }
    return lines;
}

}  // namespace

Mesh generate_mesh(const DeviceSpec& spec, const MeshResolution& res) {
    require_valid(spec);
    if (res.nx < 2 || res.ny < 2) {
        throw InvalidArgument("mesh resolution needs at least 2 nodes per axis");
    }
    if (!(res.refinement >= 1.0)) {
        throw InvalidArgument("mesh refinement factor must be >= 1");
    }
    const Rect box = spec.bounding_box();
    const double hx = box.width() / static_cast<double>(res.nx - 1);
    const double hy = box.height() / static_cast<double>(res.ny - 1);
    const double tol = 1e-9;
    for (const auto& r : spec.regions) {
        if (r.bounds.width() < hx * (1.0 - tol) || r.bounds.height() < hy * (1.0 - tol)) {
            throw InvalidArgument("mesh resolution too coarse to resolve region '" + r.name + "'");
        }
    }

    std::vector<double> bx, by;
    for (const auto& r : spec.regions) {
        bx.insert(bx.end(), {r.bounds.x0, r.bounds.x1});
        by.insert(by.end(), {r.bounds.y0, r.bounds.y1});
    }
    for (const auto& c : spec.contacts) {
        bx.insert(bx.end(), {c.a.x, c.b.x});
        by.insert(by.end(), {c.a.y, c.b.y});
    }

    // p/n junction faces get a refined band one depletion width wide on each
    // side. The band is measured in unscaled device units so that meshes of
    // scaled devices are exact dilations of each other.
    std::vector<Zone> zx, zy;
    const double eps = geometry_eps(box);
    for (std::size_t a = 0; a < spec.regions.size(); ++a) {
        for (std::size_t b = 0; b < spec.regions.size(); ++b) {
            const Region& ra = spec.regions[a];
            const Region& rb = spec.regions[b];
            if (a == b || ra.kind != RegionKind::semiconductor || rb.kind != RegionKind::semiconductor ||
                ra.net_doping * rb.net_doping >= 0.0) {
                continue;
            }
            const double light = std::min(std::abs(ra.net_doping), std::abs(rb.net_doping));
            const double w = depletion_width(light, spec.material) * spec.scale;
            if (std::abs(ra.bounds.x1 - rb.bounds.x0) <= eps &&
                overlap_1d(ra.bounds.y0, ra.bounds.y1, rb.bounds.y0, rb.bounds.y1) > eps) {
                zx.push_back({ra.bounds.x1 - w, ra.bounds.x1 + w});
            }
            if (std::abs(ra.bounds.y1 - rb.bounds.y0) <= eps &&
                overlap_1d(ra.bounds.x0, ra.bounds.x1, rb.bounds.x0, rb.bounds.x1) > eps) {
                zy.push_back({ra.bounds.y1 - w, ra.bounds.y1 + w});
            }
        }
    }

    Mesh mesh;
    mesh.material = spec.material;
    mesh.depth = spec.depth;
    mesh.x_lines = axis_lines(box.x0, box.x1, bx, zx, res.nx, res.refinement);
    mesh.y_lines = axis_lines(box.y0, box.y1, by, zy, res.ny, res.refinement);

    const std::size_t nx = mesh.nx();
    const std::size_t ny = mesh.ny();
    const std::size_t nn = nx * ny;
    const std::size_t cx = nx - 1;

    mesh.cell_region.assign(cx * (ny - 1), 0);
    for (std::size_t j = 0; j + 1 < ny; ++j) {
        for (std::size_t i = 0; i + 1 < nx; ++i) {
            const double xm = 0.5 * (mesh.x_lines[i] + mesh.x_lines[i + 1]);
            const double ym = 0.5 * (mesh.y_lines[j] + mesh.y_lines[j + 1]);
            std::size_t owner = spec.regions.size();
            for (std::size_t r = 0; r < spec.regions.size(); ++r) {
                const Rect& b = spec.regions[r].bounds;
                if (xm > b.x0 && xm < b.x1 && ym > b.y0 && ym < b.y1) {
                    owner = r;
                    break;
                }
            }
            if (owner == spec.regions.size()) {
                throw ValidationError("mesh cell not covered by any region");
            }
            mesh.cell_region[j * cx + i] = owner;
        }
    }
    auto cell_semi = [&](std::size_t ci) {
        return spec.regions[mesh.cell_region[ci]].kind == RegionKind::semiconductor;
    };
    auto cell_eps = [&](std::size_t ci) {
        return cell_semi(ci) ? spec.material.epsilon_r_semiconductor : spec.material.epsilon_r_insulator;
    };

    mesh.node_doping.assign(nn, 0.0);
    mesh.node_kind.assign(nn, NodeKind::insulator);
    mesh.node_region.assign(nn, 0);
    mesh.control_volumes.assign(nn, 0.0);
    mesh.semi_volumes.assign(nn, 0.0);
    mesh.doping_integral.assign(nn, 0.0);

    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
            const std::size_t k = j * nx + i;
            std::size_t owner = spec.regions.size();
            std::size_t first = spec.regions.size();
            for (std::size_t dj = 0; dj < 2; ++dj) {
                for (std::size_t di = 0; di < 2; ++di) {
                    if (i + di < 1 || j + dj < 1 || i + di > cx || j + dj > ny - 1) {
                        continue;
                    }
                    const std::size_t ci = (j + dj - 1) * cx + (i + di - 1);
                    const std::size_t r = mesh.cell_region[ci];
                    const double quarter = 0.25 * (mesh.x_lines[i + di] - mesh.x_lines[i + di - 1]) *
                                           (mesh.y_lines[j + dj] - mesh.y_lines[j + dj - 1]);
                    mesh.control_volumes[k] += quarter;
                    first = std::min(first, r);
                    if (cell_semi(ci)) {
                        mesh.semi_volumes[k] += quarter;
                        mesh.doping_integral[k] += quarter * spec.regions[r].net_doping;
                        if (owner == spec.regions.size() ||
                            std::abs(spec.regions[r].net_doping) > std::abs(spec.regions[owner].net_doping) ||
                            (std::abs(spec.regions[r].net_doping) == std::abs(spec.regions[owner].net_doping) &&
                             r < owner)) {
                            owner = r;
                        }
                    }
                }
            }
            if (owner != spec.regions.size()) {
                mesh.node_kind[k] = NodeKind::semiconductor;
                mesh.node_region[k] = owner;
                mesh.node_doping[k] = spec.regions[owner].net_doping;
            } else {
                mesh.node_region[k] = first;
            }
        }
    }

    mesh.node_edges.assign(nn, {});
    auto add_edge = [&](MeshEdge e) {
        const std::size_t id = mesh.edges.size();
        mesh.node_edges[e.a].push_back(id);
        mesh.node_edges[e.b].push_back(id);
        mesh.edges.push_back(e);
    };
    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i + 1 < nx; ++i) {
            MeshEdge e;
            e.a = j * nx + i;
            e.b = e.a + 1;
            e.length = mesh.x_lines[i + 1] - mesh.x_lines[i];
            for (int side = 0; side < 2; ++side) {
                const bool above = side == 0;
                if ((above && j + 1 >= ny) || (!above && j == 0)) {
                    continue;
                }
                const std::size_t cj = above ? j : j - 1;
                const std::size_t ci = cj * cx + i;
                const double half = 0.5 * (mesh.y_lines[cj + 1] - mesh.y_lines[cj]);
                e.face += half;
                e.face_eps += half * cell_eps(ci);
                if (cell_semi(ci)) {
                    e.face_semi += half;
                }
            }
            add_edge(e);
        }
    }
    for (std::size_t j = 0; j + 1 < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
            MeshEdge e;
            e.a = j * nx + i;
            e.b = e.a + nx;
            e.length = mesh.y_lines[j + 1] - mesh.y_lines[j];
            for (int side = 0; side < 2; ++side) {
                const bool right = side == 0;
                if ((right && i + 1 >= nx) || (!right && i == 0)) {
                    continue;
                }
                const std::size_t ci_x = right ? i : i - 1;
                const std::size_t ci = j * cx + ci_x;
                const double half = 0.5 * (mesh.x_lines[ci_x + 1] - mesh.x_lines[ci_x]);
                e.face += half;
                e.face_eps += half * cell_eps(ci);
                if (cell_semi(ci)) {
                    e.face_semi += half;
                }
            }
            add_edge(e);
        }
    }

    const double ceps = geometry_eps(box);
    for (const auto& c : spec.contacts) {
        std::vector<std::size_t> nodes;
        const double xlo = std::min(c.a.x, c.b.x) - ceps, xhi = std::max(c.a.x, c.b.x) + ceps;
        const double ylo = std::min(c.a.y, c.b.y) - ceps, yhi = std::max(c.a.y, c.b.y) + ceps;
        for (std::size_t k = 0; k < nn; ++k) {
            const Point p = mesh.position(k);
            if (p.x >= xlo && p.x <= xhi && p.y >= ylo && p.y <= yhi) {
                nodes.push_back(k);
            }
        }
        if (nodes.empty()) {
            throw ValidationError("contact '" + c.name + "' maps to no mesh node");
        }
        // The single semiconductor region the contact touches.
        double doping = 0.0;
        for (const auto& r : spec.regions) {
            const Rect& b = r.bounds;
            const Point mid{0.5 * (c.a.x + c.b.x), 0.5 * (c.a.y + c.b.y)};
            if (r.kind == RegionKind::semiconductor && mid.x >= b.x0 - ceps && mid.x <= b.x1 + ceps &&
                mid.y >= b.y0 - ceps && mid.y <= b.y1 + ceps) {
                doping = r.net_doping;
                break;
            }
        }
        mesh.contact_nodes[c.name] = std::move(nodes);
        mesh.contact_doping[c.name] = doping;
    }
    return mesh;
}

std::string to_string(RegionKind kind) {
    return kind == RegionKind::semiconductor ? "semiconductor" : "insulator";
}

std::string to_string(RegionRole role) {
    switch (role) {
        case RegionRole::bulk: return "bulk";
        case RegionRole::gate: return "gate";
        case RegionRole::source: return "source";
        case RegionRole::drain: return "drain";
        case RegionRole::buffer: return "buffer";
        case RegionRole::other: return "other";
    }
    return "other";
}

RegionKind region_kind_from_string(const std::string& s) {
    if (s == "semiconductor") return RegionKind::semiconductor;
    if (s == "insulator") return RegionKind::insulator;
    throw InvalidArgument("unknown region kind '" + s + "'");
}

RegionRole region_role_from_string(const std::string& s) {
    for (auto r : {RegionRole::bulk, RegionRole::gate, RegionRole::source, RegionRole::drain, RegionRole::buffer,
                   RegionRole::other}) {
        if (to_string(r) == s) return r;
    }
    throw InvalidArgument("unknown region role '" + s + "'");
}

}  // namespace mset
