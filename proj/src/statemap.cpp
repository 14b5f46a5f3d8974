#include "mset/statemap.hpp"

#include "mset/format.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

namespace mset {

std::string to_string(const StateLabel& label) {
    switch (label.kind) {
        case StateLabel::Kind::state: return "S" + std::to_string(label.drain);
        case StateLabel::Kind::off: return "OFF";
        case StateLabel::Kind::undefined: return "UNDEFINED";
        case StateLabel::Kind::failed: return "FAILED";
    }
    return "UNDEFINED";
}

StateLabel parse_label(const std::string& text) {
    if (text == "OFF") return StateLabel::off();
    if (text == "UNDEFINED") return StateLabel::undefined();
    if (text == "FAILED") return StateLabel::failed();
    if (text.size() >= 2 && text[0] == 'S') {
        int k = 0;
        const auto res = std::from_chars(text.data() + 1, text.data() + text.size(), k);
        if (res.ec == std::errc() && res.ptr == text.data() + text.size() && k >= 1) {
            return StateLabel::selected(k);
        }
    }
    throw ParseError("unknown state label '" + text + "'");
}

StateLabel classify(double v_out, const std::vector<double>& drain_voltages, double tolerance) {
    if (drain_voltages.empty()) {
        throw InvalidArgument("classify needs at least one drain voltage");
    }
    if (!(tolerance > 0.0 && tolerance < 0.5)) {
        throw InvalidArgument("classification tolerance must lie in (0, 0.5)");
    }
    if (std::isnan(v_out)) {
        return StateLabel::failed();
    }
    int best = 0;
    double best_dist = INFINITY;
    for (std::size_t k = 0; k < drain_voltages.size(); ++k) {
        const double vd = drain_voltages[k];
        const double dist = std::abs(v_out - vd);
        if (dist <= tolerance * std::abs(vd) && dist < best_dist) {
            best = static_cast<int>(k) + 1;
            best_dist = dist;
        }
    }
    if (best > 0) {
        return StateLabel::selected(best);
    }
    const double vmin = *std::min_element(drain_voltages.begin(), drain_voltages.end());
    if (std::abs(v_out) <= tolerance * std::abs(vmin)) {
        return StateLabel::off();
    }
    return StateLabel::undefined();
}

std::size_t StateMap::count(const StateLabel& label) const {
    std::size_t n = 0;
    for (const auto& row : labels) {
        n += static_cast<std::size_t>(std::count(row.begin(), row.end(), label));
    }
    return n;
}

void StateMap::check() const {
    if (v_out.size() != rows() || labels.size() != rows()) {
        throw ValidationError("state map row count does not match the vg1 axis");
    }
    const double vmax = drain_voltages.empty() ? 0.0 : *std::max_element(drain_voltages.begin(), drain_voltages.end());
    for (std::size_t i = 0; i < rows(); ++i) {
        if (v_out[i].size() != cols() || labels[i].size() != cols()) {
            throw ValidationError("state map row " + std::to_string(i) + " does not match the vg2 axis");
        }
        for (std::size_t j = 0; j < cols(); ++j) {
            if (labels[i][j].kind == StateLabel::Kind::failed) {
                continue;
            }
            if (!(v_out[i][j] >= 0.0 && v_out[i][j] <= vmax)) {
                throw ValidationError("v_out at (" + std::to_string(i) + ", " + std::to_string(j) +
                                      ") is outside [0, max drain voltage]");
            }
        }
    }
}

std::vector<double> linspace(const GateRange& range, int steps) {
    if (steps < 2) {
        throw InvalidArgument("a sweep axis needs at least 2 steps");
    }
    if (!(range.max > range.min)) {
        throw InvalidArgument("degenerate sweep range [" + format_number(range.min) + ", " + format_number(range.max) +
                              "]");
    }
    std::vector<double> v(static_cast<std::size_t>(steps));
    for (int k = 0; k < steps; ++k) {
        v[static_cast<std::size_t>(k)] = range.min + (range.max - range.min) * k / (steps - 1);
    }
    v.back() = range.max;
    return v;
}

std::vector<std::pair<std::size_t, std::size_t>> serpentine_order(std::size_t n1, std::size_t n2) {
    std::vector<std::pair<std::size_t, std::size_t>> order;
    order.reserve(n1 * n2);
    for (std::size_t i = 0; i < n1; ++i) {
        for (std::size_t jj = 0; jj < n2; ++jj) {
            order.emplace_back(i, i % 2 == 0 ? jj : n2 - 1 - jj);
        }
    }
    return order;
}

StateMap sweep_gates(const Mesh& mesh, const CircuitConfig& circuit_template, const GateRange& vg1,
                     const GateRange& vg2, int steps1, int steps2, const SolverOptions& opts,
                     const SweepOptions& sweep) {
    StateMap map;
    map.vg1_axis = linspace(vg1, steps1);
    map.vg2_axis = linspace(vg2, steps2);
    map.tolerance = sweep.tolerance;
    for (const auto& [name, v] : circuit_template.drain_voltages) {
        map.drain_voltages.push_back(v);
    }
    classify(0.0, map.drain_voltages, sweep.tolerance);  // validates tolerance and drains
    CircuitConfig base = circuit_template;
    base.gate_voltages[sweep.gate1] = map.vg1_axis.front();
    base.gate_voltages[sweep.gate2] = map.vg2_axis.front();
    base.validate(mesh);
    opts.validate(mesh.material);

    const std::size_t n1 = map.rows();
    const std::size_t n2 = map.cols();
    map.v_out.assign(n1, std::vector<double>(n2, NAN));
    map.labels.assign(n1, std::vector<StateLabel>(n2, StateLabel::failed()));
    std::vector<std::vector<std::string>> row_failures(n1);
    std::mutex progress_mutex;
    std::size_t done = 0;

    auto solve_cell = [&](std::size_t i, std::size_t j, std::optional<OperatingPoint>& warm) {
        CircuitConfig c = base;
        c.gate_voltages[sweep.gate1] = map.vg1_axis[i];
        c.gate_voltages[sweep.gate2] = map.vg2_axis[j];
        try {
            OperatingPoint op = solve_operating_point(mesh, c, opts, warm ? &*warm : nullptr);
            map.v_out[i][j] = op.v_out;
            map.labels[i][j] = classify(op.v_out, map.drain_voltages, map.tolerance);
            if (sweep.on_point) {
                std::lock_guard lock(progress_mutex);
                sweep.on_point(i, j, op);
            }
            warm = std::move(op);
        } catch (const Error& e) {
            row_failures[i].push_back("(" + format_number(map.vg1_axis[i]) + ", " + format_number(map.vg2_axis[j]) +
                                      "): " + e.what());
        }
        if (sweep.progress) {
            std::lock_guard lock(progress_mutex);
            sweep.progress(++done, n1 * n2);
        }
    };

    if (sweep.jobs <= 1) {
        std::optional<OperatingPoint> warm;
        for (const auto& [i, j] : serpentine_order(n1, n2)) {
            solve_cell(i, j, warm);
        }
    } else {
        std::atomic<std::size_t> next_row{0};
        auto worker = [&] {
            for (std::size_t i = next_row++; i < n1; i = next_row++) {
                std::optional<OperatingPoint> warm;
                for (std::size_t j = 0; j < n2; ++j) {
                    solve_cell(i, j, warm);
                }
            }
        };
        const auto nthreads = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(sweep.jobs), n1));
        std::vector<std::thread> threads;
        threads.reserve(nthreads);
        for (std::size_t t = 0; t < nthreads; ++t) {
            threads.emplace_back(worker);
        }
        for (auto& t : threads) {
            t.join();
        }
    }
    for (auto& f : row_failures) {
        map.failures.insert(map.failures.end(), f.begin(), f.end());
    }
    return map;
}

void relabel(StateMap& map, double tolerance) {
    map.tolerance = tolerance;
    map.labels.resize(map.rows());
    for (std::size_t i = 0; i < map.rows(); ++i) {
        map.labels[i].resize(map.cols(), StateLabel::undefined());
    }
    for (std::size_t i = 0; i < map.rows(); ++i) {
        for (std::size_t j = 0; j < map.cols(); ++j) {
            if (map.labels[i][j].kind != StateLabel::Kind::failed) {
                map.labels[i][j] = classify(map.v_out[i][j], map.drain_voltages, tolerance);
            }
        }
    }
}

namespace {

// Edge keys: horizontal edge (i,j)-(i+1,j) and vertical edge (i,j)-(i,j+1).
struct EdgeKey {
    std::size_t i;
    std::size_t j;
    bool vertical;
    auto operator<=>(const EdgeKey&) const = default;
};

std::vector<Polyline> march(const std::vector<double>& x, const std::vector<double>& y,
                            const std::vector<std::vector<double>>& f, double level) {
    const std::size_t nx = x.size();
    const std::size_t ny = y.size();
    auto above = [&](std::size_t i, std::size_t j) { return f[i][j] > level; };
    auto point = [&](const EdgeKey& e) {
        const std::size_t i2 = e.vertical ? e.i : e.i + 1;
        const std::size_t j2 = e.vertical ? e.j + 1 : e.j;
        const double fa = f[e.i][e.j];
        const double fb = f[i2][j2];
        const double t = (level - fa) / (fb - fa);
        return std::make_pair(x[e.i] + t * (x[i2] - x[e.i]), y[e.j] + t * (y[j2] - y[e.j]));
    };

    std::vector<std::pair<EdgeKey, EdgeKey>> segments;
    for (std::size_t i = 0; i + 1 < nx; ++i) {
        for (std::size_t j = 0; j + 1 < ny; ++j) {
            const double c00 = f[i][j], c10 = f[i + 1][j], c11 = f[i + 1][j + 1], c01 = f[i][j + 1];
            if (std::isnan(c00) || std::isnan(c10) || std::isnan(c11) || std::isnan(c01)) {
                continue;
            }
            const bool a00 = above(i, j), a10 = above(i + 1, j), a11 = above(i + 1, j + 1), a01 = above(i, j + 1);
            const EdgeKey bottom{i, j, false}, right{i + 1, j, true}, top{i, j + 1, false}, left{i, j, true};
            std::vector<EdgeKey> cut;
            if (a00 != a10) cut.push_back(bottom);
            if (a10 != a11) cut.push_back(right);
            if (a11 != a01) cut.push_back(top);
            if (a01 != a00) cut.push_back(left);
            if (cut.size() == 2) {
                segments.emplace_back(cut[0], cut[1]);
            } else if (cut.size() == 4) {
                const bool center = 0.25 * (c00 + c10 + c11 + c01) > level;
                if (center == a00) {
                    // 00 and 11 joined through the center; 10 and 01 cut off
                    segments.emplace_back(bottom, right);
                    segments.emplace_back(left, top);
                } else {
                    segments.emplace_back(bottom, left);
                    segments.emplace_back(right, top);
                }
            }
        }
    }

    std::map<EdgeKey, std::vector<std::size_t>> at_edge;
    for (std::size_t s = 0; s < segments.size(); ++s) {
        at_edge[segments[s].first].push_back(s);
        at_edge[segments[s].second].push_back(s);
    }
    std::vector<bool> used(segments.size(), false);
    std::vector<Polyline> lines;
    auto trace_from = [&](std::size_t s0, const EdgeKey& start) {
        Polyline pl;
        pl.points.push_back(point(start));
        EdgeKey cur = start;
        std::size_t s = s0;
        while (true) {
            used[s] = true;
            const EdgeKey nxt = segments[s].first == cur ? segments[s].second : segments[s].first;
            pl.points.push_back(point(nxt));
            cur = nxt;
            std::size_t found = segments.size();
            for (std::size_t cand : at_edge[cur]) {
                if (!used[cand]) {
                    found = cand;
                    break;
                }
            }
            if (found == segments.size()) {
                break;
            }
            s = found;
        }
        if (pl.points.size() > 2 && cur == start) {
            pl.closed = true;
            pl.points.pop_back();
        }
        lines.push_back(std::move(pl));
    };
    // open chains start at edges touched by a single segment
    for (const auto& [edge, segs] : at_edge) {
        if (segs.size() == 1 && !used[segs[0]]) {
            trace_from(segs[0], edge);
        }
    }
    for (std::size_t s = 0; s < segments.size(); ++s) {
        if (!used[s]) {
            trace_from(s, segments[s].first);
        }
    }
    return lines;
}

}  // namespace

std::vector<ContourSet> contour_field(const std::vector<double>& x, const std::vector<double>& y,
                                      const std::vector<std::vector<double>>& field, double spacing) {
    if (!(spacing > 0.0)) {
        throw InvalidArgument("contour spacing must be positive");
    }
    if (field.size() != x.size()) {
        throw InvalidArgument("field rows do not match the x axis");
    }
    double lo = INFINITY;
    double hi = -INFINITY;
    for (const auto& row : field) {
        if (row.size() != y.size()) {
            throw InvalidArgument("field columns do not match the y axis");
        }
        for (double v : row) {
            if (!std::isnan(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
    }
    std::vector<ContourSet> out;
    if (!(hi > lo)) {
        return out;
    }
    for (auto k = static_cast<long long>(std::ceil(lo / spacing)); k * spacing < hi; ++k) {
        const double level = static_cast<double>(k) * spacing;
        if (!(level > lo)) {
            continue;
        }
        ContourSet cs;
        cs.level = level;
        cs.polylines = march(x, y, field, level);
        if (!cs.polylines.empty()) {
            out.push_back(std::move(cs));
        }
    }
    return out;
}

std::vector<ContourSet> extract_isolines(const StateMap& map, double spacing) {
    return contour_field(map.vg1_axis, map.vg2_axis, map.v_out, spacing);
}

std::vector<std::pair<StateLabel, std::vector<Polyline>>> state_boundaries(const StateMap& map) {
    std::set<std::pair<int, int>> present;
    for (const auto& row : map.labels) {
        for (const auto& l : row) {
            if (l.kind == StateLabel::Kind::state || l.kind == StateLabel::Kind::off) {
                present.emplace(static_cast<int>(l.kind), l.drain);
            }
        }
    }
    std::vector<std::pair<StateLabel, std::vector<Polyline>>> out;
    const std::size_t n1 = map.rows();
    const std::size_t n2 = map.cols();
    if (n1 < 2 || n2 < 2) {
        return out;
    }
    // Pad with a ring of zeros so regions touching the sweep border close on it.
    std::vector<double> x(n1 + 2);
    std::vector<double> y(n2 + 2);
    for (std::size_t i = 0; i < n1; ++i) x[i + 1] = map.vg1_axis[i];
    for (std::size_t j = 0; j < n2; ++j) y[j + 1] = map.vg2_axis[j];
    x.front() = 2 * x[1] - x[2];
    x.back() = 2 * x[n1] - x[n1 - 1];
    y.front() = 2 * y[1] - y[2];
    y.back() = 2 * y[n2] - y[n2 - 1];
    for (const auto& [kind, drain] : present) {
        const StateLabel label{static_cast<StateLabel::Kind>(kind), drain};
        std::vector<std::vector<double>> ind(n1 + 2, std::vector<double>(n2 + 2, 0.0));
        for (std::size_t i = 0; i < n1; ++i) {
            for (std::size_t j = 0; j < n2; ++j) {
                const StateLabel& l = map.labels[i][j];
                ind[i + 1][j + 1] = l.kind == StateLabel::Kind::failed ? NAN : (l == label ? 1.0 : 0.0);
            }
        }
        std::vector<Polyline> lines = march(x, y, ind, 0.5);
        for (auto& pl : lines) {
            for (auto& [px, py] : pl.points) {
                px = std::clamp(px, map.vg1_axis.front(), map.vg1_axis.back());
                py = std::clamp(py, map.vg2_axis.front(), map.vg2_axis.back());
            }
        }
        out.emplace_back(label, std::move(lines));
    }
    return out;
}

void write_statemap_csv(std::ostream& os, const StateMap& map, const CsvMetadata& meta) {
    os << "# drain_voltages: ";
    for (std::size_t k = 0; k < map.drain_voltages.size(); ++k) {
        os << (k ? ";" : "") << format_number(map.drain_voltages[k]);
    }
    os << "\n# tolerance: " << format_number(map.tolerance) << '\n';
    for (const auto& [key, value] : meta.entries) {
        os << "# " << key << ": " << value << '\n';
    }
    os << "vg1_V,vg2_V,vout_V,label\n";
    for (std::size_t i = 0; i < map.rows(); ++i) {
        for (std::size_t j = 0; j < map.cols(); ++j) {
            const bool failed = map.labels[i][j].kind == StateLabel::Kind::failed;
            os << format_number(map.vg1_axis[i]) << ',' << format_number(map.vg2_axis[j]) << ','
               << (failed ? std::string() : format_number(map.v_out[i][j])) << ',' << to_string(map.labels[i][j])
               << '\n';
        }
    }
}

void write_statemap_csv(const std::string& path, const StateMap& map, const CsvMetadata& meta) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    write_statemap_csv(f, map, meta);
    if (!f) {
        throw IoError("failed writing '" + path + "'");
    }
}

namespace {

double parse_double(const std::string& s, int line) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    const auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e) {
        throw ParseError("'" + s + "' is not a number", line);
    }
    return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) {
        out.push_back(cur);
    }
    if (!s.empty() && s.back() == sep) {
        out.emplace_back();
    }
    return out;
}

}  // namespace

StateMap read_statemap_csv(std::istream& is, CsvMetadata* meta) {
    StateMap map;
    std::string line;
    int lineno = 0;
    bool header = false;
    bool have_drains = false;
    std::vector<std::tuple<double, double, std::string, std::string, int>> rows;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!header && line.rfind("# ", 0) == 0) {
            const auto colon = line.find(": ");
            if (colon == std::string::npos) {
                throw ParseError("metadata line without ': '", lineno);
            }
            const std::string key = line.substr(2, colon - 2);
            const std::string value = line.substr(colon + 2);
            if (key == "drain_voltages") {
                for (const auto& part : split(value, ';')) {
                    map.drain_voltages.push_back(parse_double(part, lineno));
                }
                have_drains = true;
            } else if (key == "tolerance") {
                map.tolerance = parse_double(value, lineno);
            } else if (meta) {
                meta->entries.emplace_back(key, value);
            }
            continue;
        }
        if (!header) {
            if (line != "vg1_V,vg2_V,vout_V,label") {
                throw ParseError("expected header 'vg1_V,vg2_V,vout_V,label'", lineno);
            }
            header = true;
            continue;
        }
        if (line.empty()) {
            continue;
        }
        const auto fields = split(line, ',');
        if (fields.size() != 4) {
            throw ParseError("expected 4 fields, found " + std::to_string(fields.size()), lineno);
        }
        rows.emplace_back(parse_double(fields[0], lineno), parse_double(fields[1], lineno), fields[2], fields[3],
                          lineno);
    }
    if (!header) {
        throw ParseError("missing header line", lineno);
    }
    if (!have_drains) {
        throw ParseError("missing '# drain_voltages' metadata", lineno);
    }
    if (rows.empty()) {
        throw ParseError("no data rows", lineno);
    }
    for (const auto& r : rows) {
        if (std::get<0>(r) != std::get<0>(rows.front())) {
            break;
        }
        map.vg2_axis.push_back(std::get<1>(r));
    }
    for (std::size_t r = 0; r < rows.size(); r += map.vg2_axis.size()) {
        map.vg1_axis.push_back(std::get<0>(rows[r]));
    }
    const std::size_t n1 = map.vg1_axis.size();
    const std::size_t n2 = map.vg2_axis.size();
    if (n1 * n2 != rows.size() || rows.empty()) {
        throw ParseError("rows do not form a complete grid", lineno);
    }
    map.v_out.assign(n1, std::vector<double>(n2, NAN));
    map.labels.assign(n1, std::vector<StateLabel>(n2, StateLabel::failed()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& [a, b, v, label, ln] = rows[r];
        const std::size_t i = r / n2;
        const std::size_t j = r % n2;
        if (map.vg1_axis[i] != a || map.vg2_axis[j] != b) {
            throw ParseError("row is out of grid order", ln);
        }
        try {
            map.labels[i][j] = parse_label(label);
        } catch (const ParseError& e) {
            throw ParseError(e.what(), ln);
        }
        const bool failed = map.labels[i][j].kind == StateLabel::Kind::failed;
        if (failed != v.empty()) {
            throw ParseError(failed ? "FAILED cell must have an empty v_out" : "missing v_out", ln);
        }
        if (!failed) {
            map.v_out[i][j] = parse_double(v, ln);
        }
    }
    return map;
}

StateMap read_statemap_csv(const std::string& path, CsvMetadata* meta) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open '" + path + "'");
    }
    return read_statemap_csv(f, meta);
}

namespace {

std::string fixed(double v, int digits = 2) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
    return std::string(buf, res.ptr);
}

// Fractional index of v on a monotone axis.
double axis_index(const std::vector<double>& axis, double v) {
    if (axis.size() < 2) {
        return 0.0;
    }
    auto it = std::upper_bound(axis.begin(), axis.end(), v);
    std::size_t k = it == axis.begin() ? 0 : static_cast<std::size_t>(it - axis.begin()) - 1;
    k = std::min(k, axis.size() - 2);
    return static_cast<double>(k) + (v - axis[k]) / (axis[k + 1] - axis[k]);
}

std::string label_color(const StateLabel& l) {
    static const char* states[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"};
    switch (l.kind) {
        case StateLabel::Kind::state: return states[static_cast<std::size_t>(l.drain - 1) % 6];
        case StateLabel::Kind::off: return "#404040";
        case StateLabel::Kind::undefined: return "#e8e8e8";
        case StateLabel::Kind::failed: return "#ff00ff";
    }
    return "#e8e8e8";
}

}  // namespace

void render_statemap_svg(std::ostream& os, const StateMap& map, const std::vector<ContourSet>& contours,
                         const SvgOptions& options) {
    if (map.rows() == 0 || map.cols() == 0) {
        throw InvalidArgument("cannot render an empty state map");
    }
    const double c = options.cell_px;
    const double left = 70.0;
    const double top = options.title.empty() ? 20.0 : 40.0;
    const double plot_w = c * static_cast<double>(map.rows());
    const double plot_h = c * static_cast<double>(map.cols());
    const double legend_w = 130.0;
    const double width = left + plot_w + 20.0 + legend_w;
    const double height = top + plot_h + 60.0;
    // vg1 runs left to right, vg2 bottom to top; cell centers sit on grid nodes.
    auto px = [&](double vg1) { return left + c * (axis_index(map.vg1_axis, vg1) + 0.5); };
    auto py = [&](double vg2) { return top + plot_h - c * (axis_index(map.vg2_axis, vg2) + 0.5); };

    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << fixed(width) << "\" height=\""
       << fixed(height) << "\" viewBox=\"0 0 " << fixed(width) << ' ' << fixed(height) << "\">\n";
    os << "<!-- generator: " << options.generator << " -->\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << fixed(width) << "\" height=\"" << fixed(height)
       << "\" fill=\"white\"/>\n";
    if (!options.title.empty()) {
        os << "<text x=\"" << fixed(left) << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">"
           << options.title << "</text>\n";
    }
    os << "<g id=\"cells\" stroke=\"none\">\n";
    for (std::size_t i = 0; i < map.rows(); ++i) {
        for (std::size_t j = 0; j < map.cols(); ++j) {
            os << "<rect class=\"cell\" x=\"" << fixed(left + c * static_cast<double>(i)) << "\" y=\""
               << fixed(top + plot_h - c * static_cast<double>(j + 1)) << "\" width=\"" << fixed(c) << "\" height=\""
               << fixed(c) << "\" fill=\"" << label_color(map.labels[i][j]) << "\"/>\n";
        }
    }
    os << "</g>\n";
    if (options.isolines) {
        os << "<g id=\"isolines\" fill=\"none\" stroke=\"#202020\" stroke-width=\"0.7\">\n";
        for (const auto& cs : contours) {
            for (const auto& pl : cs.polylines) {
                os << "<polyline data-level=\"" << format_number(cs.level) << "\" points=\"";
                for (std::size_t k = 0; k < pl.points.size(); ++k) {
                    os << (k ? " " : "") << fixed(px(pl.points[k].first)) << ',' << fixed(py(pl.points[k].second));
                }
                if (pl.closed && !pl.points.empty()) {
                    os << ' ' << fixed(px(pl.points[0].first)) << ',' << fixed(py(pl.points[0].second));
                }
                os << "\"/>\n";
            }
        }
        os << "</g>\n";
    }
    if (options.boundaries) {
        os << "<g id=\"state-boundaries\" fill=\"none\" stroke=\"#ffffff\" stroke-width=\"1.6\" "
              "stroke-dasharray=\"5 3\">\n";
        for (const auto& [label, lines] : state_boundaries(map)) {
            for (const auto& pl : lines) {
                os << "<path data-state=\"" << to_string(label) << "\" stroke-dasharray=\"5 3\" d=\"";
                for (std::size_t k = 0; k < pl.points.size(); ++k) {
                    os << (k ? " L " : "M ") << fixed(px(pl.points[k].first)) << ' ' << fixed(py(pl.points[k].second));
                }
                if (pl.closed) {
                    os << " Z";
                }
                os << "\"/>\n";
            }
        }
        os << "</g>\n";
    }

    // axes
    os << "<g id=\"axes\" font-family=\"sans-serif\" font-size=\"11\" fill=\"black\">\n";
    os << "<rect x=\"" << fixed(left) << "\" y=\"" << fixed(top) << "\" width=\"" << fixed(plot_w) << "\" height=\""
       << fixed(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";
    const std::size_t every1 = std::max<std::size_t>(1, (map.rows() + 5) / 6);
    for (std::size_t i = 0; i < map.rows(); i += every1) {
        os << "<text x=\"" << fixed(px(map.vg1_axis[i])) << "\" y=\"" << fixed(top + plot_h + 16)
           << "\" text-anchor=\"middle\">" << format_number(map.vg1_axis[i]) << "</text>\n";
    }
    const std::size_t every2 = std::max<std::size_t>(1, (map.cols() + 5) / 6);
    for (std::size_t j = 0; j < map.cols(); j += every2) {
        os << "<text x=\"" << fixed(left - 6) << "\" y=\"" << fixed(py(map.vg2_axis[j]) + 4)
           << "\" text-anchor=\"end\">" << format_number(map.vg2_axis[j]) << "</text>\n";
    }
    os << "<text x=\"" << fixed(left + plot_w / 2) << "\" y=\"" << fixed(top + plot_h + 40)
       << "\" text-anchor=\"middle\">V_g1 (V)</text>\n";
    os << "<text x=\"18\" y=\"" << fixed(top + plot_h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
       << fixed(top + plot_h / 2) << ")\">V_g2 (V)</text>\n";
    os << "</g>\n";

    // legend
    std::vector<StateLabel> seen;
    for (const auto& row : map.labels) {
        for (const auto& l : row) {
            if (std::find(seen.begin(), seen.end(), l) == seen.end()) {
                seen.push_back(l);
            }
        }
    }
    std::sort(seen.begin(), seen.end(), [](const StateLabel& a, const StateLabel& b) {
        return std::make_pair(static_cast<int>(a.kind), a.drain) < std::make_pair(static_cast<int>(b.kind), b.drain);
    });
    os << "<g id=\"legend\" font-family=\"sans-serif\" font-size=\"11\">\n";
    double ly = top;
    for (const auto& l : seen) {
        os << "<rect class=\"legend\" x=\"" << fixed(left + plot_w + 20) << "\" y=\"" << fixed(ly)
           << "\" width=\"12\" height=\"12\" fill=\"" << label_color(l) << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << fixed(left + plot_w + 38) << "\" y=\"" << fixed(ly + 10) << "\">" << to_string(l);
        if (l.kind == StateLabel::Kind::state && static_cast<std::size_t>(l.drain) <= map.drain_voltages.size()) {
            os << " (" << format_number(map.drain_voltages[static_cast<std::size_t>(l.drain - 1)]) << " V)";
        }
        os << "</text>\n";
        ly += 18;
    }
    os << "</g>\n</svg>\n";
}

void render_statemap_svg(const std::string& path, const StateMap& map, const std::vector<ContourSet>& contours,
                         const SvgOptions& options) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    render_statemap_svg(f, map, contours, options);
    if (!f) {
        throw IoError("failed writing '" + path + "'");
    }
}

}  // namespace mset
