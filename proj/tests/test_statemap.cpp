#include "support.hpp"

#include "mset/errors.hpp"
#include "mset/statemap.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <set>
#include <sstream>

using namespace mset;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

StateMap plane_map(std::size_t n1, std::size_t n2, double a, double b, double c) {
    StateMap m;
    m.vg1_axis = linspace({-3.0, 0.0}, static_cast<int>(n1));
    m.vg2_axis = linspace({-3.0, 0.0}, static_cast<int>(n2));
    m.drain_voltages = {0.75, 0.5};
    m.v_out.assign(n1, std::vector<double>(n2));
    m.labels.assign(n1, std::vector<StateLabel>(n2));
    for (std::size_t i = 0; i < n1; ++i) {
        for (std::size_t j = 0; j < n2; ++j) {
            m.v_out[i][j] = a * m.vg1_axis[i] + b * m.vg2_axis[j] + c;
        }
    }
    relabel(m, 0.01);
    return m;
}

}  // namespace

TEST_CASE("classification picks the band of one drain, OFF or UNDEFINED", "[statemap][classify]") {
    const std::vector<double> d{0.75, 0.5};
    CHECK(classify(0.75, d, 0.01) == StateLabel::selected(1));
    CHECK(classify(0.7426, d, 0.01) == StateLabel::selected(1));
    CHECK(classify(0.7424, d, 0.01) == StateLabel::undefined());
    CHECK(classify(0.503, d, 0.01) == StateLabel::selected(2));
    CHECK(classify(0.0049, d, 0.01) == StateLabel::off());
    CHECK(classify(0.0051, d, 0.01) == StateLabel::undefined());
    CHECK(classify(0.62, d, 0.01) == StateLabel::undefined());
    CHECK(classify(NAN, d, 0.01) == StateLabel::failed());
    CHECK(classify(0.25, {0.75, 0.5, 0.25}, 0.01) == StateLabel::selected(3));
    CHECK_THROWS_AS(classify(0.1, {}, 0.01), InvalidArgument);
    CHECK_THROWS_AS(classify(0.1, d, 0.6), InvalidArgument);
}

TEST_CASE("classification bands are disjoint for the shipped drain sets", "[statemap][classify][property]") {
    const double tol = 0.01;
    for (const std::vector<double>& d : {std::vector<double>{0.75, 0.5}, std::vector<double>{0.75, 0.5, 0.25}}) {
        double min_rel = INFINITY;
        for (std::size_t a = 0; a < d.size(); ++a) {
            for (std::size_t b = 0; b < d.size(); ++b) {
                if (a != b) {
                    min_rel = std::min(min_rel, std::abs(d[a] - d[b]) / std::max(d[a], d[b]));
                }
            }
        }
        CHECK(tol < 0.5 * min_rel);
        for (int k = -100; k <= 1000; ++k) {
            const double v = k * 1e-3;
            int hits = 0;
            for (std::size_t i = 0; i < d.size(); ++i) {
                hits += std::abs(v - d[i]) <= tol * d[i] ? 1 : 0;
            }
            const double vmin = *std::min_element(d.begin(), d.end());
            hits += std::abs(v) <= tol * vmin ? 1 : 0;
            CHECK(hits <= 1);
            const StateLabel l = classify(v, d, tol);
            CHECK((hits == 1) == (l.kind != StateLabel::Kind::undefined));
        }
    }
}

TEST_CASE("labels round trip through text", "[statemap][labels]") {
    for (const StateLabel& l : {StateLabel::selected(1), StateLabel::selected(3), StateLabel::off(),
                                StateLabel::undefined(), StateLabel::failed()}) {
        CHECK(parse_label(to_string(l)) == l);
    }
    CHECK(to_string(StateLabel::selected(2)) == "S2");
    CHECK_THROWS_AS(parse_label("S0"), ParseError);
    CHECK_THROWS_AS(parse_label("on"), ParseError);
}

TEST_CASE("serpentine order visits every cell once through neighbours", "[statemap][sweep]") {
    const auto order = serpentine_order(4, 5);
    REQUIRE(order.size() == 20);
    std::set<std::pair<std::size_t, std::size_t>> seen(order.begin(), order.end());
    CHECK(seen.size() == 20);
    for (std::size_t k = 1; k < order.size(); ++k) {
        const auto [i0, j0] = order[k - 1];
        const auto [i1, j1] = order[k];
        const std::size_t dist = (i0 > i1 ? i0 - i1 : i1 - i0) + (j0 > j1 ? j0 - j1 : j1 - j0);
        CHECK(dist == 1);
    }
    const auto axis = linspace({-8.0, 0.0}, 31);
    CHECK(axis.front() == -8.0);
    CHECK(axis.back() == 0.0);
    CHECK(axis[15] == Approx(-4.0).margin(1e-15));
}

TEST_CASE("csv round trip preserves values, labels and metadata", "[statemap][csv]") {
    StateMap m = plane_map(4, 3, 0.11, -0.07, 0.5);
    m.v_out[1][2] = NAN;
    m.labels[1][2] = StateLabel::failed();
    m.v_out[0][0] = 0.1 + 0.2;
    CsvMetadata meta;
    meta.entries = {{"config", "two_drain.yaml"}, {"grid", "4x3"}};
    std::stringstream ss;
    write_statemap_csv(ss, m, meta);
    const std::string text = ss.str();
    CHECK(text.find("# config: two_drain.yaml") != std::string::npos);

    CsvMetadata back_meta;
    const StateMap back = read_statemap_csv(ss, &back_meta);
    REQUIRE(back.rows() == m.rows());
    REQUIRE(back.cols() == m.cols());
    CHECK(back.vg1_axis == m.vg1_axis);
    CHECK(back.vg2_axis == m.vg2_axis);
    CHECK(back.drain_voltages == m.drain_voltages);
    CHECK(back.tolerance == m.tolerance);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            CHECK(back.labels[i][j] == m.labels[i][j]);
            if (std::isnan(m.v_out[i][j])) {
                CHECK(std::isnan(back.v_out[i][j]));
            } else {
                CHECK(std::memcmp(&back.v_out[i][j], &m.v_out[i][j], sizeof(double)) == 0);
            }
        }
    }
    REQUIRE(back_meta.entries.size() >= 2);
    CHECK(back_meta.entries[0] == meta.entries[0]);

    std::stringstream again;
    write_statemap_csv(again, back, back_meta);
    CHECK(again.str() == text);
}

TEST_CASE("csv reader reports malformed rows with their line", "[statemap][csv]") {
    std::stringstream ss;
    write_statemap_csv(ss, plane_map(2, 2, 0.1, 0.1, 0.5));
    std::string text = ss.str();
    text += "0,0,abc,S1\n";
    std::stringstream bad(text);
    REQUIRE_THROWS_AS(read_statemap_csv(bad), ParseError);
    std::stringstream empty("");
    REQUIRE_THROWS_AS(read_statemap_csv(empty), ParseError);
    REQUIRE_THROWS_AS(read_statemap_csv(std::string("/nonexistent/map.csv")), IoError);
}

TEST_CASE("iso-lines of a plane lie exactly on their level", "[statemap][contour][property]") {
    const double a = 0.13;
    const double b = -0.29;
    const double c = 0.4;
    const StateMap m = plane_map(9, 7, a, b, c);
    const auto sets = extract_isolines(m, 0.025);
    REQUIRE_FALSE(sets.empty());
    std::size_t points = 0;
    for (const auto& set : sets) {
        for (const auto& line : set.polylines) {
            for (const auto& [x, y] : line.points) {
                CHECK(std::abs(a * x + b * y + c - set.level) < 1e-9);
                ++points;
            }
        }
    }
    CHECK(points > 0);
}

TEST_CASE("saddle cell resolves into two separate segments", "[statemap][contour]") {
    const std::vector<double> x{0.0, 1.0};
    const std::vector<double> y{0.0, 1.0};
    const std::vector<std::vector<double>> f{{0.0, 1.0}, {1.0, 0.0}};
    const auto sets = contour_field(x, y, f, 0.4);
    REQUIRE(sets.size() == 2);
    for (const auto& set : sets) {
        CHECK(set.polylines.size() == 2);
        for (const auto& line : set.polylines) {
            REQUIRE(line.points.size() == 2);
            CHECK_FALSE(line.closed);
        }
    }
    const auto again = contour_field(x, y, f, 0.4);
    CHECK(again[0].polylines[0].points == sets[0].polylines[0].points);
}

TEST_CASE("doubling the iso-line spacing halves the level count", "[statemap][contour][property]") {
    const StateMap m = plane_map(11, 11, 0.125, 0.125, 0.75);
    const std::size_t fine = extract_isolines(m, 0.025).size();
    const std::size_t coarse = extract_isolines(m, 0.05).size();
    CHECK(fine == 29);
    CHECK(coarse >= fine / 2);
    CHECK(coarse <= (fine + 1) / 2);
}

TEST_CASE("state boundaries enclose each labelled region", "[statemap][contour]") {
    StateMap m = plane_map(6, 6, 0.0, 0.0, 0.0);
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j < 6; ++j) {
            m.v_out[i][j] = i >= 3 && j < 3 ? 0.75 : (i < 3 && j >= 3 ? 0.5 : 0.0);
        }
    }
    relabel(m, 0.01);
    CHECK(m.count(StateLabel::selected(1)) == 9);
    CHECK(m.count(StateLabel::selected(2)) == 9);
    CHECK(m.count(StateLabel::off()) == 18);
    const auto bounds = state_boundaries(m);
    std::set<std::string> names;
    for (const auto& [label, lines] : bounds) {
        names.insert(to_string(label));
        CHECK_FALSE(lines.empty());
    }
    CHECK(names == std::set<std::string>{"OFF", "S1", "S2"});
}

TEST_CASE("map checks reject inconsistent data", "[statemap][validation]") {
    StateMap m = plane_map(3, 3, 0.05, 0.05, 0.7);
    CHECK_NOTHROW(m.check());
    m.v_out[0][0] = 2.0;
    CHECK_THROWS_AS(m.check(), ValidationError);
    m = plane_map(3, 3, 0.05, 0.05, 0.7);
    m.labels.pop_back();
    CHECK_THROWS_AS(m.check(), ValidationError);
}

TEST_CASE("svg output is deterministic and carries its title", "[statemap][svg]") {
    const StateMap m = plane_map(5, 5, 0.1, -0.1, 0.4);
    SvgOptions o;
    o.title = "plane: output voltage (V)";
    std::ostringstream a;
    std::ostringstream b;
    render_statemap_svg(a, m, extract_isolines(m, 0.05), o);
    render_statemap_svg(b, m, extract_isolines(m, 0.05), o);
    CHECK(a.str() == b.str());
    CHECK(a.str().find("<svg") != std::string::npos);
    CHECK(a.str().find("plane: output voltage (V)") != std::string::npos);
    CHECK(a.str().find("<!-- generator: mset -->") != std::string::npos);
    CHECK(a.str().find("nan") == std::string::npos);
}

TEST_CASE("sweep classifies cells and reports failed solves", "[statemap][sweep]") {
    const Mesh mesh = generate_mesh(build_two_drain_spec(1.0), MeshResolution{});
    CircuitConfig c;
    c.drain_voltages = {{"d1", 0.75}, {"d2", 0.5}};
    SweepOptions sweep;
    std::size_t calls = 0;
    std::size_t points = 0;
    sweep.progress = [&](std::size_t done, std::size_t total) {
        ++calls;
        CHECK(done <= total);
    };
    sweep.on_point = [&](std::size_t, std::size_t, const OperatingPoint& op) {
        ++points;
        CHECK(test::conserves_current(mesh, op));
    };
    const StateMap m = sweep_gates(mesh, c, {-3.0, 0.0}, {-3.0, 0.0}, 2, 2, SolverOptions{}, sweep);
    CHECK(calls == 4);
    CHECK(points == 4);
    CHECK(m.failures.empty());
    CHECK(m.labels[0][0] == StateLabel::off());
    CHECK(m.labels[1][0] == StateLabel::selected(1));
    CHECK(m.labels[0][1] == StateLabel::selected(2));

    SolverOptions starved;
    starved.max_gummel = 1;
    starved.anderson_depth = 0;
    const StateMap f = sweep_gates(mesh, c, {-1.0, 0.0}, {-1.0, 0.0}, 2, 2, starved);
    CHECK(f.count(StateLabel::failed()) == f.failures.size());
    CHECK(f.failures.size() >= 1);
    CHECK_THAT(f.failures.front(), ContainsSubstring("(-1"));
}
