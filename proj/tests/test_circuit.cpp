#include "support.hpp"

#include "mset/circuit.hpp"
#include "mset/log.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <random>
#include <sstream>

using namespace mset;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

TEST_CASE("divider stub matches the closed form", "[circuit][divider]") {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> log_r(4.0, 10.0);
    std::uniform_real_distribution<double> log_g(-10.0, -4.0);
    std::uniform_real_distribution<double> vd(0.1, 1.5);
    for (int k = 0; k < 5; ++k) {
        const double r = std::pow(10.0, log_r(rng));
        const double g = std::pow(10.0, log_g(rng));
        const double v_d = vd(rng);
        const double exact = g * r * v_d / (1.0 + g * r);
        auto source_current = [&](double v) { return g * (v_d - v); };
        // |residual| <= 1e-10 g v_d bounds the voltage error by 1e-10 of the exact root.
        const DividerRoot root = solve_divider(source_current, v_d, r, 1e-10 * g * v_d);
        INFO("R " << r << " G " << g << " Vd " << v_d);
        CHECK(std::abs(root.v_out - exact) <= 1e-9 * exact);
    }
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 1.0);
}

TEST_CASE("divider handles a saturating source", "[circuit][divider]") {
    const double r = 1e6;
    const double i_sat = 2e-7;
    auto source_current = [&](double v) { return i_sat * std::tanh((0.75 - v) / 0.05); };
    const DividerRoot root = solve_divider(source_current, 0.75, r, 1e-16);
    CHECK(std::abs(source_current(root.v_out) - root.v_out / r) < 1e-15);
    CHECK(root.v_out > 0.0);
    CHECK(root.v_out < 0.75);
    CHECK(root.evaluations < 80);
}

TEST_CASE("divider without a sign change throws", "[circuit][divider]") {
    auto source_current = [](double v) { return -1e-9 - v; };
    REQUIRE_THROWS_AS(solve_divider(source_current, 0.75, 1e6, 1e-15), Error);
}

TEST_CASE("circuit config bias and validation", "[circuit][config]") {
    const Mesh mesh = generate_mesh(build_two_drain_spec(1.0), MeshResolution{});
    CircuitConfig c;
    c.drain_voltages = {{"d1", 0.75}, {"d2", 0.5}};
    c.gate_voltages = {{"jg1", -1.0}, {"jg2", 0.0}};
    CHECK(c.max_drain_voltage() == 0.75);
    CHECK(c.current_tolerance() == Approx(1e-4 / 10e6));
    const BiasSet b = c.bias_at(0.2);
    CHECK(b.at("source") == 0.2);
    CHECK(b.at("jg1") == -1.0);
    CHECK_NOTHROW(c.validate(mesh));

    CircuitConfig bad = c;
    bad.drain_voltages["d7"] = 0.1;
    REQUIRE_THROWS_WITH(bad.validate(mesh), ContainsSubstring("d7"));
    bad = c;
    bad.load_resistor = 0.0;
    REQUIRE_THROWS_AS(bad.validate(mesh), ValidationError);

    std::vector<std::string> warnings;
    auto previous = set_warning_handler([&](const std::string& w) { warnings.push_back(w); });
    CircuitConfig odd = c;
    odd.gate_voltages["jg1"] = 1.0;
    CHECK_NOTHROW(odd.validate(mesh));
    set_warning_handler(previous);
    CHECK(warnings.size() == 1);
}

TEST_CASE("operating point balances the load and conserves current", "[circuit][operating_point]") {
    const Mesh mesh = generate_mesh(build_two_drain_spec(1.0), MeshResolution{});
    CircuitConfig c;
    c.drain_voltages = {{"d1", 0.75}, {"d2", 0.5}};
    c.gate_voltages = {{"jg1", 0.0}, {"jg2", -3.0}};
    const OperatingPoint op = solve_operating_point(mesh, c, SolverOptions{});
    REQUIRE(op.converged);
    CHECK(op.v_out > 0.0);
    CHECK(op.v_out < 0.75);
    CHECK(std::abs(op.output_current() - op.v_out / c.load_resistor) <= c.current_tolerance() * 1.0001);
    CHECK(test::conserves_current(mesh, op));

    std::ostringstream h;
    std::ostringstream r;
    write_operating_point_header(h, op);
    write_operating_point_row(r, op);
    const std::string header = h.str();
    const std::string row = r.str();
    CHECK(header.rfind("jg1_V,jg2_V,vout_V", 0) == 0);
    CHECK(std::count(header.begin(), header.end(), ',') == std::count(row.begin(), row.end(), ','));

    const OperatingPoint warm = solve_operating_point(mesh, c, SolverOptions{}, &op);
    CHECK(warm.v_out == Approx(op.v_out).margin(1e-4));
}

namespace {

CircuitConfig two_drain_circuit(double vg1, double vg2, double vd1 = 0.75, double vd2 = 0.5) {
    CircuitConfig c;
    c.drain_voltages = {{"d1", vd1}, {"d2", vd2}};
    c.gate_voltages = {{"jg1", vg1}, {"jg2", vg2}};
    return c;
}

const Mesh& two_drain_mesh() {
    static const Mesh mesh = generate_mesh(build_two_drain_spec(1.0), MeshResolution{});
    return mesh;
}

}  // namespace

TEST_CASE("device current falls as the output rises", "[circuit][property]") {
    const Mesh& mesh = two_drain_mesh();
    const CircuitConfig c = two_drain_circuit(-0.5, -1.0);
    const SolverOptions opts;
    DeviceSolution warm = equilibrium_solution(mesh, opts);
    double prev = INFINITY;
    for (double v : {0.0, 0.15, 0.3, 0.45, 0.6}) {
        DeviceSolution solved;
        const double i = device_current_at(mesh, c, v, opts, &warm, &solved);
        INFO("v_out " << v);
        CHECK(i <= prev);
        prev = i;
        warm = solved;
    }
}

TEST_CASE("operating point is self-consistent and bounded", "[circuit][property]") {
    const Mesh& mesh = two_drain_mesh();
    const SolverOptions opts;
    for (auto [g1, g2] : {std::pair{0.0, 0.0}, std::pair{-1.5, -0.3}, std::pair{-3.0, -3.0}}) {
        const CircuitConfig c = two_drain_circuit(g1, g2);
        const OperatingPoint op = solve_operating_point(mesh, c, opts);
        INFO("gates " << g1 << ", " << g2);
        REQUIRE(op.converged);
        CHECK(op.v_out >= 0.0);
        CHECK(op.v_out <= c.max_drain_voltage());
        const double again = device_current_at(mesh, c, op.v_out, opts, op.field_state.get());
        CHECK(std::abs(again - op.output_current()) <= 2.0 * c.current_tolerance());
        CHECK(test::conserves_current(mesh, op));
    }
}

TEST_CASE("swapping gates and drains mirrors the output", "[circuit][symmetry][property]") {
    const Mesh& mesh = two_drain_mesh();
    const SolverOptions opts;
    for (auto [a, b] : {std::pair{-0.4, -1.8}, std::pair{-2.5, 0.0}}) {
        const OperatingPoint p = solve_operating_point(mesh, two_drain_circuit(a, b, 0.75, 0.5), opts);
        const OperatingPoint q = solve_operating_point(mesh, two_drain_circuit(b, a, 0.5, 0.75), opts);
        INFO("gates " << a << ", " << b);
        CHECK(std::abs(p.v_out - q.v_out) < 1e-3);
    }
}
