#include "support.hpp"

#include "mset/constants.hpp"
#include "mset/solver.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cmath>

using namespace mset;
using Catch::Approx;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

TEST_CASE("bernoulli identity and value at zero", "[physics][bernoulli]") {
    const auto t0 = std::chrono::steady_clock::now();
    CHECK(bernoulli(0.0) == 1.0);
    double worst = 0.0;
    for (int k = -50000; k <= 50000; ++k) {
        const double x = k * 1e-3;
        const double lhs = bernoulli(-x);
        const double rhs = bernoulli(x) + x;
        worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
    }
    CHECK(worst < 1e-12);
    CHECK(seconds_since(t0) < 1.0);
}

TEST_CASE("bernoulli near zero and against the closed form", "[physics][bernoulli]") {
    for (double x : {1e-12, -1e-12, 1e-8, -1e-6, 1e-4, 0.3, -2.0, 10.0, 40.0}) {
        const double exact = x / std::expm1(x);
        CHECK(bernoulli(x) == Approx(exact).epsilon(1e-13));
    }
    CHECK(bernoulli(800.0) >= 0.0);
    CHECK(std::isfinite(bernoulli(-800.0)));
}

TEST_CASE("two-drain equilibrium carries no current", "[physics][equilibrium]") {
    const auto t0 = std::chrono::steady_clock::now();
    const Mesh mesh = generate_mesh(build_two_drain_spec(1.0), MeshResolution{});
    REQUIRE(mesh.nx() <= 60);
    REQUIRE(mesh.ny() <= 40);
    const auto r = gummel_solve(mesh, equilibrium_init(mesh), test::zero_bias(mesh), SolverOptions{});
    REQUIRE(r.trace.converged);
    for (const auto& [name, i] : terminal_currents(mesh, r.state)) {
        INFO(name);
        CHECK(std::abs(i) < 1e-14);
    }
    const double ni2 = mesh.material.n_i * mesh.material.n_i;
    double worst = 0.0;
    for (std::size_t k = 0; k < mesh.node_count(); ++k) {
        if (mesh.is_semiconductor(k)) {
            worst = std::max(worst, std::abs(r.state.n[k] * r.state.p[k] / ni2 - 1.0));
        }
    }
    CHECK(worst < 1e-8);
    CHECK(test::conserves_current(mesh, r.state));
    CHECK(seconds_since(t0) < 10.0);
}

TEST_CASE("p+/n junction built-in potential and depletion width", "[physics][junction]") {
    const auto t0 = std::chrono::steady_clock::now();
    const double n_a = 5e19;
    const double n_d = 1e17;
    const double junction = 0.5;
    const Mesh mesh = generate_mesh(test::junction_spec(2.5, junction, n_a, n_d), {400, 3, 4.0});
    const MaterialParams& m = mesh.material;
    const double vt = m.thermal_voltage();
    const double vbi = vt * std::log(n_a * n_d / (m.n_i * m.n_i));
    CHECK(vbi == Approx(0.99).margin(0.005));

    const double eps = m.epsilon_r_semiconductor * constants::epsilon_0;
    auto depletion_um = [&](double v_reverse) {
        return std::sqrt(2.0 * eps * (vbi + v_reverse) / (constants::q * n_d)) / constants::cm_per_um;
    };

    const FieldState s0 = test::solve_at(mesh, test::zero_bias(mesh));
    CHECK(std::abs(test::psi_at(mesh, s0, 2.2) - test::psi_at(mesh, s0, 0.2) - vbi) < 1e-3);
    CHECK(test::depleted_width(mesh, s0, junction, n_d) == Approx(depletion_um(0.0)).epsilon(0.10));
    CHECK(test::conserves_current(mesh, s0));

    const FieldState s1 = test::solve_at(mesh, {{"anode", -1.0}, {"cathode", 0.0}});
    CHECK(test::depleted_width(mesh, s1, junction, n_d) == Approx(depletion_um(1.0)).epsilon(0.10));
    CHECK(test::conserves_current(mesh, s1));
    CHECK(depletion_width(n_d, m, 1.0) == Approx(depletion_um(1.0)).epsilon(1e-12));
    CHECK(seconds_since(t0) < 10.0);
}

TEST_CASE("ohmic slab is linear with the bulk conductance", "[physics][ohmic]") {
    const auto t0 = std::chrono::steady_clock::now();
    const double n_d = 1e17;
    const double length = 2.0;
    const double height = 1.0;
    const Mesh mesh = generate_mesh(test::slab_spec(length, height, n_d), {21, 6, 1.0});
    const MaterialParams& m = mesh.material;
    const double area_cm2 = mesh.depth * height * 1e-8;
    const double g_expected = constants::q * m.mu_n * n_d * area_cm2 / (length * constants::cm_per_um);

    const SolverOptions opts;
    FieldState state = gummel_solve(mesh, equilibrium_init(mesh), test::zero_bias(mesh), opts).state;
    BiasSet prev = test::zero_bias(mesh);
    std::vector<double> g;
    for (double v : {0.05, 0.1, 0.15, 0.2}) {
        const BiasSet bias{{"left", 0.0}, {"right", v}};
        state = continuation_solve(mesh, prev, bias, opts, state).state;
        prev = bias;
        g.push_back(compute_terminal_current(mesh, state, "right") / v);
        CHECK(test::conserves_current(mesh, state));
    }
    for (double gi : g) {
        CHECK(gi == Approx(g.front()).epsilon(0.01));
        CHECK(gi == Approx(g_expected).epsilon(0.02));
    }
    CHECK(seconds_since(t0) < 10.0);
}

TEST_CASE("poisson jacobian matches central differences on a 5x5 mesh", "[physics][jacobian]") {
    const auto t0 = std::chrono::steady_clock::now();
    const Mesh mesh = generate_mesh(test::slab_spec(1.0, 1.0, 1e17), {5, 5, 1.0});
    REQUIRE(mesh.nx() == 5);
    REQUIRE(mesh.ny() == 5);
    const BiasSet bias{{"left", -0.3}, {"right", 0.2}};

    FieldState state = equilibrium_init(mesh);
    apply_contact_values(mesh, bias, state);
    for (std::size_t k = 0; k < state.size(); ++k) {
        state.psi[k] += 0.01 * std::sin(1.7 * static_cast<double>(k));
    }

    const LinearSystem sys = assemble_poisson(mesh, state, bias);
    const Eigen::MatrixXd jac = Eigen::MatrixXd(sys.matrix);
    const double vt = mesh.material.thermal_voltage();
    const double h = 1e-4 * vt;
    double worst = 0.0;
    for (std::size_t c = 0; c < sys.unknown_nodes.size(); ++c) {
        const std::size_t k = sys.unknown_nodes[c];
        std::vector<double> up = state.psi;
        std::vector<double> dn = state.psi;
        up[k] += h;
        dn[k] -= h;
        const Eigen::VectorXd fd =
            (poisson_residual(mesh, state, up, bias) - poisson_residual(mesh, state, dn, bias)) * (vt / (2.0 * h));
        for (std::size_t r = 0; r < sys.unknown_nodes.size(); ++r) {
            const double a = jac(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
            const double b = fd[static_cast<Eigen::Index>(sys.unknown_nodes[r])];
            const double scale = std::max({std::abs(a), std::abs(b), 1e-6 * jac.cwiseAbs().maxCoeff()});
            worst = std::max(worst, std::abs(a - b) / scale);
        }
    }
    CHECK(worst < 1e-5);
    CHECK(seconds_since(t0) < 1.0);
}

TEST_CASE("continuity carriers conserve current under bias", "[physics][conservation]") {
    const Mesh mesh = generate_mesh(test::junction_spec(2.0, 0.6, 1e19, 1e16), {60, 3, 2.0});
    for (double v : {0.3, 0.5, -2.0}) {
        INFO("anode " << v);
        const FieldState s = test::solve_at(mesh, {{"anode", v}, {"cathode", 0.0}});
        CHECK(test::conserves_current(mesh, s));
        if (v > 0.0) {
            CHECK(compute_terminal_current(mesh, s, "anode") > 0.0);
        }
    }
}

TEST_CASE("ohmic contact values are charge neutral", "[physics][contacts]") {
    const MaterialParams m;
    for (double nd : {1e16, 1e17, -5e19}) {
        const OhmicValues o = ohmic_contact_values(nd, m);
        CHECK(o.n * o.p == Approx(m.n_i * m.n_i).epsilon(1e-10));
        CHECK(o.n - o.p == Approx(nd).epsilon(1e-10));
    }
}

TEST_CASE("check_bias names the missing contact", "[physics][bias]") {
    const Mesh mesh = generate_mesh(test::slab_spec(1.0, 0.5, 1e17), {8, 4, 1.0});
    REQUIRE_THROWS_WITH(check_bias(mesh, {{"left", 0.0}}), Catch::Matchers::ContainsSubstring("right"));
    REQUIRE_THROWS_AS(check_bias(mesh, {{"left", 0.0}, {"right", 0.0}, {"gate", 0.0}}), InvalidArgument);
}

TEST_CASE("bernoulli is positive and strictly decreasing", "[physics][bernoulli][property]") {
    double prev = bernoulli(-50.0);
    CHECK(prev > 0.0);
    for (int k = -49999; k <= 50000; ++k) {
        const double b = bernoulli(k * 1e-3);
        CHECK(b > 0.0);
        if (!(b < prev)) {
            FAIL("not decreasing at x = " << k * 1e-3);
        }
        prev = b;
    }
}

TEST_CASE("equilibrium is a fixed point of the gummel cycle", "[physics][equilibrium][property]") {
    const Mesh mesh = generate_mesh(build_two_drain_spec(1.0), MeshResolution{});
    const BiasSet zero = test::zero_bias(mesh);
    const FieldState eq = gummel_solve(mesh, equilibrium_init(mesh), zero, SolverOptions{}).state;
    const SolveResult again = gummel_solve(mesh, eq, zero, SolverOptions{});
    double worst = 0.0;
    for (std::size_t k = 0; k < eq.size(); ++k) {
        worst = std::max(worst, std::abs(again.state.psi[k] - eq.psi[k]));
    }
    CHECK(worst < 1e-9);
    CHECK(again.trace.iterations <= 2);
}

TEST_CASE("scharfetter-gummel flux reduces to central diffusion", "[physics][sg][property]") {
    const double d = 1e-8;
    for (auto [na, nb] : {std::pair{1.0, 2.0}, std::pair{3e3, 1e-2}, std::pair{5.0, 5.0}}) {
        const double sg = bernoulli(d) * nb - bernoulli(-d) * na;
        const double central = (nb - na) - 0.5 * d * (na + nb);
        CHECK(std::abs(sg - central) <= 1e-12 * std::max(std::abs(na), std::abs(nb)));
    }

    const Mesh mesh = generate_mesh(test::slab_spec(1.0, 0.4, 1e17), {9, 4, 1.0});
    const BiasSet bias{{"left", 0.0}, {"right", 0.0}};
    FieldState s = equilibrium_init(mesh);
    const double vt = mesh.material.thermal_voltage();
    for (std::size_t k = 0; k < s.size(); ++k) {
        s.psi[k] = s.psi[0] + d * vt * mesh.position(k).x / (mesh.x_lines[1] - mesh.x_lines[0]);
    }
    const LinearSystem sys = assemble_continuity(mesh, s, Carrier::electron, bias);
    const Eigen::MatrixXd a(sys.matrix);
    std::map<std::size_t, Eigen::Index> row_of;
    for (std::size_t r = 0; r < sys.unknown_nodes.size(); ++r) {
        row_of[sys.unknown_nodes[r]] = static_cast<Eigen::Index>(r);
    }
    std::size_t interior_pairs = 0;
    for (const auto& e : mesh.edges) {
        if (!row_of.count(e.a) || !row_of.count(e.b)) {
            continue;
        }
        const double ab = a(row_of[e.a], row_of[e.b]);
        const double ba = a(row_of[e.b], row_of[e.a]);
        if (ab == 0.0 || ba == 0.0 || a.row(row_of[e.a]).cwiseAbs().sum() == std::abs(a(row_of[e.a], row_of[e.a])) ||
            a.row(row_of[e.b]).cwiseAbs().sum() == std::abs(a(row_of[e.b], row_of[e.b]))) {
            continue;
        }
        ++interior_pairs;
        CHECK(std::abs(ab - ba) <= 2e-8 * std::max(std::abs(ab), std::abs(ba)));
    }
    CHECK(interior_pairs > 0);
}
