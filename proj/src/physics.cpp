#include "mset/physics.hpp"

#include "mset/constants.hpp"
#include "mset/errors.hpp"
#include "mset/log.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>

namespace mset {

double bernoulli(double x) {
    const double ax = std::abs(x);
    if (ax < 1e-2) {
        const double x2 = x * x;
        return 1.0 - 0.5 * x + x2 / 12.0 * (1.0 - x2 / 60.0 * (1.0 - x2 / 42.0));
    }
    if (x > 36.0) {
        const double e = std::exp(-x);
        return x * e / (1.0 - e);
    }
    return x / std::expm1(x);
}

OhmicValues ohmic_contact_values(double net_doping, const MaterialParams& m) {
    const double ni = m.n_i;
    const double half = 0.5 * net_doping;
    const double root = std::hypot(half, ni);
    OhmicValues v;
    if (net_doping >= 0.0) {
        v.n = half + root;
        v.p = ni * ni / v.n;
    } else {
        v.p = -half + root;
        v.n = ni * ni / v.p;
    }
    v.psi_offset = m.thermal_voltage() * std::asinh(net_doping / (2.0 * ni));
    return v;
}

std::vector<double> FieldState::phi_n(const MaterialParams& m) const {
    const double vt = m.thermal_voltage();
    std::vector<double> out(psi.size(), 0.0);
    for (std::size_t k = 0; k < psi.size(); ++k) {
        if (n[k] > 0.0) {
            out[k] = psi[k] - vt * std::log(n[k] / m.n_i);
        }
    }
    return out;
}

std::vector<double> FieldState::phi_p(const MaterialParams& m) const {
    const double vt = m.thermal_voltage();
    std::vector<double> out(psi.size(), 0.0);
    for (std::size_t k = 0; k < psi.size(); ++k) {
        if (p[k] > 0.0) {
            out[k] = psi[k] + vt * std::log(p[k] / m.n_i);
        }
    }
    return out;
}

void check_bias(const Mesh& mesh, const BiasSet& bias) {
    for (const auto& [name, nodes] : mesh.contact_nodes) {
        if (bias.find(name) == bias.end()) {
            throw InvalidArgument("bias is missing contact '" + name + "'");
        }
    }
    for (const auto& [name, v] : bias) {
        if (mesh.contact_nodes.find(name) == mesh.contact_nodes.end()) {
            throw InvalidArgument("bias names unknown contact '" + name + "'");
        }
        if (!std::isfinite(v)) {
            throw InvalidArgument("bias on contact '" + name + "' is not finite");
        }
    }
}

namespace {

constexpr double um2_to_cm2 = constants::cm_per_um * constants::cm_per_um;

// q * n_i / (eps0 * V_T), converts a semiconductor volume (um^2) into the
// scaled Poisson charge coefficient.
double charge_scale(const MaterialParams& m) {
    return constants::q * m.n_i / (constants::epsilon_0 * m.thermal_voltage()) * um2_to_cm2;
}

// Dirichlet targets of the scaled potential per node (NaN when free).
std::vector<double> dirichlet_psi(const Mesh& mesh, const BiasSet& bias) {
    const MaterialParams& m = mesh.material;
    const double vt = m.thermal_voltage();
    std::vector<double> target(mesh.node_count(), std::numeric_limits<double>::quiet_NaN());
    for (const auto& [name, nodes] : mesh.contact_nodes) {
        const double v = bias.at(name);
        const double offset = ohmic_contact_values(mesh.contact_doping.at(name), m).psi_offset;
        for (std::size_t k : nodes) {
            target[k] = (v + offset) / vt;
        }
    }
    return target;
}

}  // namespace

void apply_contact_values(const Mesh& mesh, const BiasSet& bias, FieldState& state) {
    check_bias(mesh, bias);
    for (const auto& [name, nodes] : mesh.contact_nodes) {
        const OhmicValues ov = ohmic_contact_values(mesh.contact_doping.at(name), mesh.material);
        const double v = bias.at(name);
        for (std::size_t k : nodes) {
            state.psi[k] = v + ov.psi_offset;
            state.n[k] = ov.n;
            state.p[k] = ov.p;
        }
    }
}

FieldState equilibrium_init(const Mesh& mesh) {
    const MaterialParams& m = mesh.material;
    const double vt = m.thermal_voltage();
    const std::size_t nn = mesh.node_count();
    FieldState s;
    s.psi.assign(nn, 0.0);
    s.n.assign(nn, 0.0);
    s.p.assign(nn, 0.0);

    std::vector<std::ptrdiff_t> ins_index(nn, -1);
    std::size_t n_ins = 0;
    for (std::size_t k = 0; k < nn; ++k) {
        if (mesh.is_semiconductor(k)) {
            s.psi[k] = vt * std::asinh(mesh.effective_doping(k) / (2.0 * m.n_i));
        } else {
            ins_index[k] = static_cast<std::ptrdiff_t>(n_ins++);
        }
    }

    // Insulator potential: discrete Laplace with the semiconductor values as boundary.
    if (n_ins > 0) {
        std::vector<Eigen::Triplet<double>> trip;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_ins));
        for (const auto& e : mesh.edges) {
            const double w = e.face_eps / e.length;
            for (int side = 0; side < 2; ++side) {
                const std::size_t k = side == 0 ? e.a : e.b;
                const std::size_t j = side == 0 ? e.b : e.a;
                if (ins_index[k] < 0) {
                    continue;
                }
                trip.emplace_back(ins_index[k], ins_index[k], w);
                if (ins_index[j] >= 0) {
                    trip.emplace_back(ins_index[k], ins_index[j], -w);
                } else {
                    rhs[ins_index[k]] += w * s.psi[j];
                }
            }
        }
        Eigen::SparseMatrix<double> a(static_cast<Eigen::Index>(n_ins), static_cast<Eigen::Index>(n_ins));
        a.setFromTriplets(trip.begin(), trip.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(a);
        if (lu.info() == Eigen::Success) {
            const Eigen::VectorXd x = lu.solve(rhs);
            for (std::size_t k = 0; k < nn; ++k) {
                if (ins_index[k] >= 0) {
                    s.psi[k] = x[ins_index[k]];
                }
            }
        }
    }

    for (std::size_t k = 0; k < nn; ++k) {
        if (mesh.is_semiconductor(k)) {
            s.n[k] = m.n_i * std::exp(s.psi[k] / vt);
            s.p[k] = m.n_i * std::exp(-s.psi[k] / vt);
        }
    }
    BiasSet zero;
    for (const auto& [name, nodes] : mesh.contact_nodes) {
        zero[name] = 0.0;
    }
    apply_contact_values(mesh, zero, s);
    return s;
}

Eigen::VectorXd poisson_residual(const Mesh& mesh, const FieldState& frozen, const std::vector<double>& psi,
                                 const BiasSet& bias) {
    check_bias(mesh, bias);
    const MaterialParams& m = mesh.material;
    const double vt = m.thermal_voltage();
    const double cs = charge_scale(m);
    const std::size_t nn = mesh.node_count();
    const std::vector<double> target = dirichlet_psi(mesh, bias);

    Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nn));
    for (const auto& e : mesh.edges) {
        const double w = e.face_eps / e.length;
        const double flux = w * (psi[e.b] - psi[e.a]) / vt;
        f[static_cast<Eigen::Index>(e.a)] += flux;
        f[static_cast<Eigen::Index>(e.b)] -= flux;
    }
    for (std::size_t k = 0; k < nn; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        if (!std::isnan(target[k])) {
            f[kk] = psi[k] / vt - target[k];
            continue;
        }
        if (mesh.semi_volumes[k] > 0.0) {
            const double dpsi = (psi[k] - frozen.psi[k]) / vt;
            const double np = frozen.n[k] / m.n_i * std::exp(dpsi);
            const double pp = frozen.p[k] / m.n_i * std::exp(-dpsi);
            f[kk] += cs * (mesh.semi_volumes[k] * (pp - np) + mesh.doping_integral[k] / m.n_i);
        }
    }
    return f;
}

LinearSystem assemble_poisson(const Mesh& mesh, const FieldState& state, const BiasSet& bias) {
    const MaterialParams& m = mesh.material;
    const double cs = charge_scale(m);
    const std::size_t nn = mesh.node_count();
    const std::vector<double> target = dirichlet_psi(mesh, bias);

    LinearSystem sys;
    sys.rhs = -poisson_residual(mesh, state, state.psi, bias);
    sys.unknown_nodes.resize(nn);
    for (std::size_t k = 0; k < nn; ++k) {
        sys.unknown_nodes[k] = k;
    }

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(5 * nn);
    for (const auto& e : mesh.edges) {
        const double w = e.face_eps / e.length;
        const auto a = static_cast<Eigen::Index>(e.a);
        const auto b = static_cast<Eigen::Index>(e.b);
        if (std::isnan(target[e.a])) {
            trip.emplace_back(a, a, -w);
            trip.emplace_back(a, b, w);
        }
        if (std::isnan(target[e.b])) {
            trip.emplace_back(b, b, -w);
            trip.emplace_back(b, a, w);
        }
    }
    for (std::size_t k = 0; k < nn; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        if (!std::isnan(target[k])) {
            trip.emplace_back(kk, kk, 1.0);
        } else if (mesh.semi_volumes[k] > 0.0) {
            trip.emplace_back(kk, kk, -cs * mesh.semi_volumes[k] * (state.n[k] + state.p[k]) / m.n_i);
        }
    }
    sys.matrix.resize(static_cast<Eigen::Index>(nn), static_cast<Eigen::Index>(nn));
    sys.matrix.setFromTriplets(trip.begin(), trip.end());
    return sys;
}

std::vector<std::size_t> floating_semiconductor_nodes(const Mesh& mesh) {
    const std::size_t nn = mesh.node_count();
    std::vector<std::size_t> parent(nn);
    for (std::size_t k = 0; k < nn; ++k) {
        parent[k] = k;
    }
    auto find = [&](std::size_t k) {
        while (parent[k] != k) {
            parent[k] = parent[parent[k]];
            k = parent[k];
        }
        return k;
    };
    for (const auto& e : mesh.edges) {
        if (e.face_semi > 0.0) {
            parent[find(e.a)] = find(e.b);
        }
    }
    std::vector<bool> anchored(nn, false);
    for (const auto& [name, nodes] : mesh.contact_nodes) {
        for (std::size_t k : nodes) {
            anchored[find(k)] = true;
        }
    }
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < nn; ++k) {
        if (mesh.is_semiconductor(k) && !anchored[find(k)]) {
            out.push_back(k);
        }
    }
    return out;
}

LinearSystem assemble_continuity(const Mesh& mesh, const FieldState& state, Carrier carrier, const BiasSet& bias) {
    check_bias(mesh, bias);
    const MaterialParams& m = mesh.material;
    const double vt = m.thermal_voltage();
    const std::size_t nn = mesh.node_count();
    const bool electrons = carrier == Carrier::electron;

    LinearSystem sys;
    std::vector<std::ptrdiff_t> index(nn, -1);
    for (std::size_t k = 0; k < nn; ++k) {
        if (mesh.is_semiconductor(k)) {
            index[k] = static_cast<std::ptrdiff_t>(sys.unknown_nodes.size());
            sys.unknown_nodes.push_back(k);
        }
    }
    const auto nu = static_cast<Eigen::Index>(sys.unknown_nodes.size());
    sys.rhs = Eigen::VectorXd::Zero(nu);

    // Fixed rows: ohmic contacts, then carrier domains without a contact.
    std::vector<double> fixed(nn, std::numeric_limits<double>::quiet_NaN());
    for (const auto& [name, nodes] : mesh.contact_nodes) {
        const OhmicValues ov = ohmic_contact_values(mesh.contact_doping.at(name), m);
        for (std::size_t k : nodes) {
            if (index[k] >= 0) {
                fixed[k] = (electrons ? ov.n : ov.p) / m.n_i;
            }
        }
    }
    const auto floating = floating_semiconductor_nodes(mesh);
    if (!floating.empty()) {
        warn(std::to_string(floating.size()) +
             " semiconductor nodes have no contact path; their carriers are pinned to equilibrium");
        for (std::size_t k : floating) {
            fixed[k] = std::exp((electrons ? 1.0 : -1.0) * state.psi[k] / vt);
        }
    }

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(5 * static_cast<std::size_t>(nu));
    for (const auto& e : mesh.edges) {
        if (e.face_semi <= 0.0) {
            continue;
        }
        const double g = e.face_semi / e.length;
        for (int side = 0; side < 2; ++side) {
            const std::size_t k = side == 0 ? e.a : e.b;
            const std::size_t j = side == 0 ? e.b : e.a;
            if (!std::isnan(fixed[k])) {
                continue;
            }
            const double delta = (state.psi[j] - state.psi[k]) / vt;
            const double diag = electrons ? bernoulli(-delta) : bernoulli(delta);
            const double off = electrons ? bernoulli(delta) : bernoulli(-delta);
            trip.emplace_back(index[k], index[k], g * diag);
            trip.emplace_back(index[k], index[j], -g * off);
        }
    }

    const double mu = electrons ? m.mu_n : m.mu_p;
    for (std::size_t k = 0; k < nn; ++k) {
        if (index[k] < 0) {
            continue;
        }
        const auto row = static_cast<Eigen::Index>(index[k]);
        if (!std::isnan(fixed[k])) {
            trip.emplace_back(row, row, 1.0);
            sys.rhs[row] = fixed[k];
            continue;
        }
        if (m.srh_recombination && mesh.semi_volumes[k] > 0.0) {
            const double nk = state.n[k] / m.n_i;
            const double pk = state.p[k] / m.n_i;
            const double denom = m.tau_p * (nk + 1.0) + m.tau_n * (pk + 1.0);
            const double w = mesh.semi_volumes[k] * um2_to_cm2 / (mu * vt * denom);
            trip.emplace_back(row, row, w * (electrons ? pk : nk));
            sys.rhs[row] += w;
        }
    }
    sys.matrix.resize(nu, nu);
    sys.matrix.setFromTriplets(trip.begin(), trip.end());
    return sys;
}

namespace {

struct EdgeCurrent {
    double current = 0.0;    // A, from edge.a towards edge.b
    double magnitude = 0.0;  // A, sum of term magnitudes
};

EdgeCurrent edge_current(const Mesh& mesh, const FieldState& s, const MeshEdge& e) {
    const MaterialParams& m = mesh.material;
    const double vt = m.thermal_voltage();
    const double base = constants::q * vt * m.n_i * mesh.depth * constants::cm_per_um * e.face_semi / e.length;
    const double delta = (s.psi[e.b] - s.psi[e.a]) / vt;
    const double bp = bernoulli(delta);
    const double bm = bernoulli(-delta);
    const double na = s.n[e.a] / m.n_i, nb = s.n[e.b] / m.n_i;
    const double pa = s.p[e.a] / m.n_i, pb = s.p[e.b] / m.n_i;
    EdgeCurrent c;
    c.current = base * (m.mu_n * (nb * bp - na * bm) + m.mu_p * (pa * bp - pb * bm));
    c.magnitude = base * (m.mu_n * (nb * bp + na * bm) + m.mu_p * (pa * bp + pb * bm));
    return c;
}

}  // namespace

double compute_terminal_current(const Mesh& mesh, const FieldState& state, const std::string& contact) {
    const auto& nodes = mesh.nodes_of(contact);
    std::vector<bool> in_contact(mesh.node_count(), false);
    for (std::size_t k : nodes) {
        in_contact[k] = true;
    }
    double total = 0.0;
    for (std::size_t k : nodes) {
        for (std::size_t id : mesh.node_edges[k]) {
            const MeshEdge& e = mesh.edges[id];
            if (e.face_semi <= 0.0) {
                continue;
            }
            const std::size_t j = e.a == k ? e.b : e.a;
            if (in_contact[j]) {
                continue;
            }
            const double c = edge_current(mesh, state, e).current;
            total += e.a == k ? c : -c;
        }
    }
    return total;
}

std::map<std::string, double> terminal_currents(const Mesh& mesh, const FieldState& state) {
    std::map<std::string, double> out;
    for (const auto& [name, nodes] : mesh.contact_nodes) {
        out[name] = compute_terminal_current(mesh, state, name);
    }
    return out;
}

double terminal_current_noise(const Mesh& mesh, const FieldState& state) {
    double sum = 0.0;
    for (const auto& e : mesh.edges) {
        if (e.face_semi > 0.0) {
            sum += edge_current(mesh, state, e).magnitude;
        }
    }
    return std::numeric_limits<double>::epsilon() * sum;
}

}  // namespace mset
