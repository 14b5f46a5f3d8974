#include "support.hpp"

#include "mset/errors.hpp"
#include "mset/logic.hpp"
#include "mset/statemap.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>

using namespace mset;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

NetElement input(const std::string& name) {
    NetElement e;
    e.type = NetElement::Type::input;
    e.name = name;
    e.output = name;
    return e;
}

NetElement constant(const std::string& name, int value) {
    NetElement e;
    e.type = NetElement::Type::constant;
    e.name = name;
    e.output = name;
    e.value = value;
    return e;
}

NetElement inverter(const std::string& name, const std::string& in, const std::string& out, int radix = 2) {
    NetElement e;
    e.type = NetElement::Type::inverter;
    e.name = name;
    e.inputs = {in};
    e.output = out;
    e.radix = radix;
    return e;
}

NetElement mset_element(const std::string& name, const std::string& model, std::vector<std::string> gates,
                        std::vector<std::string> drains, const std::string& out) {
    NetElement e;
    e.type = NetElement::Type::mset;
    e.name = name;
    e.model = model;
    e.inputs = std::move(gates);
    e.drains = std::move(drains);
    e.output = out;
    return e;
}

NetElement probe(const std::string& name, const std::string& in) {
    NetElement e;
    e.type = NetElement::Type::probe;
    e.name = name;
    e.inputs = {in};
    return e;
}

LogicNet mux4_net() {
    LogicNet net;
    net.models["mux4"] = declared_mset(4, 4, row_column_table(), {{0, 0.0}, {1, -3.0}});
    net.elements = {input("a0"),
                    input("a1"),
                    inverter("inv_a0", "a0", "na0"),
                    inverter("inv_a1", "a1", "na1"),
                    constant("i0", 0),
                    constant("i1", 1),
                    constant("i2", 2),
                    constant("i3", 3),
                    mset_element("mux", "mux4", {"a0", "na0", "a1", "na1"}, {"i0", "i1", "i2", "i3"}, "y"),
                    probe("y", "y")};
    return net;
}

std::map<GateTuple, Selection> ternary_table() {
    return {{{0, 0}, Selection::undefined()}, {{0, 1}, Selection::undefined()}, {{0, 2}, Selection::of(0)},
            {{1, 0}, Selection::undefined()}, {{1, 1}, Selection::of(1)},       {{1, 2}, Selection::off()},
            {{2, 0}, Selection::of(2)},       {{2, 1}, Selection::off()},       {{2, 2}, Selection::off()}};
}

}  // namespace

TEST_CASE("row-column table selects column plus twice the row", "[logic][mux]") {
    const auto table = row_column_table();
    CHECK(table.size() == 16);
    CHECK(table.at({1, 0, 0, 1}) == Selection::of(1));
    CHECK(table.at({0, 1, 0, 1}) == Selection::of(0));
    CHECK(table.at({0, 1, 1, 0}) == Selection::of(2));
    CHECK(table.at({1, 0, 1, 0}) == Selection::of(3));
    CHECK(table.at({1, 1, 0, 1}) == Selection::off());
    CHECK(table.at({0, 0, 0, 1}) == Selection::undefined());
    CHECK(table.at({1, 1, 0, 0}) == Selection::off());
}

TEST_CASE("multiplexer selects four distinct drains", "[logic][mux][property]") {
    const LogicNet net = mux4_net();
    std::set<int> seen;
    for (int a0 : {0, 1}) {
        for (int a1 : {0, 1}) {
            const auto out = eval_net(net, {{"a0", a0}, {"a1", a1}});
            REQUIRE(out.at("y").kind == Level::Kind::value);
            CHECK(out.at("y").value == a0 + 2 * a1);
            seen.insert(out.at("y").value);
        }
    }
    CHECK(seen.size() == 4);
}

TEST_CASE("net evaluation is a pure function of its inputs", "[logic][property]") {
    const LogicNet net = mux4_net();
    const auto first = eval_net_detailed(net, {{"a0", 1}, {"a1", 0}});
    for (int k = 0; k < 5; ++k) {
        const auto again = eval_net_detailed(net, {{"a0", 1}, {"a1", 0}});
        CHECK(again.probes == first.probes);
        CHECK(again.selections == first.selections);
    }
    CHECK(first.selections.at("mux") == Selection::of(1));
}

TEST_CASE("an off MSET leaves its output high impedance", "[logic][hiz]") {
    LogicNet net;
    net.models["m"] = declared_mset(2, 2, {{{0, 0}, Selection::undefined()}, {{0, 1}, Selection::of(0)},
                                           {{1, 0}, Selection::of(1)}, {{1, 1}, Selection::off()}},
                                    {{0, 0.0}, {1, -1.5}});
    net.elements = {input("g1"), input("g2"), constant("x", 1), constant("z", 0),
                    mset_element("m1", "m", {"g1", "g2"}, {"x", "z"}, "y"), probe("y", "y")};
    CHECK(eval_net(net, {{"g1", 1}, {"g2", 1}}).at("y") == Level::hiz());
    CHECK(eval_net(net, {{"g1", 0}, {"g2", 0}}).at("y") == Level::undefined());
    CHECK(eval_net(net, {{"g1", 0}, {"g2", 1}}).at("y") == Level::of(1));
    CHECK(eval_net(net, {{"g1", 1}, {"g2", 0}}).at("y") == Level::of(0));
    CHECK(eval_net(net, {{"g1", 2}, {"g2", 0}}).at("y") == Level::undefined());
    CHECK(to_string(Level::hiz()) == "HiZ");
    CHECK(to_string(Selection::of(0)) == "d1");
}

TEST_CASE("inverter chains alternate and respect the radix", "[logic][inverter]") {
    LogicNet net;
    net.elements = {input("a"), inverter("i1", "a", "b"), inverter("i2", "b", "c"), inverter("i3", "c", "d"),
                    probe("pb", "b"), probe("pd", "d")};
    for (int a : {0, 1}) {
        const auto out = eval_net(net, {{"a", a}});
        CHECK(out.at("pb") == Level::of(1 - a));
        CHECK(out.at("pd") == Level::of(1 - a));
    }
    CHECK(eval_net(net, {{"a", 5}}).at("pd") == Level::undefined());

    LogicNet t;
    t.elements = {input("a"), inverter("i", "a", "b", 3), probe("p", "b")};
    CHECK(eval_net(t, {{"a", 0}}).at("p") == Level::of(2));
    CHECK(eval_net(t, {{"a", 1}}).at("p") == Level::of(1));
    CHECK(eval_net(t, {{"a", 2}}).at("p") == Level::of(0));
}

TEST_CASE("netlist validation rejects cycles, double drivers and missing ports", "[logic][validation]") {
    LogicNet cycle;
    cycle.elements = {inverter("i1", "b", "a"), inverter("i2", "a", "b"), probe("p", "a")};
    REQUIRE_THROWS_AS(cycle.evaluation_order(), ValidationError);
    REQUIRE_THROWS_WITH(cycle.evaluation_order(), ContainsSubstring("cycle"));

    LogicNet twice;
    twice.elements = {input("a"), constant("k", 1), inverter("i1", "a", "y"), inverter("i2", "k", "y"),
                      probe("p", "y")};
    REQUIRE_THROWS_WITH(twice.evaluation_order(), ContainsSubstring("driven by both"));

    LogicNet open;
    open.elements = {inverter("i1", "nowhere", "y"), probe("p", "y")};
    REQUIRE_THROWS_WITH(open.evaluation_order(), ContainsSubstring("undriven"));

    LogicNet unknown = mux4_net();
    unknown.elements[8].model = "mux9";
    REQUIRE_THROWS_WITH(unknown.evaluation_order(), ContainsSubstring("mux9"));

    LogicNet arity = mux4_net();
    arity.elements[8].inputs.pop_back();
    REQUIRE_THROWS_AS(arity.evaluation_order(), ValidationError);

    const LogicNet ok = mux4_net();
    REQUIRE_THROWS_AS(eval_net(ok, {{"a0", 0}}), InvalidArgument);
    REQUIRE_THROWS_AS(eval_net(ok, {{"a0", 0}, {"a1", 0}, {"zz", 1}}), InvalidArgument);
}

TEST_CASE("partial state tables are rejected", "[logic][validation]") {
    auto table = ternary_table();
    table.erase({2, 2});
    REQUIRE_THROWS_AS(declared_mset(2, 3, table, {{0, 0.0}, {1, -2.4}, {2, -8.0}}), ValidationError);
    REQUIRE_THROWS_WITH(declared_mset(2, 3, table, {{0, 0.0}, {1, -2.4}, {2, -8.0}}),
                        ContainsSubstring("(2,2)"));
    auto wide = ternary_table();
    wide[{1, 1}] = Selection::of(3);
    REQUIRE_THROWS_AS(declared_mset(2, 3, wide, {{0, 0.0}, {1, -2.4}, {2, -8.0}}), ValidationError);
    REQUIRE_THROWS_AS(declared_mset(2, 3, ternary_table(), {{0, 0.0}, {1, 2.4}, {2, -8.0}}), ValidationError);
    const BehavioralMSET m = declared_mset(2, 3, ternary_table(), {{0, 0.0}, {1, -2.4}, {2, -8.0}});
    REQUIRE_THROWS_AS(m.select({3, 0}), InvalidArgument);
}

TEST_CASE("ternary mux only produces drain values, HiZ or UNDEFINED", "[logic][ternary][property]") {
    const BehavioralMSET m = declared_mset(2, 3, ternary_table(), {{0, 0.0}, {1, -2.4}, {2, -8.0}});
    const std::array<Level, 3> drains{Level::of(0), Level::of(1), Level::of(2)};
    const auto tuples = m.tuples();
    REQUIRE(tuples.size() == 9);
    for (const auto& t : tuples) {
        const Level l = eval_ternary_mux(m, t, drains);
        const bool allowed = l.kind != Level::Kind::value || (l.value >= 0 && l.value <= 2);
        CHECK(allowed);
    }
    CHECK(eval_ternary_mux(m, {1, 1}, drains) == Level::of(1));
    CHECK(eval_ternary_mux(m, {2, 0}, drains) == Level::of(2));
    CHECK(eval_ternary_mux(m, {0, 2}, drains) == Level::of(0));
    CHECK(eval_ternary_mux(m, {2, 2}, drains) == Level::hiz());
}

TEST_CASE("concatenation flags the n-to-n sign contradiction", "[logic][concat]") {
    const ConcatReport direct = check_concatenation({0.75, 0.5}, {-1.5, 0.0});
    REQUIRE(direct.violations.size() == 2);
    for (const auto& v : direct.violations) {
        CHECK(v.kind == ConcatViolation::Kind::sign);
    }
    const ConcatReport spec_example = check_concatenation({0.75, 0.5}, {0.0, -1.5});
    CHECK(spec_example.violations.size() == 2);

    const ConcatReport staged = check_concatenation({0.75, 0.5}, {-1.5, 0.0}, 0.05, LinearStage{-6.0, 3.0});
    CHECK(staged.ok());
    const ConcatReport inverted = check_concatenation({0.5}, {-0.5}, 0.05, LinearStage{-1.0, 0.0});
    CHECK(inverted.ok());

    const ConcatReport off = check_concatenation({0.75}, {-1.5}, 0.05, LinearStage{-1.0, 0.0});
    REQUIRE(off.violations.size() == 1);
    CHECK(off.violations[0].kind == ConcatViolation::Kind::magnitude);
    const ConcatReport unpaired = check_concatenation({0.75, 0.5}, {-1.5});
    CHECK(std::any_of(unpaired.violations.begin(), unpaired.violations.end(),
                      [](const ConcatViolation& v) { return v.kind == ConcatViolation::Kind::unpaired; }));
}

TEST_CASE("multiplexer cost is one MSET and four MOSFETs against sixteen", "[logic][cost]") {
    const CostComparison c = cmos_cost_compare();
    CHECK(c.mset_solution.mset == 1);
    CHECK(c.mset_solution.mosfet == 4);
    CHECK(c.cmos_solution.total() == 16);
    CHECK(c.ratio() == Approx(3.2));
}

TEST_CASE("truth table enumerates with the first input slowest", "[logic][truth_table]") {
    const TruthTable t = truth_table(mux4_net(), {{"a0", {0, 1}}, {"a1", {0, 1}}});
    CHECK(t.columns == std::vector<std::string>{"a0", "a1", "y", "mux_selected"});
    REQUIRE(t.rows.size() == 4);
    CHECK(t.rows[1] == std::vector<std::string>{"0", "1", "2", "d3"});
    std::ostringstream os;
    write_truth_table_csv(os, t);
    CHECK(os.str().rfind("a0,a1,y,mux_selected\n0,0,0,d1\n", 0) == 0);
}

TEST_CASE("behavioral selections follow the nearest map cell", "[logic][statemap]") {
    StateMap m;
    m.vg1_axis = linspace({-3.0, 0.0}, 4);
    m.vg2_axis = linspace({-3.0, 0.0}, 4);
    m.drain_voltages = {0.75, 0.5};
    m.v_out.assign(4, std::vector<double>(4, 0.3));
    m.v_out[3][0] = 0.75;
    m.v_out[0][3] = 0.5;
    m.v_out[0][0] = 0.0;
    relabel(m, 0.01);
    const BehavioralMSET b = behavioral_from_statemap(m, {{0, 0.0}, {1, -2.9}});
    CHECK(b.select({0, 1}) == Selection::of(0));
    CHECK(b.select({1, 0}) == Selection::of(1));
    CHECK(b.select({1, 1}) == Selection::off());
    CHECK(b.select({0, 0}) == Selection::undefined());
    REQUIRE_THROWS_WITH(behavioral_from_statemap(m, {{0, 0.0}, {1, -4.0}}), ContainsSubstring("outside"));
}

TEST_CASE("behavioral model agrees with fresh operating-point solves", "[logic][statemap][property]") {
    const Mesh mesh = generate_mesh(build_two_drain_spec(1.0), MeshResolution{});
    CircuitConfig c;
    c.drain_voltages = {{"d1", 0.75}, {"d2", 0.5}};
    const std::map<int, double> levels{{0, 0.0}, {1, -1.5}, {2, -3.0}};
    const StateMap map = sweep_gates(mesh, c, {-3.0, 0.0}, {-3.0, 0.0}, 5, 5, SolverOptions{});
    REQUIRE(map.failures.empty());
    const BehavioralMSET b = behavioral_from_statemap(map, levels);
    const std::vector<GateTuple> spot{{0, 2}, {2, 0}, {2, 2}, {1, 1}, {0, 1}};
    for (const auto& t : spot) {
        CircuitConfig at = c;
        at.gate_voltages = {{"jg1", levels.at(t[0])}, {"jg2", levels.at(t[1])}};
        const OperatingPoint op = solve_operating_point(mesh, at, SolverOptions{});
        CHECK(test::conserves_current(mesh, op));
        const StateLabel l = classify(op.v_out, map.drain_voltages, map.tolerance);
        Selection expected = Selection::undefined();
        if (l.kind == StateLabel::Kind::state) {
            expected = Selection::of(l.drain - 1);
        } else if (l.kind == StateLabel::Kind::off) {
            expected = Selection::off();
        }
        INFO("tuple " << t[0] << "," << t[1] << " v_out " << op.v_out);
        CHECK(b.select(t) == expected);
    }
}
