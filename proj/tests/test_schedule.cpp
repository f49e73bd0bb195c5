#include <catch_amalgamated.hpp>

#include <fstream>
#include <random>
#include <sstream>

#include "cosa/costmodel.hpp"
#include "cosa/schedule.hpp"
#include "cosa/search.hpp"
#include "cosa/solver.hpp"
#include "fixtures.hpp"

using namespace cosa;
using namespace cosa::test;

namespace {

std::string golden(const std::string& name) {
    std::ifstream in(std::string(COSA_SOURCE_DIR) + "/tests/golden/" + name, std::ios::binary);
    REQUIRE(in);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

bool has_kind(const std::vector<Violation>& v, const std::string& kind) {
    for (const auto& x : v)
        if (x.kind == kind) return true;
    return false;
}

}  // namespace

TEST_CASE("empty schedule skeleton") {
    const auto arch = default_simba_arch();
    const auto s = empty_schedule(factorize(LayerDims::make(3, 3, 13, 13, 8, 8, 1)), arch);
    CHECK(s.levels.size() == 6);
    CHECK(s.level_names.front() == "Register");
    CHECK(s.arch_name == "simba");
    CHECK(s.layer[Dim::P] == 13);
    CHECK(s.loop_count() == 0);
}

TEST_CASE("reference schedules validate") {
    const auto arch = default_simba_arch();
    CHECK(validate(table2_schedule(), arch).empty());
    CHECK(validate(listing1_schedule(), arch).empty());
}

TEST_CASE("decode and encode are inverse") {
    const auto arch = default_simba_arch();
    for (const auto& layer : {table2_layer(), listing1_layer()}) {
        const auto m = build_model(factorize(layer), arch);
        const auto sol = solve(m);
        REQUIRE(sol.status == SolveStatus::Optimal);
        const auto s = decode(m, sol.assignment);
        CHECK(encode(m, s) == sol.assignment);
        CHECK(s.loop_count() == static_cast<std::size_t>(m.Z));
    }
}

TEST_CASE("composite loops split into prime loops") {
    const auto arch = default_simba_arch();
    const auto pf = factorize(listing1_layer());
    const auto m = build_model(pf, arch);
    auto s = empty_schedule(pf, arch);
    s.levels[5] = {T(Dim::R, 3), T(Dim::S, 3), T(Dim::P, 28), T(Dim::Q, 28), T(Dim::C, 8), T(Dim::K, 4), T(Dim::N, 3)};
    const auto back = decode_placements(m, encode_placements(m, s));
    CHECK(back.loop_count() == 14);
    CHECK(validate(back, arch).empty());

    s.levels[5].back().bound = 9;
    CHECK_THROWS_AS(encode_placements(m, s), std::invalid_argument);
}

TEST_CASE("validator catches each kind of breakage") {
    const auto arch = default_simba_arch();
    auto s = table2_schedule();

    auto bad = s;
    bad.levels[4].push_back(T(Dim::N, 1));
    CHECK(has_kind(validate(bad, arch), "bad bound"));

    bad = s;
    bad.levels[3] = {S(Dim::K, 2), S(Dim::N, 3)};
    bad.levels[4] = {S(Dim::K, 2), S(Dim::R, 3)};
    CHECK(validate(bad, arch).empty());
    bad.levels[3] = {S(Dim::K, 4), S(Dim::N, 3)};
    bad.levels[4] = {S(Dim::R, 3)};
    CHECK(has_kind(validate(bad, arch), "spatial overflow"));

    bad = s;
    bad.levels[4].pop_back();
    CHECK(has_kind(validate(bad, arch), "dimension underflow"));
    bad = s;
    bad.levels[5] = {T(Dim::K, 2)};
    CHECK(has_kind(validate(bad, arch), "dimension overflow"));

    bad = s;
    bad.levels.pop_back();
    const auto v = validate(bad, arch);
    REQUIRE(v.size() == 1);
    CHECK(v[0].kind == "level count");
}

TEST_CASE("capacity checks are exact at the boundary") {
    auto arch = toy_arch(12);
    const auto pf = factorize(LayerDims::make(3, 1, 1, 1, 1, 4, 1));
    auto s = empty_schedule(pf, arch);
    s.levels[0] = {T(Dim::R, 3), T(Dim::K, 4)};
    CHECK(validate(s, arch).empty());  // 12 weights in a 12-element buffer
    arch = toy_arch(11);
    const auto v = validate(s, arch);
    REQUIRE(v.size() == 1);
    CHECK(v[0].kind == "capacity overflow");
    CHECK(v[0].level == 1);
    CHECK(v[0].tensor == static_cast<int>(Tensor::W));
}

TEST_CASE("input tiles include the halo") {
    auto arch = toy_arch();
    arch.levels[2].capacity_bytes[static_cast<int>(Tensor::IA)] = 16;
    const auto pf = factorize(LayerDims::make(3, 1, 16, 1, 1, 1, 1));
    auto s = empty_schedule(pf, arch);
    s.levels[0] = {T(Dim::R, 3), T(Dim::P, 16)};
    // 16 output columns read (16 - 1) + 3 = 18 inputs.
    CHECK(has_kind(validate(s, arch), "capacity overflow"));
    CHECK(validate(s, arch, ValidateOptions{false}).empty());
    CHECK(tile_elems(s, arch, 2, Tensor::IA) == 16);
}

TEST_CASE("shared capacity counts every resident tile") {
    auto arch = toy_arch();
    arch.levels[2].shared_capacity_bytes = 8;
    const auto pf = factorize(LayerDims::make(1, 1, 4, 1, 1, 1, 1));
    auto s = empty_schedule(pf, arch);
    s.levels[0] = {T(Dim::P, 4)};
    const auto v = validate(s, arch);  // IA 4 + OA 4 bytes fit exactly
    CHECK(v.empty());
    arch.levels[2].shared_capacity_bytes = 7;
    CHECK(has_kind(validate(s, arch), "shared capacity overflow"));
}

TEST_CASE("render of the table two schedule matches the golden file") {
    CHECK(render(table2_schedule()) == golden("table2.render"));
    CHECK(serialize(table2_schedule()) == golden("table2.sched"));
}

TEST_CASE("render marks padded dimensions") {
    const auto arch = default_simba_arch();
    const auto pf = factorize(LayerDims::make(1, 1, 13, 1, 1, 1, 1));
    auto s = empty_schedule(pf, arch);
    s.levels[5] = {T(Dim::P, 2), T(Dim::P, 7)};
    const auto text = render(s);
    CHECK(text.find("// padded P 13 -> 14\n") != std::string::npos);
    CHECK(text.find("for p1 = [0 : 7) :\n for p0 = [0 : 2) :") != std::string::npos);
}

TEST_CASE("parse inverts serialize") {
    CHECK(parse_schedule(golden("table2.sched")) == table2_schedule());
    CHECK(parse_schedule(serialize(listing1_schedule())) == listing1_schedule());

    std::mt19937_64 rng(17);
    const auto arch = default_simba_arch();
    for (const auto& layer : suite_layers()) {
        const auto pf = factorize(layer);
        for (int i = 0; i < 250; ++i) {
            const auto s = random_schedule(pf, arch, rng);
            REQUIRE(parse_schedule(serialize(s)) == s);
        }
    }
}

TEST_CASE("parse errors carry line and column") {
    auto expect_error = [](const std::string& text, int line, int column) {
        try {
            parse_schedule(text);
            FAIL("parsed: " << text);
        } catch (const ScheduleParseError& e) {
            CHECK(e.line == line);
            CHECK(e.column == column);
        }
    };
    const std::string good = golden("table2.sched");
    expect_error("", 1, 1);
    expect_error("cosa-sched 1\n", 1, 1);

    std::string t = good;
    t.replace(t.find("loop 4 1 K 2 s"), 14, "loop 4 1 K 2 q");
    expect_error(t, 13, 14);

    t = good;
    t.replace(t.find("loop 4 1 K 2 s"), 14, "loop 4 1 X 2 s");
    expect_error(t, 13, 10);

    t = good;
    t.replace(t.find("loop 4 2 R 3 s"), 14, "loop 4 5 R 3 s");
    expect_error(t, 14, 8);

    t = good;
    t.replace(t.find("K=4 N=3 stride=1\npadded"), 3, "K=x");
    expect_error(t, 3, 29);

    t = good;
    t.replace(t.find("end\n"), 4, "");
    CHECK_THROWS_AS(parse_schedule(t), ScheduleParseError);
}

TEST_CASE("apply partition rewrites capacities") {
    const auto arch = default_simba_arch();
    FormulationOptions o;
    o.partition = PartitionSpec{baseline_partition_bytes(arch), 4, std::nullopt};
    const auto m = build_model(factorize(table2_layer()), arch, o);
    std::vector<int> picks(m.partitions.size(), 0);
    const auto a = apply_partition(m, picks);
    for (const auto& p : m.partitions) {
        CHECK(*capacity_elements(a, p.level, p.tensor) == 16);
    }
    CHECK(a.levels[0].capacity_bytes == arch.levels[0].capacity_bytes);
    picks.pop_back();
    CHECK_THROWS_AS(apply_partition(m, picks), std::invalid_argument);
}
