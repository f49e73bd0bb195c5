#include <catch_amalgamated.hpp>

#include <random>

#include "cosa/formulation.hpp"
#include "cosa/solver.hpp"
#include "fixtures.hpp"

using namespace cosa;
using namespace cosa::test;

namespace {

FormulationOptions mode(ObjectiveMode m, double u = 1, double c = 1, double t = 1) {
    FormulationOptions o;
    o.weights = {u, c, t, m};
    return o;
}

void require_same(const ScheduleModel& m, const Solution& a, const Solution& b) {
    REQUIRE(a.status == SolveStatus::Optimal);
    REQUIRE(b.status == SolveStatus::Optimal);
    REQUIRE(a.objective_value == b.objective_value);
    REQUIRE(m.placements(a.assignment) == m.placements(b.assignment));
    REQUIRE(a.assignment == b.assignment);
}

}  // namespace

TEST_CASE("solver options are checked") {
    SolverOptions o;
    o.time_limit_s = 0;
    CHECK_THROWS_AS(o.check(), std::invalid_argument);
    o = {};
    o.threads = -1;
    CHECK_THROWS_AS(o.check(), std::invalid_argument);
    o = {};
    o.threads = 3;
    CHECK(effective_threads(o) >= 1);
}

TEST_CASE("single factor model") {
    const auto m = build_model(factorize(LayerDims::make(1, 1, 1, 1, 1, 2, 1)), oracle_arch());
    const auto s = solve(m);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(m.mip.violations(s.assignment, 1e-6).empty());
    require_same(m, s, exhaustive_solve(m));
}

TEST_CASE("unit layer solves trivially") {
    const auto m = build_model(factorize(LayerDims::make(1, 1, 1, 1, 1, 1, 1)), default_simba_arch());
    const auto s = solve(m);
    CHECK(s.status == SolveStatus::Optimal);
    CHECK(s.objective_value == 0.0);
    require_same(m, s, exhaustive_solve(m));
}

TEST_CASE("table two layer matches the oracle on the default arch") {
    const auto m = build_model(factorize(table2_layer()), default_simba_arch());
    const auto s = solve(m);
    require_same(m, s, exhaustive_solve(m));
    CHECK(m.mip.violations(s.assignment, 1e-6).empty());
}

TEST_CASE("random instances match the oracle", "[oracle]") {
    std::mt19937_64 rng(2024);
    const auto arch = oracle_arch();
    for (int i = 0; i < 25; ++i) {
        const auto layer = random_small_layer(rng, 6);
        CAPTURE(layer.to_string());
        const auto m = build_model(factorize(layer), arch);
        require_same(m, solve(m), exhaustive_solve(m));
    }
}

TEST_CASE("every objective mode matches the oracle", "[oracle]") {
    std::mt19937_64 rng(7);
    const auto arch = oracle_arch();
    const std::vector<FormulationOptions> modes = {
        mode(ObjectiveMode::Util), mode(ObjectiveMode::Comp), mode(ObjectiveMode::Traffic),
        mode(ObjectiveMode::Balance, 1, 1, 1), mode(ObjectiveMode::Combined, 0.5, 2, 2),
        mode(ObjectiveMode::Combined, 1, 0, 3)};
    for (int i = 0; i < 6; ++i) {
        const auto layer = random_small_layer(rng, 5);
        for (const auto& o : modes) {
            CAPTURE(layer.to_string(), objective_mode_name(o.weights.mode));
            const auto m = build_model(factorize(layer), arch, o);
            require_same(m, solve(m), exhaustive_solve(m));
        }
    }
}

TEST_CASE("partition runs match the oracle", "[oracle]") {
    std::mt19937_64 rng(99);
    const auto arch = oracle_arch();
    for (std::int64_t budget : {48, 96, 160}) {
        const auto layer = random_small_layer(rng, 4);
        FormulationOptions o;
        o.partition = PartitionSpec{budget, 2, 6};
        CAPTURE(layer.to_string(), budget);
        const auto m = build_model(factorize(layer), arch, o);
        const auto s = solve(m);
        require_same(m, s, exhaustive_solve(m));
        CHECK(m.partition_picks(s.assignment) == m.partition_picks(exhaustive_solve(m).assignment));
    }
}

TEST_CASE("thread count does not change the answer") {
    const auto m = build_model(factorize(listing1_layer()), default_simba_arch());
    SolverOptions o;
    o.threads = 1;
    const auto one = solve(m, o);
    REQUIRE(one.status == SolveStatus::Optimal);
    for (int t : {2, 4, 8}) {
        o.threads = t;
        const auto s = solve(m, o);
        CHECK(s.assignment == one.assignment);
        CHECK(s.objective_value == one.objective_value);
    }
}

TEST_CASE("timeouts keep the best incumbent") {
    const auto m = build_model(factorize(fig8_layer()), default_simba_arch(), mode(ObjectiveMode::Traffic));
    SolverOptions o;
    o.time_limit_s = 0.2;
    const auto s = solve(m, o);
    CHECK(s.status == SolveStatus::Timeout);
    if (s.has_assignment()) CHECK(m.mip.violations(s.assignment, 1e-6).empty());
}

TEST_CASE("oracle refuses huge spaces") {
    const auto m = build_model(factorize(resnet_layer()), default_simba_arch());
    CHECK_THROWS_AS(exhaustive_solve(m), SpaceTooLarge);
}

TEST_CASE("builtin backend forwards to solve") {
    BuiltinBackend b;
    CHECK(b.name() == "builtin");
    const auto m = build_model(factorize(table2_layer()), default_simba_arch());
    CHECK(b.solve(m, {}).assignment == solve(m).assignment);
}
