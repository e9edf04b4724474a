#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "rllgbp/exact.hpp"
#include "rllgbp/gbp.hpp"

using namespace rllgbp;

namespace {

std::shared_ptr<const RegionGraph> build(const RllSpec& spec, const std::vector<int>& shape) {
  auto fg = std::make_shared<const FactorGraph>(build_factor_graph(shape, spec));
  return std::make_shared<const RegionGraph>(build_region_graph(fg, plan_basic_regions(spec)));
}

bool admissible_cfg_2x2(std::uint32_t cfg) {
  const bool b0 = cfg & 1, b1 = cfg & 2, b2 = cfg & 4, b3 = cfg & 8;
  return !((b0 && b1) || (b2 && b3) || (b0 && b2) || (b1 && b3));
}

}  // namespace

TEST_CASE("single-region graph is solved in one sweep") {
  const auto rg = build(RllSpec::uniform(1, kNoLimit, 2), {2, 2});
  const BeliefSet bs = run_gbp(rg);
  REQUIRE(bs.report.converged);
  REQUIRE(bs.report.iterations == 1);
  const auto b = bs.belief(0);
  REQUIRE(b.size() == 16);
  double sum = 0;
  for (std::uint32_t cfg = 0; cfg < 16; ++cfg) {
    if (admissible_cfg_2x2(cfg))
      REQUIRE(b[cfg] == Catch::Approx(1.0 / 7.0).epsilon(1e-12));
    else
      REQUIRE(b[cfg] == 0.0);
    sum += b[cfg];
  }
  REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("no information gives uniform beliefs") {
  // all-ones factor over each horizontal pair on a 2x3 grid, plan 2x2
  FactorGraph g;
  g.shape = {2, 3};
  g.num_vars = 6;
  g.evidence_factor.assign(6, -1);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c + 1 < 3; ++c) {
      FactorInstance f;
      f.id = static_cast<std::int32_t>(g.factors.size());
      f.scope = {static_cast<VarId>(3 * r + c), static_cast<VarId>(3 * r + c + 1)};
      f.table = {1, 1, 1, 1};
      g.factors.push_back(std::move(f));
    }
  BasicRegionPlan plan;
  plan.extent = {2, 2};
  const auto rg = std::make_shared<const RegionGraph>(build_region_graph(g, plan));
  const BeliefSet bs = run_gbp(rg);
  REQUIRE(bs.report.converged);
  for (int r = 0; r < rg->num_regions(); ++r) {
    const auto b = bs.belief(r);
    for (double v : b) REQUIRE(v == Catch::Approx(1.0 / static_cast<double>(b.size())).epsilon(1e-9));
  }
}

TEST_CASE("3x3 hard squares: center belief near the exact marginal") {
  const auto rg = build(RllSpec::uniform(1, kNoLimit, 2), {3, 3});
  const BeliefSet bs = run_gbp(rg);
  REQUIRE(bs.report.converged);

  Box center;
  center.lo = {1, 1, 0};
  center.hi = {2, 2, 1};
  const int id = rg->region_of(center);
  REQUIRE(id >= 0);
  const auto b = bs.belief(id);
  const double exact = exact_marginal(RllSpec::uniform(1, kNoLimit, 2), {3, 3}, 4);
  REQUIRE(exact == Catch::Approx(16.0 / 63.0).epsilon(1e-14));
  REQUIRE(std::abs(b[1] - exact) < 0.05);

  REQUIRE(bs.report.consistency_residual < 1e-6);
}

TEST_CASE("belief_of contract") {
  const auto rg = build(RllSpec::uniform(1, kNoLimit, 2), {2, 2});
  const BeliefSet bs = run_gbp(rg);
  REQUIRE_THROWS_AS(bs.belief(-1), std::invalid_argument);
  REQUIRE_THROWS_AS(bs.belief(99), std::invalid_argument);
  // all-factors-1 region of one binary variable
  FactorGraph g;
  g.shape = {1};
  g.num_vars = 1;
  g.evidence_factor = {-1};
  FactorInstance f;
  f.id = 0;
  f.scope = {0};
  f.table = {1, 1};
  g.factors.push_back(f);
  BasicRegionPlan plan;
  plan.extent = {1};
  const BeliefSet one = run_gbp(std::make_shared<const RegionGraph>(build_region_graph(g, plan)));
  REQUIRE(one.belief(0) == std::vector<double>{0.5, 0.5});
}

TEST_CASE("normalization and support invariants across a battery") {
  for (const char* spec_text : {"1,inf", "2,inf", "1,3", "1,inf,2,4"}) {
    const RllSpec spec = RllSpec::parse(spec_text).broadcast(2);
    const auto rg = build(spec, {4, 5});
    const BeliefSet bs = run_gbp(rg);
    REQUIRE(bs.report.converged);
    for (int r = 0; r < rg->num_regions(); ++r) {
      const auto reg = rg->region(r);
      const auto b = bs.belief(r);
      double sum = 0;
      for (std::uint32_t cfg = 0; cfg < b.size(); ++cfg) {
        sum += b[cfg];
        // forbidden by an A_R factor -> exactly zero belief
        for (std::int32_t fid : reg.factors) {
          const FactorInstance& f = rg->graph->factors[static_cast<size_t>(fid)];
          std::uint32_t fcfg = 0;
          for (size_t i = 0; i < f.scope.size(); ++i) {
            const auto pos = std::lower_bound(reg.vars.begin(), reg.vars.end(), f.scope[i]) - reg.vars.begin();
            fcfg |= ((cfg >> pos) & 1u) << i;
          }
          if (f.table[fcfg] == 0.0) REQUIRE(b[cfg] == 0.0);
        }
      }
      REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
    }
  }
}

TEST_CASE("converged messages stay fixed under a different damping") {
  const auto rg = build(RllSpec::uniform(1, kNoLimit, 2), {4, 4});
  GbpEngine engine(rg);
  GbpConfig cfg;
  cfg.tolerance = 1e-11;
  REQUIRE(engine.run(cfg).converged);
  for (double damping : {0.0, 0.3, 0.8}) {
    GbpConfig probe = cfg;
    probe.damping = damping;
    probe.max_iterations = 1;
    const auto rep = engine.run(probe);
    REQUIRE(rep.residual < 1e-9);
  }
}

TEST_CASE("synchronous schedule is run-to-run deterministic") {
  const auto rg = build(RllSpec::parse("1,inf,1,3"), {4, 5});
  GbpConfig cfg;
  cfg.schedule = Schedule::Synchronous;
  const BeliefSet a = run_gbp(rg, cfg);
  const BeliefSet b = run_gbp(rg, cfg);
  REQUIRE(a.report.iterations == b.report.iterations);
  for (int r = 0; r < rg->num_regions(); ++r) REQUIRE(a.belief(r) == b.belief(r));
}

TEST_CASE("sequential schedule reaches the same fixed point") {
  const auto rg = build(RllSpec::uniform(1, kNoLimit, 2), {4, 4});
  GbpConfig seq;
  seq.schedule = Schedule::Sequential;
  seq.seed = 7;
  const BeliefSet a = run_gbp(rg, seq);
  const BeliefSet b = run_gbp(rg);
  REQUIRE(a.report.converged);
  for (int r = 0; r < rg->num_regions(); ++r) {
    const auto ba = a.belief(r), bb = b.belief(r);
    for (size_t i = 0; i < ba.size(); ++i) REQUIRE(ba[i] == Catch::Approx(bb[i]).margin(1e-7));
  }
}

TEST_CASE("unsatisfiable constraints raise EMPTY_SUPPORT") {
  // hard squares plus unary constraints forcing every cell to one
  FactorGraph g = build_factor_graph({2, 2}, RllSpec::uniform(1, kNoLimit, 2));
  for (VarId v = 0; v < 4; ++v) {
    FactorInstance f;
    f.id = static_cast<std::int32_t>(g.factors.size());
    f.scope = {v};
    f.table = {0, 1};
    g.factors.push_back(std::move(f));
  }
  BasicRegionPlan plan;
  plan.extent = {2, 2};
  const auto rg = std::make_shared<const RegionGraph>(build_region_graph(g, plan));
  REQUIRE_THROWS_AS(run_gbp(rg), EmptySupportError);
}

TEST_CASE("config validation") {
  GbpConfig cfg;
  cfg.damping = 1.0;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.tolerance = 0;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.max_iterations = 0;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
}
