#include <catch2/catch_amalgamated.hpp>
#include <map>

#include "rllgbp/region_graph.hpp"

using namespace rllgbp;

namespace {

RegionGraph build(const RllSpec& spec, const std::vector<int>& shape) {
  return build_region_graph(build_factor_graph(shape, spec), plan_basic_regions(spec));
}

std::map<std::int64_t, std::map<int, int>> census(const RegionGraph& rg) {
  // cells -> counting number -> region count
  std::map<std::int64_t, std::map<int, int>> out;
  for (int r = 0; r < rg.num_regions(); ++r)
    ++out[rg.boxes[static_cast<size_t>(r)].cells()][rg.counting[static_cast<size_t>(r)]];
  return out;
}

}  // namespace

TEST_CASE("basic region sizing") {
  REQUIRE(plan_basic_regions(RllSpec::uniform(1, kNoLimit, 2)).extent == std::vector<int>{2, 2});
  REQUIRE(plan_basic_regions(RllSpec::parse("1,inf,2,4")).extent == std::vector<int>{2, 5});
  REQUIRE(plan_basic_regions(RllSpec::uniform(1, kNoLimit, 3)).extent == std::vector<int>{2, 2, 2});
  REQUIRE(plan_basic_regions(RllSpec::parse("2,inf,1,3")).extent == std::vector<int>{3, 4});
}

TEST_CASE("3x3 hard-square region graph matches the 9-region picture") {
  const RegionGraph rg = build(RllSpec::uniform(1, kNoLimit, 2), {3, 3});
  REQUIRE(rg.num_regions() == 9);
  REQUIRE(rg.num_basic == 4);

  const auto c = census(rg);
  REQUIRE(c.at(4) == std::map<int, int>{{+1, 4}});
  REQUIRE(c.at(2) == std::map<int, int>{{-1, 4}});
  REQUIRE(c.at(1) == std::map<int, int>{{+1, 1}});

  // the lone singleton region is the center cell
  for (int r = 0; r < rg.num_regions(); ++r)
    if (rg.boxes[static_cast<size_t>(r)].cells() == 1)
      REQUIRE(rg.vars_in(rg.boxes[static_cast<size_t>(r)]) == std::vector<VarId>{4});

  // every basic region feeds two pair regions; every pair feeds the center
  REQUIRE(rg.num_edges() == 12);
  for (int r = 0; r < rg.num_basic; ++r)
    REQUIRE(rg.child_begin[static_cast<size_t>(r) + 1] - rg.child_begin[static_cast<size_t>(r)] == 2);

  // levels follow the Hasse depth
  std::map<int, int> by_level;
  for (int r = 0; r < rg.num_regions(); ++r) ++by_level[rg.levels[static_cast<size_t>(r)]];
  REQUIRE(by_level == std::map<int, int>{{0, 4}, {1, 4}, {2, 1}});

  REQUIRE(validate_region_graph(rg).valid);
}

TEST_CASE("2x2 hard-square graph collapses to one region") {
  const RegionGraph rg = build(RllSpec::uniform(1, kNoLimit, 2), {2, 2});
  REQUIRE(rg.num_regions() == 1);
  REQUIRE(rg.num_edges() == 0);
  REQUIRE(rg.counting[0] == 1);
  REQUIRE(validate_region_graph(rg).valid);
}

TEST_CASE("4x3 hard-square closure") {
  const RegionGraph rg = build(RllSpec::uniform(1, kNoLimit, 2), {4, 3});
  const auto c = census(rg);
  REQUIRE(c.at(4) == std::map<int, int>{{+1, 6}});
  REQUIRE(c.at(2) == std::map<int, int>{{-1, 7}});
  REQUIRE(c.at(1) == std::map<int, int>{{+1, 2}});
  REQUIRE(validate_region_graph(rg).valid);
}

TEST_CASE("factor assignment is exactly scope containment") {
  const RegionGraph rg = build(RllSpec::uniform(1, kNoLimit, 2), {3, 3});
  for (int r = 0; r < rg.num_regions(); ++r) {
    const Region reg = rg.region(r);
    for (const FactorInstance& f : rg.graph->factors) {
      const bool contained = std::all_of(f.scope.begin(), f.scope.end(), [&](VarId v) {
        return std::binary_search(reg.vars.begin(), reg.vars.end(), v);
      });
      const bool assigned = std::binary_search(reg.factors.begin(), reg.factors.end(), f.id);
      REQUIRE(assigned == contained);
    }
  }
}

TEST_CASE("validity battery over mixed specs and shapes") {
  struct Case {
    const char* spec;
    std::vector<int> shape;
  };
  const std::vector<Case> cases = {
      {"1,inf", {3, 3}},     {"1,inf", {5, 4}},     {"2,inf", {4, 4}},     {"2,inf", {7, 5}},
      {"1,3", {5, 5}},       {"0,2", {4, 6}},       {"1,inf,2,4", {4, 6}}, {"1,inf,2,3", {5, 4}},
      {"2,4,1,inf", {6, 4}}, {"1,2,0,1", {4, 4}},
  };
  for (const auto& [spec_text, shape] : cases) {
    const RllSpec spec = RllSpec::parse(spec_text).broadcast(2);
    const RegionGraph rg = build(spec, shape);
    INFO(spec_text << " on " << shape[0] << "x" << shape[1]);
    REQUIRE(validate_region_graph(rg).valid);
  }
  // 3-D
  REQUIRE(validate_region_graph(build(RllSpec::uniform(1, kNoLimit, 3), {3, 3, 3})).valid);
  REQUIRE(validate_region_graph(build(RllSpec::uniform(1, 2, 3), {3, 4, 3})).valid);
  REQUIRE(validate_region_graph(build(RllSpec::parse("1,inf,0,2,1,2"), {2, 3, 4})).valid);
}

TEST_CASE("injected fault is caught with the right sum") {
  RegionGraph rg = build(RllSpec::uniform(1, kNoLimit, 2), {3, 3});
  // flip one pair region's counting number to +1
  for (int r = 0; r < rg.num_regions(); ++r)
    if (rg.boxes[static_cast<size_t>(r)].cells() == 2) {
      rg.counting[static_cast<size_t>(r)] = +1;
      break;
    }
  const auto rep = validate_region_graph(rg);
  REQUIRE_FALSE(rep.valid);
  bool found = false;
  for (const auto& [var, sum] : rep.variable_violations)
    if (var == 4 && sum == 3) found = true;
  REQUIRE(found);
}

TEST_CASE("construction is deterministic") {
  const RegionGraph a = build(RllSpec::parse("1,inf,2,4"), {6, 7});
  const RegionGraph b = build(RllSpec::parse("1,inf,2,4"), {6, 7});
  REQUIRE(a.boxes == b.boxes);
  REQUIRE(a.edges == b.edges);
  REQUIRE(a.counting == b.counting);
  REQUIRE(a.levels == b.levels);
}

TEST_CASE("plan larger than grid is rejected") {
  REQUIRE_THROWS_AS(build(RllSpec::uniform(1, kNoLimit, 2), {1, 5}), std::invalid_argument);
  REQUIRE_THROWS_AS(build(RllSpec::parse("1,inf,2,4"), {4, 4}), std::invalid_argument);
}

TEST_CASE("closure termination bound") {
  // variable-set sizes strictly decrease along edges
  const RegionGraph rg = build(RllSpec::parse("1,inf,1,3"), {5, 6});
  for (const auto& [p, c] : rg.edges)
    REQUIRE(rg.boxes[static_cast<size_t>(p)].cells() > rg.boxes[static_cast<size_t>(c)].cells());
}
