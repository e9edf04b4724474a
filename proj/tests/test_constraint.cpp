#include <catch2/catch_amalgamated.hpp>

#include "rllgbp/constraint.hpp"

using namespace rllgbp;

namespace {

BinaryArray from_bits(std::vector<int> shape, std::uint64_t bits) {
  BinaryArray x(std::move(shape));
  for (std::int64_t i = 0; i < x.size(); ++i) x.cells[static_cast<size_t>(i)] = (bits >> i) & 1u;
  return x;
}

// Straight run-length scan: every zero-run <= k, zero-runs between
// successive ones >= d. Independent of the window-based implementation.
bool direct_scan_1d(const std::vector<std::uint8_t>& s, int d, int k) {
  int run = 0, last_one = -1;
  for (int i = 0; i < static_cast<int>(s.size()); ++i) {
    if (s[static_cast<size_t>(i)]) {
      if (last_one >= 0 && i - last_one - 1 < d) return false;
      last_one = i;
      run = 0;
    } else if (++run > k) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("spec parsing and validation") {
  const RllSpec s = RllSpec::parse("1,inf,2,4");
  REQUIRE(s.dims() == 2);
  REQUIRE(s.axes[0].d == 1);
  REQUIRE_FALSE(s.axes[0].k_finite());
  REQUIRE(s.axes[1].d == 2);
  REQUIRE(s.axes[1].k == 4);
  REQUIRE(s.str() == "1,inf,2,4");

  REQUIRE(RllSpec::parse("1,inf").dims() == 1);
  REQUIRE(RllSpec::parse("1,inf").broadcast(3).dims() == 3);
  REQUIRE_THROWS_AS(RllSpec::parse("2,2"), std::invalid_argument);
  REQUIRE_THROWS_AS(RllSpec::parse("-1,inf"), std::invalid_argument);
  REQUIRE_THROWS_AS(RllSpec::parse("1"), std::invalid_argument);
  REQUIRE_THROWS_AS(RllSpec::parse("1,inf,2,4,1,2,3,4"), std::invalid_argument);
  REQUIRE_THROWS_AS(RllSpec::parse("3,inf,2,4").broadcast(3), std::invalid_argument);
}

TEST_CASE("kernel templates") {
  SECTION("(1,inf) per axis: one pairwise kernel per axis") {
    const auto ks = build_kernels(RllSpec::uniform(1, kNoLimit, 2));
    REQUIRE(ks.size() == 2);
    for (const auto& k : ks) {
      REQUIRE(k.kind == KernelKind::AtMostOneOne);
      REQUIRE(k.window_length == 2);
      REQUIRE(k.table == std::vector<std::uint8_t>{1, 1, 1, 0});
    }
    REQUIRE(ks[0].axis == 0);
    REQUIRE(ks[1].axis == 1);
  }
  SECTION("(0,inf): nothing to enforce") {
    REQUIRE(build_kernels(RllSpec::uniform(0, kNoLimit, 2)).empty());
  }
  SECTION("(1,3): gap kernel plus run-limit kernel") {
    const auto ks = build_kernels(RllSpec::uniform(1, 3, 1));
    REQUIRE(ks.size() == 2);
    REQUIRE(ks[0].kind == KernelKind::AtMostOneOne);
    REQUIRE(ks[0].window_length == 2);
    REQUIRE(ks[1].kind == KernelKind::AtLeastOneOne);
    REQUIRE(ks[1].window_length == 4);
    for (std::uint32_t cfg = 0; cfg < 16; ++cfg) REQUIRE(ks[1].table[cfg] == (cfg == 0 ? 0 : 1));
  }
  SECTION("(1,3): product equals direct run-length scan up to length 8") {
    const RllSpec spec = RllSpec::uniform(1, 3, 1);
    for (int len = 1; len <= 8; ++len) {
      for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << len); ++bits) {
        const BinaryArray x = from_bits({len}, bits);
        std::vector<std::uint8_t> s(x.cells);
        REQUIRE(kernel_product_admissible(x, spec) == direct_scan_1d(s, 1, 3));
      }
    }
  }
}

TEST_CASE("admissibility") {
  const RllSpec hard = RllSpec::uniform(1, kNoLimit, 2);
  SECTION("2x2 all-zero is admissible") {
    REQUIRE(is_admissible(BinaryArray({2, 2}), hard));
  }
  SECTION("horizontally adjacent ones are not") {
    BinaryArray x({2, 2});
    x.at({0, 0}) = 1;
    x.at({0, 1}) = 1;
    REQUIRE_FALSE(is_admissible(x, hard));
  }
  SECTION("dimension mismatch is rejected") {
    REQUIRE_THROWS_AS(is_admissible(BinaryArray({2, 2, 2}), hard), std::invalid_argument);
  }
  SECTION("the 4x28 (2,inf) segment") {
    const std::vector<std::string> rows = {
        "0100100001001000100000100010",
        "1000010000100010000100000100",
        "0001000010000001000000010001",
        "0100100100010000001000100000",
    };
    BinaryArray x({4, 28});
    for (int r = 0; r < 4; ++r) {
      REQUIRE(rows[static_cast<size_t>(r)].size() == 28);
      for (int c = 0; c < 28; ++c) x.at({r, c}) = rows[static_cast<size_t>(r)][static_cast<size_t>(c)] == '1';
    }
    REQUIRE(is_admissible(x, RllSpec::uniform(2, kNoLimit, 2)));
  }
}

TEST_CASE("kernel-product equivalence, exhaustive") {
  const std::vector<RllSpec> battery = {
      RllSpec::uniform(1, kNoLimit, 2), RllSpec::uniform(2, kNoLimit, 2), RllSpec::uniform(0, 2, 2),
      RllSpec::uniform(1, 3, 2),        RllSpec::parse("1,inf,0,2"),      RllSpec::parse("2,4,1,inf"),
      RllSpec::uniform(1, kNoLimit, 3), RllSpec::uniform(0, 1, 3),
  };
  const std::vector<std::vector<int>> shapes2 = {{1, 1}, {1, 6}, {2, 3}, {4, 4}, {3, 5}, {2, 2}};
  const std::vector<std::vector<int>> shapes3 = {{2, 2, 2}, {1, 3, 4}, {2, 2, 4}};
  for (const RllSpec& spec : battery) {
    const auto& shapes = spec.dims() == 2 ? shapes2 : shapes3;
    for (const auto& shape : shapes) {
      const std::int64_t n = cell_count(shape);
      for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
        const BinaryArray x = from_bits(shape, bits);
        REQUIRE(is_admissible(x, spec) == kernel_product_admissible(x, spec));
      }
    }
  }
}

TEST_CASE("transposition symmetry") {
  const RllSpec spec = RllSpec::parse("1,inf,2,4");
  const RllSpec tspec = spec.transposed();
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << 12); ++bits) {
    const BinaryArray x = from_bits({3, 4}, bits);
    BinaryArray t({4, 3});
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) t.at({j, i}) = x.at({i, j});
    REQUIRE(is_admissible(x, spec) == is_admissible(t, tspec));
  }
}

TEST_CASE("monotonicity of admissible sets") {
  struct Pair {
    RllSpec strict, loose;
  };
  const std::vector<Pair> pairs = {
      {RllSpec::uniform(2, kNoLimit, 2), RllSpec::uniform(1, kNoLimit, 2)},
      {RllSpec::uniform(1, 3, 2), RllSpec::uniform(1, 4, 2)},
      {RllSpec::parse("2,4,1,3"), RllSpec::parse("1,5,0,4")},
  };
  for (const auto& [strict, loose] : pairs) {
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << 12); ++bits) {
      const BinaryArray x = from_bits({3, 4}, bits);
      if (is_admissible(x, strict)) REQUIRE(is_admissible(x, loose));
    }
  }
}
