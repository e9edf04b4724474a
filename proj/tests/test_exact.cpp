#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "rllgbp/exact.hpp"

using namespace rllgbp;

TEST_CASE("brute-force counts") {
  const RllSpec hard2 = RllSpec::uniform(1, kNoLimit, 2);
  REQUIRE(brute_force_count(hard2, {1, 1}).value == 2);
  REQUIRE(brute_force_count(hard2, {2, 2}).value == 7);
  REQUIRE(brute_force_count(hard2, {3, 3}).value == 63);
  REQUIRE(brute_force_count(RllSpec::uniform(1, kNoLimit, 1), {4}).value == 8);
  REQUIRE_THROWS_AS(brute_force_count(hard2, {5, 5}), std::invalid_argument);
}

TEST_CASE("transfer matrix agrees with brute force") {
  const RllSpec hard2 = RllSpec::uniform(1, kNoLimit, 2);
  REQUIRE(transfer_matrix_count(hard2, 2, 2).value == 7);
  REQUIRE(transfer_matrix_count(hard2, 1, 5).value == 13);
  REQUIRE(transfer_matrix_count(hard2, 3, 3).value == 63);

  const std::vector<RllSpec> battery = {
      RllSpec::uniform(1, kNoLimit, 2), RllSpec::uniform(2, kNoLimit, 2), RllSpec::uniform(0, 2, 2),
      RllSpec::uniform(1, 3, 2),        RllSpec::parse("1,inf,2,4"),      RllSpec::parse("0,3,2,inf"),
      RllSpec::parse("2,5,1,2"),
  };
  for (const RllSpec& spec : battery)
    for (int m = 1; m <= 4; ++m)
      for (int n = 1; n <= 6; ++n)
        REQUIRE(transfer_matrix_count(spec, m, n).value == brute_force_count(spec, {m, n}).value);
}

TEST_CASE("1-D (1,inf) counts follow the Fibonacci recurrence") {
  const RllSpec spec = RllSpec::uniform(1, kNoLimit, 2);
  std::vector<BigInt> z;
  for (int n = 1; n <= 40; ++n) z.push_back(transfer_matrix_count(spec, 1, n).value);
  REQUIRE(z[0] == 2);
  REQUIRE(z[1] == 3);
  for (size_t i = 2; i < z.size(); ++i) REQUIRE(z[i] == z[i - 1] + z[i - 2]);
}

TEST_CASE("counting monotonicity") {
  const std::vector<int> shape = {3, 4};
  const BigInt loose = brute_force_count(RllSpec::uniform(1, kNoLimit, 2), shape).value;
  const BigInt strict = brute_force_count(RllSpec::uniform(2, kNoLimit, 2), shape).value;
  REQUIRE(strict <= loose);
  REQUIRE(loose <= BigInt(1) << cell_count(shape));
}

TEST_CASE("log2 of large counts") {
  REQUIRE(log2_big(BigInt(1) << 100) == 100.0);
  REQUIRE(log2_big(BigInt(7)) == Catch::Approx(std::log2(7.0)).epsilon(1e-14));
  // 300-digit-scale value: compare against exact arithmetic identity
  const BigInt z = (BigInt(1) << 200) + (BigInt(1) << 199);
  REQUIRE(log2_big(z) == Catch::Approx(200.0 + std::log2(1.5)).epsilon(1e-13));
}

TEST_CASE("exact marginals") {
  const RllSpec hard2 = RllSpec::uniform(1, kNoLimit, 2);
  REQUIRE(exact_marginal(hard2, {3, 3}, 4) == Catch::Approx(16.0 / 63.0).epsilon(1e-14));
  REQUIRE(exact_marginal(RllSpec::uniform(0, kNoLimit, 2), {2, 3}, 1) == Catch::Approx(0.5).epsilon(1e-14));
  REQUIRE(exact_marginal(hard2, {1, 2}, 0) == Catch::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("exact output probability") {
  SECTION("closed form, single unconstrained cell") {
    const double p = exact_output_probability(RllSpec::uniform(0, kNoLimit, 2), {1, 1}, {0.0}, 1.0);
    const double want = std::exp(-0.5) / std::sqrt(2.0 * M_PI);
    REQUIRE(p == Catch::Approx(want).epsilon(1e-12));
  }
  SECTION("noiseless limit identifies the input") {
    const double sigma = 0.05;
    const std::vector<double> y(4, -1.0);  // BPSK image of the all-zero array
    const double p = exact_output_probability(RllSpec::uniform(1, kNoLimit, 2), {2, 2}, y, sigma);
    const double density_scale = std::pow(2.0 * M_PI * sigma * sigma, -2.0);
    REQUIRE(p / density_scale == Catch::Approx(1.0 / 7.0).epsilon(1e-9));
  }
  SECTION("guards") {
    REQUIRE_THROWS_AS(exact_output_probability(RllSpec::uniform(1, kNoLimit, 2), {2, 2}, {0, 0, 0, 0}, -1.0),
                      std::invalid_argument);
  }
}
