#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "rllgbp/gbp.hpp"

namespace rllgbp {

/// Neumaier-compensated accumulator for long sums.
struct CompensatedSum {
  double sum = 0.0, comp = 0.0;

  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

struct FreeEnergyEstimate {
  double f_hat = 0.0;    ///< region-based free energy, natural log units
  double log2_Z = 0.0;   ///< -f_hat / ln 2
  /// Per-region average energy and entropy (diagnostics, id order).
  std::vector<double> region_energy;
  std::vector<double> region_entropy;
};

/// Per-configuration ln of the product of the region's factors, computed
/// straight from the factor graph tables (independent of the engine).
inline std::vector<double> region_log_factor_table(const RegionGraph& rg, int region) {
  const Box& rb = rg.boxes[static_cast<size_t>(region)];
  if (rb.cells() > 20) throw std::invalid_argument("region too large for tabular evaluation");
  const std::uint32_t n = std::uint32_t{1} << rb.cells();
  std::vector<double> logf(n, 0.0);
  const auto vars = rg.vars_in(rb);
  for (std::int32_t fid : rg.factors_in(rb)) {
    const FactorInstance& f = rg.graph->factors[static_cast<size_t>(fid)];
    // position of each scope variable inside the region's raster order
    std::vector<int> pos(f.scope.size());
    for (size_t i = 0; i < f.scope.size(); ++i) {
      const auto it = std::lower_bound(vars.begin(), vars.end(), f.scope[i]);
      pos[i] = static_cast<int>(it - vars.begin());
    }
    for (std::uint32_t cfg = 0; cfg < n; ++cfg) {
      std::uint32_t fcfg = 0;
      for (size_t i = 0; i < pos.size(); ++i) fcfg |= ((cfg >> pos[i]) & 1u) << i;
      const double v = f.table[fcfg];
      logf[cfg] = v > 0 ? logf[cfg] + std::log(v) : kNegInf;
    }
  }
  return logf;
}

namespace detail {

struct RegionTerms {
  double energy;   // -sum_x b(x) ln f(x)
  double entropy;  // -sum_x b(x) ln b(x)
};

inline RegionTerms region_terms(const std::vector<double>& belief, const std::vector<double>& logf) {
  if (belief.size() != logf.size()) throw std::invalid_argument("belief/factor table size mismatch");
  RegionTerms t{0.0, 0.0};
  for (size_t i = 0; i < belief.size(); ++i) {
    const double b = belief[i];
    if (b <= 0.0) continue;  // 0 ln 0 := 0
    if (logf[i] == kNegInf)
      throw std::domain_error("belief support exceeds factor support");
    t.energy -= b * logf[i];
    t.entropy -= b * std::log(b);
  }
  return t;
}

}  // namespace detail

/// F_hat = sum_R c_R sum_x b_R(x) (ln b_R(x) - ln prod_{a in A_R} f_a).
inline FreeEnergyEstimate region_free_energy(const BeliefSet& bs, const RegionGraph& rg) {
  const int nr = rg.num_regions();
  FreeEnergyEstimate fe;
  fe.region_energy.assign(static_cast<size_t>(nr), 0.0);
  fe.region_entropy.assign(static_cast<size_t>(nr), 0.0);
  CompensatedSum acc;
  for (int r = 0; r < nr; ++r) {
    const int c = rg.counting[static_cast<size_t>(r)];
    const auto terms = detail::region_terms(bs.belief(r), region_log_factor_table(rg, r));
    fe.region_energy[static_cast<size_t>(r)] = terms.energy;
    fe.region_entropy[static_cast<size_t>(r)] = terms.entropy;
    if (c != 0) acc.add(c * (terms.energy - terms.entropy));
  }
  fe.f_hat = acc.value();
  fe.log2_Z = -fe.f_hat / std::numbers::ln2;
  return fe;
}

/// Same functional evaluated on caller-supplied belief tables (id order).
inline FreeEnergyEstimate region_free_energy_from_tables(const std::vector<std::vector<double>>& beliefs,
                                                         const RegionGraph& rg) {
  const int nr = rg.num_regions();
  if (static_cast<int>(beliefs.size()) != nr) throw std::invalid_argument("one belief table per region required");
  FreeEnergyEstimate fe;
  fe.region_energy.assign(static_cast<size_t>(nr), 0.0);
  fe.region_entropy.assign(static_cast<size_t>(nr), 0.0);
  CompensatedSum acc;
  for (int r = 0; r < nr; ++r) {
    const auto terms = detail::region_terms(beliefs[static_cast<size_t>(r)], region_log_factor_table(rg, r));
    fe.region_energy[static_cast<size_t>(r)] = terms.energy;
    fe.region_entropy[static_cast<size_t>(r)] = terms.entropy;
    const int c = rg.counting[static_cast<size_t>(r)];
    if (c != 0) acc.add(c * (terms.energy - terms.entropy));
  }
  fe.f_hat = acc.value();
  fe.log2_Z = -fe.f_hat / std::numbers::ln2;
  return fe;
}

/// Fast path used in per-sample loops: free energy in nats, no diagnostics.
inline double free_energy_nats(const GbpEngine& engine) {
  const RegionGraph& rg = engine.region_graph();
  const int nr = rg.num_regions();
  CompensatedSum acc;
  for (int r = 0; r < nr; ++r) {
    const int c = rg.counting[static_cast<size_t>(r)];
    if (c == 0) continue;
    acc.add(c * engine.region_contribution_nats(r));
  }
  return acc.value();
}

struct CapacityEstimate {
  RllSpec spec;
  std::vector<int> shape;
  double capacity_bits_per_symbol = 0.0;
  double log2_Z = 0.0;
  double f_hat = 0.0;
  ConvergenceReport report;
  GbpConfig config;
  double seconds = 0.0;
};

/// Full pipeline: factor graph -> region graph -> GBP -> free energy.
/// Non-convergence is flagged in the report, never thrown.
inline CapacityEstimate capacity_estimate(const RllSpec& spec, const std::vector<int>& shape,
                                          const GbpConfig& cfg = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  CapacityEstimate ce;
  ce.spec = spec;
  ce.shape = shape;
  ce.config = cfg;
  auto fg = std::make_shared<const FactorGraph>(build_factor_graph(shape, spec));
  auto rg = std::make_shared<const RegionGraph>(build_region_graph(fg, plan_basic_regions(spec)));
  auto engine = std::make_shared<GbpEngine>(rg);
  ce.report = engine->run(cfg);
  ce.f_hat = free_energy_nats(*engine);
  ce.log2_Z = -ce.f_hat / std::numbers::ln2;
  ce.capacity_bits_per_symbol = ce.log2_Z / static_cast<double>(cell_count(shape));
  ce.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return ce;
}

/// Guard-band bounds require zero rows to be admissible on every axis.
class FiniteKUnsupportedError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct ShannonBounds {
  double lower = 0.0;
  double upper = 0.0;
  int guard_width = 0;
};

/// Sandwich bounds on the infinite-size capacity from a finite square grid:
/// the estimate itself is the upper bound; tiling with per-axis all-zero
/// guard bands of width d gives the lower bound.
inline ShannonBounds shannon_bounds(const CapacityEstimate& ce) {
  for (const AxisRule& a : ce.spec.axes)
    if (a.k_finite())
      throw FiniteKUnsupportedError("guard bands of zeros violate a finite-k rule");
  const int m = ce.shape.at(0);
  for (int e : ce.shape)
    if (e != m) throw std::invalid_argument("sandwich bounds require a square/cubic grid");
  ShannonBounds b;
  b.upper = ce.capacity_bits_per_symbol;
  double ratio = 1.0;
  for (const AxisRule& a : ce.spec.axes) {
    ratio *= static_cast<double>(m) / static_cast<double>(m + a.d);
    b.guard_width = std::max(b.guard_width, a.d);
  }
  b.lower = ratio * ce.capacity_bits_per_symbol;
  return b;
}

}  // namespace rllgbp
