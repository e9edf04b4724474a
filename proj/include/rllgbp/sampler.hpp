#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "rllgbp/gbp.hpp"

namespace rllgbp {

class RestartBudgetExceededError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// splitmix64 of (seed, index): independent per-sample RNG streams.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct SamplerDiagnostics {
  std::int64_t region_retries = 0;
  std::int64_t restarts = 0;
};

inline constexpr int kRegionRetryBudget = 32;
inline constexpr int kRestartBudget = 64;

/// Draws `count` admissible arrays by visiting basic regions in raster
/// order and sampling each region's still-unassigned variables one at a
/// time from the region belief conditioned on everything already fixed.
inline std::vector<BinaryArray> draw_samples(const RegionGraph& rg, const BeliefSet& bs, int count,
                                             std::uint64_t seed, SamplerDiagnostics* diag = nullptr) {
  if (count < 0) throw std::invalid_argument("sample count must be nonnegative");
  std::vector<BinaryArray> out;
  if (count == 0) return out;
  out.reserve(static_cast<size_t>(count));

  const int nb = rg.num_basic;
  std::vector<std::vector<double>> tables(static_cast<size_t>(nb));
  std::vector<std::vector<VarId>> vars(static_cast<size_t>(nb));
  for (int r = 0; r < nb; ++r) {
    tables[static_cast<size_t>(r)] = bs.belief(r);
    vars[static_cast<size_t>(r)] = rg.vars_in(rg.boxes[static_cast<size_t>(r)]);
  }

  std::vector<int> true_shape(rg.shape.begin(), rg.shape.begin() + rg.true_dims);
  const std::int64_t nv = rg.graph->num_vars;

  for (int s = 0; s < count; ++s) {
    std::mt19937_64 rng(split_seed(seed, static_cast<std::uint64_t>(s)));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<std::int8_t> assign(static_cast<size_t>(nv), -1);

    int restarts = 0;
    bool done = false;
    while (!done) {
      done = true;
      for (int r = 0; r < nb && done; ++r) {
        const auto& tbl = tables[static_cast<size_t>(r)];
        const auto& rv = vars[static_cast<size_t>(r)];
        const int n = static_cast<int>(rv.size());
        bool region_ok = false;
        for (int attempt = 0; attempt < kRegionRetryBudget && !region_ok; ++attempt) {
          std::uint32_t fixed_mask = 0, fixed_val = 0;
          std::vector<int> drawn_here;
          for (int p = 0; p < n; ++p)
            if (assign[static_cast<size_t>(rv[static_cast<size_t>(p)])] >= 0) {
              fixed_mask |= std::uint32_t{1} << p;
              fixed_val |= static_cast<std::uint32_t>(assign[static_cast<size_t>(rv[static_cast<size_t>(p)])]) << p;
            }
          region_ok = true;
          for (int p = 0; p < n && region_ok; ++p) {
            if (fixed_mask & (std::uint32_t{1} << p)) continue;
            double s0 = 0.0, s1 = 0.0;
            for (std::uint32_t cfg = 0; cfg < tbl.size(); ++cfg) {
              if ((cfg & fixed_mask) != fixed_val) continue;
              if (cfg & (std::uint32_t{1} << p))
                s1 += tbl[cfg];
              else
                s0 += tbl[cfg];
            }
            const double tot = s0 + s1;
            if (!(tot > 0)) {
              // conditioning hit zero mass: undo this visit's draws and retry
              region_ok = false;
              if (diag) ++diag->region_retries;
              for (int q : drawn_here) assign[static_cast<size_t>(rv[static_cast<size_t>(q)])] = -1;
              break;
            }
            const int bit = uni(rng) < s1 / tot ? 1 : 0;
            fixed_mask |= std::uint32_t{1} << p;
            fixed_val |= static_cast<std::uint32_t>(bit) << p;
            assign[static_cast<size_t>(rv[static_cast<size_t>(p)])] = static_cast<std::int8_t>(bit);
            drawn_here.push_back(p);
          }
        }
        if (!region_ok) {
          if (diag) ++diag->restarts;
          if (++restarts > kRestartBudget)
            throw RestartBudgetExceededError("sampler restart budget exceeded at sample " + std::to_string(s));
          std::fill(assign.begin(), assign.end(), -1);
          done = false;  // restart the raster sweep
        }
      }
    }

    BinaryArray x(true_shape);
    for (std::int64_t v = 0; v < nv; ++v) {
      if (assign[static_cast<size_t>(v)] < 0) throw std::logic_error("sampler left a variable unassigned");
      x.cells[static_cast<size_t>(v)] = static_cast<std::uint8_t>(assign[static_cast<size_t>(v)]);
    }
    // Region beliefs are supported only on locally admissible windows, so
    // the factor product must accept the sample; verify anyway.
    for (const FactorInstance& f : rg.graph->factors) {
      std::uint32_t fcfg = 0;
      for (size_t i = 0; i < f.scope.size(); ++i)
        fcfg |= static_cast<std::uint32_t>(x.cells[static_cast<size_t>(f.scope[i])]) << i;
      if (!(f.table[fcfg] > 0)) throw std::logic_error("sampler produced an inadmissible array");
    }
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace rllgbp
