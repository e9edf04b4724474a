#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "rllgbp/free_energy.hpp"
#include "rllgbp/sampler.hpp"

namespace rllgbp {

/// Memoryless AWGN channel; SNR(dB) = 10 log10(1/sigma^2).
struct AwgnChannel {
  double sigma2 = 1.0;
  double snr_db = 0.0;

  static AwgnChannel from_snr_db(double db) { return {std::pow(10.0, -db / 10.0), db}; }
  static AwgnChannel from_sigma2(double s2) {
    if (!(s2 > 0)) throw std::invalid_argument("sigma^2 must be positive");
    return {s2, 10.0 * std::log10(1.0 / s2)};
  }
};

inline double bpsk(std::uint8_t bit) { return bit ? 1.0 : -1.0; }

/// H(Y|X) = (N/2) log2(2 pi e sigma^2) bits.
inline double conditional_entropy_bits(const AwgnChannel& ch, std::int64_t n) {
  if (!(ch.sigma2 > 0)) throw std::invalid_argument("sigma^2 must be positive");
  return 0.5 * static_cast<double>(n) * std::log2(2.0 * std::numbers::pi * std::numbers::e * ch.sigma2);
}

inline double gaussian_likelihood(double y, double mean, double sigma2) {
  const double d = y - mean;
  return std::exp(-d * d / (2.0 * sigma2)) / std::sqrt(2.0 * std::numbers::pi * sigma2);
}

struct OutputSample {
  std::vector<double> y;
  std::vector<int> shape;
  int input_index = -1;
  std::uint64_t seed = 0;
};

/// y_i = BPSK(x_i) + N(0, sigma^2), i.i.d. per cell, reproducible per seed.
inline std::vector<OutputSample> simulate_outputs(const std::vector<BinaryArray>& inputs, const AwgnChannel& ch,
                                                  std::uint64_t seed) {
  std::vector<OutputSample> out(inputs.size());
  const double sigma = std::sqrt(ch.sigma2);
  for (size_t l = 0; l < inputs.size(); ++l) {
    std::mt19937_64 rng(split_seed(seed, l));
    std::normal_distribution<double> noise(0.0, 1.0);
    OutputSample& os = out[l];
    os.shape = inputs[l].shape;
    os.input_index = static_cast<int>(l);
    os.seed = seed;
    os.y.resize(inputs[l].cells.size());
    for (size_t i = 0; i < os.y.size(); ++i) os.y[i] = bpsk(inputs[l].cells[i]) + sigma * noise(rng);
  }
  return out;
}

/// ln p(y) for one output: attaches Gaussian evidence to the constraint
/// graph, runs GBP, and returns ln Z(y) - ln Z_noiseless.
inline double output_log_probability(const OutputSample& y, const RllSpec& spec, const AwgnChannel& ch,
                                     double noiseless_log_z, const GbpConfig& cfg = {}) {
  const FactorGraph base = build_factor_graph(y.shape, spec);
  std::vector<EvidenceTable> tables(static_cast<size_t>(base.num_vars));
  for (std::int64_t i = 0; i < base.num_vars; ++i)
    tables[static_cast<size_t>(i)] = {gaussian_likelihood(y.y[static_cast<size_t>(i)], -1.0, ch.sigma2),
                                      gaussian_likelihood(y.y[static_cast<size_t>(i)], +1.0, ch.sigma2)};
  auto fg = std::make_shared<const FactorGraph>(attach_evidence(base, tables));
  auto rg = std::make_shared<const RegionGraph>(build_region_graph(fg, plan_basic_regions(spec)));
  GbpEngine engine(rg);
  engine.run(cfg);
  return -free_energy_nats(engine) - noiseless_log_z;
}

struct InfoRateEstimate {
  double rate_bits_per_symbol = 0.0;
  double h_y_estimate = 0.0;   ///< total output entropy estimate, bits
  double h_y_given_x = 0.0;    ///< analytic conditional entropy, bits
  double std_error = 0.0;      ///< standard error of the rate
  int L = 0;
  double noiseless_capacity_reference = 0.0;
  double noiseless_log_z = 0.0;
  int non_converged_samples = 0;
  int cold_restarts = 0;
  double seconds = 0.0;
  std::vector<double> per_sample_log_p;  ///< ln p(y), nats
};

/// Monte-Carlo mutual information rate: draws L admissible inputs, pushes
/// them through the channel, and estimates H(Y) from the per-output GBP
/// partition functions. Region-graph topology is built once; per sample
/// only evidence tables change, with messages warm-started sample to sample.
inline InfoRateEstimate estimate_info_rate(const RllSpec& spec, const std::vector<int>& shape,
                                           const AwgnChannel& ch, int L, std::uint64_t seed,
                                           const GbpConfig& cfg = {}) {
  if (shape.size() != 2) throw std::invalid_argument("information rate estimation requires a 2-D grid");
  if (L < 1) throw std::invalid_argument("L must be at least 1");
  const auto t0 = std::chrono::steady_clock::now();
  const std::int64_t n = cell_count(shape);

  // Noiseless reference run (normalization constant and sampler beliefs).
  auto fg0 = std::make_shared<const FactorGraph>(build_factor_graph(shape, spec));
  const BasicRegionPlan plan = plan_basic_regions(spec);
  auto rg0 = std::make_shared<const RegionGraph>(build_region_graph(fg0, plan));
  auto engine0 = std::make_shared<GbpEngine>(rg0);
  const ConvergenceReport rep0 = engine0->run(cfg);
  if (!rep0.converged) throw std::runtime_error("noiseless reference run did not converge");
  const double log_z0 = -free_energy_nats(*engine0);

  InfoRateEstimate est;
  est.L = L;
  est.noiseless_log_z = log_z0;
  est.noiseless_capacity_reference = log_z0 / std::numbers::ln2 / static_cast<double>(n);
  est.h_y_given_x = conditional_entropy_bits(ch, n);

  const BeliefSet bs0(engine0, rep0);
  const std::vector<BinaryArray> inputs = draw_samples(*rg0, bs0, L, split_seed(seed, 1));
  const std::vector<OutputSample> outputs = simulate_outputs(inputs, ch, split_seed(seed, 2));

  // Evidence-bearing graph, topology shared across all samples.
  std::vector<EvidenceTable> ones(static_cast<size_t>(n), EvidenceTable{1.0, 1.0});
  auto fge = std::make_shared<const FactorGraph>(attach_evidence(*fg0, ones));
  auto rge = std::make_shared<const RegionGraph>(build_region_graph(fge, plan));
  const GbpEngine proto(rge);

  est.per_sample_log_p.assign(static_cast<size_t>(L), 0.0);
  int bad = 0, cold = 0;
#pragma omp parallel
  {
    GbpEngine engine(proto);
#pragma omp for schedule(static) reduction(+ : bad, cold)
    for (int l = 0; l < L; ++l) {
      const OutputSample& os = outputs[static_cast<size_t>(l)];
      for (std::int64_t i = 0; i < n; ++i)
        engine.set_evidence(static_cast<VarId>(i),
                            gaussian_likelihood(os.y[static_cast<size_t>(i)], -1.0, ch.sigma2),
                            gaussian_likelihood(os.y[static_cast<size_t>(i)], +1.0, ch.sigma2));
      ConvergenceReport rep = engine.run(cfg);
      if (!rep.converged) {
        engine.reset_messages();
        rep = engine.run(cfg);
        ++cold;
        if (!rep.converged) ++bad;
      }
      est.per_sample_log_p[static_cast<size_t>(l)] = -free_energy_nats(engine) - log_z0;
    }
  }
  est.non_converged_samples = bad;
  est.cold_restarts = cold;

  // Per-sample rate statistic; mean and standard error.
  double mean_lp = 0.0;
  for (double lp : est.per_sample_log_p) mean_lp += lp;
  mean_lp /= L;
  est.h_y_estimate = -mean_lp / std::numbers::ln2;
  {
    CompensatedSum m2;
    const double nl2 = static_cast<double>(n) * std::numbers::ln2;
    const double mean_rate = (-mean_lp / std::numbers::ln2 - est.h_y_given_x) / static_cast<double>(n);
    est.rate_bits_per_symbol = mean_rate;
    for (double lp : est.per_sample_log_p) {
      const double r = (-lp / nl2) - est.h_y_given_x / static_cast<double>(n);
      m2.add((r - mean_rate) * (r - mean_rate));
    }
    est.std_error = L > 1 ? std::sqrt(m2.value() / (L - 1) / L) : 0.0;
  }
  est.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return est;
}

}  // namespace rllgbp
