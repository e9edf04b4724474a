#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "rllgbp/constraint.hpp"

namespace rllgbp {

using BigInt = boost::multiprecision::cpp_int;

enum class CountMethod : std::uint8_t { BruteForce, TransferMatrix };

/// log2 of a nonnegative big integer via bit length plus mantissa correction.
inline double log2_big(const BigInt& z) {
  if (z <= 0) throw std::domain_error("log2 of nonpositive count");
  const std::int64_t bits = static_cast<std::int64_t>(boost::multiprecision::msb(z)) + 1;
  if (bits <= 62) return std::log2(static_cast<double>(z.convert_to<std::int64_t>()));
  const std::int64_t shift = bits - 62;
  const BigInt top = z >> shift;
  return std::log2(top.convert_to<double>()) + static_cast<double>(shift);
}

struct ExactCount {
  BigInt value;
  CountMethod method = CountMethod::BruteForce;

  double log2() const { return log2_big(value); }
};

inline constexpr std::int64_t kBruteForceCellLimit = 24;

/// Exact admissible-array count by exhaustive enumeration.
inline ExactCount brute_force_count(const RllSpec& spec, const std::vector<int>& shape) {
  spec.validate();
  const std::int64_t n = cell_count(shape);
  if (n > kBruteForceCellLimit) throw std::invalid_argument("brute force limited to 24 cells");
  BinaryArray x(shape);
  BigInt count = 0;
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
    for (std::int64_t i = 0; i < n; ++i) x.cells[static_cast<size_t>(i)] = (bits >> i) & 1u;
    if (is_admissible(x, spec)) ++count;
  }
  return {count, CountMethod::BruteForce};
}

namespace detail {

// Augmented per-column symbol for strip counting: trailing zero-run length
// (capped) plus whether the column has seen a one yet. A capped run is
// enough because only "run >= d" and "run > k" are ever asked.
struct ColumnSymbol {
  std::uint8_t run;
  std::uint8_t seen;
};

inline std::uint8_t run_cap(const AxisRule& r) {
  return static_cast<std::uint8_t>(r.k_finite() ? r.k : r.d);
}

// seen is immaterial once the run already satisfies the d-gap.
inline ColumnSymbol normalize(ColumnSymbol s, const AxisRule& r) {
  if (!s.seen && s.run >= r.d) s.seen = 1;
  return s;
}

// Returns false when extending the column with `bit` breaks the axis rule.
inline bool advance(ColumnSymbol& s, int bit, const AxisRule& r) {
  if (bit) {
    if (s.seen && s.run < r.d) return false;
    s = {0, 1};
  } else {
    if (r.k_finite() && s.run >= r.k) return false;
    const std::uint8_t cap = run_cap(r);
    s.run = static_cast<std::uint8_t>(std::min<int>(s.run + 1, cap));
  }
  s = normalize(s, r);
  return true;
}

}  // namespace detail

inline constexpr size_t kTransferMatrixStateBudget = 100000;

/// Exact 2-D count via row-by-row transfer of augmented column states.
/// Grid is m (axis 0, within a row) by n (axis 1, rows applied in sequence).
inline ExactCount transfer_matrix_count(const RllSpec& spec, int m, int n) {
  spec.validate();
  if (spec.dims() != 2) throw std::invalid_argument("transfer matrix requires a 2-D constraint");
  if (m < 1 || n < 1) throw std::invalid_argument("extents must be positive");
  if (m > 24) throw std::invalid_argument("strip width limited to 24");
  const AxisRule& row_rule = spec.axes[0];  // within a row of m cells
  AxisRule col_rule = spec.axes[1];         // across the n rows
  if (n < col_rule.d + 1) col_rule.d = 0;   // no (d+1)-window fits vertically

  // Horizontally admissible row masks.
  std::vector<std::uint32_t> rows;
  std::vector<std::uint8_t> line(static_cast<size_t>(m));
  for (std::uint32_t mask = 0; mask < (std::uint32_t{1} << m); ++mask) {
    for (int i = 0; i < m; ++i) line[static_cast<size_t>(i)] = (mask >> i) & 1u;
    if (line_admissible(line.data(), m, 1, row_rule)) rows.push_back(mask);
  }

  using State = std::vector<std::uint8_t>;  // packed symbols, one byte per column
  auto pack = [&](const std::vector<detail::ColumnSymbol>& cols) {
    State st(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i)
      st[static_cast<size_t>(i)] =
          static_cast<std::uint8_t>(cols[static_cast<size_t>(i)].run << 1 | cols[static_cast<size_t>(i)].seen);
    return st;
  };
  auto unpack = [&](const State& st) {
    std::vector<detail::ColumnSymbol> cols(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i)
      cols[static_cast<size_t>(i)] = {static_cast<std::uint8_t>(st[static_cast<size_t>(i)] >> 1),
                                      static_cast<std::uint8_t>(st[static_cast<size_t>(i)] & 1u)};
    return cols;
  };

  std::map<State, BigInt> cur;
  for (std::uint32_t mask : rows) {
    std::vector<detail::ColumnSymbol> cols(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
      detail::ColumnSymbol s{0, 0};
      if (!detail::advance(s, (mask >> i) & 1u, col_rule)) { cols.clear(); break; }
      cols[static_cast<size_t>(i)] = s;
    }
    if (static_cast<int>(cols.size()) == m) cur[pack(cols)] += 1;
  }

  for (int step = 1; step < n; ++step) {
    std::map<State, BigInt> next;
    for (const auto& [st, cnt] : cur) {
      const auto cols = unpack(st);
      for (std::uint32_t mask : rows) {
        auto c = cols;
        bool ok = true;
        for (int i = 0; i < m && ok; ++i) ok = detail::advance(c[static_cast<size_t>(i)], (mask >> i) & 1u, col_rule);
        if (ok) next[pack(c)] += cnt;
      }
      if (next.size() > kTransferMatrixStateBudget)
        throw std::runtime_error("transfer matrix state budget exceeded");
    }
    cur = std::move(next);
  }

  BigInt total = 0;
  for (const auto& [st, cnt] : cur) total += cnt;
  return {total, CountMethod::TransferMatrix};
}

/// P[cell = 1] under the uniform distribution over admissible arrays.
inline double exact_marginal(const RllSpec& spec, const std::vector<int>& shape, std::int64_t cell) {
  spec.validate();
  const std::int64_t n = cell_count(shape);
  if (n > kBruteForceCellLimit) throw std::invalid_argument("brute force limited to 24 cells");
  if (cell < 0 || cell >= n) throw std::invalid_argument("cell index out of range");
  BinaryArray x(shape);
  BigInt total = 0, ones = 0;
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
    for (std::int64_t i = 0; i < n; ++i) x.cells[static_cast<size_t>(i)] = (bits >> i) & 1u;
    if (!is_admissible(x, spec)) continue;
    ++total;
    if ((bits >> cell) & 1u) ++ones;
  }
  if (total == 0) throw std::domain_error("constraint admits no arrays");
  return ones.convert_to<double>() / total.convert_to<double>();
}

/// Density of the channel output y under a uniform admissible input,
/// BPSK mapping 0 -> -1, 1 -> +1 and i.i.d. Gaussian noise of variance
/// sigma^2. Ground truth for the message-passing estimate on tiny grids.
inline double exact_output_probability(const RllSpec& spec, const std::vector<int>& shape,
                                       const std::vector<double>& y, double sigma) {
  spec.validate();
  const std::int64_t n = cell_count(shape);
  if (n > kBruteForceCellLimit) throw std::invalid_argument("brute force limited to 24 cells");
  if (sigma <= 0) throw std::invalid_argument("sigma must be positive");
  if (static_cast<std::int64_t>(y.size()) != n) throw std::invalid_argument("output size mismatch");
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const double log_norm = -0.5 * std::log(2.0 * M_PI * sigma * sigma);

  BinaryArray x(shape);
  std::vector<double> logs;
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
    for (std::int64_t i = 0; i < n; ++i) x.cells[static_cast<size_t>(i)] = (bits >> i) & 1u;
    if (!is_admissible(x, spec)) continue;
    double lp = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      const double mean = x.cells[static_cast<size_t>(i)] ? 1.0 : -1.0;
      const double dlt = y[static_cast<size_t>(i)] - mean;
      lp += log_norm - dlt * dlt * inv2s2;
    }
    logs.push_back(lp);
  }
  if (logs.empty()) throw std::domain_error("constraint admits no arrays");
  double mx = logs[0];
  for (double v : logs) mx = std::max(mx, v);
  double acc = 0;
  for (double v : logs) acc += std::exp(v - mx);
  return std::exp(mx + std::log(acc) - std::log(static_cast<double>(logs.size())));
}

}  // namespace rllgbp
