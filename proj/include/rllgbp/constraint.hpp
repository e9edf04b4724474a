#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rllgbp {

/// Sentinel for an unbounded maximum zero-run ("inf" in constraint strings).
inline constexpr int kNoLimit = std::numeric_limits<int>::max();

/// One axis of a run-length rule: zero-runs between successive ones must
/// have length >= d, and every zero-run must have length <= k.
struct AxisRule {
  int d = 0;
  int k = kNoLimit;

  bool k_finite() const { return k != kNoLimit; }
  bool operator==(const AxisRule&) const = default;
};

/// Per-axis (d,k) run-length constraint on a 1-D, 2-D or 3-D binary grid.
struct RllSpec {
  std::vector<AxisRule> axes;

  int dims() const { return static_cast<int>(axes.size()); }

  void validate() const {
    if (axes.empty() || axes.size() > 3)
      throw std::invalid_argument("constraint must have 1, 2 or 3 axes");
    for (const AxisRule& a : axes) {
      if (a.d < 0) throw std::invalid_argument("d must be nonnegative");
      if (a.k <= 0) throw std::invalid_argument("k must be positive");
      if (a.d >= a.k) throw std::invalid_argument("constraint requires d < k");
    }
  }

  /// Same rule on every one of `n` axes.
  static RllSpec uniform(int d, int k, int n) {
    RllSpec s;
    s.axes.assign(static_cast<size_t>(n), AxisRule{d, k});
    s.validate();
    return s;
  }

  /// Parses "d1,k1[,d2,k2[,d3,k3]]" with "inf" for an unbounded k.
  static RllSpec parse(const std::string& text) {
    RllSpec s;
    std::stringstream ss(text);
    std::string tok;
    std::vector<int> vals;
    while (std::getline(ss, tok, ',')) {
      size_t b = tok.find_first_not_of(" \t");
      size_t e = tok.find_last_not_of(" \t");
      if (b == std::string::npos) throw std::invalid_argument("empty token in constraint string");
      tok = tok.substr(b, e - b + 1);
      if (tok == "inf" || tok == "INF" || tok == "Inf")
        vals.push_back(kNoLimit);
      else {
        size_t pos = 0;
        int v = std::stoi(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument("bad token in constraint string: " + tok);
        vals.push_back(v);
      }
    }
    if (vals.empty() || vals.size() % 2 != 0 || vals.size() > 6)
      throw std::invalid_argument("constraint string must hold 1..3 'd,k' pairs");
    for (size_t i = 0; i < vals.size(); i += 2) s.axes.push_back(AxisRule{vals[i], vals[i + 1]});
    s.validate();
    return s;
  }

  /// A one-pair spec applied isotropically to `n` axes; multi-pair specs
  /// must already match `n`.
  RllSpec broadcast(int n) const {
    if (dims() == n) return *this;
    if (dims() == 1) {
      RllSpec s;
      s.axes.assign(static_cast<size_t>(n), axes[0]);
      return s;
    }
    throw std::invalid_argument("constraint axis count does not match grid dimensionality");
  }

  /// Axes in reverse order (transpose of the rule for symmetry checks).
  RllSpec transposed() const {
    RllSpec s = *this;
    std::reverse(s.axes.begin(), s.axes.end());
    return s;
  }

  std::string str() const {
    std::string out;
    for (size_t i = 0; i < axes.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(axes[i].d);
      out += ',';
      out += axes[i].k_finite() ? std::to_string(axes[i].k) : std::string("inf");
    }
    return out;
  }

  bool operator==(const RllSpec&) const = default;
};

inline std::int64_t cell_count(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int e : shape) n *= e;
  return n;
}

/// Row-major strides, last axis fastest.
inline std::vector<std::int64_t> row_major_strides(const std::vector<int>& shape) {
  std::vector<std::int64_t> st(shape.size());
  std::int64_t acc = 1;
  for (int a = static_cast<int>(shape.size()) - 1; a >= 0; --a) {
    st[static_cast<size_t>(a)] = acc;
    acc *= shape[static_cast<size_t>(a)];
  }
  return st;
}

/// Dense binary grid, row-major, 1-3 axes.
struct BinaryArray {
  std::vector<int> shape;
  std::vector<std::uint8_t> cells;

  BinaryArray() = default;
  explicit BinaryArray(std::vector<int> s) : shape(std::move(s)) {
    for (int e : shape)
      if (e < 1) throw std::invalid_argument("array extents must be positive");
    cells.assign(static_cast<size_t>(cell_count(shape)), 0);
  }

  int dims() const { return static_cast<int>(shape.size()); }
  std::int64_t size() const { return static_cast<std::int64_t>(cells.size()); }

  std::uint8_t& at(std::initializer_list<int> idx) { return cells[static_cast<size_t>(flat(idx))]; }
  std::uint8_t at(std::initializer_list<int> idx) const { return cells[static_cast<size_t>(flat(idx))]; }

  std::int64_t flat(std::initializer_list<int> idx) const {
    auto st = row_major_strides(shape);
    std::int64_t f = 0;
    size_t a = 0;
    for (int i : idx) f += st[a++] * i;
    return f;
  }

  bool operator==(const BinaryArray&) const = default;
};

enum class KernelKind : std::uint8_t {
  AtMostOneOne,   ///< window of length d+1; zero iff it holds two or more ones
  AtLeastOneOne,  ///< window of length k+1; zero iff it is all-zero
};

/// Sliding 1-D window kernel along one axis, stored as a truth table over
/// window configurations (bit i of the index = window cell i).
struct WindowKernel {
  int axis = 0;
  int window_length = 0;
  KernelKind kind = KernelKind::AtMostOneOne;
  std::vector<std::uint8_t> table;

  std::uint8_t eval(std::uint32_t window_bits) const { return table[window_bits]; }
};

/// Kernel templates whose product over all fully contained window placements
/// equals the constraint indicator. d=0 axes emit no d-kernel; unbounded-k
/// axes emit no k-kernel.
inline std::vector<WindowKernel> build_kernels(const RllSpec& spec) {
  spec.validate();
  std::vector<WindowKernel> out;
  for (int axis = 0; axis < spec.dims(); ++axis) {
    const AxisRule& r = spec.axes[static_cast<size_t>(axis)];
    if (r.d >= 1) {
      WindowKernel kd;
      kd.axis = axis;
      kd.window_length = r.d + 1;
      kd.kind = KernelKind::AtMostOneOne;
      kd.table.resize(size_t{1} << kd.window_length);
      for (std::uint32_t cfg = 0; cfg < kd.table.size(); ++cfg)
        kd.table[cfg] = std::popcount(cfg) >= 2 ? 0 : 1;
      out.push_back(std::move(kd));
    }
    if (r.k_finite()) {
      WindowKernel kk;
      kk.axis = axis;
      kk.window_length = r.k + 1;
      kk.kind = KernelKind::AtLeastOneOne;
      kk.table.resize(size_t{1} << kk.window_length);
      for (std::uint32_t cfg = 0; cfg < kk.table.size(); ++cfg) kk.table[cfg] = cfg == 0 ? 0 : 1;
      out.push_back(std::move(kk));
    }
  }
  return out;
}

/// Window-placement semantics on one line: the d-rule bites only when a
/// (d+1)-window fits in the line; the k-rule forbids k+1 consecutive zeros.
inline bool line_admissible(const std::uint8_t* p, int n, std::int64_t stride, const AxisRule& rule) {
  const bool d_active = rule.d >= 1 && n >= rule.d + 1;
  int last_one = -1;
  int zero_run = 0;
  for (int i = 0; i < n; ++i) {
    if (p[stride * i]) {
      if (d_active && last_one >= 0 && i - last_one - 1 < rule.d) return false;
      last_one = i;
      zero_run = 0;
    } else {
      ++zero_run;
      if (rule.k_finite() && zero_run > rule.k) return false;
    }
  }
  return true;
}

/// True iff every fully contained kernel window of every axis passes.
inline bool is_admissible(const BinaryArray& x, const RllSpec& spec) {
  spec.validate();
  if (spec.dims() != x.dims())
    throw std::invalid_argument("constraint and array dimensionality differ");
  const auto strides = row_major_strides(x.shape);
  const std::int64_t total = x.size();
  for (int axis = 0; axis < x.dims(); ++axis) {
    const int n = x.shape[static_cast<size_t>(axis)];
    const std::int64_t st = strides[static_cast<size_t>(axis)];
    const AxisRule& rule = spec.axes[static_cast<size_t>(axis)];
    if (rule.d < 1 && !rule.k_finite()) continue;
    // Enumerate all lines along `axis`: cells whose axis coordinate is 0.
    for (std::int64_t base = 0; base < total; ++base) {
      if ((base / st) % n != 0) continue;
      if (!line_admissible(x.cells.data() + base, n, st, rule)) return false;
    }
  }
  return true;
}

/// Product of every fully contained placement of the kernel templates;
/// equal to is_admissible by construction, kept separate as a cross-check.
inline bool kernel_product_admissible(const BinaryArray& x, const RllSpec& spec) {
  const auto kernels = build_kernels(spec);
  const auto strides = row_major_strides(x.shape);
  const std::int64_t total = x.size();
  for (const WindowKernel& ker : kernels) {
    const int n = x.shape[static_cast<size_t>(ker.axis)];
    const std::int64_t st = strides[static_cast<size_t>(ker.axis)];
    if (n < ker.window_length) continue;
    for (std::int64_t base = 0; base < total; ++base) {
      const std::int64_t coord = (base / st) % n;
      if (coord + ker.window_length > n) continue;
      std::uint32_t bits = 0;
      for (int j = 0; j < ker.window_length; ++j)
        bits |= static_cast<std::uint32_t>(x.cells[static_cast<size_t>(base + st * j)]) << j;
      if (!ker.eval(bits)) return false;
    }
  }
  return true;
}

}  // namespace rllgbp
