#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rllgbp/constraint.hpp"

namespace rllgbp {

using VarId = std::int32_t;

enum class FactorKind : std::uint8_t { Constraint, Evidence };

/// One placed factor. The table is indexed by scope configuration with
/// bit i of the index carrying the value of scope[i].
struct FactorInstance {
  std::int32_t id = -1;
  FactorKind kind = FactorKind::Constraint;
  std::vector<VarId> scope;
  std::vector<double> table;

  int scope_size() const { return static_cast<int>(scope.size()); }
};

/// Per-variable channel likelihoods (p(y|x=0), p(y|x=1)).
using EvidenceTable = std::array<double, 2>;

/// Grid factor graph: one binary variable per cell plus window-kernel
/// constraint factors and optional per-variable evidence factors.
struct FactorGraph {
  std::vector<int> shape;
  std::int64_t num_vars = 0;
  std::vector<FactorInstance> factors;
  /// Index into `factors` of the evidence factor of each variable, -1 if none.
  std::vector<std::int32_t> evidence_factor;

  int dims() const { return static_cast<int>(shape.size()); }
};

/// Instantiates every fully contained window placement of every kernel.
inline FactorGraph build_factor_graph(const std::vector<int>& shape, const RllSpec& spec) {
  spec.validate();
  if (static_cast<int>(shape.size()) != spec.dims())
    throw std::invalid_argument("shape and constraint dimensionality differ");
  for (int e : shape)
    if (e < 1) throw std::invalid_argument("grid extents must be positive");

  FactorGraph g;
  g.shape = shape;
  g.num_vars = cell_count(shape);
  g.evidence_factor.assign(static_cast<size_t>(g.num_vars), -1);

  const auto strides = row_major_strides(shape);
  for (const WindowKernel& ker : build_kernels(spec)) {
    const int n = shape[static_cast<size_t>(ker.axis)];
    const std::int64_t st = strides[static_cast<size_t>(ker.axis)];
    if (n < ker.window_length) continue;
    for (std::int64_t base = 0; base < g.num_vars; ++base) {
      const std::int64_t coord = (base / st) % n;
      if (coord + ker.window_length > n) continue;
      FactorInstance f;
      f.id = static_cast<std::int32_t>(g.factors.size());
      f.kind = FactorKind::Constraint;
      f.scope.resize(static_cast<size_t>(ker.window_length));
      for (int j = 0; j < ker.window_length; ++j)
        f.scope[static_cast<size_t>(j)] = static_cast<VarId>(base + st * j);
      f.table.assign(ker.table.begin(), ker.table.end());
      g.factors.push_back(std::move(f));
    }
  }
  return g;
}

/// Returns a copy of `g` with one evidence factor appended per variable.
inline FactorGraph attach_evidence(const FactorGraph& g, const std::vector<EvidenceTable>& tables) {
  if (static_cast<std::int64_t>(tables.size()) != g.num_vars)
    throw std::invalid_argument("one evidence table per variable required");
  for (const EvidenceTable& t : tables)
    for (double v : t)
      if (!(v > 0) || !std::isfinite(v))
        throw std::invalid_argument("evidence entries must be finite and positive");

  FactorGraph out = g;
  for (std::int64_t v = 0; v < g.num_vars; ++v) {
    FactorInstance f;
    f.id = static_cast<std::int32_t>(out.factors.size());
    f.kind = FactorKind::Evidence;
    f.scope = {static_cast<VarId>(v)};
    f.table = {tables[static_cast<size_t>(v)][0], tables[static_cast<size_t>(v)][1]};
    out.evidence_factor[static_cast<size_t>(v)] = f.id;
    out.factors.push_back(std::move(f));
  }
  return out;
}

}  // namespace rllgbp
