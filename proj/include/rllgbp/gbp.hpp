#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#ifdef __BMI2__
#include <immintrin.h>
#endif

#include "rllgbp/region_graph.hpp"

namespace rllgbp {

enum class Schedule : std::uint8_t { Synchronous, Sequential };

struct GbpConfig {
  double damping = 0.5;          ///< weight on the previous message, in [0,1)
  double tolerance = 1e-9;       ///< L-inf residual on log messages
  int max_iterations = 10000;
  Schedule schedule = Schedule::Synchronous;
  std::uint64_t seed = 0;        ///< sequential-schedule shuffle seed
  bool check_consistency = true; ///< parent/child belief agreement at the end

  void validate() const {
    if (!(damping >= 0.0 && damping < 1.0)) throw std::invalid_argument("damping must be in [0,1)");
    if (!(tolerance > 0)) throw std::invalid_argument("tolerance must be positive");
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be positive");
  }
};

struct ConvergenceReport {
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  double consistency_residual = std::numeric_limits<double>::quiet_NaN();
};

/// Raised when the constraints (plus evidence) admit no configuration.
class EmptySupportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

namespace detail {
/// Atomic that copies by value so the owning class stays copyable.
struct CopyableAtomicI32 {
  std::atomic<std::int32_t> v{-1};
  CopyableAtomicI32() = default;
  CopyableAtomicI32(const CopyableAtomicI32& o) : v(o.v.load()) {}
  CopyableAtomicI32& operator=(const CopyableAtomicI32& o) {
    v.store(o.v.load());
    return *this;
  }
  void store(std::int32_t x, std::memory_order mo = std::memory_order_seq_cst) { v.store(x, mo); }
  std::int32_t load(std::memory_order mo = std::memory_order_seq_cst) const { return v.load(mo); }
};
}  // namespace detail

inline std::uint32_t gather_bits(std::uint32_t cfg, std::uint32_t mask) {
#ifdef __BMI2__
  return _pext_u32(cfg, mask);
#else
  std::uint32_t out = 0;
  int o = 0;
  while (mask) {
    const int b = std::countr_zero(mask);
    out |= ((cfg >> b) & 1u) << o++;
    mask &= mask - 1;
  }
  return out;
#endif
}

/// Parent-to-child generalized belief propagation on a region graph.
/// Messages live on Hasse edges in log domain with explicit support masks;
/// constraint kernels contribute static supports, positive-valued factors
/// contribute log tables that may be rewritten between runs (set_evidence).
class GbpEngine {
 public:
  explicit GbpEngine(std::shared_ptr<const RegionGraph> rg) : rg_(std::move(rg)) {
    if (!rg_) throw std::invalid_argument("null region graph");
    const auto st = row_major_strides(rg_->shape);
    strides_ = {st[0], st[1], st[2]};
    build_factor_data();
    build_edge_plans();
    reset_messages();
  }

  const RegionGraph& region_graph() const { return *rg_; }

  /// Uniform (constant, fully supported) messages.
  void reset_messages() {
    msg_log_[0].assign(msg_total_, 0.0);
    msg_sup_[0].assign(msg_total_, 1);
    msg_log_[1].assign(msg_total_, 0.0);
    msg_sup_[1].assign(msg_total_, 1);
    cur_ = 0;
  }

  /// Rewrites the log table of a variable's evidence factor.
  void set_evidence(VarId var, double like0, double like1) {
    if (var < 0 || var >= rg_->graph->num_vars) throw std::invalid_argument("variable out of range");
    const std::int32_t f = rg_->graph->evidence_factor[static_cast<size_t>(var)];
    if (f < 0) throw std::invalid_argument("variable has no evidence factor");
    if (!(like0 > 0) || !(like1 > 0) || !std::isfinite(like0) || !std::isfinite(like1))
      throw std::invalid_argument("evidence entries must be finite and positive");
    const std::uint64_t off = factor_log_offset_[static_cast<size_t>(f)];
    factor_log_[off] = std::log(like0);
    factor_log_[off + 1] = std::log(like1);
  }

  ConvergenceReport run(const GbpConfig& cfg) {
    cfg.validate();
    ConvergenceReport rep;
    const int ne = static_cast<int>(plans_.size());
    std::vector<std::int32_t> order(static_cast<size_t>(ne));
    for (int e = 0; e < ne; ++e) order[static_cast<size_t>(e)] = e;
    std::mt19937_64 rng(cfg.seed);

    empty_support_edge_.store(-1, std::memory_order_relaxed);
    for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
      double residual = 0.0;
      if (cfg.schedule == Schedule::Synchronous) {
        const int src = cur_, dst = 1 - cur_;
#pragma omp parallel
        {
          Scratch sc(max_parent_bits_, max_child_bits_);
          double local = 0.0;
#pragma omp for schedule(dynamic, 64) nowait
          for (int e = 0; e < ne; ++e)
            local = std::max(local, update_edge(e, src, src, dst, cfg.damping, sc));
#pragma omp critical
          residual = std::max(residual, local);
        }
        cur_ = dst;
      } else {
        std::shuffle(order.begin(), order.end(), rng);
        Scratch sc(max_parent_bits_, max_child_bits_);
        for (std::int32_t e : order)
          residual = std::max(residual, update_edge(e, cur_, cur_, cur_, cfg.damping, sc));
      }
      if (empty_support_edge_.load(std::memory_order_relaxed) >= 0)
        throw EmptySupportError("no jointly admissible configuration (edge " +
                                std::to_string(empty_support_edge_.load()) + ")");
      rep.iterations = iter;
      rep.residual = residual;
      if (residual <= cfg.tolerance) {
        rep.converged = true;
        break;
      }
    }
    if (ne == 0) {
      rep.iterations = std::max(rep.iterations, 1);
      rep.converged = true;
      rep.residual = 0.0;
    }
    if (cfg.check_consistency) rep.consistency_residual = consistency_residual();
    return rep;
  }

  /// Normalized belief table of a region; exact zeros off support.
  std::vector<double> belief(int region) const {
    std::vector<double> logw, sup;
    region_log_weights(region, logw, sup);
    const size_t n = logw.size();
    std::vector<double> out(n, 0.0);
    double mx = kNegInf;
    for (size_t i = 0; i < n; ++i)
      if (sup[i] > 0) mx = std::max(mx, logw[i]);
    if (mx == kNegInf) throw EmptySupportError("region belief has empty support");
    double tot = 0.0;
    for (size_t i = 0; i < n; ++i)
      if (sup[i] > 0) tot += std::exp(logw[i] - mx);
    for (size_t i = 0; i < n; ++i)
      if (sup[i] > 0) out[i] = std::exp(logw[i] - mx) / tot;
    return out;
  }

  /// Region's free-energy term: sum_x b(x) (ln b(x) - ln prod_{A_R} f).
  double region_contribution_nats(int region) const {
    std::vector<double> logw, sup;
    region_log_weights(region, logw, sup);
    std::vector<double> logf;
    region_log_factors(region, logf);
    const size_t n = logw.size();
    double mx = kNegInf;
    for (size_t i = 0; i < n; ++i)
      if (sup[i] > 0) mx = std::max(mx, logw[i]);
    if (mx == kNegInf) throw EmptySupportError("region belief has empty support");
    double tot = 0.0;
    for (size_t i = 0; i < n; ++i)
      if (sup[i] > 0) tot += std::exp(logw[i] - mx);
    const double lse = mx + std::log(tot);
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
      if (sup[i] <= 0) continue;
      const double b = std::exp(logw[i] - lse);
      // ln b - ln f = (logw - lse) - logf, with logw = logf + messages
      acc += b * ((logw[i] - lse) - logf[i]);
    }
    return acc;
  }

  /// Max |marg_C b_P - b_C| over all edges.
  double consistency_residual() const {
    double worst = 0.0;
    const int nr = rg_->num_regions();
    for (int p = 0; p < nr; ++p) {
      const std::int32_t b0 = rg_->child_begin[static_cast<size_t>(p)];
      const std::int32_t b1 = rg_->child_begin[static_cast<size_t>(p) + 1];
      if (b0 == b1) continue;
      const std::vector<double> bp = belief(p);
      for (std::int32_t i = b0; i < b1; ++i) {
        const std::int32_t e = rg_->child_edges[static_cast<size_t>(i)];
        const EdgePlan& pl = plans_[static_cast<size_t>(e)];
        const std::vector<double> bc = belief(pl.child);
        std::vector<double> marg(bc.size(), 0.0);
        for (std::uint32_t pcfg = 0; pcfg < bp.size(); ++pcfg)
          marg[gather_bits(pcfg, pl.child_gather)] += bp[pcfg];
        for (size_t c = 0; c < bc.size(); ++c) worst = std::max(worst, std::abs(marg[c] - bc[c]));
      }
    }
    return worst;
  }

 private:
  struct MsgRef {
    std::uint32_t edge;
    std::uint32_t gather;
  };
  struct ValRef {
    std::uint32_t factor;
    std::uint32_t gather;
  };
  struct EdgePlan {
    std::int32_t parent, child;
    std::uint8_t pbits, cbits;
    std::uint32_t child_gather;
    std::uint64_t msg_offset;   // into message arena, 2^cbits entries
    std::uint64_t sup_offset;   // into support-word arena
    std::uint32_t vf_begin, vf_end;
    std::uint32_t nm_begin, nm_end;
    std::uint32_t dm_begin, dm_end;
  };
  struct Scratch {
    std::vector<std::uint32_t> cfgs;
    std::vector<double> vals;
    std::vector<double> cmax, cacc, cden;
    std::vector<std::uint8_t> cok;
    explicit Scratch(int pbits, int cbits)
        : cmax(size_t{1} << cbits), cacc(size_t{1} << cbits), cden(size_t{1} << cbits), cok(size_t{1} << cbits) {
      cfgs.reserve(size_t{1} << pbits);
      vals.reserve(size_t{1} << pbits);
    }
  };

  static std::uint32_t box_gather_mask(const Box& outer, const Box& inner) {
    std::uint32_t mask = 0;
    const int l1 = outer.len(1), l2 = outer.len(2);
    for (int i = inner.lo[0]; i < inner.hi[0]; ++i)
      for (int j = inner.lo[1]; j < inner.hi[1]; ++j)
        for (int k = inner.lo[2]; k < inner.hi[2]; ++k) {
          const int pos = ((i - outer.lo[0]) * l1 + (j - outer.lo[1])) * l2 + (k - outer.lo[2]);
          mask |= std::uint32_t{1} << pos;
        }
    return mask;
  }

  /// Gather mask of a factor's (sorted) scope within a region box.
  std::uint32_t scope_gather_mask(std::int32_t f, const Box& outer) const {
    std::uint32_t mask = 0;
    for (VarId v : sorted_scope_[static_cast<size_t>(f)]) {
      std::int64_t rem = v;
      int coord[3];
      for (int a = 0; a < 3; ++a) {
        coord[a] = static_cast<int>(rem / strides_[static_cast<size_t>(a)]);
        rem %= strides_[static_cast<size_t>(a)];
      }
      const int pos = ((coord[0] - outer.lo[0]) * outer.len(1) + (coord[1] - outer.lo[1])) * outer.len(2) +
                      (coord[2] - outer.lo[2]);
      mask |= std::uint32_t{1} << pos;
    }
    return mask;
  }

  template <typename Fn>
  void for_each_subregion(const Box& b, Fn&& fn) const {
    Box s;
    for (s.lo[0] = b.lo[0]; s.lo[0] < b.hi[0]; ++s.lo[0])
      for (s.hi[0] = s.lo[0] + 1; s.hi[0] <= b.hi[0]; ++s.hi[0]) {
        if (!rg_->interval_in_closure(0, s.lo[0], s.hi[0])) continue;
        for (s.lo[1] = b.lo[1]; s.lo[1] < b.hi[1]; ++s.lo[1])
          for (s.hi[1] = s.lo[1] + 1; s.hi[1] <= b.hi[1]; ++s.hi[1]) {
            if (!rg_->interval_in_closure(1, s.lo[1], s.hi[1])) continue;
            for (s.lo[2] = b.lo[2]; s.lo[2] < b.hi[2]; ++s.lo[2])
              for (s.hi[2] = s.lo[2] + 1; s.hi[2] <= b.hi[2]; ++s.hi[2]) {
                if (!rg_->interval_in_closure(2, s.lo[2], s.hi[2])) continue;
                const int id = rg_->region_of(s);
                if (id >= 0) fn(id, s);
              }
          }
      }
  }

  void build_factor_data() {
    const FactorGraph& g = *rg_->graph;
    const size_t nf = g.factors.size();
    sorted_scope_.resize(nf);
    factor_log_offset_.resize(nf);
    factor_sup_.resize(nf);
    factor_mask_only_.resize(nf);
    std::uint64_t off = 0;
    for (size_t f = 0; f < nf; ++f) {
      const FactorInstance& fi = g.factors[f];
      const int ns = fi.scope_size();
      if (ns > 20) throw std::invalid_argument("factor scope too large");
      // Permutation from sorted-scope configs to original configs.
      std::vector<int> perm(static_cast<size_t>(ns));
      for (int i = 0; i < ns; ++i) perm[static_cast<size_t>(i)] = i;
      std::sort(perm.begin(), perm.end(),
                [&](int a, int b) { return fi.scope[static_cast<size_t>(a)] < fi.scope[static_cast<size_t>(b)]; });
      sorted_scope_[f].resize(static_cast<size_t>(ns));
      for (int i = 0; i < ns; ++i) sorted_scope_[f][static_cast<size_t>(i)] = fi.scope[static_cast<size_t>(perm[i])];

      const size_t tn = size_t{1} << ns;
      factor_log_offset_[f] = off;
      factor_sup_[f].assign(tn, 1);
      bool pure01 = true;
      for (size_t scfg = 0; scfg < tn; ++scfg) {
        std::uint32_t ocfg = 0;
        for (int i = 0; i < ns; ++i) ocfg |= ((scfg >> i) & 1u) << perm[static_cast<size_t>(i)];
        const double v = fi.table[ocfg];
        if (v < 0 || !std::isfinite(v)) throw std::invalid_argument("factor tables must be finite and nonnegative");
        if (v != 0.0 && v != 1.0) pure01 = false;
        factor_sup_[f][scfg] = v > 0 ? 1 : 0;
      }
      // Evidence tables get log storage even when currently {0,1}-valued
      // so that set_evidence can rewrite them in place.
      const bool mask_only = pure01 && fi.kind != FactorKind::Evidence;
      factor_mask_only_[f] = mask_only;
      if (!mask_only) {
        factor_log_.resize(off + tn);
        for (size_t scfg = 0; scfg < tn; ++scfg) {
          std::uint32_t ocfg = 0;
          for (int i = 0; i < ns; ++i) ocfg |= ((scfg >> i) & 1u) << perm[static_cast<size_t>(i)];
          const double v = fi.table[ocfg];
          factor_log_[off + scfg] = v > 0 ? std::log(v) : 0.0;
        }
        off += tn;
      }
    }
    factor_log_.resize(off);
  }

  void build_edge_plans() {
    const int ne = rg_->num_edges();
    plans_.resize(static_cast<size_t>(ne));
    tmp_refs_.resize(static_cast<size_t>(ne));
    max_parent_bits_ = 0;
    max_child_bits_ = 0;

    // Fixed per-edge metadata and arena sizes first.
    std::uint64_t msg_off = 0, sup_off = 0;
    for (int e = 0; e < ne; ++e) {
      EdgePlan& pl = plans_[static_cast<size_t>(e)];
      pl.parent = rg_->edges[static_cast<size_t>(e)].first;
      pl.child = rg_->edges[static_cast<size_t>(e)].second;
      const Box& pb = rg_->boxes[static_cast<size_t>(pl.parent)];
      const Box& cb = rg_->boxes[static_cast<size_t>(pl.child)];
      const std::int64_t pc = pb.cells(), cc = cb.cells();
      if (pc > 20) throw std::invalid_argument("region too large for tabular messages");
      pl.pbits = static_cast<std::uint8_t>(pc);
      pl.cbits = static_cast<std::uint8_t>(cc);
      max_parent_bits_ = std::max<int>(max_parent_bits_, pl.pbits);
      max_child_bits_ = std::max<int>(max_child_bits_, pl.cbits);
      pl.child_gather = box_gather_mask(pb, cb);
      pl.msg_offset = msg_off;
      msg_off += std::uint64_t{1} << pl.cbits;
      pl.sup_offset = sup_off;
      sup_off += ((std::uint64_t{1} << pl.pbits) + 63) / 64;
    }
    msg_total_ = msg_off;
    static_sup_.assign(sup_off, ~std::uint64_t{0});

#pragma omp parallel for schedule(dynamic, 256)
    for (int e = 0; e < ne; ++e) build_one_plan(e);

    // Flatten the per-edge reference lists.
    std::uint32_t vf = 0, nm = 0, dm = 0;
    for (int e = 0; e < ne; ++e) {
      const auto& tmp = tmp_refs_[static_cast<size_t>(e)];
      vf += static_cast<std::uint32_t>(tmp.vf.size());
      nm += static_cast<std::uint32_t>(tmp.nm.size());
      dm += static_cast<std::uint32_t>(tmp.dm.size());
    }
    val_refs_.reserve(vf);
    num_refs_.reserve(nm);
    den_refs_.reserve(dm);
    for (int e = 0; e < ne; ++e) {
      EdgePlan& pl = plans_[static_cast<size_t>(e)];
      auto& tmp = tmp_refs_[static_cast<size_t>(e)];
      pl.vf_begin = static_cast<std::uint32_t>(val_refs_.size());
      val_refs_.insert(val_refs_.end(), tmp.vf.begin(), tmp.vf.end());
      pl.vf_end = static_cast<std::uint32_t>(val_refs_.size());
      pl.nm_begin = static_cast<std::uint32_t>(num_refs_.size());
      num_refs_.insert(num_refs_.end(), tmp.nm.begin(), tmp.nm.end());
      pl.nm_end = static_cast<std::uint32_t>(num_refs_.size());
      pl.dm_begin = static_cast<std::uint32_t>(den_refs_.size());
      den_refs_.insert(den_refs_.end(), tmp.dm.begin(), tmp.dm.end());
      pl.dm_end = static_cast<std::uint32_t>(den_refs_.size());
      tmp.vf.clear();
      tmp.vf.shrink_to_fit();
      tmp.nm.clear();
      tmp.nm.shrink_to_fit();
      tmp.dm.clear();
      tmp.dm.shrink_to_fit();
    }
    tmp_refs_.clear();
    tmp_refs_.shrink_to_fit();
  }

  /// Edge index of (parent, child) via the parent's outgoing CSR slice.
  std::int32_t edge_index(int parent, int child) const {
    for (std::int32_t i = rg_->child_begin[static_cast<size_t>(parent)];
         i < rg_->child_begin[static_cast<size_t>(parent) + 1]; ++i) {
      const std::int32_t e = rg_->child_edges[static_cast<size_t>(i)];
      if (rg_->edges[static_cast<size_t>(e)].second == child) return e;
    }
    return -1;
  }

  void build_one_plan(int e) {
    EdgePlan& pl = plans_[static_cast<size_t>(e)];
    const Box& pb = rg_->boxes[static_cast<size_t>(pl.parent)];
    const Box& cb = rg_->boxes[static_cast<size_t>(pl.child)];
    auto& tmp = tmp_refs_[static_cast<size_t>(e)];

    // Factors in A_P \ A_C: value terms and static constraint support.
    std::uint64_t* sup = static_sup_.data() + pl.sup_offset;
    const auto fa_p = rg_->factors_in(pb);
    for (std::int32_t f : fa_p) {
      bool in_child = true;
      for (VarId v : sorted_scope_[static_cast<size_t>(f)]) {
        std::int64_t rem = v;
        for (int a = 0; a < 3; ++a) {
          const int coord = static_cast<int>(rem / strides_[static_cast<size_t>(a)]);
          rem %= strides_[static_cast<size_t>(a)];
          if (coord < cb.lo[static_cast<size_t>(a)] || coord >= cb.hi[static_cast<size_t>(a)]) in_child = false;
        }
        if (!in_child) break;
      }
      if (in_child) continue;
      const std::uint32_t fmask = scope_gather_mask(f, pb);
      if (!factor_mask_only_[static_cast<size_t>(f)])
        tmp.vf.push_back({static_cast<std::uint32_t>(f), fmask});
      const auto& fsup = factor_sup_[static_cast<size_t>(f)];
      const std::uint32_t np = std::uint32_t{1} << pl.pbits;
      for (std::uint32_t pcfg = 0; pcfg < np; ++pcfg)
        if (!fsup[gather_bits(pcfg, fmask)]) sup[pcfg >> 6] &= ~(std::uint64_t{1} << (pcfg & 63));
    }
    // Clear tail bits beyond 2^pbits.
    const std::uint32_t np = std::uint32_t{1} << pl.pbits;
    const std::uint64_t nwords = (std::uint64_t{np} + 63) / 64;
    if (np & 63) sup[nwords - 1] &= (std::uint64_t{1} << (np & 63)) - 1;

    // Numerator messages: into E(P)\E(C) from outside E(P).
    for_each_subregion(pb, [&](int j, const Box& jb) {
      if (cb.contains(jb)) return;
      for (std::int32_t i = rg_->parent_begin[static_cast<size_t>(j)];
           i < rg_->parent_begin[static_cast<size_t>(j) + 1]; ++i) {
        const std::int32_t ie = rg_->parent_edges[static_cast<size_t>(i)];
        const int src = rg_->edges[static_cast<size_t>(ie)].first;
        if (pb.contains(rg_->boxes[static_cast<size_t>(src)])) continue;
        tmp.nm.push_back({static_cast<std::uint32_t>(ie), box_gather_mask(pb, jb)});
      }
    });
    // Denominator messages: into E(C) from E(P)\E(C), excluding this edge.
    for_each_subregion(cb, [&](int j, const Box& jb) {
      for (std::int32_t i = rg_->parent_begin[static_cast<size_t>(j)];
           i < rg_->parent_begin[static_cast<size_t>(j) + 1]; ++i) {
        const std::int32_t ie = rg_->parent_edges[static_cast<size_t>(i)];
        if (ie == e) continue;
        const Box& ib = rg_->boxes[static_cast<size_t>(rg_->edges[static_cast<size_t>(ie)].first)];
        if (!pb.contains(ib) || cb.contains(ib)) continue;
        tmp.dm.push_back({static_cast<std::uint32_t>(ie), box_gather_mask(cb, jb)});
      }
    });
  }

  double update_edge(int e, int msg_src, int damp_src, int dst, double damping, Scratch& sc) {
    const EdgePlan& pl = plans_[static_cast<size_t>(e)];
    const std::uint64_t* sup = static_sup_.data() + pl.sup_offset;
    const double* slog = msg_log_[msg_src].data();
    const std::uint8_t* ssup = msg_sup_[msg_src].data();
    const std::uint32_t nc = std::uint32_t{1} << pl.cbits;

    for (std::uint32_t c = 0; c < nc; ++c) {
      sc.cmax[c] = kNegInf;
      sc.cacc[c] = 0.0;
    }
    sc.cfgs.clear();
    sc.vals.clear();

    const std::uint64_t nwords = (std::uint64_t{std::uint32_t{1} << pl.pbits} + 63) / 64;
    for (std::uint64_t w = 0; w < nwords; ++w) {
      std::uint64_t bits = sup[w];
      while (bits) {
        const std::uint32_t pcfg = static_cast<std::uint32_t>(w * 64 + std::countr_zero(bits));
        bits &= bits - 1;
        double s = 0.0;
        bool live = true;
        for (std::uint32_t i = pl.vf_begin; i < pl.vf_end; ++i) {
          const ValRef& vr = val_refs_[i];
          s += factor_log_[factor_log_offset_[vr.factor] + gather_bits(pcfg, vr.gather)];
        }
        for (std::uint32_t i = pl.nm_begin; i < pl.nm_end && live; ++i) {
          const MsgRef& mr = num_refs_[i];
          const std::uint64_t off = plans_[mr.edge].msg_offset + gather_bits(pcfg, mr.gather);
          if (!ssup[off]) {
            live = false;
            break;
          }
          s += slog[off];
        }
        if (!live) continue;
        const std::uint32_t ccfg = gather_bits(pcfg, pl.child_gather);
        sc.cmax[ccfg] = std::max(sc.cmax[ccfg], s);
        sc.cfgs.push_back(pcfg);
        sc.vals.push_back(s);
      }
    }
    for (size_t i = 0; i < sc.cfgs.size(); ++i) {
      const std::uint32_t ccfg = gather_bits(sc.cfgs[i], pl.child_gather);
      sc.cacc[ccfg] += std::exp(sc.vals[i] - sc.cmax[ccfg]);
    }

    // Denominator and normalization.
    double mx = kNegInf;
    for (std::uint32_t c = 0; c < nc; ++c) {
      bool ok = sc.cmax[c] != kNegInf;
      double d = 0.0;
      for (std::uint32_t i = pl.dm_begin; i < pl.dm_end && ok; ++i) {
        const MsgRef& mr = den_refs_[i];
        const std::uint64_t off = plans_[mr.edge].msg_offset + gather_bits(c, mr.gather);
        if (!ssup[off])
          ok = false;
        else
          d += slog[off];
      }
      sc.cok[c] = ok ? 1 : 0;
      if (ok) {
        sc.cden[c] = sc.cmax[c] + std::log(sc.cacc[c]) - d;
        mx = std::max(mx, sc.cden[c]);
      }
    }
    if (mx == kNegInf) {
      empty_support_edge_.store(e, std::memory_order_relaxed);
      return 0.0;
    }

    const double* old_log = msg_log_[damp_src].data() + pl.msg_offset;
    const std::uint8_t* old_sup = msg_sup_[damp_src].data() + pl.msg_offset;
    double* new_log = msg_log_[dst].data() + pl.msg_offset;
    std::uint8_t* new_sup = msg_sup_[dst].data() + pl.msg_offset;
    double res = 0.0;
    for (std::uint32_t c = 0; c < nc; ++c) {
      if (!sc.cok[c]) {
        if (old_sup[c]) res = std::max(res, 1.0);  // support shrank; not at a fixed point
        new_sup[c] = 0;
        new_log[c] = 0.0;
        continue;
      }
      const double computed = sc.cden[c] - mx;
      double v = computed;
      if (old_sup[c]) {
        v = damping * old_log[c] + (1.0 - damping) * computed;
        res = std::max(res, std::abs(v - old_log[c]));
      } else {
        res = std::max(res, 1.0);  // support grew (warm restart); keep iterating
      }
      new_sup[c] = 1;
      new_log[c] = v;
    }
    return res;
  }

  /// logw = sum of A_R log factors + incoming messages; sup flags.
  void region_log_weights(int region, std::vector<double>& logw, std::vector<double>& sup) const {
    const Box& rb = rg_->boxes[static_cast<size_t>(region)];
    const std::int64_t cells = rb.cells();
    if (cells > 20) throw std::invalid_argument("region too large for tabular beliefs");
    const std::uint32_t n = std::uint32_t{1} << cells;
    logw.assign(n, 0.0);
    sup.assign(n, 1.0);
    region_log_factors(region, logw, &sup);

    const double* slog = msg_log_[cur_].data();
    const std::uint8_t* ssup = msg_sup_[cur_].data();
    for_each_subregion(rb, [&](int j, const Box& jb) {
      for (std::int32_t i = rg_->parent_begin[static_cast<size_t>(j)];
           i < rg_->parent_begin[static_cast<size_t>(j) + 1]; ++i) {
        const std::int32_t ie = rg_->parent_edges[static_cast<size_t>(i)];
        const Box& ib = rg_->boxes[static_cast<size_t>(rg_->edges[static_cast<size_t>(ie)].first)];
        if (rb.contains(ib)) continue;
        const std::uint32_t gmask = box_gather_mask(rb, jb);
        const std::uint64_t moff = plans_[static_cast<size_t>(ie)].msg_offset;
        for (std::uint32_t cfg = 0; cfg < n; ++cfg) {
          const std::uint32_t jcfg = gather_bits(cfg, gmask);
          if (!ssup[moff + jcfg])
            sup[cfg] = 0.0;
          else
            logw[cfg] += slog[moff + jcfg];
        }
      }
    });
  }

  void region_log_factors(int region, std::vector<double>& logf, std::vector<double>* sup = nullptr) const {
    const Box& rb = rg_->boxes[static_cast<size_t>(region)];
    const std::uint32_t n = std::uint32_t{1} << rb.cells();
    if (logf.size() != n) logf.assign(n, 0.0);
    for (std::int32_t f : rg_->factors_in(rb)) {
      const std::uint32_t fmask = scope_gather_mask(f, rb);
      const auto& fsup = factor_sup_[static_cast<size_t>(f)];
      const bool pure = factor_mask_only_[static_cast<size_t>(f)];
      const std::uint64_t off = factor_log_offset_[static_cast<size_t>(f)];
      for (std::uint32_t cfg = 0; cfg < n; ++cfg) {
        const std::uint32_t fcfg = gather_bits(cfg, fmask);
        if (!fsup[fcfg]) {
          if (sup) (*sup)[cfg] = 0.0;
          logf[cfg] = kNegInf;
        } else if (!pure) {
          if (logf[cfg] != kNegInf) logf[cfg] += factor_log_[off + fcfg];
        }
      }
    }
  }

  std::shared_ptr<const RegionGraph> rg_;
  std::array<std::int64_t, 3> strides_{};

  // Factor data in sorted-scope indexing.
  std::vector<std::vector<VarId>> sorted_scope_;
  std::vector<std::uint64_t> factor_log_offset_;
  std::vector<double> factor_log_;
  std::vector<std::vector<std::uint8_t>> factor_sup_;
  std::vector<std::uint8_t> factor_mask_only_;  // {0,1} table, not evidence: support mask says it all

  std::vector<EdgePlan> plans_;
  struct TmpRefs {
    std::vector<ValRef> vf;
    std::vector<MsgRef> nm;
    std::vector<MsgRef> dm;
  };
  std::vector<TmpRefs> tmp_refs_;
  std::vector<ValRef> val_refs_;
  std::vector<MsgRef> num_refs_;
  std::vector<MsgRef> den_refs_;
  std::vector<std::uint64_t> static_sup_;

  std::vector<double> msg_log_[2];
  std::vector<std::uint8_t> msg_sup_[2];
  std::uint64_t msg_total_ = 0;
  int cur_ = 0;
  int max_parent_bits_ = 0;
  int max_child_bits_ = 0;
  detail::CopyableAtomicI32 empty_support_edge_;

  friend class BeliefSet;
};

/// Converged (or flagged) region beliefs plus the convergence report.
class BeliefSet {
 public:
  BeliefSet(std::shared_ptr<GbpEngine> engine, ConvergenceReport rep)
      : engine_(std::move(engine)), report(rep) {}

  ConvergenceReport report;

  const RegionGraph& region_graph() const { return engine_->region_graph(); }

  /// Normalized probability table of one region (belief_of).
  std::vector<double> belief(int region_id) const {
    if (region_id < 0 || region_id >= engine_->region_graph().num_regions())
      throw std::invalid_argument("unknown region id");
    return engine_->belief(region_id);
  }

  const GbpEngine& engine() const { return *engine_; }

 private:
  std::shared_ptr<GbpEngine> engine_;
};

inline BeliefSet run_gbp(std::shared_ptr<const RegionGraph> rg, const GbpConfig& cfg = {}) {
  auto engine = std::make_shared<GbpEngine>(std::move(rg));
  ConvergenceReport rep = engine->run(cfg);
  return BeliefSet(std::move(engine), rep);
}

inline BeliefSet run_gbp(const RegionGraph& rg, const GbpConfig& cfg = {}) {
  return run_gbp(std::make_shared<const RegionGraph>(rg), cfg);
}

}  // namespace rllgbp
