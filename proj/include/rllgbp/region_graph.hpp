#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "rllgbp/factor_graph.hpp"

namespace rllgbp {

/// Per-axis basic-region extents: k+1 where k is finite, d+1 otherwise.
struct BasicRegionPlan {
  std::vector<int> extent;

  int dims() const { return static_cast<int>(extent.size()); }
};

inline BasicRegionPlan plan_basic_regions(const RllSpec& spec) {
  spec.validate();
  BasicRegionPlan plan;
  for (const AxisRule& r : spec.axes) plan.extent.push_back(r.k_finite() ? r.k + 1 : r.d + 1);
  return plan;
}

/// Axis-aligned box of grid cells; internally everything is padded to three
/// axes, trailing dummy axes having extent one.
struct Box {
  std::array<int, 3> lo{0, 0, 0};
  std::array<int, 3> hi{1, 1, 1};  // exclusive

  int len(int a) const { return hi[static_cast<size_t>(a)] - lo[static_cast<size_t>(a)]; }
  std::int64_t cells() const { return std::int64_t{1} * len(0) * len(1) * len(2); }

  bool contains(const Box& b) const {
    for (int a = 0; a < 3; ++a)
      if (b.lo[static_cast<size_t>(a)] < lo[static_cast<size_t>(a)] ||
          b.hi[static_cast<size_t>(a)] > hi[static_cast<size_t>(a)])
        return false;
    return true;
  }
  bool operator==(const Box&) const = default;
};

/// Materialized view of one region.
struct Region {
  int id = -1;
  Box box;
  std::vector<VarId> vars;
  std::vector<std::int32_t> factors;
  int counting_number = 0;
  int level = 0;
};

struct RegionGraphReport {
  bool valid = false;
  std::int64_t bad_variable_sums = 0;
  std::int64_t bad_factor_sums = 0;
  std::int64_t hasse_violations = 0;
  /// First few offending (variable id, counting sum) pairs.
  std::vector<std::pair<std::int64_t, std::int64_t>> variable_violations;
  std::vector<std::pair<std::int32_t, std::int64_t>> factor_violations;
};

/// Region graph produced by closing sliding plan-sized windows under
/// intersection, with Moebius counting numbers and Hasse edges.
class RegionGraph {
 public:
  std::shared_ptr<const FactorGraph> graph;
  std::vector<int> shape;   // padded to 3 axes
  std::vector<int> plan;    // padded to 3 axes
  int true_dims = 0;

  std::vector<Box> boxes;        // per region, id order
  std::vector<int> counting;     // c_R
  std::vector<int> levels;       // Hasse depth
  int num_basic = 0;             // basic regions are ids [0, num_basic)

  std::vector<std::pair<std::int32_t, std::int32_t>> edges;  // (parent, child), parent-ascending
  std::vector<std::int32_t> child_begin, child_edges;        // CSR: region -> outgoing edge ids
  std::vector<std::int32_t> parent_begin, parent_edges;      // CSR: region -> incoming edge ids

  int num_regions() const { return static_cast<int>(boxes.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }

  // ---- closure arithmetic -------------------------------------------------

  /// Interval [s,e) on axis a belongs to the sliding-window closure iff it
  /// is a nonempty intersection of length-W windows.
  bool interval_in_closure(int a, int s, int e) const {
    const int W = plan[static_cast<size_t>(a)];
    const int M = shape[static_cast<size_t>(a)];
    const int len = e - s;
    return len >= 1 && len <= W && s >= 0 && s <= M - W && e >= W && e <= M;
  }

  bool box_in_closure(const Box& b) const {
    for (int a = 0; a < 3; ++a)
      if (!interval_in_closure(a, b.lo[static_cast<size_t>(a)], b.hi[static_cast<size_t>(a)])) return false;
    return true;
  }

  /// Region id of a box, or -1 when the box is not a region.
  int region_of(const Box& b) const {
    if (!box_in_closure(b)) return -1;
    std::array<int, 3> lens{b.len(0), b.len(1), b.len(2)};
    const int combo = combo_index_[combo_flat(lens)];
    std::int64_t rank = 0;
    for (int a = 0; a < 3; ++a) {
      const int W = plan[static_cast<size_t>(a)];
      const int lo_min = std::max(0, W - lens[static_cast<size_t>(a)]);
      rank = rank * anchor_count(a, lens[static_cast<size_t>(a)]) + (b.lo[static_cast<size_t>(a)] - lo_min);
    }
    return static_cast<int>(combo_offset_[static_cast<size_t>(combo)] + rank);
  }

  std::vector<VarId> vars_in(const Box& b) const {
    std::vector<VarId> out;
    out.reserve(static_cast<size_t>(b.cells()));
    for (int i = b.lo[0]; i < b.hi[0]; ++i)
      for (int j = b.lo[1]; j < b.hi[1]; ++j)
        for (int k = b.lo[2]; k < b.hi[2]; ++k) out.push_back(cell_id(i, j, k));
    return out;
  }

  VarId cell_id(int i, int j, int k) const {
    return static_cast<VarId>((std::int64_t{i} * shape[1] + j) * shape[2] + k);
  }

  /// All factors whose scope lies inside the box (the region's A_R).
  std::vector<std::int32_t> factors_in(const Box& b) const {
    std::vector<std::int32_t> out;
    Box s;
    for (s.lo[0] = b.lo[0]; s.lo[0] < b.hi[0]; ++s.lo[0])
      for (s.hi[0] = s.lo[0] + 1; s.hi[0] <= b.hi[0]; ++s.hi[0])
        for (s.lo[1] = b.lo[1]; s.lo[1] < b.hi[1]; ++s.lo[1])
          for (s.hi[1] = s.lo[1] + 1; s.hi[1] <= b.hi[1]; ++s.hi[1])
            for (s.lo[2] = b.lo[2]; s.lo[2] < b.hi[2]; ++s.lo[2])
              for (s.hi[2] = s.lo[2] + 1; s.hi[2] <= b.hi[2]; ++s.hi[2]) {
                auto it = factor_buckets_.find(box_key(s));
                if (it != factor_buckets_.end())
                  out.insert(out.end(), it->second.begin(), it->second.end());
              }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Proper superboxes of `b` among the regions (its ancestors).
  template <typename Fn>
  void for_each_ancestor(const Box& b, Fn&& fn) const {
    Box s;
    for (s.lo[0] = super_lo_min(0, b); s.lo[0] <= b.lo[0]; ++s.lo[0])
      for (s.hi[0] = b.hi[0]; s.hi[0] <= super_hi_max(0, s.lo[0]); ++s.hi[0])
        for (s.lo[1] = super_lo_min(1, b); s.lo[1] <= b.lo[1]; ++s.lo[1])
          for (s.hi[1] = b.hi[1]; s.hi[1] <= super_hi_max(1, s.lo[1]); ++s.hi[1])
            for (s.lo[2] = super_lo_min(2, b); s.lo[2] <= b.lo[2]; ++s.lo[2])
              for (s.hi[2] = b.hi[2]; s.hi[2] <= super_hi_max(2, s.lo[2]); ++s.hi[2]) {
                if (s == b) continue;
                const int id = region_of(s);
                if (id >= 0) fn(id, s);
              }
  }

  Region region(int id) const {
    Region r;
    r.id = id;
    r.box = boxes[static_cast<size_t>(id)];
    r.vars = vars_in(r.box);
    r.factors = factors_in(r.box);
    r.counting_number = counting[static_cast<size_t>(id)];
    r.level = levels[static_cast<size_t>(id)];
    return r;
  }

  static std::uint64_t box_key(const Box& b) {
    std::uint64_t key = 0;
    for (int a = 0; a < 3; ++a) key = (key << 10) | static_cast<std::uint32_t>(b.lo[static_cast<size_t>(a)]);
    for (int a = 0; a < 3; ++a) key = (key << 10) | static_cast<std::uint32_t>(b.len(a));
    return key;
  }

 private:
  friend RegionGraph build_region_graph(std::shared_ptr<const FactorGraph>, const BasicRegionPlan&);

  int anchor_count(int a, int len) const {
    const int W = plan[static_cast<size_t>(a)];
    const int M = shape[static_cast<size_t>(a)];
    return std::max(0, (M - W) - std::max(0, W - len) + 1);
  }
  int super_lo_min(int a, const Box& b) const {
    return std::max(0, b.hi[static_cast<size_t>(a)] - plan[static_cast<size_t>(a)]);
  }
  int super_hi_max(int a, int lo) const {
    return std::min(shape[static_cast<size_t>(a)], lo + plan[static_cast<size_t>(a)]);
  }
  size_t combo_flat(const std::array<int, 3>& lens) const {
    return static_cast<size_t>(((lens[0] - 1) * plan[1] + (lens[1] - 1)) * plan[2] + (lens[2] - 1));
  }

  std::vector<int> combo_index_;            // (len triple) -> combo rank
  std::vector<std::int64_t> combo_offset_;  // combo rank -> first region id
  std::unordered_map<std::uint64_t, std::vector<std::int32_t>> factor_buckets_;
};

inline RegionGraph build_region_graph(std::shared_ptr<const FactorGraph> g, const BasicRegionPlan& plan) {
  if (!g) throw std::invalid_argument("null factor graph");
  if (plan.dims() != g->dims()) throw std::invalid_argument("plan and grid dimensionality differ");
  for (int a = 0; a < plan.dims(); ++a) {
    if (plan.extent[static_cast<size_t>(a)] < 1) throw std::invalid_argument("plan extents must be positive");
    if (plan.extent[static_cast<size_t>(a)] > g->shape[static_cast<size_t>(a)])
      throw std::invalid_argument("basic region plan larger than grid");
  }

  RegionGraph rg;
  rg.graph = std::move(g);
  rg.true_dims = rg.graph->dims();
  rg.shape.assign(3, 1);
  rg.plan.assign(3, 1);
  for (int a = 0; a < rg.true_dims; ++a) {
    rg.shape[static_cast<size_t>(a)] = rg.graph->shape[static_cast<size_t>(a)];
    rg.plan[static_cast<size_t>(a)] = plan.extent[static_cast<size_t>(a)];
  }

  // Shape combos ordered by descending cell count so that every ancestor
  // precedes its descendants in id order; ids are raster within a combo.
  struct Combo {
    std::array<int, 3> lens;
    std::int64_t cells;
  };
  std::vector<Combo> combos;
  for (int l0 = 1; l0 <= rg.plan[0]; ++l0)
    for (int l1 = 1; l1 <= rg.plan[1]; ++l1)
      for (int l2 = 1; l2 <= rg.plan[2]; ++l2)
        combos.push_back({{l0, l1, l2}, std::int64_t{1} * l0 * l1 * l2});
  std::sort(combos.begin(), combos.end(), [](const Combo& a, const Combo& b) {
    if (a.cells != b.cells) return a.cells > b.cells;
    return a.lens > b.lens;
  });

  rg.combo_index_.assign(static_cast<size_t>(rg.plan[0] * rg.plan[1] * rg.plan[2]), -1);
  rg.combo_offset_.resize(combos.size() + 1);
  std::int64_t next_id = 0;
  for (size_t c = 0; c < combos.size(); ++c) {
    rg.combo_index_[rg.combo_flat(combos[c].lens)] = static_cast<int>(c);
    rg.combo_offset_[c] = next_id;
    std::int64_t cnt = 1;
    for (int a = 0; a < 3; ++a) cnt *= rg.anchor_count(a, combos[c].lens[static_cast<size_t>(a)]);
    next_id += cnt;
  }
  rg.combo_offset_[combos.size()] = next_id;

  rg.boxes.resize(static_cast<size_t>(next_id));
  for (size_t c = 0; c < combos.size(); ++c) {
    const auto& lens = combos[c].lens;
    std::int64_t id = rg.combo_offset_[c];
    const int lo_min0 = std::max(0, rg.plan[0] - lens[0]);
    const int lo_min1 = std::max(0, rg.plan[1] - lens[1]);
    const int lo_min2 = std::max(0, rg.plan[2] - lens[2]);
    for (int i = 0; i < rg.anchor_count(0, lens[0]); ++i)
      for (int j = 0; j < rg.anchor_count(1, lens[1]); ++j)
        for (int k = 0; k < rg.anchor_count(2, lens[2]); ++k) {
          Box b;
          b.lo = {lo_min0 + i, lo_min1 + j, lo_min2 + k};
          b.hi = {b.lo[0] + lens[0], b.lo[1] + lens[1], b.lo[2] + lens[2]};
          rg.boxes[static_cast<size_t>(id++)] = b;
        }
  }
  rg.num_basic = static_cast<int>(rg.combo_offset_[1]);

  // Hasse edges: one axis shrunk to a maximal closure sub-interval.
  for (int id = 0; id < rg.num_regions(); ++id) {
    const Box& b = rg.boxes[static_cast<size_t>(id)];
    for (int a = 0; a < 3; ++a) {
      for (int side = 0; side < 2; ++side) {
        Box c = b;
        if (side == 0)
          --c.hi[static_cast<size_t>(a)];
        else
          ++c.lo[static_cast<size_t>(a)];
        if (c.hi[static_cast<size_t>(a)] <= c.lo[static_cast<size_t>(a)]) continue;
        const int cid = rg.region_of(c);
        if (cid >= 0) rg.edges.emplace_back(id, cid);
      }
    }
  }

  // CSR adjacency (edges are already parent-ascending).
  const int nr = rg.num_regions();
  rg.child_begin.assign(static_cast<size_t>(nr) + 1, 0);
  rg.parent_begin.assign(static_cast<size_t>(nr) + 1, 0);
  for (const auto& [p, c] : rg.edges) {
    ++rg.child_begin[static_cast<size_t>(p) + 1];
    ++rg.parent_begin[static_cast<size_t>(c) + 1];
  }
  for (int r = 0; r < nr; ++r) {
    rg.child_begin[static_cast<size_t>(r) + 1] += rg.child_begin[static_cast<size_t>(r)];
    rg.parent_begin[static_cast<size_t>(r) + 1] += rg.parent_begin[static_cast<size_t>(r)];
  }
  rg.child_edges.resize(rg.edges.size());
  rg.parent_edges.resize(rg.edges.size());
  {
    std::vector<std::int32_t> cpos(rg.child_begin.begin(), rg.child_begin.end() - 1);
    std::vector<std::int32_t> ppos(rg.parent_begin.begin(), rg.parent_begin.end() - 1);
    for (std::int32_t e = 0; e < static_cast<std::int32_t>(rg.edges.size()); ++e) {
      rg.child_edges[static_cast<size_t>(cpos[static_cast<size_t>(rg.edges[static_cast<size_t>(e)].first)]++)] = e;
      rg.parent_edges[static_cast<size_t>(ppos[static_cast<size_t>(rg.edges[static_cast<size_t>(e)].second)]++)] = e;
    }
  }

  // Counting numbers by the ancestor recursion; ancestors have smaller ids.
  rg.counting.assign(static_cast<size_t>(nr), 0);
  for (int id = 0; id < nr; ++id) {
    std::int64_t anc = 0;
    rg.for_each_ancestor(rg.boxes[static_cast<size_t>(id)],
                         [&](int aid, const Box&) { anc += rg.counting[static_cast<size_t>(aid)]; });
    rg.counting[static_cast<size_t>(id)] = static_cast<int>(1 - anc);
  }

  // Hasse depth.
  rg.levels.assign(static_cast<size_t>(nr), 0);
  for (int id = 0; id < nr; ++id) {
    int lv = 0;
    for (std::int32_t e = rg.parent_begin[static_cast<size_t>(id)]; e < rg.parent_begin[static_cast<size_t>(id) + 1];
         ++e) {
      const int p = rg.edges[static_cast<size_t>(rg.parent_edges[static_cast<size_t>(e)])].first;
      lv = std::max(lv, rg.levels[static_cast<size_t>(p)] + 1);
    }
    rg.levels[static_cast<size_t>(id)] = lv;
  }

  // Factor buckets by scope bounding box.
  const auto strides = row_major_strides(rg.shape);
  for (const FactorInstance& f : rg.graph->factors) {
    if (f.scope.empty()) throw std::invalid_argument("factor with empty scope");
    Box bb;
    bb.lo = {rg.shape[0], rg.shape[1], rg.shape[2]};
    bb.hi = {0, 0, 0};
    for (VarId v : f.scope) {
      std::int64_t rem = v;
      for (int a = 0; a < 3; ++a) {
        const int coord = static_cast<int>(rem / strides[static_cast<size_t>(a)]);
        rem %= strides[static_cast<size_t>(a)];
        bb.lo[static_cast<size_t>(a)] = std::min(bb.lo[static_cast<size_t>(a)], coord);
        bb.hi[static_cast<size_t>(a)] = std::max(bb.hi[static_cast<size_t>(a)], coord + 1);
      }
    }
    rg.factor_buckets_[RegionGraph::box_key(bb)].push_back(f.id);
  }

  return rg;
}

inline RegionGraph build_region_graph(const FactorGraph& g, const BasicRegionPlan& plan) {
  return build_region_graph(std::make_shared<const FactorGraph>(g), plan);
}

/// Checks the counting-number validity sums and the Hasse/DAG structure.
inline RegionGraphReport validate_region_graph(const RegionGraph& rg) {
  RegionGraphReport rep;
  const int nr = rg.num_regions();

  std::vector<std::int64_t> var_sum(static_cast<size_t>(rg.graph->num_vars), 0);
  for (int id = 0; id < nr; ++id) {
    const int c = rg.counting[static_cast<size_t>(id)];
    for (VarId v : rg.vars_in(rg.boxes[static_cast<size_t>(id)])) var_sum[static_cast<size_t>(v)] += c;
  }
  for (std::int64_t v = 0; v < rg.graph->num_vars; ++v) {
    if (var_sum[static_cast<size_t>(v)] != 1) {
      ++rep.bad_variable_sums;
      if (rep.variable_violations.size() < 16) rep.variable_violations.emplace_back(v, var_sum[static_cast<size_t>(v)]);
    }
  }

  for (const FactorInstance& f : rg.graph->factors) {
    // Sum of counting numbers over regions containing the factor's scope.
    const auto strides = row_major_strides(rg.shape);
    Box bb;
    bb.lo = {rg.shape[0], rg.shape[1], rg.shape[2]};
    bb.hi = {0, 0, 0};
    for (VarId v : f.scope) {
      std::int64_t rem = v;
      for (int a = 0; a < 3; ++a) {
        const int coord = static_cast<int>(rem / strides[static_cast<size_t>(a)]);
        rem %= strides[static_cast<size_t>(a)];
        bb.lo[static_cast<size_t>(a)] = std::min(bb.lo[static_cast<size_t>(a)], coord);
        bb.hi[static_cast<size_t>(a)] = std::max(bb.hi[static_cast<size_t>(a)], coord + 1);
      }
    }
    std::int64_t sum = 0;
    const int self = rg.region_of(bb);
    if (self >= 0) sum += rg.counting[static_cast<size_t>(self)];
    rg.for_each_ancestor(bb, [&](int aid, const Box&) { sum += rg.counting[static_cast<size_t>(aid)]; });
    if (sum != 1) {
      ++rep.bad_factor_sums;
      if (rep.factor_violations.size() < 16) rep.factor_violations.emplace_back(f.id, sum);
    }
  }

  // Hasse: strict containment and no region strictly between edge endpoints.
  for (const auto& [p, c] : rg.edges) {
    const Box& pb = rg.boxes[static_cast<size_t>(p)];
    const Box& cb = rg.boxes[static_cast<size_t>(c)];
    if (!(pb.contains(cb) && pb.cells() > cb.cells())) {
      ++rep.hasse_violations;
      continue;
    }
    Box d;
    bool between = false;
    for (d.lo[0] = pb.lo[0]; d.lo[0] <= cb.lo[0] && !between; ++d.lo[0])
      for (d.hi[0] = cb.hi[0]; d.hi[0] <= pb.hi[0] && !between; ++d.hi[0])
        for (d.lo[1] = pb.lo[1]; d.lo[1] <= cb.lo[1] && !between; ++d.lo[1])
          for (d.hi[1] = cb.hi[1]; d.hi[1] <= pb.hi[1] && !between; ++d.hi[1])
            for (d.lo[2] = pb.lo[2]; d.lo[2] <= cb.lo[2] && !between; ++d.lo[2])
              for (d.hi[2] = cb.hi[2]; d.hi[2] <= pb.hi[2] && !between; ++d.hi[2]) {
                if (d == pb || d == cb) continue;
                if (rg.region_of(d) >= 0) between = true;
              }
    if (between) ++rep.hasse_violations;
  }

  rep.valid = rep.bad_variable_sums == 0 && rep.bad_factor_sums == 0 && rep.hasse_violations == 0;
  return rep;
}

}  // namespace rllgbp
