#pragma once

// Complete b-ary trees, regions and boundary conditions.
//
// Vertices use heap (breadth-first) numbering: the root is 0, the children of
// v are b*v + 1, ..., b*v + b, and the parent of v > 0 is (v - 1) / b. The n
// internal vertices of a depth-m tree occupy ids [0, n); the boundary dT (the
// children of the leaves) follows immediately as ids [n, n + b^{m+1}). Every
// level, and every level of every subtree, is therefore a contiguous id range.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "treegibbs/errors.hpp"
#include "treegibbs/model.hpp"

namespace treegibbs {

using VertexId = std::uint32_t;

struct VertexRange {
  VertexId begin;
  VertexId end;  // exclusive

  std::size_t size() const { return end - begin; }
  bool contains(VertexId v) const { return v >= begin && v < end; }
};

class TreeTopology {
 public:
  // Largest total vertex count (internal + boundary) accepted by build().
  static constexpr std::size_t kMaxVertices = std::size_t{1} << 26;

  static TreeTopology build(int b, int depth) {
    if (b < 2) throw InvalidArgument("branching factor must be at least 2");
    if (depth < 0) throw InvalidArgument("depth must be non-negative");
    // level sizes b^0 .. b^{depth+1}
    std::vector<std::size_t> level_start{0};
    std::size_t width = 1;
    std::size_t total = 0;
    for (int level = 0; level <= depth + 1; ++level) {
      total += width;
      if (total > kMaxVertices) throw InvalidArgument("tree too large for addressing");
      level_start.push_back(total);
      if (level <= depth) {
        if (width > kMaxVertices / static_cast<std::size_t>(b)) throw InvalidArgument("tree too large for addressing");
        width *= static_cast<std::size_t>(b);
      }
    }
    TreeTopology t;
    t.b_ = b;
    t.depth_ = depth;
    t.level_start_ = std::move(level_start);
    t.n_ = static_cast<VertexId>(t.level_start_[static_cast<std::size_t>(depth) + 1]);
    t.total_ = static_cast<VertexId>(total);
    t.level_.resize(total);
    for (int level = 0; level <= depth + 1; ++level) {
      for (std::size_t v = t.level_start_[static_cast<std::size_t>(level)];
           v < t.level_start_[static_cast<std::size_t>(level) + 1]; ++v) {
        t.level_[v] = level;
      }
    }
    return t;
  }

  int branching() const { return b_; }
  int depth() const { return depth_; }
  VertexId internal_count() const { return n_; }
  VertexId boundary_count() const { return total_ - n_; }
  VertexId total_count() const { return total_; }
  VertexId root() const { return 0; }

  bool is_boundary(VertexId v) const { return v >= n_; }
  bool is_leaf(VertexId v) const { return v < n_ && level_[v] == depth_; }
  int level(VertexId v) const { return level_.at(v); }

  std::optional<VertexId> parent(VertexId v) const {
    if (v == 0) return std::nullopt;
    return (v - 1) / static_cast<VertexId>(b_);
  }

  // Children of an internal vertex (boundary vertices for leaves); empty for boundary vertices.
  VertexRange children(VertexId v) const {
    if (v >= n_) return {0, 0};
    const VertexId first = static_cast<VertexId>(b_) * v + 1;
    return {first, first + static_cast<VertexId>(b_)};
  }

  // All vertices at absolute level `level` (0 = root, depth + 1 = boundary).
  VertexRange level_range(int level) const {
    if (level < 0 || level > depth_ + 1) throw InvalidArgument("level out of range");
    return {static_cast<VertexId>(level_start_[static_cast<std::size_t>(level)]),
            static_cast<VertexId>(level_start_[static_cast<std::size_t>(level) + 1])};
  }

  // Descendants of x exactly `distance` levels below it (may reach into the boundary).
  VertexRange descendants(VertexId x, int distance) const {
    check(x);
    if (distance < 0 || level_[x] + distance > depth_ + 1) return {0, 0};
    std::size_t first = x;
    std::size_t width = 1;
    for (int d = 0; d < distance; ++d) {
      first = first * static_cast<std::size_t>(b_) + 1;
      width *= static_cast<std::size_t>(b_);
    }
    return {static_cast<VertexId>(first), static_cast<VertexId>(first + width)};
  }

  // Number of internal levels in the subtree T_x (1 for a leaf).
  int levels_below(VertexId x) const { return depth_ - level(x) + 1; }

  bool is_ancestor_or_self(VertexId a, VertexId v) const {
    while (level_[v] > level_[a]) v = (v - 1) / static_cast<VertexId>(b_);
    return v == a;
  }

  // Neighbours in T u dT.
  std::vector<VertexId> neighbors(VertexId v) const {
    check(v);
    std::vector<VertexId> out;
    if (auto p = parent(v)) out.push_back(*p);
    auto ch = children(v);
    for (VertexId c = ch.begin; c < ch.end; ++c) out.push_back(c);
    return out;
  }

  void check(VertexId v) const {
    if (v >= total_) throw InvalidArgument("unknown vertex id " + std::to_string(v));
  }

 private:
  int b_ = 2;
  int depth_ = 0;
  VertexId n_ = 0;
  VertexId total_ = 0;
  std::vector<std::size_t> level_start_;
  std::vector<int> level_;
};

// ---- regions -----------------------------------------------------------------

class Region {
 public:
  Region() = default;

  Region(const TreeTopology& tree, std::vector<VertexId> vertices) : member_(tree.total_count(), 0) {
    for (VertexId v : vertices) {
      if (v >= tree.internal_count()) throw InvalidArgument("regions must consist of internal vertices");
      member_[v] = 1;
    }
    std::sort(vertices.begin(), vertices.end());
    vertices.erase(std::unique(vertices.begin(), vertices.end()), vertices.end());
    vertices_ = std::move(vertices);
  }

  const std::vector<VertexId>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  bool empty() const { return vertices_.empty(); }
  bool contains(VertexId v) const { return v < member_.size() && member_[v] != 0; }

  // dA: neighbours of A in (T u dT) \ A.
  std::vector<VertexId> boundary(const TreeTopology& tree) const {
    std::vector<VertexId> out;
    for (VertexId v : vertices_) {
      for (VertexId u : tree.neighbors(v)) {
        if (!contains(u)) out.push_back(u);
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  // Boundary vertices that are children of region vertices.
  std::vector<VertexId> bottom_boundary(const TreeTopology& tree) const {
    std::vector<VertexId> out;
    for (VertexId v : vertices_) {
      auto ch = tree.children(v);
      for (VertexId c = ch.begin; c < ch.end; ++c)
        if (!contains(c)) out.push_back(c);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  friend Region operator&(const Region& a, const Region& b) {
    Region out;
    out.member_.assign(std::max(a.member_.size(), b.member_.size()), 0);
    for (VertexId v : a.vertices_) {
      if (b.contains(v)) {
        out.vertices_.push_back(v);
        out.member_[v] = 1;
      }
    }
    return out;
  }

  friend Region operator|(const Region& a, const Region& b) {
    Region out;
    out.member_.assign(std::max(a.member_.size(), b.member_.size()), 0);
    std::set_union(a.vertices_.begin(), a.vertices_.end(), b.vertices_.begin(), b.vertices_.end(),
                   std::back_inserter(out.vertices_));
    for (VertexId v : out.vertices_) out.member_[v] = 1;
    return out;
  }

  bool is_subset_of(const Region& other) const {
    return std::all_of(vertices_.begin(), vertices_.end(), [&](VertexId v) { return other.contains(v); });
  }

 private:
  std::vector<VertexId> vertices_;
  std::vector<char> member_;
};

inline Region whole_tree(const TreeTopology& tree) {
  std::vector<VertexId> all(tree.internal_count());
  for (VertexId v = 0; v < tree.internal_count(); ++v) all[v] = v;
  return Region(tree, std::move(all));
}

// B_{x,l}: the first l levels of T_x, truncated at the bottom of T.
inline Region block(const TreeTopology& tree, VertexId x, int levels) {
  tree.check(x);
  if (tree.is_boundary(x)) throw InvalidArgument("block root must be an internal vertex");
  if (levels < 1) throw InvalidArgument("block needs at least one level");
  std::vector<VertexId> out;
  for (int d = 0; d < levels; ++d) {
    auto range = tree.descendants(x, d);
    if (range.size() == 0 || tree.is_boundary(range.begin)) break;
    for (VertexId v = range.begin; v < range.end; ++v) out.push_back(v);
  }
  return Region(tree, std::move(out));
}

// T_x.
inline Region subtree(const TreeTopology& tree, VertexId x) {
  return block(tree, x, tree.depth() + 1);
}

// T_x without its root.
inline Region subtree_without_root(const TreeTopology& tree, VertexId x) {
  auto all = subtree(tree, x).vertices();
  all.erase(std::remove(all.begin(), all.end(), x), all.end());
  return Region(tree, std::move(all));
}

// F_i: the lowest i internal levels (F_0 empty, F_{m+1} = T).
inline Region level_forest(const TreeTopology& tree, int i) {
  if (i < 0 || i > tree.depth() + 1) throw InvalidArgument("level forest index out of range");
  std::vector<VertexId> out;
  for (int level = tree.depth() - i + 1; level <= tree.depth(); ++level) {
    auto range = tree.level_range(level);
    for (VertexId v = range.begin; v < range.end; ++v) out.push_back(v);
  }
  return Region(tree, std::move(out));
}

// ---- boundary conditions -------------------------------------------------------

class BoundaryCondition {
 public:
  enum class Kind { Fixed, Free };

  static BoundaryCondition free() { return BoundaryCondition(Kind::Free, {}); }

  // `assignment` lists boundary spins in breadth-first order of dT.
  static BoundaryCondition fixed(std::vector<Spin> assignment) {
    return BoundaryCondition(Kind::Fixed, std::move(assignment));
  }

  static BoundaryCondition constant(const TreeTopology& tree, Spin s) {
    return fixed(std::vector<Spin>(tree.boundary_count(), s));
  }

  Kind kind() const { return kind_; }
  bool is_free() const { return kind_ == Kind::Free; }
  const std::vector<Spin>& assignment() const { return assignment_; }

  Spin spin(const TreeTopology& tree, VertexId w) const {
    if (is_free()) throw InvalidArgument("free boundary has no boundary spins");
    return assignment_.at(w - tree.internal_count());
  }

  void validate(const SpinModel& model, const TreeTopology& tree) const {
    if (is_free()) return;
    if (assignment_.size() != tree.boundary_count()) {
      throw InvalidArgument("boundary assignment must cover exactly the boundary of the tree");
    }
    for (Spin s : assignment_)
      if (s >= model.spin_count()) throw InvalidArgument("boundary spin out of range");
  }

  friend bool operator==(const BoundaryCondition& a, const BoundaryCondition& b) {
    return a.kind_ == b.kind_ && a.assignment_ == b.assignment_;
  }

 private:
  BoundaryCondition(Kind kind, std::vector<Spin> assignment) : kind_(kind), assignment_(std::move(assignment)) {}

  Kind kind_;
  std::vector<Spin> assignment_;
};

inline BoundaryCondition all_plus(const TreeTopology& tree) { return BoundaryCondition::constant(tree, 0); }
inline BoundaryCondition all_minus(const TreeTopology& tree) { return BoundaryCondition::constant(tree, 1); }

// Hard-core boundaries derived from the two maximum-density configurations
// (all even levels occupied, or all odd levels occupied). The boundary sits at
// level depth + 1, so it is occupied under `even` iff depth + 1 is even.
inline BoundaryCondition even_occupied(const TreeTopology& tree) {
  const bool occupied = (tree.depth() + 1) % 2 == 0;
  return BoundaryCondition::constant(tree, occupied ? 1 : 0);
}

inline BoundaryCondition odd_occupied(const TreeTopology& tree) {
  const bool occupied = (tree.depth() + 1) % 2 == 1;
  return BoundaryCondition::constant(tree, occupied ? 1 : 0);
}

inline BoundaryCondition constant_color(const TreeTopology& tree, Spin color) {
  return BoundaryCondition::constant(tree, color);
}

// A boundary for proper colourings with q = b + 1 colours under which every
// internal colour is forced: colour the root `root_color`, give the b children
// of every vertex the b colours different from their parent's, and keep the
// colours reached on dT.
inline BoundaryCondition frozen_coloring(const TreeTopology& tree, int q, Spin root_color) {
  if (q != tree.branching() + 1) throw InvalidArgument("frozen colouring boundaries need q = b + 1");
  if (root_color >= q) throw InvalidArgument("root colour out of range");
  std::vector<Spin> colour(tree.total_count());
  colour[0] = root_color;
  for (VertexId v = 0; v < tree.internal_count(); ++v) {
    auto ch = tree.children(v);
    Spin next = 0;
    for (VertexId c = ch.begin; c < ch.end; ++c) {
      if (next == colour[v]) ++next;
      colour[c] = next++;
    }
  }
  return BoundaryCondition::fixed(std::vector<Spin>(colour.begin() + tree.internal_count(), colour.end()));
}

// Parses `plus|minus|free|even|odd|color:<label>|frozen|frozen:<label>|file:<path>`.
// A boundary file is a whitespace separated list of spin labels in breadth-first dT order.
inline BoundaryCondition parse_boundary(const std::string& spec, const SpinModel& model, const TreeTopology& tree) {
  auto spin_for = [&](const std::string& label) {
    auto s = model.spin_of_label(label);
    if (!s) throw InvalidArgument("unknown spin label `" + label + "` in boundary specification");
    return *s;
  };
  BoundaryCondition out = BoundaryCondition::free();
  if (spec == "free") {
    out = BoundaryCondition::free();
  } else if (spec == "plus") {
    out = all_plus(tree);
  } else if (spec == "minus") {
    out = all_minus(tree);
  } else if (spec == "even") {
    out = even_occupied(tree);
  } else if (spec == "odd") {
    out = odd_occupied(tree);
  } else if (spec.rfind("color:", 0) == 0) {
    out = constant_color(tree, spin_for(spec.substr(6)));
  } else if (spec == "frozen") {
    out = frozen_coloring(tree, model.spin_count(), 0);
  } else if (spec.rfind("frozen:", 0) == 0) {
    out = frozen_coloring(tree, model.spin_count(), spin_for(spec.substr(7)));
  } else if (spec.rfind("file:", 0) == 0) {
    const auto path = spec.substr(5);
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open boundary file: " + path);
    std::vector<Spin> spins;
    std::string label;
    while (in >> label) spins.push_back(spin_for(label));
    out = BoundaryCondition::fixed(std::move(spins));
  } else {
    throw InvalidArgument("unknown boundary `" + spec + "`");
  }
  out.validate(model, tree);
  return out;
}

// T_x as a tree of its own, with the part of dT below x as its boundary.
struct SubtreeView {
  TreeTopology tree;
  BoundaryCondition boundary = BoundaryCondition::free();
  std::vector<VertexId> to_global;  // sub-tree vertex id -> id in the original tree
};

inline SubtreeView restrict_to_subtree(const TreeTopology& tree, const BoundaryCondition& boundary, VertexId x) {
  tree.check(x);
  if (tree.is_boundary(x)) throw InvalidArgument("subtree root must be an internal vertex");
  SubtreeView view{TreeTopology::build(tree.branching(), tree.levels_below(x) - 1), BoundaryCondition::free(), {}};
  view.to_global.resize(view.tree.total_count());
  for (int d = 0; d <= view.tree.depth() + 1; ++d) {
    auto src = tree.descendants(x, d);
    auto dst = view.tree.level_range(d);
    for (VertexId i = 0; i < dst.size(); ++i) view.to_global[dst.begin + i] = src.begin + i;
  }
  if (!boundary.is_free()) {
    std::vector<Spin> spins;
    for (VertexId w = view.tree.internal_count(); w < view.tree.total_count(); ++w)
      spins.push_back(boundary.spin(tree, view.to_global[w]));
    view.boundary = BoundaryCondition::fixed(std::move(spins));
  }
  return view;
}

// ---- configurations -------------------------------------------------------------

// Spins on T u dT, indexed by vertex id. Boundary entries carry the boundary
// condition (and are unused under a free boundary).
struct Configuration {
  std::vector<Spin> spins;

  Spin operator[](VertexId v) const { return spins[v]; }
  Spin& operator[](VertexId v) { return spins[v]; }
  std::size_t size() const { return spins.size(); }
  friend bool operator==(const Configuration&, const Configuration&) = default;
};

inline Configuration make_configuration(const TreeTopology& tree, const BoundaryCondition& boundary, Spin fill = 0) {
  Configuration c{std::vector<Spin>(tree.total_count(), fill)};
  if (!boundary.is_free()) {
    std::copy(boundary.assignment().begin(), boundary.assignment().end(),
              c.spins.begin() + tree.internal_count());
  }
  return c;
}

}  // namespace treegibbs
