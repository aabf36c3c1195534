#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>

#include "treegibbs/gibbs.hpp"
#include "treegibbs/tree.hpp"

using namespace treegibbs;

TEST(Tree, Sizes) {
  struct Case {
    int b, m;
    VertexId n, boundary;
  };
  for (auto c : {Case{2, 2, 7, 8}, Case{2, 0, 1, 2}, Case{3, 1, 4, 9}, Case{4, 3, 85, 256}}) {
    auto t = TreeTopology::build(c.b, c.m);
    EXPECT_EQ(t.internal_count(), c.n);
    EXPECT_EQ(t.boundary_count(), c.boundary);
    EXPECT_EQ(t.root(), 0u);
  }
  EXPECT_THROW(TreeTopology::build(1, 2), InvalidArgument);
  EXPECT_THROW(TreeTopology::build(2, -1), InvalidArgument);
  EXPECT_THROW(TreeTopology::build(2, 40), InvalidArgument);
}

TEST(Tree, Adjacency) {
  auto t = TreeTopology::build(3, 2);
  for (VertexId v = 0; v < t.internal_count(); ++v) {
    auto ch = t.children(v);
    EXPECT_EQ(ch.size(), 3u);
    for (VertexId c = ch.begin; c < ch.end; ++c) {
      EXPECT_EQ(*t.parent(c), v);
      EXPECT_EQ(t.level(c), t.level(v) + 1);
    }
  }
  for (VertexId w = t.internal_count(); w < t.total_count(); ++w) {
    EXPECT_TRUE(t.is_boundary(w));
    EXPECT_EQ(t.children(w).size(), 0u);
    EXPECT_TRUE(t.is_leaf(*t.parent(w)));
  }
  EXPECT_THROW(t.check(t.total_count()), InvalidArgument);
}

TEST(Tree, Regions) {
  auto t = TreeTopology::build(2, 2);
  EXPECT_EQ(block(t, 0, 1).vertices(), std::vector<VertexId>{0});
  EXPECT_EQ(subtree(t, 0).size(), 7u);
  EXPECT_EQ(block(t, 0, 2).size(), 3u);
  EXPECT_EQ(block(t, 1, 5).size(), 3u);  // truncated at the bottom
  EXPECT_EQ(level_forest(t, 3).size(), 7u);
  EXPECT_EQ(level_forest(t, 0).size(), 0u);
  EXPECT_EQ(level_forest(t, 1).size(), 4u);
  EXPECT_THROW(level_forest(t, 4), InvalidArgument);
  EXPECT_THROW(block(t, 99, 1), InvalidArgument);
  auto r = block(t, 1, 1);
  EXPECT_EQ(r.boundary(t), (std::vector<VertexId>{0, 3, 4}));
}

TEST(Tree, BlocksCoverEachVertexAtMostEllTimes) {
  auto t = TreeTopology::build(2, 4);
  for (int ell = 1; ell <= 4; ++ell) {
    std::vector<int> cover(t.internal_count(), 0);
    for (VertexId x = 0; x < t.internal_count(); ++x) {
      const Region r = block(t, x, ell);
      for (VertexId v : r.vertices()) ++cover[v];
    }
    for (int c : cover) EXPECT_LE(c, ell);
  }
}

TEST(Tree, SubtreeDependencySetPartition) {
  auto t = TreeTopology::build(2, 3);
  for (VertexId x = 1; x < t.internal_count(); ++x) {
    auto r = subtree(t, x);
    auto bd = r.boundary(t);
    auto bottom = r.bottom_boundary(t);
    // dT_x is the parent plus the bottom boundary, with no overlap
    EXPECT_EQ(bd.size(), bottom.size() + 1);
    EXPECT_TRUE(std::find(bd.begin(), bd.end(), *t.parent(x)) != bd.end());
    for (VertexId w : bottom) EXPECT_TRUE(t.is_boundary(w));
  }
}

TEST(Tree, HardCoreBoundaries) {
  auto m = make_hardcore(2.0);
  for (int depth = 0; depth < 5; ++depth) {
    auto t = TreeTopology::build(2, depth);
    auto even = even_occupied(t);
    auto odd = odd_occupied(t);
    for (std::size_t i = 0; i < even.assignment().size(); ++i) EXPECT_NE(even.assignment()[i], odd.assignment()[i]);
    // each extends to a valid configuration: the maximum-density one
    for (const auto* bc : {&even, &odd}) {
      auto c = make_configuration(t, *bc);
      const bool occupied_at_boundary = bc->assignment()[0] == 1;
      for (VertexId v = 0; v < t.internal_count(); ++v) {
        const bool same_parity = (t.level(v) % 2) == ((depth + 1) % 2);
        c[v] = (same_parity == occupied_at_boundary) ? 1 : 0;
      }
      EXPECT_TRUE(is_valid(m, t, *bc, c));
    }
  }
}

TEST(Tree, ParseBoundary) {
  auto t = TreeTopology::build(2, 1);
  auto ising = make_ising(1.0, 0.0);
  EXPECT_TRUE(parse_boundary("free", ising, t).is_free());
  EXPECT_EQ(parse_boundary("plus", ising, t).assignment(), std::vector<Spin>(4, 0));
  EXPECT_EQ(parse_boundary("minus", ising, t).assignment(), std::vector<Spin>(4, 1));
  auto col = make_colorings(4);
  EXPECT_EQ(parse_boundary("color:3", col, t).assignment(), std::vector<Spin>(4, 2));
  EXPECT_THROW(parse_boundary("color:9", col, t), InvalidArgument);
  EXPECT_THROW(parse_boundary("sideways", ising, t), InvalidArgument);
  const char* path = "tree_boundary_test.txt";
  {
    std::ofstream out(path);
    out << "+ - -\n+";
  }
  auto bc = parse_boundary(std::string("file:") + path, ising, t);
  EXPECT_EQ(bc.assignment(), (std::vector<Spin>{0, 1, 1, 0}));
  {
    std::ofstream out(path);
    out << "+ -";
  }
  EXPECT_THROW(parse_boundary(std::string("file:") + path, ising, t), InvalidArgument);
  std::remove(path);
}

TEST(Tree, FrozenColoringIsProper) {
  for (int depth = 0; depth < 5; ++depth) {
    auto t = TreeTopology::build(2, depth);
    auto bc = frozen_coloring(t, 3, 1);
    auto m = make_colorings(3);
    auto c = make_configuration(t, bc);
    // rebuild the intended colouring top-down and check it is proper
    c[0] = 1;
    for (VertexId v = 0; v < t.internal_count(); ++v) {
      auto ch = t.children(v);
      Spin next = 0;
      for (VertexId x = ch.begin; x < ch.end; ++x) {
        if (next == c[v]) ++next;
        if (!t.is_boundary(x)) c[x] = next;
        ++next;
      }
    }
    EXPECT_TRUE(is_valid(m, t, bc, c));
  }
  EXPECT_THROW(frozen_coloring(TreeTopology::build(2, 1), 4, 0), InvalidArgument);
}

TEST(Tree, SubtreeView) {
  auto t = TreeTopology::build(2, 3);
  auto bc = all_plus(t);
  auto view = restrict_to_subtree(t, bc, 2);
  EXPECT_EQ(view.tree.depth(), 2);
  EXPECT_EQ(view.to_global[0], 2u);
  EXPECT_EQ(view.to_global[1], 5u);
  EXPECT_EQ(view.to_global[3], 11u);
  EXPECT_EQ(view.boundary.assignment().size(), 8u);
}
