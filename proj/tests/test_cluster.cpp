#include <doctest.h>

#include <map>
#include <set>

#include "ct/cluster.hpp"
#include "ct/random.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ct;
using namespace ct_test;

namespace {

Matrix points_1d(const std::vector<double>& xs) {
  Matrix m(xs.size(), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) m(i, 0) = xs[i];
  return m;
}

std::set<std::set<int>> as_partition(const ClusterAssignment& a) {
  std::map<int, std::set<int>> by_label;
  for (std::size_t i = 0; i < a.labels.size(); ++i)
    by_label[a.labels[i]].insert(static_cast<int>(i));
  std::set<std::set<int>> out;
  for (auto& [label, members] : by_label) out.insert(members);
  return out;
}

}  // namespace

TEST_CASE("knn basics") {
  const Matrix ref = points_1d({0, 1, 10});
  SUBCASE("nearest by inspection") {
    const auto nn = knn_indices(points_1d({0.4}), ref, 2);
    CHECK(nn[0] == std::vector<int>{0, 1});
  }
  SUBCASE("saturation returns everything") {
    const auto nn = knn_indices(points_1d({0.4}), ref, 7);
    CHECK(nn[0].size() == 3);
  }
  SUBCASE("equidistant tie breaks to the lower index") {
    const auto nn = knn_indices(points_1d({0}), points_1d({-1, 1}), 1);
    CHECK(nn[0] == std::vector<int>{0});
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(knn_indices(points_1d({0}), Matrix(), 1), std::invalid_argument);
    CHECK_THROWS_AS(knn_indices(points_1d({0}), ref, 0), std::invalid_argument);
  }
}

TEST_CASE("complete linkage on hand instances") {
  SUBCASE("three points 0, 1, 5") {
    const Dendrogram d = hclust_complete(points_1d({0, 1, 5}));
    REQUIRE(d.merges.size() == 2);
    CHECK(d.merges[0].left == 0);
    CHECK(d.merges[0].right == 1);
    CHECK(d.merges[0].height == 1.0);
    CHECK(d.merges[1].left == 3);  // {0,1}
    CHECK(d.merges[1].right == 2);
    CHECK(d.merges[1].height == 5.0);
    CHECK(d.merges[1].size == 3);
  }
  SUBCASE("two points merge at their distance") {
    const Dendrogram d = hclust_complete(points_1d({2, 9}));
    REQUIRE(d.merges.size() == 1);
    CHECK(d.merges[0].height == 7.0);
  }
  SUBCASE("identical points merge at height zero") {
    const Dendrogram d = hclust_complete(points_1d({3, 3, 3, 3}));
    for (const auto& m : d.merges) CHECK(m.height == 0.0);
  }
  SUBCASE("single point gives an empty merge list") {
    const Dendrogram d = hclust_complete(points_1d({3}));
    CHECK(d.leaf_count == 1);
    CHECK(d.merges.empty());
  }
}

TEST_CASE("complete linkage matches the recompute-everything oracle") {
  Rng rng(101);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.bounded(29);  // n <= 30
    const std::size_t dims = 1 + rng.bounded(4);
    const Matrix rows = random_matrix(rng, n, dims, 2.0);
    const Dendrogram got = hclust_complete(rows);
    const Dendrogram expected = hclust_complete_oracle(rows);
    REQUIRE(got.merges.size() == expected.merges.size());
    for (std::size_t m = 0; m < got.merges.size(); ++m) {
      CHECK(got.merges[m].left == expected.merges[m].left);
      CHECK(got.merges[m].right == expected.merges[m].right);
      CHECK(got.merges[m].height == doctest::Approx(expected.merges[m].height).epsilon(1e-12));
      CHECK(got.merges[m].size == expected.merges[m].size);
    }
    validate_dendrogram(got);
  }
}

TEST_CASE("duplicate-point ties follow the smallest-representative rule") {
  // Two coincident pairs: (0,1) at x=0 and (2,3) at x=9. Both pairs merge at
  // height zero; the pair containing leaf 0 goes first.
  const Dendrogram d = hclust_complete(points_1d({0, 0, 9, 9}));
  CHECK(d.merges[0].left == 0);
  CHECK(d.merges[0].right == 1);
  CHECK(d.merges[1].left == 2);
  CHECK(d.merges[1].right == 3);
}

TEST_CASE("cuts by count and height") {
  const Dendrogram d = hclust_complete(points_1d({0, 1, 5}));
  SUBCASE("g equals one") {
    const auto cut = cut_by_count(d, 1);
    CHECK(cut.g == 1);
    CHECK(cut.labels == std::vector<int>{0, 0, 0});
  }
  SUBCASE("g equals n") {
    const auto cut = cut_by_count(d, 3);
    CHECK(cut.g == 3);
    CHECK(cut.labels == std::vector<int>{0, 1, 2});
  }
  SUBCASE("g equals two recovers the eyeball clusters") {
    const auto cut = cut_by_count(d, 2);
    CHECK(cut.labels == std::vector<int>{0, 0, 1});
  }
  SUBCASE("height cut between merges matches the count cut") {
    const auto by_height = cut_by_height(d, 3.0);
    CHECK(by_height.labels == cut_by_count(d, 2).labels);
  }
  SUBCASE("range checks") {
    CHECK_THROWS_AS(cut_by_count(d, 0), std::invalid_argument);
    CHECK_THROWS_AS(cut_by_count(d, 4), std::invalid_argument);
    CHECK_THROWS_AS(cut_by_height(d, -1.0), std::invalid_argument);
  }
}

TEST_CASE("count cuts agree with strictly-between height cuts for every g") {
  Rng rng(103);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 3 + rng.bounded(20);
    const Matrix rows = random_matrix(rng, n, 2, 3.0);
    const Dendrogram d = hclust_complete(rows);
    for (int g = 1; g <= static_cast<int>(n); ++g) {
      const int applied = static_cast<int>(n) - g;
      const double lower =
          applied > 0 ? d.merges[static_cast<std::size_t>(applied - 1)].height : 0.0;
      const double upper = applied < static_cast<int>(d.merges.size())
                               ? d.merges[static_cast<std::size_t>(applied)].height
                               : lower + 1.0;
      if (!(upper > lower)) continue;  // tied heights: no strictly-between cut
      const double mid = lower + 0.5 * (upper - lower);
      CHECK(cut_by_height(d, mid).labels == cut_by_count(d, g).labels);
    }
  }
}

TEST_CASE("heights are monotone on random instances") {
  Rng rng(107);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix rows = random_matrix(rng, 3 + rng.bounded(25), 3);
    const Dendrogram d = hclust_complete(rows);
    for (std::size_t m = 1; m < d.merges.size(); ++m)
      CHECK(d.merges[m].height >= d.merges[m - 1].height);
  }
}

TEST_CASE("partitions are equivariant under row permutation") {
  Rng rng(109);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 8 + rng.bounded(12);
    const Matrix rows = random_matrix(rng, n, 2, 2.0);
    std::vector<int> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<int>(i);
    rng.shuffle(perm);
    const Matrix permuted = gather_rows(rows, perm);

    for (int g : {2, 3}) {
      const auto original = cut_by_count(hclust_complete(rows), g);
      const auto shuffled = cut_by_count(hclust_complete(permuted), g);
      // map the permuted labels back to original row ids
      ClusterAssignment mapped;
      mapped.g = shuffled.g;
      mapped.labels.assign(n, -1);
      for (std::size_t pos = 0; pos < n; ++pos)
        mapped.labels[static_cast<std::size_t>(perm[pos])] = shuffled.labels[pos];
      CHECK(as_partition(original) == as_partition(mapped));
    }
  }
}

TEST_CASE("cut nodes, subtree leaves and parents are consistent") {
  const Dendrogram d = hclust_complete(points_1d({0, 1, 5, 6, 20}));
  const auto nodes = cut_nodes_by_count(d, 3);
  const auto cut = cut_by_count(d, 3);
  REQUIRE(nodes.size() == 3);
  for (std::size_t k = 0; k < nodes.size(); ++k)
    for (int leaf : subtree_leaves(d, nodes[k]))
      CHECK(cut.labels[static_cast<std::size_t>(leaf)] == static_cast<int>(k));

  const auto parents = parent_links(d);
  CHECK(parents[static_cast<std::size_t>(d.root())] == -1);
  for (std::size_t m = 0; m < d.merges.size(); ++m) {
    const int self = d.leaf_count + static_cast<int>(m);
    CHECK(parents[static_cast<std::size_t>(d.merges[m].left)] == self);
    CHECK(parents[static_cast<std::size_t>(d.merges[m].right)] == self);
  }
}

TEST_CASE("dendrogram validation rejects malformed trees") {
  Dendrogram bad;
  bad.leaf_count = 3;
  bad.merges = {{0, 1, 2.0, 2}, {3, 2, 1.0, 3}};  // decreasing heights
  CHECK_THROWS_AS(validate_dendrogram(bad), std::invalid_argument);
  bad.merges = {{0, 0, 1.0, 2}, {3, 2, 2.0, 3}};  // duplicate child
  CHECK_THROWS_AS(validate_dendrogram(bad), std::invalid_argument);
  bad.merges = {{0, 1, 1.0, 2}};  // wrong merge count
  CHECK_THROWS_AS(validate_dendrogram(bad), std::invalid_argument);
}
