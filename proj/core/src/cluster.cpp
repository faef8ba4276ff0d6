#include "ct/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ct {

void validate_dendrogram(const Dendrogram& d) {
  if (d.leaf_count < 1) throw std::invalid_argument("dendrogram: needs at least one leaf");
  const int n = d.leaf_count;
  if (static_cast<int>(d.merges.size()) != n - 1)
    throw std::invalid_argument("dendrogram: expected n-1 merges");
  std::vector<char> used(static_cast<std::size_t>(d.n_nodes()), 0);
  double prev = 0.0;
  for (std::size_t m = 0; m < d.merges.size(); ++m) {
    const auto& merge = d.merges[m];
    const int self = n + static_cast<int>(m);
    if (merge.left < 0 || merge.right < 0 || merge.left >= self || merge.right >= self ||
        merge.left == merge.right)
      throw std::invalid_argument("dendrogram: bad child ids");
    if (used[static_cast<std::size_t>(merge.left)] ||
        used[static_cast<std::size_t>(merge.right)])
      throw std::invalid_argument("dendrogram: node used as child twice");
    used[static_cast<std::size_t>(merge.left)] = 1;
    used[static_cast<std::size_t>(merge.right)] = 1;
    if (merge.height < prev)
      throw std::invalid_argument("dendrogram: heights must be non-decreasing");
    prev = merge.height;
  }
  for (int node = 0; node < d.n_nodes() - 1; ++node)
    if (!used[static_cast<std::size_t>(node)])
      throw std::invalid_argument("dendrogram: disconnected node");
}

std::vector<std::vector<int>> knn_indices(const Matrix& query_rows,
                                          const Matrix& reference_rows, int r) {
  if (r < 1) throw std::invalid_argument("knn_indices: r must be >= 1");
  if (reference_rows.rows() == 0)
    throw std::invalid_argument("knn_indices: empty reference set");
  if (query_rows.cols() != reference_rows.cols())
    throw std::invalid_argument("knn_indices: column count mismatch");

  const std::size_t n_ref = reference_rows.rows();
  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(r), n_ref);
  std::vector<std::vector<int>> out(query_rows.rows());
  std::vector<std::pair<double, int>> ranked(n_ref);
  for (std::size_t qi = 0; qi < query_rows.rows(); ++qi) {
    const auto q = query_rows.row(qi);
    for (std::size_t i = 0; i < n_ref; ++i)
      ranked[i] = {squared_distance(q, reference_rows.row(i)), static_cast<int>(i)};
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep),
                      ranked.end());
    out[qi].resize(keep);
    for (std::size_t k = 0; k < keep; ++k) out[qi][k] = ranked[k].second;
  }
  return out;
}

Dendrogram hclust_complete(const Matrix& rows) {
  const int n = static_cast<int>(rows.rows());
  if (n < 1) throw std::invalid_argument("hclust_complete: empty input");
  Dendrogram dend;
  dend.leaf_count = n;
  if (n == 1) return dend;

  const std::size_t un = static_cast<std::size_t>(n);
  std::vector<double> dist(un * un, 0.0);
  for (std::size_t i = 0; i < un; ++i) {
    for (std::size_t j = i + 1; j < un; ++j) {
      const double d = std::sqrt(squared_distance(rows.row(i), rows.row(j)));
      dist[i * un + j] = d;
      dist[j * un + i] = d;
    }
  }

  std::vector<char> active(un, 1);
  std::vector<int> node_of(un), rep(un), size(un, 1);
  std::iota(node_of.begin(), node_of.end(), 0);
  std::iota(rep.begin(), rep.end(), 0);

  dend.merges.reserve(un - 1);
  for (int step = 0; step < n - 1; ++step) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    int best_lo = 0, best_hi = 0;
    bool have = false;
    for (std::size_t i = 0; i < un; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < un; ++j) {
        if (!active[j]) continue;
        const double d = dist[i * un + j];
        const int lo = std::min(rep[i], rep[j]);
        const int hi = std::max(rep[i], rep[j]);
        if (!have || d < best ||
            (d == best && (lo < best_lo || (lo == best_lo && hi < best_hi)))) {
          best = d;
          bi = i;
          bj = j;
          best_lo = lo;
          best_hi = hi;
          have = true;
        }
      }
    }
    const int left_slot = rep[bi] <= rep[bj] ? static_cast<int>(bi) : static_cast<int>(bj);
    const int right_slot = left_slot == static_cast<int>(bi) ? static_cast<int>(bj)
                                                             : static_cast<int>(bi);
    DendrogramMerge merge;
    merge.left = node_of[static_cast<std::size_t>(left_slot)];
    merge.right = node_of[static_cast<std::size_t>(right_slot)];
    merge.height = best;
    merge.size = size[bi] + size[bj];
    dend.merges.push_back(merge);

    // Merge bj into bi; complete linkage keeps the max distance.
    for (std::size_t k = 0; k < un; ++k) {
      if (!active[k] || k == bi || k == bj) continue;
      const double d = std::max(dist[bi * un + k], dist[bj * un + k]);
      dist[bi * un + k] = d;
      dist[k * un + bi] = d;
    }
    active[bj] = 0;
    node_of[bi] = n + step;
    rep[bi] = std::min(rep[bi], rep[bj]);
    size[bi] += size[bj];
  }
  return dend;
}

namespace {

// Labels after applying the first `applied` merges, ids by smallest leaf.
ClusterAssignment assign_from_prefix(const Dendrogram& d, int applied) {
  const int n = d.leaf_count;
  std::vector<int> root_of(static_cast<std::size_t>(n + applied));
  std::iota(root_of.begin(), root_of.end(), 0);
  // find with path compression over the node-id forest
  auto find = [&](int node) {
    int r = node;
    while (root_of[static_cast<std::size_t>(r)] != r) r = root_of[static_cast<std::size_t>(r)];
    while (root_of[static_cast<std::size_t>(node)] != r) {
      const int next = root_of[static_cast<std::size_t>(node)];
      root_of[static_cast<std::size_t>(node)] = r;
      node = next;
    }
    return r;
  };
  for (int m = 0; m < applied; ++m) {
    const auto& merge = d.merges[static_cast<std::size_t>(m)];
    const int self = n + m;
    root_of[static_cast<std::size_t>(find(merge.left))] = self;
    root_of[static_cast<std::size_t>(find(merge.right))] = self;
  }

  std::vector<int> min_leaf(static_cast<std::size_t>(n + applied), -1);
  for (int leaf = 0; leaf < n; ++leaf) {
    const int r = find(leaf);
    if (min_leaf[static_cast<std::size_t>(r)] < 0) min_leaf[static_cast<std::size_t>(r)] = leaf;
  }
  std::vector<int> reps;
  for (int leaf = 0; leaf < n; ++leaf) {
    const int r = find(leaf);
    if (min_leaf[static_cast<std::size_t>(r)] == leaf) reps.push_back(r);
  }
  // reps are discovered in min-leaf order already (leaf scan is ascending)
  std::vector<int> id_of(static_cast<std::size_t>(n + applied), -1);
  for (std::size_t k = 0; k < reps.size(); ++k) id_of[static_cast<std::size_t>(reps[k])] = static_cast<int>(k);

  ClusterAssignment out;
  out.g = static_cast<int>(reps.size());
  out.labels.resize(static_cast<std::size_t>(n));
  for (int leaf = 0; leaf < n; ++leaf)
    out.labels[static_cast<std::size_t>(leaf)] = id_of[static_cast<std::size_t>(find(leaf))];
  return out;
}

}  // namespace

ClusterAssignment cut_by_count(const Dendrogram& d, int g) {
  if (g < 1 || g > d.leaf_count)
    throw std::invalid_argument("cut_by_count: g out of range");
  return assign_from_prefix(d, d.leaf_count - g);
}

ClusterAssignment cut_by_height(const Dendrogram& d, double height) {
  if (height < 0.0) throw std::invalid_argument("cut_by_height: negative height");
  int applied = 0;
  while (applied < static_cast<int>(d.merges.size()) &&
         d.merges[static_cast<std::size_t>(applied)].height <= height)
    ++applied;
  return assign_from_prefix(d, applied);
}

std::vector<int> cut_nodes_by_count(const Dendrogram& d, int g) {
  if (g < 1 || g > d.leaf_count)
    throw std::invalid_argument("cut_nodes_by_count: g out of range");
  const int applied = d.leaf_count - g;
  std::vector<char> is_child(static_cast<std::size_t>(d.leaf_count + applied), 0);
  for (int m = 0; m < applied; ++m) {
    const auto& merge = d.merges[static_cast<std::size_t>(m)];
    is_child[static_cast<std::size_t>(merge.left)] = 1;
    is_child[static_cast<std::size_t>(merge.right)] = 1;
  }
  std::vector<std::pair<int, int>> nodes;  // (min leaf, node)
  for (int node = 0; node < d.leaf_count + applied; ++node) {
    if (is_child[static_cast<std::size_t>(node)]) continue;
    const auto leaves = subtree_leaves(d, node);
    nodes.emplace_back(leaves.front(), node);
  }
  std::sort(nodes.begin(), nodes.end());
  std::vector<int> out;
  out.reserve(nodes.size());
  for (const auto& [leaf, node] : nodes) out.push_back(node);
  return out;
}

std::vector<int> subtree_leaves(const Dendrogram& d, int node) {
  if (!d.valid_node(node)) throw std::invalid_argument("subtree_leaves: bad node");
  std::vector<int> leaves;
  std::vector<int> stack{node};
  while (!stack.empty()) {
    const int cur = stack.back();
    stack.pop_back();
    if (cur < d.leaf_count) {
      leaves.push_back(cur);
    } else {
      const auto& merge = d.merges[static_cast<std::size_t>(cur - d.leaf_count)];
      stack.push_back(merge.left);
      stack.push_back(merge.right);
    }
  }
  std::sort(leaves.begin(), leaves.end());
  return leaves;
}

std::vector<int> parent_links(const Dendrogram& d) {
  std::vector<int> parent(static_cast<std::size_t>(d.n_nodes()), -1);
  for (std::size_t m = 0; m < d.merges.size(); ++m) {
    const int self = d.leaf_count + static_cast<int>(m);
    parent[static_cast<std::size_t>(d.merges[m].left)] = self;
    parent[static_cast<std::size_t>(d.merges[m].right)] = self;
  }
  return parent;
}

}  // namespace ct
