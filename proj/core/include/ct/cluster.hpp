#pragma once

#include <vector>

#include "ct/matrix.hpp"

namespace ct {

// One agglomeration step. Node ids follow the usual linkage convention:
// leaves are 0..n-1 and merge i creates node n+i. `left` always holds the
// child whose smallest leaf index is smaller.
struct DendrogramMerge {
  int left = -1;
  int right = -1;
  double height = 0.0;
  int size = 0;  // leaves under the merged node
};

struct Dendrogram {
  int leaf_count = 0;
  std::vector<DendrogramMerge> merges;

  int n_nodes() const { return leaf_count + static_cast<int>(merges.size()); }
  int root() const { return n_nodes() - 1; }
  bool valid_node(int node) const { return node >= 0 && node < n_nodes(); }
  double node_height(int node) const {
    return node < leaf_count ? 0.0
                             : merges[static_cast<std::size_t>(node - leaf_count)].height;
  }
};

// Throws std::invalid_argument if the merge list is not a well-formed
// monotone-height binary merge tree over leaf_count leaves.
void validate_dendrogram(const Dendrogram& d);

struct ClusterAssignment {
  std::vector<int> labels;  // one id in 0..g-1 per leaf
  int g = 0;
};

// For each query row, the indices of the min(r, n_ref) reference rows with
// the smallest Euclidean distance, ranked by (distance, index).
std::vector<std::vector<int>> knn_indices(const Matrix& query_rows,
                                          const Matrix& reference_rows, int r);

// Agglomerative clustering with complete (maximum) linkage on Euclidean
// distances. Deterministic: among pairs at the minimal linkage distance the
// pair with the lexicographically smallest (min leaf, other min leaf) merges
// first. Stored-matrix implementation, O(n^2) memory: fine up to roughly 20k
// rows, not meant for more.
Dendrogram hclust_complete(const Matrix& rows);

// Exactly g clusters: the last g-1 merges are undone. Cluster ids are
// assigned by smallest contained leaf index, ascending.
ClusterAssignment cut_by_count(const Dendrogram& d, int g);
// Keeps every merge with height <= height; same id convention.
ClusterAssignment cut_by_height(const Dendrogram& d, double height);

// The maximal surviving node of each cluster in a count-g cut, ordered like
// the cut_by_count cluster ids.
std::vector<int> cut_nodes_by_count(const Dendrogram& d, int g);
// Leaf indices under `node`, ascending.
std::vector<int> subtree_leaves(const Dendrogram& d, int node);
// parent[node] for every node; -1 for the root.
std::vector<int> parent_links(const Dendrogram& d);

}  // namespace ct
