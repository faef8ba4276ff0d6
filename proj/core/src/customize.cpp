#include "ct/customize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "ct/parallel.hpp"

namespace ct {

namespace {

Response gather_response(const Response& y, std::span<const int> indices) {
  Response out;
  out.classification = y.classification;
  if (y.classification)
    out.labels = gather(y.labels, indices);
  else
    out.values = gather(y.values, indices);
  return out;
}

bool single_class(const Response& y) {
  for (std::size_t i = 1; i < y.labels.size(); ++i)
    if (y.labels[i] != y.labels[0]) return false;
  return true;
}

// Constant classifier probabilities: 1 - clip on the observed class, the
// remainder spread over the others.
std::vector<double> constant_class_probs(int label, int n_classes, double clip) {
  std::vector<double> probs(static_cast<std::size_t>(n_classes),
                            clip / static_cast<double>(n_classes - 1));
  probs[static_cast<std::size_t>(label)] = 1.0 - clip;
  return probs;
}

ClusterModel fit_cluster(const Matrix& x_train, const Response& y_train,
                         const ClusterIndices& cluster, const GlmFamily& family,
                         double lambda_fraction, const FitOptions& options) {
  ClusterModel model;
  const Matrix x = gather_rows(x_train, cluster.train_indices);
  const Response y = gather_response(y_train, cluster.train_indices);
  if (family.is_classification() && single_class(y)) {
    model.constant_class = true;
    model.constant_label = y.labels[0];
    return model;
  }
  model.fitted = true;
  if (options.observation_weights.empty()) {
    model.fit = fit_glm_auto(x, y, family, options);
  } else {
    // observation weights follow their rows into the customized training set
    if (options.observation_weights.size() != x_train.rows())
      throw std::invalid_argument("fit_ct: observation weights length mismatch");
    FitOptions local = options;
    local.observation_weights =
        gather(options.observation_weights, cluster.train_indices);
    model.fit = fit_glm_auto(x, y, family, local);
  }
  model.selected_lambda =
      lambda_index_for_fraction(model.fit.n_lambdas(), lambda_fraction);
  return model;
}

void validate_family_response(const GlmFamily& family, const Response& y) {
  if (family.is_classification() != y.classification)
    throw std::invalid_argument("fit_ct: family does not match response type");
}

}  // namespace

CustomizedPartition build_grouped_partition(const Matrix& x_train, const Matrix& x_test,
                                            const std::vector<int>& test_groups,
                                            int r_neighbors,
                                            const PartitionOptions& options) {
  if (x_train.rows() == 0) throw std::invalid_argument("grouped partition: empty training set");
  if (test_groups.size() != x_test.rows())
    throw std::invalid_argument("grouped partition: group labels do not match test rows");
  if (r_neighbors < 1) throw std::invalid_argument("grouped partition: r must be >= 1");

  Matrix train_view = x_train;
  Matrix test_view = x_test;
  if (options.standardize_distances) {
    const Standardizer st = fit_standardizer(vstack(x_train, x_test));
    train_view = apply_standardizer(st, x_train);
    test_view = apply_standardizer(st, x_test);
  }

  int n_groups = 0;
  for (int gid : test_groups) {
    if (gid < 0) throw std::invalid_argument("grouped partition: negative group id");
    n_groups = std::max(n_groups, gid + 1);
  }

  CustomizedPartition part;
  part.mode = PartitionMode::grouped;
  part.r_neighbors = r_neighbors;
  part.n_train = x_train.rows();
  part.n_test = x_test.rows();
  part.clusters.resize(static_cast<std::size_t>(n_groups));
  for (std::size_t i = 0; i < test_groups.size(); ++i)
    part.clusters[static_cast<std::size_t>(test_groups[i])].test_indices.push_back(
        static_cast<int>(i));

  const auto neighbors = knn_indices(test_view, train_view, r_neighbors);
  for (auto& cluster : part.clusters) {
    std::set<int> pool;
    for (int ti : cluster.test_indices)
      for (int ni : neighbors[static_cast<std::size_t>(ti)]) pool.insert(ni);
    cluster.train_indices.assign(pool.begin(), pool.end());
  }
  part.g = n_groups;
  return part;
}

CustomizedPartition partition_from_dendrogram(const Dendrogram& dendrogram,
                                              std::size_t n_train, std::size_t n_test,
                                              int g) {
  if (dendrogram.leaf_count != static_cast<int>(n_train + n_test))
    throw std::invalid_argument("partition_from_dendrogram: leaf count mismatch");
  if (n_train == 0) throw std::invalid_argument("joint partition: empty training set");
  if (g < 1 || g > dendrogram.leaf_count)
    throw std::invalid_argument("joint partition: g out of range");

  CustomizedPartition part;
  part.mode = PartitionMode::joint;
  part.n_train = n_train;
  part.n_test = n_test;
  part.dendrogram = dendrogram;
  const auto nodes = cut_nodes_by_count(part.dendrogram, g);
  part.g = static_cast<int>(nodes.size());
  const int applied = part.dendrogram.leaf_count - g;
  part.cut_height =
      applied > 0 ? part.dendrogram.merges[static_cast<std::size_t>(applied - 1)].height
                  : 0.0;

  part.clusters.resize(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    auto& cluster = part.clusters[k];
    cluster.node = nodes[k];
    for (int leaf : subtree_leaves(part.dendrogram, nodes[k])) {
      if (leaf < static_cast<int>(n_train))
        cluster.train_indices.push_back(leaf);
      else
        cluster.test_indices.push_back(leaf - static_cast<int>(n_train));
    }
    if (cluster.train_indices.empty() && !cluster.test_indices.empty())
      part.rejected_clusters.push_back(static_cast<int>(k));
  }
  return part;
}

CustomizedPartition build_joint_partition(const Matrix& x_train, const Matrix& x_test,
                                          int g, const PartitionOptions& options) {
  const std::size_t n = x_train.rows();
  const std::size_t m = x_test.rows();
  if (n == 0) throw std::invalid_argument("joint partition: empty training set");
  if (g < 1 || static_cast<std::size_t>(g) > n + m)
    throw std::invalid_argument("joint partition: g out of range");

  Matrix stacked = vstack(x_train, x_test);
  if (options.standardize_distances)
    stacked = apply_standardizer(fit_standardizer(stacked), stacked);
  return partition_from_dendrogram(hclust_complete(stacked), n, m, g);
}

CtModel fit_ct(const Matrix& x_train, const Response& y_train,
               const CustomizedPartition& partition, const GlmFamily& family,
               double lambda_fraction, const FitOptions& options, int threads) {
  validate_family_response(family, y_train);
  if (y_train.size() != x_train.rows())
    throw std::invalid_argument("fit_ct: response length mismatch");
  if (partition.n_train != x_train.rows())
    throw std::invalid_argument("fit_ct: partition was built for a different training set");

  CtModel model;
  model.partition = partition;
  model.family = family;
  model.lambda_fraction = lambda_fraction;
  model.fit_options = options;
  model.fit_options.sweep_observer = nullptr;
  model.cluster_models.resize(partition.clusters.size());

  std::vector<std::size_t> todo;
  for (std::size_t k = 0; k < partition.clusters.size(); ++k) {
    const auto& cluster = partition.clusters[k];
    if (!cluster.test_indices.empty() && !cluster.train_indices.empty()) todo.push_back(k);
  }
  parallel_for(todo.size(), threads, [&](std::size_t t) {
    const std::size_t k = todo[t];
    model.cluster_models[k] = fit_cluster(x_train, y_train, partition.clusters[k], family,
                                          lambda_fraction, options);
  });
  return model;
}

CtPredictions predict_ct(const CtModel& model, const Matrix& x_test,
                         const LossSpec& loss) {
  const std::size_t m = model.partition.n_test;
  if (x_test.rows() != m)
    throw std::invalid_argument("predict_ct: test row count does not match partition");

  CtPredictions out;
  out.classification = model.family.is_classification();
  out.values.assign(m, std::numeric_limits<double>::quiet_NaN());
  out.labels.assign(m, -1);
  out.rejected.assign(m, 0);
  out.cluster_ids.assign(m, -1);

  for (std::size_t k = 0; k < model.partition.clusters.size(); ++k) {
    const auto& cluster = model.partition.clusters[k];
    if (cluster.test_indices.empty()) continue;
    for (int row : cluster.test_indices) out.cluster_ids[static_cast<std::size_t>(row)] =
        static_cast<int>(k);

    const auto& cm = model.cluster_models[k];
    if (cm.constant_class) {
      const auto probs = constant_class_probs(cm.constant_label, model.family.n_classes,
                                              model.fit_options.prob_clip);
      const int decided = weighted_class_decision(probs, loss);
      for (int row : cluster.test_indices) out.labels[static_cast<std::size_t>(row)] = decided;
      continue;
    }
    if (!cm.fitted) {
      for (int row : cluster.test_indices) out.rejected[static_cast<std::size_t>(row)] = 1;
      continue;
    }
    const Matrix rows = gather_rows(x_test, cluster.test_indices);
    if (out.classification) {
      const auto classes = predict_class(cm.fit, cm.selected_lambda, rows, loss);
      for (std::size_t i = 0; i < cluster.test_indices.size(); ++i)
        out.labels[static_cast<std::size_t>(cluster.test_indices[i])] = classes[i];
    } else {
      const Matrix values = predict_response(cm.fit, cm.selected_lambda, rows);
      for (std::size_t i = 0; i < cluster.test_indices.size(); ++i)
        out.values[static_cast<std::size_t>(cluster.test_indices[i])] = values(i, 0);
    }
  }
  return out;
}

CtModel resolve_rejections(const CtModel& model, const Matrix& x_train,
                           const Response& y_train, int min_train) {
  if (!model.partition.joint())
    throw std::invalid_argument("resolve_rejections: needs a joint-mode partition");
  if (min_train < 1) throw std::invalid_argument("resolve_rejections: min_train < 1");
  if (static_cast<std::size_t>(min_train) > x_train.rows())
    throw std::invalid_argument("resolve_rejections: min_train exceeds training size");

  CtModel resolved = model;
  if (model.partition.rejected_clusters.empty()) return resolved;

  const auto& dend = model.partition.dendrogram;
  const auto parents = parent_links(dend);
  const int n_train = static_cast<int>(x_train.rows());

  for (int k : model.partition.rejected_clusters) {
    const auto& cluster = model.partition.clusters[static_cast<std::size_t>(k)];
    int node = cluster.node;
    std::vector<int> train_pool;
    for (;;) {
      node = parents[static_cast<std::size_t>(node)];
      if (node < 0)
        throw std::invalid_argument("resolve_rejections: dendrogram has no training rows");
      train_pool.clear();
      for (int leaf : subtree_leaves(dend, node))
        if (leaf < n_train) train_pool.push_back(leaf);
      if (static_cast<int>(train_pool.size()) >= min_train) break;
    }

    ClusterIndices enlarged;
    enlarged.train_indices = train_pool;
    enlarged.test_indices = cluster.test_indices;
    enlarged.node = node;
    resolved.cluster_models[static_cast<std::size_t>(k)] =
        fit_cluster(x_train, y_train, enlarged, model.family, model.lambda_fraction,
                    model.fit_options);

    RejectionRecord record;
    record.cluster = k;
    record.d_g = model.partition.cut_height;
    record.d_prime = dend.node_height(node);
    record.train_indices = train_pool;
    record.resolved = true;
    resolved.rejections.push_back(record);
  }
  resolved.partition.rejected_clusters.clear();
  return resolved;
}

StModel st_fit(const Matrix& x_train, const Response& y_train, const GlmFamily& family,
               double lambda_fraction, const FitOptions& options) {
  validate_family_response(family, y_train);
  StModel model;
  model.fit = fit_glm_auto(x_train, y_train, family, options);
  model.lambda_fraction = lambda_fraction;
  model.selected_lambda = lambda_index_for_fraction(model.fit.n_lambdas(), lambda_fraction);
  return model;
}

std::vector<double> st_predict_values(const StModel& model, const Matrix& x_test) {
  const Matrix out = predict_response(model.fit, model.selected_lambda, x_test);
  std::vector<double> values(x_test.rows());
  for (std::size_t i = 0; i < x_test.rows(); ++i) values[i] = out(i, 0);
  return values;
}

std::vector<int> st_predict_classes(const StModel& model, const Matrix& x_test,
                                    const LossSpec& loss) {
  return predict_class(model.fit, model.selected_lambda, x_test, loss);
}

}  // namespace ct
