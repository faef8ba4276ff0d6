#pragma once

#include <cstdint>
#include <vector>

#include "ct/cluster.hpp"
#include "ct/dataset.hpp"
#include "ct/glm.hpp"
#include "ct/loss.hpp"

namespace ct {

enum class PartitionMode { grouped, joint };

struct ClusterIndices {
  std::vector<int> train_indices;  // ascending row indices into X_train
  std::vector<int> test_indices;   // ascending row indices into X_test
  int node = -1;                   // joint mode: dendrogram node of the cluster
};

// A partition of the test rows with one customized training set per cluster.
// Grouped mode: one cluster per test group, trained on the union of each
// group member's R nearest training neighbors. Joint mode: clusters from a
// complete-linkage dendrogram over the stacked train+test rows.
struct CustomizedPartition {
  PartitionMode mode = PartitionMode::joint;
  int g = 0;
  int r_neighbors = 0;                 // grouped mode
  std::vector<ClusterIndices> clusters;
  std::vector<int> rejected_clusters;  // test rows but no training rows
  Dendrogram dendrogram;               // joint mode
  double cut_height = 0.0;             // joint mode: highest applied merge (d_G)
  std::size_t n_train = 0;
  std::size_t n_test = 0;

  bool joint() const { return mode == PartitionMode::joint; }
};

struct PartitionOptions {
  // Distances are computed on raw features by default; set to standardize
  // (center/scale over the stacked rows) first.
  bool standardize_distances = false;
};

inline constexpr int kDefaultRNeighbors = 10;

CustomizedPartition build_grouped_partition(const Matrix& x_train, const Matrix& x_test,
                                            const std::vector<int>& test_groups,
                                            int r_neighbors = kDefaultRNeighbors,
                                            const PartitionOptions& options = {});

CustomizedPartition build_joint_partition(const Matrix& x_train, const Matrix& x_test,
                                          int g, const PartitionOptions& options = {});

// Cuts an existing dendrogram over n_train + n_test stacked rows (training
// rows first). Lets one clustering serve every G in a grid.
CustomizedPartition partition_from_dendrogram(const Dendrogram& dendrogram,
                                              std::size_t n_train, std::size_t n_test,
                                              int g);

// Per-cluster model: either a penalized path fit plus the selected lambda
// index, or a constant classifier for single-class customized training sets.
struct ClusterModel {
  bool fitted = false;
  GlmFit fit;
  std::size_t selected_lambda = 0;
  bool constant_class = false;
  int constant_label = -1;
};

struct RejectionRecord {
  int cluster = -1;
  double d_g = 0.0;      // cut height of the original partition
  double d_prime = 0.0;  // height of the merge that supplied training data
  std::vector<int> train_indices;
  bool resolved = false;
};

struct CtModel {
  CustomizedPartition partition;
  GlmFamily family;
  double lambda_fraction = 1.0;
  FitOptions fit_options;
  std::vector<ClusterModel> cluster_models;  // aligned with partition.clusters
  std::vector<RejectionRecord> rejections;
};

// Fits one model per cluster that has both training and test rows, each on
// its own customized training set (standardized locally inside the glm fit),
// selecting the lambda at the shared path fraction. Single-class
// classification clusters become constant classifiers with probability
// clipped at 1 - 1e-5. Rejected clusters are recorded, not fitted.
CtModel fit_ct(const Matrix& x_train, const Response& y_train,
               const CustomizedPartition& partition, const GlmFamily& family,
               double lambda_fraction, const FitOptions& options = {}, int threads = 1);

struct CtPredictions {
  bool classification = false;
  std::vector<double> values;        // regression predictions (NaN when rejected)
  std::vector<int> labels;           // classification predictions (-1 when rejected)
  std::vector<std::uint8_t> rejected;
  std::vector<int> cluster_ids;

  std::size_t size() const { return rejected.size(); }
};

CtPredictions predict_ct(const CtModel& model, const Matrix& x_test,
                         const LossSpec& loss = {});

// Walks each rejected cluster up the dendrogram to the first ancestor whose
// subtree holds at least min_train training rows, refits on that subtree's
// training rows, and swaps the fit in. Fits of non-rejected clusters are
// untouched, so their predictions stay bit-identical.
CtModel resolve_rejections(const CtModel& model, const Matrix& x_train,
                           const Response& y_train, int min_train = 1);

// Standard-training baseline: one fit on the full training set. predict_ct on
// a forced G=1 joint partition must reproduce it exactly.
struct StModel {
  GlmFit fit;
  std::size_t selected_lambda = 0;
  double lambda_fraction = 1.0;
};

StModel st_fit(const Matrix& x_train, const Response& y_train, const GlmFamily& family,
               double lambda_fraction, const FitOptions& options = {});
std::vector<double> st_predict_values(const StModel& model, const Matrix& x_test);
std::vector<int> st_predict_classes(const StModel& model, const Matrix& x_test,
                                    const LossSpec& loss = {});

}  // namespace ct
