#pragma once

#include <cstdint>
#include <vector>

#include "ct/customize.hpp"
#include "ct/dataset.hpp"
#include "ct/glm.hpp"
#include "ct/loss.hpp"
#include "ct/matrix.hpp"

namespace ct {

inline constexpr int kDefaultFolds = 10;
inline const std::vector<int> kDefaultGGrid{1, 2, 3, 5, 10};

struct CvOptions {
  FitOptions fit;
  PartitionOptions partition;
  bool stratify_folds = false;
  int threads = 1;
};

// Loss surface over the (G, lambda-fraction) grid. Fractions are stored in
// decreasing order (1 = top of each cluster's path, maximal regularization).
// Rows of `losses` follow g_values; a row is invalid when some fold's
// training part had fewer rows than that G. The selected cell minimizes the
// summed fold loss, ties broken by smaller G then larger fraction.
struct CvReport {
  std::vector<int> g_values;
  std::vector<double> lambda_fractions;
  Matrix losses;
  std::vector<std::uint8_t> g_valid;
  int selected_g = 1;
  double selected_fraction = 1.0;
  double selected_loss = 0.0;
  int folds = 0;
  std::vector<int> fold_assignment;
  std::uint64_t seed = 0;
  bool grouped = false;
};

// Seeded fold assignment with sizes differing by at most one. Optional
// stratification keeps per-class fold counts within one of each other.
std::vector<int> make_folds(std::size_t n, int j_folds, std::uint64_t seed,
                            const std::vector<int>* stratify_labels = nullptr);

// Joint-mode cross-validation: each held-out fold is treated as a pseudo test
// set, jointly clustered with the remaining folds at every G in the grid, and
// scored with per-cluster fits at every fraction. Points landing in rejected
// clusters are charged the worst-case per-point loss (max class weight, or
// squared deviation from the fold-training mean).
CvReport cv_select(const Matrix& x_train, const Response& y_train,
                   const GlmFamily& family, const std::vector<int>& g_grid,
                   const std::vector<double>& lambda_fractions, int j_folds,
                   std::uint64_t seed, const LossSpec& loss, const CvOptions& options = {});

// Same, but with a caller-provided fold assignment (values in 0..j_folds-1).
CvReport cv_select_with_folds(const Matrix& x_train, const Response& y_train,
                              const GlmFamily& family, const std::vector<int>& g_grid,
                              const std::vector<double>& lambda_fractions,
                              const std::vector<int>& fold_assignment,
                              const LossSpec& loss, const CvOptions& options = {});

// Standard lasso cross-validation over fractions only (the G = 1 reduction,
// and the tuning rule of the ST baseline).
CvReport st_cv_select(const Matrix& x_train, const Response& y_train,
                      const GlmFamily& family, const std::vector<double>& lambda_fractions,
                      int j_folds, std::uint64_t seed, const LossSpec& loss,
                      const CvOptions& options = {});

// Grouped-mode tuning: folds are whole training groups (leave-one-group-out);
// each held-out group is predicted from the union of its members' R nearest
// neighbors among the remaining rows. Only the fraction is tuned.
CvReport cv_select_grouped(const Matrix& x_train, const Response& y_train,
                           const std::vector<int>& train_groups, const GlmFamily& family,
                           int r_neighbors, const std::vector<double>& lambda_fractions,
                           const LossSpec& loss, const CvOptions& options = {});

// k-nearest-neighbor baseline: mean response (regression) or majority vote
// with lower-class tie-break (classification). k is clamped to the training
// size.
std::vector<double> knn_predict_values(const Matrix& x_train,
                                       const std::vector<double>& y_train,
                                       const Matrix& x_test, int k);
std::vector<int> knn_predict_classes(const Matrix& x_train, const std::vector<int>& y_train,
                                     int n_classes, const Matrix& x_test, int k);

struct KnnCvResult {
  int k = 1;
  std::vector<int> k_grid;
  std::vector<double> losses;
};

KnnCvResult knn_cv_select(const Matrix& x_train, const Response& y_train, int n_classes,
                          const std::vector<int>& k_grid, int j_folds, std::uint64_t seed,
                          const LossSpec& loss, int threads = 1);

std::vector<int> default_k_grid(std::size_t n_train);

}  // namespace ct
