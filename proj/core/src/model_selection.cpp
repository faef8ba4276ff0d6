#include "ct/model_selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "ct/parallel.hpp"
#include "ct/random.hpp"

namespace ct {

namespace {

constexpr std::uint64_t kFoldStreamTag = 0x466f6c64;  // fold shuffling

std::vector<double> sorted_fractions(std::vector<double> fractions) {
  if (fractions.empty())
    throw std::invalid_argument("cv_select: empty lambda fraction grid");
  for (double f : fractions)
    if (!(f >= 0.0 && f <= 1.0))
      throw std::invalid_argument("cv_select: fractions must lie in [0, 1]");
  std::sort(fractions.begin(), fractions.end(), std::greater<>());
  fractions.erase(std::unique(fractions.begin(), fractions.end()), fractions.end());
  return fractions;
}

// Folds and clusters re-index rows, so per-observation weights would need to
// be carried along; tuning does not support them.
void reject_observation_weights(const CvOptions& options) {
  if (!options.fit.observation_weights.empty())
    throw std::invalid_argument("cross-validation does not take observation weights");
}

Response gather_response(const Response& y, std::span<const int> indices) {
  Response out;
  out.classification = y.classification;
  if (y.classification)
    out.labels = gather(y.labels, indices);
  else
    out.values = gather(y.values, indices);
  return out;
}

double worst_case_point_loss(const LossSpec& loss, const Response& fold_train, double truth) {
  if (loss.kind == LossKind::misclassification) return loss.max_weight();
  double mean = 0.0;
  for (double v : fold_train.values) mean += v;
  mean /= static_cast<double>(fold_train.values.size());
  const double d = truth - mean;
  return d * d;
}

// Per-fraction summed loss of one cluster fit evaluated on its test rows.
std::vector<double> cluster_fraction_losses(const Matrix& x_tr, const Response& y_tr,
                                            const Matrix& x_te, const Response& y_te,
                                            const GlmFamily& family,
                                            const std::vector<double>& fractions,
                                            const LossSpec& loss, const FitOptions& fit_opts) {
  std::vector<double> out(fractions.size(), 0.0);
  if (family.is_classification()) {
    bool single = true;
    for (std::size_t i = 1; i < y_tr.labels.size(); ++i)
      if (y_tr.labels[i] != y_tr.labels[0]) {
        single = false;
        break;
      }
    if (single) {
      // Constant classifier; the decision does not depend on the fraction.
      std::vector<double> probs(static_cast<std::size_t>(family.n_classes),
                                fit_opts.prob_clip / (family.n_classes - 1));
      probs[static_cast<std::size_t>(y_tr.labels[0])] = 1.0 - fit_opts.prob_clip;
      const int decided = weighted_class_decision(probs, loss);
      double total = 0.0;
      for (int truth : y_te.labels)
        if (decided != truth) total += loss.weight(truth);
      std::fill(out.begin(), out.end(), total);
      return out;
    }
  }
  const GlmFit fit = fit_glm_auto(x_tr, y_tr, family, fit_opts);
  std::map<std::size_t, double> by_index;
  for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
    const std::size_t li = lambda_index_for_fraction(fit.n_lambdas(), fractions[fi]);
    auto it = by_index.find(li);
    if (it == by_index.end()) {
      double total = 0.0;
      if (family.is_classification()) {
        const auto classes = predict_class(fit, li, x_te, loss);
        for (std::size_t i = 0; i < classes.size(); ++i)
          if (classes[i] != y_te.labels[i]) total += loss.weight(y_te.labels[i]);
      } else {
        const Matrix pred = predict_response(fit, li, x_te);
        for (std::size_t i = 0; i < x_te.rows(); ++i) {
          const double d = pred(i, 0) - y_te.values[i];
          total += d * d;
        }
      }
      it = by_index.emplace(li, total).first;
    }
    out[fi] = it->second;
  }
  return out;
}

struct FoldSplit {
  std::vector<int> train_idx;
  std::vector<int> test_idx;
};

FoldSplit split_fold(const std::vector<int>& assignment, int fold) {
  FoldSplit s;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == fold)
      s.test_idx.push_back(static_cast<int>(i));
    else
      s.train_idx.push_back(static_cast<int>(i));
  }
  return s;
}

void select_cell(CvReport& report) {
  bool any = false;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t gi = 0; gi < report.g_values.size(); ++gi) {
    if (!report.g_valid[gi]) continue;
    for (std::size_t fi = 0; fi < report.lambda_fractions.size(); ++fi) {
      const double v = report.losses(gi, fi);
      // Grid is ordered (G ascending, fraction descending), so strict
      // comparison realizes the smaller-G / larger-fraction tie-break.
      if (!any || v < best) {
        any = true;
        best = v;
        report.selected_g = report.g_values[gi];
        report.selected_fraction = report.lambda_fractions[fi];
        report.selected_loss = v;
      }
    }
  }
  if (!any) throw std::invalid_argument("cv_select: no valid grid cell");
}

}  // namespace

std::vector<int> make_folds(std::size_t n, int j_folds, std::uint64_t seed,
                            const std::vector<int>* stratify_labels) {
  if (j_folds < 2) throw std::invalid_argument("make_folds: need at least 2 folds");
  if (static_cast<std::size_t>(j_folds) > n)
    throw std::invalid_argument("make_folds: more folds than observations");
  if (stratify_labels && stratify_labels->size() != n)
    throw std::invalid_argument("make_folds: stratification labels length mismatch");

  Rng rng = Rng::substream(seed, kFoldStreamTag);
  std::vector<int> assignment(n, 0);
  if (!stratify_labels) {
    std::vector<int> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
    rng.shuffle(order);
    for (std::size_t pos = 0; pos < n; ++pos)
      assignment[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos) % j_folds;
    return assignment;
  }
  int max_label = 0;
  for (int v : *stratify_labels) max_label = std::max(max_label, v);
  int counter = 0;
  for (int cls = 0; cls <= max_label; ++cls) {
    std::vector<int> members;
    for (std::size_t i = 0; i < n; ++i)
      if ((*stratify_labels)[i] == cls) members.push_back(static_cast<int>(i));
    rng.shuffle(members);
    for (int idx : members) assignment[static_cast<std::size_t>(idx)] = counter++ % j_folds;
  }
  return assignment;
}

CvReport cv_select_with_folds(const Matrix& x_train, const Response& y_train,
                              const GlmFamily& family, const std::vector<int>& g_grid,
                              const std::vector<double>& lambda_fractions,
                              const std::vector<int>& fold_assignment,
                              const LossSpec& loss, const CvOptions& options) {
  reject_observation_weights(options);
  if (g_grid.empty()) throw std::invalid_argument("cv_select: empty G grid");
  for (int g : g_grid)
    if (g < 1) throw std::invalid_argument("cv_select: G values must be >= 1");
  if (fold_assignment.size() != x_train.rows())
    throw std::invalid_argument("cv_select: fold assignment length mismatch");

  CvReport report;
  report.g_values = g_grid;
  std::sort(report.g_values.begin(), report.g_values.end());
  report.g_values.erase(std::unique(report.g_values.begin(), report.g_values.end()),
                        report.g_values.end());
  report.lambda_fractions = sorted_fractions(lambda_fractions);
  report.fold_assignment = fold_assignment;
  int j_folds = 0;
  for (int f : fold_assignment) j_folds = std::max(j_folds, f + 1);
  report.folds = j_folds;

  const std::size_t n_g = report.g_values.size();
  const std::size_t n_f = report.lambda_fractions.size();
  std::vector<Matrix> fold_losses(static_cast<std::size_t>(j_folds));
  std::vector<std::vector<std::uint8_t>> fold_valid(static_cast<std::size_t>(j_folds));

  parallel_for(static_cast<std::size_t>(j_folds), options.threads, [&](std::size_t fold) {
    const FoldSplit split = split_fold(fold_assignment, static_cast<int>(fold));
    Matrix& cell = fold_losses[fold];
    cell = Matrix(n_g, n_f, 0.0);
    fold_valid[fold].assign(n_g, 1);
    if (split.test_idx.empty()) return;

    const Matrix x_tr = gather_rows(x_train, split.train_idx);
    const Matrix x_te = gather_rows(x_train, split.test_idx);
    const Response y_tr = gather_response(y_train, split.train_idx);
    const Response y_te = gather_response(y_train, split.test_idx);

    // One clustering serves the whole G grid for this fold.
    Matrix stacked = vstack(x_tr, x_te);
    if (options.partition.standardize_distances)
      stacked = apply_standardizer(fit_standardizer(stacked), stacked);
    const Dendrogram dendrogram = hclust_complete(stacked);

    for (std::size_t gi = 0; gi < n_g; ++gi) {
      const int g = report.g_values[gi];
      if (static_cast<std::size_t>(g) > split.train_idx.size()) {
        fold_valid[fold][gi] = 0;
        continue;
      }
      const CustomizedPartition part = partition_from_dendrogram(
          dendrogram, split.train_idx.size(), split.test_idx.size(), g);
      for (const auto& cluster : part.clusters) {
        if (cluster.test_indices.empty()) continue;
        const Response truth = gather_response(y_te, cluster.test_indices);
        if (cluster.train_indices.empty()) {
          // Rejected during CV: charge the worst-case per-point loss so
          // rejection-prone G values pay for their abstentions.
          double total = 0.0;
          const std::size_t m_k = cluster.test_indices.size();
          if (y_train.classification) {
            total = loss.max_weight() * static_cast<double>(m_k);
          } else {
            for (double truth_v : truth.values)
              total += worst_case_point_loss(loss, y_tr, truth_v);
          }
          for (std::size_t fi = 0; fi < n_f; ++fi) cell(gi, fi) += total;
          continue;
        }
        const Matrix cx_tr = gather_rows(x_tr, cluster.train_indices);
        const Matrix cx_te = gather_rows(x_te, cluster.test_indices);
        const Response cy_tr = gather_response(y_tr, cluster.train_indices);
        const auto cluster_losses =
            cluster_fraction_losses(cx_tr, cy_tr, cx_te, truth, family,
                                    report.lambda_fractions, loss, options.fit);
        for (std::size_t fi = 0; fi < n_f; ++fi) cell(gi, fi) += cluster_losses[fi];
      }
    }
  });

  report.losses = Matrix(n_g, n_f, 0.0);
  report.g_valid.assign(n_g, 1);
  for (int fold = 0; fold < j_folds; ++fold) {
    for (std::size_t gi = 0; gi < n_g; ++gi) {
      if (!fold_valid[static_cast<std::size_t>(fold)][gi]) report.g_valid[gi] = 0;
      for (std::size_t fi = 0; fi < n_f; ++fi)
        report.losses(gi, fi) += fold_losses[static_cast<std::size_t>(fold)](gi, fi);
    }
  }
  select_cell(report);
  return report;
}

CvReport cv_select(const Matrix& x_train, const Response& y_train,
                   const GlmFamily& family, const std::vector<int>& g_grid,
                   const std::vector<double>& lambda_fractions, int j_folds,
                   std::uint64_t seed, const LossSpec& loss, const CvOptions& options) {
  const std::vector<int>* strat = nullptr;
  if (options.stratify_folds && y_train.classification) strat = &y_train.labels;
  const auto folds = make_folds(x_train.rows(), j_folds, seed, strat);
  CvReport report = cv_select_with_folds(x_train, y_train, family, g_grid,
                                         lambda_fractions, folds, loss, options);
  report.seed = seed;
  return report;
}

CvReport st_cv_select(const Matrix& x_train, const Response& y_train,
                      const GlmFamily& family, const std::vector<double>& lambda_fractions,
                      int j_folds, std::uint64_t seed, const LossSpec& loss,
                      const CvOptions& options) {
  reject_observation_weights(options);
  const std::vector<int>* strat = nullptr;
  if (options.stratify_folds && y_train.classification) strat = &y_train.labels;
  const auto folds = make_folds(x_train.rows(), j_folds, seed, strat);

  CvReport report;
  report.g_values = {1};
  report.lambda_fractions = sorted_fractions(lambda_fractions);
  report.fold_assignment = folds;
  report.folds = j_folds;
  report.seed = seed;

  const std::size_t n_f = report.lambda_fractions.size();
  std::vector<std::vector<double>> fold_losses(static_cast<std::size_t>(j_folds));
  parallel_for(static_cast<std::size_t>(j_folds), options.threads, [&](std::size_t fold) {
    const FoldSplit split = split_fold(folds, static_cast<int>(fold));
    const Matrix x_tr = gather_rows(x_train, split.train_idx);
    const Matrix x_te = gather_rows(x_train, split.test_idx);
    const Response y_tr = gather_response(y_train, split.train_idx);
    const Response y_te = gather_response(y_train, split.test_idx);
    fold_losses[fold] = cluster_fraction_losses(x_tr, y_tr, x_te, y_te, family,
                                                report.lambda_fractions, loss, options.fit);
  });

  report.losses = Matrix(1, n_f, 0.0);
  report.g_valid.assign(1, 1);
  for (const auto& fl : fold_losses)
    for (std::size_t fi = 0; fi < n_f; ++fi) report.losses(0, fi) += fl[fi];
  select_cell(report);
  return report;
}

CvReport cv_select_grouped(const Matrix& x_train, const Response& y_train,
                           const std::vector<int>& train_groups, const GlmFamily& family,
                           int r_neighbors, const std::vector<double>& lambda_fractions,
                           const LossSpec& loss, const CvOptions& options) {
  reject_observation_weights(options);
  if (train_groups.size() != x_train.rows())
    throw std::invalid_argument("cv_select_grouped: group labels length mismatch");
  int n_groups = 0;
  for (int g : train_groups) {
    if (g < 0) throw std::invalid_argument("cv_select_grouped: negative group id");
    n_groups = std::max(n_groups, g + 1);
  }
  if (n_groups < 2)
    throw std::invalid_argument("cv_select_grouped: need at least 2 training groups");

  CvReport report;
  report.grouped = true;
  report.lambda_fractions = sorted_fractions(lambda_fractions);
  report.fold_assignment = train_groups;
  report.folds = n_groups;

  const std::size_t n_f = report.lambda_fractions.size();
  std::vector<std::vector<double>> group_losses(static_cast<std::size_t>(n_groups));
  parallel_for(static_cast<std::size_t>(n_groups), options.threads, [&](std::size_t gid) {
    const FoldSplit split = split_fold(train_groups, static_cast<int>(gid));
    group_losses[gid].assign(n_f, 0.0);
    if (split.test_idx.empty() || split.train_idx.empty()) return;
    const Matrix x_tr = gather_rows(x_train, split.train_idx);
    const Matrix x_te = gather_rows(x_train, split.test_idx);
    const Response y_tr = gather_response(y_train, split.train_idx);
    const Response y_te = gather_response(y_train, split.test_idx);
    const std::vector<int> one_group(split.test_idx.size(), 0);
    const CustomizedPartition part =
        build_grouped_partition(x_tr, x_te, one_group, r_neighbors, options.partition);
    const auto& cluster = part.clusters.front();
    const Matrix cx_tr = gather_rows(x_tr, cluster.train_indices);
    const Response cy_tr = gather_response(y_tr, cluster.train_indices);
    group_losses[gid] = cluster_fraction_losses(cx_tr, cy_tr, x_te, y_te, family,
                                                report.lambda_fractions, loss, options.fit);
  });

  report.losses = Matrix(1, n_f, 0.0);
  report.g_valid.assign(1, 1);
  for (const auto& gl : group_losses)
    for (std::size_t fi = 0; fi < n_f; ++fi) report.losses(0, fi) += gl[fi];
  report.g_values = {1};
  select_cell(report);
  report.g_values.clear();  // grouped mode has no G axis
  return report;
}

std::vector<double> knn_predict_values(const Matrix& x_train,
                                       const std::vector<double>& y_train,
                                       const Matrix& x_test, int k) {
  const int kk = std::min<int>(k, static_cast<int>(x_train.rows()));
  const auto neighbors = knn_indices(x_test, x_train, kk);
  std::vector<double> out(x_test.rows(), 0.0);
  for (std::size_t i = 0; i < x_test.rows(); ++i) {
    double mean = 0.0;
    for (int idx : neighbors[i]) mean += y_train[static_cast<std::size_t>(idx)];
    out[i] = mean / static_cast<double>(neighbors[i].size());
  }
  return out;
}

std::vector<int> knn_predict_classes(const Matrix& x_train, const std::vector<int>& y_train,
                                     int n_classes, const Matrix& x_test, int k) {
  const int kk = std::min<int>(k, static_cast<int>(x_train.rows()));
  const auto neighbors = knn_indices(x_test, x_train, kk);
  std::vector<int> out(x_test.rows(), 0);
  std::vector<int> counts(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < x_test.rows(); ++i) {
    std::fill(counts.begin(), counts.end(), 0);
    for (int idx : neighbors[i]) ++counts[static_cast<std::size_t>(y_train[static_cast<std::size_t>(idx)])];
    int best = 0;
    for (int c = 1; c < n_classes; ++c)
      if (counts[static_cast<std::size_t>(c)] > counts[static_cast<std::size_t>(best)]) best = c;
    out[i] = best;
  }
  return out;
}

KnnCvResult knn_cv_select(const Matrix& x_train, const Response& y_train, int n_classes,
                          const std::vector<int>& k_grid, int j_folds, std::uint64_t seed,
                          const LossSpec& loss, int threads) {
  if (k_grid.empty()) throw std::invalid_argument("knn_cv_select: empty k grid");
  const auto folds = make_folds(x_train.rows(), j_folds, seed);

  KnnCvResult result;
  result.k_grid = k_grid;
  std::sort(result.k_grid.begin(), result.k_grid.end());
  result.k_grid.erase(std::unique(result.k_grid.begin(), result.k_grid.end()),
                      result.k_grid.end());

  std::vector<std::vector<double>> fold_losses(static_cast<std::size_t>(j_folds));
  parallel_for(static_cast<std::size_t>(j_folds), threads, [&](std::size_t fold) {
    const FoldSplit split = split_fold(folds, static_cast<int>(fold));
    const Matrix x_tr = gather_rows(x_train, split.train_idx);
    const Matrix x_te = gather_rows(x_train, split.test_idx);
    const Response y_tr = gather_response(y_train, split.train_idx);
    const Response y_te = gather_response(y_train, split.test_idx);
    auto& fl = fold_losses[fold];
    fl.assign(result.k_grid.size(), 0.0);
    for (std::size_t ki = 0; ki < result.k_grid.size(); ++ki) {
      if (y_train.classification) {
        const auto pred =
            knn_predict_classes(x_tr, y_tr.labels, n_classes, x_te, result.k_grid[ki]);
        for (std::size_t i = 0; i < pred.size(); ++i)
          if (pred[i] != y_te.labels[i]) fl[ki] += loss.weight(y_te.labels[i]);
      } else {
        const auto pred = knn_predict_values(x_tr, y_tr.values, x_te, result.k_grid[ki]);
        for (std::size_t i = 0; i < pred.size(); ++i) {
          const double d = pred[i] - y_te.values[i];
          fl[ki] += d * d;
        }
      }
    }
  });

  result.losses.assign(result.k_grid.size(), 0.0);
  for (const auto& fl : fold_losses)
    for (std::size_t ki = 0; ki < fl.size(); ++ki) result.losses[ki] += fl[ki];
  std::size_t best = 0;
  for (std::size_t ki = 1; ki < result.losses.size(); ++ki)
    if (result.losses[ki] < result.losses[best]) best = ki;
  result.k = result.k_grid[best];
  return result;
}

std::vector<int> default_k_grid(std::size_t n_train) {
  std::vector<int> grid;
  for (int k : {1, 2, 3, 5, 8, 12, 20, 35, 50})
    if (static_cast<std::size_t>(k) <= n_train) grid.push_back(k);
  if (grid.empty()) grid.push_back(1);
  return grid;
}

}  // namespace ct
