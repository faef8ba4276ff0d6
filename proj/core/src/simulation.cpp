#include "ct/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ct/customize.hpp"
#include "ct/parallel.hpp"
#include "ct/random.hpp"

namespace ct {

namespace {

constexpr std::uint64_t kCtCvTag = 0x6374;
constexpr std::uint64_t kStCvTag = 0x7374;
constexpr std::uint64_t kKnnCvTag = 0x6b6e6e;

std::vector<std::string> feature_names(std::size_t p) {
  std::vector<std::string> names(p);
  for (std::size_t j = 0; j < p; ++j) names[j] = "x" + std::to_string(j + 1);
  return names;
}

Dataset make_regression_dataset(Matrix features, std::vector<double> response) {
  Dataset ds;
  ds.feature_names = feature_names(features.cols());
  ds.response_name = "y";
  ds.features = std::move(features);
  ds.response = std::move(response);
  return ds;
}

double mse(std::span<const double> predictions, std::span<const double> truths) {
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - truths[i];
    s += d * d;
  }
  return s / static_cast<double>(predictions.size());
}

StudyCell run_ct_cell(const SimInstance& inst, const SimConfig& config,
                      const StudyOptions& options) {
  StudyCell cell;
  cell.method = "ct";
  const Response y = Response::regression(inst.train.response);
  CvOptions cv_opts;
  cv_opts.fit.n_lambda = options.n_lambda;
  const auto fractions = default_lambda_fractions(options.n_lambda);
  const std::uint64_t cv_seed = Rng::mix(Rng::mix(config.seed) ^ kCtCvTag);
  const CvReport report =
      cv_select(inst.train.features, y, GlmFamily::gaussian(), options.g_grid, fractions,
                options.folds, cv_seed, LossSpec::squared(), cv_opts);

  const CustomizedPartition part =
      build_joint_partition(inst.train.features, inst.test.features, report.selected_g);
  CtModel model = fit_ct(inst.train.features, y, part, GlmFamily::gaussian(),
                         report.selected_fraction, cv_opts.fit);
  if (!model.partition.rejected_clusters.empty())
    model = resolve_rejections(model, inst.train.features, y);
  const CtPredictions pred = predict_ct(model, inst.test.features);
  cell.mse = mse(pred.values, inst.test.response);
  cell.g_selected = report.selected_g;
  cell.lambda_fraction = report.selected_fraction;
  return cell;
}

StudyCell run_st_cell(const SimInstance& inst, const SimConfig& config,
                      const StudyOptions& options) {
  StudyCell cell;
  cell.method = "st";
  const Response y = Response::regression(inst.train.response);
  CvOptions cv_opts;
  cv_opts.fit.n_lambda = options.n_lambda;
  const auto fractions = default_lambda_fractions(options.n_lambda);
  const std::uint64_t cv_seed = Rng::mix(Rng::mix(config.seed) ^ kStCvTag);
  const CvReport report = st_cv_select(inst.train.features, y, GlmFamily::gaussian(),
                                       fractions, options.folds, cv_seed,
                                       LossSpec::squared(), cv_opts);
  const StModel st =
      st_fit(inst.train.features, y, GlmFamily::gaussian(), report.selected_fraction,
             cv_opts.fit);
  const auto pred = st_predict_values(st, inst.test.features);
  cell.mse = mse(pred, inst.test.response);
  cell.g_selected = 1;
  cell.lambda_fraction = report.selected_fraction;
  return cell;
}

StudyCell run_knn_cell(const SimInstance& inst, const SimConfig& config,
                       const StudyOptions& options) {
  StudyCell cell;
  cell.method = "knn";
  const Response y = Response::regression(inst.train.response);
  const std::uint64_t cv_seed = Rng::mix(Rng::mix(config.seed) ^ kKnnCvTag);
  const KnnCvResult kcv =
      knn_cv_select(inst.train.features, y, 0, default_k_grid(inst.train.n()),
                    options.folds, cv_seed, LossSpec::squared());
  const auto pred =
      knn_predict_values(inst.train.features, inst.train.response, inst.test.features, kcv.k);
  cell.mse = mse(pred, inst.test.response);
  cell.k_selected = kcv.k;
  return cell;
}

}  // namespace

SimInstance generate_instance(const SimConfig& config) {
  if (config.p == 0 || config.p % 10 != 0)
    throw std::invalid_argument("generate_instance: p must be a positive multiple of 10");
  if (config.n < 3 || config.m < 3)
    throw std::invalid_argument("generate_instance: n and m must be >= 3");

  SimInstance inst;
  const std::size_t p = config.p;

  inst.class_probs = Rng::substream(config.seed, sim_streams::kClassProbs).dirichlet222();

  {
    Rng rng = Rng::substream(config.seed, sim_streams::kCenters);
    inst.true_centers = Matrix(3, p);
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t j = 0; j < p; ++j)
        inst.true_centers(k, j) = config.sigma_c * rng.normal();
  }
  {
    Rng rng = Rng::substream(config.seed, sim_streams::kTrainClasses);
    inst.train_classes.resize(config.n);
    for (auto& z : inst.train_classes) z = rng.categorical(inst.class_probs);
  }
  {
    Rng rng = Rng::substream(config.seed, sim_streams::kTestClasses);
    inst.test_classes.resize(config.m);
    for (auto& z : inst.test_classes) z = rng.categorical(inst.class_probs);
  }

  auto draw_features = [&](std::uint64_t tag, const std::vector<int>& classes) {
    Rng rng = Rng::substream(config.seed, tag);
    Matrix x(classes.size(), p);
    for (std::size_t i = 0; i < classes.size(); ++i) {
      const std::size_t k = static_cast<std::size_t>(classes[i]);
      for (std::size_t j = 0; j < p; ++j)
        x(i, j) = inst.true_centers(k, j) + rng.normal();
    }
    return x;
  };
  Matrix x_train = draw_features(sim_streams::kTrainFeatures, inst.train_classes);
  Matrix x_test = draw_features(sim_streams::kTestFeatures, inst.test_classes);

  {
    Rng rng = Rng::substream(config.seed, sim_streams::kBetas);
    inst.true_betas = Matrix(3, p, 0.0);
    const int support = static_cast<int>(p / 10);
    for (std::size_t k = 0; k < 3; ++k)
      for (int j : rng.sample_without_replacement(static_cast<int>(p), support))
        inst.true_betas(k, static_cast<std::size_t>(j)) = 1.0;
  }

  auto draw_response = [&](std::uint64_t tag, const Matrix& x,
                           const std::vector<int>& classes) {
    Rng rng = Rng::substream(config.seed, tag);
    std::vector<double> y(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const std::size_t k = static_cast<std::size_t>(classes[i]);
      double mean = 0.0;
      for (std::size_t j = 0; j < p; ++j) mean += inst.true_betas(k, j) * x(i, j);
      y[i] = mean + rng.normal();
    }
    return y;
  };
  std::vector<double> y_train = draw_response(sim_streams::kTrainNoise, x_train,
                                              inst.train_classes);
  std::vector<double> y_test = draw_response(sim_streams::kTestNoise, x_test,
                                             inst.test_classes);

  inst.train = make_regression_dataset(std::move(x_train), std::move(y_train));
  inst.test = make_regression_dataset(std::move(x_test), std::move(y_test));
  return inst;
}

SimConfig setting_config(StudySetting setting, double sigma_c, std::uint64_t seed) {
  SimConfig config;
  if (setting == StudySetting::low_dim) {
    config.n = 300;
    config.m = 300;
    config.p = 100;
  } else {
    config.n = 200;
    config.m = 200;
    config.p = 300;
  }
  config.sigma_c = sigma_c;
  config.seed = seed;
  return config;
}

StudyResults run_cells(const std::vector<SimConfig>& configs, const std::string& setting_name,
                       const StudyOptions& options) {
  for (const auto& method : options.methods)
    if (method != "ct" && method != "st" && method != "knn")
      throw std::invalid_argument("run_cells: unknown method " + method);

  StudyResults results;
  const std::size_t n_cells = configs.size() * options.methods.size();
  results.cells.resize(n_cells);
  parallel_for(n_cells, options.threads, [&](std::size_t idx) {
    const SimConfig& config = configs[idx / options.methods.size()];
    const std::string& method = options.methods[idx % options.methods.size()];
    const SimInstance inst = generate_instance(config);
    StudyCell cell;
    if (method == "ct")
      cell = run_ct_cell(inst, config, options);
    else if (method == "st")
      cell = run_st_cell(inst, config, options);
    else
      cell = run_knn_cell(inst, config, options);
    cell.setting = setting_name;
    cell.sigma_c = config.sigma_c;
    cell.seed = config.seed;
    results.cells[idx] = cell;
  });
  return results;
}

StudyResults run_study(StudySetting setting, const std::vector<double>& sigma_values,
                       const std::vector<std::uint64_t>& seeds,
                       const StudyOptions& options) {
  if (sigma_values.empty() || seeds.empty())
    throw std::invalid_argument("run_study: empty sigma or seed list");
  std::vector<SimConfig> configs;
  configs.reserve(sigma_values.size() * seeds.size());
  for (double sigma : sigma_values)
    for (std::uint64_t seed : seeds) configs.push_back(setting_config(setting, sigma, seed));
  return run_cells(configs,
                   setting == StudySetting::low_dim ? "low-dim" : "high-dim", options);
}

std::vector<StudySummaryRow> summarize_study(const StudyResults& results) {
  std::vector<StudySummaryRow> rows;
  for (const auto& cell : results.cells) {
    StudySummaryRow* row = nullptr;
    for (auto& r : rows)
      if (r.setting == cell.setting && r.sigma_c == cell.sigma_c && r.method == cell.method)
        row = &r;
    if (!row) {
      rows.push_back({cell.setting, cell.sigma_c, cell.method, 0.0, 0.0, 0});
      row = &rows.back();
    }
    ++row->n_seeds;
    row->mean_mse += cell.mse;
  }
  for (auto& row : rows) row.mean_mse /= row.n_seeds;
  for (auto& row : rows) {
    double ss = 0.0;
    for (const auto& cell : results.cells)
      if (cell.setting == row.setting && cell.sigma_c == row.sigma_c &&
          cell.method == row.method) {
        const double d = cell.mse - row.mean_mse;
        ss += d * d;
      }
    row.stderr_mse = row.n_seeds > 1
                         ? std::sqrt(ss / (row.n_seeds - 1)) / std::sqrt(row.n_seeds)
                         : 0.0;
  }
  return rows;
}

}  // namespace ct
