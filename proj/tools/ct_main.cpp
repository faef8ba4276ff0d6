// ct: transductive fitting with customized training sets.
//
// Subcommands:
//   ct cv-fit     cross-validate (G, lambda-fraction), fit the final model
//   ct predict    predictions CSV from a saved model, optional rejection fix
//   ct simulate   synthetic three-regime study sweeping the center spread
//   ct baseline   st (one lasso on everything) and knn reference methods
//
// Exit codes: 0 success, 2 input/usage error, 1 internal error.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ct/customize.hpp"
#include "ct/dataset.hpp"
#include "ct/glm.hpp"
#include "ct/model_selection.hpp"
#include "ct/serialize.hpp"
#include "ct/simulation.hpp"
#include "ct/version.hpp"

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

std::vector<int> parse_int_list(const std::string& text, const std::string& flag) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw std::invalid_argument("bad value '" + item + "' in " + flag);
    }
  }
  if (out.empty()) throw std::invalid_argument(flag + " is empty");
  return out;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw std::invalid_argument("bad value '" + item + "' in " + flag);
    }
  }
  if (out.empty()) throw std::invalid_argument(flag + " is empty");
  return out;
}

// "name=weight,name=weight" against the encoded class labels.
ct::LossSpec parse_loss(const std::string& weights_text, const ct::Dataset& train) {
  ct::LossSpec loss;
  loss.kind = train.classification ? ct::LossKind::misclassification
                                   : ct::LossKind::squared_error;
  if (weights_text.empty()) return loss;
  if (!train.classification)
    throw std::invalid_argument("--loss-weights needs a classification response");
  loss.class_weights.assign(train.class_labels.size(), 1.0);
  std::stringstream ss(weights_text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--loss-weights entries must look like name=weight");
    const std::string name = item.substr(0, eq);
    double w = 0.0;
    try {
      w = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw std::invalid_argument("bad weight for class '" + name + "'");
    }
    if (w <= 0.0) throw std::invalid_argument("class weights must be positive");
    bool found = false;
    for (std::size_t c = 0; c < train.class_labels.size(); ++c)
      if (train.class_labels[c] == name) {
        loss.class_weights[c] = w;
        found = true;
      }
    if (!found)
      throw std::invalid_argument("--loss-weights names unknown class '" + name + "'");
  }
  return loss;
}

struct SharedFlags {
  std::string train_path;
  std::string test_path;
  std::string response;
  std::string group;
  std::string family = "auto";
  std::string g_grid = "1,2,3,5,10";
  int r_neighbors = ct::kDefaultRNeighbors;
  int lambda_count = 100;
  double lambda_min_ratio = 0.0;
  int folds = ct::kDefaultFolds;
  std::string loss_weights;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out_dir = ".";
  bool standardize_distances = false;
  bool stratify_folds = false;
};

void add_data_flags(CLI::App* cmd, SharedFlags& flags, bool need_test) {
  cmd->add_option("--train", flags.train_path, "training CSV")->required();
  auto* test = cmd->add_option("--test", flags.test_path, "test CSV (features)");
  if (need_test) test->required();
  cmd->add_option("--response", flags.response, "response column name")->required();
  cmd->add_option("--group", flags.group, "group column name (grouped mode)");
  cmd->add_option("--family", flags.family,
                  "gaussian|binomial|multinomial (default: inferred)");
  cmd->add_option("--loss-weights", flags.loss_weights,
                  "per-class misclassification weights, e.g. cancer=2,normal=1");
}

void add_tuning_flags(CLI::App* cmd, SharedFlags& flags) {
  cmd->add_option("--g-grid", flags.g_grid, "candidate cluster counts");
  cmd->add_option("--r-neighbors", flags.r_neighbors, "neighbors per test point (grouped)");
  cmd->add_option("--lambda-count", flags.lambda_count, "path length per fit");
  cmd->add_option("--lambda-min-ratio", flags.lambda_min_ratio,
                  "path depth (0 = automatic)");
  cmd->add_option("--folds", flags.folds, "cross-validation folds");
  cmd->add_flag("--standardize-distances", flags.standardize_distances,
                "standardize features before distances");
  cmd->add_flag("--stratify-folds", flags.stratify_folds,
                "stratify folds by class");
}

void add_run_flags(CLI::App* cmd, SharedFlags& flags) {
  cmd->add_option("--seed", flags.seed, "seed for all stochastic components");
  cmd->add_option("--threads", flags.threads, "worker threads");
  cmd->add_option("--out-dir", flags.out_dir, "output directory");
}

ct::GlmFamily resolve_family(const std::string& family, const ct::Dataset& train) {
  if (family == "gaussian") {
    if (train.classification)
      throw std::invalid_argument("--family gaussian needs a numeric response");
    return ct::GlmFamily::gaussian();
  }
  if (family == "binomial") {
    if (train.n_classes() != 2)
      throw std::invalid_argument("--family binomial needs exactly 2 classes, found " +
                                  std::to_string(train.n_classes()));
    return ct::GlmFamily::binomial();
  }
  if (family == "multinomial") return ct::GlmFamily::multinomial(train.n_classes());
  if (family != "auto") throw std::invalid_argument("unknown --family " + family);
  if (!train.classification) return ct::GlmFamily::gaussian();
  return train.n_classes() == 2 ? ct::GlmFamily::binomial()
                                : ct::GlmFamily::multinomial(train.n_classes());
}

ct::Response dataset_response(const ct::Dataset& ds) {
  return ds.classification ? ct::Response::classes(ds.labels)
                           : ct::Response::regression(ds.response);
}

std::string out_path(const SharedFlags& flags, const std::string& name) {
  fs::create_directories(flags.out_dir);
  return (fs::path(flags.out_dir) / name).string();
}

ct::RunManifest start_manifest(const std::string& command, const SharedFlags& flags) {
  ct::RunManifest manifest;
  manifest.command = command;
  manifest.seed = flags.seed;
  if (!flags.train_path.empty()) manifest.inputs["train"] = flags.train_path;
  if (!flags.test_path.empty()) manifest.inputs["test"] = flags.test_path;
  manifest.flags["response"] = flags.response;
  manifest.flags["group"] = flags.group;
  manifest.flags["family"] = flags.family;
  manifest.flags["g_grid"] = flags.g_grid;
  manifest.flags["r_neighbors"] = std::to_string(flags.r_neighbors);
  manifest.flags["lambda_count"] = std::to_string(flags.lambda_count);
  manifest.flags["lambda_min_ratio"] = ct::format_double(flags.lambda_min_ratio);
  manifest.flags["folds"] = std::to_string(flags.folds);
  manifest.flags["loss_weights"] = flags.loss_weights;
  manifest.flags["seed"] = std::to_string(flags.seed);
  manifest.flags["threads"] = std::to_string(flags.threads);
  manifest.flags["out_dir"] = flags.out_dir;
  manifest.flags["standardize_distances"] = flags.standardize_distances ? "true" : "false";
  manifest.flags["stratify_folds"] = flags.stratify_folds ? "true" : "false";
  return manifest;
}

void finish_manifest(ct::RunManifest manifest, const SharedFlags& flags,
                     Clock::time_point started) {
  manifest.duration_seconds =
      std::chrono::duration<double>(Clock::now() - started).count();
  const std::string path = out_path(flags, "manifest.json");
  ct::save_manifest(path, manifest);
  std::cout << "wrote " << path << "\n";
}

int run_cv_fit(const SharedFlags& flags) {
  const auto started = Clock::now();
  ct::RunManifest manifest = start_manifest("cv-fit", flags);

  ct::LoadOptions load;
  load.response_column = flags.response;
  if (!flags.group.empty()) load.group_column = flags.group;
  load.force_classification =
      flags.family == "binomial" || flags.family == "multinomial";
  const ct::Dataset train = ct::load_dataset(flags.train_path, load);
  const ct::GlmFamily family = resolve_family(flags.family, train);
  const ct::Response y = dataset_response(train);
  const ct::LossSpec loss = parse_loss(flags.loss_weights, train);

  const std::optional<std::string> group_col =
      flags.group.empty() ? std::nullopt : std::make_optional(flags.group);
  const ct::FeatureTable test =
      ct::load_feature_table(flags.test_path, train.feature_names, group_col);

  ct::CvOptions cv_options;
  cv_options.fit.n_lambda = flags.lambda_count;
  cv_options.fit.lambda_min_ratio = flags.lambda_min_ratio;
  cv_options.partition.standardize_distances = flags.standardize_distances;
  cv_options.stratify_folds = flags.stratify_folds;
  cv_options.threads = flags.threads;
  const auto fractions = ct::default_lambda_fractions(flags.lambda_count);

  ct::CvReport report;
  ct::CustomizedPartition partition;
  if (!flags.group.empty()) {
    if (!train.has_groups())
      throw std::invalid_argument("group column missing from training data");
    report = ct::cv_select_grouped(train.features, y, train.group_ids, family,
                                   flags.r_neighbors, fractions, loss, cv_options);
    partition = ct::build_grouped_partition(train.features, test.features, test.group_ids,
                                            flags.r_neighbors, cv_options.partition);
  } else {
    const auto g_grid = parse_int_list(flags.g_grid, "--g-grid");
    report = ct::cv_select(train.features, y, family, g_grid, fractions, flags.folds,
                           flags.seed, loss, cv_options);
    partition = ct::build_joint_partition(train.features, test.features,
                                          report.selected_g, cv_options.partition);
  }

  const ct::CtModel model = ct::fit_ct(train.features, y, partition, family,
                                       report.selected_fraction, cv_options.fit,
                                       flags.threads);

  ct::CtModelFile file;
  file.model = model;
  file.train_features = train.features;
  file.train_response = y;
  file.feature_names = train.feature_names;
  file.response_name = train.response_name;
  file.class_labels = train.class_labels;
  file.loss = loss;

  const std::string model_path = out_path(flags, "model.json");
  const std::string report_path = out_path(flags, "cv_report.json");
  const std::string report_csv_path = out_path(flags, "cv_report.csv");
  ct::save_ct_model(model_path, file);
  ct::save_cv_report(report_path, report);
  ct::write_cv_report_csv(report_csv_path, report);
  manifest.outputs = {model_path, report_path, report_csv_path};
  std::cout << "selected g=" << (flags.group.empty() ? report.selected_g : partition.g)
            << " lambda_fraction=" << ct::format_double(report.selected_fraction)
            << " cv_loss=" << ct::format_double(report.selected_loss) << "\n";
  if (!model.partition.rejected_clusters.empty())
    std::cout << model.partition.rejected_clusters.size()
              << " cluster(s) rejected; re-run predict with --resolve-rejections\n";
  finish_manifest(std::move(manifest), flags, started);
  return 0;
}

int run_predict(const SharedFlags& flags, const std::string& model_path,
                bool resolve_rejections_flag, int min_train) {
  const auto started = Clock::now();
  ct::RunManifest manifest = start_manifest("predict", flags);
  manifest.inputs["model"] = model_path;
  manifest.flags["resolve_rejections"] = resolve_rejections_flag ? "true" : "false";
  manifest.flags["min_train"] = std::to_string(min_train);

  ct::CtModelFile file = ct::load_ct_model(model_path);
  const ct::FeatureTable test =
      ct::load_feature_table(flags.test_path, file.feature_names, std::nullopt);
  if (test.features.rows() != file.model.partition.n_test)
    throw std::invalid_argument(
        "test CSV has " + std::to_string(test.features.rows()) + " rows but the model was fit against " +
        std::to_string(file.model.partition.n_test));

  const std::vector<int> unresolved = file.model.partition.rejected_clusters;
  if (resolve_rejections_flag && !unresolved.empty())
    file.model = ct::resolve_rejections(file.model, file.train_features,
                                        file.train_response, min_train);

  const ct::CtPredictions predictions =
      ct::predict_ct(file.model, test.features, file.loss);

  const std::string pred_path = out_path(flags, "predictions.csv");
  const std::string rejection_path = out_path(flags, "rejections.json");
  ct::write_predictions_csv(pred_path, predictions, file.class_labels);
  ct::write_rejection_report(rejection_path, file.model.rejections,
                             file.model.partition.rejected_clusters,
                             file.model.partition);
  manifest.outputs = {pred_path, rejection_path};
  std::size_t n_rejected = 0;
  for (auto r : predictions.rejected) n_rejected += r;
  std::cout << "predicted " << predictions.size() - n_rejected << "/" << predictions.size()
            << " rows";
  if (n_rejected > 0) std::cout << " (" << n_rejected << " rejected)";
  std::cout << "\n";
  finish_manifest(std::move(manifest), flags, started);
  return 0;
}

int run_simulate(const SharedFlags& flags, const std::string& setting_name,
                 const std::string& sigma_text, int n_seeds,
                 const std::string& methods_text) {
  const auto started = Clock::now();
  ct::RunManifest manifest = start_manifest("simulate", flags);
  manifest.flags["setting"] = setting_name;
  manifest.flags["sigma_c"] = sigma_text;
  manifest.flags["seeds"] = std::to_string(n_seeds);
  manifest.flags["methods"] = methods_text;

  ct::StudySetting setting;
  if (setting_name == "low-dim")
    setting = ct::StudySetting::low_dim;
  else if (setting_name == "high-dim")
    setting = ct::StudySetting::high_dim;
  else
    throw std::invalid_argument("unknown --setting " + setting_name +
                                " (expected low-dim or high-dim)");
  if (n_seeds < 1) throw std::invalid_argument("--seeds must be >= 1");

  const auto sigma_values = parse_double_list(sigma_text, "--sigma-c");
  ct::StudyOptions options;
  options.threads = flags.threads;
  options.folds = flags.folds;
  options.n_lambda = flags.lambda_count;
  options.g_grid = parse_int_list(flags.g_grid, "--g-grid");
  options.methods.clear();
  {
    std::stringstream ss(methods_text);
    std::string item;
    while (std::getline(ss, item, ',')) options.methods.push_back(item);
  }

  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(n_seeds));
  for (int r = 0; r < n_seeds; ++r)
    seeds[static_cast<std::size_t>(r)] = flags.seed + static_cast<std::uint64_t>(r);

  const ct::StudyResults results = ct::run_study(setting, sigma_values, seeds, options);
  const auto summary = ct::summarize_study(results);

  const std::string cells_path = out_path(flags, "cells.csv");
  const std::string summary_path = out_path(flags, "summary.csv");
  ct::write_study_cells_csv(cells_path, results);
  ct::write_study_summary_csv(summary_path, summary);
  manifest.outputs = {cells_path, summary_path};
  for (const auto& row : summary)
    std::cout << row.setting << " sigma_c=" << ct::format_double(row.sigma_c) << " "
              << row.method << ": mean mse " << ct::format_double(row.mean_mse) << " (se "
              << ct::format_double(row.stderr_mse) << ")\n";
  finish_manifest(std::move(manifest), flags, started);
  return 0;
}

int run_baseline_st(const SharedFlags& flags) {
  const auto started = Clock::now();
  ct::RunManifest manifest = start_manifest("baseline st", flags);

  ct::LoadOptions load;
  load.response_column = flags.response;
  load.force_classification =
      flags.family == "binomial" || flags.family == "multinomial";
  const ct::Dataset train = ct::load_dataset(flags.train_path, load);
  const ct::GlmFamily family = resolve_family(flags.family, train);
  const ct::Response y = dataset_response(train);
  const ct::LossSpec loss = parse_loss(flags.loss_weights, train);
  const ct::FeatureTable test =
      ct::load_feature_table(flags.test_path, train.feature_names, std::nullopt);

  ct::CvOptions cv_options;
  cv_options.fit.n_lambda = flags.lambda_count;
  cv_options.fit.lambda_min_ratio = flags.lambda_min_ratio;
  cv_options.stratify_folds = flags.stratify_folds;
  cv_options.threads = flags.threads;
  const auto fractions = ct::default_lambda_fractions(flags.lambda_count);
  const ct::CvReport report = ct::st_cv_select(train.features, y, family, fractions,
                                               flags.folds, flags.seed, loss, cv_options);
  const ct::StModel model =
      ct::st_fit(train.features, y, family, report.selected_fraction, cv_options.fit);

  ct::CtPredictions predictions;
  predictions.classification = train.classification;
  predictions.rejected.assign(test.features.rows(), 0);
  predictions.cluster_ids.assign(test.features.rows(), 0);
  if (train.classification) {
    predictions.labels = ct::st_predict_classes(model, test.features, loss);
    predictions.values.assign(test.features.rows(), 0.0);
  } else {
    predictions.values = ct::st_predict_values(model, test.features);
    predictions.labels.assign(test.features.rows(), -1);
  }

  const std::string pred_path = out_path(flags, "predictions.csv");
  const std::string report_path = out_path(flags, "cv_report.json");
  ct::write_predictions_csv(pred_path, predictions, train.class_labels);
  ct::save_cv_report(report_path, report);
  manifest.outputs = {pred_path, report_path};
  std::cout << "st lambda_fraction=" << ct::format_double(report.selected_fraction)
            << "\n";
  finish_manifest(std::move(manifest), flags, started);
  return 0;
}

int run_baseline_knn(const SharedFlags& flags, int k_flag, const std::string& k_grid_text) {
  const auto started = Clock::now();
  ct::RunManifest manifest = start_manifest("baseline knn", flags);
  manifest.flags["k"] = std::to_string(k_flag);
  manifest.flags["k_grid"] = k_grid_text;

  ct::LoadOptions load;
  load.response_column = flags.response;
  load.force_classification =
      flags.family == "binomial" || flags.family == "multinomial";
  const ct::Dataset train = ct::load_dataset(flags.train_path, load);
  const ct::Response y = dataset_response(train);
  const ct::LossSpec loss = parse_loss(flags.loss_weights, train);
  const ct::FeatureTable test =
      ct::load_feature_table(flags.test_path, train.feature_names, std::nullopt);

  int k = k_flag;
  if (k <= 0) {
    const auto grid = k_grid_text.empty() ? ct::default_k_grid(train.n())
                                          : parse_int_list(k_grid_text, "--k-grid");
    const auto cv = ct::knn_cv_select(train.features, y, train.n_classes(), grid,
                                      flags.folds, flags.seed, loss, flags.threads);
    k = cv.k;
    std::cout << "knn cross-validation selected k=" << k << "\n";
  }
  if (k > static_cast<int>(train.n())) {
    std::cerr << "warning: k=" << k << " exceeds training size; clamping to " << train.n()
              << "\n";
    k = static_cast<int>(train.n());
  }
  manifest.flags["k_selected"] = std::to_string(k);

  ct::CtPredictions predictions;
  predictions.classification = train.classification;
  predictions.rejected.assign(test.features.rows(), 0);
  predictions.cluster_ids.assign(test.features.rows(), 0);
  if (train.classification) {
    predictions.labels = ct::knn_predict_classes(train.features, train.labels,
                                                 train.n_classes(), test.features, k);
    predictions.values.assign(test.features.rows(), 0.0);
  } else {
    predictions.values =
        ct::knn_predict_values(train.features, train.response, test.features, k);
    predictions.labels.assign(test.features.rows(), -1);
  }

  const std::string pred_path = out_path(flags, "predictions.csv");
  ct::write_predictions_csv(pred_path, predictions, train.class_labels);
  manifest.outputs = {pred_path};
  finish_manifest(std::move(manifest), flags, started);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"customized training: per-cluster sparse linear models for test data "
               "available at fit time"};
  app.set_version_flag("--version", std::string("ct ") + ct::kVersion);
  app.require_subcommand(1);

  SharedFlags flags;

  auto* cv_fit = app.add_subcommand("cv-fit", "cross-validate and fit the final model");
  add_data_flags(cv_fit, flags, /*need_test=*/true);
  add_tuning_flags(cv_fit, flags);
  add_run_flags(cv_fit, flags);

  auto* predict = app.add_subcommand("predict", "predict from a saved model");
  std::string model_path;
  bool resolve_flag = false;
  int min_train = 1;
  predict->add_option("--model", model_path, "model.json from cv-fit")->required();
  predict->add_option("--test", flags.test_path, "test CSV (features)")->required();
  predict->add_flag("--resolve-rejections", resolve_flag,
                    "re-cut the dendrogram to predict rejected rows");
  predict->add_option("--min-train", min_train,
                      "training rows required when resolving rejections");
  add_run_flags(predict, flags);

  auto* simulate = app.add_subcommand("simulate", "synthetic three-regime study");
  std::string setting = "low-dim";
  std::string sigma_text = "0,5,10";
  int n_seeds = 10;
  std::string methods_text = "ct,st,knn";
  simulate->add_option("--setting", setting, "low-dim (n=m=300, p=100) or high-dim (n=m=200, p=300)");
  simulate->add_option("--sigma-c", sigma_text, "center spreads to sweep");
  simulate->add_option("--seeds", n_seeds, "replicates per spread");
  simulate->add_option("--methods", methods_text, "subset of ct,st,knn");
  simulate->add_option("--g-grid", flags.g_grid, "candidate cluster counts");
  simulate->add_option("--lambda-count", flags.lambda_count, "path length per fit");
  simulate->add_option("--folds", flags.folds, "cross-validation folds");
  add_run_flags(simulate, flags);

  auto* baseline = app.add_subcommand("baseline", "reference methods");
  baseline->require_subcommand(1);
  auto* baseline_st = baseline->add_subcommand("st", "one cross-validated lasso fit");
  add_data_flags(baseline_st, flags, /*need_test=*/true);
  baseline_st->add_option("--lambda-count", flags.lambda_count, "path length");
  baseline_st->add_option("--lambda-min-ratio", flags.lambda_min_ratio, "path depth");
  baseline_st->add_option("--folds", flags.folds, "cross-validation folds");
  baseline_st->add_flag("--stratify-folds", flags.stratify_folds, "stratify folds");
  add_run_flags(baseline_st, flags);

  auto* baseline_knn = baseline->add_subcommand("knn", "k-nearest-neighbor predictions");
  int k_flag = 0;
  std::string k_grid_text;
  add_data_flags(baseline_knn, flags, /*need_test=*/true);
  baseline_knn->add_option("--k", k_flag, "neighbor count (0 = choose by CV)");
  baseline_knn->add_option("--k-grid", k_grid_text, "candidate k values for CV");
  baseline_knn->add_option("--folds", flags.folds, "cross-validation folds");
  add_run_flags(baseline_knn, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cv_fit->parsed()) return run_cv_fit(flags);
    if (predict->parsed()) return run_predict(flags, model_path, resolve_flag, min_train);
    if (simulate->parsed())
      return run_simulate(flags, setting, sigma_text, n_seeds, methods_text);
    if (baseline_st->parsed()) return run_baseline_st(flags);
    if (baseline_knn->parsed()) return run_baseline_knn(flags, k_flag, k_grid_text);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
