#include "ct/serialize.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ct/version.hpp"

namespace ct {

using nlohmann::json;

namespace {

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json family_to_json(const GlmFamily& family) {
  return json{{"name", family.name()}, {"classes", family.n_classes}};
}

GlmFamily family_from_json(const json& j) {
  const std::string name = j.at("name").get<std::string>();
  if (name == "gaussian") return GlmFamily::gaussian();
  if (name == "binomial") return GlmFamily::binomial();
  if (name == "multinomial") return GlmFamily::multinomial(j.at("classes").get<int>());
  throw std::invalid_argument("unknown family: " + name);
}

json glm_fit_to_json(const GlmFit& fit, const std::vector<std::string>& feature_names) {
  json solutions = json::array();
  for (std::size_t l = 0; l < fit.n_lambdas(); ++l) {
    json groups = json::array();
    const int n_groups = fit.family.n_groups();
    for (int g = 0; g < n_groups; ++g) {
      json nonzero = json::array();
      const std::size_t base = static_cast<std::size_t>(g) * fit.n_features;
      for (std::size_t j = 0; j < fit.n_features; ++j) {
        const double v = fit.coefficients[l][base + j];
        if (v != 0.0) nonzero.push_back(json::array({j, v}));
      }
      groups.push_back(nonzero);
    }
    solutions.push_back(json{{"intercepts", fit.intercepts[l]}, {"coefficients", groups}});
  }
  return json{{"family", family_to_json(fit.family)},
              {"n_train", fit.n_train},
              {"n_features", fit.n_features},
              {"feature_names", feature_names},
              {"standardizer",
               json{{"means", fit.standardizer.means}, {"scales", fit.standardizer.scales}}},
              {"lambdas", fit.lambdas},
              {"solutions", solutions},
              {"converged", fit.converged},
              {"clipped", fit.clipped}};
}

GlmFit glm_fit_from_json(const json& j) {
  GlmFit fit;
  fit.family = family_from_json(j.at("family"));
  fit.n_train = j.at("n_train").get<std::size_t>();
  fit.n_features = j.at("n_features").get<std::size_t>();
  fit.standardizer.means = j.at("standardizer").at("means").get<std::vector<double>>();
  fit.standardizer.scales = j.at("standardizer").at("scales").get<std::vector<double>>();
  fit.lambdas = j.at("lambdas").get<std::vector<double>>();
  fit.converged = j.at("converged").get<std::vector<std::uint8_t>>();
  fit.clipped = j.at("clipped").get<std::vector<std::uint8_t>>();
  const auto& solutions = j.at("solutions");
  if (solutions.size() != fit.lambdas.size())
    throw std::invalid_argument("glm fit: solution count mismatch");
  const int n_groups = fit.family.n_groups();
  for (const auto& sol : solutions) {
    fit.intercepts.push_back(sol.at("intercepts").get<std::vector<double>>());
    std::vector<double> coefs(static_cast<std::size_t>(n_groups) * fit.n_features, 0.0);
    const auto& groups = sol.at("coefficients");
    if (static_cast<int>(groups.size()) != n_groups)
      throw std::invalid_argument("glm fit: group count mismatch");
    for (int g = 0; g < n_groups; ++g) {
      for (const auto& pair : groups[static_cast<std::size_t>(g)]) {
        const auto idx = pair.at(0).get<std::size_t>();
        if (idx >= fit.n_features) throw std::invalid_argument("glm fit: index out of range");
        coefs[static_cast<std::size_t>(g) * fit.n_features + idx] = pair.at(1).get<double>();
      }
    }
    fit.coefficients.push_back(std::move(coefs));
  }
  return fit;
}

json dendrogram_to_json(const Dendrogram& d) {
  json merges = json::array();
  for (const auto& m : d.merges)
    merges.push_back(json::array({m.left, m.right, m.height, m.size}));
  return json{{"leaf_count", d.leaf_count}, {"merges", merges}};
}

Dendrogram dendrogram_from_json(const json& j) {
  Dendrogram d;
  d.leaf_count = j.at("leaf_count").get<int>();
  for (const auto& m : j.at("merges")) {
    DendrogramMerge merge;
    merge.left = m.at(0).get<int>();
    merge.right = m.at(1).get<int>();
    merge.height = m.at(2).get<double>();
    merge.size = m.at(3).get<int>();
    d.merges.push_back(merge);
  }
  validate_dendrogram(d);
  return d;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Matrix matrix_from_json(const json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  const auto& data = j.at("data");
  if (data.size() != m.rows()) throw std::invalid_argument("matrix: row count mismatch");
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (data[i].size() != m.cols())
      throw std::invalid_argument("matrix: column count mismatch");
    for (std::size_t jx = 0; jx < m.cols(); ++jx) m(i, jx) = data[i][jx].get<double>();
  }
  return m;
}

json loss_to_json(const LossSpec& loss) {
  return json{{"kind", loss.kind == LossKind::squared_error ? "squared_error"
                                                            : "misclassification"},
              {"class_weights", loss.class_weights}};
}

LossSpec loss_from_json(const json& j) {
  LossSpec loss;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "squared_error")
    loss.kind = LossKind::squared_error;
  else if (kind == "misclassification")
    loss.kind = LossKind::misclassification;
  else
    throw std::invalid_argument("unknown loss kind: " + kind);
  loss.class_weights = j.at("class_weights").get<std::vector<double>>();
  return loss;
}

json fit_options_to_json(const FitOptions& opts) {
  return json{{"n_lambda", opts.n_lambda},
              {"lambda_min_ratio", opts.lambda_min_ratio},
              {"tol", opts.tol},
              {"max_sweeps", opts.max_sweeps},
              {"prob_clip", opts.prob_clip},
              {"intercept_clip", opts.intercept_clip},
              {"observation_weights", opts.observation_weights}};
}

FitOptions fit_options_from_json(const json& j) {
  FitOptions opts;
  opts.n_lambda = j.at("n_lambda").get<int>();
  opts.lambda_min_ratio = j.at("lambda_min_ratio").get<double>();
  opts.tol = j.at("tol").get<double>();
  opts.max_sweeps = j.at("max_sweeps").get<long>();
  opts.prob_clip = j.at("prob_clip").get<double>();
  opts.intercept_clip = j.at("intercept_clip").get<double>();
  opts.observation_weights = j.at("observation_weights").get<std::vector<double>>();
  return opts;
}

json response_to_json(const Response& y) {
  if (y.classification) return json{{"labels", y.labels}};
  return json{{"values", y.values}};
}

Response response_from_json(const json& j) {
  Response y;
  if (j.contains("labels")) {
    y.classification = true;
    y.labels = j.at("labels").get<std::vector<int>>();
  } else {
    y.values = j.at("values").get<std::vector<double>>();
  }
  return y;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

std::string serialize_glm_fit(const GlmFit& fit,
                              const std::vector<std::string>& feature_names) {
  return glm_fit_to_json(fit, feature_names).dump(2) + "\n";
}

GlmFit deserialize_glm_fit(const std::string& text) {
  return glm_fit_from_json(json::parse(text));
}

std::string serialize_dendrogram(const Dendrogram& d) {
  return dendrogram_to_json(d).dump(2) + "\n";
}

Dendrogram deserialize_dendrogram(const std::string& text) {
  return dendrogram_from_json(json::parse(text));
}

void save_ct_model(const std::string& path, const CtModelFile& file) {
  const CtModel& model = file.model;
  json clusters = json::array();
  for (const auto& cluster : model.partition.clusters)
    clusters.push_back(json{{"train_indices", cluster.train_indices},
                            {"test_indices", cluster.test_indices},
                            {"node", cluster.node}});

  json cluster_models = json::array();
  for (const auto& cm : model.cluster_models) {
    if (cm.constant_class) {
      cluster_models.push_back(json{{"constant_class", cm.constant_label}});
    } else if (cm.fitted) {
      cluster_models.push_back(json{{"selected_lambda", cm.selected_lambda},
                                    {"fit", glm_fit_to_json(cm.fit, file.feature_names)}});
    } else {
      cluster_models.push_back(nullptr);
    }
  }

  json rejections = json::array();
  for (const auto& r : model.rejections)
    rejections.push_back(json{{"cluster", r.cluster},
                              {"d_g", r.d_g},
                              {"d_prime", r.d_prime},
                              {"train_indices", r.train_indices},
                              {"resolved", r.resolved}});

  json partition{{"mode", model.partition.joint() ? "joint" : "grouped"},
                 {"g", model.partition.g},
                 {"r_neighbors", model.partition.r_neighbors},
                 {"cut_height", model.partition.cut_height},
                 {"n_train", model.partition.n_train},
                 {"n_test", model.partition.n_test},
                 {"clusters", clusters},
                 {"rejected_clusters", model.partition.rejected_clusters}};
  if (model.partition.joint())
    partition["dendrogram"] = dendrogram_to_json(model.partition.dendrogram);

  const json doc{{"format", "ct-model-v1"},
                 {"tool_version", kVersion},
                 {"family", family_to_json(model.family)},
                 {"lambda_fraction", model.lambda_fraction},
                 {"fit_options", fit_options_to_json(model.fit_options)},
                 {"loss", loss_to_json(file.loss)},
                 {"feature_names", file.feature_names},
                 {"response_name", file.response_name},
                 {"class_labels", file.class_labels},
                 {"train_features", matrix_to_json(file.train_features)},
                 {"train_response", response_to_json(file.train_response)},
                 {"partition", partition},
                 {"cluster_models", cluster_models},
                 {"rejections", rejections}};
  write_text_file(path, doc.dump(2) + "\n");
}

CtModelFile load_ct_model(const std::string& path) {
  const json doc = json::parse(read_text_file(path));
  if (doc.at("format").get<std::string>() != "ct-model-v1")
    throw std::invalid_argument("unsupported model format in " + path);

  CtModelFile file;
  CtModel& model = file.model;
  model.family = family_from_json(doc.at("family"));
  model.lambda_fraction = doc.at("lambda_fraction").get<double>();
  model.fit_options = fit_options_from_json(doc.at("fit_options"));
  file.loss = loss_from_json(doc.at("loss"));
  file.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
  file.response_name = doc.at("response_name").get<std::string>();
  file.class_labels = doc.at("class_labels").get<std::vector<std::string>>();
  file.train_features = matrix_from_json(doc.at("train_features"));
  file.train_response = response_from_json(doc.at("train_response"));

  const json& partition = doc.at("partition");
  model.partition.mode = partition.at("mode").get<std::string>() == "joint"
                             ? PartitionMode::joint
                             : PartitionMode::grouped;
  model.partition.g = partition.at("g").get<int>();
  model.partition.r_neighbors = partition.at("r_neighbors").get<int>();
  model.partition.cut_height = partition.at("cut_height").get<double>();
  model.partition.n_train = partition.at("n_train").get<std::size_t>();
  model.partition.n_test = partition.at("n_test").get<std::size_t>();
  for (const auto& c : partition.at("clusters")) {
    ClusterIndices cluster;
    cluster.train_indices = c.at("train_indices").get<std::vector<int>>();
    cluster.test_indices = c.at("test_indices").get<std::vector<int>>();
    cluster.node = c.at("node").get<int>();
    model.partition.clusters.push_back(std::move(cluster));
  }
  model.partition.rejected_clusters =
      partition.at("rejected_clusters").get<std::vector<int>>();
  if (model.partition.joint())
    model.partition.dendrogram = dendrogram_from_json(partition.at("dendrogram"));

  for (const auto& cm_json : doc.at("cluster_models")) {
    ClusterModel cm;
    if (!cm_json.is_null()) {
      if (cm_json.contains("constant_class")) {
        cm.constant_class = true;
        cm.constant_label = cm_json.at("constant_class").get<int>();
      } else {
        cm.fitted = true;
        cm.selected_lambda = cm_json.at("selected_lambda").get<std::size_t>();
        cm.fit = glm_fit_from_json(cm_json.at("fit"));
      }
    }
    model.cluster_models.push_back(std::move(cm));
  }
  for (const auto& r : doc.at("rejections")) {
    RejectionRecord record;
    record.cluster = r.at("cluster").get<int>();
    record.d_g = r.at("d_g").get<double>();
    record.d_prime = r.at("d_prime").get<double>();
    record.train_indices = r.at("train_indices").get<std::vector<int>>();
    record.resolved = r.at("resolved").get<bool>();
    model.rejections.push_back(std::move(record));
  }
  return file;
}

void save_cv_report(const std::string& path, const CvReport& report) {
  json losses = json::array();
  for (std::size_t gi = 0; gi < report.losses.rows(); ++gi) {
    json row = json::array();
    for (std::size_t fi = 0; fi < report.losses.cols(); ++fi)
      row.push_back(report.losses(gi, fi));
    losses.push_back(std::move(row));
  }
  const json doc{{"format", "ct-cv-report-v1"},
                 {"grouped", report.grouped},
                 {"g_values", report.g_values},
                 {"lambda_fractions", report.lambda_fractions},
                 {"losses", losses},
                 {"g_valid", report.g_valid},
                 {"selected",
                  json{{"g", report.selected_g},
                       {"lambda_fraction", report.selected_fraction},
                       {"loss", report.selected_loss}}},
                 {"folds", report.folds},
                 {"fold_assignment", report.fold_assignment},
                 {"seed", report.seed}};
  write_text_file(path, doc.dump(2) + "\n");
}

CvReport load_cv_report(const std::string& path) {
  const json doc = json::parse(read_text_file(path));
  CvReport report;
  report.grouped = doc.at("grouped").get<bool>();
  report.g_values = doc.at("g_values").get<std::vector<int>>();
  report.lambda_fractions = doc.at("lambda_fractions").get<std::vector<double>>();
  const auto& losses = doc.at("losses");
  const std::size_t rows = losses.size();
  const std::size_t cols = rows > 0 ? losses[0].size() : 0;
  report.losses = Matrix(rows, cols);
  for (std::size_t gi = 0; gi < rows; ++gi)
    for (std::size_t fi = 0; fi < cols; ++fi)
      report.losses(gi, fi) = losses[gi][fi].get<double>();
  report.g_valid = doc.at("g_valid").get<std::vector<std::uint8_t>>();
  report.selected_g = doc.at("selected").at("g").get<int>();
  report.selected_fraction = doc.at("selected").at("lambda_fraction").get<double>();
  report.selected_loss = doc.at("selected").at("loss").get<double>();
  report.folds = doc.at("folds").get<int>();
  report.fold_assignment = doc.at("fold_assignment").get<std::vector<int>>();
  report.seed = doc.at("seed").get<std::uint64_t>();
  return report;
}

void write_cv_report_csv(const std::string& path, const CvReport& report) {
  std::ostringstream out;
  out << "g,lambda_fraction,loss\n";
  for (std::size_t gi = 0; gi < report.losses.rows(); ++gi) {
    const int g = report.grouped ? 0 : report.g_values[gi];
    for (std::size_t fi = 0; fi < report.losses.cols(); ++fi)
      out << g << ',' << format_double(report.lambda_fractions[fi]) << ','
          << format_double(report.losses(gi, fi)) << '\n';
  }
  write_text_file(path, out.str());
}

void write_predictions_csv(const std::string& path, const CtPredictions& predictions,
                           const std::vector<std::string>& class_labels) {
  std::ostringstream out;
  out << "row_index,prediction,cluster_id,rejected\n";
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    out << i << ',';
    if (!predictions.rejected[i]) {
      if (predictions.classification)
        out << class_labels[static_cast<std::size_t>(predictions.labels[i])];
      else
        out << format_double(predictions.values[i]);
    }
    out << ',' << predictions.cluster_ids[i] << ','
        << (predictions.rejected[i] ? "true" : "false") << '\n';
  }
  write_text_file(path, out.str());
}

void write_rejection_report(const std::string& path,
                            const std::vector<RejectionRecord>& resolved,
                            const std::vector<int>& unresolved_clusters,
                            const CustomizedPartition& partition) {
  json resolved_json = json::array();
  for (const auto& r : resolved)
    resolved_json.push_back(json{
        {"cluster", r.cluster},
        {"d_g", r.d_g},
        {"d_prime", r.d_prime},
        {"resolved_train_indices", r.train_indices},
        {"test_indices",
         partition.clusters[static_cast<std::size_t>(r.cluster)].test_indices}});
  json unresolved_json = json::array();
  for (int k : unresolved_clusters)
    unresolved_json.push_back(json{
        {"cluster", k},
        {"d_g", partition.cut_height},
        {"test_indices", partition.clusters[static_cast<std::size_t>(k)].test_indices}});
  const json doc{{"format", "ct-rejections-v1"},
                 {"resolved", resolved_json},
                 {"unresolved", unresolved_json}};
  write_text_file(path, doc.dump(2) + "\n");
}

void save_manifest(const std::string& path, const RunManifest& manifest) {
  const json doc{{"tool", "ct"},
                 {"version", kVersion},
                 {"command", manifest.command},
                 {"inputs", manifest.inputs},
                 {"flags", manifest.flags},
                 {"seed", manifest.seed},
                 {"outputs", manifest.outputs},
                 {"duration_seconds", manifest.duration_seconds}};
  write_text_file(path, doc.dump(2) + "\n");
}

void write_study_cells_csv(const std::string& path, const StudyResults& results) {
  std::ostringstream out;
  out << "setting,sigma_c,seed,method,mse,G_selected,lambda_fraction_selected\n";
  for (const auto& cell : results.cells) {
    out << cell.setting << ',' << format_double(cell.sigma_c) << ',' << cell.seed << ','
        << cell.method << ',' << format_double(cell.mse) << ',';
    if (cell.g_selected >= 0) out << cell.g_selected;
    out << ',';
    if (cell.lambda_fraction >= 0.0) out << format_double(cell.lambda_fraction);
    out << '\n';
  }
  write_text_file(path, out.str());
}

void write_study_summary_csv(const std::string& path,
                             const std::vector<StudySummaryRow>& rows) {
  std::ostringstream out;
  out << "setting,sigma_c,method,mean_mse,stderr_mse,n_seeds\n";
  for (const auto& row : rows)
    out << row.setting << ',' << format_double(row.sigma_c) << ',' << row.method << ','
        << format_double(row.mean_mse) << ',' << format_double(row.stderr_mse) << ','
        << row.n_seeds << '\n';
  write_text_file(path, out.str());
}

}  // namespace ct
