#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ct/cluster.hpp"
#include "ct/customize.hpp"
#include "ct/glm.hpp"
#include "ct/model_selection.hpp"
#include "ct/simulation.hpp"

namespace ct {

// Shortest round-trip decimal representation; used for every number the tool
// writes so identical runs produce identical bytes.
std::string format_double(double value);

std::string serialize_glm_fit(const GlmFit& fit,
                              const std::vector<std::string>& feature_names);
GlmFit deserialize_glm_fit(const std::string& text);

std::string serialize_dendrogram(const Dendrogram& d);
Dendrogram deserialize_dendrogram(const std::string& text);

// Self-contained model document: the fitted per-cluster models plus the
// training data and dendrogram, so prediction and rejection resolution need
// only this file and a test CSV.
struct CtModelFile {
  CtModel model;
  Matrix train_features;
  Response train_response;
  std::vector<std::string> feature_names;
  std::string response_name;
  std::vector<std::string> class_labels;  // classification only
  LossSpec loss;
};

void save_ct_model(const std::string& path, const CtModelFile& file);
CtModelFile load_ct_model(const std::string& path);

void save_cv_report(const std::string& path, const CvReport& report);
CvReport load_cv_report(const std::string& path);
// Plot-ready long form: one (g, lambda_fraction, loss) row per grid cell.
void write_cv_report_csv(const std::string& path, const CvReport& report);

void write_predictions_csv(const std::string& path, const CtPredictions& predictions,
                           const std::vector<std::string>& class_labels);
void write_rejection_report(const std::string& path,
                            const std::vector<RejectionRecord>& resolved,
                            const std::vector<int>& unresolved_clusters,
                            const CustomizedPartition& partition);

struct RunManifest {
  std::string command;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> flags;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  double duration_seconds = 0.0;
};

void save_manifest(const std::string& path, const RunManifest& manifest);

void write_study_cells_csv(const std::string& path, const StudyResults& results);
void write_study_summary_csv(const std::string& path,
                             const std::vector<StudySummaryRow>& rows);

}  // namespace ct
