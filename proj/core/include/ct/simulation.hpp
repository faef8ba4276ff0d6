#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ct/dataset.hpp"
#include "ct/model_selection.hpp"

namespace ct {

// Three-regime synthetic regression: class frequencies from one
// Dirichlet(2,2,2) draw shared by train and test, class centers iid
// N(0, sigma_c^2 I_p), features N(center, I_p), per-class coefficient vectors
// with exactly p/10 entries equal to one (support positions uniform without
// replacement, independent across classes), and unit-variance response noise.
struct SimConfig {
  std::size_t n = 300;  // training rows
  std::size_t m = 300;  // test rows
  std::size_t p = 100;  // feature count, must be divisible by 10
  double sigma_c = 0.0;
  std::uint64_t seed = 0;
};

struct SimInstance {
  Dataset train;
  Dataset test;
  Matrix true_centers;  // 3 x p
  Matrix true_betas;    // 3 x p, entries in {0, 1}
  std::vector<int> train_classes;
  std::vector<int> test_classes;
  std::array<double, 3> class_probs{};
};

// Substream tags of the generator, one per independent component.
namespace sim_streams {
inline constexpr std::uint64_t kClassProbs = 1;
inline constexpr std::uint64_t kCenters = 2;
inline constexpr std::uint64_t kTrainClasses = 3;
inline constexpr std::uint64_t kTestClasses = 4;
inline constexpr std::uint64_t kTrainFeatures = 5;
inline constexpr std::uint64_t kTestFeatures = 6;
inline constexpr std::uint64_t kBetas = 7;
inline constexpr std::uint64_t kTrainNoise = 8;
inline constexpr std::uint64_t kTestNoise = 9;
}  // namespace sim_streams

SimInstance generate_instance(const SimConfig& config);

enum class StudySetting { low_dim, high_dim };

// low_dim: n = m = 300, p = 100; high_dim: n = m = 200, p = 300.
SimConfig setting_config(StudySetting setting, double sigma_c, std::uint64_t seed);

struct StudyOptions {
  std::vector<std::string> methods{"ct", "st", "knn"};
  std::vector<int> g_grid = kDefaultGGrid;
  int folds = kDefaultFolds;
  int n_lambda = 100;
  int threads = 1;  // cells run in parallel; each cell is single-threaded
};

struct StudyCell {
  std::string setting;
  double sigma_c = 0.0;
  std::uint64_t seed = 0;
  std::string method;
  double mse = 0.0;
  int g_selected = -1;              // < 0 when not applicable
  double lambda_fraction = -1.0;    // < 0 when not applicable
  int k_selected = -1;
};

struct StudySummaryRow {
  std::string setting;
  double sigma_c = 0.0;
  std::string method;
  double mean_mse = 0.0;
  double stderr_mse = 0.0;
  int n_seeds = 0;
};

struct StudyResults {
  std::vector<StudyCell> cells;
};

std::vector<StudySummaryRow> summarize_study(const StudyResults& results);

// One row per (sigma, seed, method); the per-cell generator/CV seeds are a
// pure function of the cell, so results do not depend on thread count.
StudyResults run_study(StudySetting setting, const std::vector<double>& sigma_values,
                       const std::vector<std::uint64_t>& seeds,
                       const StudyOptions& options = {});

// Same harness over explicit configs (used with small desk-test instances).
StudyResults run_cells(const std::vector<SimConfig>& configs, const std::string& setting_name,
                       const StudyOptions& options = {});

}  // namespace ct
