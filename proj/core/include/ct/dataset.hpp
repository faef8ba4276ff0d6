#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ct/matrix.hpp"

namespace ct {

// Feature matrix plus response, the universal input of this library.
// Classification responses are encoded to 0..C-1 in order of first
// appearance; class_labels maps back to the original strings. group_ids are
// optional and encoded the same way.
struct Dataset {
  Matrix features;
  std::vector<std::string> feature_names;
  std::string response_name;

  bool classification = false;
  std::vector<double> response;           // regression mode
  std::vector<int> labels;                // classification mode, 0..C-1
  std::vector<std::string> class_labels;  // size C in classification mode

  std::vector<int> group_ids;             // empty when no group column
  std::vector<std::string> group_labels;

  std::size_t n() const { return features.rows(); }
  std::size_t p() const { return features.cols(); }
  int n_classes() const { return static_cast<int>(class_labels.size()); }
  bool has_groups() const { return !group_ids.empty(); }
};

// Per-column centering and scaling statistics. Scales are population
// (divide-by-n) standard deviations; constant columns record scale 0 and are
// centered but not scaled.
struct Standardizer {
  std::vector<double> means;
  std::vector<double> scales;

  std::size_t p() const { return means.size(); }
};

Standardizer fit_standardizer(const Matrix& features);
Matrix apply_standardizer(const Standardizer& s, const Matrix& features);
Matrix invert_standardizer(const Standardizer& s, const Matrix& standardized);

struct LoadOptions {
  std::string response_column;
  std::optional<std::string> group_column;
  bool force_classification = false;
};

// Reads a comma-separated file with one header row. Feature cells must parse
// as finite numbers; the response is classification when any cell is
// non-numeric (or when forced). Throws std::invalid_argument with the
// offending column/row on malformed input.
Dataset load_dataset(const std::string& path, const LoadOptions& options);

// Encodes a vector of strings to 0..C-1 in first-appearance order.
std::vector<int> encode_labels(const std::vector<std::string>& values,
                               std::vector<std::string>& labels_out);

// Feature rows read against a known schema: every named column must exist,
// and values are gathered in the given order. Extra columns (for example a
// response) are ignored.
struct FeatureTable {
  Matrix features;
  std::vector<int> group_ids;
  std::vector<std::string> group_labels;
};

FeatureTable load_feature_table(const std::string& path,
                                const std::vector<std::string>& feature_names,
                                const std::optional<std::string>& group_column);

}  // namespace ct
