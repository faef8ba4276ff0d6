#include "ct/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace ct {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t')) --b;
  return s.substr(a, b - a);
}

bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

}  // namespace

Standardizer fit_standardizer(const Matrix& features) {
  if (features.rows() == 0) throw std::invalid_argument("fit_standardizer: empty matrix");
  const std::size_t n = features.rows();
  const std::size_t p = features.cols();
  Standardizer s;
  s.means.assign(p, 0.0);
  s.scales.assign(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = features.row(i);
    for (std::size_t j = 0; j < p; ++j) s.means[j] += row[j];
  }
  for (std::size_t j = 0; j < p; ++j) s.means[j] /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = features.row(i);
    for (std::size_t j = 0; j < p; ++j) {
      const double d = row[j] - s.means[j];
      s.scales[j] += d * d;
    }
  }
  for (std::size_t j = 0; j < p; ++j)
    s.scales[j] = std::sqrt(s.scales[j] / static_cast<double>(n));
  return s;
}

Matrix apply_standardizer(const Standardizer& s, const Matrix& features) {
  if (features.cols() != s.p())
    throw std::invalid_argument("apply_standardizer: column count mismatch");
  Matrix out(features.rows(), features.cols());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto src = features.row(i);
    auto dst = out.row(i);
    for (std::size_t j = 0; j < features.cols(); ++j) {
      const double centered = src[j] - s.means[j];
      dst[j] = s.scales[j] > 0.0 ? centered / s.scales[j] : centered;
    }
  }
  return out;
}

Matrix invert_standardizer(const Standardizer& s, const Matrix& standardized) {
  if (standardized.cols() != s.p())
    throw std::invalid_argument("invert_standardizer: column count mismatch");
  Matrix out(standardized.rows(), standardized.cols());
  for (std::size_t i = 0; i < standardized.rows(); ++i) {
    const auto src = standardized.row(i);
    auto dst = out.row(i);
    for (std::size_t j = 0; j < standardized.cols(); ++j) {
      const double unscaled = s.scales[j] > 0.0 ? src[j] * s.scales[j] : src[j];
      dst[j] = unscaled + s.means[j];
    }
  }
  return out;
}

std::vector<int> encode_labels(const std::vector<std::string>& values,
                               std::vector<std::string>& labels_out) {
  labels_out.clear();
  std::unordered_map<std::string, int> index;
  std::vector<int> codes;
  codes.reserve(values.size());
  for (const auto& v : values) {
    auto it = index.find(v);
    if (it == index.end()) {
      it = index.emplace(v, static_cast<int>(labels_out.size())).first;
      labels_out.push_back(v);
    }
    codes.push_back(it->second);
  }
  return codes;
}

Dataset load_dataset(const std::string& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty file: " + path);
  const auto header = split_csv_line(line);

  int response_col = -1;
  int group_col = -1;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const std::string name = trim(header[j]);
    if (name == options.response_column) response_col = static_cast<int>(j);
    if (options.group_column && name == *options.group_column)
      group_col = static_cast<int>(j);
  }
  if (response_col < 0)
    throw std::invalid_argument("response column not found: " + options.response_column);
  if (options.group_column && group_col < 0)
    throw std::invalid_argument("group column not found: " + *options.group_column);

  Dataset ds;
  ds.response_name = trim(header[static_cast<std::size_t>(response_col)]);
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (static_cast<int>(j) == response_col || static_cast<int>(j) == group_col) continue;
    ds.feature_names.push_back(trim(header[j]));
  }
  const std::size_t p = ds.feature_names.size();
  if (p == 0) throw std::invalid_argument("no feature columns in " + path);

  std::vector<double> cells;
  std::vector<std::string> response_raw;
  std::vector<std::string> group_raw;
  std::size_t n = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw std::invalid_argument("row " + std::to_string(line_no) + " has " +
                                  std::to_string(fields.size()) + " fields, expected " +
                                  std::to_string(header.size()));
    std::size_t fj = 0;
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (static_cast<int>(j) == response_col) {
        response_raw.push_back(trim(fields[j]));
        continue;
      }
      if (static_cast<int>(j) == group_col) {
        group_raw.push_back(trim(fields[j]));
        continue;
      }
      double v = 0.0;
      if (!parse_double(fields[j], v) || !std::isfinite(v))
        throw std::invalid_argument("non-numeric or non-finite value in column '" +
                                    ds.feature_names[fj] + "' at row " +
                                    std::to_string(line_no));
      cells.push_back(v);
      ++fj;
    }
    ++n;
  }
  if (n < 2) throw std::invalid_argument("need at least 2 data rows, got " + std::to_string(n));

  ds.features = Matrix(n, p);
  ds.features.data() = std::move(cells);

  bool numeric_response = !options.force_classification;
  std::vector<double> numeric(n, 0.0);
  if (numeric_response) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!parse_double(response_raw[i], numeric[i])) {
        numeric_response = false;
        break;
      }
      if (!std::isfinite(numeric[i]))
        throw std::invalid_argument("non-finite response value at data row " +
                                    std::to_string(i + 1));
    }
  }
  if (numeric_response) {
    ds.classification = false;
    ds.response = std::move(numeric);
  } else {
    ds.classification = true;
    ds.labels = encode_labels(response_raw, ds.class_labels);
    if (ds.n_classes() < 2)
      throw std::invalid_argument("classification response has fewer than 2 classes");
  }

  if (group_col >= 0) ds.group_ids = encode_labels(group_raw, ds.group_labels);
  return ds;
}

FeatureTable load_feature_table(const std::string& path,
                                const std::vector<std::string>& feature_names,
                                const std::optional<std::string>& group_column) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty file: " + path);
  const auto header = split_csv_line(line);

  std::vector<int> column_of(feature_names.size(), -1);
  int group_col = -1;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const std::string name = trim(header[j]);
    for (std::size_t f = 0; f < feature_names.size(); ++f)
      if (name == feature_names[f]) column_of[f] = static_cast<int>(j);
    if (group_column && name == *group_column) group_col = static_cast<int>(j);
  }
  for (std::size_t f = 0; f < feature_names.size(); ++f)
    if (column_of[f] < 0)
      throw std::invalid_argument("feature column not found: " + feature_names[f]);
  if (group_column && group_col < 0)
    throw std::invalid_argument("group column not found: " + *group_column);

  std::vector<double> cells;
  std::vector<std::string> group_raw;
  std::size_t n = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw std::invalid_argument("row " + std::to_string(line_no) + " has " +
                                  std::to_string(fields.size()) + " fields, expected " +
                                  std::to_string(header.size()));
    for (std::size_t f = 0; f < feature_names.size(); ++f) {
      double v = 0.0;
      if (!parse_double(fields[static_cast<std::size_t>(column_of[f])], v) ||
          !std::isfinite(v))
        throw std::invalid_argument("non-numeric or non-finite value in column '" +
                                    feature_names[f] + "' at row " +
                                    std::to_string(line_no));
      cells.push_back(v);
    }
    if (group_col >= 0) group_raw.push_back(trim(fields[static_cast<std::size_t>(group_col)]));
    ++n;
  }
  if (n < 1) throw std::invalid_argument("no data rows in " + path);

  FeatureTable table;
  table.features = Matrix(n, feature_names.size());
  table.features.data() = std::move(cells);
  if (group_col >= 0) table.group_ids = encode_labels(group_raw, table.group_labels);
  return table;
}

}  // namespace ct
