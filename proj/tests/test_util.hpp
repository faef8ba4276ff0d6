#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ct/glm.hpp"
#include "ct/matrix.hpp"
#include "ct/random.hpp"

namespace ct_test {

inline ct::Matrix random_matrix(ct::Rng& rng, std::size_t n, std::size_t p,
                                double scale = 1.0) {
  ct::Matrix m(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) m(i, j) = scale * rng.normal();
  return m;
}

inline std::vector<double> random_vector(ct::Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

inline std::vector<int> random_labels(ct::Rng& rng, std::size_t n, int n_classes) {
  std::vector<int> v(n);
  for (auto& x : v) x = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(n_classes)));
  return v;
}

// Labels with every class guaranteed present.
inline std::vector<int> balanced_labels(ct::Rng& rng, std::size_t n, int n_classes) {
  std::vector<int> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<int>(i % static_cast<std::size_t>(n_classes));
  rng.shuffle(v);
  return v;
}

// A response with real linear signal so fits have structure.
inline std::vector<double> linear_response(ct::Rng& rng, const ct::Matrix& x,
                                           double noise = 0.5) {
  std::vector<double> beta(x.cols());
  for (auto& b : beta) b = rng.normal();
  std::vector<double> y(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double v = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) v += beta[j] * x(i, j);
    y[i] = v + noise * rng.normal();
  }
  return y;
}

inline std::vector<int> signal_labels(ct::Rng& rng, const ct::Matrix& x, int n_classes) {
  const auto scores = linear_response(rng, x, 1.0);
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> labels(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    int cls = 0;
    for (int c = 1; c < n_classes; ++c)
      if (scores[i] > sorted[c * static_cast<int>(x.rows()) / n_classes]) cls = c;
    labels[i] = cls;
  }
  return labels;
}

class TempDir {
 public:
  explicit TempDir(const std::string& stem) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            (stem + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return text;
}

}  // namespace ct_test
