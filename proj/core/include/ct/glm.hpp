#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ct/dataset.hpp"
#include "ct/loss.hpp"
#include "ct/matrix.hpp"

namespace ct {

// Response distribution of the GLM. Binomial is the two-class case and is
// kept distinct from multinomial: it is fit with a single coefficient vector
// and the logistic link, while multinomial fits one vector per class under a
// symmetric softmax.
struct GlmFamily {
  enum class Tag { gaussian, binomial, multinomial };
  Tag tag = Tag::gaussian;
  int n_classes = 1;

  static GlmFamily gaussian() { return {Tag::gaussian, 1}; }
  static GlmFamily binomial() { return {Tag::binomial, 2}; }
  static GlmFamily multinomial(int n_classes);

  bool is_classification() const { return tag != Tag::gaussian; }
  // Number of (intercept, coefficient-vector) groups carried by a fit.
  int n_groups() const { return tag == Tag::multinomial ? n_classes : 1; }
  std::string name() const;
};

// Either a real-valued response or encoded class labels.
struct Response {
  bool classification = false;
  std::vector<double> values;
  std::vector<int> labels;

  static Response regression(std::vector<double> y) {
    Response r;
    r.values = std::move(y);
    return r;
  }
  static Response classes(std::vector<int> y) {
    Response r;
    r.classification = true;
    r.labels = std::move(y);
    return r;
  }
  std::size_t size() const { return classification ? labels.size() : values.size(); }
};

// Called after each coordinate sweep with the objective value of the problem
// that sweep minimizes: the exact penalized objective for gaussian, the
// current penalized quadratic approximation for binomial/multinomial. The
// segment index increments whenever the approximation is rebuilt, so values
// are comparable (and non-increasing) within one (lambda_index, segment).
using SweepObserver =
    std::function<void(std::size_t lambda_index, long segment, double objective)>;

struct FitOptions {
  int n_lambda = 100;
  // 0 means automatic: 0.01 when n > p, else 0.05.
  double lambda_min_ratio = 0.0;
  double tol = 1e-7;
  long max_sweeps = 100000;          // coordinate sweeps per lambda
  double prob_clip = 1e-5;           // binomial/multinomial probability clamp
  double intercept_clip = 30.0;      // |intercept| bound on the standardized scale
  std::vector<double> observation_weights;  // optional, defaults to all ones
  SweepObserver sweep_observer;
};

// Solutions along a decreasing lambda path. Intercepts and coefficients are
// reported on the ORIGINAL feature scale (fitting happens on internally
// standardized features; the stored standardizer carries the statistics).
// coefficients[l] holds n_groups() blocks of p values each.
struct GlmFit {
  GlmFamily family;
  std::size_t n_train = 0;
  std::size_t n_features = 0;
  Standardizer standardizer;
  std::vector<double> lambdas;
  std::vector<std::vector<double>> intercepts;
  std::vector<std::vector<double>> coefficients;
  std::vector<std::uint8_t> converged;
  std::vector<std::uint8_t> clipped;

  std::size_t n_lambdas() const { return lambdas.size(); }
  double coefficient(std::size_t l, int group, std::size_t j) const {
    return coefficients[l][static_cast<std::size_t>(group) * n_features + j];
  }
};

inline double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

// Smallest penalty at which all coefficients are zero, computed from the
// null-model gradient. `standardized` must already be centered and scaled.
double compute_lambda_max(const Matrix& standardized, const Response& response,
                          const GlmFamily& family);

// Log-spaced path from lambda_max down to lambda_max * ratio. Degenerate
// inputs (constant gaussian response, single-class labels) give {0}.
std::vector<double> compute_lambda_path(const Matrix& standardized,
                                        const Response& response, const GlmFamily& family,
                                        int n_lambda, double lambda_min_ratio);

// Fits the penalized likelihood path by cyclic coordinate descent with
// active-set iteration and warm starts; binomial/multinomial use an outer
// reweighted least-squares loop. Never throws on hard data: non-convergence
// and separation are reported through the per-lambda flags.
GlmFit fit_glm_path(const Matrix& features, const Response& response,
                    const GlmFamily& family, std::vector<double> lambdas,
                    const FitOptions& options = {});

// Convenience wrapper: builds the lambda path from the data, then fits it.
GlmFit fit_glm_auto(const Matrix& features, const Response& response,
                    const GlmFamily& family, const FitOptions& options = {});

// Expands per-class weights into the fitter's observation weights. Weighting
// the likelihood is optional; by default asymmetric losses act at decision
// time instead (see weighted_class_decision).
std::vector<double> class_observation_weights(std::span<const int> labels,
                                              std::span<const double> class_weights);

Matrix predict_linear(const GlmFit& fit, std::size_t lambda_index, const Matrix& features);
// Mean response: gaussian m x 1 linear predictor, binomial m x 1 class-1
// probability, multinomial m x C probabilities.
Matrix predict_response(const GlmFit& fit, std::size_t lambda_index, const Matrix& features);
// Classification only: m x C class probabilities (binomial gives C = 2).
Matrix predict_probability(const GlmFit& fit, std::size_t lambda_index,
                           const Matrix& features);
// Classification only: per-row decision, loss-weighted when spec has weights.
std::vector<int> predict_class(const GlmFit& fit, std::size_t lambda_index,
                               const Matrix& features, const LossSpec& spec = {});

// Value and coefficient gradient of the smooth part of the objective,
// f(b0, b) = -(1/n) sum_i log-likelihood, evaluated at the given point on the
// same scale as `features`. Used by the optimality checks in the test suite.
double glm_smooth_value(const GlmFamily& family, const Matrix& features,
                        const Response& response, std::span<const double> intercepts,
                        std::span<const double> coefficients);
std::vector<double> glm_smooth_gradient(const GlmFamily& family, const Matrix& features,
                                        const Response& response,
                                        std::span<const double> intercepts,
                                        std::span<const double> coefficients);
double glm_objective(const GlmFamily& family, const Matrix& features,
                     const Response& response, std::span<const double> intercepts,
                     std::span<const double> coefficients, double lambda);

// Shared-position lambda selection: fraction 1 is the top of the path
// (lambda_max, maximal regularization), fraction 0 the bottom.
std::size_t lambda_index_for_fraction(std::size_t n_lambdas, double fraction);
double lambda_fraction_for_index(std::size_t n_lambdas, std::size_t index);
std::vector<double> default_lambda_fractions(int n_lambda);

}  // namespace ct
