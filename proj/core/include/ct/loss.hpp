#pragma once

#include <span>
#include <vector>

namespace ct {

enum class LossKind { squared_error, misclassification };

// Loss used for evaluation and decisions. class_weights, when present, give
// the cost of misclassifying each TRUE class (so asymmetric penalties like
// "a missed positive costs twice a false alarm" are expressed as a larger
// weight on the positive class). Empty weights mean all ones.
struct LossSpec {
  LossKind kind = LossKind::squared_error;
  std::vector<double> class_weights;

  double weight(int true_class) const {
    if (class_weights.empty()) return 1.0;
    return class_weights[static_cast<std::size_t>(true_class)];
  }
  double max_weight() const;

  static LossSpec squared() { return {LossKind::squared_error, {}}; }
  static LossSpec zero_one() { return {LossKind::misclassification, {}}; }
};

// Summed loss; squared error for regression, weighted error count for
// classification. Lengths must agree.
double evaluate_loss(const LossSpec& spec, std::span<const double> predictions,
                     std::span<const double> truths);
double evaluate_loss(const LossSpec& spec, std::span<const int> predictions,
                     std::span<const int> truths);

// Bayes decision under the misclassification weights: the class c minimizing
// sum_{t != c} weight(t) * p(t). Ties go to the lower class index; with no
// weights this is argmax probability.
int weighted_class_decision(std::span<const double> probabilities, const LossSpec& spec);

}  // namespace ct
