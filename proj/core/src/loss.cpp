#include "ct/loss.hpp"

#include <algorithm>
#include <stdexcept>

namespace ct {

double LossSpec::max_weight() const {
  if (class_weights.empty()) return 1.0;
  return *std::max_element(class_weights.begin(), class_weights.end());
}

double evaluate_loss(const LossSpec& spec, std::span<const double> predictions,
                     std::span<const double> truths) {
  if (predictions.size() != truths.size())
    throw std::invalid_argument("evaluate_loss: length mismatch");
  if (spec.kind != LossKind::squared_error)
    throw std::invalid_argument("evaluate_loss: real-valued inputs need squared_error");
  double loss = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - truths[i];
    loss += d * d;
  }
  return loss;
}

double evaluate_loss(const LossSpec& spec, std::span<const int> predictions,
                     std::span<const int> truths) {
  if (predictions.size() != truths.size())
    throw std::invalid_argument("evaluate_loss: length mismatch");
  if (spec.kind != LossKind::misclassification)
    throw std::invalid_argument("evaluate_loss: label inputs need misclassification");
  double loss = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] != truths[i]) loss += spec.weight(truths[i]);
  return loss;
}

int weighted_class_decision(std::span<const double> probabilities, const LossSpec& spec) {
  const std::size_t c = probabilities.size();
  if (!spec.class_weights.empty() && spec.class_weights.size() != c)
    throw std::invalid_argument("weighted_class_decision: weight count mismatch");
  int best = 0;
  double best_loss = 0.0;
  for (std::size_t cand = 0; cand < c; ++cand) {
    double expected = 0.0;
    for (std::size_t t = 0; t < c; ++t)
      if (t != cand) expected += spec.weight(static_cast<int>(t)) * probabilities[t];
    if (cand == 0 || expected < best_loss) {
      best = static_cast<int>(cand);
      best_loss = expected;
    }
  }
  return best;
}

}  // namespace ct
