#include "ct/glm.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ct {

GlmFamily GlmFamily::multinomial(int n_classes) {
  if (n_classes < 2) throw std::invalid_argument("multinomial needs at least 2 classes");
  return {Tag::multinomial, n_classes};
}

std::string GlmFamily::name() const {
  switch (tag) {
    case Tag::gaussian: return "gaussian";
    case Tag::binomial: return "binomial";
    case Tag::multinomial: return "multinomial";
  }
  return "unknown";
}

namespace {

constexpr double kNullShortcutSlack = 1.0 - 1e-12;

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log1pexp(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

// One penalized weighted least-squares subproblem: the quadratic that
// coordinate descent sweeps minimize. `wr` holds w_i * (working residual).
struct QuadProblem {
  const Matrix* zt = nullptr;              // p x n, columns of Z contiguous
  std::span<const double> w;               // observation weights, length n
  double sum_w = 0.0;
  std::span<const double> col_norm;        // (1/n) sum_i w_i z_ij^2 per column
  std::vector<double>* wr = nullptr;       // length n
  std::vector<double>* eta = nullptr;      // optional linear predictor to maintain
  std::size_t eta_stride = 1;              // spacing of this group's slot in eta
  std::size_t eta_offset = 0;
  std::vector<double>* coefs = nullptr;    // length p, standardized scale
  double* intercept = nullptr;
  double intercept_clip = 30.0;
  double lambda = 0.0;
  double n = 1.0;
};

// Penalized objective of the quadratic subproblem, up to a constant that does
// not depend on the coefficients: (1/2n) sum wr_i^2 / w_i + lambda * |coefs|_1.
double quad_objective(const QuadProblem& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < q.wr->size(); ++i) {
    const double wi = q.w[i];
    if (wi > 0.0) s += (*q.wr)[i] * (*q.wr)[i] / wi;
  }
  double penalty = 0.0;
  for (double a : *q.coefs) penalty += std::abs(a);
  return 0.5 * s / q.n + q.lambda * penalty;
}

double cd_sweep(QuadProblem& q, std::span<const std::size_t> cols) {
  const std::size_t n = q.wr->size();
  double max_delta = 0.0;
  for (std::size_t j : cols) {
    const double col = q.col_norm[j];
    if (col <= 0.0) continue;
    const auto zj = q.zt->row(j);
    const double old = (*q.coefs)[j];
    double g = 0.0;
    for (std::size_t i = 0; i < n; ++i) g += zj[i] * (*q.wr)[i];
    g /= q.n;
    const double next = soft_threshold(g + col * old, q.lambda) / col;
    const double delta = next - old;
    if (delta != 0.0) {
      (*q.coefs)[j] = next;
      for (std::size_t i = 0; i < n; ++i) (*q.wr)[i] -= delta * q.w[i] * zj[i];
      if (q.eta)
        for (std::size_t i = 0; i < n; ++i)
          (*q.eta)[i * q.eta_stride + q.eta_offset] += delta * zj[i];
      max_delta = std::max(max_delta, std::abs(delta));
    }
  }
  // Unpenalized intercept, clamped for bounded behavior under separation.
  double wr_sum = 0.0;
  for (double v : *q.wr) wr_sum += v;
  const double unclipped = *q.intercept + wr_sum / q.sum_w;
  const double target = std::clamp(unclipped, -q.intercept_clip, q.intercept_clip);
  const double d0 = target - *q.intercept;
  if (d0 != 0.0) {
    *q.intercept = target;
    for (std::size_t i = 0; i < q.wr->size(); ++i) (*q.wr)[i] -= d0 * q.w[i];
    if (q.eta)
      for (std::size_t i = 0; i < q.wr->size(); ++i)
        (*q.eta)[i * q.eta_stride + q.eta_offset] += d0;
    max_delta = std::max(max_delta, std::abs(d0));
  }
  return max_delta;
}

struct SweepBudget {
  long remaining = 0;
  bool exhausted() const { return remaining <= 0; }
};

struct SweepTracer {
  const SweepObserver* observer = nullptr;
  std::size_t lambda_index = 0;
  long segment = -1;
  double prev = std::numeric_limits<double>::infinity();

  void new_segment() {
    ++segment;
    prev = std::numeric_limits<double>::infinity();
  }
  void record(const QuadProblem& q) {
#ifdef NDEBUG
    if (!observer || !*observer) return;
#endif
    const double obj = quad_objective(q);
    assert(obj <= prev + 1e-9 * (1.0 + std::abs(prev)) && "sweep objective increased");
    prev = obj;
    if (observer && *observer) (*observer)(lambda_index, segment, obj);
  }
};

// Cyclic coordinate descent with active-set iteration: full sweep, then
// sweeps over the nonzero set until stable, then a full sweep to catch new
// violations. Returns true when the max coefficient change fell below tol.
bool cd_solve(QuadProblem& q, std::span<const std::size_t> all_cols, double tol,
              SweepBudget& budget, SweepTracer& tracer) {
  std::vector<std::size_t> active;
  for (;;) {
    if (budget.exhausted()) return false;
    --budget.remaining;
    const double full_delta = cd_sweep(q, all_cols);
    tracer.record(q);
    if (full_delta < tol) return true;
    active.clear();
    for (std::size_t j : all_cols)
      if ((*q.coefs)[j] != 0.0) active.push_back(j);
    for (;;) {
      if (budget.exhausted()) return false;
      --budget.remaining;
      const double delta = cd_sweep(q, active);
      tracer.record(q);
      if (delta < tol) break;
    }
  }
}

struct StdProblem {
  Matrix z;             // n x p standardized
  Matrix zt;            // p x n
  std::vector<double> weights;
  double sum_w = 0.0;
  std::vector<double> col_norm;  // (1/n) sum w z^2
  std::vector<std::size_t> cols;  // non-constant columns
  std::size_t n = 0, p = 0;
};

StdProblem make_std_problem(const Matrix& z, const FitOptions& opts) {
  StdProblem sp;
  sp.n = z.rows();
  sp.p = z.cols();
  sp.z = z;
  sp.zt = transpose(z);
  if (opts.observation_weights.empty()) {
    sp.weights.assign(sp.n, 1.0);
  } else {
    if (opts.observation_weights.size() != sp.n)
      throw std::invalid_argument("observation_weights length mismatch");
    sp.weights = opts.observation_weights;
  }
  for (double w : sp.weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("observation weights must be >= 0");
    sp.sum_w += w;
  }
  if (sp.sum_w <= 0.0) throw std::invalid_argument("observation weights sum to 0");
  sp.col_norm.assign(sp.p, 0.0);
  for (std::size_t j = 0; j < sp.p; ++j) {
    const auto zj = sp.zt.row(j);
    double s = 0.0;
    for (std::size_t i = 0; i < sp.n; ++i) s += sp.weights[i] * zj[i] * zj[i];
    sp.col_norm[j] = s / static_cast<double>(sp.n);
    if (sp.col_norm[j] > 0.0) sp.cols.push_back(j);
  }
  return sp;
}

double weighted_column_gradient_max(const StdProblem& sp, std::span<const double> resid) {
  double best = 0.0;
  for (std::size_t j : sp.cols) {
    const auto zj = sp.zt.row(j);
    double g = 0.0;
    for (std::size_t i = 0; i < sp.n; ++i) g += sp.weights[i] * zj[i] * resid[i];
    best = std::max(best, std::abs(g) / static_cast<double>(sp.n));
  }
  return best;
}

// Null-model gradient bound under the problem's observation weights; the
// smallest penalty at which every coefficient stays zero.
double null_lambda_max(const StdProblem& sp, const Response& response,
                       const GlmFamily& family) {
  const std::size_t n = sp.n;
  std::vector<double> resid(n);
  if (family.tag == GlmFamily::Tag::gaussian) {
    double ybar = 0.0;
    for (std::size_t i = 0; i < n; ++i) ybar += sp.weights[i] * response.values[i];
    ybar /= sp.sum_w;
    for (std::size_t i = 0; i < n; ++i) resid[i] = response.values[i] - ybar;
    return weighted_column_gradient_max(sp, resid);
  }
  if (family.tag == GlmFamily::Tag::binomial) {
    double freq = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      freq += sp.weights[i] * (response.labels[i] == 1 ? 1.0 : 0.0);
    freq /= sp.sum_w;
    for (std::size_t i = 0; i < n; ++i)
      resid[i] = (response.labels[i] == 1 ? 1.0 : 0.0) - freq;
    return weighted_column_gradient_max(sp, resid);
  }
  double best = 0.0;
  for (int c = 0; c < family.n_classes; ++c) {
    double freq = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      freq += sp.weights[i] * (response.labels[i] == c ? 1.0 : 0.0);
    freq /= sp.sum_w;
    for (std::size_t i = 0; i < n; ++i)
      resid[i] = (response.labels[i] == c ? 1.0 : 0.0) - freq;
    best = std::max(best, weighted_column_gradient_max(sp, resid));
  }
  return best;
}

std::vector<double> log_spaced_path(double lambda_max, int n_lambda, double ratio) {
  if (lambda_max <= 0.0) return {0.0};
  if (n_lambda == 1) return {lambda_max};
  std::vector<double> path(static_cast<std::size_t>(n_lambda));
  for (int i = 0; i < n_lambda; ++i)
    path[static_cast<std::size_t>(i)] =
        lambda_max *
        std::pow(ratio, static_cast<double>(i) / static_cast<double>(n_lambda - 1));
  return path;
}

struct PathRecorder {
  GlmFit* fit;

  void record(std::size_t l, std::span<const double> intercepts,
              std::span<const double> coefs, bool converged, bool clipped) {
    fit->intercepts[l].assign(intercepts.begin(), intercepts.end());
    fit->coefficients[l].assign(coefs.begin(), coefs.end());
    fit->converged[l] = converged ? 1 : 0;
    fit->clipped[l] = clipped ? 1 : 0;
  }
};

// Gaussian coordinate descent with gradients maintained through a lazily
// built Gram matrix ("covariance updates"): an active-set sweep costs
// |A|^2 instead of |A| * n, which matters on correlated designs where the
// cyclic method needs many sweeps.
class CovGaussianSolver {
 public:
  CovGaussianSolver(const StdProblem& sp, const std::vector<double>& y, double ybar)
      : sp_(sp), gradient0_(sp.p, 0.0), gradient_(sp.p, 0.0),
        gram_(sp.p), has_gram_(sp.p, 0) {
    const double n = static_cast<double>(sp_.n);
    for (std::size_t j : sp_.cols) {
      const auto zj = sp_.zt.row(j);
      double g = 0.0;
      for (std::size_t i = 0; i < sp_.n; ++i) g += zj[i] * (y[i] - ybar);
      gradient0_[j] = g / n;
    }
  }

  // max |coefficient change| over one cyclic pass across all columns
  double full_pass(std::vector<double>& coefs, double lambda) {
    gradient_ = gradient0_;
    for (std::size_t k : sp_.cols) {
      if (coefs[k] == 0.0) continue;
      const auto& row = gram_row(k);
      for (std::size_t j : sp_.cols) gradient_[j] -= coefs[k] * row[j];
    }
    double max_delta = 0.0;
    for (std::size_t j : sp_.cols) {
      const double col = sp_.col_norm[j];
      const double old = coefs[j];
      const double next = soft_threshold(gradient_[j] + col * old, lambda) / col;
      const double delta = next - old;
      if (delta != 0.0) {
        coefs[j] = next;
        const auto& row = gram_row(j);
        for (std::size_t t : sp_.cols) gradient_[t] -= delta * row[t];
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    return max_delta;
  }

  double active_pass(std::vector<double>& coefs, double lambda,
                     std::span<const std::size_t> active) {
    double max_delta = 0.0;
    for (std::size_t j : active) {
      const double col = sp_.col_norm[j];
      const double old = coefs[j];
      const double next = soft_threshold(gradient_[j] + col * old, lambda) / col;
      const double delta = next - old;
      if (delta != 0.0) {
        coefs[j] = next;
        const auto& row = gram_row(j);
        for (std::size_t t : active) gradient_[t] -= delta * row[t];
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    return max_delta;
  }

  bool solve(std::vector<double>& coefs, double lambda, double tol, SweepBudget& budget) {
    std::vector<std::size_t> active;
    int newton_attempts = 0;
    for (;;) {
      if (budget.exhausted()) return false;
      --budget.remaining;
      const double full_delta = full_pass(coefs, lambda);
      if (full_delta < tol) return true;
      active.clear();
      for (std::size_t j : sp_.cols)
        if (coefs[j] != 0.0) active.push_back(j);
      // Jump straight to the fixed point of the current sign pattern when the
      // active Gram block is positive definite; badly conditioned designs
      // otherwise need very many sweeps. The next full pass certifies the
      // result, and cyclic descent remains the fallback.
      if (newton_attempts < kMaxNewtonAttempts && !active.empty() &&
          try_exact_active_solve(coefs, lambda, active)) {
        ++newton_attempts;
        continue;
      }
      for (;;) {
        if (budget.exhausted()) return false;
        --budget.remaining;
        if (active_pass(coefs, lambda, active) < tol) break;
      }
    }
  }

 private:
  static constexpr int kMaxNewtonAttempts = 400;

  // Solves K_AA x = q0_A - lambda * sign(a_A) by dense Cholesky: the fixed
  // point of the current sign pattern. A full step is taken when every
  // component keeps its sign; otherwise the step is damped to the first sign
  // crossing, zeroing that coordinate so the active set shrinks. Returns
  // false (coefs untouched) on a non-positive-definite block.
  bool try_exact_active_solve(std::vector<double>& coefs, double lambda,
                              const std::vector<std::size_t>& active) {
    const std::size_t a = active.size();
    std::vector<double> chol(a * a, 0.0);
    std::vector<double> x(a);
    for (std::size_t r = 0; r < a; ++r) {
      const auto& row = gram_row(active[r]);
      for (std::size_t c = 0; c <= r; ++c) chol[r * a + c] = row[active[c]];
      const double sign = coefs[active[r]] > 0.0 ? 1.0 : -1.0;
      x[r] = gradient0_[active[r]] - lambda * sign;
    }
    for (std::size_t c = 0; c < a; ++c) {
      double diag = chol[c * a + c];
      for (std::size_t k = 0; k < c; ++k) diag -= chol[c * a + k] * chol[c * a + k];
      if (!(diag > 1e-12 * (1.0 + chol[c * a + c]))) return false;
      diag = std::sqrt(diag);
      chol[c * a + c] = diag;
      for (std::size_t r = c + 1; r < a; ++r) {
        double v = chol[r * a + c];
        for (std::size_t k = 0; k < c; ++k) v -= chol[r * a + k] * chol[c * a + k];
        chol[r * a + c] = v / diag;
      }
    }
    for (std::size_t r = 0; r < a; ++r) {
      double v = x[r];
      for (std::size_t k = 0; k < r; ++k) v -= chol[r * a + k] * x[k];
      x[r] = v / chol[r * a + r];
    }
    for (std::size_t rr = a; rr-- > 0;) {
      double v = x[rr];
      for (std::size_t k = rr + 1; k < a; ++k) v -= chol[k * a + rr] * x[k];
      x[rr] = v / chol[rr * a + rr];
    }
    double x_norm = 0.0;
    for (double v : x) x_norm = std::max(x_norm, std::abs(v));
    if (!(x_norm < 1e10)) return false;

    // Largest step along (x - a) that keeps every sign; flipping coordinates
    // land exactly on zero.
    double gamma = 1.0;
    for (std::size_t r = 0; r < a; ++r) {
      const double cur = coefs[active[r]];
      const double sign = cur > 0.0 ? 1.0 : -1.0;
      if (x[r] * sign > 0.0) continue;
      gamma = std::min(gamma, cur / (cur - x[r]));
    }
    if (gamma >= 1.0) {
      for (std::size_t r = 0; r < a; ++r) coefs[active[r]] = x[r];
      return true;
    }
    for (std::size_t r = 0; r < a; ++r) {
      const double cur = coefs[active[r]];
      const double next = cur + gamma * (x[r] - cur);
      const double sign = cur > 0.0 ? 1.0 : -1.0;
      coefs[active[r]] = next * sign > 0.0 ? next : 0.0;
    }
    return true;
  }

  const std::vector<double>& gram_row(std::size_t j) {
    if (!has_gram_[j]) {
      auto& row = gram_[j];
      row.assign(sp_.p, 0.0);
      const double n = static_cast<double>(sp_.n);
      const auto zj = sp_.zt.row(j);
      for (std::size_t i = 0; i < sp_.n; ++i) {
        const double v = zj[i];
        if (v == 0.0) continue;
        const auto zrow = sp_.z.row(i);
        for (std::size_t t = 0; t < sp_.p; ++t) row[t] += v * zrow[t];
      }
      for (std::size_t t = 0; t < sp_.p; ++t) row[t] /= n;
      has_gram_[j] = 1;
    }
    return gram_[j];
  }

  const StdProblem& sp_;
  std::vector<double> gradient0_;
  std::vector<double> gradient_;
  std::vector<std::vector<double>> gram_;
  std::vector<char> has_gram_;
};

void fit_gaussian_core(const StdProblem& sp, const std::vector<double>& y,
                       const FitOptions& opts, GlmFit& fit) {
  const std::size_t n = sp.n;
  double ybar = 0.0;
  for (std::size_t i = 0; i < n; ++i) ybar += sp.weights[i] * y[i];
  ybar /= sp.sum_w;

  std::vector<double> resid(n);
  for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - ybar;
  const double lambda_max = weighted_column_gradient_max(sp, resid);

  std::vector<double> coefs(sp.p, 0.0);
  double intercept = ybar;
  PathRecorder rec{&fit};

  // Gram-based updates need fit-constant weights; the residual engine also
  // stays in use wherever the per-sweep objective is inspected.
  bool use_gram = opts.observation_weights.empty() && !opts.sweep_observer;
#ifndef NDEBUG
  use_gram = false;
#endif

  if (use_gram) {
    CovGaussianSolver solver(sp, y, ybar);
    for (std::size_t l = 0; l < fit.lambdas.size(); ++l) {
      const double lambda = fit.lambdas[l];
      if (lambda >= lambda_max * kNullShortcutSlack || sp.cols.empty()) {
        std::fill(coefs.begin(), coefs.end(), 0.0);
        rec.record(l, {&intercept, 1}, coefs, true, false);
        continue;
      }
      SweepBudget budget{opts.max_sweeps};
      const bool ok = solver.solve(coefs, lambda, opts.tol, budget);
      rec.record(l, {&intercept, 1}, coefs, ok, false);
    }
    return;
  }

  std::vector<double> wr(n);
  for (std::size_t i = 0; i < n; ++i) wr[i] = sp.weights[i] * (y[i] - ybar);

  QuadProblem q;
  q.zt = &sp.zt;
  q.w = sp.weights;
  q.sum_w = sp.sum_w;
  q.col_norm = sp.col_norm;
  q.wr = &wr;
  q.coefs = &coefs;
  q.intercept = &intercept;
  q.intercept_clip = std::numeric_limits<double>::infinity();
  q.n = static_cast<double>(n);

  SweepTracer tracer{opts.sweep_observer ? &opts.sweep_observer : nullptr};
  for (std::size_t l = 0; l < fit.lambdas.size(); ++l) {
    const double lambda = fit.lambdas[l];
    tracer.lambda_index = l;
    tracer.new_segment();
    if (lambda >= lambda_max * kNullShortcutSlack || sp.cols.empty()) {
      std::fill(coefs.begin(), coefs.end(), 0.0);
      intercept = ybar;
      for (std::size_t i = 0; i < n; ++i) wr[i] = sp.weights[i] * (y[i] - ybar);
      rec.record(l, {&intercept, 1}, coefs, true, false);
      continue;
    }
    q.lambda = lambda;
    SweepBudget budget{opts.max_sweeps};
    const bool ok = cd_solve(q, sp.cols, opts.tol, budget, tracer);
    rec.record(l, {&intercept, 1}, coefs, ok, false);
  }
}

void saturated_classification_fill(const StdProblem& sp, int the_class,
                                   const GlmFamily& family, const FitOptions& opts,
                                   GlmFit& fit) {
  const int groups = family.n_groups();
  std::vector<double> coefs(static_cast<std::size_t>(groups) * sp.p, 0.0);
  std::vector<double> intercepts(static_cast<std::size_t>(groups), 0.0);
  if (family.tag == GlmFamily::Tag::binomial) {
    intercepts[0] = the_class == 1 ? opts.intercept_clip : -opts.intercept_clip;
  } else {
    // Clipped one-hot frequencies under the symmetric softmax.
    std::vector<double> probs(static_cast<std::size_t>(groups), opts.prob_clip);
    probs[static_cast<std::size_t>(the_class)] = 1.0 - opts.prob_clip;
    double total = 0.0;
    for (double v : probs) total += v;
    double mean_log = 0.0;
    for (int c = 0; c < groups; ++c) {
      intercepts[static_cast<std::size_t>(c)] = std::log(probs[static_cast<std::size_t>(c)] / total);
      mean_log += intercepts[static_cast<std::size_t>(c)];
    }
    mean_log /= groups;
    for (auto& v : intercepts) v -= mean_log;
  }
  for (std::size_t l = 0; l < fit.lambdas.size(); ++l) {
    fit.intercepts[l] = intercepts;
    fit.coefficients[l] = coefs;
    fit.converged[l] = 1;
    fit.clipped[l] = 1;
  }
}

void fit_binomial_core(const StdProblem& sp, const std::vector<int>& labels,
                       const FitOptions& opts, GlmFit& fit) {
  const std::size_t n = sp.n;
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = labels[i] == 1 ? 1.0 : 0.0;

  double pbar = 0.0;
  for (std::size_t i = 0; i < n; ++i) pbar += sp.weights[i] * y[i];
  pbar /= sp.sum_w;

  std::vector<double> null_resid(n);
  for (std::size_t i = 0; i < n; ++i) null_resid[i] = y[i] - pbar;
  const double lambda_max = weighted_column_gradient_max(sp, null_resid);

  const double pbar_clipped = std::clamp(pbar, opts.prob_clip, 1.0 - opts.prob_clip);
  const double null_intercept = std::clamp(std::log(pbar_clipped / (1.0 - pbar_clipped)),
                                           -opts.intercept_clip, opts.intercept_clip);

  std::vector<double> coefs(sp.p, 0.0);
  double intercept = null_intercept;
  std::vector<double> eta(n, null_intercept);
  std::vector<double> w(n), wr(n);

  QuadProblem q;
  q.zt = &sp.zt;
  q.sum_w = 0.0;
  q.wr = &wr;
  q.eta = &eta;
  q.coefs = &coefs;
  q.intercept = &intercept;
  q.intercept_clip = opts.intercept_clip;
  q.n = static_cast<double>(n);

  std::vector<double> col_norm(sp.p);
  std::vector<double> prev_coefs;
  SweepTracer tracer{opts.sweep_observer ? &opts.sweep_observer : nullptr};
  PathRecorder rec{&fit};
  constexpr int kMaxOuter = 100;

  for (std::size_t l = 0; l < fit.lambdas.size(); ++l) {
    const double lambda = fit.lambdas[l];
    tracer.lambda_index = l;
    tracer.segment = -1;
    if (lambda >= lambda_max * kNullShortcutSlack || sp.cols.empty()) {
      std::fill(coefs.begin(), coefs.end(), 0.0);
      intercept = null_intercept;
      std::fill(eta.begin(), eta.end(), null_intercept);
      rec.record(l, {&intercept, 1}, coefs, true, false);
      continue;
    }
    SweepBudget budget{opts.max_sweeps};
    bool converged = false;
    bool clipped = false;
    for (int outer = 0; outer < kMaxOuter; ++outer) {
      clipped = false;
      for (std::size_t i = 0; i < n; ++i) {
        double p = sigmoid(eta[i]);
        if (p < opts.prob_clip || p > 1.0 - opts.prob_clip) {
          p = std::clamp(p, opts.prob_clip, 1.0 - opts.prob_clip);
          clipped = true;
        }
        w[i] = sp.weights[i] * p * (1.0 - p);
        wr[i] = sp.weights[i] * (y[i] - p);
      }
      double sum_w = 0.0;
      for (std::size_t j = 0; j < sp.p; ++j) col_norm[j] = 0.0;
      for (std::size_t j : sp.cols) {
        const auto zj = sp.zt.row(j);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += w[i] * zj[i] * zj[i];
        col_norm[j] = s / static_cast<double>(n);
      }
      for (double v : w) sum_w += v;
      q.w = w;
      q.sum_w = sum_w;
      q.col_norm = col_norm;
      q.lambda = lambda;

      prev_coefs = coefs;
      const double prev_intercept = intercept;
      tracer.new_segment();
      const bool inner_ok = cd_solve(q, sp.cols, opts.tol, budget, tracer);
      double outer_delta = std::abs(intercept - prev_intercept);
      for (std::size_t j = 0; j < sp.p; ++j)
        outer_delta = std::max(outer_delta, std::abs(coefs[j] - prev_coefs[j]));
      if (inner_ok && outer_delta < opts.tol) {
        converged = true;
        break;
      }
      if (budget.exhausted()) break;
    }
    if (std::abs(intercept) >= opts.intercept_clip) clipped = true;
    rec.record(l, {&intercept, 1}, coefs, converged, clipped);
  }
}

void fit_multinomial_core(const StdProblem& sp, const std::vector<int>& labels,
                          const FitOptions& opts, GlmFit& fit) {
  const std::size_t n = sp.n;
  const int c_count = fit.family.n_classes;

  std::vector<double> pbar(static_cast<std::size_t>(c_count), 0.0);
  for (std::size_t i = 0; i < n; ++i)
    pbar[static_cast<std::size_t>(labels[i])] += sp.weights[i];
  for (auto& v : pbar) v /= sp.sum_w;

  // lambda_max over classes and columns at the null model.
  double lambda_max = 0.0;
  std::vector<double> resid(n);
  for (int c = 0; c < c_count; ++c) {
    for (std::size_t i = 0; i < n; ++i)
      resid[i] = (labels[i] == c ? 1.0 : 0.0) - pbar[static_cast<std::size_t>(c)];
    lambda_max = std::max(lambda_max, weighted_column_gradient_max(sp, resid));
  }

  std::vector<double> null_intercepts(static_cast<std::size_t>(c_count));
  {
    double total = 0.0;
    std::vector<double> clipped_probs(static_cast<std::size_t>(c_count));
    for (int c = 0; c < c_count; ++c) {
      clipped_probs[static_cast<std::size_t>(c)] =
          std::clamp(pbar[static_cast<std::size_t>(c)], opts.prob_clip, 1.0 - opts.prob_clip);
      total += clipped_probs[static_cast<std::size_t>(c)];
    }
    double mean_log = 0.0;
    for (int c = 0; c < c_count; ++c) {
      null_intercepts[static_cast<std::size_t>(c)] =
          std::log(clipped_probs[static_cast<std::size_t>(c)] / total);
      mean_log += null_intercepts[static_cast<std::size_t>(c)];
    }
    mean_log /= c_count;
    for (auto& v : null_intercepts) v -= mean_log;
  }

  std::vector<double> coefs(static_cast<std::size_t>(c_count) * sp.p, 0.0);
  std::vector<double> intercepts = null_intercepts;
  std::vector<double> eta(n * static_cast<std::size_t>(c_count));
  auto reset_eta_to_null = [&]() {
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < c_count; ++c)
        eta[i * static_cast<std::size_t>(c_count) + static_cast<std::size_t>(c)] =
            null_intercepts[static_cast<std::size_t>(c)];
  };
  reset_eta_to_null();

  std::vector<double> w(n), wr(n), col_norm(sp.p), probs(static_cast<std::size_t>(c_count));
  std::vector<double> class_coefs(sp.p), prev_class(sp.p);
  SweepTracer tracer{opts.sweep_observer ? &opts.sweep_observer : nullptr};
  PathRecorder rec{&fit};
  constexpr int kMaxOuter = 100;

  for (std::size_t l = 0; l < fit.lambdas.size(); ++l) {
    const double lambda = fit.lambdas[l];
    tracer.lambda_index = l;
    tracer.segment = -1;
    if (lambda >= lambda_max * kNullShortcutSlack || sp.cols.empty()) {
      std::fill(coefs.begin(), coefs.end(), 0.0);
      intercepts = null_intercepts;
      reset_eta_to_null();
      rec.record(l, intercepts, coefs, true, false);
      continue;
    }
    SweepBudget budget{opts.max_sweeps};
    bool converged = false;
    bool clipped = false;
    for (int outer = 0; outer < kMaxOuter; ++outer) {
      double cycle_delta = 0.0;
      clipped = false;
      for (int c = 0; c < c_count; ++c) {
        const std::size_t cu = static_cast<std::size_t>(c);
        for (std::size_t i = 0; i < n; ++i) {
          const double* row = &eta[i * static_cast<std::size_t>(c_count)];
          double peak = row[0];
          for (int k = 1; k < c_count; ++k) peak = std::max(peak, row[static_cast<std::size_t>(k)]);
          double denom = 0.0;
          for (int k = 0; k < c_count; ++k) denom += std::exp(row[static_cast<std::size_t>(k)] - peak);
          double p = std::exp(row[cu] - peak) / denom;
          if (p < opts.prob_clip || p > 1.0 - opts.prob_clip) {
            p = std::clamp(p, opts.prob_clip, 1.0 - opts.prob_clip);
            clipped = true;
          }
          w[i] = sp.weights[i] * p * (1.0 - p);
          wr[i] = sp.weights[i] * ((labels[i] == c ? 1.0 : 0.0) - p);
        }
        double sum_w = 0.0;
        for (double v : w) sum_w += v;
        for (std::size_t j = 0; j < sp.p; ++j) col_norm[j] = 0.0;
        for (std::size_t j : sp.cols) {
          const auto zj = sp.zt.row(j);
          double s = 0.0;
          for (std::size_t i = 0; i < n; ++i) s += w[i] * zj[i] * zj[i];
          col_norm[j] = s / static_cast<double>(n);
        }
        for (std::size_t j = 0; j < sp.p; ++j) class_coefs[j] = coefs[cu * sp.p + j];
        prev_class = class_coefs;
        const double prev_intercept = intercepts[cu];

        QuadProblem q;
        q.zt = &sp.zt;
        q.w = w;
        q.sum_w = sum_w;
        q.col_norm = col_norm;
        q.wr = &wr;
        q.eta = &eta;
        q.eta_stride = static_cast<std::size_t>(c_count);
        q.eta_offset = cu;
        q.coefs = &class_coefs;
        q.intercept = &intercepts[cu];
        q.intercept_clip = opts.intercept_clip;
        q.lambda = lambda;
        q.n = static_cast<double>(n);

        tracer.new_segment();
        cd_solve(q, sp.cols, opts.tol, budget, tracer);
        for (std::size_t j = 0; j < sp.p; ++j) {
          coefs[cu * sp.p + j] = class_coefs[j];
          cycle_delta = std::max(cycle_delta, std::abs(class_coefs[j] - prev_class[j]));
        }
        cycle_delta = std::max(cycle_delta, std::abs(intercepts[cu] - prev_intercept));
        if (budget.exhausted()) break;
      }
      if (cycle_delta < opts.tol) {
        converged = true;
        break;
      }
      if (budget.exhausted()) break;
    }
    for (double v : intercepts)
      if (std::abs(v) >= opts.intercept_clip) clipped = true;
    rec.record(l, intercepts, coefs, converged, clipped);
  }
}

void validate_inputs(const Matrix& features, const Response& response,
                     const GlmFamily& family) {
  if (features.rows() == 0 || features.cols() == 0)
    throw std::invalid_argument("fit_glm: empty feature matrix");
  if (response.size() != features.rows())
    throw std::invalid_argument("fit_glm: response length mismatch");
  for (double v : features.data())
    if (!std::isfinite(v)) throw std::invalid_argument("fit_glm: non-finite feature");
  if (family.tag == GlmFamily::Tag::gaussian) {
    if (response.classification)
      throw std::invalid_argument("fit_glm: gaussian family needs real response");
    for (double v : response.values)
      if (!std::isfinite(v)) throw std::invalid_argument("fit_glm: non-finite response");
  } else {
    if (!response.classification)
      throw std::invalid_argument("fit_glm: " + family.name() + " needs class labels");
    for (int c : response.labels)
      if (c < 0 || c >= family.n_classes)
        throw std::invalid_argument("fit_glm: label out of range");
  }
}

GlmFit fit_on_standardized(const Matrix& features, const Response& response,
                           const GlmFamily& family, std::vector<double> lambdas,
                           const FitOptions& opts, Standardizer standardizer,
                           const Matrix& z) {
  if (lambdas.empty()) throw std::invalid_argument("fit_glm: empty lambda path");
  for (std::size_t l = 0; l + 1 < lambdas.size(); ++l)
    if (!(lambdas[l] > lambdas[l + 1]))
      throw std::invalid_argument("fit_glm: lambdas must be strictly decreasing");
  if (lambdas.back() < 0.0) throw std::invalid_argument("fit_glm: negative lambda");

  GlmFit fit;
  fit.family = family;
  fit.n_train = features.rows();
  fit.n_features = features.cols();
  fit.standardizer = std::move(standardizer);
  fit.lambdas = std::move(lambdas);
  const std::size_t n_l = fit.lambdas.size();
  fit.intercepts.resize(n_l);
  fit.coefficients.resize(n_l);
  fit.converged.assign(n_l, 0);
  fit.clipped.assign(n_l, 0);

  StdProblem sp = make_std_problem(z, opts);

  if (family.tag == GlmFamily::Tag::gaussian) {
    fit_gaussian_core(sp, response.values, opts, fit);
  } else {
    bool single_class = true;
    for (std::size_t i = 1; i < response.labels.size(); ++i)
      if (response.labels[i] != response.labels[0]) {
        single_class = false;
        break;
      }
    if (single_class) {
      saturated_classification_fill(sp, response.labels[0], family, opts, fit);
    } else if (family.tag == GlmFamily::Tag::binomial) {
      fit_binomial_core(sp, response.labels, opts, fit);
    } else {
      fit_multinomial_core(sp, response.labels, opts, fit);
    }
  }

  // Map standardized-scale solutions back to the original feature scale.
  const std::size_t p = fit.n_features;
  const int groups = family.n_groups();
  for (std::size_t l = 0; l < n_l; ++l) {
    for (int g = 0; g < groups; ++g) {
      const std::size_t base = static_cast<std::size_t>(g) * p;
      double shift = 0.0;
      for (std::size_t j = 0; j < p; ++j) {
        const double s = fit.standardizer.scales[j];
        double& beta = fit.coefficients[l][base + j];
        if (s > 0.0) beta /= s;
        shift += beta * fit.standardizer.means[j];
      }
      fit.intercepts[l][static_cast<std::size_t>(g)] -= shift;
    }
  }
  return fit;
}

}  // namespace

double compute_lambda_max(const Matrix& standardized, const Response& response,
                          const GlmFamily& family) {
  validate_inputs(standardized, response, family);
  const FitOptions opts;
  const StdProblem sp = make_std_problem(standardized, opts);
  return null_lambda_max(sp, response, family);
}

std::vector<double> compute_lambda_path(const Matrix& standardized,
                                        const Response& response, const GlmFamily& family,
                                        int n_lambda, double lambda_min_ratio) {
  if (n_lambda < 1) throw std::invalid_argument("compute_lambda_path: n_lambda < 1");
  if (!(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0))
    throw std::invalid_argument("compute_lambda_path: ratio must be in (0, 1)");
  return log_spaced_path(compute_lambda_max(standardized, response, family), n_lambda,
                         lambda_min_ratio);
}

GlmFit fit_glm_path(const Matrix& features, const Response& response,
                    const GlmFamily& family, std::vector<double> lambdas,
                    const FitOptions& options) {
  validate_inputs(features, response, family);
  Standardizer st = fit_standardizer(features);
  Matrix z = apply_standardizer(st, features);
  return fit_on_standardized(features, response, family, std::move(lambdas), options,
                             std::move(st), z);
}

std::vector<double> class_observation_weights(std::span<const int> labels,
                                              std::span<const double> class_weights) {
  std::vector<double> weights(labels.size(), 1.0);
  if (class_weights.empty()) return weights;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto cls = static_cast<std::size_t>(labels[i]);
    if (cls >= class_weights.size())
      throw std::invalid_argument("class_observation_weights: label out of range");
    weights[i] = class_weights[cls];
  }
  return weights;
}

GlmFit fit_glm_auto(const Matrix& features, const Response& response,
                    const GlmFamily& family, const FitOptions& options) {
  validate_inputs(features, response, family);
  if (options.n_lambda < 1) throw std::invalid_argument("fit_glm_auto: n_lambda < 1");
  Standardizer st = fit_standardizer(features);
  Matrix z = apply_standardizer(st, features);
  double ratio = options.lambda_min_ratio;
  if (ratio <= 0.0) ratio = features.rows() > features.cols() ? 0.01 : 0.05;
  // The path must start at the lambda_max of the problem actually solved,
  // observation weights included.
  const StdProblem sp = make_std_problem(z, options);
  std::vector<double> lambdas =
      log_spaced_path(null_lambda_max(sp, response, family), options.n_lambda, ratio);
  return fit_on_standardized(features, response, family, std::move(lambdas), options,
                             std::move(st), z);
}

Matrix predict_linear(const GlmFit& fit, std::size_t lambda_index, const Matrix& features) {
  if (lambda_index >= fit.n_lambdas())
    throw std::invalid_argument("predict: lambda index out of range");
  if (features.cols() != fit.n_features)
    throw std::invalid_argument("predict: feature count mismatch");
  const int groups = fit.family.n_groups();
  Matrix out(features.rows(), static_cast<std::size_t>(groups));
  const auto& b0 = fit.intercepts[lambda_index];
  const auto& beta = fit.coefficients[lambda_index];
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto row = features.row(i);
    for (int g = 0; g < groups; ++g) {
      const std::size_t base = static_cast<std::size_t>(g) * fit.n_features;
      double eta = b0[static_cast<std::size_t>(g)];
      for (std::size_t j = 0; j < fit.n_features; ++j) eta += beta[base + j] * row[j];
      out(i, static_cast<std::size_t>(g)) = eta;
    }
  }
  return out;
}

Matrix predict_probability(const GlmFit& fit, std::size_t lambda_index,
                           const Matrix& features) {
  if (!fit.family.is_classification())
    throw std::invalid_argument("predict_probability: gaussian fit has no classes");
  Matrix eta = predict_linear(fit, lambda_index, features);
  if (fit.family.tag == GlmFamily::Tag::binomial) {
    Matrix out(features.rows(), 2);
    for (std::size_t i = 0; i < features.rows(); ++i) {
      const double p1 = sigmoid(eta(i, 0));
      out(i, 0) = 1.0 - p1;
      out(i, 1) = p1;
    }
    return out;
  }
  const std::size_t c_count = eta.cols();
  Matrix out(features.rows(), c_count);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    double peak = eta(i, 0);
    for (std::size_t c = 1; c < c_count; ++c) peak = std::max(peak, eta(i, c));
    double denom = 0.0;
    for (std::size_t c = 0; c < c_count; ++c) {
      out(i, c) = std::exp(eta(i, c) - peak);
      denom += out(i, c);
    }
    for (std::size_t c = 0; c < c_count; ++c) out(i, c) /= denom;
  }
  return out;
}

Matrix predict_response(const GlmFit& fit, std::size_t lambda_index, const Matrix& features) {
  switch (fit.family.tag) {
    case GlmFamily::Tag::gaussian:
      return predict_linear(fit, lambda_index, features);
    case GlmFamily::Tag::binomial: {
      Matrix eta = predict_linear(fit, lambda_index, features);
      Matrix out(features.rows(), 1);
      for (std::size_t i = 0; i < features.rows(); ++i) out(i, 0) = sigmoid(eta(i, 0));
      return out;
    }
    case GlmFamily::Tag::multinomial:
      return predict_probability(fit, lambda_index, features);
  }
  throw std::logic_error("unreachable");
}

std::vector<int> predict_class(const GlmFit& fit, std::size_t lambda_index,
                               const Matrix& features, const LossSpec& spec) {
  Matrix probs = predict_probability(fit, lambda_index, features);
  std::vector<int> out(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i)
    out[i] = weighted_class_decision(probs.row(i), spec);
  return out;
}

double glm_smooth_value(const GlmFamily& family, const Matrix& features,
                        const Response& response, std::span<const double> intercepts,
                        std::span<const double> coefficients) {
  const std::size_t n = features.rows();
  const std::size_t p = features.cols();
  const double dn = static_cast<double>(n);
  double total = 0.0;
  if (family.tag == GlmFamily::Tag::gaussian) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = features.row(i);
      double eta = intercepts[0];
      for (std::size_t j = 0; j < p; ++j) eta += coefficients[j] * row[j];
      const double r = response.values[i] - eta;
      total += 0.5 * r * r;
    }
    return total / dn;
  }
  if (family.tag == GlmFamily::Tag::binomial) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = features.row(i);
      double eta = intercepts[0];
      for (std::size_t j = 0; j < p; ++j) eta += coefficients[j] * row[j];
      const double y = response.labels[i] == 1 ? 1.0 : 0.0;
      total += log1pexp(eta) - y * eta;
    }
    return total / dn;
  }
  const int c_count = family.n_classes;
  std::vector<double> eta(static_cast<std::size_t>(c_count));
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = features.row(i);
    for (int c = 0; c < c_count; ++c) {
      const std::size_t base = static_cast<std::size_t>(c) * p;
      double e = intercepts[static_cast<std::size_t>(c)];
      for (std::size_t j = 0; j < p; ++j) e += coefficients[base + j] * row[j];
      eta[static_cast<std::size_t>(c)] = e;
    }
    double peak = eta[0];
    for (int c = 1; c < c_count; ++c) peak = std::max(peak, eta[static_cast<std::size_t>(c)]);
    double denom = 0.0;
    for (int c = 0; c < c_count; ++c) denom += std::exp(eta[static_cast<std::size_t>(c)] - peak);
    total += peak + std::log(denom) - eta[static_cast<std::size_t>(response.labels[i])];
  }
  return total / dn;
}

std::vector<double> glm_smooth_gradient(const GlmFamily& family, const Matrix& features,
                                        const Response& response,
                                        std::span<const double> intercepts,
                                        std::span<const double> coefficients) {
  const std::size_t n = features.rows();
  const std::size_t p = features.cols();
  const double dn = static_cast<double>(n);
  const int groups = family.n_groups();
  std::vector<double> grad(static_cast<std::size_t>(groups) * p, 0.0);
  if (family.tag == GlmFamily::Tag::gaussian) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = features.row(i);
      double eta = intercepts[0];
      for (std::size_t j = 0; j < p; ++j) eta += coefficients[j] * row[j];
      const double r = response.values[i] - eta;
      for (std::size_t j = 0; j < p; ++j) grad[j] -= row[j] * r;
    }
  } else if (family.tag == GlmFamily::Tag::binomial) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = features.row(i);
      double eta = intercepts[0];
      for (std::size_t j = 0; j < p; ++j) eta += coefficients[j] * row[j];
      const double d = sigmoid(eta) - (response.labels[i] == 1 ? 1.0 : 0.0);
      for (std::size_t j = 0; j < p; ++j) grad[j] += row[j] * d;
    }
  } else {
    const int c_count = family.n_classes;
    std::vector<double> eta(static_cast<std::size_t>(c_count));
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = features.row(i);
      for (int c = 0; c < c_count; ++c) {
        const std::size_t base = static_cast<std::size_t>(c) * p;
        double e = intercepts[static_cast<std::size_t>(c)];
        for (std::size_t j = 0; j < p; ++j) e += coefficients[base + j] * row[j];
        eta[static_cast<std::size_t>(c)] = e;
      }
      double peak = eta[0];
      for (int c = 1; c < c_count; ++c) peak = std::max(peak, eta[static_cast<std::size_t>(c)]);
      double denom = 0.0;
      for (int c = 0; c < c_count; ++c) denom += std::exp(eta[static_cast<std::size_t>(c)] - peak);
      for (int c = 0; c < c_count; ++c) {
        const double prob = std::exp(eta[static_cast<std::size_t>(c)] - peak) / denom;
        const double d = prob - (response.labels[i] == c ? 1.0 : 0.0);
        const std::size_t base = static_cast<std::size_t>(c) * p;
        for (std::size_t j = 0; j < p; ++j) grad[base + j] += row[j] * d;
      }
    }
  }
  for (auto& g : grad) g /= dn;
  return grad;
}

double glm_objective(const GlmFamily& family, const Matrix& features,
                     const Response& response, std::span<const double> intercepts,
                     std::span<const double> coefficients, double lambda) {
  double penalty = 0.0;
  for (double b : coefficients) penalty += std::abs(b);
  return glm_smooth_value(family, features, response, intercepts, coefficients) +
         lambda * penalty;
}

std::size_t lambda_index_for_fraction(std::size_t n_lambdas, double fraction) {
  if (n_lambdas <= 1) return 0;
  const double f = std::clamp(fraction, 0.0, 1.0);
  const double pos = (1.0 - f) * static_cast<double>(n_lambdas - 1);
  const auto idx = static_cast<std::size_t>(std::llround(pos));
  return std::min(idx, n_lambdas - 1);
}

double lambda_fraction_for_index(std::size_t n_lambdas, std::size_t index) {
  if (n_lambdas <= 1) return 1.0;
  return 1.0 - static_cast<double>(index) / static_cast<double>(n_lambdas - 1);
}

std::vector<double> default_lambda_fractions(int n_lambda) {
  std::vector<double> fractions(static_cast<std::size_t>(n_lambda));
  for (int i = 0; i < n_lambda; ++i)
    fractions[static_cast<std::size_t>(i)] =
        lambda_fraction_for_index(static_cast<std::size_t>(n_lambda),
                                  static_cast<std::size_t>(i));
  return fractions;
}

}  // namespace ct
