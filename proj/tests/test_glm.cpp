#include <doctest.h>

#include <cmath>
#include <map>

#include "ct/glm.hpp"
#include "ct/random.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ct;
using namespace ct_test;

namespace {

// Columns with exact zero mean, unit population variance, zero dot product.
Matrix orthonormal_design() {
  Matrix x(4, 2);
  const double c1[4] = {1, 1, -1, -1};
  const double c2[4] = {1, -1, 1, -1};
  for (std::size_t i = 0; i < 4; ++i) {
    x(i, 0) = c1[i];
    x(i, 1) = c2[i];
  }
  return x;
}

}  // namespace

TEST_CASE("soft threshold") {
  CHECK(soft_threshold(0.5, 1.0) == 0.0);
  CHECK(soft_threshold(3.0, 1.0) == 2.0);
  CHECK(soft_threshold(-2.5, 1.5) == -1.0);
  CHECK(soft_threshold(0.0, 0.0) == 0.0);
}

TEST_CASE("lambda path construction") {
  const Matrix x = orthonormal_design();
  std::vector<double> y{2.0, -1.0, 0.5, -1.5};
  const Response resp = Response::regression(y);

  const double ybar = (2.0 - 1.0 + 0.5 - 1.5) / 4.0;
  double g0 = 0.0, g1 = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    g0 += x(i, 0) * (y[i] - ybar);
    g1 += x(i, 1) * (y[i] - ybar);
  }
  const double expected_max = std::max(std::abs(g0), std::abs(g1)) / 4.0;

  SUBCASE("full path is log-spaced from lambda_max") {
    const auto path = compute_lambda_path(x, resp, GlmFamily::gaussian(), 100, 0.01);
    REQUIRE(path.size() == 100);
    CHECK(path.front() == doctest::Approx(expected_max).epsilon(1e-12));
    CHECK(path.back() == doctest::Approx(expected_max * 0.01).epsilon(1e-9));
    const double step = path[1] / path[0];
    for (std::size_t i = 1; i < path.size(); ++i)
      CHECK(path[i] / path[i - 1] == doctest::Approx(step).epsilon(1e-10));
  }
  SUBCASE("single point path") {
    const auto path = compute_lambda_path(x, resp, GlmFamily::gaussian(), 1, 0.01);
    CHECK(path == std::vector<double>{expected_max});
  }
  SUBCASE("constant gaussian response degenerates to zero") {
    const Response flat = Response::regression({3.0, 3.0, 3.0, 3.0});
    CHECK(compute_lambda_path(x, flat, GlmFamily::gaussian(), 10, 0.01) ==
          std::vector<double>{0.0});
  }
  SUBCASE("single-class labels degenerate to zero") {
    const Response ones = Response::classes({1, 1, 1, 1});
    CHECK(compute_lambda_path(x, ones, GlmFamily::binomial(), 10, 0.01) ==
          std::vector<double>{0.0});
  }
}

TEST_CASE("top of path is the exact null model") {
  Rng rng(21);
  const Matrix x = random_matrix(rng, 15, 4);
  SUBCASE("gaussian intercept is the mean") {
    const auto y = random_vector(rng, 15, 2.0);
    double ybar = 0.0;
    for (double v : y) ybar += v;
    ybar /= 15.0;
    const GlmFit fit = fit_glm_auto(x, Response::regression(y), GlmFamily::gaussian());
    for (std::size_t j = 0; j < 4; ++j) CHECK(fit.coefficient(0, 0, j) == 0.0);
    CHECK(fit.intercepts[0][0] == ybar);
  }
  SUBCASE("binomial intercept is the log odds") {
    const auto labels = balanced_labels(rng, 15, 2);
    double pbar = 0.0;
    for (int v : labels) pbar += v;
    pbar /= 15.0;
    const GlmFit fit = fit_glm_auto(x, Response::classes(labels), GlmFamily::binomial());
    for (std::size_t j = 0; j < 4; ++j) CHECK(fit.coefficient(0, 0, j) == 0.0);
    CHECK(fit.intercepts[0][0] == doctest::Approx(std::log(pbar / (1 - pbar))).epsilon(1e-12));
  }
}

TEST_CASE("orthonormal design matches the soft-threshold closed form") {
  const Matrix x = orthonormal_design();
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto y = random_vector(rng, 4, 2.0);
    double ybar = 0.0;
    for (double v : y) ybar += v;
    ybar /= 4.0;
    std::vector<double> lambdas{0.8, 0.4, 0.2, 0.1, 0.05};
    const GlmFit fit =
        fit_glm_path(x, Response::regression(y), GlmFamily::gaussian(), lambdas);
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
      for (std::size_t j = 0; j < 2; ++j) {
        double g = 0.0;
        for (std::size_t i = 0; i < 4; ++i) g += x(i, j) * y[i];
        const double expected = soft_threshold(g / 4.0, lambdas[l]);
        CHECK(fit.coefficient(l, 0, j) == doctest::Approx(expected).epsilon(1e-6));
      }
      CHECK(fit.intercepts[l][0] == doctest::Approx(ybar).epsilon(1e-9));
    }
  }
}

TEST_CASE("saturated binomial input clips the intercept") {
  Rng rng(9);
  const Matrix x = random_matrix(rng, 8, 3);
  const GlmFit fit =
      fit_glm_auto(x, Response::classes({1, 1, 1, 1, 1, 1, 1, 1}), GlmFamily::binomial());
  for (std::size_t l = 0; l < fit.n_lambdas(); ++l) {
    CHECK(fit.intercepts[l][0] == 30.0);
    CHECK(fit.clipped[l] == 1);
    for (std::size_t j = 0; j < 3; ++j) CHECK(fit.coefficient(l, 0, j) == 0.0);
  }
  const GlmFit fit0 =
      fit_glm_auto(x, Response::classes({0, 0, 0, 0, 0, 0, 0, 0}), GlmFamily::binomial());
  CHECK(fit0.intercepts[0][0] == -30.0);
}

TEST_CASE("predict trivial cases") {
  Rng rng(13);
  const Matrix x = random_matrix(rng, 6, 2);
  SUBCASE("gaussian intercept-only predicts the mean") {
    const std::vector<double> y{4.0, 4.0, 4.0, 4.0, 4.0, 4.0};
    const GlmFit fit = fit_glm_auto(x, Response::regression(y), GlmFamily::gaussian());
    const Matrix out = predict_response(fit, 0, x);
    for (std::size_t i = 0; i < 6; ++i) CHECK(out(i, 0) == doctest::Approx(4.0));
  }
  SUBCASE("binomial all-zero coefficients give probability one half") {
    GlmFit fit;
    fit.family = GlmFamily::binomial();
    fit.n_train = 6;
    fit.n_features = 2;
    fit.standardizer.means = {0.0, 0.0};
    fit.standardizer.scales = {1.0, 1.0};
    fit.lambdas = {1.0};
    fit.intercepts = {{0.0}};
    fit.coefficients = {{0.0, 0.0}};
    fit.converged = {1};
    fit.clipped = {0};
    const Matrix probs = predict_probability(fit, 0, x);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(probs(i, 0) == doctest::Approx(0.5));
      CHECK(probs(i, 1) == doctest::Approx(0.5));
    }
  }
  SUBCASE("multinomial equal scores give uniform probabilities") {
    GlmFit fit;
    fit.family = GlmFamily::multinomial(3);
    fit.n_train = 6;
    fit.n_features = 2;
    fit.standardizer.means = {0.0, 0.0};
    fit.standardizer.scales = {1.0, 1.0};
    fit.lambdas = {1.0};
    fit.intercepts = {{0.7, 0.7, 0.7}};
    fit.coefficients = {std::vector<double>(6, 0.0)};
    fit.converged = {1};
    fit.clipped = {0};
    const Matrix probs = predict_probability(fit, 0, x);
    for (std::size_t i = 0; i < 6; ++i) {
      double sum = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        CHECK(probs(i, c) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        sum += probs(i, c);
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }
  SUBCASE("dimension mismatch throws") {
    const std::vector<double> y{1, 2, 3, 4, 5, 6};
    const GlmFit fit = fit_glm_auto(x, Response::regression(y), GlmFamily::gaussian());
    const Matrix bad(3, 5);
    CHECK_THROWS_AS(predict_response(fit, 0, bad), std::invalid_argument);
    CHECK_THROWS_AS(predict_response(fit, fit.n_lambdas(), x), std::invalid_argument);
  }
}

TEST_CASE("multinomial probabilities sum to one") {
  Rng rng(31);
  const Matrix x = random_matrix(rng, 30, 4);
  const auto labels = balanced_labels(rng, 30, 3);
  const GlmFit fit = fit_glm_auto(x, Response::classes(labels), GlmFamily::multinomial(3));
  const Matrix probs = predict_probability(fit, fit.n_lambdas() - 1, x);
  for (std::size_t i = 0; i < 30; ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < 3; ++c) sum += probs(i, c);
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("stationarity conditions hold along the path") {
  Rng rng(47);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t n = 12 + rng.bounded(28);
    const std::size_t p = 2 + rng.bounded(6);
    const Matrix x = random_matrix(rng, n, p, 1.5);
    GlmFamily family = GlmFamily::gaussian();
    Response resp;
    const int pick = trial % 3;
    if (pick == 0) {
      resp = Response::regression(linear_response(rng, x));
    } else if (pick == 1) {
      family = GlmFamily::binomial();
      resp = Response::classes(balanced_labels(rng, n, 2));
    } else {
      family = GlmFamily::multinomial(3);
      resp = Response::classes(balanced_labels(rng, n, 3));
    }
    FitOptions opts;
    opts.n_lambda = 40;
    const GlmFit fit = fit_glm_auto(x, resp, family, opts);
    CHECK(kkt_max_violation(fit, x, resp) <= 1e-4);
  }
}

TEST_CASE("objective never exceeds the null objective") {
  Rng rng(53);
  const Matrix x = random_matrix(rng, 25, 5);
  const auto y = linear_response(rng, x);
  const Response resp = Response::regression(y);
  const GlmFit fit = fit_glm_auto(x, resp, GlmFamily::gaussian());
  const Matrix z = apply_standardizer(fit.standardizer, x);

  double ybar = 0.0;
  for (double v : y) ybar += v;
  ybar /= 25.0;
  const std::vector<double> null_intercept{ybar};
  const std::vector<double> zero(5, 0.0);

  for (std::size_t l = 0; l < fit.n_lambdas(); ++l) {
    std::vector<double> std_coefs(5);
    double shift = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      std_coefs[j] = fit.coefficient(l, 0, j) * fit.standardizer.scales[j];
      shift += fit.coefficient(l, 0, j) * fit.standardizer.means[j];
    }
    const std::vector<double> std_intercept{fit.intercepts[l][0] + shift};
    const double at_solution =
        glm_objective(fit.family, z, resp, std_intercept, std_coefs, fit.lambdas[l]);
    const double at_null =
        glm_objective(fit.family, z, resp, null_intercept, zero, fit.lambdas[l]);
    CHECK(at_solution <= at_null + 1e-10);
  }
}

TEST_CASE("sweep objective is non-increasing within each segment") {
  Rng rng(59);
  std::map<std::pair<std::size_t, long>, double> last;
  bool monotone = true;
  FitOptions opts;
  opts.n_lambda = 25;
  opts.sweep_observer = [&](std::size_t l, long segment, double objective) {
    const auto key = std::make_pair(l, segment);
    const auto it = last.find(key);
    if (it != last.end() && objective > it->second + 1e-9 * (1.0 + std::abs(it->second)))
      monotone = false;
    last[key] = objective;
  };

  const Matrix x = random_matrix(rng, 30, 6, 2.0);
  fit_glm_auto(x, Response::regression(linear_response(rng, x)), GlmFamily::gaussian(), opts);
  CHECK(monotone);
  CHECK_FALSE(last.empty());

  last.clear();
  fit_glm_auto(x, Response::classes(balanced_labels(rng, 30, 2)), GlmFamily::binomial(), opts);
  CHECK(monotone);

  last.clear();
  fit_glm_auto(x, Response::classes(balanced_labels(rng, 30, 3)),
               GlmFamily::multinomial(3), opts);
  CHECK(monotone);
}

TEST_CASE("analytic gradient matches central finite differences") {
  Rng rng(61);
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t n = 8 + rng.bounded(13);   // n <= 20
    const std::size_t p = 1 + rng.bounded(5);    // p <= 5
    const Matrix x = random_matrix(rng, n, p);
    const int pick = trial % 2;

    std::vector<double> point(p + 1);
    for (auto& v : point) v = 0.5 * rng.normal();

    ObjectiveOracle oracle;
    oracle.x = &x;
    oracle.lambda = 0.0;
    std::vector<double> yv;
    std::vector<int> yl;
    GlmFamily family = GlmFamily::gaussian();
    if (pick == 0) {
      yv = random_vector(rng, n, 2.0);
      oracle.y_values = &yv;
      oracle.y_labels = nullptr;
    } else {
      family = GlmFamily::binomial();
      yl = balanced_labels(rng, n, 2);
      oracle.y_values = nullptr;
      oracle.y_labels = &yl;
    }
    const Response resp =
        pick == 0 ? Response::regression(yv) : Response::classes(yl);
    const auto fd = fd_gradient(oracle, point);
    const std::vector<double> intercepts{point[0]};
    const std::vector<double> coefs(point.begin() + 1, point.end());
    const auto analytic = glm_smooth_gradient(family, x, resp, intercepts, coefs);
    for (std::size_t j = 0; j < p; ++j)
      CHECK(std::abs(analytic[j] - fd[j]) <= 1e-6 * std::max(1.0, std::abs(analytic[j])));
  }
}

TEST_CASE("solver matches dense grid search for small problems") {
  Rng rng(67);
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t n = 8 + rng.bounded(8);
    const std::size_t p = 1 + rng.bounded(2);  // p <= 2
    Matrix x = random_matrix(rng, n, p);
    // standardize so the solver's internal problem is the stated one
    x = apply_standardizer(fit_standardizer(x), x);

    const bool gaussian = trial % 2 == 0;
    std::vector<double> yv;
    std::vector<int> yl;
    Response resp;
    if (gaussian) {
      yv = linear_response(rng, x);
      resp = Response::regression(yv);
    } else {
      yl = balanced_labels(rng, n, 2);
      resp = Response::classes(yl);
    }
    const double lambda_max =
        compute_lambda_max(x, resp, gaussian ? GlmFamily::gaussian() : GlmFamily::binomial());
    for (const double frac : {0.5, 0.1}) {
      const double lambda = lambda_max * frac;
      const GlmFit fit = fit_glm_path(x, resp,
                                      gaussian ? GlmFamily::gaussian() : GlmFamily::binomial(),
                                      {lambda});
      std::vector<double> point{fit.intercepts[0][0]};
      for (std::size_t j = 0; j < p; ++j) point.push_back(fit.coefficient(0, 0, j));

      ObjectiveOracle oracle;
      oracle.x = &x;
      oracle.y_values = gaussian ? &yv : nullptr;
      oracle.y_labels = gaussian ? nullptr : &yl;
      oracle.lambda = lambda;
      const double solver_obj = oracle(point);
      const double oracle_obj = grid_search_min_objective(oracle, p + 1, 8.0);
      CHECK(solver_obj <= oracle_obj + 1e-3);
      CHECK(solver_obj >= oracle_obj - 1e-3);
    }
  }
}

TEST_CASE("lambda fraction maps to path positions") {
  CHECK(lambda_index_for_fraction(100, 1.0) == 0);
  CHECK(lambda_index_for_fraction(100, 0.0) == 99);
  CHECK(lambda_index_for_fraction(1, 0.3) == 0);
  CHECK(lambda_fraction_for_index(100, 0) == 1.0);
  CHECK(lambda_fraction_for_index(100, 99) == 0.0);
  const auto fractions = default_lambda_fractions(5);
  REQUIRE(fractions.size() == 5);
  CHECK(fractions.front() == 1.0);
  CHECK(fractions.back() == 0.0);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(lambda_index_for_fraction(5, fractions[i]) == i);
}

TEST_CASE("gradient-maintained and residual-maintained engines agree") {
  // Attaching the sweep observer routes the fit through the residual engine;
  // in release builds the default gaussian path maintains gradients through
  // the Gram matrix instead. Both must land on the same solution.
  Rng rng(69);
  const Matrix x = random_matrix(rng, 40, 8, 2.0);
  const Response y = Response::regression(linear_response(rng, x));
  FitOptions traced;
  traced.sweep_observer = [](std::size_t, long, double) {};
  const GlmFit reference = fit_glm_auto(x, y, GlmFamily::gaussian(), traced);
  const GlmFit fast = fit_glm_auto(x, y, GlmFamily::gaussian());
  REQUIRE(reference.n_lambdas() == fast.n_lambdas());
  for (std::size_t l = 0; l < fast.n_lambdas(); ++l) {
    CHECK(reference.intercepts[l][0] == doctest::Approx(fast.intercepts[l][0]).epsilon(1e-8));
    for (std::size_t j = 0; j < 8; ++j)
      CHECK(std::abs(reference.coefficient(l, 0, j) - fast.coefficient(l, 0, j)) <= 1e-5);
  }
}

TEST_CASE("observation weights move the null model to the weighted mean") {
  Rng rng(71);
  const Matrix x = random_matrix(rng, 10, 2);
  const auto y = random_vector(rng, 10, 2.0);
  FitOptions opts;
  opts.observation_weights.assign(10, 1.0);
  opts.observation_weights[0] = 5.0;
  const GlmFit fit = fit_glm_auto(x, Response::regression(y), GlmFamily::gaussian(), opts);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    num += opts.observation_weights[i] * y[i];
    den += opts.observation_weights[i];
  }
  CHECK(fit.intercepts[0][0] == doctest::Approx(num / den).epsilon(1e-12));
}

TEST_CASE("class weights expand to observation weights") {
  const std::vector<int> labels{0, 1, 1, 0, 1};
  const std::vector<double> class_weights{1.0, 2.0};
  const auto w = class_observation_weights(labels, class_weights);
  CHECK(w == std::vector<double>{1.0, 2.0, 2.0, 1.0, 2.0});
  CHECK(class_observation_weights(labels, {}) == std::vector<double>(5, 1.0));
  const std::vector<int> bad{0, 3};
  CHECK_THROWS_AS(class_observation_weights(bad, class_weights), std::invalid_argument);
}

TEST_CASE("non-finite input is rejected") {
  Matrix x(3, 1);
  x(0, 0) = 1;
  x(1, 0) = std::numeric_limits<double>::quiet_NaN();
  x(2, 0) = 3;
  CHECK_THROWS_AS(fit_glm_auto(x, Response::regression({1, 2, 3}), GlmFamily::gaussian()),
                  std::invalid_argument);
}
