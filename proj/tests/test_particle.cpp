#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "adalag/genealogy.hpp"
#include "adalag/kalman.hpp"
#include "adalag/lgssm.hpp"
#include "adalag/particle.hpp"
#include "support/test_stats.hpp"

using namespace adalag;

namespace {

Eigen::VectorXd vec1(double v) { return Eigen::VectorXd::Constant(1, v); }

Eigen::VectorXd weights_of(std::initializer_list<double> ws) {
  Eigen::VectorXd out(static_cast<int>(ws.size()));
  int i = 0;
  for (double w : ws) out[i++] = w;
  return out;
}

WeightedSample sample_of(std::initializer_list<double> xs, std::initializer_list<double> ws,
                         int t = 0) {
  WeightedSample s;
  s.t = t;
  s.particles.resize(1, static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) s.particles(0, i++) = x;
  s.weights = weights_of(ws);
  return s;
}

/// Random-walk fixture with a constant likelihood (g == 1).
ModelSpec flat_likelihood_model() {
  ModelSpec m;
  m.state_dim = 1;
  m.obs_dim = 1;
  m.initial_sampler = [](Eigen::Ref<Eigen::VectorXd> out, RngStream& rng) { out[0] = rng.normal(); };
  m.initial_density = [](ConstVec) { return 1.0; };
  m.transition_density = [](ConstVec, ConstVec) { return 0.5; };
  m.transition_sampler = [](ConstVec x, Eigen::Ref<Eigen::VectorXd> out, RngStream& rng) {
    out[0] = x[0] + rng.normal();
  };
  m.observation_density = [](int, ConstVec) { return 1.0; };
  m.density_upper_bound = 0.5;
  return m;
}

const double kPaperInitVar = 4.0 / (1.0 - 0.95 * 0.95);

LgssmParams paper_params() { return LgssmParams::scalar(0.95, 0.5, 0.5, 2.0, 0.0, kPaperInitVar); }

ModelSpec bound_paper_model(int horizon, std::uint64_t data_seed,
                            std::vector<Eigen::VectorXd>* obs_out = nullptr) {
  ModelSpec model = make_lgssm(paper_params());
  const Trajectory traj = simulate(model, horizon, data_seed);
  model.bind_observations(traj.observations);
  if (obs_out) *obs_out = traj.observations;
  return model;
}

}  // namespace

// ---------------------------------------------------------------------------
// categorical_draw

TEST(Categorical, SingleAtomAlwaysSelected) {
  const Eigen::VectorXd w = weights_of({0.0, 5.0, 0.0});
  RngStream rng(1);
  for (int i = 0; i < 10000; ++i) EXPECT_EQ(categorical_draw(w, rng), 1);
}

TEST(Categorical, UniformWeightsPassChiSquare) {
  const Eigen::VectorXd w = weights_of({1.0, 1.0, 1.0, 1.0});
  const CategoricalSampler sampler(w);
  RngStream rng(2);
  std::vector<long> counts(4, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) counts[sampler.draw(rng)]++;
  const double stat = testsupport::chi2_statistic(counts, {0.25, 0.25, 0.25, 0.25});
  EXPECT_LT(stat, testsupport::chi2_quantile_999(3));
}

TEST(Categorical, BinomialConcentration) {
  const Eigen::VectorXd w = weights_of({1.0, 3.0});
  const CategoricalSampler sampler(w);
  RngStream rng(3);
  const int n = 100000;
  long hits = 0;
  for (int i = 0; i < n; ++i) hits += sampler.draw(rng) == 1 ? 1 : 0;
  EXPECT_NEAR(static_cast<double>(hits) / n, 0.75, 0.01);
}

TEST(Categorical, AllZeroWeightsRejected) {
  const Eigen::VectorXd w = weights_of({0.0, 0.0});
  RngStream rng(4);
  EXPECT_THROW(categorical_draw(w, rng), DegenerateWeightsError);
}

// ---------------------------------------------------------------------------
// bootstrap filter

TEST(Bootstrap, FlatLikelihoodGivesEqualWeights) {
  const ModelSpec m = flat_likelihood_model();
  RngStream rng(5);
  WeightedSample s = bootstrap_init(m, 64, rng);
  s = bootstrap_step(s, m, rng);
  for (int i = 0; i < s.size(); ++i) EXPECT_DOUBLE_EQ(s.weights[i], 1.0);
}

TEST(Bootstrap, SingleParticlePopulation) {
  std::vector<Eigen::VectorXd> obs;
  const ModelSpec m = bound_paper_model(5, 7, &obs);
  RngStream rng(6);
  WeightedSample s = bootstrap_init(m, 1, rng);
  const double parent = s.particles(0, 0);
  const WeightedSample next = bootstrap_step(s, m, rng);
  ASSERT_EQ(next.size(), 1);
  EXPECT_EQ(next.ancestors[0], 0);
  // Weight is exactly g_{t+1}(child).
  EXPECT_DOUBLE_EQ(next.weights[0], m.observation_density(1, next.particles.col(0)));
  // The child differs from the parent almost surely but stays finite.
  EXPECT_TRUE(std::isfinite(next.particles(0, 0)));
  EXPECT_NE(next.particles(0, 0), parent);
}

TEST(Bootstrap, FilterMeanMatchesKalmanWithinMonteCarloError) {
  // 50 replicate filters at N = 1e4; the replicate spread estimates the
  // asymptotic standard error of the filter-mean estimator at t = 5.
  std::vector<Eigen::VectorXd> obs;
  const ModelSpec m = bound_paper_model(5, 29, &obs);
  const auto kalman = kalman_filter(paper_params(), obs);
  const double truth = kalman.back().mean[0];

  const int reps = 50;
  std::vector<double> means(reps);
  for (int r = 0; r < reps; ++r) {
    RngStream rng(1000 + r);
    WeightedSample s = bootstrap_init(m, 10000, rng);
    for (int t = 1; t <= 5; ++t) s = bootstrap_step(s, m, rng);
    means[r] = filter_estimate(s, [](ConstVec x) { return x[0]; });
  }
  const double mean = testsupport::mean_of(means);
  const double se_of_mean = std::sqrt(testsupport::sample_variance(means) / reps);
  EXPECT_NEAR(mean, truth, 3.0 * se_of_mean);
}

TEST(Bootstrap, WeightCollapseNamesTimeIndex) {
  ModelSpec m = flat_likelihood_model();
  m.observation_density = [](int t, ConstVec) { return t >= 2 ? 0.0 : 1.0; };
  RngStream rng(8);
  WeightedSample s = bootstrap_init(m, 16, rng);
  s = bootstrap_step(s, m, rng);
  try {
    bootstrap_step(s, m, rng);
    FAIL() << "expected WeightCollapseError";
  } catch (const WeightCollapseError& e) {
    EXPECT_EQ(e.time_index, 2);
  }
}

// ---------------------------------------------------------------------------
// filter_estimate

TEST(FilterEstimate, ConstantFunctionIsExact) {
  const WeightedSample s = sample_of({0.3, -2.0, 5.0}, {0.2, 1.7, 0.4});
  EXPECT_DOUBLE_EQ(filter_estimate(s, [](ConstVec) { return 4.25; }), 4.25);
  EXPECT_DOUBLE_EQ(filter_estimate(s, [](ConstVec) { return 1.0; }), 1.0);
}

TEST(FilterEstimate, TwoPointExamples) {
  const WeightedSample equal = sample_of({0.0, 1.0}, {1.0, 1.0});
  EXPECT_DOUBLE_EQ(filter_estimate(equal, [](ConstVec x) { return x[0]; }), 0.5);
  const WeightedSample skewed = sample_of({0.0, 1.0}, {1.0, 3.0});
  EXPECT_DOUBLE_EQ(filter_estimate(skewed, [](ConstVec x) { return x[0]; }), 0.75);
}

TEST(FilterEstimate, ExchangeabilityUnderJointPermutation) {
  const WeightedSample s = sample_of({0.3, -2.0, 5.0, 1.1}, {0.2, 1.7, 0.4, 0.9});
  WeightedSample p = s;
  const std::vector<int> perm{2, 0, 3, 1};
  for (int i = 0; i < 4; ++i) {
    p.particles(0, i) = s.particles(0, perm[i]);
    p.weights[i] = s.weights[perm[i]];
  }
  auto f = [](ConstVec x) { return x[0] * x[0] + 0.5 * x[0]; };
  // With summation order fixed by sorting on particle value, the estimate is
  // identical to the last bit under a joint permutation of the triples.
  auto canonical = [&f](const WeightedSample& ws) {
    std::vector<int> order(ws.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int i, int j) { return ws.particles(0, i) < ws.particles(0, j); });
    double num = 0.0, den = 0.0;
    for (int idx : order) {
      num += ws.weights[idx] * f(ws.particles.col(idx));
      den += ws.weights[idx];
    }
    return num / den;
  };
  EXPECT_EQ(canonical(s), canonical(p));
  // The production ascending-index sum agrees to floating-point roundoff.
  EXPECT_NEAR(filter_estimate(s, f), filter_estimate(p, f), 1e-14);
}

TEST(FilterEstimate, NormalizationExact) {
  RngStream rng(10);
  Eigen::VectorXd w(100);
  for (int i = 0; i < 100; ++i) w[i] = rng.uniform() * 3.0;
  WeightedSample s;
  s.t = 0;
  s.particles = Eigen::MatrixXd::Random(1, 100);
  s.weights = w;
  EXPECT_EQ(filter_estimate(s, [](ConstVec) { return 1.0; }), 1.0);
}

// ---------------------------------------------------------------------------
// genealogy

TEST(Genealogy, TraceAtSameTimeIsIdentity) {
  const ModelSpec m = flat_likelihood_model();
  RngStream rng(11);
  GenealogyStore store(8);
  WeightedSample s = bootstrap_init(m, 32, rng);
  store.push(s);
  for (int t = 1; t <= 4; ++t) {
    s = bootstrap_step(s, m, rng);
    store.push(s);
  }
  EXPECT_EQ(unique_ancestors(store, 4, 4), 32);
  const auto idx = store.trace(4, 4);
  for (int i = 0; i < 32; ++i) EXPECT_EQ(idx[i], i);
}

TEST(Genealogy, SingleNonzeroWeightCoalescesImmediately) {
  ModelSpec m = flat_likelihood_model();
  RngStream rng(12);
  WeightedSample s = bootstrap_init(m, 16, rng);
  s.weights.setZero();
  s.weights[9] = 2.0;
  GenealogyStore store(4);
  store.push(s);
  const WeightedSample next = bootstrap_step(s, m, rng);
  store.push(next);
  EXPECT_EQ(unique_ancestors(store, 0, 1), 1);
  // After coalescence to ancestor 9, the estimator collapses to f(xi_0^9)
  // regardless of the current weights.
  const double collapsed =
      poor_mans_estimate(store, 0, 1, [](ConstVec x) { return 2.0 * x[0]; });
  EXPECT_DOUBLE_EQ(collapsed, 2.0 * s.particles(0, 9));
}

TEST(Genealogy, PoorMansEqualsFilterEstimateAtSameTime) {
  std::vector<Eigen::VectorXd> obs;
  const ModelSpec m = bound_paper_model(6, 13, &obs);
  RngStream rng(13);
  GenealogyStore store(7);
  WeightedSample s = bootstrap_init(m, 128, rng);
  store.push(s);
  for (int t = 1; t <= 6; ++t) {
    s = bootstrap_step(s, m, rng);
    store.push(s);
  }
  auto f = [](ConstVec x) { return x[0]; };
  EXPECT_DOUBLE_EQ(poor_mans_estimate(store, 6, 6, f), filter_estimate(s, f));
  EXPECT_DOUBLE_EQ(poor_mans_estimate(store, 2, 6, [](ConstVec) { return 3.5; }), 3.5);
}

TEST(Genealogy, LookupOutsideWindowFails) {
  const ModelSpec m = flat_likelihood_model();
  RngStream rng(14);
  GenealogyStore store(3);
  WeightedSample s = bootstrap_init(m, 8, rng);
  store.push(s);
  for (int t = 1; t <= 5; ++t) {
    s = bootstrap_step(s, m, rng);
    store.push(s);
  }
  EXPECT_THROW(store.at(1), RetentionError);
  EXPECT_THROW(store.trace(2, 5), RetentionError);
  EXPECT_NO_THROW(store.trace(3, 5));
}

// ---------------------------------------------------------------------------
// consistency sanity

TEST(Consistency, FilterErrorShrinksWithPopulationSize) {
  // Median over 20 seeds of |particle mean - Kalman mean| decreases over
  // N in {100, 1000, 10000}.
  std::vector<Eigen::VectorXd> obs;
  const ModelSpec m = bound_paper_model(10, 99, &obs);
  const auto kalman = kalman_filter(paper_params(), obs);
  const double truth = kalman.back().mean[0];

  std::vector<double> medians;
  for (int n : {100, 1000, 10000}) {
    std::vector<double> errs;
    for (int seed = 0; seed < 20; ++seed) {
      RngStream rng(4000 + seed);
      WeightedSample s = bootstrap_init(m, n, rng);
      for (int t = 1; t <= 10; ++t) s = bootstrap_step(s, m, rng);
      errs.push_back(std::abs(filter_estimate(s, [](ConstVec x) { return x[0]; }) - truth));
    }
    medians.push_back(testsupport::median_of(errs));
  }
  EXPECT_GT(medians[0], medians[1]);
  EXPECT_GT(medians[1], medians[2]);
}
