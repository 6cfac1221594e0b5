// Copyright 2026 The lindbladfit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lindbladfit/estimator.hpp"

#include <doctest.h>

#include <cmath>

#include "lindbladfit/experiment.hpp"

using namespace lindbladfit;

namespace {

ModelSpec one_qubit_spec(int ham_level = 1, int diss_level = 1) {
  ModelSpec spec;
  spec.n_total = 1;
  spec.observed = {0};
  spec.state_param = {true};
  if (ham_level >= 1) {
    spec.ham.k_max = 1;
    spec.ham.sets = {build_connections(GraphKind::local, 1, 1)};
  }
  if (diss_level >= 1) {
    spec.diss.k_max = 1;
    spec.diss.blocks = build_connections(GraphKind::local, 1, 1);
  }
  return spec;
}

ModelSpec pair_spec() {
  ModelSpec spec;
  spec.n_total = 2;
  spec.observed = {0, 1};
  spec.state_param = {true, true};
  spec.ham.k_max = 2;
  spec.ham.sets = {build_connections(GraphKind::local, 2, 1),
                   build_connections(GraphKind::all_pairs, 2, 2)};
  spec.diss.k_max = 1;
  spec.diss.blocks = build_connections(GraphKind::local, 2, 1);
  return spec;
}

ParameterSet rabi_truth(const ModelSpec& spec, double ax, double az, double gamma) {
  const Packing packing(spec);
  ParameterSet params = zero_parameters(spec);
  params.flat[packing.rho_offset(0)] = 1.0;
  params.flat[packing.ham_terms()[0].offset] = ax;
  params.flat[packing.ham_terms()[2].offset] = az;
  const double r = std::sqrt(gamma) / 2.0;
  const int off = packing.block_offset(0);
  params.flat[off + 2 * 3 + 0] = r;  // Re M_31 (sigma- expansion)
  params.flat[off + 1 * 3 + 2] = r;  // Im M_32
  return params;
}

TomographyDataset pauli6_dataset(const ModelSpec& spec, const ParameterSet& truth,
                                 int n_times, double t_max, long long shots,
                                 std::uint64_t seed) {
  ExperimentPlan plan;
  plan.n_observed = spec.n_observed();
  plan.prep_set = "pauli6";
  for (int i = 0; i < n_times; ++i)
    plan.times_us.push_back(t_max * static_cast<double>(i) / (n_times - 1));
  plan.n_shots = shots;
  return sample_synthetic(spec, truth, plan, seed);
}

}  // namespace

TEST_CASE("init_params") {
  ModelSpec spec = pair_spec();

  SUBCASE("deterministic given the seed") {
    const ParameterSet a = init_params(spec, 7, 0.3);
    const ParameterSet b = init_params(spec, 7, 0.3);
    CHECK((a.flat - b.flat).cwiseAbs().maxCoeff() == 0.0);
    const ParameterSet c = init_params(spec, 8, 0.3);
    CHECK((a.flat - c.flat).cwiseAbs().maxCoeff() > 0.0);
  }

  SUBCASE("locality scaling: 2-local variance is sigma0^2/100") {
    const Packing packing(spec);
    int probe_offset = -1;
    for (const auto& term : packing.ham_terms())
      if (term.k == 2) probe_offset = term.offset;
    REQUIRE(probe_offset >= 0);
    const double sigma0 = 0.5;
    double sum = 0.0, sum2 = 0.0;
    const int n_draws = 10000;
    for (int i = 0; i < n_draws; ++i) {
      const ParameterSet draw = init_params(spec, 1000 + i, sigma0);
      const double x = draw.flat[probe_offset];
      sum += x;
      sum2 += x * x;
    }
    const double var = sum2 / n_draws - (sum / n_draws) * (sum / n_draws);
    CHECK(var == doctest::Approx(sigma0 * sigma0 / 100.0).epsilon(0.10));
  }

  SUBCASE("sigma0 = 0 gives the ideal ground state with zero generator") {
    const ParameterSet draw = init_params(spec, 3, 0.0);
    const Packing packing(spec);
    for (const auto& term : packing.ham_terms()) CHECK(draw.flat[term.offset] == 0.0);
    CHECK(draw.flat[packing.rho_offset(0)] == 1.0);
    CHECK(draw.flat[packing.rho_offset(1)] == 1.0);
  }
}

TEST_CASE("fit basics") {
  ModelSpec spec = one_qubit_spec();
  ParameterSet truth = rabi_truth(spec, 0.8, 0.3, 0.08);
  TomographyDataset dataset = pauli6_dataset(spec, truth, 8, 3.0, 300, 21);

  SUBCASE("max_steps = 0 returns the init evaluation") {
    OptimizerConfig config;
    config.max_steps = 0;
    const ParameterSet init = init_params(spec, 5, 0.2);
    const FitResult result = fit(dataset, spec, init, config);
    CHECK((result.params.flat - init.flat).cwiseAbs().maxCoeff() == 0.0);
    CHECK(result.ll_full == doctest::Approx(total_ll(init, spec, dataset)).epsilon(1e-12));
    CHECK(result.stop_reason == "max_steps");
  }

  SUBCASE("near-truth start converges to a plateau and improves the likelihood") {
    OptimizerConfig config;
    config.learning_rate = 3e-3;
    config.max_steps = 1200;
    config.plateau_window = 80;
    config.seed = 2;
    ParameterSet init = truth;
    init.flat[Packing(spec).ham_terms()[0].offset] += 0.15;  // detune a_x
    const double init_ll = total_ll(init, spec, dataset);
    const FitResult result = fit(dataset, spec, init, config);
    CHECK(result.ll_full >= init_ll);
    CHECK(result.stop_reason == "plateau");
    const Packing packing(spec);
    CHECK(result.params.flat[packing.ham_terms()[0].offset] == doctest::Approx(0.8).epsilon(0.1));
  }

  SUBCASE("identical inputs give identical results") {
    OptimizerConfig config;
    config.max_steps = 40;
    config.seed = 11;
    const ParameterSet init = init_params(spec, 5, 0.2);
    const FitResult a = fit(dataset, spec, init, config);
    const FitResult b = fit(dataset, spec, init, config);
    CHECK((a.params.flat - b.params.flat).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.ll_full == b.ll_full);
  }

  SUBCASE("minibatching runs and reports full-data LL") {
    OptimizerConfig config;
    config.max_steps = 64;
    config.minibatch_fraction = 1.0 / 16.0;
    config.seed = 13;
    const ParameterSet init = init_params(spec, 5, 0.2);
    const FitResult result = fit(dataset, spec, init, config);
    // reported LL must be a full-data evaluation, not a minibatch value
    CHECK(result.ll_full ==
          doctest::Approx(total_ll(result.params, spec, dataset)).epsilon(1e-12));
  }
}

TEST_CASE("warm-started nested fits keep the baseline likelihood") {
  ModelSpec small = one_qubit_spec();
  ParameterSet truth = rabi_truth(small, 0.9, 0.2, 0.05);
  TomographyDataset dataset = pauli6_dataset(small, truth, 8, 3.0, 400, 23);

  OptimizerConfig config;
  config.learning_rate = 3e-3;
  config.max_steps = 500;
  config.plateau_window = 60;
  config.seed = 3;
  ParameterSet init = truth;
  const FitResult small_fit = fit(dataset, small, init, config);

  // the same structure with anchors is strictly larger
  ModelSpec large = small;
  large.time_dependence = {TimeDependenceType::anchors, 3, 0.0, 3.0};
  const ParameterSet warm = embed_warm_start(small_fit.params, small, large);
  // LL preservation is exact in the math; the anchored model integrates on a
  // different mesh, so compare at tight solver tolerances.
  SolverConfig tight;
  tight.rtol = 1e-11;
  tight.atol = 1e-11;
  CHECK(total_ll(warm, large, dataset, tight) ==
        doctest::Approx(total_ll(small_fit.params, small, dataset, tight)).epsilon(1e-9));

  OptimizerConfig config_large = config;
  config_large.max_steps = 150;
  const FitResult large_fit = fit(dataset, large, warm, config_large, small_fit.ll_full);
  CHECK(large_fit.ll_full >= small_fit.ll_full - 1e-6);
  CHECK(large_fit.monotonicity_ok);
}

TEST_CASE("hessian uncertainty reproduces the binomial standard error") {
  // Single-qubit state parameters probed by z-measurements at t = 0: the one
  // identifiable combination is p = rho_00, whose MLE standard error is
  // sqrt(p(1-p)/N). The remaining three directions are gauge and get flagged.
  ModelSpec spec;
  spec.n_total = 1;
  spec.observed = {0};
  spec.state_param = {true};

  const double p_hat = 0.73;
  const long long n_shots = 4000;
  TomographyDataset dataset;
  dataset.n_observed = 1;
  dataset.prep_set = "pauli6";
  dataset.times_us = {0.0};
  dataset.n_shots = n_shots;
  TomographyRecord rec;
  rec.prep = {0};
  rec.basis = {2};
  rec.t_index = 0;
  rec.counts = {static_cast<long long>(p_hat * n_shots),
                n_shots - static_cast<long long>(p_hat * n_shots)};
  dataset.records.push_back(rec);

  ParameterSet mle = zero_parameters(spec);
  mle.flat[0] = std::sqrt(p_hat);        // theta_00
  mle.flat[3] = std::sqrt(1.0 - p_hat);  // theta_11

  const HessianUncertainty result =
      hessian_uncertainty_at(mle, spec, dataset, SolverConfig{}, 1);
  CHECK(result.flagged_directions.size() == 3);

  // delta method for p(theta) with numerically evaluated sensitivity
  RealVector dp(4);
  for (int j = 0; j < 4; ++j) {
    const double h = 1e-6;
    ParameterSet plus = mle, minus = mle;
    plus.flat[j] += h;
    minus.flat[j] -= h;
    const auto pp = predict_probabilities(plus, spec, {{{0}, {2}}}, {0.0});
    const auto pm = predict_probabilities(minus, spec, {{{0}, {2}}}, {0.0});
    dp[j] = (pp.probs[0][0][0] - pm.probs[0][0][0]) / (2.0 * h);
  }
  const double se_p = std::sqrt(dp.dot(result.covariance * dp));
  const double expected = std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(n_shots));
  CHECK(se_p == doctest::Approx(expected).epsilon(0.02));
}

TEST_CASE("hidden-qubit models have at least three flagged directions per hidden qubit") {
  ModelSpec spec;
  spec.n_total = 2;
  spec.observed = {0};
  spec.state_param = {true, true};
  spec.ham.k_max = 2;
  spec.ham.sets = {build_connections(GraphKind::local, 2, 1),
                   build_connections(GraphKind::all_pairs, 2, 2)};
  spec.diss.k_max = 2;
  spec.diss.blocks = build_connections(GraphKind::all_pairs, 2, 2);

  const Packing packing(spec);
  ParameterSet truth = init_params(spec, 19, 0.4);
  // give the coupling terms enough weight for an informative fixture
  for (const auto& term : packing.ham_terms())
    if (term.k == 2 && term.pauli_index == 0) truth.flat[term.offset] = 1.2;

  ExperimentPlan plan;
  plan.n_observed = 1;
  plan.prep_set = "pauli6";
  plan.times_us = {0.0, 0.8, 1.6};
  plan.n_shots = 250;
  const TomographyDataset dataset = sample_synthetic(spec, truth, plan, 29);

  const HessianUncertainty result =
      hessian_uncertainty_at(truth, spec, dataset, SolverConfig{}, 0);
  CHECK(result.flagged_directions.size() >= 3);
}

TEST_CASE("hessian uncertainty requires convergence unless forced") {
  ModelSpec spec = one_qubit_spec();
  ParameterSet truth = rabi_truth(spec, 0.8, 0.3, 0.08);
  TomographyDataset dataset = pauli6_dataset(spec, truth, 4, 1.5, 100, 31);
  OptimizerConfig config;
  config.max_steps = 5;
  FitResult result = fit(dataset, spec, truth, config);
  CHECK(result.stop_reason == "max_steps");
  CHECK_THROWS_AS(hessian_uncertainty(result, dataset), std::invalid_argument);
  CHECK_NOTHROW(hessian_uncertainty(result, dataset, true));
}
