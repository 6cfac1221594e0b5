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

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lindbladfit/likelihood.hpp"
#include "lindbladfit/model.hpp"

namespace lindbladfit {

struct OptimizerConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int max_steps = 5000;
  double plateau_rel_tol = 1e-6;
  int plateau_window = 100;
  double minibatch_fraction = 1.0;  // 1/16 supported
  std::uint64_t seed = 0;
  int n_threads = 0;
  SolverConfig solver = [] {
    SolverConfig s;
    s.validation = StateValidation::basic;
    return s;
  }();
  // Full-data LL evaluation cadence while minibatching (0 = plateau_window).
  int full_eval_every = 0;

  void validate() const;
};

struct FitResult {
  ModelSpec spec;
  ParameterSet params;   // best full-data LL iterate
  double ll_full = 0.0;  // always evaluated on the full dataset
  std::vector<std::pair<int, double>> trace;  // (step, batched LL)
  std::string stop_reason;                    // "plateau" | "max_steps"
  bool monotonicity_ok = true;   // vs the provided nested baseline, if any
  std::optional<double> baseline_ll;
  int restarts_used = 0;
  OptimizerConfig config;  // echo for provenance
};

// Aborted optimization carries the offending parameters for post-mortems.
struct FitAbort : std::runtime_error {
  FitAbort(const std::string& what, ParameterSet params_in, int step_in)
      : std::runtime_error(what), params(std::move(params_in)), step(step_in) {}
  ParameterSet params;
  int step = 0;
};

// Gaussian initialization with locality-suppressed scales: a locality-k
// generator parameter has standard deviation sigma0 * 10^-(k-1); state
// parameters start near |0><0| (theta_00 = 1 plus N(0, sigma0^2) noise).
// For dissipator entries the locality is the larger weight of the two basis
// strings the entry couples.
ParameterSet init_params(const ModelSpec& spec, std::uint64_t seed, double sigma0);

// Algorithm: Adam on the (mini)batched LL gradient; minibatches partition
// records by configuration and are reshuffled each epoch; stops on plateau of
// the batched LL or at max_steps. Returns the best iterate by full-data LL.
// When baseline_ll is given (nested warm start), a final LL below it triggers
// one automatic restart with learning rate x0.3.
FitResult fit(const TomographyDataset& dataset, const ModelSpec& spec,
              const ParameterSet& init, const OptimizerConfig& config,
              std::optional<double> baseline_ll = std::nullopt);

struct HessianUncertainty {
  RealVector std_errors;
  RealMatrix covariance;
  std::vector<int> flagged_directions;  // near-null eigenvalue indices
  RealMatrix eigenvectors;
  RealVector eigenvalues;  // of the observed information
  bool indefinite_warning = false;
};

// Observed information = -Hessian of the full-data LL at the fitted
// parameters, by central finite differences of ll_gradient; covariance is the
// eigenvalue-floored pseudo-inverse (floor 1e-10 * max eigenvalue).
HessianUncertainty hessian_uncertainty(const FitResult& fit, const TomographyDataset& dataset,
                                       bool force = false);

// Same computation at arbitrary parameters (no convergence check).
HessianUncertainty hessian_uncertainty_at(const ParameterSet& params, const ModelSpec& spec,
                                          const TomographyDataset& dataset,
                                          const SolverConfig& solver, int n_threads);

std::string fit_result_to_json(const FitResult& fit);
FitResult fit_result_from_json(const std::string& text);

}  // namespace lindbladfit
