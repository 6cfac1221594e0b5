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

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "lindbladfit/rng.hpp"

namespace lindbladfit {

void OptimizerConfig::validate() const {
  if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be positive");
  if (minibatch_fraction <= 0.0 || minibatch_fraction > 1.0)
    throw std::invalid_argument("minibatch_fraction must be in (0, 1]");
  if (max_steps < 0) throw std::invalid_argument("max_steps must be non-negative");
  if (plateau_window < 1) throw std::invalid_argument("plateau_window must be at least 1");
}

namespace {

// Locality scale exponent per packed parameter: k for Hamiltonian terms, the
// larger string weight for dissipator entries, 0 (unscaled) for state
// parameters.
std::vector<int> locality_of_params(const ModelSpec& spec, const Packing& packing) {
  std::vector<int> locality(static_cast<std::size_t>(packing.size()), 0);
  for (const auto& term : packing.ham_terms())
    for (int a = 0; a < packing.n_anchors(); ++a)
      locality[static_cast<std::size_t>(term.offset + a)] = term.k;
  if (packing.n_blocks() > 0) {
    const BlockBasis basis = enumerate_block_basis(spec.diss.k_max);
    const int side = packing.block_side();
    for (int b = 0; b < packing.n_blocks(); ++b) {
      const int off = packing.block_offset(b);
      for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c)
          locality[static_cast<std::size_t>(off + r * side + c)] =
              std::max(basis.strings[static_cast<std::size_t>(r)].weight,
                       basis.strings[static_cast<std::size_t>(c)].weight);
    }
  }
  return locality;
}

}  // namespace

ParameterSet init_params(const ModelSpec& spec, std::uint64_t seed, double sigma0) {
  if (sigma0 < 0.0) throw std::invalid_argument("sigma0 must be non-negative");
  const Packing packing(spec);
  RandomStream rng(seed);
  ParameterSet params{RealVector::Zero(packing.size())};
  const std::vector<int> locality = locality_of_params(spec, packing);
  for (int i = 0; i < packing.size(); ++i) {
    const int k = locality[static_cast<std::size_t>(i)];
    const double sigma = k == 0 ? sigma0 : sigma0 * std::pow(10.0, -(k - 1));
    params.flat[i] = sigma * rng.normal();
  }
  for (int q : packing.rho_qubits()) params.flat[packing.rho_offset(q)] += 1.0;
  return params;
}

namespace {

struct Batcher {
  // Groups record indices by configuration; minibatches draw whole
  // configurations, reshuffled each epoch.
  std::vector<std::vector<std::size_t>> config_records;
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  std::size_t per_batch = 0;
  RandomStream rng;

  Batcher(const TomographyDataset& dataset, double fraction, std::uint64_t seed)
      : rng(seed ^ 0x5bd1e995u) {
    std::map<std::pair<std::vector<int>, std::vector<int>>, std::size_t> ids;
    for (std::size_t ri = 0; ri < dataset.records.size(); ++ri) {
      const auto& rec = dataset.records[ri];
      const auto key = std::make_pair(rec.prep, rec.basis);
      auto it = ids.find(key);
      if (it == ids.end()) {
        it = ids.emplace(key, config_records.size()).first;
        config_records.emplace_back();
      }
      config_records[it->second].push_back(ri);
    }
    order.resize(config_records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    per_batch = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(order.size()))));
    if (fraction >= 1.0) per_batch = order.size();
    reshuffle();
  }

  bool full_batch() const { return per_batch >= order.size(); }

  void reshuffle() {
    if (!full_batch()) shuffle_in_place(rng, order);
    cursor = 0;
  }

  std::vector<std::size_t> next() {
    if (cursor >= order.size()) reshuffle();
    std::vector<std::size_t> records;
    const std::size_t end = std::min(order.size(), cursor + per_batch);
    for (std::size_t i = cursor; i < end; ++i)
      for (std::size_t ri : config_records[order[i]]) records.push_back(ri);
    cursor = end;
    std::sort(records.begin(), records.end());
    return records;
  }
};

FitResult run_fit(const TomographyDataset& dataset, const ModelSpec& spec,
                  const ParameterSet& init, const OptimizerConfig& config) {
  const Packing packing(spec);
  if (init.size() != packing.size())
    throw std::invalid_argument("init parameters do not match spec");

  FitResult result;
  result.spec = spec;
  result.config = config;

  Batcher batcher(dataset, config.minibatch_fraction, config.seed);
  const bool full_batch = batcher.full_batch();
  const int eval_every = config.full_eval_every > 0 ? config.full_eval_every
                                                    : config.plateau_window;

  ParameterSet params = init;
  RealVector m = RealVector::Zero(packing.size());
  RealVector v = RealVector::Zero(packing.size());

  double best_full_ll = total_ll(params, spec, dataset, config.solver, config.n_threads);
  ParameterSet best_params = params;

  double best_batched = -std::numeric_limits<double>::infinity();
  int stale = 0;
  result.stop_reason = "max_steps";

  for (int step = 1; step <= config.max_steps; ++step) {
    const std::vector<std::size_t> batch = batcher.next();
    RealVector grad;
    double batched_ll;
    try {
      batched_ll = total_ll_subset(params, spec, dataset, batch, config.solver,
                                   config.n_threads, &grad);
    } catch (const std::runtime_error& err) {
      throw FitAbort(std::string("optimization aborted at step ") + std::to_string(step) +
                         ": " + err.what(),
                     params, step);
    }
    result.trace.emplace_back(step, batched_ll);

    // With a full batch, the batched value is the full-data LL of the
    // pre-update parameters; keep the best iterate seen.
    if (full_batch && batched_ll > best_full_ll) {
      best_full_ll = batched_ll;
      best_params = params;
    }

    // Plateau bookkeeping on the batched LL.
    const double improvement =
        (batched_ll - best_batched) / std::max(1.0, std::abs(best_batched));
    if (!(std::isfinite(best_batched)) || improvement > config.plateau_rel_tol) {
      stale = 0;
    } else {
      ++stale;
    }
    if (batched_ll > best_batched) best_batched = batched_ll;

    // Ascent: Adam update with bias correction.
    m = config.beta1 * m + (1.0 - config.beta1) * grad;
    v = config.beta2 * v + (1.0 - config.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(config.beta1, step);
    const double c2 = 1.0 - std::pow(config.beta2, step);
    for (int i = 0; i < params.size(); ++i) {
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      params.flat[i] += config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon);
    }

    const bool last_step = step == config.max_steps;
    const bool plateaued = stale >= config.plateau_window;
    if ((!full_batch && step % eval_every == 0) || last_step || plateaued) {
      const double full = total_ll(params, spec, dataset, config.solver, config.n_threads);
      if (full > best_full_ll) {
        best_full_ll = full;
        best_params = params;
      }
    }
    if (plateaued) {
      result.stop_reason = "plateau";
      break;
    }
  }

  result.params = std::move(best_params);
  result.ll_full = best_full_ll;
  return result;
}

}  // namespace

FitResult fit(const TomographyDataset& dataset, const ModelSpec& spec, const ParameterSet& init,
              const OptimizerConfig& config, std::optional<double> baseline_ll) {
  config.validate();
  dataset.validate();

  FitResult result = run_fit(dataset, spec, init, config);
  result.baseline_ll = baseline_ll;
  if (baseline_ll && result.ll_full < *baseline_ll - 1e-6) {
    // Nested monotonicity violated: one automatic retry with a smaller rate.
    OptimizerConfig retry = config;
    retry.learning_rate = config.learning_rate * 0.3;
    FitResult second = run_fit(dataset, spec, init, retry);
    second.baseline_ll = baseline_ll;
    second.restarts_used = 1;
    if (second.ll_full > result.ll_full) {
      second.monotonicity_ok = second.ll_full >= *baseline_ll - 1e-6;
      return second;
    }
    result.restarts_used = 1;
  }
  result.monotonicity_ok = !baseline_ll || result.ll_full >= *baseline_ll - 1e-6;
  return result;
}

namespace {

HessianUncertainty hessian_impl(const ParameterSet& params, const ModelSpec& spec,
                                const TomographyDataset& dataset, const SolverConfig& solver,
                                int n_threads) {
  const int n = params.size();
  RealMatrix hessian(n, n);
  for (int j = 0; j < n; ++j) {
    // Richardson-extrapolated central differences of the gradient: the h^2
    // truncation term would otherwise push exact gauge-null eigenvalues above
    // the pseudo-inverse floor.
    const double h = 1e-5 * std::max(1.0, std::abs(params.flat[j]));
    const auto column = [&](double step) {
      ParameterSet plus = params;
      plus.flat[j] += step;
      ParameterSet minus = params;
      minus.flat[j] -= step;
      const RealVector gp = ll_gradient(plus, spec, dataset, solver, n_threads);
      const RealVector gm = ll_gradient(minus, spec, dataset, solver, n_threads);
      return RealVector((gp - gm) / (2.0 * step));
    };
    const RealVector coarse = column(h);
    const RealVector fine = column(h / 2.0);
    hessian.col(j) = (4.0 * fine - coarse) / 3.0;
  }
  RealMatrix info = -0.5 * (hessian + hessian.transpose());  // observed information

  Eigen::SelfAdjointEigenSolver<RealMatrix> solver_eig(info);
  const RealVector& eigenvalues = solver_eig.eigenvalues();
  const RealMatrix& eigenvectors = solver_eig.eigenvectors();
  const double max_eig = eigenvalues.cwiseAbs().maxCoeff();
  const double floor = 1e-10 * std::max(max_eig, 1e-300);

  HessianUncertainty out;
  out.eigenvalues = eigenvalues;
  out.eigenvectors = eigenvectors;
  RealVector inv = RealVector::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (eigenvalues[i] <= floor) {
      out.flagged_directions.push_back(i);
      if (eigenvalues[i] < -1e-6 * max_eig) out.indefinite_warning = true;
    } else {
      inv[i] = 1.0 / eigenvalues[i];
    }
  }
  out.covariance = eigenvectors * inv.asDiagonal() * eigenvectors.transpose();
  out.std_errors = out.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  return out;
}

}  // namespace

HessianUncertainty hessian_uncertainty(const FitResult& fit, const TomographyDataset& dataset,
                                       bool force) {
  if (!force && fit.stop_reason != "plateau")
    throw std::invalid_argument("fit did not converge (no plateau stop); pass force to override");
  return hessian_impl(fit.params, fit.spec, dataset, fit.config.solver, fit.config.n_threads);
}

HessianUncertainty hessian_uncertainty_at(const ParameterSet& params, const ModelSpec& spec,
                                          const TomographyDataset& dataset,
                                          const SolverConfig& solver, int n_threads) {
  return hessian_impl(params, spec, dataset, solver, n_threads);
}

std::string fit_result_to_json(const FitResult& fit) {
  nlohmann::ordered_json j;
  j["spec"] = nlohmann::json::parse(spec_to_json(fit.spec));
  j["packing"] = nlohmann::json::parse(packing_descriptor_json(fit.spec));
  j["params"] = std::vector<double>(fit.params.flat.data(),
                                    fit.params.flat.data() + fit.params.flat.size());
  j["ll_full"] = fit.ll_full;
  j["stop_reason"] = fit.stop_reason;
  const DofCount dof = dof_count(fit.spec);
  j["generator_dof"] = dof.generator_dof;
  j["state_dof"] = dof.state_dof;
  nlohmann::ordered_json diagnostics;
  diagnostics["monotonicity_ok"] = fit.monotonicity_ok;
  if (fit.baseline_ll) diagnostics["baseline_ll"] = *fit.baseline_ll;
  diagnostics["restarts_used"] = fit.restarts_used;
  j["diagnostics"] = diagnostics;
  nlohmann::ordered_json config;
  config["learning_rate"] = fit.config.learning_rate;
  config["beta1"] = fit.config.beta1;
  config["beta2"] = fit.config.beta2;
  config["epsilon"] = fit.config.epsilon;
  config["max_steps"] = fit.config.max_steps;
  config["plateau_rel_tol"] = fit.config.plateau_rel_tol;
  config["plateau_window"] = fit.config.plateau_window;
  config["minibatch_fraction"] = fit.config.minibatch_fraction;
  config["seed"] = fit.config.seed;
  j["optimizer"] = config;
  nlohmann::ordered_json trace = nlohmann::ordered_json::array();
  for (const auto& [step, ll] : fit.trace) trace.push_back({step, ll});
  j["trace"] = trace;
  return j.dump(2);
}

FitResult fit_result_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  FitResult fit;
  fit.spec = spec_from_json(j.at("spec").dump());
  const auto values = j.at("params").get<std::vector<double>>();
  fit.params.flat = Eigen::Map<const RealVector>(values.data(),
                                                 static_cast<Eigen::Index>(values.size()));
  fit.ll_full = j.at("ll_full").get<double>();
  fit.stop_reason = j.at("stop_reason").get<std::string>();
  if (j.contains("diagnostics")) {
    const auto& d = j.at("diagnostics");
    fit.monotonicity_ok = d.value("monotonicity_ok", true);
    if (d.contains("baseline_ll")) fit.baseline_ll = d.at("baseline_ll").get<double>();
    fit.restarts_used = d.value("restarts_used", 0);
  }
  if (j.contains("optimizer")) {
    const auto& c = j.at("optimizer");
    fit.config.learning_rate = c.value("learning_rate", fit.config.learning_rate);
    fit.config.max_steps = c.value("max_steps", fit.config.max_steps);
    fit.config.minibatch_fraction = c.value("minibatch_fraction", fit.config.minibatch_fraction);
    fit.config.seed = c.value("seed", static_cast<std::uint64_t>(0));
  }
  if (j.contains("trace"))
    for (const auto& entry : j.at("trace"))
      fit.trace.emplace_back(entry.at(0).get<int>(), entry.at(1).get<double>());
  const Packing packing(fit.spec);
  if (fit.params.size() != packing.size())
    throw std::invalid_argument("fit file parameter count does not match its spec");
  return fit;
}

}  // namespace lindbladfit
