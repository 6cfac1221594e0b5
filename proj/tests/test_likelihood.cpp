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

#include "lindbladfit/likelihood.hpp"

#include <doctest.h>

#include <cmath>

#include "lindbladfit/parallel.hpp"
#include "lindbladfit/rng.hpp"

using namespace lindbladfit;

namespace {

ModelSpec lattice_spec(int n, int ham_level, int diss_level,
                       std::vector<int> observed = {}) {
  ModelSpec spec;
  spec.n_total = n;
  if (observed.empty()) {
    for (int q = 0; q < n; ++q) spec.observed.push_back(q);
  } else {
    spec.observed = std::move(observed);
  }
  spec.state_param.assign(static_cast<std::size_t>(n), true);
  if (ham_level >= 1) spec.ham.sets.push_back(build_connections(GraphKind::local, n, 1));
  if (ham_level == 2 && n >= 2)
    spec.ham.sets.push_back(build_connections(GraphKind::nearest_chain, n, 2));
  if (ham_level >= 3 && n >= 2)
    spec.ham.sets.push_back(build_connections(GraphKind::all_pairs, n, 2));
  spec.ham.k_max = static_cast<int>(spec.ham.sets.size());
  if (diss_level == 1) {
    spec.diss.k_max = 1;
    spec.diss.blocks = build_connections(GraphKind::local, n, 1);
  } else if (diss_level >= 2 && n >= 2) {
    spec.diss.k_max = 2;
    spec.diss.blocks = build_connections(GraphKind::all_pairs, n, 2);
  }
  return spec;
}

ParameterSet ideal_ground_state(const ModelSpec& spec) {
  const Packing packing(spec);
  ParameterSet params = zero_parameters(spec);
  for (int q = 0; q < spec.n_total; ++q)
    if (packing.rho_offset(q) >= 0) params.flat[packing.rho_offset(q)] = 1.0;
  return params;
}

ParameterSet random_params(const ModelSpec& spec, std::uint64_t seed, double scale) {
  const Packing packing(spec);
  RandomStream rng(seed);
  ParameterSet params = ideal_ground_state(spec);
  for (int q = 0; q < spec.n_total; ++q) {
    const int off = packing.rho_offset(q);
    if (off < 0) continue;
    for (int i = 0; i < 4; ++i) params.flat[off + i] += 0.1 * rng.normal();
  }
  for (const auto& term : packing.ham_terms())
    for (int a = 0; a < packing.n_anchors(); ++a)
      params.flat[term.offset + a] = scale * rng.normal();
  for (int b = 0; b < packing.n_blocks(); ++b) {
    const int off = packing.block_offset(b);
    for (int i = 0; i < packing.block_side() * packing.block_side(); ++i)
      params.flat[off + i] = 0.3 * scale * rng.normal();
  }
  return params;
}

TomographyDataset make_dataset(const ModelSpec& spec, const ParameterSet& truth,
                               const std::vector<double>& times, long long shots,
                               std::uint64_t seed) {
  ExperimentPlan plan;
  plan.n_observed = spec.n_observed();
  plan.prep_set = "pauli6";
  plan.times_us = times;
  plan.n_shots = shots;
  return sample_synthetic(spec, truth, plan, seed);
}

}  // namespace

TEST_CASE("predicted probabilities at t = 0") {
  SUBCASE("prep |0>, measure z") {
    ModelSpec spec = lattice_spec(1, 1, 1);
    ParameterSet params = ideal_ground_state(spec);
    const ProbabilityTable table =
        predict_probabilities(params, spec, {{{0}, {2}}}, {0.0});
    CHECK(table.probs[0][0][0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(table.probs[0][0][1] == doctest::Approx(0.0).epsilon(1e-9));
  }

  SUBCASE("prep |+>, measure x") {
    ModelSpec spec = lattice_spec(1, 1, 1);
    ParameterSet params = ideal_ground_state(spec);
    const ProbabilityTable table =
        predict_probabilities(params, spec, {{{2}, {0}}}, {0.0});
    CHECK(table.probs[0][0][0] == doctest::Approx(1.0).epsilon(1e-9));
  }

  SUBCASE("SIC state measured in z gives (1/3, 2/3)") {
    ModelSpec spec = lattice_spec(1, 1, 1);
    ParameterSet params = ideal_ground_state(spec);
    const ProbabilityTable table = predict_probabilities(params, spec, {{{1}, {2}}}, {0.0},
                                                         "sic4");
    CHECK(table.probs[0][0][0] == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    CHECK(table.probs[0][0][1] == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  }

  SUBCASE("decoupled hidden qubit leaves observed marginals unchanged") {
    ModelSpec two = lattice_spec(2, 1, 1, {0});
    ParameterSet params_two = random_params(two, 77, 0.6);
    // no couplings exist (local Hamiltonian + local dissipation)
    ModelSpec one = lattice_spec(1, 1, 1);
    ParameterSet params_one = ideal_ground_state(one);
    const Packing p2(two), p1(one);
    for (int i = 0; i < 4; ++i)
      params_one.flat[p1.rho_offset(0) + i] = params_two.flat[p2.rho_offset(0) + i];
    for (std::size_t t = 0; t < p1.ham_terms().size(); ++t)
      params_one.flat[p1.ham_terms()[t].offset] = params_two.flat[p2.ham_terms()[t].offset];
    for (int i = 0; i < 9; ++i)
      params_one.flat[p1.block_offset(0) + i] = params_two.flat[p2.block_offset(0) + i];

    const std::vector<double> times{0.0, 0.9, 2.1};
    SolverConfig tight;  // the property is exact; integrate well below 1e-10
    tight.rtol = 1e-12;
    tight.atol = 1e-12;
    const auto t2 = predict_probabilities(params_two, two, {{{4}, {1}}}, times, "pauli6", tight);
    const auto t1 = predict_probabilities(params_one, one, {{{4}, {1}}}, times, "pauli6", tight);
    for (std::size_t ti = 0; ti < times.size(); ++ti)
      CHECK((t2.probs[0][ti] - t1.probs[0][ti]).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("multinomial log-likelihood") {
  SUBCASE("certain outcome with the floor") {
    RealVector p(2);
    p << 1.0, 0.0;
    floor_and_renormalize(p);
    const double ll = multinomial_ll({100, 0}, p, 100);
    CHECK(std::abs(ll) < 1e-9);  // ~ N log(1 - 1e-12)
  }

  SUBCASE("two equal outcomes") {
    RealVector p(2);
    p << 0.5, 0.5;
    CHECK(multinomial_ll({1, 1}, p, 2) == doctest::Approx(std::log(0.5)).epsilon(1e-12));
  }

  SUBCASE("maximized at empirical frequencies") {
    RealVector p_hat(3);
    p_hat << 0.2, 0.3, 0.5;
    const std::vector<long long> counts{20, 30, 50};
    const double best = multinomial_ll(counts, p_hat, 100);
    RandomStream rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      RealVector q(3);
      for (int i = 0; i < 3; ++i) q[i] = p_hat[i] + 0.05 * rng.normal();
      if (q.minCoeff() <= 0.0) continue;
      q /= q.sum();
      CHECK(multinomial_ll(counts, q, 100) <= best + 1e-12);
    }
  }

  SUBCASE("zero probability with a nonzero count is an error") {
    RealVector p(2);
    p << 1.0, 0.0;
    CHECK_THROWS_AS(multinomial_ll({99, 1}, p, 100), std::domain_error);
  }
}

TEST_CASE("total log-likelihood") {
  ModelSpec spec = lattice_spec(1, 1, 1);
  ParameterSet truth = random_params(spec, 5, 0.8);
  TomographyDataset dataset = make_dataset(spec, truth, {0.0, 0.5, 1.5}, 200, 17);

  SUBCASE("empty dataset gives zero") {
    TomographyDataset empty = dataset;
    empty.records.clear();
    CHECK(total_ll(truth, spec, empty) == 0.0);
  }

  SUBCASE("additivity over halves") {
    TomographyDataset h1 = dataset, h2 = dataset;
    const std::size_t mid = dataset.records.size() / 2;
    h1.records.assign(dataset.records.begin(), dataset.records.begin() + mid);
    h2.records.assign(dataset.records.begin() + mid, dataset.records.end());
    const double whole = total_ll(truth, spec, dataset);
    const double sum = total_ll(truth, spec, h1) + total_ll(truth, spec, h2);
    CHECK(whole == doctest::Approx(sum).epsilon(1e-12));
  }

  SUBCASE("bounded by the per-record multinomial maximum") {
    double bound = 0.0;
    for (const auto& rec : dataset.records) {
      RealVector p_hat(2);
      for (int b = 0; b < 2; ++b)
        p_hat[b] = static_cast<double>(rec.counts[static_cast<std::size_t>(b)]) /
                   static_cast<double>(dataset.n_shots);
      p_hat = p_hat.cwiseMax(1e-300);
      p_hat /= p_hat.sum();
      bound += multinomial_ll(rec.counts, p_hat, dataset.n_shots);
    }
    CHECK(total_ll(truth, spec, dataset) <= bound + 1e-9);
    ParameterSet other = random_params(spec, 6, 0.8);
    CHECK(total_ll(other, spec, dataset) <= bound + 1e-9);
  }

  SUBCASE("parallel evaluation is bit-identical to serial") {
    const double serial = total_ll(truth, spec, dataset, SolverConfig{}, 1);
    const double parallel = total_ll(truth, spec, dataset, SolverConfig{}, 4);
    CHECK(serial == parallel);
    RealVector g1 = ll_gradient(truth, spec, dataset, SolverConfig{}, 1);
    RealVector g4 = ll_gradient(truth, spec, dataset, SolverConfig{}, 4);
    CHECK((g1 - g4).cwiseAbs().maxCoeff() == 0.0);
  }
}

namespace {

// Central finite differences of total_ll with the contract step size.
RealVector fd_gradient(const ParameterSet& params, const ModelSpec& spec,
                       const TomographyDataset& dataset, const SolverConfig& solver) {
  RealVector grad(params.size());
  for (int j = 0; j < params.size(); ++j) {
    const double h = 1e-5 * std::max(1.0, std::abs(params.flat[j]));
    ParameterSet plus = params;
    plus.flat[j] += h;
    ParameterSet minus = params;
    minus.flat[j] -= h;
    grad[j] = (total_ll(plus, spec, dataset, solver) - total_ll(minus, spec, dataset, solver)) /
              (2.0 * h);
  }
  return grad;
}

}  // namespace

TEST_CASE("gradient structure") {
  ModelSpec spec = lattice_spec(1, 1, 1);
  ParameterSet truth = random_params(spec, 21, 0.7);

  SUBCASE("t = 0 only data: generator gradients vanish") {
    TomographyDataset dataset = make_dataset(spec, truth, {0.0}, 500, 3);
    ParameterSet probe = random_params(spec, 22, 0.7);
    const RealVector grad = ll_gradient(probe, spec, dataset);
    const Packing packing(spec);
    for (const auto& term : packing.ham_terms()) CHECK(grad[term.offset] == 0.0);
    for (int b = 0; b < packing.n_blocks(); ++b)
      for (int i = 0; i < 9; ++i) CHECK(grad[packing.block_offset(b) + i] == 0.0);
    // state-parameter gradients are generically nonzero
    CHECK(grad.cwiseAbs().maxCoeff() > 0.0);
  }

  SUBCASE("doubling all counts doubles the gradient exactly") {
    TomographyDataset dataset = make_dataset(spec, truth, {0.0, 0.8}, 250, 4);
    TomographyDataset doubled = dataset;
    doubled.n_shots *= 2;
    for (auto& rec : doubled.records)
      for (auto& c : rec.counts) c *= 2;
    const RealVector g1 = ll_gradient(truth, spec, dataset);
    const RealVector g2 = ll_gradient(truth, spec, doubled);
    CHECK((g2 - 2.0 * g1).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("gradient matches central finite differences (1 qubit)") {
  ModelSpec spec = lattice_spec(1, 1, 1);
  ParameterSet truth = random_params(spec, 31, 0.9);
  TomographyDataset dataset = make_dataset(spec, truth, {0.0, 0.4, 1.1, 2.3}, 300, 8);
  ParameterSet probe = random_params(spec, 33, 0.9);

  SolverConfig tight;
  tight.rtol = 1e-10;
  tight.atol = 1e-10;
  const RealVector analytic = ll_gradient(probe, spec, dataset, tight);
  const RealVector fd = fd_gradient(probe, spec, dataset, tight);
  for (int j = 0; j < analytic.size(); ++j) {
    if (std::abs(fd[j]) <= 1e-8) continue;
    CHECK(std::abs(analytic[j] - fd[j]) / std::abs(fd[j]) <= 1e-4);
  }
}

TEST_CASE("gradient matches finite differences (2 qubits, pair dissipation)") {
  ModelSpec spec = lattice_spec(2, 3, 2);
  ParameterSet truth = random_params(spec, 41, 0.5);
  ExperimentPlan plan;
  plan.n_observed = 2;
  plan.prep_set = "pauli6";
  plan.times_us = {0.0, 0.6, 1.4};
  plan.n_shots = 200;
  TomographyDataset full = sample_synthetic(spec, truth, plan, 12);
  // a light subset of configurations keeps the FD sweep fast
  TomographyDataset dataset = full;
  dataset.records.clear();
  for (std::size_t i = 0; i < full.records.size(); i += 29)
    dataset.records.push_back(full.records[i]);

  ParameterSet probe = random_params(spec, 43, 0.5);
  SolverConfig tight;
  tight.rtol = 1e-10;
  tight.atol = 1e-10;
  const RealVector analytic = ll_gradient(probe, spec, dataset, tight, 4);
  RealVector fd(probe.size());
  {
    // FD in parallel over parameters
    std::vector<double> values(static_cast<std::size_t>(probe.size()));
    parallel_for(static_cast<std::size_t>(probe.size()), 4, [&](std::size_t j) {
      const double h = 1e-5 * std::max(1.0, std::abs(probe.flat[static_cast<int>(j)]));
      ParameterSet plus = probe;
      plus.flat[static_cast<int>(j)] += h;
      ParameterSet minus = probe;
      minus.flat[static_cast<int>(j)] -= h;
      values[j] = (total_ll(plus, spec, dataset, tight) - total_ll(minus, spec, dataset, tight)) /
                  (2.0 * h);
    });
    for (int j = 0; j < probe.size(); ++j) fd[j] = values[static_cast<std::size_t>(j)];
  }
  int checked = 0;
  for (int j = 0; j < analytic.size(); ++j) {
    if (std::abs(fd[j]) <= 1e-8) continue;
    ++checked;
    CHECK(std::abs(analytic[j] - fd[j]) / std::abs(fd[j]) <= 1e-4);
  }
  CHECK(checked > 200);
}

TEST_CASE("directional derivative matches a symmetric difference") {
  ModelSpec spec = lattice_spec(2, 2, 2);
  ParameterSet truth = random_params(spec, 51, 0.5);
  ExperimentPlan plan;
  plan.n_observed = 2;
  plan.prep_set = "pauli6";
  plan.times_us = {0.0, 0.7};
  plan.n_shots = 150;
  TomographyDataset full = sample_synthetic(spec, truth, plan, 13);
  TomographyDataset dataset = full;
  dataset.records.clear();
  for (std::size_t i = 0; i < full.records.size(); i += 17)
    dataset.records.push_back(full.records[i]);

  ParameterSet probe = random_params(spec, 53, 0.5);
  SolverConfig tight;
  tight.rtol = 1e-11;
  tight.atol = 1e-11;
  RandomStream rng(55);
  RealVector direction(probe.size());
  for (int i = 0; i < probe.size(); ++i) direction[i] = rng.normal();
  direction /= direction.norm();

  const RealVector analytic = ll_gradient(probe, spec, dataset, tight, 4);
  const double h = 1e-5;
  ParameterSet plus = probe, minus = probe;
  plus.flat += h * direction;
  minus.flat -= h * direction;
  const double fd = (total_ll(plus, spec, dataset, tight, 4) -
                     total_ll(minus, spec, dataset, tight, 4)) /
                    (2.0 * h);
  const double along = analytic.dot(direction);
  CHECK(std::abs(along - fd) / std::max(1.0, std::abs(fd)) < 1e-6);
}

TEST_CASE("hidden-qubit gauge transformations leave the likelihood unchanged") {
  // Conjugating the generator and the hidden initial state by a unitary on
  // the hidden qubit must not change observed probabilities. Checked at the
  // level of raw operators through the propagator and POVM machinery.
  ModelSpec spec = lattice_spec(2, 3, 2, {0});
  ParameterSet params = random_params(spec, 61, 0.5);
  TomographyDataset dataset = make_dataset(spec, params, {0.0, 0.5, 1.2}, 100, 14);
  const double base_ll = total_ll(params, spec, dataset);

  // Gauge unitary on the hidden qubit (qubit 1).
  const Eigen::Matrix2cd v2 = gate("x90") * gate("vz", 0.73);
  const Matrix v = embed_operator(Matrix(v2), {1}, 2);

  auto gen = LindbladGenerator::compile(params, spec);
  const Matrix h_rot = v * gen.hamiltonian(0.0) * v.adjoint();
  std::vector<Matrix> jumps_rot;
  for (const auto& jump : gen.jump_ops()) jumps_rot.push_back(v * jump * v.adjoint());
  auto gen_rot = LindbladGenerator::from_operators(2, h_rot, jumps_rot);

  const Matrix rho_init = build_initial_state(params, spec);
  const Matrix rho_rot = v * rho_init * v.adjoint();

  // Evaluate the likelihood with rotated operators record by record.
  const auto prep = preparation_gates(dataset.prep_set);
  double ll_rot = 0.0;
  for (const auto& rec : dataset.records) {
    const Matrix u = embed_operator(Matrix(prep[static_cast<std::size_t>(rec.prep[0])]), {0}, 2);
    const Matrix rho0 = u * rho_rot * u.adjoint();
    const auto states =
        evolve(gen_rot, rho0, {dataset.times_us[static_cast<std::size_t>(rec.t_index)]},
               SolverConfig{});
    const Eigen::Matrix2cd ub = basis_change_gate(rec.basis[0]);
    const Matrix um = embed_operator(Matrix(ub), {0}, 2);
    const Matrix rotated = um * states[0] * um.adjoint();
    // partial trace over the hidden qubit, diagonal of the observed qubit
    RealVector p(2);
    p[0] = (rotated(0, 0) + rotated(1, 1)).real();
    p[1] = (rotated(2, 2) + rotated(3, 3)).real();
    floor_and_renormalize(p);
    ll_rot += multinomial_ll(rec.counts, p, dataset.n_shots);
  }
  CHECK(std::abs(ll_rot - base_ll) < 1e-8 * std::max(1.0, std::abs(base_ll)));
}
