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

#include "lindbladfit/experiment.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "lindbladfit/likelihood.hpp"

using namespace lindbladfit;

namespace {

Eigen::Vector2cd apply_to_zero(const Eigen::Matrix2cd& u) {
  Eigen::Vector2cd ket0;
  ket0 << 1.0, 0.0;
  return u * ket0;
}

ModelSpec simple_spec(int n) {
  ModelSpec spec;
  spec.n_total = n;
  for (int q = 0; q < n; ++q) spec.observed.push_back(q);
  spec.ham.k_max = 1;
  spec.ham.sets = {build_connections(GraphKind::local, n, 1)};
  spec.diss.k_max = 1;
  spec.diss.blocks = build_connections(GraphKind::local, n, 1);
  spec.state_param.assign(static_cast<std::size_t>(n), true);
  return spec;
}

}  // namespace

TEST_CASE("gate library") {
  SUBCASE("x180 under the exp(-i phi sigma/2) convention") {
    const Eigen::Matrix2cd x180 = gate("x180");
    CHECK(std::abs(x180(0, 0)) < 1e-15);
    CHECK(std::abs(x180(0, 1) - Complex(0, -1)) < 1e-15);
    CHECK(std::abs(x180(1, 0) - Complex(0, -1)) < 1e-15);
  }

  SUBCASE("SIC rotation amplitude |<1|x_sic|0>|^2 = 2/3") {
    const Eigen::Vector2cd psi = apply_to_zero(gate("x_sic"));
    CHECK(std::norm(psi[1]) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(std::norm(psi[0]) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }

  SUBCASE("virtual-Z composes additively up to global phase") {
    const Eigen::Matrix2cd a = gate("vz", 0.8) * gate("vz", 1.3);
    const Eigen::Matrix2cd b = gate("vz", 2.1);
    const Complex overlap = (a.adjoint() * b).trace();
    CHECK(std::abs(std::abs(overlap) - 2.0) < 1e-12);
  }

  SUBCASE("all gates are unitary") {
    for (const char* name : {"id", "x180", "x90", "x-90", "y90", "y-90", "x_sic"}) {
      const Eigen::Matrix2cd u = gate(name);
      CHECK((u * u.adjoint() - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    }
    const Eigen::Matrix2cd vz = gate("vz", 0.3);
    CHECK((vz * vz.adjoint() - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(gate("swap"), std::invalid_argument);
  }
}

TEST_CASE("preparation sets") {
  SUBCASE("pauli6 states span the Bloch sphere") {
    const auto gates = preparation_gates("pauli6");
    REQUIRE(gates.size() == 6);
    Eigen::MatrixXd bloch(6, 3);
    for (std::size_t i = 0; i < gates.size(); ++i) {
      const Eigen::Vector2cd psi = apply_to_zero(gates[i]);
      const Complex x = std::conj(psi[0]) * psi[1] + std::conj(psi[1]) * psi[0];
      const Complex y = Complex(0, 1) * (std::conj(psi[1]) * psi[0] - std::conj(psi[0]) * psi[1]);
      const double z = std::norm(psi[0]) - std::norm(psi[1]);
      bloch.row(static_cast<Eigen::Index>(i)) << x.real(), y.real(), z;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(bloch);
    CHECK(svd.singularValues()[2] > 1e-6);  // rank 3
  }

  SUBCASE("sic4 tetrahedron overlaps are 1/3") {
    const auto gates = preparation_gates("sic4");
    REQUIRE(gates.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = i + 1; j < 4; ++j) {
        const Complex overlap = apply_to_zero(gates[i]).adjoint() * apply_to_zero(gates[j]);
        CHECK(std::norm(overlap) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("configuration enumeration counts") {
  ExperimentPlan plan;
  plan.times_us = {0.0, 1.0};
  plan.n_shots = 10;

  plan.n_observed = 1;
  plan.prep_set = "pauli6";
  CHECK(count_configurations(plan) == 18);
  CHECK(enumerate_configurations(plan).size() == 18);

  plan.n_observed = 2;
  CHECK(count_configurations(plan) == 324);

  plan.n_observed = 5;
  plan.prep_set = "sic4";
  CHECK(count_configurations(plan) == 248832);

  // lexicographic order: prep tuples vary slowest
  plan.n_observed = 2;
  plan.prep_set = "pauli6";
  const auto configs = enumerate_configurations(plan);
  CHECK(configs[0].prep == std::vector<int>{0, 0});
  CHECK(configs[0].basis == std::vector<int>{0, 0});
  CHECK(configs[1].basis == std::vector<int>{0, 1});
  CHECK(configs[9].prep == std::vector<int>{0, 1});  // after 3^2 basis tuples
}

TEST_CASE("synthetic sampling") {
  ModelSpec spec = simple_spec(1);
  const Packing packing(spec);
  ParameterSet params = zero_parameters(spec);
  params.flat[packing.rho_offset(0)] = 1.0;
  params.flat[packing.ham_terms()[0].offset] = 0.9;            // a_x
  params.flat[packing.block_offset(0) + 8] = std::sqrt(0.02);  // M_zz dephasing

  ExperimentPlan plan;
  plan.n_observed = 1;
  plan.prep_set = "pauli6";
  plan.times_us = {0.0, 0.5, 1.0, 2.0};
  plan.n_shots = 400;

  SUBCASE("counts sum to n_shots and serialization is deterministic") {
    const TomographyDataset d1 = sample_synthetic(spec, params, plan, 99);
    const TomographyDataset d2 = sample_synthetic(spec, params, plan, 99);
    CHECK(d1.records.size() == 18 * 4);
    for (const auto& rec : d1.records) {
      long long total = 0;
      for (long long c : rec.counts) total += c;
      CHECK(total == plan.n_shots);
    }
    CHECK(dataset_to_json(d1) == dataset_to_json(d2));
    const TomographyDataset d3 = sample_synthetic(spec, params, plan, 100);
    CHECK(dataset_to_json(d1) != dataset_to_json(d3));
    // the thread count must not change the sampled data
    const TomographyDataset d4 = sample_synthetic(spec, params, plan, 99, SolverConfig{}, 4);
    CHECK(dataset_to_json(d1) == dataset_to_json(d4));
  }

  SUBCASE("JSON round trip is exact") {
    const TomographyDataset d1 = sample_synthetic(spec, params, plan, 5);
    const std::string text = dataset_to_json(d1);
    const TomographyDataset back = dataset_from_json(text);
    CHECK(dataset_to_json(back) == text);
    CHECK(back.records.size() == d1.records.size());
    CHECK(back.basis_convention == kBasisConvention);
  }

  SUBCASE("empirical frequencies match predictions within 4-sigma bands") {
    ExperimentPlan big = plan;
    big.times_us = {0.0, 0.8, 2.4};
    big.n_shots = 1000000;
    const TomographyDataset data = sample_synthetic(spec, params, big, 31, SolverConfig{}, 4);
    const auto configs = enumerate_configurations(big);
    const ProbabilityTable table =
        predict_probabilities(params, spec, configs, big.times_us, big.prep_set);
    int outside = 0, total = 0;
    for (std::size_t ci = 0; ci < configs.size(); ++ci) {
      for (std::size_t ti = 0; ti < big.times_us.size(); ++ti) {
        const auto& rec = data.records[ci * big.times_us.size() + ti];
        for (std::size_t b = 0; b < 2; ++b) {
          const double p = table.probs[ci][ti][static_cast<Eigen::Index>(b)];
          const double sigma =
              std::sqrt(std::max(p * (1 - p), 1e-12) * static_cast<double>(big.n_shots));
          const double dev = std::abs(static_cast<double>(rec.counts[b]) -
                                      p * static_cast<double>(big.n_shots));
          ++total;
          if (dev > 4 * sigma + 1.0) ++outside;
        }
      }
    }
    CHECK(static_cast<double>(outside) <= 0.01 * static_cast<double>(total));
  }
}

TEST_CASE("plan validation") {
  ExperimentPlan plan;
  plan.n_observed = 1;
  plan.times_us = {0.1, 0.2};  // must start at 0
  plan.n_shots = 5;
  CHECK_THROWS_AS(plan.validate(), std::invalid_argument);
  plan.times_us = {0.0, 0.2};
  CHECK_NOTHROW(plan.validate());
  plan.prep_set = "bogus";
  CHECK_THROWS_AS(plan.validate(), std::invalid_argument);
}
