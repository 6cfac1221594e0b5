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
#include <string>
#include <vector>

#include "lindbladfit/model.hpp"
#include "lindbladfit/propagator.hpp"
#include "lindbladfit/types.hpp"

namespace lindbladfit {

// ---------------------------------------------------------------------------
// Gate library (single-qubit, exp(-i*phi*sigma/2) rotation convention)
// ---------------------------------------------------------------------------

// Names: "id", "x180", "x90", "x-90", "y90", "y-90", "vz" (takes the angle),
// "x_sic" (rotation by 2*atan(sqrt(2)) about x).
Eigen::Matrix2cd gate(const std::string& name, double arg = 0.0);

// Basis-change convention: measuring x applies Ry(-pi/2), measuring y applies
// Rx(+pi/2), z applies the identity. Recorded in dataset metadata so
// synthetic data and fits always agree.
inline constexpr const char* kBasisConvention = "x:Ry(-pi/2) y:Rx(+pi/2) z:id";

// Basis index: 0 = x, 1 = y, 2 = z.
Eigen::Matrix2cd basis_change_gate(int basis_index);
inline constexpr int kNumBases = 3;

// Preparation gates applied to |0>: pauli6 prepares |0>,|1>,|+>,|->,|+i>,|-i>;
// sic4 prepares |0> and the three remaining tetrahedron states.
std::vector<Eigen::Matrix2cd> preparation_gates(const std::string& prep_set);

// ---------------------------------------------------------------------------
// Plans and configurations
// ---------------------------------------------------------------------------

struct ExperimentPlan {
  int n_observed = 0;
  std::string prep_set = "pauli6";  // "pauli6" | "sic4"
  std::string basis_set = "xyz";
  std::vector<double> times_us;  // strictly ascending, starting at 0
  long long n_shots = 0;

  void validate() const;
};

// Mirrors the dataset header fields.
std::string plan_to_json(const ExperimentPlan& plan);
ExperimentPlan plan_from_json(const std::string& text);

// One tomographic setting: per-observed-qubit preparation index and basis
// index. Hidden qubits carry no entries.
struct Configuration {
  std::vector<int> prep;
  std::vector<int> basis;

  bool operator==(const Configuration& other) const {
    return prep == other.prep && basis == other.basis;
  }
};

// Cartesian product of per-qubit preparations and bases in lexicographic
// order: preparation tuples vary slowest, qubit 0 is the most significant
// position within a tuple.
std::vector<Configuration> enumerate_configurations(const ExperimentPlan& plan);

long long count_configurations(const ExperimentPlan& plan);

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

struct TomographyRecord {
  std::vector<int> prep;
  std::vector<int> basis;
  int t_index = 0;
  std::vector<long long> counts;  // 2^n_observed entries, big-endian bit order
};

struct TomographyDataset {
  int schema_version = 1;
  int n_observed = 0;
  std::string prep_set = "pauli6";
  std::string basis_set = "xyz";
  std::string basis_convention = kBasisConvention;
  std::vector<double> times_us;
  long long n_shots = 0;
  std::vector<TomographyRecord> records;

  void validate() const;
};

std::string dataset_to_json(const TomographyDataset& dataset);
TomographyDataset dataset_from_json(const std::string& text);

// Multinomial sampling from the forward model. Counts for record (c, t) come
// from a counter-based stream keyed by (seed, configuration index, time
// index), so any record is reproducible in isolation and generation can be
// parallelized without changing the output.
TomographyDataset sample_synthetic(const ModelSpec& spec, const ParameterSet& params,
                                   const ExperimentPlan& plan, std::uint64_t seed,
                                   const SolverConfig& solver = SolverConfig{},
                                   int n_threads = 0);

}  // namespace lindbladfit
