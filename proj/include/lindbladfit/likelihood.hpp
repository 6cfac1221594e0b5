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

#include <vector>

#include "lindbladfit/experiment.hpp"
#include "lindbladfit/model.hpp"
#include "lindbladfit/propagator.hpp"
#include "lindbladfit/types.hpp"

namespace lindbladfit {

// Probability floor: entries below kProbFloor are clamped before
// renormalization (integration noise can leave tiny negative diagonals).
inline constexpr double kProbFloor = 1e-12;

// Clamp-and-renormalize in place; returns the pre-normalization sum.
double floor_and_renormalize(RealVector& probs);

// Per (configuration, time) probability vectors over the 2^n_observed
// big-endian bit strings of the observed register. Hidden qubits are traced
// out before the diagonal is read.
struct ProbabilityTable {
  std::vector<std::vector<RealVector>> probs;  // [config][time]
};

ProbabilityTable predict_probabilities(const ParameterSet& params, const ModelSpec& spec,
                                       const std::vector<Configuration>& configs,
                                       const std::vector<double>& times_us,
                                       const std::string& prep_set = "pauli6",
                                       const SolverConfig& solver = SolverConfig{},
                                       int n_threads = 0);

// log Multinomial(x; p, N) including the multinomial coefficient (constant in
// the parameters; kept so absolute values are comparable across tools).
double multinomial_ll(const std::vector<long long>& counts, const RealVector& probs,
                      long long n_shots);

// Record selection for minibatching: indices into dataset.records.
double total_ll(const ParameterSet& params, const ModelSpec& spec,
                const TomographyDataset& dataset, const SolverConfig& solver = SolverConfig{},
                int n_threads = 0);

RealVector ll_gradient(const ParameterSet& params, const ModelSpec& spec,
                       const TomographyDataset& dataset,
                       const SolverConfig& solver = SolverConfig{}, int n_threads = 0);

// Restricted variants used by the minibatched optimizer. record_indices must
// be sorted; the reduction order is fixed so results are thread-invariant.
double total_ll_subset(const ParameterSet& params, const ModelSpec& spec,
                       const TomographyDataset& dataset,
                       const std::vector<std::size_t>& record_indices,
                       const SolverConfig& solver, int n_threads,
                       RealVector* gradient_out);

}  // namespace lindbladfit
