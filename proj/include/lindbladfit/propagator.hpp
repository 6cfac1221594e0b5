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

#include "lindbladfit/model.hpp"
#include "lindbladfit/types.hpp"

namespace lindbladfit {

enum class StateValidation { none, basic, full };

struct SolverConfig {
  double rtol = 1e-6;
  double atol = 1e-6;
  long long max_steps = 1000000;  // per trajectory
  double h_init = 0.0;            // 0 selects the automatic heuristic
  StateValidation validation = StateValidation::full;
};

// Compiled action rho -> -i[H(t), rho] + D(rho). Dissipation is always
// time-independent; the Hamiltonian may interpolate anchored coefficients.
class LindbladGenerator {
 public:
  struct HamTerm {
    Matrix op;             // embedded Pauli string
    RealVector coeffs;     // one value, or one per anchor
    int k = 0;
    int packed_offset = -1;  // offset of anchor 0 in the packed vector
  };

  struct DissBlock {
    std::vector<int> qubits;
    int m = 0;                   // 4^k - 1
    Matrix M;                    // jump coefficients, rows are jump operators
    std::vector<Matrix> basis;   // embedded block basis strings
    std::vector<Matrix> jumps;   // embedded jump operators, rows of M
    int packed_offset = -1;
  };

  static LindbladGenerator compile(const ParameterSet& params, const ModelSpec& spec);
  // Raw time-independent generator (used by oracles and tests).
  static LindbladGenerator from_operators(int n_qubits, const Matrix& hamiltonian,
                                          const std::vector<Matrix>& jump_ops);

  long long dim() const { return dim_; }
  int n_qubits() const { return n_qubits_; }
  bool time_dependent() const { return time_dependence_.type == TimeDependenceType::anchors; }
  const TimeDependence& time_dependence() const { return time_dependence_; }
  std::vector<double> anchor_times() const { return time_dependence_.anchor_times(); }

  Matrix hamiltonian(double t) const;
  // drho/dt
  Matrix apply(const Matrix& rho, double t) const;
  // Heisenberg-picture adjoint of the generator
  Matrix apply_adjoint(const Matrix& x, double t) const;

  const std::vector<HamTerm>& ham_terms() const { return ham_terms_; }
  const std::vector<DissBlock>& diss_blocks() const { return diss_blocks_; }
  const std::vector<Matrix>& jump_ops() const { return all_jumps_; }

 private:
  long long dim_ = 0;
  int n_qubits_ = 0;
  TimeDependence time_dependence_;
  std::vector<HamTerm> ham_terms_;
  std::vector<DissBlock> diss_blocks_;
  std::vector<Matrix> all_jumps_;
  Matrix anticomm_sum_;  // sum_a L_a^dag L_a
  Matrix h_static_;      // cached H when time-independent
  bool has_static_h_ = false;
};

// One accepted Tsit5 step; y is the state at the step start. Stored so a
// reverse pass can recompute stages without re-running step control.
struct TrajectoryStep {
  double t = 0.0;
  double h = 0.0;
  Matrix y;
};

struct Trajectory {
  std::vector<Matrix> saved;               // states at the save times
  std::vector<TrajectoryStep> steps;       // accepted steps in order
  std::vector<std::size_t> steps_before_save;  // #steps completed at each save
  long long n_steps = 0;
  long long n_rejected = 0;
};

// Adaptive Tsit5 with a PI controller. States are reported exactly at
// save_times; anchor times are inserted as step boundaries.
std::vector<Matrix> evolve(const LindbladGenerator& gen, const Matrix& rho0,
                           const std::vector<double>& save_times, const SolverConfig& config);

// Same integration, additionally recording the accepted steps.
Trajectory evolve_recorded(const LindbladGenerator& gen, const Matrix& rho0,
                           const std::vector<double>& save_times, const SolverConfig& config);

// Vectorized generator under column stacking, vec(A rho B) = (B^T kron A) vec(rho):
//   -i(I kron H - H^T kron I)
//   + sum_a (conj(L_a) kron L_a - I kron (L_a^dag L_a)/2 - (L_a^dag L_a)^T kron I/2).
// Throws for time-dependent generators.
Matrix superoperator_oracle(const LindbladGenerator& gen);

// Scaling-and-squaring matrix exponential (wraps Eigen's Pade implementation).
Matrix matrix_exponential(const Matrix& a);

// Tsit5 Butcher tableau, exposed for order-condition checks in tests.
struct Tsit5Tableau {
  static const double c[7];
  static const double a[7][6];
  static const double b[7];       // fifth-order weights
  static const double btilde[7];  // weights of the embedded error estimate
};

}  // namespace lindbladfit
