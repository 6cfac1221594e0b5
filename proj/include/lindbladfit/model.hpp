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

#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "lindbladfit/pauli.hpp"
#include "lindbladfit/types.hpp"

namespace lindbladfit {

// ---------------------------------------------------------------------------
// Structural model choice
// ---------------------------------------------------------------------------

enum class TimeDependenceType { none, anchors };

// Piecewise-linear anchor schedule for Hamiltonian coefficients. Outside
// [t_start, t_end] coefficients extrapolate as constants.
struct TimeDependence {
  TimeDependenceType type = TimeDependenceType::none;
  int count = 0;
  double t_start = 0.0;
  double t_end = 0.0;

  int n_anchors() const { return type == TimeDependenceType::anchors ? count : 1; }
  std::vector<double> anchor_times() const;
};

// Linear interpolation weights between the two anchors bracketing t.
struct AnchorInterp {
  int i0 = 0;
  int i1 = 0;
  double w0 = 1.0;
  double w1 = 0.0;
};

AnchorInterp anchor_interp(const TimeDependence& td, double t);

struct HamStructure {
  int k_max = 0;                                    // 0 means no Hamiltonian terms
  std::vector<std::vector<std::vector<int>>> sets;  // sets[k-1] = C_k
  // Individually excluded coefficients (k, connection index, Pauli odometer
  // index). Lets nested model pairs differ by a single coefficient.
  std::set<std::tuple<int, int, int>> excluded;

  bool term_included(int k, int c_index, int pauli_index) const {
    return excluded.find({k, c_index, pauli_index}) == excluded.end();
  }
};

struct DissStructure {
  int k_max = 0;                          // 0 means no dissipation
  std::vector<std::vector<int>> blocks;   // connections at locality k_max
};

struct ModelSpec {
  int n_total = 0;
  std::vector<int> observed;       // ordered; complement is hidden
  HamStructure ham;
  DissStructure diss;
  TimeDependence time_dependence;
  std::vector<bool> state_param;   // per qubit: parameterized vs fixed |0><0|

  std::vector<int> hidden() const;
  int n_observed() const { return static_cast<int>(observed.size()); }
  int n_hidden() const { return n_total - n_observed(); }
  long long dim() const { return 1LL << n_total; }
  void validate() const;
};

// ---------------------------------------------------------------------------
// Canonical flat parameter packing
// ---------------------------------------------------------------------------
//
// Order: theta_rho qubit-major row-major; then theta_H by ascending k /
// lexicographic connection / odometer Pauli index (x<y<z) / anchor index;
// then theta_L per block lexicographic, row-major.

struct HamTermIndex {
  int k = 0;
  int c_index = 0;          // index into ham.sets[k-1]
  int pauli_index = 0;      // odometer over 3^k letter combinations
  int offset = 0;           // flat offset of anchor 0
};

class Packing {
 public:
  Packing() = default;
  explicit Packing(const ModelSpec& spec);

  int size() const { return size_; }
  int n_anchors() const { return n_anchors_; }

  const std::vector<int>& rho_qubits() const { return rho_qubits_; }
  int rho_offset(int qubit) const;  // -1 when the qubit state is fixed

  const std::vector<HamTermIndex>& ham_terms() const { return ham_terms_; }

  int n_blocks() const { return static_cast<int>(block_offsets_.size()); }
  int block_offset(int block_index) const { return block_offsets_[block_index]; }
  int block_side() const { return block_side_; }  // 4^k_max_D - 1

 private:
  int size_ = 0;
  int n_anchors_ = 1;
  std::vector<int> rho_qubits_;
  std::vector<int> rho_offsets_;  // indexed by qubit, -1 when absent
  std::vector<HamTermIndex> ham_terms_;
  std::vector<int> block_offsets_;
  int block_side_ = 0;
};

// Real-valued packed parameters {theta_rho, theta_H, theta_L}.
struct ParameterSet {
  RealVector flat;

  int size() const { return static_cast<int>(flat.size()); }
};

ParameterSet zero_parameters(const ModelSpec& spec);

// Pauli letters of an odometer index on a k-site block, e.g. k=2, index 5 ->
// "YZ" (last site fastest, X<Y<Z).
std::string pauli_letters_from_odometer(int k, int pauli_index);

// ---------------------------------------------------------------------------
// Parameter-to-object maps
// ---------------------------------------------------------------------------

// Single-qubit density matrix from a real 2x2 array via the Cholesky-like
// factor B = tril(theta) + i*striu(theta)^T, rho = B B^dag / tr(B B^dag).
Eigen::Matrix2cd single_qubit_state(const Eigen::Matrix2d& theta);

// Full tensor-product initial state; unparameterized qubits are |0><0|.
Matrix build_initial_state(const ParameterSet& params, const ModelSpec& spec);

// H(t) = sum over included terms of a(t) * embedded Pauli string, Hermitian,
// units rad/us. Anchored coefficients interpolate linearly in t.
Matrix build_hamiltonian(const ParameterSet& params, const ModelSpec& spec, double t);

// One dissipative block: M = tril(theta) + i*striu(theta)^T over the
// canonical block basis, D the Eq.-4-style coefficient matrix such that the
// dissipator is sum_{mn} D_mn (P_m rho P_n - {P_n P_m, rho}/2). With rows of
// M as jump-operator coefficients this gives D = (M^dag M)^T.
struct DissipatorBlock {
  std::vector<int> qubits;
  Matrix M;
  Matrix D;
};

std::vector<DissipatorBlock> build_dissipator(const ParameterSet& params,
                                              const ModelSpec& spec);

// Diagonalized form: rates Gamma_i >= 0 and block-local jump operators L_i
// (dimension 2^k) with the same action as the D-matrix form.
struct DiagonalJumpForm {
  std::vector<int> qubits;
  std::vector<double> rates;
  std::vector<Matrix> jump_ops;
};

DiagonalJumpForm diagonal_jump_form(const DissipatorBlock& block);

// ---------------------------------------------------------------------------
// Degrees of freedom
// ---------------------------------------------------------------------------

struct DofCount {
  long long h_dof = 0;
  long long d_dof = 0;
  long long state_dof = 0;       // reported separately, excluded from LR delta-d
  long long gauge_adjustment = 0;  // -3 per hidden qubit
  long long generator_dof = 0;     // h + d + gauge
};

// Independent real parameters. Dissipator DoF uses unique-parameter counting
// across overlapping blocks: each unique embedded string contributes 1, each
// unordered pair of distinct strings co-occurring in at least one block
// contributes 2. A single isolated k-block gives (4^k-1)^2.
DofCount dof_count(const ModelSpec& spec);

// ---------------------------------------------------------------------------
// Nesting and warm starts
// ---------------------------------------------------------------------------

// Copies parameters of a nested smaller model into a larger one on the same
// qubit register; new coefficients are zero and shared dissipator blocks are
// scaled by 1/sqrt(multiplicity) so the generator action is preserved.
// Throws when spec_small is not structurally nested in spec_large.
ParameterSet embed_warm_start(const ParameterSet& params_small, const ModelSpec& spec_small,
                              const ModelSpec& spec_large);

// Warm start onto a register extended by additional hidden qubits (observed
// set unchanged, small register is a prefix). New qubits start near |0><0|
// (theta_00 = 1) with all couplings zero, so the likelihood is preserved.
ParameterSet extend_register(const ParameterSet& params_small, const ModelSpec& spec_small,
                             const ModelSpec& spec_large);

bool is_nested(const ModelSpec& small, const ModelSpec& large);

// ---------------------------------------------------------------------------
// Serialization (JSON field names: n_total, observed, ham, diss,
// time_dependence, state_param)
// ---------------------------------------------------------------------------

std::string spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const std::string& text);

std::string packing_descriptor_json(const ModelSpec& spec);

// Ground-truth bundle: a ModelSpec together with a flat parameter array.
std::string model_bundle_to_json(const ModelSpec& spec, const ParameterSet& params);
std::pair<ModelSpec, ParameterSet> model_bundle_from_json(const std::string& text);

}  // namespace lindbladfit
