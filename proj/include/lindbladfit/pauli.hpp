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

#include <string>
#include <vector>

#include "lindbladfit/types.hpp"

namespace lindbladfit {

// Tensor product of single-qubit operators from {I, X, Y, Z}. Qubit 0 is the
// leftmost tensor factor; basis states are indexed big-endian (qubit 0 is the
// most significant bit). Qubit indices are 0-based throughout.
struct PauliString {
  int n_qubits = 0;
  std::string letters;  // over 'I','X','Y','Z', length n_qubits
  int weight = 0;       // number of non-identity letters

  PauliString() = default;
  explicit PauliString(std::string letters_in);

  bool operator==(const PauliString& other) const { return letters == other.letters; }
  bool operator!=(const PauliString& other) const { return !(*this == other); }
};

// Orders by (weight, support positions, letters with X<Y<Z). This is the
// canonical order used for parameter packing and warm starts.
bool canonical_less(const PauliString& a, const PauliString& b);

// Allowed k-qubit connections per locality level, C_k for k = 1..k_max.
// Tuples are strictly increasing qubit indices.
struct ConnectionGraph {
  int n_qubits = 0;
  std::vector<std::vector<std::vector<int>>> sets;  // sets[k-1] = C_k

  int k_max() const { return static_cast<int>(sets.size()); }
  void validate() const;
};

// The 4^k - 1 non-identity Pauli strings on a k-qubit block, canonical order.
struct BlockBasis {
  int k = 0;
  std::vector<PauliString> strings;
};

Eigen::Matrix2cd pauli_letter(char letter);

// Dense 2^n_total operator placing each letter of `local` on its target qubit
// and the identity elsewhere. target_qubits must be strictly increasing.
Matrix embed_string(const PauliString& local, const std::vector<int>& target_qubits,
                    int n_total);

BlockBasis enumerate_block_basis(int k);

enum class GraphKind { local, nearest_chain, all_pairs, k_local_complete };

GraphKind graph_kind_from_string(const std::string& name);

// The C_k component for the requested graph family.
std::vector<std::vector<int>> build_connections(GraphKind kind, int n_qubits, int k);

Matrix kron(const Matrix& a, const Matrix& b);

// Places a 2^k-dimensional operator on the given qubits (strictly
// increasing) with the identity elsewhere.
Matrix embed_operator(const Matrix& local, const std::vector<int>& target_qubits, int n_total);

}  // namespace lindbladfit
