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

#include "lindbladfit/pauli.hpp"

#include <algorithm>
#include <stdexcept>

namespace lindbladfit {

namespace {

int count_weight(const std::string& letters) {
  int w = 0;
  for (char c : letters) {
    if (c != 'I') ++w;
  }
  return w;
}

void check_letters(const std::string& letters) {
  for (char c : letters) {
    if (c != 'I' && c != 'X' && c != 'Y' && c != 'Z') {
      throw std::invalid_argument("invalid Pauli letter: " + std::string(1, c));
    }
  }
}

int letter_rank(char c) {
  switch (c) {
    case 'X': return 0;
    case 'Y': return 1;
    case 'Z': return 2;
    default: return 3;  // 'I', only compared between equal supports
  }
}

}  // namespace

PauliString::PauliString(std::string letters_in) : letters(std::move(letters_in)) {
  check_letters(letters);
  n_qubits = static_cast<int>(letters.size());
  weight = count_weight(letters);
}

bool canonical_less(const PauliString& a, const PauliString& b) {
  if (a.weight != b.weight) return a.weight < b.weight;
  // Support positions first, then letters, with X < Y < Z.
  std::vector<int> sa, sb;
  for (int i = 0; i < a.n_qubits; ++i)
    if (a.letters[i] != 'I') sa.push_back(i);
  for (int i = 0; i < b.n_qubits; ++i)
    if (b.letters[i] != 'I') sb.push_back(i);
  if (sa != sb) return sa < sb;
  for (int i : sa) {
    const int ra = letter_rank(a.letters[i]);
    const int rb = letter_rank(b.letters[i]);
    if (ra != rb) return ra < rb;
  }
  return false;
}

void ConnectionGraph::validate() const {
  for (int k = 1; k <= k_max(); ++k) {
    const auto& tuples = sets[k - 1];
    for (const auto& c : tuples) {
      if (static_cast<int>(c.size()) != k)
        throw std::invalid_argument("connection tuple length mismatch");
      for (std::size_t i = 0; i < c.size(); ++i) {
        if (c[i] < 0 || c[i] >= n_qubits)
          throw std::invalid_argument("connection index out of range");
        if (i > 0 && c[i] <= c[i - 1])
          throw std::invalid_argument("connection tuple not strictly increasing");
      }
    }
    for (std::size_t i = 0; i < tuples.size(); ++i)
      for (std::size_t j = i + 1; j < tuples.size(); ++j)
        if (tuples[i] == tuples[j]) throw std::invalid_argument("duplicate connection tuple");
  }
  if (k_max() > n_qubits) throw std::invalid_argument("k_max exceeds qubit count");
}

Eigen::Matrix2cd pauli_letter(char letter) {
  Eigen::Matrix2cd m = Eigen::Matrix2cd::Zero();
  switch (letter) {
    case 'I':
      m(0, 0) = 1.0;
      m(1, 1) = 1.0;
      break;
    case 'X':
      m(0, 1) = 1.0;
      m(1, 0) = 1.0;
      break;
    case 'Y':
      m(0, 1) = Complex(0, -1);
      m(1, 0) = Complex(0, 1);
      break;
    case 'Z':
      m(0, 0) = 1.0;
      m(1, 1) = -1.0;
      break;
    default:
      throw std::invalid_argument("invalid Pauli letter");
  }
  return m;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Matrix embed_string(const PauliString& local, const std::vector<int>& target_qubits,
                    int n_total) {
  if (static_cast<int>(target_qubits.size()) != local.n_qubits)
    throw std::invalid_argument("target tuple length does not match string size");
  for (std::size_t i = 0; i < target_qubits.size(); ++i) {
    if (target_qubits[i] < 0 || target_qubits[i] >= n_total)
      throw std::invalid_argument("target qubit index out of range");
    if (i > 0 && target_qubits[i] <= target_qubits[i - 1])
      throw std::invalid_argument("target qubits must be strictly increasing");
  }
  std::string global(static_cast<std::size_t>(n_total), 'I');
  for (std::size_t i = 0; i < target_qubits.size(); ++i)
    global[static_cast<std::size_t>(target_qubits[i])] = local.letters[i];

  Matrix out = Matrix::Ones(1, 1);
  for (char c : global) out = kron(out, pauli_letter(c));
  return out;
}

BlockBasis enumerate_block_basis(int k) {
  if (k < 1) throw std::invalid_argument("block locality must be at least 1");
  const long long total = 1LL << (2 * k);  // 4^k
  BlockBasis basis;
  basis.k = k;
  basis.strings.reserve(static_cast<std::size_t>(total - 1));
  static const char kLetters[4] = {'I', 'X', 'Y', 'Z'};
  for (long long code = 1; code < total; ++code) {
    std::string letters(static_cast<std::size_t>(k), 'I');
    long long rem = code;
    for (int site = k - 1; site >= 0; --site) {
      letters[static_cast<std::size_t>(site)] = kLetters[rem % 4];
      rem /= 4;
    }
    basis.strings.emplace_back(letters);
  }
  std::sort(basis.strings.begin(), basis.strings.end(), canonical_less);
  return basis;
}

Matrix embed_operator(const Matrix& local, const std::vector<int>& target_qubits, int n_total) {
  const int k = static_cast<int>(target_qubits.size());
  const long long local_dim = 1LL << k;
  if (local.rows() != local_dim || local.cols() != local_dim)
    throw std::invalid_argument("local operator dimension does not match target count");
  for (std::size_t i = 0; i < target_qubits.size(); ++i) {
    if (target_qubits[i] < 0 || target_qubits[i] >= n_total)
      throw std::invalid_argument("target qubit index out of range");
    if (i > 0 && target_qubits[i] <= target_qubits[i - 1])
      throw std::invalid_argument("target qubits must be strictly increasing");
  }
  const long long dim = 1LL << n_total;
  // Bit position of each qubit in the big-endian index.
  std::vector<int> shifts(target_qubits.size());
  for (std::size_t i = 0; i < target_qubits.size(); ++i)
    shifts[i] = n_total - 1 - target_qubits[i];
  long long rest_mask = dim - 1;
  for (int shift : shifts) rest_mask &= ~(1LL << shift);

  Matrix out = Matrix::Zero(dim, dim);
  // Enumerate non-target bit patterns via subset iteration of rest_mask.
  long long rest = 0;
  do {
    for (long long i = 0; i < local_dim; ++i) {
      long long row = rest;
      for (int b = 0; b < k; ++b)
        if ((i >> (k - 1 - b)) & 1LL) row |= 1LL << shifts[static_cast<std::size_t>(b)];
      for (long long j = 0; j < local_dim; ++j) {
        if (local(i, j) == Complex(0, 0)) continue;
        long long col = rest;
        for (int b = 0; b < k; ++b)
          if ((j >> (k - 1 - b)) & 1LL) col |= 1LL << shifts[static_cast<std::size_t>(b)];
        out(row, col) = local(i, j);
      }
    }
    rest = (rest - rest_mask) & rest_mask;
  } while (rest != 0);
  return out;
}

GraphKind graph_kind_from_string(const std::string& name) {
  if (name == "local") return GraphKind::local;
  if (name == "nearest_chain") return GraphKind::nearest_chain;
  if (name == "all_pairs") return GraphKind::all_pairs;
  if (name == "k_local_complete") return GraphKind::k_local_complete;
  throw std::invalid_argument("unsupported connection kind: " + name);
}

std::vector<std::vector<int>> build_connections(GraphKind kind, int n_qubits, int k) {
  if (n_qubits < k) throw std::invalid_argument("n_qubits must be at least k");
  std::vector<std::vector<int>> out;
  switch (kind) {
    case GraphKind::local:
      for (int q = 0; q < n_qubits; ++q) out.push_back({q});
      break;
    case GraphKind::nearest_chain:
      for (int q = 0; q + 1 < n_qubits; ++q) out.push_back({q, q + 1});
      break;
    case GraphKind::all_pairs:
      for (int a = 0; a < n_qubits; ++a)
        for (int b = a + 1; b < n_qubits; ++b) out.push_back({a, b});
      break;
    case GraphKind::k_local_complete: {
      std::vector<int> tuple(static_cast<std::size_t>(k));
      for (int i = 0; i < k; ++i) tuple[static_cast<std::size_t>(i)] = i;
      for (;;) {
        out.push_back(tuple);
        int pos = k - 1;
        while (pos >= 0 && tuple[static_cast<std::size_t>(pos)] == n_qubits - k + pos) --pos;
        if (pos < 0) break;
        ++tuple[static_cast<std::size_t>(pos)];
        for (int i = pos + 1; i < k; ++i)
          tuple[static_cast<std::size_t>(i)] = tuple[static_cast<std::size_t>(i - 1)] + 1;
      }
      break;
    }
  }
  return out;
}

}  // namespace lindbladfit
