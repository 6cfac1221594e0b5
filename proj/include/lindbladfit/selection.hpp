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

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lindbladfit/model.hpp"

namespace lindbladfit {

// Default acceptance threshold for the explanatory power: a 5% one-sided
// criterion in the Gaussian approximation. A convention, hence configurable.
inline constexpr double kDefaultXiThreshold = 1.65;

// Ordered locality levels of the (Hamiltonian x dissipator) model lattice.
enum class Level { none = 0, local = 1, nn = 2, a2a = 3, threelocal = 4 };

std::string level_name(Level level);
Level level_from_name(const std::string& name);

struct LatticeNode {
  Level ham = Level::none;
  Level diss = Level::none;

  bool operator==(const LatticeNode& other) const {
    return ham == other.ham && diss == other.diss;
  }
  bool operator<(const LatticeNode& other) const {
    if (ham != other.ham) return ham < other.ham;
    return diss < other.diss;
  }
};

struct NodeData {
  double ll = 0.0;     // log-likelihood (not NLL)
  long long dof = 0;   // generator DoF d
};

using Lattice = std::map<LatticeNode, NodeData>;

// Standardized likelihood-ratio improvement (2*dLL - dd)/sqrt(2*dd).
// Requires d_large > d_small; may be negative.
double explanatory_power(double ll_small, double ll_large, long long d_small,
                         long long d_large);

// Survival function of chi-square with delta_d degrees of freedom, via the
// regularized incomplete gamma function. Diagnostics only; Xi drives the
// acceptance decisions.
double wilks_pvalue(double stat, long long delta_d);

// AIC = 2*NLL + 2d, BIC = 2*NLL + d*ln(n_obs).
std::pair<double, double> aic_bic(double nll, long long d, long long n_obs);

struct Move {
  LatticeNode from;
  LatticeNode to;
  char axis = 'H';        // 'H' or 'D'
  double two_delta_ll = 0.0;
  long long delta_d = 0;
  double xi = 0.0;
  bool tie = false;  // both single-axis increments had exactly equal Xi
};

struct SelectionPath {
  std::vector<Move> accepted;
  LatticeNode stop_node;
  std::vector<Move> frontier;  // rejected candidate moves at the stop node
  double threshold = kDefaultXiThreshold;
};

// Greedy traversal from (none, none): at each node evaluate the <=2
// single-axis increments, move to the larger Xi if it exceeds the threshold
// (ties break toward the Hamiltonian axis and are reported), stop otherwise.
SelectionPath greedy_path(const Lattice& lattice, double threshold = kDefaultXiThreshold);

// CSV with header ham_level,diss_level,nll,dof. Note the column stores NLL.
Lattice lattice_from_csv(const std::string& text);

// Requires every node of the bounding level rectangle to be present; throws
// listing the missing nodes by name.
void validate_lattice_rectangle(const Lattice& lattice);

std::string selection_path_to_json(const SelectionPath& path);
std::string selection_path_table(const SelectionPath& path);

// Classifies a spec onto the lattice when its graphs match a named level
// (local / nearest-neighbor chain / all pairs / all triples).
std::optional<Level> ham_level_of(const ModelSpec& spec);
std::optional<Level> diss_level_of(const ModelSpec& spec);

}  // namespace lindbladfit
