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

#include "lindbladfit/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>
#include <json.hpp>

namespace lindbladfit {

std::string level_name(Level level) {
  switch (level) {
    case Level::none: return "none";
    case Level::local: return "local";
    case Level::nn: return "nn";
    case Level::a2a: return "a2a";
    case Level::threelocal: return "3local";
  }
  throw std::invalid_argument("bad level");
}

Level level_from_name(const std::string& name) {
  if (name == "none") return Level::none;
  if (name == "local") return Level::local;
  if (name == "nn") return Level::nn;
  if (name == "a2a") return Level::a2a;
  if (name == "3local") return Level::threelocal;
  throw std::invalid_argument("unknown lattice level: " + name);
}

double explanatory_power(double ll_small, double ll_large, long long d_small,
                         long long d_large) {
  if (d_large <= d_small)
    throw std::invalid_argument("explanatory power requires d_large > d_small");
  const double delta_d = static_cast<double>(d_large - d_small);
  const double two_dll = 2.0 * (ll_large - ll_small);
  return (two_dll - delta_d) / std::sqrt(2.0 * delta_d);
}

double wilks_pvalue(double stat, long long delta_d) {
  if (stat < 0.0) throw std::invalid_argument("statistic must be non-negative");
  if (delta_d < 1) throw std::invalid_argument("degrees of freedom must be at least 1");
  return boost::math::gamma_q(static_cast<double>(delta_d) / 2.0, stat / 2.0);
}

std::pair<double, double> aic_bic(double nll, long long d, long long n_obs) {
  if (n_obs < 1) throw std::invalid_argument("n_obs must be at least 1");
  const double aic = 2.0 * nll + 2.0 * static_cast<double>(d);
  const double bic = 2.0 * nll + static_cast<double>(d) * std::log(static_cast<double>(n_obs));
  return {aic, bic};
}

namespace {

std::optional<Move> candidate_move(const Lattice& lattice, const LatticeNode& from,
                                   char axis) {
  LatticeNode to = from;
  Level& level = axis == 'H' ? to.ham : to.diss;
  if (level == Level::threelocal) return std::nullopt;
  level = static_cast<Level>(static_cast<int>(level) + 1);
  const auto it_from = lattice.find(from);
  const auto it_to = lattice.find(to);
  if (it_from == lattice.end())
    throw std::invalid_argument("missing lattice node: " + level_name(from.ham) + "/" +
                                level_name(from.diss));
  if (it_to == lattice.end())
    throw std::invalid_argument("missing lattice node: " + level_name(to.ham) + "/" +
                                level_name(to.diss));
  Move move;
  move.from = from;
  move.to = to;
  move.axis = axis;
  move.two_delta_ll = 2.0 * (it_to->second.ll - it_from->second.ll);
  move.delta_d = it_to->second.dof - it_from->second.dof;
  move.xi = explanatory_power(it_from->second.ll, it_to->second.ll, it_from->second.dof,
                              it_to->second.dof);
  return move;
}

}  // namespace

SelectionPath greedy_path(const Lattice& lattice, double threshold) {
  SelectionPath path;
  path.threshold = threshold;
  LatticeNode node;  // (none, none)
  if (lattice.size() <= 1) {
    path.stop_node = node;
    return path;
  }
  for (;;) {
    std::vector<Move> candidates;
    for (char axis : {'H', 'D'}) {
      // Axes already at the top or absent from a partial lattice are skipped;
      // missing interior nodes still throw inside candidate_move.
      LatticeNode probe = node;
      Level& level = axis == 'H' ? probe.ham : probe.diss;
      if (level == Level::threelocal) continue;
      level = static_cast<Level>(static_cast<int>(level) + 1);
      if (lattice.find(probe) == lattice.end()) continue;
      candidates.push_back(*candidate_move(lattice, node, axis));
    }
    if (candidates.empty()) break;
    std::size_t best = 0;
    bool tie = false;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
      if (candidates[i].xi > candidates[best].xi) {
        best = i;
      } else if (candidates[i].xi == candidates[best].xi) {
        tie = true;  // break toward the Hamiltonian axis, which comes first
      }
    }
    if (candidates[best].xi > threshold) {
      Move move = candidates[best];
      move.tie = tie;
      node = move.to;
      path.accepted.push_back(move);
    } else {
      path.frontier = candidates;
      break;
    }
  }
  path.stop_node = node;
  return path;
}

void validate_lattice_rectangle(const Lattice& lattice) {
  int max_ham = 0, max_diss = 0;
  for (const auto& [node, data] : lattice) {
    max_ham = std::max(max_ham, static_cast<int>(node.ham));
    max_diss = std::max(max_diss, static_cast<int>(node.diss));
  }
  std::string missing;
  for (int h = 0; h <= max_ham; ++h) {
    for (int d = 0; d <= max_diss; ++d) {
      const LatticeNode node{static_cast<Level>(h), static_cast<Level>(d)};
      if (!lattice.count(node)) {
        if (!missing.empty()) missing += ", ";
        missing += level_name(node.ham) + "/" + level_name(node.diss);
      }
    }
  }
  if (!missing.empty())
    throw std::invalid_argument("lattice is missing nodes: " + missing);
}

Lattice lattice_from_csv(const std::string& text) {
  Lattice lattice;
  std::istringstream in(text);
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string ham, diss, nll_s, dof_s;
    if (!std::getline(fields, ham, ',') || !std::getline(fields, diss, ',') ||
        !std::getline(fields, nll_s, ',') || !std::getline(fields, dof_s, ','))
      throw std::invalid_argument("bad lattice CSV line: " + line);
    if (!header_seen) {
      header_seen = true;
      if (ham == "ham_level") continue;  // header row
    }
    LatticeNode node{level_from_name(ham), level_from_name(diss)};
    NodeData data;
    data.ll = -std::stod(nll_s);  // column stores NLL
    data.dof = std::stoll(dof_s);
    if (lattice.count(node))
      throw std::invalid_argument("duplicate lattice node in CSV: " + ham + "/" + diss);
    lattice[node] = data;
  }
  return lattice;
}

namespace {

nlohmann::ordered_json move_to_json(const Move& move) {
  return {{"from", {level_name(move.from.ham), level_name(move.from.diss)}},
          {"to", {level_name(move.to.ham), level_name(move.to.diss)}},
          {"axis", std::string(1, move.axis)},
          {"two_delta_ll", move.two_delta_ll},
          {"delta_d", move.delta_d},
          {"xi", move.xi},
          {"tie", move.tie}};
}

}  // namespace

std::string selection_path_to_json(const SelectionPath& path) {
  nlohmann::ordered_json j;
  j["threshold"] = path.threshold;
  nlohmann::ordered_json accepted = nlohmann::ordered_json::array();
  for (const auto& move : path.accepted) accepted.push_back(move_to_json(move));
  j["accepted"] = accepted;
  j["stop_node"] = {level_name(path.stop_node.ham), level_name(path.stop_node.diss)};
  nlohmann::ordered_json frontier = nlohmann::ordered_json::array();
  for (const auto& move : path.frontier) frontier.push_back(move_to_json(move));
  j["frontier"] = frontier;
  return j.dump(2);
}

std::string selection_path_table(const SelectionPath& path) {
  std::ostringstream out;
  out << "move  from            to              2dLL            dd        Xi\n";
  auto row = [&out](const char* tag, const Move& move) {
    std::ostringstream from, to;
    from << level_name(move.from.ham) << "/" << level_name(move.from.diss);
    to << level_name(move.to.ham) << "/" << level_name(move.to.diss);
    out << tag << "     " << from.str();
    for (std::size_t i = from.str().size(); i < 16; ++i) out << ' ';
    out << to.str();
    for (std::size_t i = to.str().size(); i < 16; ++i) out << ' ';
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%-15.6g %-9lld %.6g", move.two_delta_ll,
                  static_cast<long long>(move.delta_d), move.xi);
    out << buffer;
    if (move.tie) out << "  (tie)";
    out << '\n';
  };
  for (const auto& move : path.accepted) row(move.axis == 'H' ? "H+" : "D+", move);
  for (const auto& move : path.frontier) row("x ", move);
  out << "stop: " << level_name(path.stop_node.ham) << "/" << level_name(path.stop_node.diss)
      << " (threshold " << path.threshold << ")\n";
  return out.str();
}

namespace {

bool same_tuples(std::vector<std::vector<int>> a, std::vector<std::vector<int>> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

std::optional<Level> classify(const ModelSpec& spec, int k_max,
                              const std::vector<std::vector<std::vector<int>>>& sets) {
  const int n = spec.n_total;
  if (k_max == 0) return Level::none;
  if (k_max >= 1 && !same_tuples(sets[0], build_connections(GraphKind::local, n, 1)))
    return std::nullopt;
  if (k_max == 1) return Level::local;
  if (k_max == 2) {
    if (same_tuples(sets[1], build_connections(GraphKind::nearest_chain, n, 2)))
      return Level::nn;
    if (same_tuples(sets[1], build_connections(GraphKind::all_pairs, n, 2)))
      return Level::a2a;
    return std::nullopt;
  }
  if (k_max == 3) {
    if (!same_tuples(sets[1], build_connections(GraphKind::all_pairs, n, 2)))
      return std::nullopt;
    if (same_tuples(sets[2], build_connections(GraphKind::k_local_complete, n, 3)))
      return Level::threelocal;
  }
  return std::nullopt;
}

}  // namespace

std::optional<Level> ham_level_of(const ModelSpec& spec) {
  if (!spec.ham.excluded.empty()) return std::nullopt;
  return classify(spec, spec.ham.k_max, spec.ham.sets);
}

std::optional<Level> diss_level_of(const ModelSpec& spec) {
  // Dissipation places blocks at k_max only; lower levels are contained.
  const int n = spec.n_total;
  if (spec.diss.k_max == 0) return Level::none;
  if (spec.diss.k_max == 1) {
    if (same_tuples(spec.diss.blocks, build_connections(GraphKind::local, n, 1)))
      return Level::local;
    return std::nullopt;
  }
  if (spec.diss.k_max == 2) {
    if (same_tuples(spec.diss.blocks, build_connections(GraphKind::nearest_chain, n, 2)))
      return Level::nn;
    if (same_tuples(spec.diss.blocks, build_connections(GraphKind::all_pairs, n, 2)))
      return Level::a2a;
    return std::nullopt;
  }
  if (spec.diss.k_max == 3 &&
      same_tuples(spec.diss.blocks, build_connections(GraphKind::k_local_complete, n, 3)))
    return Level::threelocal;
  return std::nullopt;
}

}  // namespace lindbladfit
