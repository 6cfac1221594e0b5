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

#include "lindbladfit/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <Eigen/Eigenvalues>
#include <json.hpp>

namespace lindbladfit {

namespace {

long long ipow(long long base, int exp) {
  long long r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

// theta (real, row-major semantics) -> complex lower-triangular with real
// diagonal: M_ab = theta_ab + i*theta_ba for a > b, M_aa = theta_aa.
Matrix lower_triangular_from_real(const Eigen::Ref<const RealMatrix>& theta) {
  const Eigen::Index n = theta.rows();
  Matrix m = Matrix::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    m(a, a) = theta(a, a);
    for (Eigen::Index b = 0; b < a; ++b) m(a, b) = Complex(theta(a, b), theta(b, a));
  }
  return m;
}

}  // namespace

std::vector<double> TimeDependence::anchor_times() const {
  if (type != TimeDependenceType::anchors) return {};
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    out[static_cast<std::size_t>(i)] =
        t_start + (t_end - t_start) * static_cast<double>(i) / static_cast<double>(count - 1);
  return out;
}

AnchorInterp anchor_interp(const TimeDependence& td, double t) {
  AnchorInterp w;
  if (td.type != TimeDependenceType::anchors) return w;
  const int n = td.count;
  if (t <= td.t_start) return {0, 0, 1.0, 0.0};
  if (t >= td.t_end) return {n - 1, n - 1, 1.0, 0.0};
  const double dt = (td.t_end - td.t_start) / static_cast<double>(n - 1);
  int seg = static_cast<int>((t - td.t_start) / dt);
  if (seg > n - 2) seg = n - 2;
  const double tau = td.t_start + seg * dt;
  double w1 = (t - tau) / dt;
  if (w1 < 0.0) w1 = 0.0;
  if (w1 > 1.0) w1 = 1.0;
  return {seg, seg + 1, 1.0 - w1, w1};
}

std::vector<int> ModelSpec::hidden() const {
  std::vector<int> out;
  for (int q = 0; q < n_total; ++q)
    if (std::find(observed.begin(), observed.end(), q) == observed.end()) out.push_back(q);
  return out;
}

void ModelSpec::validate() const {
  if (n_total < 1) throw std::invalid_argument("n_total must be positive");
  if (observed.empty()) throw std::invalid_argument("observed set must be non-empty");
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (observed[i] < 0 || observed[i] >= n_total)
      throw std::invalid_argument("observed index out of range");
    if (i > 0 && observed[i] <= observed[i - 1])
      throw std::invalid_argument("observed indices must be strictly increasing");
  }
  if (static_cast<int>(state_param.size()) != n_total)
    throw std::invalid_argument("state_param must have one flag per qubit");
  if (ham.k_max != static_cast<int>(ham.sets.size()))
    throw std::invalid_argument("ham k_max inconsistent with connection sets");
  ConnectionGraph hg{n_total, ham.sets};
  hg.validate();
  for (const auto& [k, c, p] : ham.excluded) {
    if (k < 1 || k > ham.k_max) throw std::invalid_argument("excluded term: bad k");
    if (c < 0 || c >= static_cast<int>(ham.sets[static_cast<std::size_t>(k - 1)].size()))
      throw std::invalid_argument("excluded term: bad connection index");
    if (p < 0 || p >= ipow(3, k)) throw std::invalid_argument("excluded term: bad Pauli index");
  }
  if (diss.k_max > 0) {
    ConnectionGraph dg{n_total, {}};
    dg.sets.assign(static_cast<std::size_t>(diss.k_max), {});
    dg.sets[static_cast<std::size_t>(diss.k_max - 1)] = diss.blocks;
    dg.validate();
  } else if (!diss.blocks.empty()) {
    throw std::invalid_argument("diss blocks given with k_max = 0");
  }
  if (time_dependence.type == TimeDependenceType::anchors) {
    if (time_dependence.count < 2) throw std::invalid_argument("need at least 2 anchors");
    if (!(time_dependence.t_end > time_dependence.t_start))
      throw std::invalid_argument("anchor range must be increasing");
  }
}

Packing::Packing(const ModelSpec& spec) {
  spec.validate();
  n_anchors_ = spec.time_dependence.n_anchors();
  rho_offsets_.assign(static_cast<std::size_t>(spec.n_total), -1);
  int offset = 0;
  for (int q = 0; q < spec.n_total; ++q) {
    if (spec.state_param[static_cast<std::size_t>(q)]) {
      rho_qubits_.push_back(q);
      rho_offsets_[static_cast<std::size_t>(q)] = offset;
      offset += 4;
    }
  }
  for (int k = 1; k <= spec.ham.k_max; ++k) {
    const auto& tuples = spec.ham.sets[static_cast<std::size_t>(k - 1)];
    const int n_pauli = static_cast<int>(ipow(3, k));
    for (int c = 0; c < static_cast<int>(tuples.size()); ++c) {
      for (int p = 0; p < n_pauli; ++p) {
        if (!spec.ham.term_included(k, c, p)) continue;
        ham_terms_.push_back({k, c, p, offset});
        offset += n_anchors_;
      }
    }
  }
  if (spec.diss.k_max > 0) {
    block_side_ = static_cast<int>(ipow(4, spec.diss.k_max) - 1);
    for (std::size_t b = 0; b < spec.diss.blocks.size(); ++b) {
      block_offsets_.push_back(offset);
      offset += block_side_ * block_side_;
    }
  }
  size_ = offset;
}

int Packing::rho_offset(int qubit) const {
  return rho_offsets_[static_cast<std::size_t>(qubit)];
}

ParameterSet zero_parameters(const ModelSpec& spec) {
  return ParameterSet{RealVector::Zero(Packing(spec).size())};
}

std::string pauli_letters_from_odometer(int k, int pauli_index) {
  static const char kLetters[3] = {'X', 'Y', 'Z'};
  std::string letters(static_cast<std::size_t>(k), 'X');
  int rem = pauli_index;
  for (int site = k - 1; site >= 0; --site) {
    letters[static_cast<std::size_t>(site)] = kLetters[rem % 3];
    rem /= 3;
  }
  return letters;
}

Eigen::Matrix2cd single_qubit_state(const Eigen::Matrix2d& theta) {
  Eigen::Matrix2cd b = Eigen::Matrix2cd::Zero();
  b(0, 0) = theta(0, 0);
  b(1, 1) = theta(1, 1);
  b(1, 0) = Complex(theta(1, 0), theta(0, 1));
  Eigen::Matrix2cd bb = b * b.adjoint();
  const double trace = bb.real().trace();
  if (trace <= 0.0) throw std::invalid_argument("degenerate state parameters (tr BB^dag = 0)");
  return bb / trace;
}

Matrix build_initial_state(const ParameterSet& params, const ModelSpec& spec) {
  const Packing packing(spec);
  if (params.size() != packing.size())
    throw std::invalid_argument("parameter vector size does not match spec");
  Matrix rho = Matrix::Ones(1, 1);
  for (int q = 0; q < spec.n_total; ++q) {
    Eigen::Matrix2cd rq;
    const int off = packing.rho_offset(q);
    if (off >= 0) {
      Eigen::Matrix2d theta;
      theta << params.flat[off], params.flat[off + 1], params.flat[off + 2],
          params.flat[off + 3];
      rq = single_qubit_state(theta);
    } else {
      rq = Eigen::Matrix2cd::Zero();
      rq(0, 0) = 1.0;
    }
    rho = kron(rho, Matrix(rq));
  }
  return rho;
}

Matrix build_hamiltonian(const ParameterSet& params, const ModelSpec& spec, double t) {
  const Packing packing(spec);
  if (params.size() != packing.size())
    throw std::invalid_argument("parameter vector size does not match spec");
  const long long dim = spec.dim();
  Matrix h = Matrix::Zero(dim, dim);
  const AnchorInterp w = anchor_interp(spec.time_dependence, t);
  for (const auto& term : packing.ham_terms()) {
    double coeff;
    if (packing.n_anchors() == 1) {
      coeff = params.flat[term.offset];
    } else {
      coeff = w.w0 * params.flat[term.offset + w.i0] + w.w1 * params.flat[term.offset + w.i1];
    }
    if (coeff == 0.0) continue;
    const auto& qubits = spec.ham.sets[static_cast<std::size_t>(term.k - 1)]
                                      [static_cast<std::size_t>(term.c_index)];
    const PauliString local(pauli_letters_from_odometer(term.k, term.pauli_index));
    h += coeff * embed_string(local, qubits, spec.n_total);
  }
  return h;
}

std::vector<DissipatorBlock> build_dissipator(const ParameterSet& params,
                                              const ModelSpec& spec) {
  const Packing packing(spec);
  if (params.size() != packing.size())
    throw std::invalid_argument("parameter vector size does not match spec");
  std::vector<DissipatorBlock> blocks;
  if (spec.diss.k_max == 0) return blocks;
  const int side = packing.block_side();
  for (std::size_t b = 0; b < spec.diss.blocks.size(); ++b) {
    const int off = packing.block_offset(static_cast<int>(b));
    RealMatrix theta(side, side);
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c) theta(r, c) = params.flat[off + r * side + c];
    DissipatorBlock block;
    block.qubits = spec.diss.blocks[b];
    block.M = lower_triangular_from_real(theta);
    block.D = (block.M.adjoint() * block.M).transpose();
    blocks.push_back(std::move(block));
  }
  return blocks;
}

DiagonalJumpForm diagonal_jump_form(const DissipatorBlock& block) {
  const int k = static_cast<int>(block.qubits.size());
  const BlockBasis basis = enumerate_block_basis(k);
  const long long local_dim = ipow(2, k);
  std::vector<Matrix> basis_ops;
  basis_ops.reserve(basis.strings.size());
  std::vector<int> local_sites(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) local_sites[static_cast<std::size_t>(i)] = i;
  for (const auto& s : basis.strings) basis_ops.push_back(embed_string(s, local_sites, k));

  Eigen::SelfAdjointEigenSolver<Matrix> solver(block.D);
  DiagonalJumpForm form;
  form.qubits = block.qubits;
  for (int i = 0; i < solver.eigenvalues().size(); ++i) {
    const double rate = solver.eigenvalues()[i];
    if (std::abs(rate) < 1e-14) continue;
    Matrix op = Matrix::Zero(local_dim, local_dim);
    for (std::size_t m = 0; m < basis_ops.size(); ++m)
      op += solver.eigenvectors()(static_cast<Eigen::Index>(m), i) * basis_ops[m];
    form.rates.push_back(rate);
    form.jump_ops.push_back(std::move(op));
  }
  return form;
}

DofCount dof_count(const ModelSpec& spec) {
  spec.validate();
  DofCount out;
  const int n_anchors = spec.time_dependence.n_anchors();
  for (int k = 1; k <= spec.ham.k_max; ++k) {
    const auto& tuples = spec.ham.sets[static_cast<std::size_t>(k - 1)];
    const long long n_pauli = ipow(3, k);
    for (int c = 0; c < static_cast<int>(tuples.size()); ++c) {
      long long included = 0;
      for (int p = 0; p < n_pauli; ++p)
        if (spec.ham.term_included(k, c, p)) ++included;
      out.h_dof += included * n_anchors;
    }
  }
  if (spec.diss.k_max > 0) {
    const BlockBasis basis = enumerate_block_basis(spec.diss.k_max);
    std::unordered_map<std::string, int> string_ids;
    std::unordered_set<long long> pairs;
    for (const auto& block : spec.diss.blocks) {
      std::vector<int> ids;
      ids.reserve(basis.strings.size());
      for (const auto& s : basis.strings) {
        std::string global(static_cast<std::size_t>(spec.n_total), 'I');
        for (std::size_t i = 0; i < block.size(); ++i)
          global[static_cast<std::size_t>(block[i])] = s.letters[i];
        auto [it, inserted] =
            string_ids.emplace(global, static_cast<int>(string_ids.size()));
        ids.push_back(it->second);
      }
      for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t j = i + 1; j < ids.size(); ++j) {
          const long long lo = std::min(ids[i], ids[j]);
          const long long hi = std::max(ids[i], ids[j]);
          pairs.insert(lo * (1LL << 32) + hi);
        }
      }
    }
    out.d_dof = static_cast<long long>(string_ids.size()) +
                2LL * static_cast<long long>(pairs.size());
  }
  for (int q = 0; q < spec.n_total; ++q)
    if (spec.state_param[static_cast<std::size_t>(q)]) out.state_dof += 4;
  out.gauge_adjustment = -3LL * spec.n_hidden();
  out.generator_dof = out.h_dof + out.d_dof + out.gauge_adjustment;
  return out;
}

namespace {

bool tuple_in(const std::vector<std::vector<int>>& tuples, const std::vector<int>& t,
              int* index = nullptr) {
  for (std::size_t i = 0; i < tuples.size(); ++i) {
    if (tuples[i] == t) {
      if (index) *index = static_cast<int>(i);
      return true;
    }
  }
  return false;
}

bool subset(const std::vector<int>& small, const std::vector<int>& large) {
  for (int q : small)
    if (std::find(large.begin(), large.end(), q) == large.end()) return false;
  return true;
}

bool time_dependence_nested(const ModelSpec& small, const ModelSpec& large) {
  const auto& ts = small.time_dependence;
  const auto& tl = large.time_dependence;
  if (ts.type == TimeDependenceType::none) return true;
  return tl.type == TimeDependenceType::anchors && ts.count == tl.count &&
         ts.t_start == tl.t_start && ts.t_end == tl.t_end;
}

// Shared structural check; when allow_register_growth, the small register
// must be a prefix of the large one and added qubits must be hidden.
bool nested_impl(const ModelSpec& small, const ModelSpec& large, bool allow_register_growth) {
  if (allow_register_growth) {
    if (small.n_total > large.n_total) return false;
    for (int q = small.n_total; q < large.n_total; ++q) {
      const auto& obs = large.observed;
      if (std::find(obs.begin(), obs.end(), q) != obs.end()) return false;
    }
  } else if (small.n_total != large.n_total) {
    return false;
  }
  if (small.observed != large.observed) return false;
  for (int q = 0; q < small.n_total; ++q)
    if (small.state_param[static_cast<std::size_t>(q)] !=
        large.state_param[static_cast<std::size_t>(q)])
      return false;
  if (!time_dependence_nested(small, large)) return false;
  if (small.ham.k_max > large.ham.k_max) return false;
  for (int k = 1; k <= small.ham.k_max; ++k) {
    const auto& tuples_s = small.ham.sets[static_cast<std::size_t>(k - 1)];
    const auto& tuples_l = large.ham.sets[static_cast<std::size_t>(k - 1)];
    for (int c = 0; c < static_cast<int>(tuples_s.size()); ++c) {
      int cl = -1;
      if (!tuple_in(tuples_l, tuples_s[static_cast<std::size_t>(c)], &cl)) return false;
      const long long n_pauli = ipow(3, k);
      for (int p = 0; p < n_pauli; ++p)
        if (small.ham.term_included(k, c, p) && !large.ham.term_included(k, cl, p))
          return false;
    }
  }
  if (small.diss.k_max > 0) {
    if (large.diss.k_max < small.diss.k_max) return false;
    for (const auto& bs : small.diss.blocks) {
      bool contained = false;
      for (const auto& bl : large.diss.blocks)
        if (subset(bs, bl)) contained = true;
      if (!contained) return false;
    }
  }
  return true;
}

ParameterSet embed_impl(const ParameterSet& params_small, const ModelSpec& spec_small,
                        const ModelSpec& spec_large, bool allow_register_growth) {
  if (!nested_impl(spec_small, spec_large, allow_register_growth))
    throw std::invalid_argument("spec_small is not nested in spec_large");
  const Packing ps(spec_small);
  const Packing pl(spec_large);
  if (params_small.size() != ps.size())
    throw std::invalid_argument("parameter vector size does not match spec_small");
  ParameterSet out = zero_parameters(spec_large);

  for (int q = 0; q < spec_large.n_total; ++q) {
    const int offl = pl.rho_offset(q);
    if (offl < 0) continue;
    if (q < spec_small.n_total) {
      const int offs = ps.rho_offset(q);
      for (int i = 0; i < 4; ++i) out.flat[offl + i] = params_small.flat[offs + i];
    } else {
      out.flat[offl] = 1.0;  // fresh hidden qubit starts at |0><0|
    }
  }

  // Hamiltonian terms: copy by (k, connection tuple, Pauli index).
  std::map<std::tuple<int, std::vector<int>, int>, int> large_offsets;
  for (const auto& term : pl.ham_terms()) {
    const auto& qubits = spec_large.ham.sets[static_cast<std::size_t>(term.k - 1)]
                                            [static_cast<std::size_t>(term.c_index)];
    large_offsets[{term.k, qubits, term.pauli_index}] = term.offset;
  }
  const bool replicate = spec_small.time_dependence.type == TimeDependenceType::none &&
                         spec_large.time_dependence.type == TimeDependenceType::anchors;
  for (const auto& term : ps.ham_terms()) {
    const auto& qubits = spec_small.ham.sets[static_cast<std::size_t>(term.k - 1)]
                                            [static_cast<std::size_t>(term.c_index)];
    const int offl = large_offsets.at({term.k, qubits, term.pauli_index});
    if (replicate) {
      for (int a = 0; a < pl.n_anchors(); ++a)
        out.flat[offl + a] = params_small.flat[term.offset];
    } else {
      for (int a = 0; a < ps.n_anchors(); ++a)
        out.flat[offl + a] = params_small.flat[term.offset + a];
    }
  }

  if (spec_small.diss.k_max > 0) {
    const BlockBasis basis_s = enumerate_block_basis(spec_small.diss.k_max);
    const BlockBasis basis_l = enumerate_block_basis(spec_large.diss.k_max);
    std::map<std::string, int> large_index;
    for (std::size_t i = 0; i < basis_l.strings.size(); ++i)
      large_index[basis_l.strings[i].letters] = static_cast<int>(i);
    const int side_s = ps.block_side();
    const int side_l = pl.block_side();

    for (std::size_t bs = 0; bs < spec_small.diss.blocks.size(); ++bs) {
      const auto& qs = spec_small.diss.blocks[bs];
      std::vector<int> containing;
      for (std::size_t bl = 0; bl < spec_large.diss.blocks.size(); ++bl)
        if (subset(qs, spec_large.diss.blocks[bl])) containing.push_back(static_cast<int>(bl));
      const double scale = 1.0 / std::sqrt(static_cast<double>(containing.size()));
      for (int bl : containing) {
        const auto& ql = spec_large.diss.blocks[static_cast<std::size_t>(bl)];
        // Index map: small-basis string -> its position in the large basis.
        std::vector<int> idx(static_cast<std::size_t>(side_s));
        for (int i = 0; i < side_s; ++i) {
          std::string letters(ql.size(), 'I');
          for (std::size_t j = 0; j < qs.size(); ++j) {
            const auto pos = std::find(ql.begin(), ql.end(), qs[j]) - ql.begin();
            letters[static_cast<std::size_t>(pos)] =
                basis_s.strings[static_cast<std::size_t>(i)].letters[j];
          }
          idx[static_cast<std::size_t>(i)] = large_index.at(letters);
        }
        const int offs = ps.block_offset(static_cast<int>(bs));
        const int offl = pl.block_offset(bl);
        for (int a = 0; a < side_s; ++a) {
          for (int b = 0; b <= a; ++b) {
            const int la = idx[static_cast<std::size_t>(a)];
            const int lb = idx[static_cast<std::size_t>(b)];
            // Real part slot (la, lb); imaginary part slot (lb, la).
            out.flat[offl + la * side_l + lb] +=
                scale * params_small.flat[offs + a * side_s + b];
            if (a != b)
              out.flat[offl + lb * side_l + la] +=
                  scale * params_small.flat[offs + b * side_s + a];
          }
        }
      }
    }
  }
  return out;
}

}  // namespace

bool is_nested(const ModelSpec& small, const ModelSpec& large) {
  return nested_impl(small, large, false);
}

ParameterSet embed_warm_start(const ParameterSet& params_small, const ModelSpec& spec_small,
                              const ModelSpec& spec_large) {
  return embed_impl(params_small, spec_small, spec_large, false);
}

ParameterSet extend_register(const ParameterSet& params_small, const ModelSpec& spec_small,
                             const ModelSpec& spec_large) {
  return embed_impl(params_small, spec_small, spec_large, true);
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

std::string spec_to_json(const ModelSpec& spec) {
  nlohmann::ordered_json j;
  j["n_total"] = spec.n_total;
  j["observed"] = spec.observed;
  nlohmann::ordered_json ham;
  ham["k_max"] = spec.ham.k_max;
  ham["connections"] = spec.ham.sets;
  if (!spec.ham.excluded.empty()) {
    nlohmann::ordered_json ex = nlohmann::ordered_json::array();
    for (const auto& [k, c, p] : spec.ham.excluded) ex.push_back({k, c, p});
    ham["excluded_terms"] = ex;
  }
  j["ham"] = ham;
  nlohmann::ordered_json diss;
  diss["k_max"] = spec.diss.k_max;
  diss["blocks"] = spec.diss.blocks;
  j["diss"] = diss;
  if (spec.time_dependence.type == TimeDependenceType::none) {
    j["time_dependence"] = {{"type", "none"}};
  } else {
    j["time_dependence"] = {{"type", "anchors"},
                            {"count", spec.time_dependence.count},
                            {"t_start", spec.time_dependence.t_start},
                            {"t_end", spec.time_dependence.t_end}};
  }
  j["state_param"] = spec.state_param;
  j["qubit_indexing"] = "0-based";
  return j.dump(2);
}

ModelSpec spec_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ModelSpec spec;
  spec.n_total = j.at("n_total").get<int>();
  spec.observed = j.at("observed").get<std::vector<int>>();
  const auto& ham = j.at("ham");
  spec.ham.k_max = ham.at("k_max").get<int>();
  spec.ham.sets = ham.value("connections", std::vector<std::vector<std::vector<int>>>{});
  if (ham.contains("excluded_terms")) {
    for (const auto& e : ham.at("excluded_terms"))
      spec.ham.excluded.insert({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<int>()});
  }
  const auto& diss = j.at("diss");
  spec.diss.k_max = diss.at("k_max").get<int>();
  spec.diss.blocks = diss.value("blocks", std::vector<std::vector<int>>{});
  const auto& td = j.at("time_dependence");
  const std::string type = td.at("type").get<std::string>();
  if (type == "none") {
    spec.time_dependence.type = TimeDependenceType::none;
  } else if (type == "anchors") {
    spec.time_dependence.type = TimeDependenceType::anchors;
    spec.time_dependence.count = td.at("count").get<int>();
    spec.time_dependence.t_start = td.at("t_start").get<double>();
    spec.time_dependence.t_end = td.at("t_end").get<double>();
  } else {
    throw std::invalid_argument("unknown time_dependence type: " + type);
  }
  spec.state_param = j.at("state_param").get<std::vector<bool>>();
  spec.validate();
  return spec;
}

std::string model_bundle_to_json(const ModelSpec& spec, const ParameterSet& params) {
  const Packing packing(spec);
  if (params.size() != packing.size())
    throw std::invalid_argument("parameter vector size does not match spec");
  nlohmann::ordered_json j;
  j["spec"] = nlohmann::json::parse(spec_to_json(spec));
  j["params"] = std::vector<double>(params.flat.data(), params.flat.data() + params.flat.size());
  return j.dump(2);
}

std::pair<ModelSpec, ParameterSet> model_bundle_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ModelSpec spec = spec_from_json(j.at("spec").dump());
  const auto values = j.at("params").get<std::vector<double>>();
  ParameterSet params;
  params.flat =
      Eigen::Map<const RealVector>(values.data(), static_cast<Eigen::Index>(values.size()));
  const Packing packing(spec);
  if (params.size() != packing.size())
    throw std::invalid_argument("bundle parameter count does not match its spec");
  return {std::move(spec), std::move(params)};
}

std::string packing_descriptor_json(const ModelSpec& spec) {
  const Packing packing(spec);
  nlohmann::ordered_json j;
  j["total"] = packing.size();
  j["n_anchors"] = packing.n_anchors();
  nlohmann::ordered_json rho = nlohmann::ordered_json::array();
  for (int q : packing.rho_qubits())
    rho.push_back({{"qubit", q}, {"offset", packing.rho_offset(q)}});
  j["rho"] = rho;
  nlohmann::ordered_json ham = nlohmann::ordered_json::array();
  for (const auto& term : packing.ham_terms()) {
    const auto& qubits = spec.ham.sets[static_cast<std::size_t>(term.k - 1)]
                                      [static_cast<std::size_t>(term.c_index)];
    ham.push_back({{"k", term.k},
                   {"connection", qubits},
                   {"pauli", pauli_letters_from_odometer(term.k, term.pauli_index)},
                   {"offset", term.offset}});
  }
  j["ham"] = ham;
  nlohmann::ordered_json dissj = nlohmann::ordered_json::array();
  for (int b = 0; b < packing.n_blocks(); ++b)
    dissj.push_back({{"qubits", spec.diss.blocks[static_cast<std::size_t>(b)]},
                     {"side", packing.block_side()},
                     {"offset", packing.block_offset(b)}});
  j["diss"] = dissj;
  return j.dump(2);
}

}  // namespace lindbladfit
