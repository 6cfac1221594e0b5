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

#include "lindbladfit/likelihood.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>

#include "lindbladfit/parallel.hpp"

namespace lindbladfit {

namespace {

double log_gamma(double x) {
#if defined(__GLIBC__) || defined(__APPLE__)
  int sign = 0;
  return lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

// Records of one tomographic configuration, with the save-time grid they
// share. time_slot[i] is the position of records[i]'s time in `times`.
struct ConfigGroup {
  std::vector<int> prep;
  std::vector<int> basis;
  std::vector<std::size_t> record_index;
  std::vector<int> time_slot;
  std::vector<double> times;
};

std::vector<ConfigGroup> group_records(const TomographyDataset& dataset,
                                       const std::vector<std::size_t>& record_indices) {
  std::map<std::pair<std::vector<int>, std::vector<int>>, std::size_t> index;
  std::vector<ConfigGroup> groups;
  for (std::size_t ri : record_indices) {
    const auto& rec = dataset.records[ri];
    const auto key = std::make_pair(rec.prep, rec.basis);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, groups.size()).first;
      groups.push_back({rec.prep, rec.basis, {}, {}, {}});
    }
    groups[it->second].record_index.push_back(ri);
  }
  for (auto& group : groups) {
    std::map<int, int> slot_of;  // t_index -> slot
    for (std::size_t ri : group.record_index)
      slot_of.emplace(dataset.records[ri].t_index, 0);
    int slot = 0;
    for (auto& [t_index, s] : slot_of) {
      s = slot++;
      group.times.push_back(dataset.times_us[static_cast<std::size_t>(t_index)]);
    }
    for (std::size_t ri : group.record_index)
      group.time_slot.push_back(slot_of.at(dataset.records[ri].t_index));
  }
  return groups;
}

Matrix embed_single_qubit(const Eigen::Matrix2cd& op, int qubit, int n_total) {
  Matrix out = Matrix::Ones(1, 1);
  for (int q = 0; q < n_total; ++q) {
    if (q == qubit) {
      out = kron(out, Matrix(op));
    } else {
      out = kron(out, Matrix(Matrix::Identity(2, 2)));
    }
  }
  return out;
}

Matrix prep_unitary(const std::vector<int>& prep, const std::vector<Eigen::Matrix2cd>& gates,
                    const ModelSpec& spec) {
  Matrix u = Matrix::Ones(1, 1);
  std::size_t obs_pos = 0;
  for (int q = 0; q < spec.n_total; ++q) {
    if (obs_pos < spec.observed.size() && spec.observed[obs_pos] == q) {
      u = kron(u, Matrix(gates[static_cast<std::size_t>(prep[obs_pos])]));
      ++obs_pos;
    } else {
      u = kron(u, Matrix(Matrix::Identity(2, 2)));
    }
  }
  return u;
}

// POVM elements E_b = U_m^dag (|b><b| x I_hidden) U_m, one per observed bit
// string b (big-endian, observed order). Factorizes per qubit.
std::vector<Matrix> measurement_povm(const std::vector<int>& basis, const ModelSpec& spec) {
  const int n_obs = spec.n_observed();
  std::vector<std::array<Eigen::Matrix2cd, 2>> factors(static_cast<std::size_t>(n_obs));
  for (int j = 0; j < n_obs; ++j) {
    const Eigen::Matrix2cd u = basis_change_gate(basis[static_cast<std::size_t>(j)]);
    for (int bit = 0; bit < 2; ++bit) {
      Eigen::Matrix2cd proj = Eigen::Matrix2cd::Zero();
      proj(bit, bit) = 1.0;
      factors[static_cast<std::size_t>(j)][static_cast<std::size_t>(bit)] =
          u.adjoint() * proj * u;
    }
  }
  const std::size_t n_outcomes = 1ULL << n_obs;
  std::vector<Matrix> povm(n_outcomes);
  for (std::size_t b = 0; b < n_outcomes; ++b) {
    Matrix e = Matrix::Ones(1, 1);
    std::size_t obs_pos = 0;
    for (int q = 0; q < spec.n_total; ++q) {
      if (obs_pos < spec.observed.size() && spec.observed[obs_pos] == q) {
        const int bit = static_cast<int>((b >> (n_obs - 1 - static_cast<int>(obs_pos))) & 1ULL);
        e = kron(e, Matrix(factors[obs_pos][static_cast<std::size_t>(bit)]));
        ++obs_pos;
      } else {
        e = kron(e, Matrix(Matrix::Identity(2, 2)));
      }
    }
    povm[b] = std::move(e);
  }
  return povm;
}

RealVector probabilities_from_state(const Matrix& rho, const std::vector<Matrix>& povm) {
  RealVector p(static_cast<Eigen::Index>(povm.size()));
  for (std::size_t b = 0; b < povm.size(); ++b)
    p[static_cast<Eigen::Index>(b)] = (povm[b].conjugate().cwiseProduct(rho)).sum().real();
  return p;
}

// Shared state for one likelihood/gradient evaluation.
struct EvalContext {
  const ModelSpec* spec = nullptr;
  Packing packing;
  LindbladGenerator gen;
  Matrix rho_init;
  std::vector<Eigen::Matrix2cd> prep_gates;
  // (flat offset, d rho_init / d theta) pairs for every state parameter.
  std::vector<std::pair<int, Matrix>> rho_derivatives;

  EvalContext(const ParameterSet& params, const ModelSpec& spec_in, bool with_gradient)
      : spec(&spec_in), packing(spec_in), gen(LindbladGenerator::compile(params, spec_in)) {
    rho_init = build_initial_state(params, spec_in);
    if (!with_gradient) return;
    // Per-qubit single-qubit states and their parameter derivatives.
    std::vector<Matrix> qubit_states(static_cast<std::size_t>(spec_in.n_total));
    for (int q = 0; q < spec_in.n_total; ++q) {
      const int off = packing.rho_offset(q);
      if (off < 0) {
        Eigen::Matrix2cd fixed = Eigen::Matrix2cd::Zero();
        fixed(0, 0) = 1.0;
        qubit_states[static_cast<std::size_t>(q)] = fixed;
      } else {
        Eigen::Matrix2d theta;
        theta << params.flat[off], params.flat[off + 1], params.flat[off + 2],
            params.flat[off + 3];
        qubit_states[static_cast<std::size_t>(q)] = single_qubit_state(theta);
      }
    }
    for (int q = 0; q < spec_in.n_total; ++q) {
      const int off = packing.rho_offset(q);
      if (off < 0) continue;
      Eigen::Matrix2d theta;
      theta << params.flat[off], params.flat[off + 1], params.flat[off + 2],
          params.flat[off + 3];
      Eigen::Matrix2cd b = Eigen::Matrix2cd::Zero();
      b(0, 0) = theta(0, 0);
      b(1, 1) = theta(1, 1);
      b(1, 0) = Complex(theta(1, 0), theta(0, 1));
      const Eigen::Matrix2cd bb = b * b.adjoint();
      const double s = bb.real().trace();
      const Eigen::Matrix2cd rho_q = bb / s;
      for (int e = 0; e < 4; ++e) {
        Eigen::Matrix2cd db = Eigen::Matrix2cd::Zero();
        switch (e) {
          case 0: db(0, 0) = 1.0; break;
          case 1: db(1, 0) = Complex(0, 1); break;  // theta(0,1) feeds Im B(1,0)
          case 2: db(1, 0) = 1.0; break;
          case 3: db(1, 1) = 1.0; break;
        }
        const Eigen::Matrix2cd dbb = db * b.adjoint() + b * db.adjoint();
        const double ds = dbb.real().trace();
        const Eigen::Matrix2cd drho_q = (dbb - rho_q * ds) / s;
        Matrix full = Matrix::Ones(1, 1);
        for (int r = 0; r < spec_in.n_total; ++r)
          full = kron(full, r == q ? Matrix(drho_q) : qubit_states[static_cast<std::size_t>(r)]);
        rho_derivatives.emplace_back(off + e, std::move(full));
      }
    }
  }
};

// d(LL)/d(raw probabilities) through the clamp-and-renormalize step.
RealVector probability_weights(const RealVector& raw, const std::vector<long long>& counts,
                               long long n_shots, double* ll_out, double record_constant) {
  RealVector clamped = raw;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < clamped.size(); ++i) {
    if (clamped[i] < kProbFloor) clamped[i] = kProbFloor;
    sum += clamped[i];
  }
  double ll = record_constant;
  RealVector weights = RealVector::Zero(raw.size());
  for (Eigen::Index i = 0; i < clamped.size(); ++i) {
    const double p = clamped[i] / sum;
    const long long x = counts[static_cast<std::size_t>(i)];
    if (x > 0) ll += static_cast<double>(x) * std::log(p);
    // d ll / d clamped_i = (x_i/p_i - N)/sum; zero where the clamp is active.
    if (raw[i] >= kProbFloor)
      weights[i] = (x > 0 ? static_cast<double>(x) / p : 0.0) / sum -
                   static_cast<double>(n_shots) / sum;
  }
  *ll_out = ll;
  return weights;
}

double record_log_coefficient(const std::vector<long long>& counts, long long n_shots) {
  double c = log_gamma(static_cast<double>(n_shots) + 1.0);
  for (long long x : counts) c -= log_gamma(static_cast<double>(x) + 1.0);
  return c;
}

// Reverse pass through one recorded Tsit5 step. lambda is the adjoint of the
// step output; returns the adjoint of the step input and accumulates
// parameter gradients.
Matrix backprop_step(const LindbladGenerator& gen, const TrajectoryStep& step,
                     const Matrix& lambda, const TimeDependence& td, RealVector& grad) {
  constexpr int kStages = 6;  // b[6] = 0, so stage 7 never affects the state
  Matrix u[kStages];
  Matrix k[kStages];
  u[0] = step.y;
  k[0] = gen.apply(u[0], step.t);
  for (int i = 1; i < kStages; ++i) {
    u[i] = step.y;
    for (int j = 0; j < i; ++j)
      if (Tsit5Tableau::a[i][j] != 0.0)
        u[i].noalias() += (step.h * Tsit5Tableau::a[i][j]) * k[j];
    k[i] = gen.apply(u[i], step.t + Tsit5Tableau::c[i] * step.h);
  }

  Matrix kbar[kStages];
  for (int i = 0; i < kStages; ++i) kbar[i] = (step.h * Tsit5Tableau::b[i]) * lambda;
  Matrix ybar = lambda;

  for (int i = kStages - 1; i >= 0; --i) {
    const double t_stage = step.t + Tsit5Tableau::c[i] * step.h;

    // Hamiltonian coefficients: d/da <kbar, -i a [P, u]> = Im tr(P (u kbar^+ - kbar^+ u)).
    if (!gen.ham_terms().empty()) {
      const Matrix kadj = kbar[i].adjoint();
      const Matrix v = u[i] * kadj - kadj * u[i];
      const AnchorInterp w = anchor_interp(td, t_stage);
      for (const auto& term : gen.ham_terms()) {
        const double gj = (term.op.cwiseProduct(v.transpose())).sum().imag();
        if (term.coeffs.size() == 1) {
          grad[term.packed_offset] += gj;
        } else {
          grad[term.packed_offset + w.i0] += w.w0 * gj;
          if (w.i1 != w.i0) grad[term.packed_offset + w.i1] += w.w1 * gj;
        }
      }
    }

    // Dissipator blocks: the stage scalar depends on M only through
    // D = M^dag M; T_pq = C_qp - F_pq/2 with C_bb' = tr(kbar^+ P_b u P_b')
    // and F_bb' = tr((u kbar^+ + kbar^+ u) P_b P_b'); the M-gradient is
    // G = M (T^T + conj(T)).
    if (!gen.diss_blocks().empty()) {
      const Matrix kadj = kbar[i].adjoint();
      const Matrix w_mat = u[i] * kadj + kadj * u[i];
      for (const auto& block : gen.diss_blocks()) {
        const int m = block.m;
        Matrix c_mat(m, m), f_mat(m, m);
        for (int b = 0; b < m; ++b) {
          const Matrix q_b = kadj * (block.basis[static_cast<std::size_t>(b)] * u[i]);
          const Matrix r_b = w_mat * block.basis[static_cast<std::size_t>(b)];
          for (int b2 = 0; b2 < m; ++b2) {
            const auto& p2 = block.basis[static_cast<std::size_t>(b2)];
            c_mat(b, b2) = (q_b.cwiseProduct(p2.transpose())).sum();
            f_mat(b, b2) = (r_b.cwiseProduct(p2.transpose())).sum();
          }
        }
        const Matrix t_mat = c_mat.transpose() - 0.5 * f_mat;
        const Matrix g_mat = block.M * (t_mat.transpose() + t_mat.conjugate());
        const int off = block.packed_offset;
        for (int a = 0; a < m; ++a) {
          grad[off + a * m + a] += g_mat(a, a).real();
          for (int b = 0; b < a; ++b) {
            grad[off + a * m + b] += g_mat(a, b).real();
            grad[off + b * m + a] += g_mat(a, b).imag();
          }
        }
      }
    }

    const Matrix ubar = gen.apply_adjoint(kbar[i], t_stage);
    ybar += ubar;
    for (int j = 0; j < i; ++j)
      if (Tsit5Tableau::a[i][j] != 0.0) kbar[j] += (step.h * Tsit5Tableau::a[i][j]) * ubar;
  }
  return ybar;
}

struct GroupResult {
  std::vector<double> record_ll;  // aligned with group.record_index
  RealVector grad;                // empty when not requested
};

GroupResult evaluate_group(const EvalContext& ctx, const TomographyDataset& dataset,
                           const ConfigGroup& group, const SolverConfig& solver,
                           bool with_gradient) {
  const ModelSpec& spec = *ctx.spec;
  const Matrix u_prep = prep_unitary(group.prep, ctx.prep_gates, spec);
  const std::vector<Matrix> povm = measurement_povm(group.basis, spec);
  const Matrix rho0 = u_prep * ctx.rho_init * u_prep.adjoint();

  GroupResult result;
  result.record_ll.resize(group.record_index.size());

  Trajectory trajectory;
  std::vector<Matrix> saved;
  if (with_gradient) {
    trajectory = evolve_recorded(ctx.gen, rho0, group.times, solver);
  } else {
    saved = evolve(ctx.gen, rho0, group.times, solver);
  }
  const std::vector<Matrix>& states = with_gradient ? trajectory.saved : saved;

  // Per-save-time adjoint seeds, summed over the records at that time.
  std::vector<Matrix> seeds;
  if (with_gradient)
    seeds.assign(group.times.size(), Matrix::Zero(ctx.gen.dim(), ctx.gen.dim()));

  for (std::size_t i = 0; i < group.record_index.size(); ++i) {
    const auto& rec = dataset.records[group.record_index[i]];
    const int slot = group.time_slot[i];
    const RealVector raw = probabilities_from_state(states[static_cast<std::size_t>(slot)], povm);
    double ll = 0.0;
    const RealVector weights = probability_weights(
        raw, rec.counts, dataset.n_shots, &ll, record_log_coefficient(rec.counts, dataset.n_shots));
    result.record_ll[i] = ll;
    if (with_gradient) {
      for (Eigen::Index b = 0; b < weights.size(); ++b)
        if (weights[b] != 0.0)
          seeds[static_cast<std::size_t>(slot)] += weights[b] * povm[static_cast<std::size_t>(b)];
    }
  }

  if (with_gradient) {
    result.grad = RealVector::Zero(ctx.packing.size());
    Matrix lambda = Matrix::Zero(ctx.gen.dim(), ctx.gen.dim());
    for (int s = static_cast<int>(group.times.size()) - 1; s >= 0; --s) {
      lambda += seeds[static_cast<std::size_t>(s)];
      const std::size_t hi = trajectory.steps_before_save[static_cast<std::size_t>(s)];
      const std::size_t lo = s > 0 ? trajectory.steps_before_save[static_cast<std::size_t>(s - 1)] : 0;
      for (std::size_t idx = hi; idx > lo; --idx)
        lambda = backprop_step(ctx.gen, trajectory.steps[idx - 1], lambda,
                               spec.time_dependence, result.grad);
    }
    // Chain through the preparation unitary and the initial-state factors.
    const Matrix a_init = u_prep.adjoint() * lambda * u_prep;
    for (const auto& [offset, drho] : ctx.rho_derivatives)
      result.grad[offset] += (a_init.conjugate().cwiseProduct(drho)).sum().real();
  }
  return result;
}

double evaluate(const ParameterSet& params, const ModelSpec& spec,
                const TomographyDataset& dataset,
                const std::vector<std::size_t>& record_indices, const SolverConfig& solver,
                int n_threads, RealVector* gradient_out) {
  dataset.validate();
  if (dataset.n_observed != spec.n_observed())
    throw std::invalid_argument("dataset and spec observed registers differ");
  const bool with_gradient = gradient_out != nullptr;
  EvalContext ctx(params, spec, with_gradient);
  ctx.prep_gates = preparation_gates(dataset.prep_set);

  const std::vector<ConfigGroup> groups = group_records(dataset, record_indices);
  std::vector<GroupResult> results(groups.size());
  parallel_for(groups.size(), n_threads, [&](std::size_t gi) {
    results[gi] = evaluate_group(ctx, dataset, groups[gi], solver, with_gradient);
  });

  // Fixed-order reductions: record order for the log-likelihood, group order
  // for the gradient, independent of the thread count.
  std::vector<double> per_record(record_indices.size(), 0.0);
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> slot_of;  // record idx -> (group, pos)
  for (std::size_t gi = 0; gi < groups.size(); ++gi)
    for (std::size_t i = 0; i < groups[gi].record_index.size(); ++i)
      slot_of[groups[gi].record_index[i]] = {gi, i};
  double ll = 0.0;
  for (std::size_t pos = 0; pos < record_indices.size(); ++pos) {
    const auto [gi, i] = slot_of.at(record_indices[pos]);
    ll += results[gi].record_ll[i];
  }
  if (!std::isfinite(ll)) throw std::runtime_error("non-finite log-likelihood");
  if (with_gradient) {
    *gradient_out = RealVector::Zero(Packing(spec).size());
    for (const auto& result : results) *gradient_out += result.grad;
    if (!gradient_out->allFinite()) throw std::runtime_error("non-finite gradient");
  }
  return ll;
}

std::vector<std::size_t> all_records(const TomographyDataset& dataset) {
  std::vector<std::size_t> idx(dataset.records.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

}  // namespace

double floor_and_renormalize(RealVector& probs) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs[i] < kProbFloor) probs[i] = kProbFloor;
    sum += probs[i];
  }
  probs /= sum;
  return sum;
}

ProbabilityTable predict_probabilities(const ParameterSet& params, const ModelSpec& spec,
                                       const std::vector<Configuration>& configs,
                                       const std::vector<double>& times_us,
                                       const std::string& prep_set, const SolverConfig& solver,
                                       int n_threads) {
  EvalContext ctx(params, spec, false);
  ctx.prep_gates = preparation_gates(prep_set);
  // Configurations index the observed register only.
  for (const auto& config : configs) {
    if (static_cast<int>(config.prep.size()) != spec.n_observed() ||
        static_cast<int>(config.basis.size()) != spec.n_observed())
      throw std::invalid_argument("configuration does not match the observed register");
    for (int p : config.prep)
      if (p < 0 || p >= static_cast<int>(ctx.prep_gates.size()))
        throw std::invalid_argument("preparation index out of range for " + prep_set);
  }

  ProbabilityTable table;
  table.probs.resize(configs.size());
  parallel_for(configs.size(), n_threads, [&](std::size_t ci) {
    const Matrix u_prep = prep_unitary(configs[ci].prep, ctx.prep_gates, spec);
    const std::vector<Matrix> povm = measurement_povm(configs[ci].basis, spec);
    const Matrix rho0 = u_prep * ctx.rho_init * u_prep.adjoint();
    const std::vector<Matrix> states = evolve(ctx.gen, rho0, times_us, solver);
    table.probs[ci].reserve(states.size());
    for (const auto& rho : states) {
      RealVector p = probabilities_from_state(rho, povm);
      floor_and_renormalize(p);
      table.probs[ci].push_back(std::move(p));
    }
  });
  return table;
}

double multinomial_ll(const std::vector<long long>& counts, const RealVector& probs,
                      long long n_shots) {
  if (static_cast<Eigen::Index>(counts.size()) != probs.size())
    throw std::invalid_argument("counts and probabilities differ in length");
  long long total = 0;
  for (long long x : counts) total += x;
  if (total != n_shots) throw std::invalid_argument("counts do not sum to n_shots");
  double ll = record_log_coefficient(counts, n_shots);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) continue;
    const double p = probs[static_cast<Eigen::Index>(i)];
    if (p <= 0.0)
      throw std::domain_error("zero probability with a nonzero count (log-likelihood -inf)");
    ll += static_cast<double>(counts[i]) * std::log(p);
  }
  return ll;
}

double total_ll(const ParameterSet& params, const ModelSpec& spec,
                const TomographyDataset& dataset, const SolverConfig& solver, int n_threads) {
  return evaluate(params, spec, dataset, all_records(dataset), solver, n_threads, nullptr);
}

RealVector ll_gradient(const ParameterSet& params, const ModelSpec& spec,
                       const TomographyDataset& dataset, const SolverConfig& solver,
                       int n_threads) {
  RealVector grad;
  evaluate(params, spec, dataset, all_records(dataset), solver, n_threads, &grad);
  return grad;
}

double total_ll_subset(const ParameterSet& params, const ModelSpec& spec,
                       const TomographyDataset& dataset,
                       const std::vector<std::size_t>& record_indices,
                       const SolverConfig& solver, int n_threads, RealVector* gradient_out) {
  return evaluate(params, spec, dataset, record_indices, solver, n_threads, gradient_out);
}

}  // namespace lindbladfit
