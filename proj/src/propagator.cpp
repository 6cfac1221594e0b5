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

#include "lindbladfit/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace lindbladfit {

// Tsitouras 5(4) pair.
const double Tsit5Tableau::c[7] = {0.0, 0.161, 0.327, 0.9, 0.9800255409045097, 1.0, 1.0};
const double Tsit5Tableau::a[7][6] = {
    {0, 0, 0, 0, 0, 0},
    {0.161, 0, 0, 0, 0, 0},
    {-0.008480655492356989, 0.335480655492357, 0, 0, 0, 0},
    {2.8971530571054935, -6.359448489975075, 4.3622954328695815, 0, 0, 0},
    {5.325864828439257, -11.748883564062828, 7.4955393428898365, -0.09249506636175525, 0, 0},
    {5.86145544294642, -12.92096931784711, 8.159367898576159, -0.071584973281401,
     -0.028269050394068383, 0},
    {0.09646076681806523, 0.01, 0.4798896504144996, 1.379008574103742, -3.290069515436081,
     2.324710524099774}};
const double Tsit5Tableau::b[7] = {0.09646076681806523, 0.01,
                                   0.4798896504144996, 1.379008574103742,
                                   -3.290069515436081, 2.324710524099774, 0.0};
const double Tsit5Tableau::btilde[7] = {-0.00178001105222577714, -0.0008164344596567469,
                                        0.007880878010261995,    -0.1447110071732629,
                                        0.5823571654525552,      -0.45808210592918697,
                                        0.015151515151515152};

LindbladGenerator LindbladGenerator::compile(const ParameterSet& params,
                                             const ModelSpec& spec) {
  const Packing packing(spec);
  if (params.size() != packing.size())
    throw std::invalid_argument("parameter vector size does not match spec");
  LindbladGenerator gen;
  gen.n_qubits_ = spec.n_total;
  gen.dim_ = spec.dim();
  gen.time_dependence_ = spec.time_dependence;

  const int n_anchors = packing.n_anchors();
  for (const auto& term : packing.ham_terms()) {
    HamTerm ht;
    ht.k = term.k;
    ht.packed_offset = term.offset;
    const auto& qubits = spec.ham.sets[static_cast<std::size_t>(term.k - 1)]
                                      [static_cast<std::size_t>(term.c_index)];
    ht.op = embed_string(PauliString(pauli_letters_from_odometer(term.k, term.pauli_index)),
                         qubits, spec.n_total);
    ht.coeffs = params.flat.segment(term.offset, n_anchors);
    gen.ham_terms_.push_back(std::move(ht));
  }

  gen.anticomm_sum_ = Matrix::Zero(gen.dim_, gen.dim_);
  if (spec.diss.k_max > 0) {
    const BlockBasis basis = enumerate_block_basis(spec.diss.k_max);
    const int side = packing.block_side();
    for (std::size_t b = 0; b < spec.diss.blocks.size(); ++b) {
      DissBlock block;
      block.qubits = spec.diss.blocks[b];
      block.m = side;
      block.packed_offset = packing.block_offset(static_cast<int>(b));
      block.basis.reserve(static_cast<std::size_t>(side));
      for (const auto& s : basis.strings)
        block.basis.push_back(embed_string(s, block.qubits, spec.n_total));
      block.M = Matrix::Zero(side, side);
      for (int r = 0; r < side; ++r) {
        block.M(r, r) = params.flat[block.packed_offset + r * side + r];
        for (int cc = 0; cc < r; ++cc)
          block.M(r, cc) = Complex(params.flat[block.packed_offset + r * side + cc],
                                   params.flat[block.packed_offset + cc * side + r]);
      }
      for (int r = 0; r < side; ++r) {
        if (block.M.row(r).norm() == 0.0) continue;
        Matrix jump = Matrix::Zero(gen.dim_, gen.dim_);
        for (int cc = 0; cc < side; ++cc)
          if (block.M(r, cc) != 0.0) jump += block.M(r, cc) * block.basis[static_cast<std::size_t>(cc)];
        gen.anticomm_sum_ += jump.adjoint() * jump;
        block.jumps.push_back(jump);
        gen.all_jumps_.push_back(block.jumps.back());
      }
      gen.diss_blocks_.push_back(std::move(block));
    }
  }

  if (!gen.time_dependent()) {
    gen.h_static_ = Matrix::Zero(gen.dim_, gen.dim_);
    for (const auto& term : gen.ham_terms_) gen.h_static_ += term.coeffs[0] * term.op;
    gen.has_static_h_ = true;
  }
  return gen;
}

LindbladGenerator LindbladGenerator::from_operators(int n_qubits, const Matrix& hamiltonian,
                                                    const std::vector<Matrix>& jump_ops) {
  LindbladGenerator gen;
  gen.n_qubits_ = n_qubits;
  gen.dim_ = 1LL << n_qubits;
  if (hamiltonian.rows() != gen.dim_ || hamiltonian.cols() != gen.dim_)
    throw std::invalid_argument("hamiltonian dimension mismatch");
  gen.h_static_ = hamiltonian;
  gen.has_static_h_ = true;
  gen.anticomm_sum_ = Matrix::Zero(gen.dim_, gen.dim_);
  for (const auto& jump : jump_ops) {
    if (jump.rows() != gen.dim_ || jump.cols() != gen.dim_)
      throw std::invalid_argument("jump operator dimension mismatch");
    gen.all_jumps_.push_back(jump);
    gen.anticomm_sum_ += jump.adjoint() * jump;
  }
  return gen;
}

Matrix LindbladGenerator::hamiltonian(double t) const {
  if (has_static_h_) return h_static_;
  Matrix h = Matrix::Zero(dim_, dim_);
  const AnchorInterp w = anchor_interp(time_dependence_, t);
  for (const auto& term : ham_terms_) {
    const double coeff = w.w0 * term.coeffs[w.i0] + w.w1 * term.coeffs[w.i1];
    if (coeff != 0.0) h += coeff * term.op;
  }
  return h;
}

Matrix LindbladGenerator::apply(const Matrix& rho, double t) const {
  if (rho.rows() != dim_ || rho.cols() != dim_)
    throw std::invalid_argument("state dimension mismatch");
  const Matrix h = hamiltonian(t);
  Matrix out = -kImag * (h * rho - rho * h);
  for (const auto& jump : all_jumps_) out.noalias() += jump * rho * jump.adjoint();
  out.noalias() -= 0.5 * (anticomm_sum_ * rho + rho * anticomm_sum_);
  return out;
}

Matrix LindbladGenerator::apply_adjoint(const Matrix& x, double t) const {
  if (x.rows() != dim_ || x.cols() != dim_)
    throw std::invalid_argument("state dimension mismatch");
  const Matrix h = hamiltonian(t);
  Matrix out = kImag * (h * x - x * h);
  for (const auto& jump : all_jumps_) out.noalias() += jump.adjoint() * x * jump;
  out.noalias() -= 0.5 * (anticomm_sum_ * x + x * anticomm_sum_);
  return out;
}

namespace {

double error_norm(const Matrix& err, const Matrix& y0, const Matrix& y1, double atol,
                  double rtol) {
  double acc = 0.0;
  const auto* e = err.data();
  const auto* a = y0.data();
  const auto* b = y1.data();
  const Eigen::Index n = err.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double scale = atol + rtol * std::max(std::abs(a[i]), std::abs(b[i]));
    const double q = std::abs(e[i]) / scale;
    acc += q * q;
  }
  return std::sqrt(acc / static_cast<double>(n));
}

double initial_step(const LindbladGenerator& gen, const Matrix& y0, double t0, double t_end,
                    double atol, double rtol) {
  const auto scaled_norm = [&](const Matrix& v, const Matrix& ref) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double scale = atol + rtol * std::abs(ref.data()[i]);
      const double q = std::abs(v.data()[i]) / scale;
      acc += q * q;
    }
    return std::sqrt(acc / static_cast<double>(v.size()));
  };
  const Matrix f0 = gen.apply(y0, t0);
  const double d0 = scaled_norm(y0, y0);
  const double d1 = scaled_norm(f0, y0);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, t_end - t0);
  const Matrix y1 = y0 + h0 * f0;
  const Matrix f1 = gen.apply(y1, t0 + h0);
  const double d2 = scaled_norm(f1 - f0, y0) / h0;
  double h1;
  if (std::max(d1, d2) <= 1e-15) {
    h1 = std::max(1e-6, h0 * 1e-3);
  } else {
    h1 = std::pow(0.01 / std::max(d1, d2), 1.0 / 5.0);
  }
  return std::min({100.0 * h0, h1, t_end - t0});
}

struct IntegrationSink {
  std::vector<Matrix>* saved = nullptr;
  Trajectory* trajectory = nullptr;
};

void check_state(const Matrix& rho, double t, StateValidation level) {
  if (level == StateValidation::none) return;
  if (!rho.allFinite()) throw std::runtime_error("non-finite state during integration");
  const double trace_dev = std::abs(rho.trace() - Complex(1.0, 0.0));
  if (trace_dev > 1e-8)
    throw std::runtime_error("trace deviation " + std::to_string(trace_dev) + " at t=" +
                             std::to_string(t));
  const double herm_dev = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  if (herm_dev > 1e-9)
    throw std::runtime_error("hermiticity deviation " + std::to_string(herm_dev) + " at t=" +
                             std::to_string(t));
  if (level == StateValidation::full) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver((rho + rho.adjoint()) / 2.0);
    const double min_eig = solver.eigenvalues().minCoeff();
    if (min_eig < -1e-7)
      throw std::runtime_error("negative eigenvalue " + std::to_string(min_eig) + " at t=" +
                               std::to_string(t));
  }
}

void integrate(const LindbladGenerator& gen, const Matrix& rho0,
               const std::vector<double>& save_times, const SolverConfig& config,
               const IntegrationSink& sink) {
  if (config.rtol <= 0.0 || config.atol <= 0.0)
    throw std::invalid_argument("solver tolerances must be positive");
  if (save_times.empty()) throw std::invalid_argument("save_times must be non-empty");
  for (std::size_t i = 0; i < save_times.size(); ++i) {
    if (save_times[i] < 0.0) throw std::invalid_argument("save times must be >= 0");
    if (i > 0 && save_times[i] <= save_times[i - 1])
      throw std::invalid_argument("save times must be strictly ascending");
  }

  // Mesh boundaries: save times plus anchor times inside the horizon.
  const double t_final = save_times.back();
  std::vector<double> boundaries = save_times;
  for (double ta : gen.anchor_times())
    if (ta > 0.0 && ta < t_final) boundaries.push_back(ta);
  std::sort(boundaries.begin(), boundaries.end());
  boundaries.erase(std::unique(boundaries.begin(), boundaries.end()), boundaries.end());

  const auto emit = [&](const Matrix& state, double t) {
    check_state(state, t, config.validation);
    if (sink.saved) sink.saved->push_back(state);
    if (sink.trajectory) {
      sink.trajectory->saved.push_back(state);
      sink.trajectory->steps_before_save.push_back(sink.trajectory->steps.size());
    }
  };

  double t = 0.0;
  Matrix y = rho0;
  std::size_t next_save = 0;
  if (save_times.front() == 0.0) {
    emit(y, 0.0);
    ++next_save;
  }

  if (t_final <= 0.0) {
    if (sink.trajectory) {
      sink.trajectory->n_steps = 0;
      sink.trajectory->n_rejected = 0;
    }
    return;
  }

  Matrix k[7];
  Matrix f_start = gen.apply(y, t);  // FSAL carry
  long long n_steps = 0;
  long long n_rejected = 0;
  double err_old = 1e-4;
  double h = config.h_init > 0.0 ? config.h_init
                                 : initial_step(gen, y, 0.0, t_final, config.atol, config.rtol);

  for (double boundary : boundaries) {
    if (boundary <= t) continue;
    while (t < boundary) {
      if (n_steps + n_rejected > config.max_steps)
        throw std::runtime_error("step limit exceeded (stiff or invalid parameters)");
      bool clipped = false;
      double h_try = h;
      if (t + h_try >= boundary) {
        h_try = boundary - t;
        clipped = true;
      }

      k[0] = f_start;
      Matrix u;
      for (int i = 1; i < 6; ++i) {
        u = y;
        for (int j = 0; j < i; ++j)
          if (Tsit5Tableau::a[i][j] != 0.0) u.noalias() += (h_try * Tsit5Tableau::a[i][j]) * k[j];
        k[i] = gen.apply(u, t + Tsit5Tableau::c[i] * h_try);
      }
      Matrix y_new = y;
      for (int i = 0; i < 6; ++i)
        if (Tsit5Tableau::b[i] != 0.0) y_new.noalias() += (h_try * Tsit5Tableau::b[i]) * k[i];
      k[6] = gen.apply(y_new, t + h_try);
      Matrix err = Matrix::Zero(y.rows(), y.cols());
      for (int i = 0; i < 7; ++i)
        if (Tsit5Tableau::btilde[i] != 0.0) err.noalias() += (h_try * Tsit5Tableau::btilde[i]) * k[i];

      const double err_norm_val = error_norm(err, y, y_new, config.atol, config.rtol);
      if (!std::isfinite(err_norm_val))
        throw std::runtime_error("non-finite state (stiff or invalid parameters)");

      if (err_norm_val <= 1.0) {
        if (sink.trajectory) sink.trajectory->steps.push_back({t, h_try, y});
        t = clipped ? boundary : t + h_try;
        y = std::move(y_new);
        f_start = k[6];
        ++n_steps;
        if (!clipped) {
          // PI controller (accepted step). Boundary-clipped steps keep the
          // natural step size so it is not dragged down by short segments.
          const double err_clamped = std::max(err_norm_val, 1e-10);
          double factor = 0.9 * std::pow(err_clamped, -0.17) * std::pow(err_old, 0.04);
          factor = std::clamp(factor, 0.2, 5.0);
          err_old = err_clamped;
          h = h_try * factor;
        }
      } else {
        ++n_rejected;
        double factor = 0.9 * std::pow(err_norm_val, -0.2);
        factor = std::clamp(factor, 0.1, 1.0);
        h = h_try * factor;
        if (h <= 1e-14 * std::max(1.0, std::abs(t)))
          throw std::runtime_error("step size underflow (stiff or invalid parameters)");
      }
    }
    if (next_save < save_times.size() && boundary == save_times[next_save]) {
      emit(y, boundary);
      ++next_save;
    }
  }
  if (sink.trajectory) {
    sink.trajectory->n_steps = n_steps;
    sink.trajectory->n_rejected = n_rejected;
  }
}

}  // namespace

std::vector<Matrix> evolve(const LindbladGenerator& gen, const Matrix& rho0,
                           const std::vector<double>& save_times, const SolverConfig& config) {
  if (rho0.rows() != gen.dim() || rho0.cols() != gen.dim())
    throw std::invalid_argument("initial state dimension mismatch");
  std::vector<Matrix> saved;
  saved.reserve(save_times.size());
  IntegrationSink sink;
  sink.saved = &saved;
  integrate(gen, rho0, save_times, config, sink);
  return saved;
}

Trajectory evolve_recorded(const LindbladGenerator& gen, const Matrix& rho0,
                           const std::vector<double>& save_times, const SolverConfig& config) {
  if (rho0.rows() != gen.dim() || rho0.cols() != gen.dim())
    throw std::invalid_argument("initial state dimension mismatch");
  Trajectory trajectory;
  IntegrationSink sink;
  sink.trajectory = &trajectory;
  integrate(gen, rho0, save_times, config, sink);
  return trajectory;
}

Matrix superoperator_oracle(const LindbladGenerator& gen) {
  if (gen.time_dependent())
    throw std::invalid_argument("superoperator oracle requires a time-independent generator");
  const long long d = gen.dim();
  const Matrix identity = Matrix::Identity(d, d);
  const Matrix h = gen.hamiltonian(0.0);
  Matrix sop = -kImag * (kron(identity, h) - kron(h.transpose(), identity));
  for (const auto& jump : gen.jump_ops()) {
    const Matrix jdj = jump.adjoint() * jump;
    sop += kron(jump.conjugate(), jump);
    sop -= 0.5 * kron(identity, jdj);
    sop -= 0.5 * kron(jdj.transpose(), identity);
  }
  return sop;
}

Matrix matrix_exponential(const Matrix& a) { return a.exp(); }

}  // namespace lindbladfit
