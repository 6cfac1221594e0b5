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

#include "lindbladfit/experiment.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "lindbladfit/likelihood.hpp"
#include "lindbladfit/parallel.hpp"
#include "lindbladfit/rng.hpp"

namespace lindbladfit {

namespace {

Eigen::Matrix2cd rotation_x(double phi) {
  Eigen::Matrix2cd m;
  const double c = std::cos(phi / 2.0), s = std::sin(phi / 2.0);
  m << c, Complex(0, -s), Complex(0, -s), c;
  return m;
}

Eigen::Matrix2cd rotation_y(double phi) {
  Eigen::Matrix2cd m;
  const double c = std::cos(phi / 2.0), s = std::sin(phi / 2.0);
  m << c, -s, s, c;
  return m;
}

Eigen::Matrix2cd rotation_z(double phi) {
  Eigen::Matrix2cd m = Eigen::Matrix2cd::Zero();
  m(0, 0) = std::exp(Complex(0, -phi / 2.0));
  m(1, 1) = std::exp(Complex(0, phi / 2.0));
  return m;
}

}  // namespace

Eigen::Matrix2cd gate(const std::string& name, double arg) {
  if (name == "id") return Eigen::Matrix2cd::Identity();
  if (name == "x180") return rotation_x(M_PI);
  if (name == "x90") return rotation_x(M_PI / 2.0);
  if (name == "x-90") return rotation_x(-M_PI / 2.0);
  if (name == "y90") return rotation_y(M_PI / 2.0);
  if (name == "y-90") return rotation_y(-M_PI / 2.0);
  if (name == "vz") return rotation_z(arg);
  if (name == "x_sic") return rotation_x(2.0 * std::atan(std::sqrt(2.0)));
  throw std::invalid_argument("unknown gate: " + name);
}

Eigen::Matrix2cd basis_change_gate(int basis_index) {
  switch (basis_index) {
    case 0: return rotation_y(-M_PI / 2.0);  // x
    case 1: return rotation_x(M_PI / 2.0);   // y
    case 2: return Eigen::Matrix2cd::Identity();  // z
    default: throw std::invalid_argument("basis index must be 0 (x), 1 (y) or 2 (z)");
  }
}

std::vector<Eigen::Matrix2cd> preparation_gates(const std::string& prep_set) {
  if (prep_set == "pauli6") {
    // |0>, |1>, |+>, |->, |+i>, |-i>
    return {gate("id"), gate("x180"), gate("y90"), gate("y-90"), gate("x-90"), gate("x90")};
  }
  if (prep_set == "sic4") {
    const Eigen::Matrix2cd xsic = gate("x_sic");
    return {gate("id"), xsic, Eigen::Matrix2cd(gate("vz", 2.0 * M_PI / 3.0) * xsic),
            Eigen::Matrix2cd(gate("vz", 4.0 * M_PI / 3.0) * xsic)};
  }
  throw std::invalid_argument("unknown preparation set: " + prep_set);
}

void ExperimentPlan::validate() const {
  if (n_observed < 1) throw std::invalid_argument("plan needs at least one observed qubit");
  preparation_gates(prep_set);  // throws on unknown set
  if (basis_set != "xyz") throw std::invalid_argument("only the xyz basis set is supported");
  if (times_us.empty() || times_us.front() != 0.0)
    throw std::invalid_argument("plan times must start at 0");
  for (std::size_t i = 1; i < times_us.size(); ++i)
    if (times_us[i] <= times_us[i - 1])
      throw std::invalid_argument("plan times must be strictly ascending");
  if (n_shots < 1) throw std::invalid_argument("n_shots must be at least 1");
}

std::string plan_to_json(const ExperimentPlan& plan) {
  nlohmann::ordered_json j;
  j["n_observed"] = plan.n_observed;
  j["prep_set"] = plan.prep_set;
  j["basis_set"] = plan.basis_set;
  j["basis_convention"] = kBasisConvention;
  j["times_us"] = plan.times_us;
  j["n_shots"] = plan.n_shots;
  return j.dump(2);
}

ExperimentPlan plan_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ExperimentPlan plan;
  plan.n_observed = j.at("n_observed").get<int>();
  plan.prep_set = j.at("prep_set").get<std::string>();
  plan.basis_set = j.value("basis_set", std::string("xyz"));
  plan.times_us = j.at("times_us").get<std::vector<double>>();
  plan.n_shots = j.at("n_shots").get<long long>();
  plan.validate();
  return plan;
}

long long count_configurations(const ExperimentPlan& plan) {
  const long long per_qubit =
      static_cast<long long>(preparation_gates(plan.prep_set).size()) * kNumBases;
  long long total = 1;
  for (int q = 0; q < plan.n_observed; ++q) total *= per_qubit;
  return total;
}

std::vector<Configuration> enumerate_configurations(const ExperimentPlan& plan) {
  plan.validate();
  const int n_prep = static_cast<int>(preparation_gates(plan.prep_set).size());
  const int n = plan.n_observed;
  std::vector<Configuration> out;
  out.reserve(static_cast<std::size_t>(count_configurations(plan)));

  std::vector<int> prep(static_cast<std::size_t>(n), 0);
  for (;;) {
    std::vector<int> basis(static_cast<std::size_t>(n), 0);
    for (;;) {
      out.push_back({prep, basis});
      int pos = n - 1;
      while (pos >= 0 && basis[static_cast<std::size_t>(pos)] == kNumBases - 1) {
        basis[static_cast<std::size_t>(pos)] = 0;
        --pos;
      }
      if (pos < 0) break;
      ++basis[static_cast<std::size_t>(pos)];
    }
    int pos = n - 1;
    while (pos >= 0 && prep[static_cast<std::size_t>(pos)] == n_prep - 1) {
      prep[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
    ++prep[static_cast<std::size_t>(pos)];
  }
  return out;
}

void TomographyDataset::validate() const {
  if (n_observed < 1) throw std::invalid_argument("dataset needs at least one observed qubit");
  const std::size_t n_outcomes = 1ULL << n_observed;
  const int n_prep = static_cast<int>(preparation_gates(prep_set).size());
  for (std::size_t i = 1; i < times_us.size(); ++i)
    if (times_us[i] <= times_us[i - 1])
      throw std::invalid_argument("dataset times must be strictly ascending");
  for (const auto& rec : records) {
    if (static_cast<int>(rec.prep.size()) != n_observed ||
        static_cast<int>(rec.basis.size()) != n_observed)
      throw std::invalid_argument("record prep/basis length mismatch");
    for (int p : rec.prep)
      if (p < 0 || p >= n_prep) throw std::invalid_argument("record prep index out of range");
    for (int b : rec.basis)
      if (b < 0 || b >= kNumBases) throw std::invalid_argument("record basis index out of range");
    if (rec.t_index < 0 || rec.t_index >= static_cast<int>(times_us.size()))
      throw std::invalid_argument("record time index out of range");
    if (rec.counts.size() != n_outcomes)
      throw std::invalid_argument("record counts length mismatch");
    long long total = 0;
    for (long long c : rec.counts) {
      if (c < 0) throw std::invalid_argument("negative count");
      total += c;
    }
    if (total != n_shots) throw std::invalid_argument("record counts do not sum to n_shots");
  }
}

std::string dataset_to_json(const TomographyDataset& dataset) {
  nlohmann::ordered_json j;
  j["schema_version"] = dataset.schema_version;
  j["n_observed"] = dataset.n_observed;
  j["prep_set"] = dataset.prep_set;
  j["basis_set"] = dataset.basis_set;
  j["basis_convention"] = dataset.basis_convention;
  j["times_us"] = dataset.times_us;
  j["n_shots"] = dataset.n_shots;
  j["qubit_indexing"] = "0-based";
  j["bit_order"] = "big-endian (qubit 0 most significant)";
  nlohmann::ordered_json records = nlohmann::ordered_json::array();
  for (const auto& rec : dataset.records) {
    records.push_back({{"prep", rec.prep},
                       {"basis", rec.basis},
                       {"t_index", rec.t_index},
                       {"counts", rec.counts}});
  }
  j["records"] = records;
  return j.dump();
}

TomographyDataset dataset_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  TomographyDataset dataset;
  dataset.schema_version = j.at("schema_version").get<int>();
  dataset.n_observed = j.at("n_observed").get<int>();
  dataset.prep_set = j.at("prep_set").get<std::string>();
  dataset.basis_set = j.at("basis_set").get<std::string>();
  dataset.basis_convention = j.at("basis_convention").get<std::string>();
  dataset.times_us = j.at("times_us").get<std::vector<double>>();
  dataset.n_shots = j.at("n_shots").get<long long>();
  for (const auto& r : j.at("records")) {
    TomographyRecord rec;
    rec.prep = r.at("prep").get<std::vector<int>>();
    rec.basis = r.at("basis").get<std::vector<int>>();
    rec.t_index = r.at("t_index").get<int>();
    rec.counts = r.at("counts").get<std::vector<long long>>();
    dataset.records.push_back(std::move(rec));
  }
  dataset.validate();
  return dataset;
}

TomographyDataset sample_synthetic(const ModelSpec& spec, const ParameterSet& params,
                                   const ExperimentPlan& plan, std::uint64_t seed,
                                   const SolverConfig& solver, int n_threads) {
  plan.validate();
  if (plan.n_observed != spec.n_observed())
    throw std::invalid_argument("plan and spec observed registers differ");
  const std::vector<Configuration> configs = enumerate_configurations(plan);
  const ProbabilityTable table = predict_probabilities(params, spec, configs, plan.times_us,
                                                       plan.prep_set, solver, n_threads);

  TomographyDataset dataset;
  dataset.n_observed = plan.n_observed;
  dataset.prep_set = plan.prep_set;
  dataset.basis_set = plan.basis_set;
  dataset.times_us = plan.times_us;
  dataset.n_shots = plan.n_shots;
  dataset.records.resize(configs.size() * plan.times_us.size());

  parallel_for(configs.size(), n_threads, [&](std::size_t ci) {
    for (std::size_t ti = 0; ti < plan.times_us.size(); ++ti) {
      RandomStream rng(record_key(seed, ci, ti));
      const RealVector& p = table.probs[ci][ti];
      std::vector<double> probs(p.data(), p.data() + p.size());
      TomographyRecord rec;
      rec.prep = configs[ci].prep;
      rec.basis = configs[ci].basis;
      rec.t_index = static_cast<int>(ti);
      rec.counts = sample_multinomial(rng, probs, plan.n_shots);
      dataset.records[ci * plan.times_us.size() + ti] = std::move(rec);
    }
  });
  return dataset;
}

}  // namespace lindbladfit
