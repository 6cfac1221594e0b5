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

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "lindbladfit/estimator.hpp"
#include "lindbladfit/experiment.hpp"
#include "lindbladfit/likelihood.hpp"
#include "lindbladfit/model.hpp"
#include "lindbladfit/parallel.hpp"
#include "lindbladfit/selection.hpp"
#include "lindbladfit/types.hpp"

namespace {

using namespace lindbladfit;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

std::string fnv1a_digest(const std::string& data) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "fnv1a64:%016llx",
                static_cast<unsigned long long>(hash));
  return buffer;
}

// Run manifest: written as a sidecar so primary outputs stay byte-identical
// across reruns (only the manifest's wall time varies).
struct ManifestWriter {
  nlohmann::ordered_json manifest;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

  ManifestWriter(int argc, char** argv) {
    std::string command;
    for (int i = 0; i < argc; ++i) {
      if (i) command += ' ';
      command += argv[i];
    }
    manifest["command"] = command;
    manifest["tool_version"] = std::string("lindbladfit ") + kVersion;
    manifest["inputs"] = nlohmann::ordered_json::object();
  }

  void add_input(const std::string& path, const std::string& content) {
    manifest["inputs"][path] = fnv1a_digest(content);
  }
  void set_seed(std::uint64_t seed) { manifest["seed"] = seed; }
  void set_config(const nlohmann::ordered_json& config) { manifest["config"] = config; }

  void write(const std::string& out_path) {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    manifest["wall_time_s"] = seconds;
    write_file(out_path + ".manifest.json", manifest.dump(2) + "\n");
  }
};

int cmd_simulate(const std::string& model_path, const std::string& plan_path,
                 std::uint64_t seed, const std::string& out_path, int threads,
                 ManifestWriter& manifest) {
  const std::string model_text = read_file(model_path);
  const std::string plan_text = read_file(plan_path);
  manifest.add_input(model_path, model_text);
  manifest.add_input(plan_path, plan_text);
  manifest.set_seed(seed);
  const auto [spec, params] = model_bundle_from_json(model_text);
  const ExperimentPlan plan = plan_from_json(plan_text);
  const TomographyDataset dataset =
      sample_synthetic(spec, params, plan, seed, SolverConfig{}, threads);
  write_file(out_path, dataset_to_json(dataset) + "\n");
  manifest.write(out_path);
  std::cout << "wrote " << dataset.records.size() << " records to " << out_path << "\n";
  return 0;
}

int cmd_fit(const std::string& data_path, const std::string& spec_path,
            const std::string& init_arg, const OptimizerConfig& config_in, int restarts,
            bool with_hessian, const std::string& out_path, ManifestWriter& manifest) {
  const std::string data_text = read_file(data_path);
  const std::string spec_text = read_file(spec_path);
  manifest.add_input(data_path, data_text);
  manifest.add_input(spec_path, spec_text);
  const TomographyDataset dataset = dataset_from_json(data_text);
  const ModelSpec spec = spec_from_json(spec_text);

  OptimizerConfig config = config_in;
  std::optional<double> baseline;
  ParameterSet init;
  if (init_arg.rfind("warm:", 0) == 0) {
    const std::string warm_path = init_arg.substr(5);
    const std::string warm_text = read_file(warm_path);
    manifest.add_input(warm_path, warm_text);
    const FitResult prior = fit_result_from_json(warm_text);
    if (prior.spec.n_total == spec.n_total) {
      init = embed_warm_start(prior.params, prior.spec, spec);
    } else {
      init = extend_register(prior.params, prior.spec, spec);
    }
    baseline = prior.ll_full;
  } else if (init_arg == "random") {
    init = init_params(spec, config.seed, 0.2);
  } else {
    throw CLI::ValidationError("--init", "expected 'random' or 'warm:FILE'");
  }

  FitResult best;
  bool have = false;
  for (int r = 0; r <= std::max(0, restarts); ++r) {
    OptimizerConfig run_config = config;
    run_config.seed = config.seed + static_cast<std::uint64_t>(r);
    ParameterSet run_init = (r == 0) ? init : init_params(spec, run_config.seed, 0.2);
    FitResult result = fit(dataset, spec, run_init, run_config, baseline);
    if (!have || result.ll_full > best.ll_full) {
      best = std::move(result);
      have = true;
    }
  }

  nlohmann::ordered_json j = nlohmann::json::parse(fit_result_to_json(best));
  if (with_hessian) {
    const HessianUncertainty unc = hessian_uncertainty(best, dataset, true);
    j["std_errors"] = std::vector<double>(unc.std_errors.data(),
                                          unc.std_errors.data() + unc.std_errors.size());
    j["flagged_directions"] = unc.flagged_directions;
    nlohmann::ordered_json cov = nlohmann::ordered_json::array();
    for (int r = 0; r < unc.covariance.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(unc.covariance.cols()));
      for (int c = 0; c < unc.covariance.cols(); ++c) row[static_cast<std::size_t>(c)] =
          unc.covariance(r, c);
      cov.push_back(row);
    }
    j["covariance"] = cov;
  }
  write_file(out_path, j.dump(2) + "\n");
  manifest.write(out_path);
  std::cout << "ll_full " << std::setprecision(12) << best.ll_full << " stop "
            << best.stop_reason << " -> " << out_path << "\n";
  return 0;
}

int cmd_select(const std::string& fits_dir, const std::string& table_path, double threshold,
               const std::string& out_path, ManifestWriter& manifest) {
  Lattice lattice;
  if (!table_path.empty()) {
    const std::string text = read_file(table_path);
    manifest.add_input(table_path, text);
    lattice = lattice_from_csv(text);
  } else {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(fits_dir))
      if (entry.path().extension() == ".json" &&
          entry.path().string().find(".manifest.") == std::string::npos)
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
      const std::string text = read_file(path.string());
      manifest.add_input(path.string(), text);
      const FitResult fit = fit_result_from_json(text);
      const auto ham = ham_level_of(fit.spec);
      const auto diss = diss_level_of(fit.spec);
      if (!ham || !diss)
        throw std::runtime_error(path.string() + ": spec does not map onto a lattice level");
      const DofCount dof = dof_count(fit.spec);
      lattice[{*ham, *diss}] = NodeData{fit.ll_full, dof.generator_dof};
    }
  }
  validate_lattice_rectangle(lattice);
  const SelectionPath path = greedy_path(lattice, threshold);
  write_file(out_path, selection_path_to_json(path) + "\n");
  manifest.write(out_path);
  std::cout << selection_path_table(path);
  return 0;
}

int cmd_dof(const std::string& spec_path) {
  const ModelSpec spec = spec_from_json(read_file(spec_path));
  const DofCount dof = dof_count(spec);
  std::cout << "h_dof " << dof.h_dof << "\n"
            << "d_dof " << dof.d_dof << "\n"
            << "state_dof " << dof.state_dof << "\n"
            << "gauge_adjustment " << dof.gauge_adjustment << "\n"
            << "generator_dof " << dof.generator_dof << "\n";
  return 0;
}

int cmd_gradcheck(const std::string& data_path, const std::string& spec_path,
                  std::uint64_t seed, int threads) {
  const TomographyDataset dataset = dataset_from_json(read_file(data_path));
  const ModelSpec spec = spec_from_json(read_file(spec_path));
  const ParameterSet params = init_params(spec, seed, 0.2);

  // The FD oracle needs the objective computed well below the comparison
  // scale, so the check integrates tighter than the fitting default.
  SolverConfig tight;
  tight.rtol = 1e-10;
  tight.atol = 1e-10;
  tight.validation = StateValidation::basic;
  const RealVector analytic = ll_gradient(params, spec, dataset, tight, threads);

  std::vector<double> fd(static_cast<std::size_t>(params.size()));
  parallel_for(static_cast<std::size_t>(params.size()), threads, [&](std::size_t j) {
    const double h = 1e-5 * std::max(1.0, std::abs(params.flat[static_cast<int>(j)]));
    ParameterSet plus = params;
    plus.flat[static_cast<int>(j)] += h;
    ParameterSet minus = params;
    minus.flat[static_cast<int>(j)] -= h;
    fd[j] = (total_ll(plus, spec, dataset, tight, 1) -
             total_ll(minus, spec, dataset, tight, 1)) /
            (2.0 * h);
  });

  double max_rel = 0.0;
  int checked = 0;
  for (int j = 0; j < params.size(); ++j) {
    const double reference = fd[static_cast<std::size_t>(j)];
    if (std::abs(reference) <= 1e-8) continue;
    ++checked;
    max_rel = std::max(max_rel, std::abs(analytic[j] - reference) / std::abs(reference));
  }
  std::cout << "components " << params.size() << " checked " << checked << " max_rel_error "
            << std::scientific << max_rel << "\n";
  if (max_rel > 1e-4) {
    std::cerr << "gradient check FAILED (max relative error above 1e-4)\n";
    return 1;
  }
  return 0;
}

int cmd_report(const std::string& fit_path, const std::string& data_path,
               const std::string& out_path, int threads, ManifestWriter& manifest) {
  const std::string fit_text = read_file(fit_path);
  const std::string data_text = read_file(data_path);
  manifest.add_input(fit_path, fit_text);
  manifest.add_input(data_path, data_text);
  const FitResult fit = fit_result_from_json(fit_text);
  const TomographyDataset dataset = dataset_from_json(data_text);

  // Distinct configurations in order of first appearance.
  std::vector<Configuration> configs;
  std::vector<int> config_of_record(dataset.records.size());
  for (std::size_t ri = 0; ri < dataset.records.size(); ++ri) {
    const auto& rec = dataset.records[ri];
    int found = -1;
    for (std::size_t ci = 0; ci < configs.size(); ++ci)
      if (configs[ci].prep == rec.prep && configs[ci].basis == rec.basis)
        found = static_cast<int>(ci);
    if (found < 0) {
      configs.push_back({rec.prep, rec.basis});
      found = static_cast<int>(configs.size()) - 1;
    }
    config_of_record[ri] = found;
  }
  const ProbabilityTable table =
      predict_probabilities(fit.params, fit.spec, configs, dataset.times_us, dataset.prep_set,
                            SolverConfig{}, threads);

  std::ostringstream out;
  out << "config_id,prep,basis,t_us,bitstring,observed,predicted\n";
  const int n_obs = dataset.n_observed;
  const char basis_letter[3] = {'x', 'y', 'z'};
  for (std::size_t ri = 0; ri < dataset.records.size(); ++ri) {
    const auto& rec = dataset.records[ri];
    const int ci = config_of_record[ri];
    std::string prep_str, basis_str;
    for (int q = 0; q < n_obs; ++q) {
      prep_str += std::to_string(rec.prep[static_cast<std::size_t>(q)]);
      basis_str += basis_letter[rec.basis[static_cast<std::size_t>(q)]];
    }
    for (std::size_t b = 0; b < rec.counts.size(); ++b) {
      std::string bits;
      for (int q = n_obs - 1; q >= 0; --q) bits += ((b >> q) & 1ULL) ? '1' : '0';
      char predicted[32];
      std::snprintf(predicted, sizeof(predicted), "%.6f",
                    static_cast<double>(dataset.n_shots) *
                        table.probs[static_cast<std::size_t>(ci)]
                                   [static_cast<std::size_t>(rec.t_index)]
                                   [static_cast<Eigen::Index>(b)]);
      out << ci << ',' << prep_str << ',' << basis_str << ','
          << dataset.times_us[static_cast<std::size_t>(rec.t_index)] << ',' << bits << ','
          << rec.counts[b] << ',' << predicted << "\n";
    }
  }
  write_file(out_path, out.str());
  manifest.write(out_path);
  std::cout << "wrote report to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning minimal Lindblad models from tomographic count data"};
  app.set_version_flag("--version", std::string("lindbladfit ") + kVersion);
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Thread cap for internal parallelism (0 = all cores)");

  auto* simulate = app.add_subcommand("simulate", "Sample a synthetic tomography dataset");
  std::string model_path, plan_path, out_path;
  std::uint64_t seed = 0;
  simulate->add_option("--model", model_path, "Ground-truth bundle JSON (spec + params)")
      ->required();
  simulate->add_option("--plan", plan_path, "Experiment plan JSON")->required();
  simulate->add_option("--seed", seed, "Sampling seed")->required();
  simulate->add_option("--out", out_path, "Output dataset path")->required();

  auto* fit_cmd = app.add_subcommand("fit", "Maximum-likelihood fit of a model spec");
  std::string data_path, spec_path, init_arg = "random", fit_out;
  OptimizerConfig opt;
  int restarts = 0;
  bool with_hessian = false;
  fit_cmd->add_option("--data", data_path, "Dataset JSON")->required();
  fit_cmd->add_option("--spec", spec_path, "Model spec JSON")->required();
  fit_cmd->add_option("--init", init_arg, "random | warm:FIT_FILE");
  fit_cmd->add_option("--lr", opt.learning_rate, "Adam learning rate");
  fit_cmd->add_option("--max-steps", opt.max_steps, "Iteration limit");
  fit_cmd->add_option("--minibatch", opt.minibatch_fraction,
                      "Fraction of configurations per update");
  fit_cmd->add_option("--plateau-tol", opt.plateau_rel_tol, "Plateau relative tolerance");
  fit_cmd->add_option("--plateau-window", opt.plateau_window, "Plateau window (steps)");
  fit_cmd->add_option("--seed", opt.seed, "Seed for init and minibatch shuffling");
  fit_cmd->add_option("--restarts", restarts, "Extra random restarts (best LL wins)");
  fit_cmd->add_flag("--hessian", with_hessian, "Attach Hessian standard errors");
  fit_cmd->add_option("--out", fit_out, "Output fit JSON")->required();

  auto* select = app.add_subcommand("select", "Greedy model-lattice selection");
  std::string fits_dir, table_path, select_out;
  double threshold = kDefaultXiThreshold;
  select->add_option("--fits", fits_dir, "Directory of fit JSON files");
  select->add_option("--table", table_path, "Lattice CSV (ham_level,diss_level,nll,dof)");
  select->add_option("--threshold", threshold, "Explanatory-power acceptance threshold");
  select->add_option("--out", select_out, "Output selection JSON")->required();

  auto* dof = app.add_subcommand("dof", "Print degree-of-freedom counts for a spec");
  std::string dof_spec;
  dof->add_option("--spec", dof_spec, "Model spec JSON")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "Verify the gradient against central FD");
  std::string gc_data, gc_spec;
  std::uint64_t gc_seed = 0;
  gradcheck->add_option("--data", gc_data, "Dataset JSON")->required();
  gradcheck->add_option("--spec", gc_spec, "Model spec JSON")->required();
  gradcheck->add_option("--seed", gc_seed, "Seed for the probe parameters")->required();

  auto* report = app.add_subcommand("report", "Observed vs predicted counts as CSV");
  std::string rep_fit, rep_data, rep_out;
  report->add_option("--fit", rep_fit, "Fit JSON")->required();
  report->add_option("--data", rep_data, "Dataset JSON")->required();
  report->add_option("--out", rep_out, "Output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return 2;
  }

  try {
    ManifestWriter manifest(argc, argv);
    if (*simulate) return cmd_simulate(model_path, plan_path, seed, out_path, threads, manifest);
    if (*fit_cmd) {
      opt.n_threads = threads;
      manifest.set_seed(opt.seed);
      nlohmann::ordered_json config;
      config["lr"] = opt.learning_rate;
      config["max_steps"] = opt.max_steps;
      config["minibatch"] = opt.minibatch_fraction;
      config["init"] = init_arg;
      config["restarts"] = restarts;
      manifest.set_config(config);
      return cmd_fit(data_path, spec_path, init_arg, opt, restarts, with_hessian, fit_out,
                     manifest);
    }
    if (*select) {
      if (fits_dir.empty() == table_path.empty())
        throw CLI::ValidationError("select", "pass exactly one of --fits or --table");
      manifest.set_config({{"threshold", threshold}});
      return cmd_select(fits_dir, table_path, threshold, select_out, manifest);
    }
    if (*dof) return cmd_dof(dof_spec);
    if (*gradcheck) return cmd_gradcheck(gc_data, gc_spec, gc_seed, threads);
    if (*report) return cmd_report(rep_fit, rep_data, rep_out, threads, manifest);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
