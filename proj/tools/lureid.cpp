// lureid: simulate, identify, sweep and report.
//
// Exit codes: 0 success, 2 usage or input error, 3 infeasible result.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "lureid/lureid.hpp"

namespace fs = std::filesystem;
using lureid::io::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitInfeasible = 3;

struct Options {
  std::string scenario;
  std::string dataset;
  std::string kernel;
  std::optional<double> sigma;
  std::optional<double> gamma;
  std::optional<double> gamma_min;
  std::optional<double> gamma_max;
  std::optional<int> n_gamma;
  std::string mode;
  std::optional<double> epsilon;
  std::optional<double> split;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  bool require_contractive = false;
  bool truth = false;
  std::string constrained_model;
  std::string kernel_only_model;
};

/// Everything a workflow needs after flags, scenario JSON and defaults have
/// been merged, in that order of precedence.
struct Resolved {
  lureid::Scenario scenario;
  bool scenario_given = false;
  lureid::Dataset dataset;
  std::optional<lureid::Vector> theta_true;
  lureid::SweepConfig sweep;
};

lureid::Scenario load_scenario(const std::string& arg) {
  if (arg.empty()) return lureid::builtin_scenario("experiment1");
  const fs::path p(arg);
  if (p.extension() == ".json") return lureid::io::scenario_from_json(lureid::io::read_json_file(p));
  return lureid::builtin_scenario(arg);
}

unsigned thread_cap() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LURE_ID_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v < 1) throw std::invalid_argument("");
      n = std::min<unsigned>(n, static_cast<unsigned>(v));
    } catch (const std::exception&) {
      throw lureid::InvalidInputError(std::string("LURE_ID_THREADS must be a positive integer, got '") +
                                      env + "'");
    }
  }
  return n;
}

Resolved resolve(const Options& o, bool need_data) {
  Resolved r;
  r.scenario_given = !o.scenario.empty();
  r.scenario = load_scenario(o.scenario);
  if (o.seed) r.scenario.seed = *o.seed;
  if (!o.kernel.empty()) r.scenario.kernel.family = lureid::kernel_family_from_string(o.kernel);
  if (o.sigma) r.scenario.kernel.sigma = *o.sigma;
  r.scenario.kernel.validate();

  lureid::SweepConfig& c = r.sweep;
  if (r.scenario.name == "experiment2") {
    c.gamma_min = 1e-4;
    c.mode = lureid::ident::FitMode::constrained;
  }
  if (o.gamma_min) c.gamma_min = *o.gamma_min;
  if (o.gamma_max) c.gamma_max = *o.gamma_max;
  if (o.n_gamma) c.n_gamma = *o.n_gamma;
  if (!o.mode.empty()) c.mode = lureid::ident::fit_mode_from_string(o.mode);
  if (o.epsilon) c.epsilon = *o.epsilon;
  if (o.split) c.split_ratio = *o.split;
  c.seed = r.scenario.seed;
  c.threads = thread_cap();
  c.validate();

  if (!need_data) return r;
  if (!o.dataset.empty()) {
    r.dataset = lureid::load_csv(o.dataset);
    if (r.scenario_given) r.theta_true = r.scenario.theta_true;
  } else {
    lureid::GeneratedData g = lureid::generate_scenario(r.scenario, r.scenario.seed);
    r.dataset = std::move(g.dataset);
    r.theta_true = g.theta_true;
  }
  r.scenario.kernel.input_dim = r.dataset.n_x();
  return r;
}

json config_echo(const Options& o, const Resolved& r) {
  json j = lureid::io::to_json(r.sweep);
  j["scenario"] = lureid::io::to_json(r.scenario);
  j["dataset"] = o.dataset.empty() ? json(nullptr) : json(o.dataset);
  j["kernel"] = lureid::io::to_json(r.scenario.kernel);
  if (o.gamma) j["gamma"] = *o.gamma;
  return j;
}

fs::path out_dir(const Options& o) {
  const fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw lureid::InvalidInputError("cannot create output directory '" + o.out + "'");
  }
  return dir;
}

void write_json(const fs::path& path, const json& j) { lureid::io::write_text_file(path, j.dump(2) + "\n"); }

std::string fmt(const std::optional<double>& v) {
  if (!v) return "-";
  std::ostringstream s;
  s.precision(4);
  s << *v;
  return s.str();
}

int cmd_simulate(const Options& o) {
  const Resolved r = resolve(o, false);
  const fs::path dir = out_dir(o);
  const lureid::GeneratedData g = lureid::generate_scenario(r.scenario, r.scenario.seed);
  lureid::save_csv(g.dataset, dir / "dataset.csv");
  write_json(dir / "scenario.json", lureid::io::to_json(r.scenario));
  if (o.truth) lureid::save_csv(g.truth, dir / "truth.csv");
  std::cout << "wrote " << (g.dataset.T() + 1) << " states to " << (dir / "dataset.csv").string() << "\n";
  return kExitOk;
}

int cmd_identify(const Options& o) {
  const Resolved r = resolve(o, true);
  const fs::path dir = out_dir(o);
  const lureid::FitOutcome fit = lureid::identify_single(
      r.dataset, r.theta_true, r.scenario.kernel, r.scenario.system.linear, r.sweep, *o.gamma);
  write_json(dir / "model.json", lureid::io::fit_document(fit.record, fit.model, config_echo(o, r)));
  std::cout << "gamma " << fit.record.gamma << " (" << lureid::ident::to_string(r.sweep.mode)
            << "): " << (fit.record.feasible ? "feasible" : "infeasible") << ", |A|_2 "
            << fmt(fit.record.a_norm) << ", l_delta " << fmt(fit.record.ell_delta) << ", val RMSE "
            << fmt(fit.record.val_rmse) << ", theta error " << fmt(fit.record.theta_error) << "\n";
  if (!fit.record.message.empty()) std::cout << "  " << fit.record.message << "\n";
  if (o.require_contractive && !fit.record.feasible) return kExitInfeasible;
  return kExitOk;
}

int cmd_sweep(const Options& o) {
  const Resolved r = resolve(o, true);
  const fs::path dir = out_dir(o);
  const lureid::SweepReport rep = lureid::run_sweep(r.dataset, r.theta_true, r.scenario.kernel,
                                                    r.scenario.system.linear, r.sweep);
  const json echo = config_echo(o, r);
  write_json(dir / "sweep.json", lureid::io::to_json(rep, echo));
  {
    std::ostringstream csv;
    lureid::io::write_sweep_csv(csv, rep);
    lureid::io::write_text_file(dir / "sweep.csv", csv.str());
  }
  const auto record_at = [&rep](double gamma) -> const lureid::SweepRecord& {
    for (const auto& rec : rep.records) {
      if (rec.gamma == gamma) return rec;
    }
    return rep.records.front();
  };
  if (rep.gamma_best_any) {
    write_json(dir / "model_best_rmse.json",
               lureid::io::fit_document(record_at(*rep.gamma_best_any), rep.best_any, echo));
  }

  if (!rep.kernel_check.holds) {
    std::cerr << "warning: kernel failed the nonexpansiveness check (worst ratio "
              << rep.kernel_check.worst_ratio << "); l_delta may not bound the residual's Lipschitz constant\n";
  }
  std::cout << "gamma      feas  |A|_2    l_delta  theta_err val_rmse\n";
  for (const auto& rec : rep.records) {
    std::cout << fmt(rec.gamma) << "\t" << (rec.feasible ? "yes" : "no") << "\t" << fmt(rec.a_norm)
              << "\t" << fmt(rec.ell_delta) << "\t" << fmt(rec.theta_error) << "\t"
              << fmt(rec.val_rmse) << "\n";
  }
  std::cout << rep.feasible_set.size() << " of " << rep.records.size() << " gamma values feasible\n";
  if (!rep.gamma_star) {
    std::cout << "infeasible: no contractive solution on this grid\n";
    return kExitInfeasible;
  }
  const lureid::SweepRecord& best = record_at(*rep.gamma_star);
  write_json(dir / "model.json", lureid::io::fit_document(best, rep.selected, echo));
  std::cout << "gamma* = " << *rep.gamma_star << ": |A|_2 " << fmt(best.a_norm) << ", l_delta "
            << fmt(best.ell_delta) << ", val RMSE " << fmt(best.val_rmse) << ", theta error "
            << fmt(best.theta_error) << "\n";
  return kExitOk;
}

int cmd_report(const Options& o) {
  const fs::path dir = out_dir(o);
  const auto c = lureid::io::fit_summary_from_json(lureid::io::read_json_file(o.constrained_model));
  const auto k = lureid::io::fit_summary_from_json(lureid::io::read_json_file(o.kernel_only_model));
  const auto metric = [](const lureid::io::FitSummary& f, double lureid::ModelMetrics::*field) {
    return f.model ? std::optional<double>(f.model->metrics.*field) : std::nullopt;
  };
  const auto verdict = [](const lureid::io::FitSummary& f) -> std::string {
    if (!f.model) return "n/a";
    return lureid::is_contractive(*f.model) ? "yes" : "no";
  };
  using lureid::io::csv_number;
  std::ostringstream csv;
  csv << "metric,constrained,kernel_only\n";
  csv << "gamma_star," << csv_number(c.gamma) << ',' << csv_number(k.gamma) << '\n';
  csv << "val_rmse," << csv_number(c.val_rmse) << ',' << csv_number(k.val_rmse) << '\n';
  csv << "a_norm," << csv_number(metric(c, &lureid::ModelMetrics::a_norm)) << ','
      << csv_number(metric(k, &lureid::ModelMetrics::a_norm)) << '\n';
  csv << "ell_delta," << csv_number(metric(c, &lureid::ModelMetrics::ell_delta)) << ','
      << csv_number(metric(k, &lureid::ModelMetrics::ell_delta)) << '\n';
  csv << "theta_error," << csv_number(c.theta_error) << ',' << csv_number(k.theta_error) << '\n';
  csv << "contractive," << verdict(c) << ',' << verdict(k) << '\n';
  lureid::io::write_text_file(dir / "report.csv", csv.str());
  std::cout << csv.str();
  return kExitOk;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--scenario", o.scenario, "built-in scenario name or scenario JSON file");
  sub->add_option("--seed", o.seed, "RNG seed (overrides the scenario's)");
  sub->add_option("--kernel", o.kernel, "kernel family")->check(CLI::IsMember({"gaussian", "laplacian"}));
  sub->add_option("--sigma", o.sigma, "kernel width")->check(CLI::PositiveNumber);
  sub->add_option("--out", o.out, "output directory")->capture_default_str();
}

void add_fit(CLI::App* sub, Options& o) {
  add_common(sub, o);
  sub->add_option("--dataset", o.dataset, "dataset CSV (default: simulate the scenario)")
      ->check(CLI::ExistingFile);
  sub->add_option("--mode", o.mode, "fit mode")->check(CLI::IsMember({"post_check", "constrained"}));
  sub->add_option("--epsilon", o.epsilon, "contraction margin for constrained mode");
  sub->add_option("--split", o.split, "training fraction");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Identification of contractive Lur'e systems with a kernel residual"};
  app.require_subcommand(1);
  Options o;

  CLI::App* simulate = app.add_subcommand("simulate", "generate a scenario dataset");
  add_common(simulate, o);
  simulate->add_flag("--truth", o.truth, "also write the noise-free states to truth.csv");

  CLI::App* identify = app.add_subcommand("identify", "fit a single gamma");
  add_fit(identify, o);
  identify->add_option("--gamma", o.gamma, "regularization weight")->required()->check(CLI::PositiveNumber);
  identify->add_flag("--require-contractive", o.require_contractive,
                     "exit 3 when the fit is not contractive");

  CLI::App* sweep = app.add_subcommand("sweep", "sweep gamma and select gamma*");
  add_fit(sweep, o);
  sweep->add_option("--gamma-min", o.gamma_min, "smallest gamma")->check(CLI::PositiveNumber);
  sweep->add_option("--gamma-max", o.gamma_max, "largest gamma")->check(CLI::PositiveNumber);
  sweep->add_option("--n-gamma", o.n_gamma, "number of grid points")->check(CLI::PositiveNumber);

  CLI::App* report = app.add_subcommand("report", "compare a constrained and a kernel-only model");
  report->add_option("--constrained", o.constrained_model, "model.json of the constrained fit")->required();
  report->add_option("--kernel-only", o.kernel_only_model, "model.json of the kernel-only fit")->required();
  report->add_option("--out", o.out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*simulate) return cmd_simulate(o);
    if (*identify) return cmd_identify(o);
    if (*sweep) return cmd_sweep(o);
    return cmd_report(o);
  } catch (const lureid::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
}
