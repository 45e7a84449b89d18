#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "binar/calibration.hpp"
#include "binar/dataprep.hpp"
#include "binar/error.hpp"
#include "binar/estimation.hpp"
#include "binar/experiments.hpp"
#include "binar/io.hpp"
#include "binar/model.hpp"
#include "binar/monitoring.hpp"
#include "binar/rng.hpp"

namespace binar::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::uint64_t kDefaultSeed = 20240601;
constexpr std::uint64_t kReferenceStream = 0x636c692d72656600ULL;

struct RunConfig {
  std::string subcommand;
  std::string experiment_kind;
  fs::path config_path;
  fs::path out_dir = ".";
  std::optional<std::uint64_t> seed_flag;
  std::optional<int> threads_flag;
  bool quiet = false;
};

// Loaded configuration plus the resolved overrides.
struct Context {
  json config;
  fs::path base_dir;  // relative paths in the config resolve against this
  fs::path out_dir;
  std::uint64_t seed = kDefaultSeed;
  int threads = 1;
  bool quiet = false;
  std::ostream* log = nullptr;

  void note(const std::string& text) const {
    if (!quiet) *log << text << '\n';
  }
};

const json& section(const Context& ctx, const char* name) {
  if (!ctx.config.contains(name) || !ctx.config.at(name).is_object()) {
    throw ConfigError(std::string("/") + name, "required section is missing");
  }
  return ctx.config.at(name);
}

template <typename T>
T field_or(const json& j, const std::string& path, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + "/" + key, "has the wrong type");
  }
}

template <typename T>
T field(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) throw ConfigError(path + "/" + key, "required field is missing");
  return field_or<T>(j, path, key, T{});
}

fs::path input_path(const Context& ctx, const json& j, const std::string& path, const char* key) {
  fs::path p = field<std::string>(j, path, key);
  if (p.is_relative()) p = ctx.base_dir / p;
  return p;
}

std::ifstream open_input(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open '" + p.string() + "' for reading");
  return in;
}

void write_file(const Context& ctx, const std::string& name, const std::string& content) {
  const fs::path p = ctx.out_dir / name;
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << content;
  if (!out) throw Error("failed writing '" + p.string() + "'");
  ctx.note("wrote " + p.string());
}

template <typename Writer>
void write_with(const Context& ctx, const std::string& name, Writer&& writer) {
  std::ostringstream buf;
  writer(buf);
  write_file(ctx, name, buf.str());
}

void write_json(const Context& ctx, const std::string& name, const json& j) {
  write_file(ctx, name, j.dump(2) + "\n");
}

int model_n(const Context& ctx) {
  if (!ctx.config.contains("n")) throw ConfigError("/n", "required field is missing");
  const json& n = ctx.config.at("n");
  if (!n.is_number_integer() || n.get<int>() < 1) throw ConfigError("/n", "expected an integer >= 1");
  return n.get<int>();
}

SolverConfig solver_from(const json& j, const std::string& path) {
  SolverConfig solver;
  solver.score_tol = field_or(j, path, "score_tol", solver.score_tol);
  solver.step_tol = field_or(j, path, "step_tol", solver.step_tol);
  solver.max_iter = field_or(j, path, "max_iter", solver.max_iter);
  solver.box_bound = field_or(j, path, "box_bound", solver.box_bound);
  return solver;
}

std::vector<double> doubles_or(const json& j, const std::string& path, const char* key,
                               std::vector<double> fallback) {
  return field_or(j, path, key, std::move(fallback));
}

double threshold_value(const json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    try {
      return parse_double(j.get<std::string>(), path);
    } catch (const ParseError&) {
    }
  }
  throw ConfigError(path, "expected a number, \"inf\", or {\"table\": path}");
}

// simulate -------------------------------------------------------------------

int cmd_simulate(const Context& ctx) {
  const ModelSpec spec = model_spec_from_json(ctx.config);
  const json& s = section(ctx, "simulate");
  const int length = field<int>(s, "/simulate", "length");
  std::optional<int> init;
  if (s.contains("init") && !s.at("init").is_null()) init = field<int>(s, "/simulate", "init");
  const SeriesSample series = simulate_series(spec, length, ctx.seed, init);
  write_with(ctx, "series.csv", [&](std::ostream& o) { write_series_csv(o, series); });
  return kExitOk;
}

// fit ------------------------------------------------------------------------

int cmd_fit(const Context& ctx) {
  const int n = model_n(ctx);
  const json& s = section(ctx, "fit");
  auto in = open_input(input_path(ctx, s, "/fit", "series"));
  const SeriesSample series = read_series_csv(in);
  const FitResult fit = fit_mple(series, n, solver_from(s, "/fit"));
  json report = fit_to_json(fit);
  report["n"] = n;
  write_json(ctx, "fit.json", report);
  return kExitOk;
}

// calibrate ------------------------------------------------------------------

CalibrationConfig calibration_from(const Context& ctx, const json& s) {
  const std::string path = "/calibrate";
  CalibrationConfig config;
  config.horizon = field_or(s, path, "N", config.horizon);
  config.grid_m = field_or(s, path, "grid_m", config.grid_m);
  config.reps = field_or(s, path, "reps", config.reps);
  config.gammas = doubles_or(s, path, "gammas", config.gammas);
  config.alphas = doubles_or(s, path, "alphas", config.alphas);
  config.master_seed = ctx.seed;
  config.threads = ctx.threads;

  const std::string weighting = field_or<std::string>(s, path, "weighting", "inverse_sigma");
  if (weighting == "inverse_sigma") {
    config.weighting = CalibrationWeighting::inverse_sigma;
  } else if (weighting == "identity") {
    config.weighting = CalibrationWeighting::identity;
  } else if (weighting == "supplied") {
    config.weighting = CalibrationWeighting::supplied;
    if (!s.contains("A")) throw ConfigError(path + "/A", "required when weighting is 'supplied'");
    config.A = matrix_from_json(s.at("A"), path + "/A");
  } else {
    throw ConfigError(path + "/weighting", "expected inverse_sigma, identity or supplied");
  }

  const json sigma = s.contains("sigma") ? s.at("sigma") : json("reference");
  if (sigma.is_string() && sigma.get<std::string>() == "reference") {
    // sigma0_hat from one long simulation of the configured model.
    const ModelSpec spec = model_spec_from_json(ctx.config);
    const int length = field_or(s, path, "reference_length", 10000);
    const SeriesSample series = simulate_series(spec, length, derive_seed(ctx.seed, kReferenceStream));
    config.sigma = fit_mple(series, spec.n).sigma0_hat;
  } else if (sigma.is_string() && sigma.get<std::string>() == "identity") {
    const int dim = field<int>(s, path, "dim");
    config.sigma = Eigen::MatrixXd::Identity(dim, dim);
  } else if (sigma.is_array()) {
    config.sigma = matrix_from_json(sigma, path + "/sigma");
  } else {
    throw ConfigError(path + "/sigma", "expected \"reference\", \"identity\" or a matrix");
  }
  try {
    config.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
  return config;
}

int cmd_calibrate(const Context& ctx) {
  const CalibrationConfig config = calibration_from(ctx, section(ctx, "calibrate"));
  const ThresholdTable table = threshold_table(config);
  write_with(ctx, "thresholds.csv", [&](std::ostream& o) { write_threshold_csv(o, table); });
  json meta = {{"sigma", matrix_to_json(config.sigma)},
               {"reps", config.reps},
               {"grid_m", config.grid_m},
               {"N", config.horizon},
               {"seed", config.master_seed}};
  json unstable = json::array();
  for (double alpha : config.alphas) {
    if (config.reps * alpha < 5.0) unstable.push_back(alpha);
  }
  meta["unstable_alphas"] = unstable;
  write_json(ctx, "calibration.json", meta);
  return kExitOk;
}

// monitor --------------------------------------------------------------------

int cmd_monitor(const Context& ctx) {
  const int n = model_n(ctx);
  const std::string path = "/monitor";
  const json& s = section(ctx, "monitor");
  auto training_in = open_input(input_path(ctx, s, path, "training"));
  const SeriesSample training = read_series_csv(training_in);

  MonitorOptions options;
  options.horizon = field_or(s, path, "N", options.horizon);
  options.gamma = field_or(s, path, "gamma", options.gamma);
  options.alpha = field_or(s, path, "alpha", options.alpha);
  options.solver = solver_from(s, path);
  const std::string weighting = field_or<std::string>(s, path, "weighting", "inverse_sigma0");
  if (weighting == "inverse_sigma0") {
    options.weighting = WeightingPolicy::inverse_sigma0;
  } else if (weighting == "identity") {
    options.weighting = WeightingPolicy::identity;
  } else if (weighting == "supplied") {
    options.weighting = WeightingPolicy::supplied;
    if (!s.contains("A")) throw ConfigError(path + "/A", "required when weighting is 'supplied'");
    options.supplied_A = matrix_from_json(s.at("A"), path + "/A");
  } else {
    throw ConfigError(path + "/weighting", "expected inverse_sigma0, identity or supplied");
  }
  if (!s.contains("threshold")) throw ConfigError(path + "/threshold", "required field is missing");
  const json& threshold = s.at("threshold");
  if (threshold.is_object()) {
    auto table_in = open_input(input_path(ctx, threshold, path + "/threshold", "table"));
    options.threshold = read_threshold_csv(table_in);
  } else {
    options.threshold = threshold_value(threshold, path + "/threshold");
  }

  MonitorSetup setup = monitor_init(training, n, options);
  Monitor& monitor = setup.monitor;
  auto stream_in = open_input(input_path(ctx, s, path, "stream"));
  StreamCsvReader reader(stream_in, training.exo_dim());

  std::ostringstream log;
  log << "k,statistic,threshold,alarm\n";
  const std::string c_text = format_double(monitor.config().threshold);
  const MonitorResult result = monitor_run(
      monitor, [&] { return reader.next(); },
      [&](const Monitor& m, double statistic) {
        log << m.k() << ',' << format_double(statistic) << ',' << c_text << ','
            << (m.alarm_at() ? 1 : 0) << '\n';
      });
  write_file(ctx, "monitor_log.csv", log.str());
  json report = monitor_result_to_json(monitor, result);
  report["training_fit"] = fit_to_json(setup.fit);
  write_json(ctx, "monitor_result.json", report);
  if (result.alarm_at) {
    ctx.note("alarm at k = " + std::to_string(*result.alarm_at));
    return kExitAlarm;
  }
  return kExitOk;
}

// experiment -----------------------------------------------------------------

ExperimentConfig experiment_from(const Context& ctx, const std::string& kind) {
  const std::string path = "/experiment";
  const json empty = json::object();
  const json& s = ctx.config.contains("experiment") ? section(ctx, "experiment") : empty;
  ExperimentConfig config;
  config.spec = ctx.config.contains("beta") ? model_spec_from_json(ctx.config) : benchmark_spec();
  config.master_seed = ctx.seed;
  config.threads = ctx.threads;
  if (kind == "consistency") {
    config.m_list = {500, 1000, 1500};
    config.reps = 100;
  } else if (kind == "normality") {
    config.m_list = {400};
    config.reps = 1000;
  } else if (kind == "size") {
    config.m_list = {100, 200, 300};
    config.reps = 1000;
  } else {
    config.m_list = {100, 200, 300};
    config.reps = 500;
    config.alphas = {0.05};
    config.change = ChangeSpec{11, ParamVector(-1.0, 0.2, {0.4})};
  }
  config.m_list = field_or(s, path, "m_list", config.m_list);
  config.reps = field_or(s, path, "reps", config.reps);
  config.gammas = doubles_or(s, path, "gammas", config.gammas);
  config.alphas = doubles_or(s, path, "alphas", config.alphas);
  config.horizon = field_or(s, path, "N", config.horizon);
  config.reference_length = field_or(s, path, "reference_length", config.reference_length);
  config.calibration_reps = field_or(s, path, "calibration_reps", config.calibration_reps);
  config.calibration_grid_m = field_or(s, path, "calibration_grid_m", config.calibration_grid_m);
  config.trace_reps = field_or(s, path, "trace_reps", config.trace_reps);
  config.solver = solver_from(s, path);
  if (s.contains("change")) {
    const json& c = s.at("change");
    ChangeSpec change;
    change.at_k = field<int>(c, path + "/change", "at_k");
    const auto beta = field<std::vector<double>>(c, path + "/change", "beta");
    if (beta.size() < 2) throw ConfigError(path + "/change/beta", "needs at least two entries");
    change.beta = ParamVector(Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size())));
    config.change = change;
  }
  const std::string weighting = field_or<std::string>(s, path, "weighting", "reference");
  if (weighting == "reference") {
    config.weighting = ExperimentWeighting::reference;
  } else if (weighting == "training") {
    config.weighting = ExperimentWeighting::training;
  } else if (weighting == "identity") {
    config.weighting = ExperimentWeighting::identity;
  } else {
    throw ConfigError(path + "/weighting", "expected reference, training or identity");
  }
  if (s.contains("thresholds")) {
    auto in = open_input(input_path(ctx, s, path, "thresholds"));
    config.thresholds = read_threshold_csv(in);
  }
  try {
    config.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
  return config;
}

int cmd_experiment(const Context& ctx, const std::string& kind) {
  const ExperimentConfig config = experiment_from(ctx, kind);
  json meta = {{"kind", kind},
               {"model", model_spec_to_json(config.spec)},
               {"m_list", config.m_list},
               {"reps", config.reps},
               {"master_seed", config.master_seed}};
  if (kind == "consistency") {
    const auto report = run_consistency(config);
    write_with(ctx, "consistency.csv", [&](std::ostream& o) { write_consistency_csv(o, report); });
  } else if (kind == "normality") {
    const auto report = run_normality(config);
    write_with(ctx, "normality.csv", [&](std::ostream& o) { write_normality_csv(o, report); });
    write_with(ctx, "estimates.csv", [&](std::ostream& o) { write_estimates_csv(o, report); });
    meta["fits"] = report.fits;
    meta["failures"] = report.failures;
    meta["insufficient_sample"] = report.insufficient;
  } else if (kind == "size") {
    const auto report = run_size(config);
    write_with(ctx, "size.csv", [&](std::ostream& o) { write_size_csv(o, report); });
    write_with(ctx, "thresholds.csv", [&](std::ostream& o) { write_threshold_csv(o, report.thresholds); });
    meta["gammas"] = config.gammas;
    meta["alphas"] = config.alphas;
    meta["N"] = config.horizon;
    if (report.reference_A.size() > 0) meta["reference_A"] = matrix_to_json(report.reference_A);
  } else {
    const auto report = run_power(config);
    write_with(ctx, "power.csv", [&](std::ostream& o) { write_power_csv(o, report); });
    write_with(ctx, "thresholds.csv", [&](std::ostream& o) { write_threshold_csv(o, report.thresholds); });
    if (!report.traces.empty()) {
      write_with(ctx, "traces.csv", [&](std::ostream& o) { write_traces_csv(o, report); });
    }
    meta["gammas"] = config.gammas;
    meta["alphas"] = config.alphas;
    meta["N"] = config.horizon;
    meta["change_at_k"] = report.change_at;
    meta["change_beta"] = vector_to_json(config.change->beta.values());
    if (report.reference_A.size() > 0) meta["reference_A"] = matrix_to_json(report.reference_A);
  }
  write_json(ctx, kind + ".json", meta);
  return kExitOk;
}

// prep / compare -------------------------------------------------------------

IsoWeek iso_week_from(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
    throw ConfigError(path, "expected [iso_year, week]");
  }
  return {j[0].get<int>(), j[1].get<int>()};
}

int cmd_prep(const Context& ctx) {
  const std::string path = "/prep";
  const json& s = section(ctx, "prep");
  auto in = open_input(input_path(ctx, s, path, "panel"));
  const RatePanel panel = read_rate_panel(in);
  const auto years = field<std::vector<int>>(s, path, "baseline_years");
  const auto states = field<std::vector<std::string>>(s, path, "states");
  if (!s.contains("window")) throw ConfigError(path + "/window", "required field is missing");
  const json& w = s.at("window");
  if (!w.contains("first") || !w.contains("last")) {
    throw ConfigError(path + "/window", "needs 'first' and 'last'");
  }
  const EvaluationWindow window{iso_week_from(w.at("first"), path + "/window/first"),
                                iso_week_from(w.at("last"), path + "/window/last")};
  const std::string policy_name = field_or<std::string>(s, path, "week53", "map_to_52");
  Week53Policy policy;
  if (policy_name == "map_to_52") {
    policy = Week53Policy::map_to_52;
  } else if (policy_name == "strict") {
    policy = Week53Policy::strict;
  } else {
    throw ConfigError(path + "/week53", "expected map_to_52 or strict");
  }
  const BaselineTable baseline =
      compute_baseline(panel, std::set<int>(years.begin(), years.end()), states, window, policy);
  const BinomialSeries series = binarize_and_sum(panel, baseline, states, window);
  write_with(ctx, "binomial_series.csv", [&](std::ostream& o) { write_binomial_series_csv(o, series); });
  return kExitOk;
}

int cmd_compare(const Context& ctx) {
  const json& s = section(ctx, "compare");
  auto in = open_input(input_path(ctx, s, "/compare", "series"));
  const BinomialSeries series = read_binomial_series_csv(in);
  const ModelComparison comparison = model_comparison(series, solver_from(s, "/compare"));
  json report = comparison_to_json(comparison);
  report["n"] = series.n;
  report["T"] = static_cast<int>(series.x.size()) - 1;
  write_json(ctx, "comparison.json", report);
  return kExitOk;
}

Context load_context(const RunConfig& run, std::ostream& out) {
  Context ctx;
  ctx.log = &out;
  ctx.quiet = run.quiet;
  auto in = open_input(run.config_path);
  try {
    ctx.config = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  if (!ctx.config.is_object()) throw ConfigError("", "configuration must be a JSON object");
  ctx.base_dir = run.config_path.parent_path();

  ctx.seed = field_or<std::uint64_t>(ctx.config, "", "seed", kDefaultSeed);
  ctx.threads = field_or<int>(ctx.config, "", "threads", 1);
  if (const char* env = std::getenv("BINAR_SEED"); env && *env) {
    ctx.seed = static_cast<std::uint64_t>(parse_integer(env, "BINAR_SEED"));
  }
  if (const char* env = std::getenv("BINAR_THREADS"); env && *env) {
    ctx.threads = static_cast<int>(parse_integer(env, "BINAR_THREADS"));
  }
  if (run.seed_flag) ctx.seed = *run.seed_flag;
  if (run.threads_flag) ctx.threads = *run.threads_flag;

  ctx.out_dir = run.out_dir;
  std::error_code ec;
  fs::create_directories(ctx.out_dir, ec);
  if (ec || !fs::is_directory(ctx.out_dir)) {
    throw Error("output directory '" + ctx.out_dir.string() + "' is not writable");
  }
  return ctx;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig run;
  CLI::App app{"Binomial AR(1) simulation, estimation and sequential change-point monitoring"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  int threads = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration file")->required();
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--seed", seed, "Master seed (overrides config and BINAR_SEED)");
    sub->add_option("--threads", threads, "Worker threads (results do not depend on it)")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--quiet", run.quiet, "Suppress progress messages");
  };
  const std::vector<std::pair<const char*, const char*>> commands = {
      {"simulate", "Simulate a series to series.csv"},
      {"fit", "Maximum partial likelihood fit to fit.json"},
      {"calibrate", "Monte-Carlo thresholds to thresholds.csv"},
      {"monitor", "Run the sequential monitor over a stream (exit 3 on alarm)"},
      {"experiment", "Simulation studies: consistency, normality, size, power"},
      {"prep", "Deseasonalize a rate panel into binomial_series.csv"},
      {"compare", "AR(1) versus i.i.d. binomial comparison to comparison.json"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub);
    if (std::string(name) == "experiment") {
      sub->add_option("kind", run.experiment_kind, "consistency | normality | size | power")
          ->required()
          ->check(CLI::IsMember({"consistency", "normality", "size", "power"}));
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::stringstream cli_out, cli_err;
    app.exit(e, cli_out, cli_err);
    out << cli_out.str();
    err << cli_err.str();
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  for (CLI::App* sub : app.get_subcommands()) {
    run.subcommand = sub->get_name();
    if (sub->count("--seed")) run.seed_flag = seed;
    if (sub->count("--threads")) run.threads_flag = threads;
  }
  run.config_path = config_path;
  run.out_dir = out_dir;

  try {
    const Context ctx = load_context(run, out);
    if (run.subcommand == "simulate") return cmd_simulate(ctx);
    if (run.subcommand == "fit") return cmd_fit(ctx);
    if (run.subcommand == "calibrate") return cmd_calibrate(ctx);
    if (run.subcommand == "monitor") return cmd_monitor(ctx);
    if (run.subcommand == "experiment") return cmd_experiment(ctx, run.experiment_kind);
    if (run.subcommand == "prep") return cmd_prep(ctx);
    if (run.subcommand == "compare") return cmd_compare(ctx);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitRuntimeError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
  return kExitUsage;
}

}  // namespace binar::cli
