#include "defglm_cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include <spdlog/spdlog.h>

#include "defglm/basis.hpp"
#include "defglm/errors.hpp"
#include "defglm_cli/config.hpp"
#include "defglm_cli/traffic.hpp"

namespace defglm::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kFitStream = 0xF17ULL;
constexpr std::uint64_t kTrafficFit = 0x7AFF1CULL;
constexpr int kTrafficGridIntervals = 240;

const std::string* find(const Invocation& inv, const std::string& key) {
  const auto it = inv.options.find(key);
  return it == inv.options.end() || it->second.empty() ? nullptr : &it->second;
}

const std::string& require(const Invocation& inv, const std::string& key) {
  const auto* v = find(inv, key);
  if (v == nullptr) throw ConfigError(inv.command + ": --" + key + " is required");
  return *v;
}

long option_integer(const Invocation& inv, const std::string& key, long fallback) {
  const auto* v = find(inv, key);
  if (v == nullptr) return fallback;
  try {
    return parse_integer(*v, key);
  } catch (const DataError&) {
    throw ConfigError("--" + key + ": '" + *v + "' is not an integer");
  }
}

double option_number(const Invocation& inv, const std::string& key, double fallback) {
  const auto* v = find(inv, key);
  if (v == nullptr) return fallback;
  try {
    return parse_number(*v, key);
  } catch (const DataError&) {
    throw ConfigError("--" + key + ": '" + *v + "' is not a number");
  }
}

std::string b2s(bool b) { return b ? "true" : "false"; }

// Output bookkeeping shared by all commands.
class OutputSink {
 public:
  explicit OutputSink(fs::path manifest_dir) : dir_(std::move(manifest_dir)) {}

  void write(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_text_file(path.string(), text);
    files_.push_back({fs::relative(path, dir_).generic_string(), fnv1a_hex(text), text.size()});
    paths_.push_back(fs::absolute(path).string());
  }
  void write_csv(const fs::path& path, const CsvTable& table) { write(path, serialize_csv(table)); }

  std::vector<FileDigest> files_;
  std::vector<std::string> paths_;

 private:
  fs::path dir_;
};

FileDigest input_digest(const std::string& path) {
  const std::string bytes = read_text_file(path);
  return {path, fnv1a_hex(bytes), bytes.size()};
}

std::string absolute_path(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

void add_optim_settings(RunManifest& m, const OptimConfig& o) {
  m.settings["optim.batch_size"] = std::to_string(o.batch_size);
  m.settings["optim.max_iterations"] = std::to_string(o.max_iterations);
  m.settings["optim.trace_every"] = std::to_string(o.trace_every);
  m.settings["optim.stationarity_window"] = std::to_string(o.stationarity_window);
  m.settings["optim.stationarity_tol"] = format_number(o.stationarity_tol);
  m.settings["optim.rho"] = format_number(o.rho);
  m.settings["optim.epsilon"] = format_number(o.epsilon);
  m.settings["optim.max_abs_disp_predictor"] = format_number(o.max_abs_disp_predictor);
  m.settings["optim.implicit_penalty"] = b2s(o.implicit_penalty);
}

const char* kPmleNote =
    "pmle is a second-order difference penalty fitted on the same SGD/ADADELTA engine as the "
    "dropout methods, not a Newton-type penalized likelihood solver";

Problem problem_from(const ScenarioConfig& sc, const Dataset& data) {
  return make_problem(sc, scenario_bases(sc), data);
}

Method single_method(const Invocation& inv, const RunConfig& cfg) {
  if (const auto* m = find(inv, "method")) return method_from_string(*m);
  return cfg.methods.empty() ? Method::bernoulli : cfg.methods.front();
}

Dataset load_or_generate(const Invocation& inv, const RunConfig& cfg, std::uint64_t seed,
                         RunManifest& manifest) {
  if (const auto* data = find(inv, "data")) {
    manifest.inputs.push_back(input_digest(*data));
    return read_dataset(*data);
  }
  manifest.notes.push_back("data: replicate 1 generated from the config and seed");
  return generate_dataset(cfg.scenario, 1, seed);
}

void run_simulate(const Invocation& inv, const RunConfig& cfg, std::uint64_t seed, RunManifest& m,
                  OutputSink& sink, const fs::path& out) {
  const int replicate = static_cast<int>(option_integer(inv, "replicate", 1));
  if (replicate < 1) throw ConfigError("--replicate must be at least 1");
  m.settings["replicate"] = std::to_string(replicate);
  sink.write_csv(out, dataset_table(generate_dataset(cfg.scenario, replicate, seed)));
}

void run_scenario_cmd(const Invocation& inv, const RunConfig& cfg, std::uint64_t seed,
                      RunManifest& m, OutputSink& sink, const fs::path& out) {
  std::vector<Method> methods = cfg.methods;
  if (const auto* list = find(inv, "methods")) methods = parse_method_list(*list);
  if (methods.empty()) methods = {Method::bernoulli, Method::gaussian, Method::pmle};
  std::string names;
  for (Method x : methods) names += (names.empty() ? "" : ",") + std::string(to_string(x));
  m.settings["methods"] = names;
  m.settings["truncate_disp"] = b2s(cfg.truncate_disp);
  if (std::find(methods.begin(), methods.end(), Method::pmle) != methods.end()) {
    m.notes.push_back(kPmleNote);
  }

  const ScenarioResult res = run_scenario(cfg.scenario, methods, seed);
  sink.write_csv(out / "results.csv", results_table(res.rows));
  sink.write_csv(out / "summary.csv", summary_table(summarize(res.rows, cfg.truncate_disp), cfg.truncate_disp));
  sink.write_csv(out / "truth.csv", truth_table(cfg.scenario));
  for (const auto& mc : res.cv) {
    sink.write_csv(out / ("cv_" + std::string(to_string(mc.method)) + ".csv"), cv_table(mc.cv));
  }
  for (std::size_t i = 0; i < methods.size(); ++i) {
    m.settings["diverged." + std::string(to_string(methods[i]))] = std::to_string(res.diverged_counts[i]);
  }
}

void run_cv(const Invocation& inv, const RunConfig& cfg, std::uint64_t seed, RunManifest& m,
            OutputSink& sink, const fs::path& out) {
  const Method method = single_method(inv, cfg);
  if (method == Method::pmle) m.notes.push_back(kPmleNote);
  const Dataset data = load_or_generate(inv, cfg, seed, m);
  ScenarioConfig sc = cfg.scenario;
  sc.n = static_cast<int>(data.x.size());
  CvPlan plan;
  plan.method = method;
  plan.box = sc.box(method);
  plan.samples = sc.cv_samples;
  plan.folds = sc.cv_folds;
  plan.seed = seed;
  m.settings["method"] = std::string(to_string(method));
  const CvResult cv = random_search_cv(problem_from(sc, data), plan, sc.optim);
  m.settings["selected.param1"] = format_number(cv.param1);
  m.settings["selected.param2"] = format_number(cv.param2);
  sink.write_csv(out / "cv.csv", cv_table(cv));
}

void write_fit_outputs(OutputSink& sink, const fs::path& out, const FittedCurves& curves,
                       const FitResult& res, const std::string& x_name) {
  CsvTable curve{{x_name, "mean", "dispersion"}, {}};
  for (std::size_t k = 0; k < curves.grid.size(); ++k) {
    curve.rows.push_back({format_number(curves.grid[k]), format_number(curves.mean[k]),
                          format_number(curves.dispersion[k])});
  }
  sink.write_csv(out / "curve.csv", curve);

  CsvTable coef{{"block", "index", "value"}, {}};
  for (Eigen::Index j = 0; j < res.beta.size(); ++j) {
    coef.rows.push_back({"beta", std::to_string(j + 1), format_number(res.beta(j))});
  }
  for (Eigen::Index j = 0; j < res.alpha.size(); ++j) {
    coef.rows.push_back({"alpha", std::to_string(j + 1), format_number(res.alpha(j))});
  }
  sink.write_csv(out / "coefficients.csv", coef);

  CsvTable trace{{"iteration", "objective"}, {}};
  for (const auto& t : res.trace) trace.rows.push_back({std::to_string(t.iteration), format_number(t.objective)});
  sink.write_csv(out / "trace.csv", trace);
}

void record_fit(RunManifest& m, const FitResult& res) {
  m.settings["fit.iterations"] = std::to_string(res.iterations);
  m.settings["fit.termination"] = std::string(to_string(res.termination));
  m.settings["fit.rejected_steps"] = std::to_string(res.rejected_steps);
  if (res.diverged) throw NumericError("the fit diverged (non-finite objective or coefficients)");
}

void run_fit(const Invocation& inv, const RunConfig& cfg, std::uint64_t seed, RunManifest& m,
             OutputSink& sink, const fs::path& out) {
  const Method method = single_method(inv, cfg);
  if (method == Method::pmle) m.notes.push_back(kPmleNote);
  const double p1 = option_number(inv, "param1", 0.0);
  const double p2 = option_number(inv, "param2", 0.0);
  const Dataset data = load_or_generate(inv, cfg, seed, m);
  ScenarioConfig sc = cfg.scenario;
  sc.n = static_cast<int>(data.x.size());
  m.settings["method"] = std::string(to_string(method));
  m.settings["param1"] = format_number(p1);
  m.settings["param2"] = format_number(p2);

  const SplineDesign bases = scenario_bases(sc);
  Rng rng = make_stream(seed, {kFitStream, static_cast<std::uint64_t>(method)});
  const FitResult res = fit_method(make_problem(sc, bases, data), method, p1, p2, sc.optim, rng);
  record_fit(m, res);
  const auto grid = uniform_grid(0.0, 1.0, sc.grid_intervals);
  write_fit_outputs(sink, out, fitted_curves(sc.kernel(), bases, res, grid), res, "x");
}

void run_traffic(const Invocation& inv, const RunConfig& cfg, std::uint64_t seed, RunManifest& m,
                 OutputSink& sink, const fs::path& out) {
  const std::string& input = require(inv, "input");
  const std::string& sensor = require(inv, "sensor");
  const std::string& direction = require(inv, "direction");
  const NoiseKind noise = noise_kind_from_string(find(inv, "noise") ? *find(inv, "noise") : "bernoulli");
  if (noise == NoiseKind::none) throw ConfigError("--noise must be bernoulli or gaussian");
  const Method method = noise == NoiseKind::bernoulli ? Method::bernoulli : Method::gaussian;
  const int samples = static_cast<int>(option_integer(inv, "samples", 5000));
  const int mean_knots = static_cast<int>(option_integer(inv, "mean_knots", 12));
  const int disp_knots = static_cast<int>(option_integer(inv, "disp_knots", 8));
  std::optional<std::string> date_from, date_to;
  if (const auto* v = find(inv, "date_from")) date_from = *v;
  if (const auto* v = find(inv, "date_to")) date_to = *v;
  for (const auto* d : {&date_from, &date_to}) {
    if (*d && !valid_date(**d)) throw ConfigError("date filter '" + **d + "' is not YYYY-MM-DD");
  }

  m.inputs.push_back(input_digest(input));
  const TrafficIngest ingest = ingest_traffic(input);
  const auto rows = select_traffic(ingest.records, sensor, direction, date_from, date_to);
  m.settings["rows.used"] = std::to_string(rows.size());
  m.settings["rows.malformed"] = std::to_string(ingest.malformed);
  m.settings["rows.duplicates"] = std::to_string(ingest.duplicates);
  m.settings["method"] = std::string(to_string(method));
  m.settings["cv.samples"] = std::to_string(samples);
  m.settings["cv.folds"] = std::to_string(cfg.scenario.cv_folds);
  m.settings["knots.mean"] = std::to_string(mean_knots);
  m.settings["knots.disp"] = std::to_string(disp_knots);

  const SplineDesign bases{SplineBasis(0.0, 24.0, mean_knots, BoundaryMode::cyclic),
                           SplineBasis(0.0, 24.0, disp_knots, BoundaryMode::cyclic)};
  std::vector<double> hours(rows.size());
  Problem problem;
  problem.kernel = FamilyKernel::poisson();
  problem.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    hours[i] = rows[i].hour;
    problem.y(static_cast<Eigen::Index>(i)) = static_cast<double>(rows[i].count);
  }
  problem.X = design_matrix(bases.mean_basis, hours);
  problem.Z = design_matrix(bases.disp_basis, hours);

  CvPlan plan;
  plan.method = method;
  plan.box = traffic_box(method);
  plan.samples = samples;
  plan.folds = cfg.scenario.cv_folds;
  plan.seed = seed;
  const CvResult cv = random_search_cv(problem, plan, cfg.scenario.optim);
  m.settings["selected.param1"] = format_number(cv.param1);
  m.settings["selected.param2"] = format_number(cv.param2);
  sink.write_csv(out / "cv.csv", cv_table(cv));

  Rng rng = make_stream(seed, {kTrafficFit});
  OptimConfig oc = cfg.scenario.optim;
  oc.batch_size = std::min<int>(oc.batch_size, static_cast<int>(rows.size()));
  const FitResult res = fit_method(problem, method, cv.param1, cv.param2, oc, rng);
  record_fit(m, res);
  const auto grid = uniform_grid(0.0, 24.0, kTrafficGridIntervals);
  write_fit_outputs(sink, out, fitted_curves(problem.kernel, bases, res, grid), res, "hour");
}

bool single_file_output(const std::string& command) { return command == "simulate"; }

}  // namespace

CsvTable dataset_table(const Dataset& data) {
  CsvTable t{{"x", "y"}, {}};
  for (std::size_t i = 0; i < data.x.size(); ++i) {
    t.rows.push_back({format_number(data.x[i]), format_number(data.y[i])});
  }
  return t;
}

Dataset read_dataset(const std::string& path) {
  std::vector<std::size_t> lines;
  const CsvTable t = read_csv_file(path, &lines);
  const std::size_t cx = t.column("x");
  const std::size_t cy = t.column("y");
  Dataset d;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + ":" + std::to_string(lines[r]);
    if (row.size() != t.header.size()) {
      throw DataError(where + ": expected " + std::to_string(t.header.size()) + " fields, got " +
                      std::to_string(row.size()));
    }
    const double x = parse_number(row[cx], where + ": x");
    const double y = parse_number(row[cy], where + ": y");
    if (!std::isfinite(x) || !std::isfinite(y)) throw DataError(where + ": non-finite value");
    d.x.push_back(x);
    d.y.push_back(y);
  }
  if (d.x.empty()) throw DataError(path + ": no data rows");
  return d;
}

CsvTable results_table(const std::vector<ScenarioRow>& rows) {
  CsvTable t{{"family", "scenario", "n", "method", "replicate", "rmse_mean", "rmse_disp", "param1",
              "param2", "iterations", "termination", "diverged"},
             {}};
  for (const auto& r : rows) {
    t.rows.push_back({r.family, std::to_string(r.scenario), std::to_string(r.n), r.method,
                      std::to_string(r.replicate), format_number(r.rmse_mean),
                      format_number(r.rmse_disp), format_number(r.param1), format_number(r.param2),
                      std::to_string(r.iterations), r.termination, r.diverged ? "1" : "0"});
  }
  return t;
}

CsvTable summary_table(const std::vector<SummaryRow>& rows, bool truncate_disp) {
  CsvTable t{{"method", "n", "measure", "count", "min", "q25", "median", "q75", "max", "truncated"},
             {}};
  for (const auto& s : rows) {
    const bool truncated = truncate_disp && s.measure == "rmse_disp";
    t.rows.push_back({s.method, std::to_string(s.n), s.measure, std::to_string(s.count),
                      format_number(s.min), format_number(s.q25), format_number(s.median),
                      format_number(s.q75), format_number(s.max), truncated ? "1" : "0"});
  }
  return t;
}

CsvTable cv_table(const CvResult& cv) {
  CsvTable t;
  t.header = {"sample_index", "param1", "param2"};
  for (int f = 1; f <= cv.folds; ++f) t.header.push_back("fold_loglik_" + std::to_string(f));
  t.header.push_back("mean_loglik");
  t.header.push_back("selected_flag");
  for (const auto& r : cv.table) {
    std::vector<std::string> row{std::to_string(r.sample_index + 1), format_number(r.param1),
                                 format_number(r.param2)};
    for (double v : r.fold_loglik) row.push_back(format_number(v));
    row.push_back(format_number(r.mean_loglik));
    row.push_back(r.selected ? "1" : "0");
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable truth_table(const ScenarioConfig& config) {
  CsvTable t{{"x", "f", "g"}, {}};
  for (double x : uniform_grid(0.0, 1.0, config.grid_intervals)) {
    t.rows.push_back({format_number(x), format_number(mean_function(config.mean_index, x)),
                      format_number(dispersion_function(config.disp_index, x))});
  }
  return t;
}

ExecutionReport execute(const Invocation& invocation) {
  Invocation inv = invocation;
  const std::string config_text = inv.config_text.empty() ? default_config_text() : inv.config_text;
  const RunConfig cfg = parse_config(config_text, inv.config_source.empty() ? "<defaults>" : inv.config_source);

  std::uint64_t seed = cfg.seed.value_or(0);
  if (const auto* s = find(inv, "seed")) {
    try {
      seed = static_cast<std::uint64_t>(std::stoull(*s));
    } catch (const std::exception&) {
      throw ConfigError("--seed: '" + *s + "' is not a nonnegative integer");
    }
  }
  inv.options["seed"] = std::to_string(seed);
  for (const char* key : {"data", "input"}) {
    if (const auto* p = find(inv, key)) inv.options[key] = absolute_path(*p);
  }
  const fs::path out = absolute_path(require(inv, "out"));
  inv.options["out"] = out.string();

  RunManifest m;
  m.command = inv.command;
  m.options = inv.options;
  m.options.erase("out");  // location is not part of what gets reproduced
  m.config_text = config_text;
  m.config_digest = fnv1a_hex(config_text);
  m.seed = seed;
  m.version = software_version();
  m.started_utc = utc_timestamp();
  add_optim_settings(m, cfg.scenario.optim);

  const bool single = single_file_output(inv.command);
  const fs::path manifest_path = single ? fs::path(out.string() + ".manifest.json") : out / "manifest.json";
  OutputSink sink(manifest_path.parent_path());
  if (!single) fs::create_directories(out);

  spdlog::info("{}: seed {}, output {}", inv.command, seed, out.string());
  if (inv.command == "simulate") {
    run_simulate(inv, cfg, seed, m, sink, out);
  } else if (inv.command == "scenario") {
    run_scenario_cmd(inv, cfg, seed, m, sink, out);
  } else if (inv.command == "cv") {
    run_cv(inv, cfg, seed, m, sink, out);
  } else if (inv.command == "fit") {
    run_fit(inv, cfg, seed, m, sink, out);
  } else if (inv.command == "traffic") {
    run_traffic(inv, cfg, seed, m, sink, out);
  } else {
    throw ConfigError("unknown command '" + inv.command + "'");
  }

  m.outputs = sink.files_;
  m.finished_utc = utc_timestamp();
  write_text_file(manifest_path.string(), manifest_to_json(m));
  return {manifest_path.string(), sink.paths_, m};
}

ExecutionReport rerun(const std::string& manifest_path, const std::optional<std::string>& out,
                      bool verify) {
  const RunManifest recorded = manifest_from_json(read_text_file(manifest_path), manifest_path);
  for (const auto& in : recorded.inputs) {
    const FileDigest now = input_digest(in.path);
    if (now.digest != in.digest) {
      throw DataError("input '" + in.path + "' changed since the manifest was written");
    }
  }
  Invocation inv;
  inv.command = recorded.command;
  inv.options = recorded.options;
  inv.config_text = recorded.config_text;
  inv.config_source = manifest_path + " (embedded config)";
  if (out) {
    inv.options["out"] = *out;
  } else {
    const fs::path mp = fs::absolute(manifest_path);
    if (single_file_output(recorded.command)) {
      std::string p = mp.string();
      const std::string suffix = ".manifest.json";
      if (!p.ends_with(suffix)) throw ConfigError("cannot infer the output path from " + p);
      inv.options["out"] = p.substr(0, p.size() - suffix.size());
    } else {
      inv.options["out"] = mp.parent_path().string();
    }
  }
  ExecutionReport report = execute(inv);
  if (verify) {
    std::vector<std::string> problems;
    // A single-file command may be redirected to a new file name; match by position then.
    const bool by_position = single_file_output(recorded.command);
    for (std::size_t k = 0; k < recorded.outputs.size(); ++k) {
      const auto& want = recorded.outputs[k];
      const auto& got = report.manifest.outputs;
      const auto it = by_position ? (k < got.size() ? got.begin() + static_cast<long>(k) : got.end())
                                  : std::find_if(got.begin(), got.end(), [&](const FileDigest& f) {
                                      return f.path == want.path;
                                    });
      if (it == report.manifest.outputs.end()) {
        problems.push_back(want.path + " was not produced");
      } else if (it->digest != want.digest || it->bytes != want.bytes) {
        problems.push_back(want.path + " differs (" + it->digest + " vs " + want.digest + ")");
      }
    }
    if (report.manifest.outputs.size() != recorded.outputs.size()) {
      problems.push_back("output count changed");
    }
    if (!problems.empty()) {
      std::string msg = "rerun does not reproduce the recorded outputs:";
      for (const auto& p : problems) msg += "\n  " + p;
      throw NumericError(msg);
    }
    spdlog::info("rerun: all {} outputs match the manifest", recorded.outputs.size());
  }
  return report;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const DataError*>(&e) != nullptr) return 3;
  if (dynamic_cast<const DomainError*>(&e) != nullptr) return 3;
  if (dynamic_cast<const NumericError*>(&e) != nullptr) return 4;
  if (dynamic_cast<const fs::filesystem_error*>(&e) != nullptr) return 2;
  return 4;
}

}  // namespace defglm::cli
