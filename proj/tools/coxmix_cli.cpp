#include "coxmix/data.hpp"
#include "coxmix/em.hpp"
#include "coxmix/errors.hpp"
#include "coxmix/serialize.hpp"
#include "coxmix/simgen.hpp"
#include "coxmix/tdroc.hpp"
#include "coxmix/tuning.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#ifndef COXMIX_VERSION
#define COXMIX_VERSION "0.0.0"
#endif

using namespace coxmix;
namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct PenaltyOptions {
  std::string penalty = "scad";
  double level = 0.0;
  double shape = 0.0;  // 0: kind default
  double epsilon = 1e-4;
  double prune = 1e-5;

  PenaltySpec spec(PenaltyKind kind) const {
    PenaltySpec s;
    s.kind = kind;
    s.level = level;
    s.shape = shape > 0.0 ? shape : default_shape(kind);
    s.epsilon = epsilon;
    s.prune_threshold = prune;
    s.validate();
    return s;
  }
  PenaltySpec spec() const { return spec(parse_penalty_kind(penalty)); }
};

struct EMOptions {
  int k_init = 10;
  int restarts = 5;
  int max_iter = 500;
  double eps_abs = 1e-6;
  double eps_rel = 1e-6;
  double bandwidth = 0.0;
  std::string kernel = "gaussian";
  std::string mixing = "exact";
  bool no_standardize = false;

  EMConfig config(std::uint64_t seed) const {
    EMConfig c;
    c.k_init = k_init;
    c.restarts = restarts;
    c.max_iterations = max_iter;
    c.eps_abs = eps_abs;
    c.eps_rel = eps_rel;
    c.seed = seed;
    c.bandwidth = bandwidth;
    c.kernel = parse_kernel_kind(kernel);
    c.standardize = !no_standardize;
    c.mixing_update = mixing == "closed-form" ? MixingUpdate::ClosedForm : MixingUpdate::Exact;
    return c;
  }
};

struct SchemaOptions {
  std::string time_col = "time";
  std::string status_col = "status";
  std::vector<std::string> covariates;

  CsvSchema schema() const { return CsvSchema{time_col, status_col, covariates}; }
};

struct SimOptions {
  std::size_t n = 600;
  double censor = 0.05;
  double rho = 0.5;
  std::vector<double> pi;
  std::vector<double> beta;  // K x p, row-major

  SimConfig config(std::uint64_t seed) const {
    SimConfig c;
    c.n = n;
    c.censor_target = censor;
    c.ar1_rho = rho;
    c.seed = seed;
    if (!pi.empty()) {
      if (beta.empty() || beta.size() % pi.size() != 0)
        throw UsageError("--beta must list K x p coefficients (row-major) when --pi is given");
      const std::size_t p = beta.size() / pi.size();
      c.pi_true = pi;
      c.beta_true.clear();
      for (std::size_t k = 0; k < pi.size(); ++k)
        c.beta_true.push_back(Eigen::Map<const Eigen::VectorXd>(beta.data() + k * p, static_cast<Eigen::Index>(p)));
    } else if (!beta.empty()) {
      throw UsageError("--beta needs --pi");
    }
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return c;
  }
};

void add_penalty(CLI::App* app, PenaltyOptions& o, bool with_level) {
  if (with_level) {
    app->add_option("--penalty", o.penalty, "Penalty kind")
        ->check(CLI::IsMember({"ls", "scad", "mcp"}))
        ->capture_default_str();
    app->add_option("--level", o.level, "Penalty level")->check(CLI::NonNegativeNumber)->capture_default_str();
  }
  app->add_option("--shape", o.shape, "SCAD a or MCP b; 0 selects 3.7 or 3")->capture_default_str();
  app->add_option("--epsilon", o.epsilon, "Floor inside the log-scale penalty")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--prune", o.prune, "Prune threshold on mixing proportions")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

void add_em(CLI::App* app, EMOptions& o) {
  app->add_option("--k-init", o.k_init, "Initial component count")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--restarts", o.restarts, "Random restarts")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--max-iter", o.max_iter, "EM iteration cap")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--eps-abs", o.eps_abs, "Absolute convergence tolerance")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--eps-rel", o.eps_rel, "Relative convergence tolerance")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--bandwidth", o.bandwidth, "Hazard smoothing bandwidth; 0 selects sd(Y) n^(-1/5)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app->add_option("--kernel", o.kernel, "Hazard smoothing kernel")
      ->check(CLI::IsMember({"gaussian", "epanechnikov"}))
      ->capture_default_str();
  app->add_option("--mixing", o.mixing, "Mixing-proportion update")
      ->check(CLI::IsMember({"exact", "closed-form"}))
      ->capture_default_str();
  app->add_flag("--no-standardize", o.no_standardize, "Fit on the raw covariate scale");
}

void add_schema(CLI::App* app, SchemaOptions& o) {
  app->add_option("--time-col", o.time_col, "Time column name")->capture_default_str();
  app->add_option("--status-col", o.status_col, "Status column name")->capture_default_str();
  app->add_option("--covariates", o.covariates, "Covariate columns (default: all others)")->delimiter(',');
}

void add_sim(CLI::App* app, SimOptions& o) {
  app->add_option("--n", o.n, "Sample size")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--censor", o.censor, "Target censoring fraction")->check(CLI::Range(0.0, 0.999))->capture_default_str();
  app->add_option("--rho", o.rho, "AR(1) covariate correlation")->check(CLI::Range(-0.999, 0.999))->capture_default_str();
  app->add_option("--pi", o.pi, "True mixing proportions")->delimiter(',');
  app->add_option("--beta", o.beta, "True coefficients, K x p row-major")->delimiter(',');
}

// Every option of the subcommand with its resolved value, so that the run can
// be repeated from the sidecar alone.
nlohmann::ordered_json resolved_options(const CLI::App* sub) {
  nlohmann::ordered_json opts = nlohmann::ordered_json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const auto& longs = opt->get_lnames();
    const std::string name = longs.empty() ? opt->get_name() : longs.front();
    if (name.empty() || name == "help" || name == "config") continue;
    const auto results = opt->results();
    if (opt->get_type_size() == 0) {
      opts[name] = opt->count() > 0;
    } else if (opt->get_expected_max() > 1) {
      opts[name] = results;
    } else if (!results.empty()) {
      opts[name] = results.front();
    } else {
      opts[name] = opt->get_default_str();
    }
  }
  return opts;
}

void write_meta(const CLI::App* sub, const fs::path& output, std::uint64_t seed,
                const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) {
  nlohmann::ordered_json meta;
  meta["command"] = sub->get_name();
  meta["seed"] = seed;
  meta["options"] = resolved_options(sub);
  meta["versions"] = {{"coxmix", COXMIX_VERSION},
                      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                    std::to_string(EIGEN_MINOR_VERSION)},
                      {"compiler", __VERSION__}};
  if (!extra.empty()) meta["results"] = extra;
  write_text_file(output.string() + ".meta.json", meta.dump(2) + "\n");
}

MarkerMode resolve_marker_mode(const std::string& name, const MixtureParams& params) {
  if (name == "auto") return params.K() == 1 ? MarkerMode::CoxLinearPredictor : MarkerMode::MixtureEventProb;
  return parse_marker_mode(name);
}

std::vector<double> read_external_markers(const fs::path& path) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      header.push_back(cell);
    }
  }
  std::size_t col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == "marker") col = c;
  if (col == header.size()) throw DataError("marker file '" + path.string() + "' has no 'marker' column");
  std::vector<double> markers;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::stringstream ls(line);
    std::string cell;
    for (std::size_t c = 0; c <= col; ++c)
      if (!std::getline(ls, cell, ',')) throw DataError("marker file row " + std::to_string(row) + ": too few columns");
    try {
      std::size_t used = 0;
      markers.push_back(std::stod(cell, &used));
    } catch (const std::exception&) {
      throw DataError("marker file row " + std::to_string(row) + ": marker is not a number");
    }
  }
  return markers;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penalized finite-mixture Cox regression with time-dependent ROC evaluation"};
  app.set_config("--config", "", "Key-value configuration file; command-line flags take precedence");
  app.set_version_flag("--version", COXMIX_VERSION);
  app.require_subcommand(1);

  std::uint64_t seed = 20240521;
  int workers = 1;

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Draw a dataset from the two-component simulation design");
  SimOptions sim_opts;
  std::string sim_out, sim_labels;
  add_sim(sim_cmd, sim_opts);
  sim_cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
  sim_cmd->add_option("--output,-o", sim_out, "Dataset CSV")->required();
  sim_cmd->add_option("--labels", sim_labels, "Optional CSV of true component labels");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit a penalized mixture Cox model");
  PenaltyOptions fit_pen;
  EMOptions fit_em;
  SchemaOptions fit_schema;
  std::string fit_data, fit_out = "model.json";
  fit_cmd->add_option("data", fit_data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  add_penalty(fit_cmd, fit_pen, true);
  add_em(fit_cmd, fit_em);
  add_schema(fit_cmd, fit_schema);
  fit_cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
  fit_cmd->add_option("--workers", workers, "Concurrent restarts")->check(CLI::PositiveNumber)->capture_default_str();
  fit_cmd->add_option("--output,-o", fit_out, "Model JSON")->capture_default_str();

  // tune
  auto* tune_cmd = app.add_subcommand("tune", "Select the penalty level by the modified BIC");
  PenaltyOptions tune_pen;
  EMOptions tune_em;
  SchemaOptions tune_schema;
  std::string tune_data, tune_out = "tuning.csv", tune_model = "best_model.json";
  std::vector<double> c_grid;
  double cn_constant = 1.0;
  tune_cmd->add_option("data", tune_data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  tune_cmd->add_option("--penalty", tune_pen.penalty, "Penalty kind")
      ->check(CLI::IsMember({"ls", "scad", "mcp"}))
      ->capture_default_str();
  add_penalty(tune_cmd, tune_pen, false);
  add_em(tune_cmd, tune_em);
  add_schema(tune_cmd, tune_schema);
  tune_cmd->add_option("--c-grid", c_grid, "Grid of c in level = c sqrt(log n / n); default 0.1..2.0 by 0.1")
      ->delimiter(',');
  tune_cmd->add_option("--cn-constant", cn_constant, "c in C_n = c log(log(n + K))")->capture_default_str();
  tune_cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
  tune_cmd->add_option("--workers", workers, "Concurrent grid points")->check(CLI::PositiveNumber)->capture_default_str();
  tune_cmd->add_option("--output,-o", tune_out, "Tuning CSV")->capture_default_str();
  tune_cmd->add_option("--model-output", tune_model, "Best model JSON")->capture_default_str();

  // predict
  auto* pred_cmd = app.add_subcommand("predict", "Compute risk markers and posterior memberships");
  SchemaOptions pred_schema;
  std::string pred_model, pred_data, pred_mode = "auto", pred_out = "markers.csv";
  double pred_time = 0.0;
  pred_cmd->add_option("--model", pred_model, "Model JSON")->required()->check(CLI::ExistingFile);
  pred_cmd->add_option("--data", pred_data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  add_schema(pred_cmd, pred_schema);
  pred_cmd->add_option("--marker-mode", pred_mode, "auto, cox_linear_predictor, mixture_posterior_lp or mixture_event_prob")
      ->check(CLI::IsMember({"auto", "cox_linear_predictor", "mixture_posterior_lp", "mixture_event_prob"}))
      ->capture_default_str();
  auto* pred_time_opt = pred_cmd->add_option("--time", pred_time, "Evaluation time for mixture_event_prob");
  pred_cmd->add_option("--output,-o", pred_out, "Marker CSV")->capture_default_str();

  // roc
  auto* roc_cmd = app.add_subcommand("roc", "Time-dependent ROC curves and AUC");
  SchemaOptions roc_schema;
  std::string roc_model, roc_data, roc_markers, roc_mode = "auto", roc_out = "roc.csv", auc_out = "auc.csv";
  std::vector<double> times;
  double marker_bandwidth = 0.0;
  roc_cmd->add_option("--model", roc_model, "Model JSON")->check(CLI::ExistingFile);
  roc_cmd->add_option("--data", roc_data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  roc_cmd->add_option("--markers", roc_markers, "CSV with a 'marker' column (marker mode external)")
      ->check(CLI::ExistingFile);
  add_schema(roc_cmd, roc_schema);
  roc_cmd->add_option("--times", times, "Evaluation times")->required()->delimiter(',');
  roc_cmd->add_option("--marker-mode", roc_mode, "auto, external, cox_linear_predictor, mixture_posterior_lp or mixture_event_prob")
      ->check(CLI::IsMember({"auto", "external", "cox_linear_predictor", "mixture_posterior_lp", "mixture_event_prob"}))
      ->capture_default_str();
  roc_cmd->add_option("--bandwidth", marker_bandwidth, "Marker kernel bandwidth; 0 selects 1.06 sd(M) n^(-1/5)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  roc_cmd->add_option("--output,-o", roc_out, "ROC CSV")->capture_default_str();
  roc_cmd->add_option("--auc-output", auc_out, "AUC CSV")->capture_default_str();

  // study
  auto* study_cmd = app.add_subcommand("study", "Monte Carlo bias/SD study over simulated replications");
  SimOptions study_sim;
  PenaltyOptions study_pen;
  EMOptions study_em;
  std::vector<std::string> study_penalties{"scad"};
  std::size_t replications = 100;
  std::vector<double> study_grid;
  double study_cn = 1.0;
  std::string study_out = "study.csv";
  add_sim(study_cmd, study_sim);
  study_cmd->add_option("--penalty", study_penalties, "Penalty kinds")
      ->delimiter(',')
      ->check(CLI::IsMember({"ls", "scad", "mcp"}))
      ->capture_default_str();
  add_penalty(study_cmd, study_pen, false);
  add_em(study_cmd, study_em);
  study_cmd->add_option("--replications", replications, "Replications")->check(CLI::PositiveNumber)->capture_default_str();
  study_cmd->add_option("--c-grid", study_grid, "Tuning grid of c")->delimiter(',');
  study_cmd->add_option("--cn-constant", study_cn, "c in C_n")->capture_default_str();
  study_cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
  study_cmd->add_option("--workers", workers, "Concurrent replications")->check(CLI::PositiveNumber)->capture_default_str();
  study_cmd->add_option("--output,-o", study_out, "Study CSV")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*sim_cmd) {
      const SimConfig cfg = sim_opts.config(seed);
      Rng rng(seed);
      const SimulatedData sim = generate_dataset(cfg, rng);
      write_text_file(sim_out, dataset_to_csv(sim.data));
      if (!sim_labels.empty()) write_text_file(sim_labels, labels_to_csv(sim.labels));
      const double censored = 1.0 - static_cast<double>(sim.data.n_events()) / static_cast<double>(sim.data.n());
      write_meta(sim_cmd, sim_out, seed, {{"censor_bound", sim.censor_bound}, {"censored_fraction", censored}});
      std::cout << "wrote " << sim.data.n() << " records (censored fraction " << censored << ") to " << sim_out << "\n";
    } else if (*fit_cmd) {
      const Dataset data = load_dataset(fit_data, fit_schema.schema());
      EMConfig cfg = fit_em.config(seed);
      cfg.workers = workers;
      const FittedModel model = fit_mixture(data, fit_pen.spec(), cfg);
      write_text_file(fit_out, model_to_json(model));
      write_meta(fit_cmd, fit_out, seed,
                 {{"K", model.params.K()}, {"converged", model.converged}, {"iterations", model.iterations},
                  {"warnings", model.warnings}});
      for (const auto& w : model.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "K = " << model.params.K() << ", penalized log-likelihood " << format_real(model.history.back())
                << (model.converged ? "" : " (not converged)") << "\n";
    } else if (*tune_cmd) {
      const Dataset data = load_dataset(tune_data, tune_schema.schema());
      const EMConfig cfg = tune_em.config(seed);
      const TuningReport report = select_tuning(data, tune_pen.spec(), c_grid.empty() ? default_c_grid() : c_grid, cfg,
                                                cn_constant, workers);
      write_text_file(tune_out, tuning_to_csv(report));
      write_text_file(tune_model, model_to_json(report.best_model));
      const TuningPoint& best = report.grid[report.best_index];
      write_meta(tune_cmd, tune_out, seed,
                 {{"best_index", report.best_index}, {"best_c", best.c}, {"best_level", best.level}, {"K_hat", best.K_hat}});
      write_meta(tune_cmd, tune_model, seed, {{"best_c", best.c}, {"best_level", best.level}});
      for (const auto& pt : report.grid)
        if (!pt.error.empty()) std::cerr << "warning: c = " << pt.c << " failed: " << pt.error << "\n";
      std::cout << "best c = " << best.c << " (level " << format_real(best.level) << "), K = " << best.K_hat << "\n";
    } else if (*pred_cmd) {
      const FittedModel model = model_from_json(read_text_file(pred_model));
      const Dataset data = load_dataset(pred_data, pred_schema.schema());
      const MarkerMode mode = resolve_marker_mode(pred_mode, model.params);
      if (mode == MarkerMode::MixtureEventProb && pred_time_opt->count() == 0)
        throw UsageError("--time is required for mixture_event_prob");
      const MarkerSet markers =
          compute_marker(model.params, data, mode, pred_time_opt->count() ? std::optional<double>(pred_time) : std::nullopt);
      const ResponsibilityMatrix s = e_step(data, model.params);
      std::string csv = "row,marker";
      for (Eigen::Index k = 0; k < s.cols(); ++k) csv += ",s" + std::to_string(k + 1);
      csv += "\n";
      for (std::size_t i = 0; i < data.n(); ++i) {
        csv += std::to_string(i + 1) + "," + format_real(markers.markers[i]);
        for (Eigen::Index k = 0; k < s.cols(); ++k) csv += "," + format_real(s(static_cast<Eigen::Index>(i), k));
        csv += "\n";
      }
      write_text_file(pred_out, csv);
      write_meta(pred_cmd, pred_out, model.seed, {{"marker_mode", std::string(to_string(mode))}});
    } else if (*roc_cmd) {
      const Dataset data = load_dataset(roc_data, roc_schema.schema());
      std::optional<FittedModel> model;
      if (!roc_model.empty()) model = model_from_json(read_text_file(roc_model));
      MarkerMode mode = MarkerMode::External;
      if (roc_mode == "external" || (roc_mode == "auto" && !model)) {
        if (roc_markers.empty()) throw UsageError("marker mode external needs --markers");
      } else {
        if (!model) throw UsageError("--model is required for model-based marker modes");
        mode = resolve_marker_mode(roc_mode, model->params);
      }
      std::vector<RocCurve> curves;
      std::vector<AucRow> rows;
      nlohmann::ordered_json summary = nlohmann::ordered_json::array();
      for (double t : times) {
        MarkerSet markers;
        if (mode == MarkerMode::External) {
          markers.markers = read_external_markers(roc_markers);
          if (markers.markers.size() != data.n())
            throw DataError("marker file has " + std::to_string(markers.markers.size()) + " rows, dataset has " +
                            std::to_string(data.n()));
        } else {
          markers = compute_marker(model->params, data, mode, t);
        }
        const double h = marker_bandwidth > 0.0 ? marker_bandwidth : default_marker_bandwidth(markers.markers);
        const WeightVector w = censoring_weights(markers, data, t, h);
        if (w.warnings > 0)
          std::cerr << "warning: t = " << t << ": " << w.warnings
                    << " censored subject(s) had zero conditional survival; weight set to 1\n";
        RocCurve curve = roc_curve(markers, w);
        rows.push_back({t, curve.auc, std::string(to_string(mode)), h});
        summary.push_back({{"t", t}, {"auc", curve.auc}});
        std::cout << "t = " << t << "  AUC = " << format_real(curve.auc) << "\n";
        curves.push_back(std::move(curve));
      }
      write_text_file(roc_out, roc_to_csv(curves));
      write_text_file(auc_out, auc_to_csv(rows));
      const std::uint64_t s = model ? model->seed : seed;
      write_meta(roc_cmd, roc_out, s);
      write_meta(roc_cmd, auc_out, s, {{"auc", summary}});
    } else if (*study_cmd) {
      StudyConfig cfg;
      cfg.sim = study_sim.config(seed);
      cfg.replications = replications;
      cfg.penalties.clear();
      for (const auto& name : study_penalties) cfg.penalties.push_back(study_pen.spec(parse_penalty_kind(name)));
      cfg.em = study_em.config(seed);
      cfg.c_grid = study_grid;
      cfg.cn_constant = study_cn;
      cfg.workers = workers;
      const StudyResult result = run_study(cfg);
      write_text_file(study_out, study_to_csv(result.rows));
      std::size_t failed = 0;
      for (const auto& rep : result.replications) failed += rep.ok ? 0 : 1;
      write_meta(study_cmd, study_out, seed, {{"censor_bound", result.censor_bound}, {"failed_fits", failed}});
      if (failed > 0) std::cerr << "warning: " << failed << " replication fit(s) failed and were excluded\n";
      std::cout << "wrote " << result.rows.size() << " rows to " << study_out << "\n";
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::domain_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
