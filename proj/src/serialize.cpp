#include "coxmix/serialize.hpp"

#include "coxmix/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace coxmix {

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string json_real(double v) { return std::isfinite(v) ? format_real(v) : "null"; }

std::string json_string(std::string_view s) { return nlohmann::json(std::string(s)).dump(); }

template <class Range>
std::string json_array(const Range& values) {
  std::string out = "[";
  bool first = true;
  for (double v : values) {
    if (!first) out += ", ";
    out += json_real(v);
    first = false;
  }
  return out + "]";
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

std::string model_to_json(const FittedModel& model) {
  const auto& params = model.params;
  const std::size_t K = params.K();
  std::ostringstream os;
  os << "{\n";
  os << "  \"penalty\": " << json_string(to_string(model.spec.kind)) << ",\n";
  os << "  \"level\": " << json_real(model.spec.level) << ",\n";
  os << "  \"shape\": " << json_real(model.spec.shape) << ",\n";
  os << "  \"epsilon\": " << json_real(model.spec.epsilon) << ",\n";
  os << "  \"K\": " << K << ",\n";
  os << "  \"pi\": " << json_array(to_vector(params.pi)) << ",\n";
  os << "  \"beta\": [";
  for (std::size_t k = 0; k < K; ++k) os << (k ? ", " : "") << json_array(to_vector(params.components[k].beta));
  os << "],\n";
  os << "  \"baseline\": {\n";
  const BaselineHazard* first = K > 0 ? &params.components[0].baseline : nullptr;
  os << "    \"event_times\": " << (first ? json_array(first->event_times) : "[]") << ",\n";
  os << "    \"increments\": [";
  for (std::size_t k = 0; k < K; ++k) os << (k ? ", " : "") << json_array(params.components[k].baseline.increments);
  os << "],\n";
  os << "    \"kernel\": " << json_string(first ? to_string(first->kernel) : "gaussian") << ",\n";
  os << "    \"bandwidth\": " << json_real(first ? first->bandwidth : 0.0) << "\n";
  os << "  },\n";
  os << "  \"history\": " << json_array(model.history) << ",\n";
  os << "  \"seed\": " << model.seed << ",\n";
  os << "  \"prune_threshold\": " << json_real(model.spec.prune_threshold) << ",\n";
  os << "  \"restart\": " << model.restart << ",\n";
  os << "  \"iterations\": " << model.iterations << ",\n";
  os << "  \"converged\": " << (model.converged ? "true" : "false") << ",\n";
  os << "  \"components_distinct\": " << (model.components_distinct ? "true" : "false") << ",\n";
  os << "  \"warnings\": [";
  for (std::size_t w = 0; w < model.warnings.size(); ++w) os << (w ? ", " : "") << json_string(model.warnings[w]);
  os << "]\n}\n";
  return os.str();
}

FittedModel model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model JSON does not parse: ") + e.what());
  }
  auto real = [](const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  try {
    FittedModel m;
    m.spec.kind = parse_penalty_kind(j.at("penalty").get<std::string>());
    m.spec.level = real(j.at("level"));
    m.spec.shape = real(j.at("shape"));
    m.spec.epsilon = real(j.at("epsilon"));
    if (j.contains("prune_threshold")) m.spec.prune_threshold = real(j.at("prune_threshold"));
    const std::size_t K = j.at("K").get<std::size_t>();
    const auto& pi = j.at("pi");
    const auto& beta = j.at("beta");
    const auto& base = j.at("baseline");
    const auto& inc = base.at("increments");
    if (pi.size() != K || beta.size() != K || inc.size() != K)
      throw DataError("model JSON: pi, beta and increments must each have K entries");
    const auto times = base.at("event_times").get<std::vector<double>>();
    const KernelKind kernel = parse_kernel_kind(base.at("kernel").get<std::string>());
    const double bandwidth = real(base.at("bandwidth"));
    m.params.pi.resize(static_cast<Eigen::Index>(K));
    for (std::size_t k = 0; k < K; ++k) {
      m.params.pi[static_cast<Eigen::Index>(k)] = real(pi[k]);
      const auto b = beta[k].get<std::vector<double>>();
      ComponentFit c;
      c.beta = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
      c.baseline = BaselineHazard{times, inc[k].get<std::vector<double>>(), kernel, bandwidth};
      if (c.baseline.increments.size() != times.size())
        throw DataError("model JSON: increments length differs from event_times");
      c.converged = true;
      m.params.components.push_back(std::move(c));
    }
    for (const auto& h : j.at("history")) m.history.push_back(real(h));
    m.seed = j.at("seed").get<std::uint64_t>();
    m.selected_K = K;
    if (j.contains("restart")) m.restart = j["restart"].get<int>();
    if (j.contains("iterations")) m.iterations = j["iterations"].get<int>();
    if (j.contains("converged")) m.converged = j["converged"].get<bool>();
    if (j.contains("components_distinct")) m.components_distinct = j["components_distinct"].get<bool>();
    if (j.contains("warnings")) m.warnings = j["warnings"].get<std::vector<std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model JSON is missing or mistypes a field: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("model JSON: ") + e.what());
  }
}

std::string dataset_to_csv(const Dataset& data) {
  std::string out = "time,status";
  for (const auto& name : data.covariate_names()) out += "," + name;
  out += "\n";
  for (std::size_t i = 0; i < data.n(); ++i) {
    out += format_real(data.time(i));
    out += data.status(i) == 1 ? ",1" : ",0";
    for (std::size_t j = 0; j < data.p(); ++j) out += "," + format_real(data.x(i)[static_cast<Eigen::Index>(j)]);
    out += "\n";
  }
  return out;
}

std::string labels_to_csv(const std::vector<int>& labels) {
  std::string out = "row,component\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out += std::to_string(i + 1) + "," + std::to_string(labels[i] + 1) + "\n";
  return out;
}

std::string tuning_to_csv(const TuningReport& report) {
  std::string out = "c,level,K_hat,bic,loglik,iterations,converged\n";
  for (const auto& pt : report.grid) {
    const bool failed = !pt.error.empty();
    out += format_real(pt.c) + "," + format_real(pt.level) + "," + (failed ? "" : std::to_string(pt.K_hat)) + "," +
           (failed ? "nan" : format_real(pt.bic)) + "," + (failed ? "nan" : format_real(pt.loglik)) + "," +
           std::to_string(pt.iterations) + "," + (pt.converged ? "true" : "false") + "\n";
  }
  return out;
}

std::string roc_to_csv(const std::vector<RocCurve>& curves) {
  std::string out = "t,threshold,sensitivity,one_minus_specificity\n";
  for (const auto& c : curves)
    for (const auto& p : c.points)
      out += format_real(c.t) + "," + format_real(p.threshold) + "," + format_real(p.sensitivity) + "," +
             format_real(p.one_minus_specificity) + "\n";
  return out;
}

std::string auc_to_csv(const std::vector<AucRow>& rows) {
  std::string out = "t,auc,marker_mode,bandwidth\n";
  for (const auto& r : rows)
    out += format_real(r.t) + "," + format_real(r.auc) + "," + r.marker_mode + "," + format_real(r.bandwidth) + "\n";
  return out;
}

std::string study_to_csv(const std::vector<StudyRow>& rows) {
  std::string out =
      "penalty,n,censor_target,component,parameter,bias,sd,replications_used,K_hat_mode,K_correct_fraction\n";
  for (const auto& r : rows)
    out += r.penalty + "," + std::to_string(r.n) + "," + format_real(r.censor_target) + "," +
           std::to_string(r.component) + "," + r.parameter + "," + format_real(r.bias) + "," + format_real(r.sd) + "," +
           std::to_string(r.replications_used) + "," + std::to_string(r.K_hat_mode) + "," +
           format_real(r.K_correct_fraction) + "\n";
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  f << text;
  if (!f) throw std::runtime_error("write to '" + path.string() + "' failed");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

}  // namespace coxmix
