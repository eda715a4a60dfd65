#pragma once

#include "coxmix/em.hpp"
#include "coxmix/simgen.hpp"
#include "coxmix/tdroc.hpp"
#include "coxmix/tuning.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace coxmix {

// %.17g; non-finite values become "nan", "inf" or "-inf" in CSV and null in JSON.
std::string format_real(double v);

// Field order: penalty, level, shape, epsilon, K, pi, beta, baseline,
// history, seed, then bookkeeping fields.
std::string model_to_json(const FittedModel& model);

// Restores params, spec, history and seed; other fields keep defaults.
FittedModel model_from_json(const std::string& text);

std::string dataset_to_csv(const Dataset& data);
std::string labels_to_csv(const std::vector<int>& labels);
std::string tuning_to_csv(const TuningReport& report);
std::string roc_to_csv(const std::vector<RocCurve>& curves);

struct AucRow {
  double t = 0.0;
  double auc = 0.0;
  std::string marker_mode;
  double bandwidth = 0.0;
};
std::string auc_to_csv(const std::vector<AucRow>& rows);
std::string study_to_csv(const std::vector<StudyRow>& rows);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace coxmix
