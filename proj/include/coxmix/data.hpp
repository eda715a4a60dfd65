#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace coxmix {

struct SurvivalRecord {
  double y = 0.0;  // observed time min(T, C)
  int delta = 0;   // 1 = event observed, 0 = censored
  Eigen::VectorXd x;
};

// Column mapping for CSV ingestion. An empty covariate list means "every
// column that is neither the time nor the status column".
struct CsvSchema {
  std::string time_column = "time";
  std::string status_column = "status";
  std::vector<std::string> covariates;
};

/// Right-censored survival data in columnar form.
///
/// Records keep their input order; `sort_index()` lists them by nondecreasing
/// time (stable), and `tie_start(pos)` gives the first sorted position that
/// shares the time at sorted position `pos`. Together they make every risk
/// set {j : y_j >= y_i} a suffix of the sorted order. Immutable once built.
class Dataset {
 public:
  Dataset(Eigen::VectorXd time, std::vector<int> status, Eigen::MatrixXd x,
          std::vector<std::string> covariate_names = {});

  static Dataset from_records(std::span<const SurvivalRecord> records);

  std::size_t n() const { return static_cast<std::size_t>(time_.size()); }
  std::size_t p() const { return static_cast<std::size_t>(x_.cols()); }
  std::size_t n_events() const { return n_events_; }

  double time(std::size_t i) const { return time_[static_cast<Eigen::Index>(i)]; }
  int status(std::size_t i) const { return status_[i]; }
  auto x(std::size_t i) const { return x_.row(static_cast<Eigen::Index>(i)); }

  const Eigen::VectorXd& times() const { return time_; }
  const std::vector<int>& statuses() const { return status_; }
  const Eigen::MatrixXd& covariates() const { return x_; }
  const std::vector<std::string>& covariate_names() const { return names_; }

  const std::vector<std::size_t>& sort_index() const { return order_; }
  std::size_t tie_start(std::size_t pos) const { return tie_start_[pos]; }

  SurvivalRecord record(std::size_t i) const;

  // Same outcomes, new covariate matrix (must have n rows).
  Dataset with_covariates(Eigen::MatrixXd x) const;

 private:
  Eigen::VectorXd time_;
  std::vector<int> status_;
  Eigen::MatrixXd x_;
  std::vector<std::string> names_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> tie_start_;
  std::size_t n_events_ = 0;
};

Dataset load_dataset(const std::filesystem::path& path, const CsvSchema& schema = {});
Dataset parse_dataset(std::string_view csv_text, const CsvSchema& schema = {});

// All j with y_j >= y_i, ascending by index. Ties are included.
std::vector<std::size_t> risk_set(const Dataset& data, std::size_t i);

struct Standardization {
  Eigen::VectorXd center;
  Eigen::VectorXd scale;
  std::vector<bool> constant;  // columns passed through untouched

  bool any_constant() const;
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& z) const;
  // Coefficients fitted on standardized covariates, expressed on the
  // original scale, and the linear-predictor offset beta_orig' * center that
  // the baseline hazard absorbs.
  Eigen::VectorXd beta_to_original(const Eigen::VectorXd& beta_std) const;
};

// Centers each covariate to mean 0 and sample sd 1. Requires n >= 2.
std::pair<Dataset, Standardization> standardize_covariates(const Dataset& data);

}  // namespace coxmix
