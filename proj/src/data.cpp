#include "coxmix/data.hpp"

#include "coxmix/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace coxmix {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string cell_error(std::size_t row, std::string_view column, std::string_view what) {
  std::ostringstream os;
  os << "row " << row << ", column '" << column << "': " << what;
  return os.str();
}

}  // namespace

Dataset::Dataset(Eigen::VectorXd time, std::vector<int> status, Eigen::MatrixXd x,
                 std::vector<std::string> covariate_names)
    : time_(std::move(time)), status_(std::move(status)), x_(std::move(x)),
      names_(std::move(covariate_names)) {
  const auto n = static_cast<std::size_t>(time_.size());
  if (n == 0) throw DataError("dataset is empty");
  if (status_.size() != n || static_cast<std::size_t>(x_.rows()) != n)
    throw DataError("time, status and covariate rows differ in length");
  if (names_.empty()) {
    for (Eigen::Index j = 0; j < x_.cols(); ++j) names_.push_back("x" + std::to_string(j + 1));
  } else if (names_.size() != static_cast<std::size_t>(x_.cols())) {
    throw DataError("covariate name count does not match covariate dimension");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double y = time_[static_cast<Eigen::Index>(i)];
    if (!std::isfinite(y) || y < 0.0)
      throw DataError("row " + std::to_string(i + 1) + ": time must be finite and nonnegative");
    if (status_[i] != 0 && status_[i] != 1)
      throw DataError("row " + std::to_string(i + 1) + ": status must be 0 or 1");
    if (!x_.row(static_cast<Eigen::Index>(i)).allFinite())
      throw DataError("row " + std::to_string(i + 1) + ": covariates must be finite");
    n_events_ += static_cast<std::size_t>(status_[i]);
  }
  if (n_events_ == 0) throw DataError("dataset has no event (status = 1) rows");

  order_.resize(n);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::stable_sort(order_.begin(), order_.end(),
                   [this](std::size_t a, std::size_t b) { return time_[a] < time_[b]; });
  tie_start_.resize(n);
  for (std::size_t pos = 0; pos < n; ++pos) {
    tie_start_[pos] = (pos > 0 && time_[order_[pos]] == time_[order_[pos - 1]]) ? tie_start_[pos - 1] : pos;
  }
}

Dataset Dataset::from_records(std::span<const SurvivalRecord> records) {
  if (records.empty()) throw DataError("dataset is empty");
  const auto p = records.front().x.size();
  Eigen::VectorXd time(static_cast<Eigen::Index>(records.size()));
  std::vector<int> status(records.size());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(records.size()), p);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].x.size() != p)
      throw DataError("row " + std::to_string(i + 1) + ": covariate length differs from row 1");
    time[static_cast<Eigen::Index>(i)] = records[i].y;
    status[i] = records[i].delta;
    x.row(static_cast<Eigen::Index>(i)) = records[i].x.transpose();
  }
  return Dataset(std::move(time), std::move(status), std::move(x));
}

SurvivalRecord Dataset::record(std::size_t i) const {
  if (i >= n()) throw std::out_of_range("record index out of range");
  return SurvivalRecord{time(i), status(i), x_.row(static_cast<Eigen::Index>(i)).transpose()};
}

Dataset Dataset::with_covariates(Eigen::MatrixXd x) const {
  auto names = x.cols() == x_.cols() ? names_ : std::vector<std::string>{};
  return Dataset(time_, status_, std::move(x), std::move(names));
}

Dataset parse_dataset(std::string_view text, const CsvSchema& schema) {
  std::vector<std::string_view> lines;
  {
    std::size_t start = 0;
    while (start <= text.size()) {
      auto pos = text.find('\n', start);
      auto line = text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
      if (!trim(line).empty()) lines.push_back(line);
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
  }
  if (lines.empty()) throw DataError("missing header row");
  auto header_view = lines.front();
  if (header_view.starts_with("\xEF\xBB\xBF")) header_view.remove_prefix(3);
  const auto header = split_commas(header_view);

  auto find_column = [&](std::string_view name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("header has no column named '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t time_col = find_column(schema.time_column);
  const std::size_t status_col = find_column(schema.status_column);
  std::vector<std::size_t> cov_cols;
  std::vector<std::string> cov_names;
  if (schema.covariates.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == time_col || c == status_col) continue;
      cov_cols.push_back(c);
      cov_names.emplace_back(header[c]);
    }
  } else {
    for (const auto& name : schema.covariates) {
      cov_cols.push_back(find_column(name));
      cov_names.push_back(name);
    }
  }
  if (cov_cols.empty()) throw DataError("no covariate columns");

  const std::size_t n = lines.size() - 1;
  if (n == 0) throw DataError("no data rows");
  Eigen::VectorXd time(static_cast<Eigen::Index>(n));
  std::vector<int> status(n);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cov_cols.size()));

  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t row = r + 1;
    const auto cells = split_commas(lines[r + 1]);
    if (cells.size() != header.size()) {
      throw DataError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                      " cells, found " + std::to_string(cells.size()));
    }
    auto number = [&](std::size_t c) {
      double v = 0.0;
      if (!parse_double(cells[c], v))
        throw DataError(cell_error(row, header[c], "cannot parse '" + std::string(cells[c]) + "' as a number"));
      if (!std::isfinite(v)) throw DataError(cell_error(row, header[c], "value is not finite"));
      return v;
    };
    const double y = number(time_col);
    if (y < 0.0) throw DataError(cell_error(row, header[time_col], "negative time"));
    const double s = number(status_col);
    if (s != 0.0 && s != 1.0)
      throw DataError(cell_error(row, header[status_col], "status must be 0 or 1, found '" +
                                                              std::string(cells[status_col]) + "'"));
    time[static_cast<Eigen::Index>(r)] = y;
    status[r] = static_cast<int>(s);
    for (std::size_t j = 0; j < cov_cols.size(); ++j)
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = number(cov_cols[j]);
  }
  return Dataset(std::move(time), std::move(status), std::move(x), std::move(cov_names));
}

Dataset load_dataset(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), schema);
}

std::vector<std::size_t> risk_set(const Dataset& data, std::size_t i) {
  if (i >= data.n()) throw std::out_of_range("risk_set: record index out of range");
  std::vector<std::size_t> out;
  const double yi = data.time(i);
  for (std::size_t j = 0; j < data.n(); ++j)
    if (data.time(j) >= yi) out.push_back(j);
  return out;
}

bool Standardization::any_constant() const {
  return std::find(constant.begin(), constant.end(), true) != constant.end();
}

Eigen::MatrixXd Standardization::apply(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd z = x;
  for (Eigen::Index j = 0; j < z.cols(); ++j) z.col(j) = (z.col(j).array() - center[j]) / scale[j];
  return z;
}

Eigen::MatrixXd Standardization::invert(const Eigen::MatrixXd& z) const {
  Eigen::MatrixXd x = z;
  for (Eigen::Index j = 0; j < x.cols(); ++j) x.col(j) = x.col(j).array() * scale[j] + center[j];
  return x;
}

Eigen::VectorXd Standardization::beta_to_original(const Eigen::VectorXd& beta_std) const {
  return beta_std.array() / scale.array();
}

std::pair<Dataset, Standardization> standardize_covariates(const Dataset& data) {
  if (data.n() < 2) throw std::invalid_argument("standardize_covariates needs at least two records");
  const auto& x = data.covariates();
  const auto p = x.cols();
  const double n = static_cast<double>(data.n());
  Standardization st{Eigen::VectorXd::Zero(p), Eigen::VectorXd::Ones(p), std::vector<bool>(static_cast<std::size_t>(p))};
  for (Eigen::Index j = 0; j < p; ++j) {
    const double mean = x.col(j).mean();
    const double var = (x.col(j).array() - mean).square().sum() / (n - 1.0);
    if (!(var > 0.0)) {
      st.constant[static_cast<std::size_t>(j)] = true;
      continue;
    }
    st.center[j] = mean;
    st.scale[j] = std::sqrt(var);
  }
  return {data.with_covariates(st.apply(x)), std::move(st)};
}

}  // namespace coxmix
