#include "maple/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace maple {

namespace {

std::string trim(std::string_view s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  auto end = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(begin, end - begin + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& text, std::size_t row, std::size_t col, const std::string& column) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (text.empty() || ec != std::errc{} || ptr != last || !std::isfinite(value)) {
    std::ostringstream msg;
    msg << "non-numeric cell at row " << row << ", column " << col << " (" << column << "): '" << text << "'";
    fail(ErrorCode::parse, msg.str());
  }
  return value;
}

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

// Population moments (divisor N) over the selected rows.
template <typename Get>
Moments moments(std::span<const std::size_t> rows, Get get) {
  double sum = 0.0;
  for (auto r : rows) sum += get(r);
  const double mean = sum / static_cast<double>(rows.size());
  double ss = 0.0;
  for (auto r : rows) {
    const double d = get(r) - mean;
    ss += d * d;
  }
  return {mean, std::sqrt(ss / static_cast<double>(rows.size()))};
}

}  // namespace

void Standardization::apply_row(std::span<double> x) const {
  for (std::size_t j = 1; j < x.size(); ++j) x[j] = (x[j] - mean[j]) / scale[j];
}

SyntheticKind parse_synthetic_kind(const std::string& name) {
  if (name == "linear") return SyntheticKind::linear;
  if (name == "sil") return SyntheticKind::sil;
  if (name == "step") return SyntheticKind::step;
  fail(ErrorCode::invalid_argument, "unknown synthetic kind '" + name + "' (expected linear, sil or step)");
}

std::string to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::linear: return "linear";
    case SyntheticKind::sil: return "sil";
    case SyntheticKind::step: return "step";
  }
  return "linear";
}

double synthetic_response(SyntheticKind kind, double t) {
  switch (kind) {
    case SyntheticKind::linear:
      return t;
    case SyntheticKind::sil:
      return 1.0 / (1.0 + std::exp(-20.0 * (t - 0.5)));
    case SyntheticKind::step:
      if (t < 1.0 / 3.0) return 0.0;
      if (t < 2.0 / 3.0) return 0.5;
      return 1.0;
  }
  return t;
}

Dataset load_csv(const std::filesystem::path& path, const std::string& target) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::parse, "'" + path.string() + "' is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_line(line);

  std::set<std::string> seen;
  for (const auto& name : header) {
    if (name.empty()) fail(ErrorCode::parse, "empty column name in header");
    if (!seen.insert(name).second) fail(ErrorCode::parse, "duplicate header '" + name + "'");
  }
  const auto target_it = std::find(header.begin(), header.end(), target);
  if (target_it == header.end()) fail(ErrorCode::invalid_argument, "target column '" + target + "' not found");
  const auto target_col = static_cast<std::size_t>(target_it - header.begin());
  if (header.size() < 2) fail(ErrorCode::parse, "need at least one feature column besides the target");

  std::vector<std::vector<double>> values;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      std::ostringstream msg;
      msg << "row " << row << " has " << cells.size() << " cells, expected " << header.size();
      fail(ErrorCode::parse, msg.str());
    }
    std::vector<double> parsed(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) parsed[c] = parse_cell(cells[c], row, c + 1, header[c]);
    values.push_back(std::move(parsed));
  }
  if (values.empty()) fail(ErrorCode::parse, "'" + path.string() + "' has no data rows");

  Dataset ds;
  const auto n = static_cast<Eigen::Index>(values.size());
  const auto p = static_cast<Eigen::Index>(header.size() - 1);
  ds.X.resize(n, p + 1);
  ds.y.resize(n);
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != target_col) ds.feature_names.push_back(header[c]);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = values[static_cast<std::size_t>(i)];
    ds.X(i, 0) = 1.0;
    Eigen::Index j = 1;
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c == target_col)
        ds.y(i) = r[c];
      else
        ds.X(i, j++) = r[c];
    }
  }
  return ds;
}

void write_csv(const Dataset& ds, const std::filesystem::path& path, const std::string& target) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write '" + path.string() + "'");
  for (const auto& name : ds.feature_names) out << name << ',';
  out << target << '\n';
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
    for (Eigen::Index j = 1; j < ds.X.cols(); ++j) out << ds.X(i, j) << ',';
    out << ds.y(i) << '\n';
  }
  if (!out) fail(ErrorCode::io, "failed writing '" + path.string() + "'");
}

SplitAssignment split(std::size_t n, std::uint64_t seed) {
  require(n >= 4, "split needs at least 4 rows");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t n_train = (n + 1) / 2;
  const std::size_t n_val = std::min((n + 3) / 4, n - n_train);
  SplitAssignment s;
  s.seed = seed;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
               order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return s;
}

Dataset standardize(const Dataset& ds, const SplitAssignment& split) {
  require(!split.train.empty(), "standardize needs a non-empty training split");
  for (auto r : split.train) require(r < ds.rows(), "split index out of range");

  Standardization st;
  const auto cols = static_cast<std::size_t>(ds.X.cols());
  st.mean.assign(cols, 0.0);
  st.scale.assign(cols, 1.0);
  for (std::size_t j = 1; j < cols; ++j) {
    const auto m = moments(split.train, [&](std::size_t r) { return ds.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)); });
    if (!(m.sd > 0.0)) fail(ErrorCode::invalid_argument, "column '" + ds.feature_names[j - 1] + "' has zero variance on the training split");
    st.mean[j] = m.mean;
    st.scale[j] = m.sd;
  }
  const auto my = moments(split.train, [&](std::size_t r) { return ds.y(static_cast<Eigen::Index>(r)); });
  if (!(my.sd > 0.0)) fail(ErrorCode::invalid_argument, "response has zero variance on the training split");
  st.y_mean = my.mean;
  st.y_scale = my.sd;

  Dataset out = ds;
  for (Eigen::Index i = 0; i < out.X.rows(); ++i) {
    st.apply_row({out.X.data() + i * out.X.cols(), cols});
    out.y(i) = st.apply_y(out.y(i));
  }
  out.standardized = true;
  out.scaling = std::move(st);
  return out;
}

Dataset destandardize(const Dataset& ds) {
  require(ds.standardized && ds.scaling, "dataset is not standardized");
  const auto& st = *ds.scaling;
  Dataset out = ds;
  for (Eigen::Index i = 0; i < out.X.rows(); ++i) {
    for (Eigen::Index j = 1; j < out.X.cols(); ++j) out.X(i, j) = out.X(i, j) * st.scale[static_cast<std::size_t>(j)] + st.mean[static_cast<std::size_t>(j)];
    out.y(i) = st.invert_y(out.y(i));
  }
  out.standardized = false;
  out.scaling.reset();
  return out;
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
  require(spec.n >= 1, "synthetic n must be >= 1");
  require(spec.p >= 1, "synthetic p must be >= 1");
  require(spec.noise_sigma >= 0.0, "synthetic noise must be >= 0");

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Dataset ds;
  const auto n = static_cast<Eigen::Index>(spec.n);
  const auto p = static_cast<Eigen::Index>(spec.p);
  ds.X.resize(n, p + 1);
  ds.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ds.X(i, 0) = 1.0;
    for (Eigen::Index j = 1; j <= p; ++j) ds.X(i, j) = unit(rng);
    // the noise draw happens even at sigma 0 so that X is independent of sigma
    const double eps = gauss(rng);
    ds.y(i) = synthetic_response(spec.kind, ds.X(i, 1)) + spec.noise_sigma * eps;
  }
  for (std::size_t j = 1; j <= spec.p; ++j) ds.feature_names.push_back("x" + std::to_string(j));
  return ds;
}

Dataset take_rows(const Dataset& ds, std::span<const std::size_t> rows) {
  Dataset out;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), ds.X.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] < ds.rows(), "row index out of range");
    out.X.row(static_cast<Eigen::Index>(i)) = ds.X.row(static_cast<Eigen::Index>(rows[i]));
    out.y(static_cast<Eigen::Index>(i)) = ds.y(static_cast<Eigen::Index>(rows[i]));
  }
  out.feature_names = ds.feature_names;
  out.standardized = ds.standardized;
  out.scaling = ds.scaling;
  return out;
}

}  // namespace maple
