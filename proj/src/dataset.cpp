#include "permsig/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "permsig/error.hpp"

namespace permsig {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cell.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell.push_back(ch);
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool parse_finite(const std::string& text, double& out) {
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, out, std::chars_format::general);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

Dataset::Dataset(Matrix features_, std::vector<int> labels_, int class_count_,
                 std::vector<std::string> feature_names_)
    : features(std::move(features_)),
      labels(std::move(labels_)),
      class_count(class_count_),
      feature_names(std::move(feature_names_)) {
  validate();
}

std::vector<std::size_t> Dataset::class_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(std::max(class_count, 0)), 0);
  for (int label : labels) ++sizes.at(static_cast<std::size_t>(label));
  return sizes;
}

void Dataset::validate() const {
  if (class_count < 1) throw DataError("class_count must be at least 1");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw DataError("feature rows (" + std::to_string(features.rows()) +
                    ") do not match label count (" + std::to_string(labels.size()) + ")");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= class_count) {
      throw DataError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                      " outside 0.." + std::to_string(class_count - 1));
    }
  }
  if (!features.allFinite()) throw DataError("feature matrix contains non-finite values");
  if (!feature_names.empty() && feature_names.size() != cols()) {
    throw DataError("feature_names length does not match column count");
  }
}

std::vector<std::size_t> FoldAssignment::members(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::complement(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) out.push_back(i);
  }
  return out;
}

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError("data file " + path.string() + " is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);

  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) {
    throw DataError("label column \"" + label_column + "\" not found in header of " +
                    path.string());
  }
  const auto label_pos = static_cast<std::size_t>(label_it - header.begin());

  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != label_pos) names.push_back(header[c]);
  }

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::map<std::string, int> codes;
  std::size_t row = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++row;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError("row " + std::to_string(row) + " (line " + std::to_string(line_no) +
                      ") has " + std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()));
    }
    std::vector<double> values;
    values.reserve(names.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string cell = trim(cells[c]);
      if (c == label_pos) {
        const auto [it, inserted] = codes.emplace(cell, static_cast<int>(codes.size()));
        labels.push_back(it->second);
        continue;
      }
      double value = 0.0;
      if (!parse_finite(cell, value)) {
        throw DataError("non-numeric or non-finite cell \"" + cell + "\" at row " +
                        std::to_string(row) + ", column \"" + header[c] + "\"");
      }
      values.push_back(value);
    }
    rows.push_back(std::move(values));
  }
  if (rows.size() < 2) {
    throw DataError("data file " + path.string() + " needs at least 2 data rows");
  }

  Matrix features(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < names.size(); ++c) {
      features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return Dataset(std::move(features), std::move(labels), static_cast<int>(codes.size()),
                 std::move(names));
}

void save_csv(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t c = 0; c < d.cols(); ++c) {
    out << (d.feature_names.empty() ? "x" + std::to_string(c) : d.feature_names[c]) << ',';
  }
  out << "label\n";
  out.precision(17);
  for (std::size_t r = 0; r < d.rows(); ++r) {
    for (std::size_t c = 0; c < d.cols(); ++c) {
      out << d.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) << ',';
    }
    out << d.labels[r] << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

Dataset scale_unit_interval(const Dataset& d) {
  if (d.rows() == 0) throw DataError("cannot scale an empty dataset");
  Dataset out = d;
  for (Eigen::Index c = 0; c < out.features.cols(); ++c) {
    auto column = out.features.col(c);
    const double lo = column.minCoeff();
    const double range = column.maxCoeff() - lo;
    if (range > 0.0) {
      column = ((column.array() - lo) / range).matrix();
      // guard the endpoints against rounding in (x - lo) / range
      column = column.cwiseMax(0.0).cwiseMin(1.0);
    } else {
      column.setZero();
    }
  }
  return out;
}

Dataset permute_labels(const Dataset& d, const PermutationPlan& plan) {
  if (d.rows() < 2) throw DataError("permutation needs at least 2 samples");
  auto stream = plan.stream(StreamTag::Permute);
  Dataset out = d;
  stream.shuffle(std::span<int>(out.labels));
  return out;
}

Dataset select_rows(const Dataset& d, std::span<const std::size_t> index) {
  Dataset out;
  out.class_count = d.class_count;
  out.feature_names = d.feature_names;
  out.features.resize(static_cast<Eigen::Index>(index.size()), d.features.cols());
  out.labels.reserve(index.size());
  for (std::size_t r = 0; r < index.size(); ++r) {
    out.features.row(static_cast<Eigen::Index>(r)) =
        d.features.row(static_cast<Eigen::Index>(index[r]));
    out.labels.push_back(d.labels.at(index[r]));
  }
  return out;
}

Dataset shuffle_rows(const Dataset& d, const PermutationPlan& plan) {
  auto stream = plan.stream(StreamTag::ShuffleRows);
  const auto order = random_permutation(d.rows(), stream);
  return select_rows(d, order);
}

FoldAssignment stratified_folds(const Dataset& d, int k, const PermutationPlan& plan) {
  if (k < 2) throw ConfigError("fold count k must be at least 2, got " + std::to_string(k));
  const auto sizes = d.class_sizes();
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    if (sizes[c] > 0 && sizes[c] < static_cast<std::size_t>(k)) {
      throw DataError("class " + std::to_string(c) + " has " + std::to_string(sizes[c]) +
                      " members, fewer than k=" + std::to_string(k));
    }
  }

  auto stream = plan.stream(StreamTag::Folds);
  FoldAssignment folds{std::vector<int>(d.rows(), -1), k};
  // Round-robin within each class; the fold cursor carries over between
  // classes so total fold sizes also differ by at most one.
  std::size_t cursor = 0;
  for (int c = 0; c < d.class_count; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < d.rows(); ++i) {
      if (d.labels[i] == c) members.push_back(i);
    }
    stream.shuffle(std::span<std::size_t>(members));
    for (std::size_t idx : members) {
      folds.fold_of[idx] = static_cast<int>(cursor % static_cast<std::size_t>(k));
      ++cursor;
    }
  }
  return folds;
}

Dataset split_null_groups(const Dataset& d, const PermutationPlan& plan) {
  if (d.class_count != 1) {
    throw DataError("null-group split needs a single-condition dataset, got " +
                    std::to_string(d.class_count) + " classes");
  }
  if (d.rows() % 2 != 0 || d.rows() < 2) {
    throw DataError("null-group split needs an even sample count, got " +
                    std::to_string(d.rows()));
  }
  auto stream = plan.stream(StreamTag::SplitGroups);
  const auto order = random_permutation(d.rows(), stream);
  Dataset out = d;
  out.class_count = 2;
  for (std::size_t r = 0; r < order.size(); ++r) {
    out.labels[order[r]] = r < order.size() / 2 ? 0 : 1;
  }
  return out;
}

Dataset trim_to_even(const Dataset& d, const PermutationPlan& plan) {
  if (d.rows() % 2 == 0) return d;
  auto stream = plan.stream(StreamTag::TrimRows);
  const auto order = random_permutation(d.rows(), stream);
  const std::size_t dropped = order.back();
  std::vector<std::size_t> keep;
  keep.reserve(d.rows() - 1);
  for (std::size_t i = 0; i < d.rows(); ++i) {
    if (i != dropped) keep.push_back(i);
  }
  return select_rows(d, keep);
}

Dataset synth_effect(int n_per_class, int dim, int classes, double effect,
                     const PermutationPlan& plan) {
  if (n_per_class < 2 || dim < 1 || classes < 2 || !(effect >= 0.0)) {
    throw ConfigError("synthetic data needs n_per_class >= 2, dim >= 1, classes >= 2, effect >= 0");
  }
  auto stream = plan.stream(StreamTag::Synth);
  const int n = n_per_class * classes;
  const int shifted = std::min(5, dim);
  Matrix x(n, dim);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < n_per_class; ++i) {
      const int r = c * n_per_class + i;
      for (int j = 0; j < dim; ++j) {
        x(r, j) = stream.normal() + (j < shifted ? c * effect : 0.0);
      }
      labels[static_cast<std::size_t>(r)] = c;
    }
  }
  const auto order = random_permutation(static_cast<std::size_t>(n), stream);
  return select_rows(Dataset(std::move(x), std::move(labels), classes), order);
}

Dataset synth_one_condition(int n, int dim, const PermutationPlan& plan) {
  if (n < 2 || dim < 1) throw ConfigError("synthetic data needs n >= 2 and dim >= 1");
  auto stream = plan.stream(StreamTag::Synth);
  Matrix x(n, dim);
  for (int r = 0; r < n; ++r) {
    for (int j = 0; j < dim; ++j) x(r, j) = stream.normal();
  }
  return Dataset(std::move(x), std::vector<int>(static_cast<std::size_t>(n), 0), 1);
}

}  // namespace permsig
