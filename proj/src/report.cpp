#include "permsig/report.hpp"

#include <cstdio>
#include <sstream>

namespace permsig {

namespace {

nlohmann::ordered_json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json ratio_json(const RatioSummary& r) {
  nlohmann::ordered_json j;
  j["mean_ratio"] = r.mean;
  j["finite_count"] = r.finite_count;
  j["infinite_count"] = r.infinite_count;
  return j;
}

}  // namespace

nlohmann::ordered_json report_json(const StudyReport& report) {
  nlohmann::ordered_json j;
  j["study"] = report.study;
  j["scheme"] = scheme_name(report.scheme.kind);
  if (report.scheme.kind == Scheme::KFold) j["k"] = report.scheme.k;
  if (report.scheme.kind == Scheme::Rub) {
    j["bound"] = report.scheme.bound == BoundKind::Empirical ? "empirical" : "vapnik";
  }
  j["m"] = report.m;
  j["null_count"] = report.null.statistics.size();
  j["alpha"] = report.alpha;
  j["mu"] = optional_number(report.mu);
  j["observed_mean"] = report.observed.mean;
  j["observed_sd"] = report.observed.sd;
  j["observed_count"] = report.observed.count;
  j["null_mean"] = report.null_summary.mean;
  j["null_sd"] = report.null_summary.sd;
  j["p_value"] = report.p_value;
  j["p_value_sd"] = report.p_value_sd;
  j["rejected"] = report.rejected;
  j["fwe_rate"] = optional_number(report.fwe_rate);
  j["fwe_rate_sd"] = optional_number(report.fwe_rate_sd);
  if (report.observed_generalization) {
    j["generalization"]["observed"] = ratio_json(*report.observed_generalization);
  }
  if (report.null_generalization) {
    j["generalization"]["null"] = ratio_json(*report.null_generalization);
  }
  j["histogram"]["edges"] = report.histogram.edges;
  j["histogram"]["counts"] = report.histogram.counts;
  auto seeds = nlohmann::ordered_json::array();
  for (const auto& plan : report.null.replicate_seeds) {
    seeds.push_back({plan.master_seed, plan.replicate_index});
  }
  j["seeds"] = std::move(seeds);
  return j;
}

std::string histogram_csv(const Histogram& h) {
  std::ostringstream out;
  out.precision(17);
  out << "bin_left,bin_right,count\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    out << h.edges[b] << ',' << h.edges[b + 1] << ',' << h.counts[b] << '\n';
  }
  return out.str();
}

std::string format4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::filesystem::path non_colliding_path(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return path;
  const auto parent = path.parent_path();
  const auto stem = path.stem().string();
  const auto ext = path.extension().string();
  for (int i = 1;; ++i) {
    auto candidate = parent / (stem + "-" + std::to_string(i) + ext);
    if (!std::filesystem::exists(candidate)) return candidate;
  }
}

}  // namespace permsig
