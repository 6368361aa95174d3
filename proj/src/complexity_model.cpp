#include "oib/complexity_model.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace oib {

void MacsBreakdown::add(std::string stage, std::int64_t macs) {
  if (macs < 0) throw std::invalid_argument("MacsBreakdown: negative MACs for " + stage);
  per_stage.emplace_back(std::move(stage), macs);
  total += macs;
}

std::int64_t MacsBreakdown::stage(const std::string& name) const {
  for (const auto& [n, m] : per_stage)
    if (n == name) return m;
  throw std::out_of_range("MacsBreakdown: no stage " + name);
}

std::int64_t linear_macs(std::int64_t in_dim, std::int64_t out_dim) {
  if (in_dim < 0 || out_dim < 0) throw std::invalid_argument("linear_macs: negative dimension");
  return in_dim * out_dim;
}

std::int64_t fft_macs(std::int64_t n_x) {
  if (n_x < 1) throw std::invalid_argument("fft_macs: n_x must be >= 1");
  const auto padded = std::bit_ceil(static_cast<std::uint64_t>(n_x));
  return static_cast<std::int64_t>(padded) * std::countr_zero(padded);
}

MacsBreakdown network_macs(std::span<const std::int64_t> layer_sizes) {
  MacsBreakdown b;
  for (size_t l = 0; l + 1 < layer_sizes.size(); ++l)
    b.add("L" + std::to_string(l), linear_macs(layer_sizes[l], layer_sizes[l + 1]));
  return b;
}

std::int64_t saving_reference_macs(std::span<const std::int64_t> layer_sizes) {
  if (layer_sizes.size() < 2) throw std::invalid_argument("saving_reference_macs: need two sizes");
  const auto full = network_macs(layer_sizes).total;
  const auto n = layer_sizes.size();
  return full - linear_macs(layer_sizes[n - 2], layer_sizes[n - 1]);
}

PipelineMacs pipeline_macs(std::int64_t n_x, std::int64_t n_z,
                           std::span<const std::int64_t> head_layer_dims) {
  if (head_layer_dims.empty()) throw std::invalid_argument("pipeline_macs: empty head");
  PipelineMacs p;
  p.compression.add("fft", fft_macs(n_x));
  p.compression.add("A_rho", linear_macs(n_x, n_z));
  p.classification.add("Theta_rho", linear_macs(n_z, head_layer_dims.front()));
  for (size_t l = 0; l + 1 < head_layer_dims.size(); ++l)
    p.classification.add("L" + std::to_string(l + 1),
                         linear_macs(head_layer_dims[l], head_layer_dims[l + 1]));
  return p;
}

double saving_percent(const PipelineMacs& p, std::int64_t reference_macs) {
  return 100.0 * (1.0 - static_cast<double>(p.total()) / static_cast<double>(reference_macs));
}

TrainingCostEstimate training_cost_estimate(std::int64_t n_x, std::int64_t n_z, std::int64_t n_train) {
  const double nx = static_cast<double>(n_x);
  const double nz = static_cast<double>(n_z);
  const double n = static_cast<double>(n_train);
  TrainingCostEstimate e;
  e.transform = n_x > 1 ? n * nx * std::log2(nx) : 0.0;
  e.gib_eigen = nx * nx * nx;
  e.gib_covariance = nx * nx * n;
  e.lmmse = nz * nz * n;
  return e;
}

std::vector<SavingsRow> savings_table(std::span<const std::int64_t> layer_sizes,
                                      std::span<const std::int64_t> n_z_grid) {
  if (layer_sizes.size() < 3) throw std::invalid_argument("savings_table: network needs a head");
  const auto reference = saving_reference_macs(layer_sizes);
  const auto head = layer_sizes.subspan(1);
  std::vector<SavingsRow> rows;
  for (auto nz : n_z_grid) {
    const auto p = pipeline_macs(layer_sizes.front(), nz, head);
    rows.push_back({nz, p.compression.total, p.classification.total, saving_percent(p, reference)});
  }
  return rows;
}

std::string format_savings_table(const std::vector<SavingsRow>& rows) {
  std::string out = "n_z\tComp. [MACs]\tClass. [MACs]\tComp. Save [%]\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%lld\t%lld\t%lld\t%.2f\n", static_cast<long long>(r.n_z),
                  static_cast<long long>(r.compression), static_cast<long long>(r.classification),
                  r.saving_percent);
    out += buf;
  }
  return out;
}

nlohmann::json to_json(const MacsBreakdown& b) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& [name, macs] : b.per_stage) stages.push_back({{"stage", name}, {"macs", macs}});
  return {{"per_stage", stages}, {"total", b.total}};
}

nlohmann::json to_json(const std::vector<SavingsRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows)
    out.push_back({{"n_z", r.n_z},
                   {"macs_compression", r.compression},
                   {"macs_classification", r.classification},
                   {"saving_percent", r.saving_percent}});
  return out;
}

}  // namespace oib
