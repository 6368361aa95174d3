#pragma once

// Multiply-accumulate accounting for the compressed inference pipeline.
// Only weight-matrix products are counted: no bias adds, no activations.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace oib {

struct MacsBreakdown {
  std::vector<std::pair<std::string, std::int64_t>> per_stage;
  std::int64_t total = 0;

  void add(std::string stage, std::int64_t macs);
  std::int64_t stage(const std::string& name) const;
};

std::int64_t linear_macs(std::int64_t in_dim, std::int64_t out_dim);

/// N' log2 N' with N' the smallest power of two >= n_x.
std::int64_t fft_macs(std::int64_t n_x);

/// Full-network cost for consecutive layer sizes.
MacsBreakdown network_macs(std::span<const std::int64_t> layer_sizes);

/// Reference cost used for savings: the full network without its final
/// logits layer.
std::int64_t saving_reference_macs(std::span<const std::int64_t> layer_sizes);

struct PipelineMacs {
  MacsBreakdown compression;     // fft + A_rho
  MacsBreakdown classification;  // theta + head layers
  std::int64_t total() const { return compression.total + classification.total; }
};

/// head_layer_dims: sizes of the truncated network starting at its input
/// (the re-expanded width), e.g. 256-128-64-16-10.
PipelineMacs pipeline_macs(std::int64_t n_x, std::int64_t n_z,
                           std::span<const std::int64_t> head_layer_dims);

/// 100 (1 - pipeline / reference)
double saving_percent(const PipelineMacs& p, std::int64_t reference_macs);

struct TrainingCostEstimate {
  double transform = 0.0;        // N n_x log2 n_x
  double gib_eigen = 0.0;        // n_x^3
  double gib_covariance = 0.0;   // n_x^2 N
  double lmmse = 0.0;            // n_z^2 N
  double gib_total() const { return gib_eigen + gib_covariance; }
};

TrainingCostEstimate training_cost_estimate(std::int64_t n_x, std::int64_t n_z, std::int64_t n_train);

struct SavingsRow {
  std::int64_t n_z = 0;
  std::int64_t compression = 0;
  std::int64_t classification = 0;
  double saving_percent = 0.0;
};

/// One row per n_z for a network whose first layer is replaced by the
/// compress / re-expand pair.
std::vector<SavingsRow> savings_table(std::span<const std::int64_t> layer_sizes,
                                      std::span<const std::int64_t> n_z_grid);

std::string format_savings_table(const std::vector<SavingsRow>& rows);
nlohmann::json to_json(const MacsBreakdown& b);
nlohmann::json to_json(const std::vector<SavingsRow>& rows);

}  // namespace oib
