#include "oib/complexity_model.hpp"

#include <doctest.h>

#include <array>
#include <cmath>

using namespace oib;

namespace {

const std::array<std::int64_t, 6> kShallow = {784, 256, 128, 64, 16, 10};

}  // namespace

TEST_CASE("shallow network layer costs") {
  const MacsBreakdown b = network_macs(kShallow);
  CHECK(b.stage("L0") == 200704);
  CHECK(b.stage("L1") == 32768);
  CHECK(b.stage("L2") == 8192);
  CHECK(b.stage("L3") == 1024);
  CHECK(b.stage("L4") == 160);
  CHECK(b.total == 242848);
  CHECK_THROWS_AS(b.stage("L5"), std::out_of_range);
}

TEST_CASE("fft cost") {
  CHECK(fft_macs(784) == 1024 * 10);
  CHECK(fft_macs(1024) == 1024 * 10);
  CHECK(fft_macs(1025) == 2048 * 11);
  CHECK(fft_macs(1) == 0);
  CHECK_THROWS(fft_macs(0));
}

TEST_CASE("savings table for the shallow network") {
  struct Row {
    std::int64_t n_z, comp, cls;
    double save;
  };
  const std::array<Row, 10> expected = {{{10, 18080, 44704, 74.13},
                                          {20, 25920, 47264, 69.84},
                                          {30, 33760, 49824, 65.56},
                                          {40, 41600, 52384, 61.27},
                                          {50, 49440, 54944, 56.99},
                                          {60, 57280, 57504, 52.70},
                                          {70, 65120, 60064, 48.42},
                                          {80, 72960, 62624, 44.13},
                                          {90, 80800, 65184, 39.85},
                                          {100, 88640, 67744, 35.56}}};
  std::vector<std::int64_t> grid;
  for (const auto& r : expected) grid.push_back(r.n_z);
  const auto rows = savings_table(kShallow, grid);
  REQUIRE(rows.size() == expected.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].compression == expected[i].comp);
    CHECK(rows[i].classification == expected[i].cls);
    CHECK(std::abs(rows[i].saving_percent - expected[i].save) <= 0.005 + 1e-9);
  }
  CHECK(saving_reference_macs(kShallow) == 242688);
  const std::string text = format_savings_table(rows);
  CHECK(text.find("10\t18080\t44704\t74.13") != std::string::npos);
}

TEST_CASE("pipeline cost is affine in n_z") {
  const std::array<std::int64_t, 5> head = {256, 128, 64, 16, 10};
  const auto at = [&](std::int64_t nz) { return pipeline_macs(784, nz, head); };
  for (std::int64_t nz = 1; nz < 200; nz += 7) {
    CHECK(at(nz + 1).compression.total - at(nz).compression.total == 784);
    CHECK(at(nz + 1).classification.total - at(nz).classification.total == 256);
  }
  const PipelineMacs p = at(10);
  CHECK(p.compression.stage("fft") == 10240);
  CHECK(p.compression.stage("A_rho") == 7840);
  CHECK(p.classification.stage("Theta_rho") == 2560);
  CHECK(p.total() == p.compression.total + p.classification.total);
}

TEST_CASE("training cost estimate") {
  const TrainingCostEstimate e = training_cost_estimate(784, 50, 60000);
  CHECK(e.gib_eigen == doctest::Approx(4.8e8).epsilon(0.01));
  CHECK(e.gib_covariance == doctest::Approx(3.7e10).epsilon(0.01));
  CHECK(e.gib_total() == e.gib_eigen + e.gib_covariance);
  CHECK(training_cost_estimate(784, 0, 60000).lmmse == 0.0);
  const TrainingCostEstimate twice = training_cost_estimate(784, 50, 120000);
  CHECK(twice.gib_covariance == 2 * e.gib_covariance);
  CHECK(twice.lmmse == 2 * e.lmmse);
  CHECK(twice.transform == doctest::Approx(2 * e.transform));
  CHECK(twice.gib_eigen == e.gib_eigen);
}

TEST_CASE("json export") {
  const auto j = to_json(network_macs(kShallow));
  CHECK(j["total"] == 242848);
  CHECK(j["per_stage"].size() == 5);
  const std::array<std::int64_t, 1> grid = {10};
  CHECK(to_json(savings_table(kShallow, grid))[0]["macs_compression"] == 18080);
}
