#include "oib/errors.hpp"
#include "oib/inference_net.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

using namespace oib;

namespace {

Matrix random_matrix(Index r, Index c, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = g(rng);
  return m;
}

std::vector<int> random_labels(Index n, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(0, k - 1);
  std::vector<int> out(static_cast<size_t>(n));
  for (auto& v : out) v = u(rng);
  return out;
}

// Linearly separable clusters around k random centers.
void clusters(Index n, Index d, int k, std::uint64_t seed, Matrix& x, std::vector<int>& y) {
  const Matrix centers = random_matrix(k, d, seed, 3.0);
  x = random_matrix(n, d, seed + 1, 0.5);
  y.resize(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) {
    y[static_cast<size_t>(i)] = static_cast<int>(i % k);
    x.row(i) += centers.row(i % k);
  }
}

bool same_bits(const MlpModel& a, const MlpModel& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (size_t l = 0; l < a.layers.size(); ++l) {
    const auto& la = a.layers[l];
    const auto& lb = b.layers[l];
    if (la.weights.size() != lb.weights.size()) return false;
    if (std::memcmp(la.weights.data(), lb.weights.data(), sizeof(double) * static_cast<size_t>(la.weights.size())) != 0)
      return false;
    if (std::memcmp(la.bias.data(), lb.bias.data(), sizeof(double) * static_cast<size_t>(la.bias.size())) != 0)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("network shape") {
  const auto sizes = shallow_mnist_layer_sizes();
  CHECK(sizes == std::vector<Index>{784, 256, 128, 64, 16, 10});
  const MlpModel m = make_mlp(sizes, 1);
  CHECK(m.layer_sizes() == sizes);
  CHECK(m.input_dim() == 784);
  CHECK(m.output_dim() == 10);
  const double bound = std::sqrt(6.0 / 784.0);
  CHECK(m.layers[0].weights.cwiseAbs().maxCoeff() <= bound);
  CHECK(m.layers[0].bias.isZero());
  const auto [l0, b0] = extract_l0(m);
  CHECK(l0.rows() == 256);
  CHECK(l0.cols() == 784);
  CHECK(b0.size() == 256);
}

TEST_CASE("analytic gradients match finite differences") {
  const std::vector<Index> sizes = {6, 5, 4, 3};
  MlpModel m = make_mlp(sizes, 3);
  for (auto& l : m.layers) l.bias = random_matrix(l.bias.size(), 1, 17, 0.1).col(0);
  const Matrix x = random_matrix(8, 6, 4);
  const auto y = random_labels(8, 3, 5);
  for (Index start : {Index{0}, Index{1}}) {
    const Matrix input = start == 0 ? x : random_matrix(8, 5, 6);
    Gradients g;
    loss_and_gradients(m, start, input, y, &g);
    const double h = 1e-6;
    double worst = 0.0;
    for (size_t k = 0; k < g.weights.size(); ++k) {
      const size_t l = static_cast<size_t>(start) + k;
      for (Index i = 0; i < m.layers[l].weights.rows(); ++i)
        for (Index j = 0; j < m.layers[l].weights.cols(); ++j) {
          MlpModel p = m, q = m;
          p.layers[l].weights(i, j) += h;
          q.layers[l].weights(i, j) -= h;
          const double fd = (loss_and_gradients(p, start, input, y, nullptr) -
                             loss_and_gradients(q, start, input, y, nullptr)) / (2 * h);
          const double an = g.weights[k](i, j);
          worst = std::max(worst, std::abs(fd - an) / std::max(1e-6, std::abs(fd) + std::abs(an)));
        }
      for (Index i = 0; i < m.layers[l].bias.size(); ++i) {
        MlpModel p = m, q = m;
        p.layers[l].bias(i) += h;
        q.layers[l].bias(i) -= h;
        const double fd = (loss_and_gradients(p, start, input, y, nullptr) -
                           loss_and_gradients(q, start, input, y, nullptr)) / (2 * h);
        const double an = g.bias[k](i);
        worst = std::max(worst, std::abs(fd - an) / std::max(1e-6, std::abs(fd) + std::abs(an)));
      }
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("training is bitwise reproducible and learns") {
  Matrix x;
  std::vector<int> y;
  clusters(400, 10, 4, 9, x, y);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.seed = 21;
  const std::vector<Index> sizes = {10, 16, 8, 4};
  const TrainResult a = train(make_mlp(sizes, 21), x, y, cfg);
  const TrainResult b = train(make_mlp(sizes, 21), x, y, cfg);
  CHECK(same_bits(a.model, b.model));
  CHECK(a.loss_trace == b.loss_trace);
  CHECK(a.loss_trace.back() < a.loss_trace.front());
  CHECK(accuracy(forward_rows_from_layer(a.model, 0, x), y) > 0.95);
  cfg.seed = 22;
  CHECK_FALSE(same_bits(train(make_mlp(sizes, 21), x, y, cfg).model, a.model));
}

TEST_CASE("divergence is reported as a numerical failure") {
  Matrix x;
  std::vector<int> y;
  clusters(64, 4, 2, 3, x, y);
  x(0, 0) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_AS(train(make_mlp(std::vector<Index>{4, 3, 2}, 1), x, y, cfg), NumericalError);
}

TEST_CASE("regression targets") {
  const MlpModel m = make_mlp(std::vector<Index>{5, 4, 2}, 2);
  const Matrix x = random_matrix(100000, 5, 3);
  const auto exact = make_regression_targets(m, DataMatrix(x), 0.0, 1);
  CHECK(exact.y_tilde.values == first_layer_preactivations(m, x));
  const auto noisy = make_regression_targets(m, DataMatrix(x), 1.0, 1);
  const Matrix diff = noisy.y_tilde.values - exact.y_tilde.values;
  for (Index j = 0; j < 4; ++j) {
    const double mean = diff.col(j).mean();
    CHECK((diff.col(j).array() - mean).square().mean() == doctest::Approx(1.0).epsilon(0.05));
  }
  const auto dflt = make_regression_targets(m, DataMatrix(x.topRows(500)), std::nullopt, 1);
  const Matrix pre = first_layer_preactivations(m, x.topRows(500));
  const Matrix centered = pre.rowwise() - pre.colwise().mean();
  CHECK(dflt.noise_lambda == doctest::Approx(0.1 * std::sqrt(centered.squaredNorm() / (500.0 * 4.0))));
  CHECK(dflt.noise_lambda == default_target_noise(m, x.topRows(500)));
}

TEST_CASE("truncated forward passes") {
  const MlpModel m = make_mlp(std::vector<Index>{6, 5, 4, 3}, 4);
  const Matrix x = random_matrix(7, 6, 5);
  const Matrix full = forward_rows_from_layer(m, 0, x);
  const Matrix pre = first_layer_preactivations(m, x);
  CHECK((forward_rows_from_layer(m, 1, pre) - full).cwiseAbs().maxCoeff() < 1e-12);
  const Vector one = forward_from_layer(m, 1, pre.row(2).transpose());
  CHECK((one - full.row(2).transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(forward_rows_from_layer(m, 1, x), DimensionError);
  CHECK_THROWS_AS(forward_rows_from_layer(m, 3, pre), std::out_of_range);
  Matrix logits(2, 3);
  logits << 0, 2, 1, 5, 0, 0;
  CHECK(predict_labels(logits) == std::vector<int>{1, 0});
  CHECK(accuracy(logits, std::vector<int>{1, 1}) == doctest::Approx(0.5));
}

TEST_CASE("head retraining variants") {
  Matrix x;
  std::vector<int> y;
  clusters(300, 8, 3, 11, x, y);
  const std::vector<Index> sizes = {8, 6, 5, 3};
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 5;
  const MlpModel base = make_mlp(sizes, 5);
  const Matrix rec = first_layer_preactivations(base, x) + random_matrix(300, 6, 12, 0.1);

  const TrainResult head = retrain_head(base, rec, y, cfg);
  CHECK(same_bits(MlpModel{{head.model.layers[0]}}, MlpModel{{base.layers[0]}}));
  const Matrix* one = &rec;
  const TrainResult multi = train_multi_rho_head(base, std::span<const Matrix>(one, 1), y, cfg);
  CHECK(same_bits(multi.model, head.model));

  const std::vector<Matrix> two = {rec, rec * 0.5};
  const TrainResult avg = train_multi_rho_head(base, two, y, cfg);
  CHECK(same_bits(avg.model, train_multi_rho_head(base, two, y, cfg).model));

  const Matrix z = x.leftCols(4) * 40.0 + Matrix::Constant(300, 4, 25.0);
  const std::vector<Index> hs = {4, 8, 3};
  cfg.epochs = 20;
  const TrainResult bank = train_head_on_z(z, y, hs, cfg);
  CHECK(bank.model.input_dim() == 4);
  CHECK(accuracy(forward_rows_from_layer(bank.model, 0, z), y) > 0.9);
  const std::vector<Index> bad = {5, 3};
  CHECK_THROWS_AS(train_head_on_z(z, y, bad, cfg), DimensionError);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "oib_test_ckpt";
  std::filesystem::create_directories(dir);
  const MlpModel m = make_mlp(std::vector<Index>{12, 7, 5, 3}, 8);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.learning_rate = 3e-4;
  save_checkpoint(m, dir / "m", 99, cfg);
  const Checkpoint ck = load_checkpoint(dir / "m");
  CHECK(ck.seed == 99);
  CHECK(ck.train_config.epochs == 4);
  CHECK(ck.train_config.learning_rate == 3e-4);
  CHECK(same_bits(ck.model, round_to_float(m)));
  save_checkpoint(ck.model, dir / "m2", 99, cfg);
  CHECK(same_bits(load_checkpoint(dir / "m2").model, ck.model));
  std::filesystem::resize_file(dir / "m.bin", 10);
  CHECK_THROWS_AS(load_checkpoint(dir / "m"), IoError);
  std::filesystem::remove_all(dir);
}
