#include "oib/experiment.hpp"

#include "oib/binary_io.hpp"
#include "oib/complexity_model.hpp"
#include "oib/errors.hpp"
#include "oib/gaussianizer.hpp"
#include "oib/info_metrics.hpp"
#include "oib/reexpander.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <limits>
#include <random>
#include <set>

namespace oib {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

TrainConfig parse_train(const json& j, const std::string& where, const TrainConfig& defaults) {
  check_keys(j, {"epochs", "learning_rate", "batch_size", "adam_beta1", "adam_beta2", "adam_eps"}, where);
  TrainConfig t = defaults;
  t.epochs = j.value("epochs", t.epochs);
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.adam_beta1 = j.value("adam_beta1", t.adam_beta1);
  t.adam_beta2 = j.value("adam_beta2", t.adam_beta2);
  t.adam_eps = j.value("adam_eps", t.adam_eps);
  if (t.epochs < 1 || t.batch_size < 1 || !(t.learning_rate > 0.0))
    throw ConfigError(where + ": epochs, batch_size and learning_rate must be positive");
  return t;
}

json train_to_json(const TrainConfig& t) {
  return {{"epochs", t.epochs},         {"learning_rate", t.learning_rate}, {"batch_size", t.batch_size},
          {"adam_beta1", t.adam_beta1}, {"adam_beta2", t.adam_beta2},       {"adam_eps", t.adam_eps}};
}

std::vector<std::int64_t> as_i64(std::span<const Index> v) { return {v.begin(), v.end()}; }

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json metadata(const ExperimentConfig& cfg) {
  return {{"config_hash", config_hash(cfg)}, {"seed", cfg.seed}, {"timestamp", utc_timestamp()}};
}

fs::path out_dir(const ExperimentConfig& cfg) {
  fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  return dir;
}

// Seed offsets keep the random streams of different stages apart.
constexpr std::uint64_t kTargetSeed = 11;
constexpr std::uint64_t kFitSeed = 100;
constexpr std::uint64_t kEvalSeed = 200;
constexpr std::uint64_t kEntropySeed = 300;
constexpr std::uint64_t kRetrainSeed = 7;

struct GibStage {
  double lambda = 0.0;
  CovariancePair cov;
  GibSolution sol;
};

GibStage fit_gib_stage(const ExperimentConfig& cfg, const MlpModel& model, const Matrix& x_train) {
  GibStage s;
  const DataMatrix x(x_train, true);
  const RegressionTargetSet targets = make_regression_targets(model, x, cfg.lambda, cfg.seed + kTargetSeed);
  s.lambda = targets.noise_lambda;
  s.cov = estimate_covariance_pair(x, center(targets.y_tilde).data, cfg.shrinkage, cfg.ridge);
  s.sol = solve_gib(s.cov);
  return s;
}

Compressor build_compressor(CompressorKind kind, const GibStage& g, Index n_z) {
  switch (kind) {
    case CompressorKind::kOib: return compressor_at_size(g.sol, n_z, 1.0);
    case CompressorKind::kCca: return cca_compressor(g.sol, n_z, 1.0);
    case CompressorKind::kPca: return pca_compressor(g.cov.sigma_x, n_z, 1.0);
  }
  throw std::logic_error("unreachable");
}

Matrix encode_as(const Compressor& comp, EncodingMode mode, const Matrix& x, std::uint64_t seed) {
  return encode_rows(mode == EncodingMode::kDeterministic ? with_noise(comp, 0.0) : comp, x, seed);
}

double alpha_formula_residual(const Compressor& comp, const GibSolution& sol) {
  double worst = 0.0;
  for (Index i = 0; i < comp.n_z(); ++i) {
    const double lam = sol.eigen.eigenvalues(i);
    const double rhs = comp.beta * (1.0 - lam);
    const double alpha_sq = comp.matrix_a.row(i).squaredNorm();  // rows are alpha_i times unit v_i
    const double lhs = alpha_sq * lam * sol.eigen.r_values(i) + 1.0;
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
  }
  return worst;
}

Checkpoint require_checkpoint(const ExperimentConfig& cfg) {
  const fs::path stem = checkpoint_stem(cfg);
  if (!fs::exists(io::manifest_path(stem)))
    throw IoError("no base checkpoint at " + stem.string() + "; run train-base first");
  return load_checkpoint(stem);
}

double mean_row_sq_error(const Matrix& a, const Matrix& b) {
  return (a - b).squaredNorm() / static_cast<double>(a.rows() * a.cols());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

EncodingMode encoding_mode_from_string(const std::string& s) {
  if (s == "deterministic") return EncodingMode::kDeterministic;
  if (s == "stochastic") return EncodingMode::kStochastic;
  throw ConfigError("encoding must be 'deterministic' or 'stochastic', got '" + s + "'");
}

std::string to_string(EncodingMode m) {
  return m == EncodingMode::kDeterministic ? "deterministic" : "stochastic";
}

ExperimentConfig config_from_json(const json& j) {
  try {
    check_keys(j, {"dataset", "layer_sizes", "train", "retrain", "kinds", "n_z_grid", "lambda",
                   "shrinkage", "ridge", "seed", "encoding", "entropy_encoding", "fit_encoding", "hz",
                   "output_dir"},
               "config");
    ExperimentConfig cfg;
    if (j.contains("dataset")) {
      const json& d = j.at("dataset");
      check_keys(d, {"kind", "dir", "train_subset", "test_subset", "synthetic"}, "dataset");
      cfg.dataset.kind = d.value("kind", cfg.dataset.kind);
      if (cfg.dataset.kind != "idx" && cfg.dataset.kind != "synthetic")
        throw ConfigError("dataset.kind must be 'idx' or 'synthetic'");
      cfg.dataset.dir = d.value("dir", cfg.dataset.dir);
      cfg.dataset.train_subset = d.value("train_subset", cfg.dataset.train_subset);
      cfg.dataset.test_subset = d.value("test_subset", cfg.dataset.test_subset);
      if (cfg.dataset.train_subset < 0 || cfg.dataset.test_subset < 0)
        throw ConfigError("dataset subsets must be >= 0");
      if (d.contains("synthetic")) {
        const json& s = d.at("synthetic");
        check_keys(s, {"height", "width", "classes", "train", "test", "noise", "seed"}, "dataset.synthetic");
        auto& sp = cfg.dataset.synthetic;
        sp.height = s.value("height", sp.height);
        sp.width = s.value("width", sp.width);
        sp.classes = s.value("classes", sp.classes);
        sp.train = s.value("train", sp.train);
        sp.test = s.value("test", sp.test);
        sp.noise = s.value("noise", sp.noise);
        sp.seed = s.value("seed", sp.seed);
      }
    }
    if (j.contains("layer_sizes")) cfg.layer_sizes = j.at("layer_sizes").get<std::vector<Index>>();
    if (cfg.layer_sizes.size() < 3) throw ConfigError("layer_sizes needs at least three entries");
    for (Index s : cfg.layer_sizes)
      if (s < 1) throw ConfigError("layer_sizes entries must be >= 1");
    if (j.contains("train")) cfg.train = parse_train(j.at("train"), "train", cfg.train);
    cfg.retrain = cfg.train;
    if (j.contains("retrain")) cfg.retrain = parse_train(j.at("retrain"), "retrain", cfg.retrain);
    if (j.contains("kinds")) {
      cfg.kinds.clear();
      for (const auto& k : j.at("kinds")) {
        try {
          cfg.kinds.push_back(compressor_kind_from_string(k.get<std::string>()));
        } catch (const std::invalid_argument& e) {
          throw ConfigError(std::string("kinds: ") + e.what());
        }
      }
      if (cfg.kinds.empty()) throw ConfigError("kinds must not be empty");
    }
    if (j.contains("n_z_grid")) cfg.n_z_grid = j.at("n_z_grid").get<std::vector<Index>>();
    if (cfg.n_z_grid.empty()) throw ConfigError("n_z_grid must not be empty");
    for (Index n : cfg.n_z_grid)
      if (n < 1 || n > cfg.layer_sizes.front())
        throw ConfigError("n_z_grid entries must lie in [1, layer_sizes[0]]");
    if (j.contains("lambda") && !j.at("lambda").is_null()) {
      cfg.lambda = j.at("lambda").get<double>();
      if (*cfg.lambda < 0.0) throw ConfigError("lambda must be >= 0");
    }
    cfg.shrinkage = j.value("shrinkage", cfg.shrinkage);
    if (!(cfg.shrinkage >= 0.0 && cfg.shrinkage < 1.0)) throw ConfigError("shrinkage must lie in [0, 1)");
    cfg.ridge = j.value("ridge", cfg.ridge);
    if (cfg.ridge < 0.0) throw ConfigError("ridge must be >= 0");
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("encoding")) cfg.encoding = encoding_mode_from_string(j.at("encoding").get<std::string>());
    if (j.contains("entropy_encoding"))
      cfg.entropy_encoding = encoding_mode_from_string(j.at("entropy_encoding").get<std::string>());
    if (j.contains("fit_encoding"))
      cfg.fit_encoding = encoding_mode_from_string(j.at("fit_encoding").get<std::string>());
    if (j.contains("hz")) {
      const json& h = j.at("hz");
      check_keys(h, {"projections", "dims", "samples", "level"}, "hz");
      cfg.hz.projections = h.value("projections", cfg.hz.projections);
      cfg.hz.dims = h.value("dims", cfg.hz.dims);
      cfg.hz.samples = h.value("samples", cfg.hz.samples);
      cfg.hz.level = h.value("level", cfg.hz.level);
      if (cfg.hz.projections < 1 || cfg.hz.dims < 1 || cfg.hz.samples <= cfg.hz.dims)
        throw ConfigError("hz: need projections >= 1 and samples > dims >= 1");
    }
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

json to_json(const ExperimentConfig& cfg) {
  json kinds = json::array();
  for (auto k : cfg.kinds) kinds.push_back(std::string(to_string(k)));
  const auto& sp = cfg.dataset.synthetic;
  return {
      {"dataset",
       {{"kind", cfg.dataset.kind},
        {"dir", cfg.dataset.dir},
        {"train_subset", cfg.dataset.train_subset},
        {"test_subset", cfg.dataset.test_subset},
        {"synthetic",
         {{"height", sp.height}, {"width", sp.width}, {"classes", sp.classes}, {"train", sp.train},
          {"test", sp.test}, {"noise", sp.noise}, {"seed", sp.seed}}}}},
      {"layer_sizes", cfg.layer_sizes},
      {"train", train_to_json(cfg.train)},
      {"retrain", train_to_json(cfg.retrain)},
      {"kinds", kinds},
      {"n_z_grid", cfg.n_z_grid},
      {"lambda", cfg.lambda ? json(*cfg.lambda) : json(nullptr)},
      {"shrinkage", cfg.shrinkage},
      {"ridge", cfg.ridge},
      {"seed", cfg.seed},
      {"encoding", to_string(cfg.encoding)},
      {"entropy_encoding", to_string(cfg.entropy_encoding)},
      {"fit_encoding", to_string(cfg.fit_encoding)},
      {"hz",
       {{"projections", cfg.hz.projections},
        {"dims", cfg.hz.dims},
        {"samples", cfg.hz.samples},
        {"level", cfg.hz.level}}},
      {"output_dir", cfg.output_dir},
  };
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_json(cfg).dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  PreparedData p;
  if (cfg.dataset.kind == "synthetic") {
    auto [train, test] = synth_images(cfg.dataset.synthetic);
    p.train_raw = std::move(train);
    p.test_raw = std::move(test);
  } else {
    fs::path dir = cfg.dataset.dir;
    if (dir.empty()) {
      const char* env = std::getenv("OIB_MNIST_DIR");
      dir = env && *env ? fs::path(env) : fs::path("data/mnist");
    }
    const auto files = find_mnist(dir);
    if (!files)
      throw ConfigError("MNIST IDX files not found in '" + dir.string() +
                        "'; set dataset.dir or OIB_MNIST_DIR");
    try {
      p.train_raw = load_idx(files->train_images, files->train_labels);
      p.test_raw = load_idx(files->test_images, files->test_labels);
    } catch (const IdxError& e) {
      throw ConfigError(std::string("dataset: ") + e.what());
    }
  }
  if (cfg.dataset.train_subset > 0 && cfg.dataset.train_subset < p.train_raw.size())
    p.train_raw = subset(p.train_raw, cfg.dataset.train_subset, cfg.seed);
  if (cfg.dataset.test_subset > 0 && cfg.dataset.test_subset < p.test_raw.size())
    p.test_raw = subset(p.test_raw, cfg.dataset.test_subset, cfg.seed + 1);

  const RealDft2dPlan plan(p.train_raw.height, p.train_raw.width, p.train_raw.channels);
  if (plan.size() != cfg.layer_sizes.front())
    throw ConfigError("layer_sizes[0] = " + std::to_string(cfg.layer_sizes.front()) +
                      " but images have " + std::to_string(plan.size()) + " values");
  if (p.train_raw.num_classes() > cfg.layer_sizes.back())
    throw ConfigError("network output is narrower than the number of classes");
  p.x_train = plan.forward_rows(p.train_raw.images.values);
  p.x_test = plan.forward_rows(p.test_raw.images.values);
  p.train_mean = p.x_train.colwise().mean().transpose();
  p.x_train.rowwise() -= p.train_mean.transpose();
  p.x_test.rowwise() -= p.train_mean.transpose();
  return p;
}

fs::path checkpoint_stem(const ExperimentConfig& cfg) { return fs::path(cfg.output_dir) / "base"; }

fs::path artifact_stem(const ExperimentConfig& cfg, CompressorKind kind, Index n_z, const std::string& what) {
  return fs::path(cfg.output_dir) / "artifacts" /
         (std::string(to_string(kind)) + "_nz" + std::to_string(n_z) + "." + what);
}

json cmd_train_base(const ExperimentConfig& cfg) {
  const PreparedData data = prepare_data(cfg);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  const MlpModel init = make_mlp(cfg.layer_sizes, cfg.seed);
  const TrainResult result = train(init, data.x_train, data.train_raw.labels, tc);

  out_dir(cfg);
  save_checkpoint(result.model, checkpoint_stem(cfg), cfg.seed, tc);
  const MlpModel saved = round_to_float(result.model);
  json report = {
      {"metadata", metadata(cfg)},
      {"checkpoint", checkpoint_stem(cfg).string()},
      {"train_samples", data.x_train.rows()},
      {"test_samples", data.x_test.rows()},
      {"train_accuracy", accuracy(forward_rows_from_layer(saved, 0, data.x_train), data.train_raw.labels)},
      {"test_accuracy", accuracy(forward_rows_from_layer(saved, 0, data.x_test), data.test_raw.labels)},
      {"loss_trace", result.loss_trace},
  };
  io::write_json(fs::path(cfg.output_dir) / "train_base.json", report);
  return report;
}

json cmd_fit_oib(const ExperimentConfig& cfg) {
  const Checkpoint ck = require_checkpoint(cfg);
  const PreparedData data = prepare_data(cfg);
  const GibStage g = fit_gib_stage(cfg, ck.model, data.x_train);
  const Matrix pre_train = first_layer_preactivations(ck.model, data.x_train);

  fs::create_directories(fs::path(cfg.output_dir) / "artifacts");
  json artifacts = json::array();
  double worst_alpha = 0.0;
  for (CompressorKind kind : cfg.kinds) {
    for (Index n_z : cfg.n_z_grid) {
      const Compressor comp = build_compressor(kind, g, n_z);
      if (kind == CompressorKind::kOib) worst_alpha = std::max(worst_alpha, alpha_formula_residual(comp, g.sol));
      const Matrix z = encode_as(comp, cfg.fit_encoding, data.x_train, cfg.seed + kFitSeed + static_cast<std::uint64_t>(n_z));
      const Reexpander rx = fit_ls(DataMatrix(z), DataMatrix(pre_train));
      const fs::path cstem = artifact_stem(cfg, kind, n_z, "compressor");
      const fs::path rstem = artifact_stem(cfg, kind, n_z, "reexpander");
      save_compressor(comp, cstem);
      save_reexpander(rx, rstem);
      artifacts.push_back({{"kind", to_string(kind)}, {"n_z", n_z}, {"compressor", cstem.string()},
                           {"reexpander", rstem.string()}, {"beta", comp.beta}});
    }
  }

  const Index show = std::min<Index>(10, g.sol.eigen.eigenvalues.size());
  std::vector<double> smallest(g.sol.eigen.eigenvalues.data(), g.sol.eigen.eigenvalues.data() + show);
  json report = {
      {"metadata", metadata(cfg)},
      {"lambda", g.lambda},
      {"lambda_source", cfg.lambda ? "config" : "default_target_noise"},
      {"shrinkage", cfg.shrinkage},
      {"fit_encoding", to_string(cfg.fit_encoding)},
      {"eigen_clamped", g.sol.eigen.clamped},
      {"smallest_eigenvalues", smallest},
      {"alpha_formula_max_rel_residual", worst_alpha},
      {"artifacts", artifacts},
  };
  io::write_json(fs::path(cfg.output_dir) / "fit_oib.json", report);
  return report;
}

json cmd_evaluate(const ExperimentConfig& cfg) {
  const Checkpoint ck = require_checkpoint(cfg);
  const PreparedData data = prepare_data(cfg);
  const GibStage g = fit_gib_stage(cfg, ck.model, data.x_train);
  const Matrix pre_test = first_layer_preactivations(ck.model, data.x_test);
  const auto sizes = as_i64(cfg.layer_sizes);
  const std::span<const std::int64_t> head(sizes.begin() + 1, sizes.end());
  const Index n_x = cfg.layer_sizes.front();

  json records = json::array();
  std::string csv = "kind,n_z,rho,accuracy,entropy_nats,mi_nats,mse,macs_comp,macs_class\n";
  for (CompressorKind kind : cfg.kinds) {
    for (Index n_z : cfg.n_z_grid) {
      const fs::path cstem = artifact_stem(cfg, kind, n_z, "compressor");
      if (!fs::exists(io::manifest_path(cstem)))
        throw IoError("missing artifact " + cstem.string() + "; run fit-oib first");
      const Compressor comp = load_compressor(cstem);
      const Reexpander rx = load_reexpander(artifact_stem(cfg, kind, n_z, "reexpander"));
      const auto s = static_cast<std::uint64_t>(n_z);

      const Matrix z = encode_as(comp, cfg.encoding, data.x_test, cfg.seed + kEvalSeed + s);
      const Matrix y_hat = reexpand_rows(rx, z);
      const double acc = accuracy(forward_rows_from_layer(ck.model, 1, y_hat), data.test_raw.labels);
      const double mse = mean_row_sq_error(y_hat, pre_test);

      const Matrix z_ent = encode_as(comp, cfg.entropy_encoding, data.x_train, cfg.seed + kEntropySeed + s);
      const double entropy = sample_entropy(DataMatrix(z_ent), true).entropy_nats;

      const double sigma = cfg.encoding == EncodingMode::kStochastic ? comp.noise_std : 0.0;
      const double mi = linear_map_mi(comp.matrix_a, g.cov, sigma * sigma * Matrix::Identity(n_z, n_z));
      const PipelineMacs macs = pipeline_macs(n_x, n_z, head);

      records.push_back({{"kind", to_string(kind)},
                         {"n_z", n_z},
                         {"rho", comp.rho()},
                         {"accuracy", acc},
                         {"entropy_nats_normalized", entropy},
                         {"mi_nats", mi},
                         {"reconstruction_mse", mse},
                         {"macs_compression", macs.compression.total},
                         {"macs_classification", macs.classification.total}});
      csv += std::string(to_string(kind)) + "," + std::to_string(n_z) + "," + fmt(comp.rho()) + "," + fmt(acc) +
             "," + fmt(entropy) + "," + fmt(mi) + "," + fmt(mse) + "," + std::to_string(macs.compression.total) +
             "," + std::to_string(macs.classification.total) + "\n";
    }
  }

  json report = {
      {"metadata", metadata(cfg)},
      {"encoding", to_string(cfg.encoding)},
      {"entropy_encoding", to_string(cfg.entropy_encoding)},
      {"lambda", g.lambda},
      {"baseline_accuracy", accuracy(forward_rows_from_layer(ck.model, 0, data.x_test), data.test_raw.labels)},
      {"input_mi_nats", input_mi(g.cov)},
      {"records", records},
  };
  out_dir(cfg);
  io::write_json(fs::path(cfg.output_dir) / "evaluate.json", report);
  write_text(fs::path(cfg.output_dir) / "evaluate.csv", csv);
  return report;
}

RetrainMode retrain_mode_from_string(const std::string& s) {
  if (s == "per_rho_head") return RetrainMode::kPerRhoHead;
  if (s == "per_rho_on_z") return RetrainMode::kPerRhoOnZ;
  if (s == "average") return RetrainMode::kAverage;
  throw ConfigError("retrain mode must be per_rho_head, per_rho_on_z or average, got '" + s + "'");
}

std::string to_string(RetrainMode m) {
  switch (m) {
    case RetrainMode::kPerRhoHead: return "per_rho_head";
    case RetrainMode::kPerRhoOnZ: return "per_rho_on_z";
    case RetrainMode::kAverage: return "average";
  }
  return "?";
}

json cmd_retrain(const ExperimentConfig& cfg, const std::vector<RetrainMode>& modes) {
  const Checkpoint ck = require_checkpoint(cfg);
  const PreparedData data = prepare_data(cfg);
  TrainConfig tc = cfg.retrain;
  tc.seed = cfg.seed + kRetrainSeed;
  const fs::path heads = fs::path(cfg.output_dir) / "heads";
  fs::create_directories(heads);

  std::vector<Compressor> comps;
  std::vector<Reexpander> rxs;
  for (Index n_z : cfg.n_z_grid) {
    const fs::path cstem = artifact_stem(cfg, CompressorKind::kOib, n_z, "compressor");
    if (!fs::exists(io::manifest_path(cstem)))
      throw IoError("missing artifact " + cstem.string() + "; run fit-oib with kind oib first");
    comps.push_back(with_noise(load_compressor(cstem), 0.0));
    rxs.push_back(load_reexpander(artifact_stem(cfg, CompressorKind::kOib, n_z, "reexpander")));
  }

  const std::vector<int>& y_train = data.train_raw.labels;
  const std::vector<int>& y_test = data.test_raw.labels;
  std::vector<json> rows(cfg.n_z_grid.size());
  for (size_t i = 0; i < cfg.n_z_grid.size(); ++i) {
    const Matrix y_hat = reexpand_rows(rxs[i], encode_rows(comps[i], data.x_test));
    rows[i] = {{"n_z", cfg.n_z_grid[i]},
               {"rho", comps[i].rho()},
               {"non_retrained", accuracy(forward_rows_from_layer(ck.model, 1, y_hat), y_test)}};
  }

  for (RetrainMode mode : modes) {
    const std::string name = to_string(mode);
    if (mode == RetrainMode::kAverage) {
      const TrainResult r = train_multi_rho_head(ck.model, comps, rxs, data.x_train, y_train, tc);
      save_checkpoint(r.model, heads / "average", tc.seed, tc);
      for (size_t i = 0; i < comps.size(); ++i) {
        const Matrix y_hat = reexpand_rows(rxs[i], encode_rows(comps[i], data.x_test));
        rows[i][name] = accuracy(forward_rows_from_layer(r.model, 1, y_hat), y_test);
      }
      continue;
    }
    for (size_t i = 0; i < comps.size(); ++i) {
      const Index n_z = cfg.n_z_grid[i];
      const fs::path stem = heads / (name + "_nz" + std::to_string(n_z));
      if (mode == RetrainMode::kPerRhoHead) {
        const Matrix rec_train = reexpand_rows(rxs[i], encode_rows(comps[i], data.x_train));
        const TrainResult r = retrain_head(ck.model, rec_train, y_train, tc);
        save_checkpoint(r.model, stem, tc.seed, tc);
        const Matrix y_hat = reexpand_rows(rxs[i], encode_rows(comps[i], data.x_test));
        rows[i][name] = accuracy(forward_rows_from_layer(r.model, 1, y_hat), y_test);
      } else {
        std::vector<Index> head_sizes = {n_z};
        head_sizes.insert(head_sizes.end(), cfg.layer_sizes.begin() + 2, cfg.layer_sizes.end());
        const TrainResult r = train_head_on_z(encode_rows(comps[i], data.x_train), y_train, head_sizes, tc);
        save_checkpoint(r.model, stem, tc.seed, tc);
        rows[i][name] = accuracy(forward_rows_from_layer(r.model, 0, encode_rows(comps[i], data.x_test)), y_test);
      }
    }
  }

  json mode_names = json::array();
  for (auto m : modes) mode_names.push_back(to_string(m));
  json report = {{"metadata", metadata(cfg)}, {"modes", mode_names}, {"records", rows}};
  io::write_json(fs::path(cfg.output_dir) / "retrain.json", report);
  return report;
}

json cmd_hz_test(const ExperimentConfig& cfg) {
  const PreparedData data = prepare_data(cfg);
  const Index n = std::min<Index>(cfg.hz.samples, data.x_train.rows());
  if (n <= cfg.hz.dims) throw ConfigError("hz: not enough training samples for the projection size");
  const Matrix raw = data.train_raw.images.values.topRows(n);
  const Matrix dft = data.x_train.topRows(n);

  auto run = [&](const Matrix& m, std::uint64_t seed) -> json {
    const auto cols = random_informative_columns(m, cfg.hz.dims, seed);
    try {
      const HzTestResult r = henze_zirkler(DataMatrix(select_columns(m, cols)), cfg.hz.level);
      return {{"columns", cols}, {"statistic", r.statistic}, {"p_value", r.p_value}, {"reject", r.reject}};
    } catch (const NumericalError& e) {
      return {{"columns", cols}, {"error", e.what()}, {"p_value", nullptr}};
    }
  };

  json raw_results = json::array();
  json dft_results = json::array();
  int dft_wins = 0;
  for (int p = 0; p < cfg.hz.projections; ++p) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(p);
    json a = run(raw, seed);
    json b = run(dft, seed);
    if (!b["p_value"].is_null() && (a["p_value"].is_null() || b["p_value"].get<double>() > a["p_value"].get<double>()))
      ++dft_wins;
    raw_results.push_back(std::move(a));
    dft_results.push_back(std::move(b));
  }
  json report = {{"metadata", metadata(cfg)},
                 {"samples", n},
                 {"dims", cfg.hz.dims},
                 {"raw", raw_results},
                 {"dft", dft_results},
                 {"dft_higher_p", dft_wins},
                 {"dft_higher_fraction", static_cast<double>(dft_wins) / cfg.hz.projections}};
  out_dir(cfg);
  io::write_json(fs::path(cfg.output_dir) / "hz_test.json", report);
  return report;
}

json cmd_macs(const ExperimentConfig& cfg) {
  const auto sizes = as_i64(cfg.layer_sizes);
  const auto grid = as_i64(cfg.n_z_grid);
  const auto rows = savings_table(sizes, grid);
  const MacsBreakdown full = network_macs(sizes);
  json report = {{"network", to_json(full)},
                 {"saving_reference", saving_reference_macs(sizes)},
                 {"rows", to_json(rows)}};
  out_dir(cfg);
  io::write_json(fs::path(cfg.output_dir) / "macs.json", report);
  write_text(fs::path(cfg.output_dir) / "macs.txt", format_savings_table(rows));
  return report;
}

json cmd_synth_check(const ExperimentConfig& cfg) {
  json checks = json::array();
  auto record = [&](const std::string& name, double value, double threshold, bool pass) {
    checks.push_back({{"name", name}, {"value", value}, {"threshold", threshold}, {"pass", pass}});
  };

  // Loading formula and optimality on random 6-d instances.
  double worst_alpha = 0.0;
  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_spread = 0.0;
  bool noise_reduces = true;
  for (int t = 0; t < 50; ++t) {
    const std::uint64_t s = cfg.seed + 1000 + static_cast<std::uint64_t>(t);
    const CovariancePair cov = covariance_pair_from_joint(random_joint_covariance(6, 3, s), 6);
    const GibSolution sol = solve_gib(cov);
    for (Index n_z = 1; n_z <= 6; ++n_z)
      worst_alpha = std::max(worst_alpha, alpha_formula_residual(compressor_at_size(sol, n_z), sol));
    const Index n_z = 1 + static_cast<Index>(t % 5);
    worst_margin = std::min(worst_margin, random_projection_optimality_check(cov, n_z, 100, s).margin);
    const auto inv = mi_loading_invariance_check(sol, cov, n_z, 20, s);
    worst_spread = std::max(worst_spread, inv.max_relative_spread);
    noise_reduces = noise_reduces && inv.noise_strictly_reduces;
  }
  record("alpha_formula_rel_residual", worst_alpha, 1e-8, worst_alpha <= 1e-8);
  record("cca_vs_random_min_margin", worst_margin, -1e-9, worst_margin >= -1e-9);
  record("loading_mi_spread", worst_spread, 1e-8, worst_spread < 1e-8);
  record("noise_reduces_mi", noise_reduces ? 1.0 : 0.0, 1.0, noise_reduces);

  // Known canonical correlations.
  SyntheticGaussianSpec spec;
  spec.n_x = 4;
  spec.n_y = 3;
  spec.samples = 100000;
  spec.seed = cfg.seed;
  spec.canonical_correlations = {0.9, 0.6, 0.3};
  const SyntheticGaussianData sd = synth_gaussian(spec);
  const CovariancePair est = estimate_covariance_pair(center(sd.x).data, center(sd.y).data, 0.0);
  const Vector lam = gib_eigensystem(est).eigenvalues;
  const std::vector<double> expect = {1 - 0.81, 1 - 0.36, 1 - 0.09, 1.0};
  double worst_lam = 0.0;
  for (Index i = 0; i < 4; ++i) worst_lam = std::max(worst_lam, std::abs(lam(i) - expect[static_cast<size_t>(i)]));
  record("canonical_lambda_abs_error", worst_lam, 0.02, worst_lam < 0.02);

  // LS vs population L-MMSE, and loading invariance of the re-expanded output.
  spec.canonical_correlations.clear();
  spec.n_x = 6;
  spec.n_y = 4;
  const SyntheticGaussianData g = synth_gaussian(spec);
  const GibSolution sol = solve_gib(g.true_cov);
  const Compressor cca = cca_compressor(sol, 3);
  const Compressor oib = with_noise(compressor_at_size(sol, 3), 0.0);
  const Matrix c_zz = cca.matrix_a * g.true_cov.sigma_x * cca.matrix_a.transpose();
  const Matrix c_yz = g.sigma_xy.transpose() * cca.matrix_a.transpose();
  const Reexpander pop = fit_lmmse(c_yz, c_zz);
  const Reexpander ls = fit_ls(DataMatrix(encode_rows(cca, g.x.values)), g.y);
  const double rel = (ls.theta - pop.theta).norm() / pop.theta.norm();
  record("ls_vs_lmmse_rel_frobenius", rel, 1e-2, rel < 1e-2);
  LsOptions exact;
  exact.ridge = 0.0;
  const Reexpander r_cca = fit_ls(DataMatrix(encode_rows(cca, g.x.values)), g.y, exact);
  const Reexpander r_oib = fit_ls(DataMatrix(encode_rows(oib, g.x.values)), g.y, exact);
  const Matrix a = reexpand_rows(r_cca, encode_rows(cca, g.x.values));
  const Matrix b = reexpand_rows(r_oib, encode_rows(oib, g.x.values));
  const double diff = (a - b).cwiseAbs().maxCoeff();
  record("oib_vs_cca_reexpansion_max_abs", diff, 1e-8, diff < 1e-8);

  bool all = true;
  for (const auto& c : checks) all = all && c["pass"].get<bool>();
  json report = {{"metadata", metadata(cfg)}, {"checks", checks}, {"all_pass", all}};
  out_dir(cfg);
  io::write_json(fs::path(cfg.output_dir) / "synth_check.json", report);
  return report;
}

}  // namespace oib
