// oib: experiment driver. Exit codes: 0 success, 2 config / input error,
// 3 numerical failure (including a failed synth-check oracle), 1 anything else.

#include "oib/errors.hpp"
#include "oib/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string encoding;
  std::optional<oib::Index> subset;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Experiment config (JSON)");
  cmd->add_option("--seed", f.seed, "Master seed");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--encoding", f.encoding, "Evaluation encoding")
      ->check(CLI::IsMember({"deterministic", "stochastic"}));
  cmd->add_option("--subset", f.subset, "Training subset size (0 = full split)")->check(CLI::NonNegativeNumber);
}

oib::ExperimentConfig resolve(const CommonFlags& f) {
  oib::ExperimentConfig cfg = f.config.empty() ? oib::ExperimentConfig{} : oib::load_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (!f.out.empty()) cfg.output_dir = f.out;
  if (!f.encoding.empty()) cfg.encoding = oib::encoding_mode_from_string(f.encoding);
  if (f.subset) cfg.dataset.train_subset = *f.subset;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Opportunistic information bottleneck experiments"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto* train_base = app.add_subcommand("train-base", "Train the base classifier on DFT-domain inputs");
  auto* fit_oib = app.add_subcommand("fit-oib", "Fit compressors and re-expanders over the n_z grid");
  auto* evaluate = app.add_subcommand("evaluate", "Accuracy / entropy / MI / MACs report per (kind, n_z)");
  auto* retrain = app.add_subcommand("retrain", "Retrain heads on compressed features");
  auto* hz_test = app.add_subcommand("hz-test", "Henze-Zirkler test on raw vs DFT-domain projections");
  auto* macs = app.add_subcommand("macs", "MACs table for the configured network and grid");
  auto* synth = app.add_subcommand("synth-check", "Synthetic jointly Gaussian oracle checks");
  for (auto* cmd : {train_base, fit_oib, evaluate, retrain, hz_test, macs, synth}) add_common(cmd, flags);

  std::vector<std::string> modes = {"per_rho_head", "per_rho_on_z", "average"};
  retrain->add_option("--mode", modes, "per_rho_head, per_rho_on_z and/or average")
      ->check(CLI::IsMember({"per_rho_head", "per_rho_on_z", "average"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    const oib::ExperimentConfig cfg = resolve(flags);
    nlohmann::json result;
    if (train_base->parsed()) {
      result = oib::cmd_train_base(cfg);
      result.erase("loss_trace");
    } else if (fit_oib->parsed()) {
      result = oib::cmd_fit_oib(cfg);
      result.erase("artifacts");
    } else if (evaluate->parsed()) {
      result = oib::cmd_evaluate(cfg);
    } else if (retrain->parsed()) {
      std::vector<oib::RetrainMode> parsed;
      for (const auto& m : modes) parsed.push_back(oib::retrain_mode_from_string(m));
      result = oib::cmd_retrain(cfg, parsed);
    } else if (hz_test->parsed()) {
      result = oib::cmd_hz_test(cfg);
      for (const char* domain : {"raw", "dft"})
        for (auto& r : result[domain]) r.erase("columns");
    } else if (macs->parsed()) {
      result = oib::cmd_macs(cfg);
    } else {
      result = oib::cmd_synth_check(cfg);
      std::cout << result.dump(2) << "\n";
      return result["all_pass"].get<bool>() ? 0 : kExitNumerical;
    }
    std::cout << result.dump(2) << "\n";
    return 0;
  } catch (const oib::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const oib::IoError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const oib::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
