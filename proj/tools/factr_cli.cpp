// Command-line front end; everything goes through the shared library's C
// interface.

#include <CLI11.hpp>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "factr.h"

namespace {

struct ConfigDeleter {
  void operator()(factr_config* c) const { factr_config_destroy(c); }
};
using ConfigPtr = std::unique_ptr<factr_config, ConfigDeleter>;

struct CommonOpts {
  std::string config_path;
  std::string out;
  long long seed = -1;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_out = true) {
  cmd->add_option("--config", opts.config_path, "configuration file (key = value lines)");
  cmd->add_option("--seed", opts.seed, "override the top-level seed");
  if (with_out) cmd->add_option("--out", opts.out, "output directory")->required();
  cmd->add_option("--set", opts.overrides, "override a config key, key=value")
      ->take_all()
      ->allow_extra_args(false);
}

// Returns a ready config or null after printing the offending key.
ConfigPtr build_config(const CommonOpts& opts) {
  ConfigPtr cfg(opts.config_path.empty() ? factr_config_create()
                                         : factr_config_load(opts.config_path.c_str()));
  if (!cfg) {
    std::fprintf(stderr, "error: %s\n", factr_last_error());
    return nullptr;
  }
  if (opts.seed >= 0) {
    if (factr_config_set(cfg.get(), "seed", std::to_string(opts.seed).c_str()) != FACTR_OK) {
      std::fprintf(stderr, "error: %s\n", factr_last_error());
      return nullptr;
    }
  }
  for (const auto& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
      return nullptr;
    }
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    if (factr_config_set(cfg.get(), key.c_str(), value.c_str()) != FACTR_OK) {
      std::fprintf(stderr, "error: %s\n", factr_last_error());
      return nullptr;
    }
  }
  return cfg;
}

int report(int rc) {
  if (rc != FACTR_OK) {
    std::fprintf(stderr, "error: %s\n", factr_last_error());
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bilateral teleoperation simulator and force-attending policy trainer"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(factr_version()));

  CommonOpts gen_opts, train_opts, eval_opts, exp_opts, teleop_opts, ntk_opts, sched_opts;
  std::string train_data, eval_ckpt, eval_split = "test", exp_data, sched_out, inspect_target;
  std::string train_variant = "curriculum";

  auto* gen = app.add_subcommand("gen-data", "collect scripted demonstrations");
  add_common(gen, gen_opts);

  auto* train = app.add_subcommand("train", "train one policy variant");
  add_common(train, train_opts);
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--variant", train_variant, "vision_only | vision_force | curriculum");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint in closed loop");
  add_common(eval, eval_opts);
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--split", eval_split, "train | test");

  auto* exp = app.add_subcommand("experiment", "run the variant x seed grid");
  add_common(exp, exp_opts);
  exp->add_option("--data", exp_data, "dataset directory")->required();

  auto* teleop = app.add_subcommand("teleop-sim", "run the bilateral scenario suite");
  add_common(teleop, teleop_opts);

  auto* ntk = app.add_subcommand("ntk-verify", "kernel-analysis verification CSVs");
  add_common(ntk, ntk_opts);

  auto* sched = app.add_subcommand("dump-schedule", "emit (n, sigma_n) rows");
  add_common(sched, sched_opts, false);
  sched->add_option("--out", sched_out, "output CSV path")->required();

  auto* inspect = app.add_subcommand("inspect", "print the header of an artifact");
  inspect->add_option("path", inspect_target, "episode file, checkpoint or manifest")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (gen->parsed()) {
    auto cfg = build_config(gen_opts);
    if (!cfg) return 2;
    return report(factr_gen_data(cfg.get(), gen_opts.out.c_str()));
  }
  if (train->parsed()) {
    auto cfg = build_config(train_opts);
    if (!cfg) return 2;
    return report(
        factr_train(cfg.get(), train_data.c_str(), train_opts.out.c_str(), train_variant.c_str()));
  }
  if (eval->parsed()) {
    auto cfg = build_config(eval_opts);
    if (!cfg) return 2;
    return report(
        factr_eval(cfg.get(), eval_ckpt.c_str(), eval_split.c_str(), eval_opts.out.c_str()));
  }
  if (exp->parsed()) {
    auto cfg = build_config(exp_opts);
    if (!cfg) return 2;
    return report(factr_experiment(cfg.get(), exp_data.c_str(), exp_opts.out.c_str()));
  }
  if (teleop->parsed()) {
    auto cfg = build_config(teleop_opts);
    if (!cfg) return 2;
    return report(factr_teleop_sim(cfg.get(), teleop_opts.out.c_str()));
  }
  if (ntk->parsed()) {
    auto cfg = build_config(ntk_opts);
    if (!cfg) return 2;
    return report(factr_ntk_verify(cfg.get(), ntk_opts.out.c_str()));
  }
  if (sched->parsed()) {
    auto cfg = build_config(sched_opts);
    if (!cfg) return 2;
    return report(factr_dump_schedule(cfg.get(), sched_out.c_str()));
  }
  if (inspect->parsed()) {
    char* text = factr_inspect(inspect_target.c_str());
    if (text == nullptr) {
      std::fprintf(stderr, "error: %s\n", factr_last_error());
      return 1;
    }
    std::fputs(text, stdout);
    factr_string_free(text);
    return 0;
  }
  return 2;
}
