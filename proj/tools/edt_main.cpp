#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "commands.hpp"

int main(int argc, char** argv) {
  using edt::cli::Options;
  CLI::App app{"Factor-wise augmentation toolkit: data generation, algebra checks, training, evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all", "Show help for every command");

  Options opt;
  std::uint64_t seed = 0;
  std::string out;
  app.add_option("--config", opt.config_path, "key = value config file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Run seed");
  auto* out_opt = app.add_option("--out", out, "Output directory");
  app.add_option("--set", opt.sets, "Extra config assignment key=value (repeatable)");

  auto dataset_flag = [&](CLI::App* c) {
    c->add_option_function<std::string>("--dataset", [&](const std::string& v) { opt.dataset = v; },
                                        "Dataset file (default <out>/dataset.edt1)");
  };
  auto split_flag = [&](CLI::App* c) {
    c->add_option_function<std::string>("--split", [&](const std::string& v) { opt.split = v; },
                                        "axis | step[:block] | rand:<rho> | paths:<n>,<len>");
  };
  auto augmenters_flag = [&](CLI::App* c) {
    c->add_option_function<std::string>("--augmenters", [&](const std::string& v) { opt.augmenters = v; },
                                        "Augmenter checkpoint (default <out>/augmenters.edtw)");
  };
  auto predictor_flag = [&](CLI::App* c) {
    c->add_option_function<std::string>("--predictor", [&](const std::string& v) { opt.predictor = v; },
                                        "Predictor checkpoint (default <out>/predictor.edtw)");
  };
  auto weight_flags = [&](CLI::App* c) {
    c->add_option("--arm", opt.arm, "erm | edt | edt-l0l3 | edt-oracle");
    c->add_option_function<double>("--l0", [&](double v) { opt.l0 = v; }, "Weight of the pair loss");
    c->add_option_function<double>("--l1", [&](double v) { opt.l1 = v; }, "Weight of the composition loss");
    c->add_option_function<double>("--l2", [&](double v) { opt.l2 = v; }, "Weight of the commutation loss");
    c->add_option_function<double>("--l3", [&](double v) { opt.l3 = v; }, "Weight of the augmented supervised loss");
    c->add_flag("--no-aug", opt.no_aug, "Train the predictor without augmentation");
  };

  auto* gen = app.add_subcommand("gen", "Render the full combination grid and write the dataset");
  dataset_flag(gen);

  auto* verify = app.add_subcommand("verify-algebra", "Check monoid, action, decomposition and image laws");
  verify->add_option_function<std::string>("--table", [&](const std::string& v) { opt.table = v; },
                                           "Verify an algebra text file instead of the roster");

  auto* train_aug = app.add_subcommand("train-aug", "Train one augmenter per factor generator");
  dataset_flag(train_aug);
  split_flag(train_aug);
  augmenters_flag(train_aug);
  weight_flags(train_aug);

  auto* train_pred = app.add_subcommand("train-pred", "Train the multi-head predictor");
  dataset_flag(train_pred);
  split_flag(train_pred);
  augmenters_flag(train_pred);
  predictor_flag(train_pred);
  weight_flags(train_pred);

  auto* ev = app.add_subcommand("eval", "Score a predictor on both sides of the split");
  dataset_flag(ev);
  split_flag(ev);
  predictor_flag(ev);
  ev->add_option("--arm", opt.arm, "Arm label recorded in the metrics");

  auto* ablate = app.add_subcommand("ablate", "Run every arm over several seeds and tabulate");
  dataset_flag(ablate);
  split_flag(ablate);
  ablate->add_option_function<std::string>("--arms", [&](const std::string& v) { opt.arms = v; },
                                           "Comma list of erm, edt-l0l3, edt, edt-oracle");
  ablate->add_option_function<std::size_t>("--seeds", [&](std::size_t v) { opt.seed_count = v; },
                                           "Number of seeds, counting up from --seed");
  ablate->add_option_function<std::size_t>("--workers", [&](std::size_t v) { opt.workers = v; },
                                           "Concurrent jobs");

  auto* laws = app.add_subcommand("law-report", "Measure how well trained augmenters obey the action laws");
  dataset_flag(laws);
  split_flag(laws);
  augmenters_flag(laws);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : edt::cli::kConfigError;
  }
  if (seed_opt->count() > 0) opt.seed = seed;
  if (out_opt->count() > 0) opt.out = out;

  const std::string command = app.get_subcommands().front()->get_name();
  return edt::cli::run_command(command, opt, std::cout, std::cerr);
}
