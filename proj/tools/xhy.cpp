// SPDX-License-Identifier: Apache-2.0
// xhy: data prep, training, generation, prompting and evaluation.
#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "xhy/cli/commands.hpp"
#include "xhy/core/error.hpp"

namespace {

int error_line(std::string_view kind, const std::string& message) {
  xhy::OrderedJson j;
  j["error"] = kind;
  j["message"] = message;
  std::cerr << j.dump() << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xiehouyu training and evaluation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<int> stage;
  std::string task;
  std::optional<std::uint64_t> seed;
  std::string out;
  app.add_option("--config", config_path, "run configuration (JSON)");
  app.add_option("--task", task, "completion or scratch")->check(CLI::IsMember({"completion", "scratch"}));
  app.add_option("--seed", seed, "root seed");
  app.add_option("--out", out, "work directory");

  auto* prepare = app.add_subcommand("prepare", "extract subjects, split, write task files");
  auto* train = app.add_subcommand("train", "run one training stage");
  train->add_option("--stage", stage, "1, 2 or 3")->required()->check(CLI::Range(1, 3));
  auto* generate = app.add_subcommand("generate", "decode the test split with the stage-3 model");
  auto* prompt = app.add_subcommand("prompt", "prompt a chat model on the test split");
  auto* evaluate = app.add_subcommand("evaluate", "score outputs against the test split");
  auto* score = app.add_subcommand("score", "train the coherency/humor scorer");
  app.add_subcommand("config", "print the effective configuration");
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return error_line("usage", e.what());
  }

  try {
    auto config = config_path.empty() ? xhy::cli::default_config() : xhy::cli::load_config(config_path);
    if (!task.empty()) config.task = xhy::corpus::parse_task(task);
    if (seed) config.seed = *seed;
    if (!out.empty()) config.paths.work = out;
    config.finalize();
    config.validate();

    xhy::OrderedJson summary;
    if (*prepare) summary = xhy::cli::cmd_prepare(config);
    else if (*train) summary = xhy::cli::cmd_train(config, *stage);
    else if (*generate) summary = xhy::cli::cmd_generate(config);
    else if (*prompt) summary = xhy::cli::cmd_prompt(config);
    else if (*evaluate) summary = xhy::cli::cmd_evaluate(config);
    else if (*score) summary = xhy::cli::cmd_score(config);
    else summary = xhy::cli::to_json(config);
    std::cout << summary.dump() << "\n";
    return 0;
  } catch (const xhy::Error& e) {
    return error_line(xhy::to_string(e.kind()), e.what());
  } catch (const std::exception& e) {
    return error_line("internal", e.what());
  }
}
