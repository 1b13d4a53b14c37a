#include <iostream>

#include "CLI11.hpp"
#include "pico/commands.hpp"

namespace {

pico::RunConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides,
                               std::uint64_t seed) {
  pico::RunConfig config = path.empty() ? pico::RunConfig{} : pico::load_run_config(path);
  for (const auto& o : overrides) pico::apply_override(config, o);
  config.train.seed = seed;
  // Archived configs must not depend on the working directory of the run.
  for (auto* p : {&config.dataset, &config.embeddings, &config.output}) {
    if (!p->empty()) *p = std::filesystem::absolute(*p).lexically_normal();
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sentence-level PICO labeling: train, cross-validate, evaluate and predict"};
  app.require_subcommand(1);

  std::string dataset_path, config_path, checkpoint, embeddings, input, output;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  auto* validate = app.add_subcommand("validate", "Parse a labeled dataset and print statistics");
  validate->add_option("dataset", dataset_path, "Dataset file")->required();

  auto add_run_options = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "Run configuration file");
    cmd->add_option("--set", overrides, "Override a config value (section.key=value), repeatable");
    cmd->add_option("--seed", seed, "Random seed")->required();
  };
  auto* train = app.add_subcommand("train", "Train one model with a held-out development fold");
  add_run_options(train);
  auto* crossval = app.add_subcommand("crossval", "Run k-fold cross-validation");
  add_run_options(crossval);
  crossval->add_option("-j,--jobs", jobs, "Folds to run concurrently")->check(CLI::PositiveNumber);

  auto add_model_options = [&](CLI::App* cmd) {
    cmd->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
    cmd->add_option("--embeddings", embeddings, "word2vec file used in training")->required();
  };
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on a labeled dataset");
  add_model_options(evaluate);
  evaluate->add_option("dataset", dataset_path, "Labeled dataset file")->required();
  evaluate->add_option("-o,--output", output, "Write the metrics export here");

  auto* predict = app.add_subcommand("predict", "Label the sentences of unlabeled abstracts");
  add_model_options(predict);
  predict->add_option("input", input, "Abstracts to label")->required();
  predict->add_option("-o,--output", output, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*validate) {
      pico::cmd_validate(dataset_path, std::cout);
    } else if (*train) {
      pico::cmd_train(resolve_config(config_path, overrides, seed), std::cerr);
    } else if (*crossval) {
      pico::cmd_crossval(resolve_config(config_path, overrides, seed), jobs, std::cerr);
    } else if (*evaluate) {
      const auto report = pico::cmd_evaluate(checkpoint, embeddings, dataset_path, std::cout);
      if (!output.empty()) pico::write_text_file(output, pico::export_metrics({report}));
    } else if (*predict) {
      if (output.empty()) {
        pico::cmd_predict(checkpoint, embeddings, input, std::cout);
      } else {
        std::ostringstream text;
        pico::cmd_predict(checkpoint, embeddings, input, text);
        pico::write_text_file(output, text.str());
      }
    }
  } catch (const pico::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pico::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
