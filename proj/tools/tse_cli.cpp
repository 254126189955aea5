// Command-line front end: generate -> train -> certify -> report.
#include "tse/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Args {
  std::string config;
  std::string output;
  std::string dataset;
  std::string model;
};

tse::RunConfig resolve(const Args& args) {
  tse::RunConfig config = args.config.empty() ? tse::RunConfig{} : tse::load_config(args.config);
  if (!args.output.empty()) config.output_dir = args.output;
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train a traffic-state estimator on simulated LWR data and certify it "
               "across free-flow speeds."};
  app.footer("\n" + tse::config_key_help());
  app.require_subcommand(1);
  Args args;

  auto add = [&](const char* name, const char* help) {
    CLI::App* cmd = app.add_subcommand(name, help);
    cmd->add_option("--config", args.config, "run configuration file (defaults if omitted)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--output", args.output, "run directory; overrides output_dir");
    cmd->footer("\n" + tse::config_key_help());
    return cmd;
  };
  add("generate", "solve every environment and write one dataset per free-flow speed");
  add("train", "fit the network to samples of the training-environment dataset")
      ->add_option("--dataset", args.dataset, "dataset file to train on instead of the run's own");
  add("certify", "sweep the trained model over the configured speeds and classify each")
      ->add_option("--model", args.model, "model file to certify instead of the run's own");
  add("report", "write summary.txt and npl_curve.csv from a finished run directory");

  CLI11_PARSE(app, argc, argv);

  try {
    const std::string verb = app.get_subcommands().front()->get_name();
    if (verb == "report") {
      std::filesystem::path dir =
          !args.output.empty() ? std::filesystem::path(args.output) : resolve(args).output_dir;
      tse::cmd_report(dir, std::cout);
      return 0;
    }
    const tse::RunConfig config = resolve(args);
    if (verb == "generate") {
      tse::cmd_generate(config, std::cout);
    } else if (verb == "train") {
      tse::cmd_train(config, std::cout,
                     args.dataset.empty() ? std::nullopt
                                          : std::optional<std::filesystem::path>(args.dataset));
    } else {
      tse::cmd_certify(config, std::cout,
                       args.model.empty() ? std::nullopt
                                          : std::optional<std::filesystem::path>(args.model));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
