// edgesel: generate synthetic multi-device data, fit models and translation
// operators, simulate pipeline selection and evaluate strategy grids.

#include "edgesel/config.hpp"
#include "edgesel/dataset.hpp"
#include "edgesel/experiment.hpp"
#include "edgesel/trace_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <optional>

using namespace edgesel;

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool dump_config = false;

  std::string dataset;
  std::optional<std::uint32_t> device;
  std::string variant;
  std::optional<std::uint32_t> source;
  std::optional<std::uint32_t> target;
  std::string mode;
  std::string strategy;
  std::optional<double> p;
  std::string model_file;
  std::optional<std::size_t> jobs;
  std::string csv;
};

void fail(const std::string& code, const std::string& message) {
  nlohmann::json j{{"error", code}, {"message", message}};
  std::cerr << j.dump() << '\n';
}

void require_file(const std::string& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::kIo, "file not found: " + path);
}

ExperimentConfig effective_config(const Overrides& o, const std::string& command) {
  ExperimentConfig c = o.config_path.empty() ? default_config() : load_config(o.config_path);
  if (o.seed) {
    c.seeds = {*o.seed};
    c.simulate.seed = *o.seed;
  }
  if (!o.dataset.empty()) c.outputs.dataset = o.dataset;
  if (o.device) c.model.training_device = DeviceId(*o.device);
  if (!o.variant.empty()) c.model.variant = parse_classifier_variant(o.variant);
  if (o.source) c.translation.source = DeviceId(*o.source);
  if (o.target) c.translation.target = DeviceId(*o.target);
  if (!o.mode.empty()) c.translation.mode = parse_alignment_mode(o.mode);
  if (!o.strategy.empty()) c.simulate.strategy = o.strategy;
  if (o.p) c.simulate.p = *o.p;
  if (!o.model_file.empty()) c.simulate.model_file = o.model_file;
  if (o.jobs) c.jobs = *o.jobs;
  if (!o.out.empty()) {
    if (command == "gen") c.outputs.dataset = o.out;
    if (command == "fit") c.outputs.model = o.out;
    if (command == "fit-translation") c.outputs.op = o.out;
    if (command == "simulate") c.outputs.trace = o.out;
    if (command == "evaluate") c.outputs.report = o.out;
  }
  c.validate();
  return c;
}

void cmd_gen(const ExperimentConfig& c) {
  const auto trace = evaluation_trace(c, c.simulate.seed);
  export_dataset(trace, c.devices, c.outputs.dataset);
  std::cout << "wrote " << c.outputs.dataset << " (" << trace.num_windows() << " windows, "
            << c.devices.size() << " devices)\n";
}

void cmd_fit(const ExperimentConfig& c) {
  require_file(c.outputs.dataset);
  const DatasetSource source(import_dataset(c.outputs.dataset));
  TrainingSet set;
  set.num_classes = source.num_classes();
  set.windows = source.windows(c.model.training_device, 0, source.num_windows());
  set.labels = source.dataset().labels;
  const auto model = fit_classifier(set, c.model.variant,
                                    c.model.options(ModelId(0), c.simulate.seed));
  save_model(model, c.outputs.model);
  std::cout << "wrote " << c.outputs.model << " (training accuracy "
            << accuracy(model, set.windows, set.labels) << ")\n";
}

void cmd_fit_translation(const ExperimentConfig& c) {
  require_file(c.outputs.dataset);
  const DatasetSource source(import_dataset(c.outputs.dataset));
  const auto src = source.windows(c.translation.source, 0, source.num_windows());
  const auto tgt = source.windows(c.translation.target, 0, source.num_windows());
  const auto op = fit_alignment(src, tgt, c.translation.options());
  save_operator(op, c.outputs.op);
  const auto d = diagnose(op, src, tgt);
  std::cout << "wrote " << c.outputs.op << " (distance " << d.pre_distance << " -> " << d.post_distance << ")\n";
}

void cmd_simulate(const ExperimentConfig& c) {
  std::optional<Classifier> model;
  if (!c.simulate.model_file.empty()) {
    require_file(c.simulate.model_file);
    model = load_model(c.simulate.model_file);
  }
  const Experiment experiment(c, c.simulate.seed, std::move(model));
  const auto trace = experiment.simulate(parse_strategy(c.simulate.strategy), c.simulate.p);
  write_trace(trace, c.outputs.trace);
  const auto labels = experiment.scenario(c.simulate.p).labels();
  std::cout << "wrote " << c.outputs.trace << " (micro-F1 " << micro_f1(trace, labels) << ")\n";
}

void cmd_evaluate(const ExperimentConfig& c) {
  const auto reports = run_grid(c);
  write_report_csv(reports, c.outputs.report);
  std::cout << "wrote " << c.outputs.report << " (" << reports.size() << " rows)\n";
}

void cmd_report(const ExperimentConfig& c, const std::string& csv) {
  const std::string path = csv.empty() ? c.outputs.report : csv;
  require_file(path);
  const auto rows = read_report_csv(path);
  std::cout << format_summary(summarize(rows));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Best-effort pipeline selection simulator for multi-device sensing"};
  app.set_help_all_flag("--help-all");
  Overrides o;
  app.add_option("--config", o.config_path, "Experiment config file (JSON)");
  app.add_option("--seed", o.seed, "Run a single seed instead of the config's list");
  app.add_option("--out", o.out, "Output path of the command");
  app.add_flag("--dump-config", o.dump_config, "Print the effective config and exit");

  auto* gen = app.add_subcommand("gen", "Generate and write a synthetic dataset");
  auto* fit = app.add_subcommand("fit", "Train a classifier on one device of a dataset");
  fit->add_option("--dataset", o.dataset, "Dataset archive");
  fit->add_option("--device", o.device, "Training device id");
  fit->add_option("--variant", o.variant, "gaussian or logistic");
  auto* fit_tr = app.add_subcommand("fit-translation", "Fit a device-to-device operator");
  fit_tr->add_option("--dataset", o.dataset, "Dataset archive");
  fit_tr->add_option("--source", o.source, "Source device id");
  fit_tr->add_option("--target", o.target, "Target device id");
  fit_tr->add_option("--mode", o.mode, "diagonal or full");
  auto* sim = app.add_subcommand("simulate", "Run one strategy and write its trace");
  sim->add_option("--strategy", o.strategy, "single:<id>, native, trans, qs or full");
  sim->add_option("--p", o.p, "Availability probability");
  sim->add_option("--model", o.model_file, "Classifier file to use instead of training one");
  auto* eval = app.add_subcommand("evaluate", "Run the strategy x p x seed grid");
  eval->add_option("--jobs", o.jobs, "Worker threads (0 = all cores)");
  auto* report = app.add_subcommand("report", "Summarize a report CSV");
  report->add_option("csv", o.csv, "Report CSV (defaults to outputs.report)");
  for (auto* sub : {gen, fit, fit_tr, sim, eval, report}) sub->fallthrough();
  app.require_subcommand(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail("usage", e.what());
    return 2;
  }

  try {
    const auto subs = app.get_subcommands();
    const std::string command = subs.empty() ? "" : subs.front()->get_name();
    const ExperimentConfig config = effective_config(o, command);
    if (o.dump_config) {
      std::cout << dump_config(config);
      return 0;
    }
    if (command.empty()) {
      fail("usage", "a command is required: gen, fit, fit-translation, simulate, evaluate, report");
      return 2;
    }
    if (command == "gen") cmd_gen(config);
    if (command == "fit") cmd_fit(config);
    if (command == "fit-translation") cmd_fit_translation(config);
    if (command == "simulate") cmd_simulate(config);
    if (command == "evaluate") cmd_evaluate(config);
    if (command == "report") cmd_report(config, o.csv);
  } catch (const Error& e) {
    fail(std::string(to_string(e.code())), e.what());
    return 1;
  } catch (const std::exception& e) {
    fail("internal", e.what());
    return 1;
  }
  return 0;
}
