#include "art/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "art/oracle.hpp"
#include "art/trainer.hpp"

namespace art {

Network monitor_network() {
  LayerSpec hidden{Matrix(2, 2), Vector(2, 0.0), true};
  hidden.weights.data = {1.0, 0.5, 1.0, -1.0};
  LayerSpec output{Matrix(2, 2), Vector(2, 0.0), false};
  output.weights.data = {1.0, -1.0, 0.5, 1.0};
  return Network({hidden, output});
}

CorrectnessProperty monitor_property() {
  return {Box({0.0, 0.5}, {5.0, 2.5}), OutputPredicate::greater(2, 0, 1)};
}

namespace {

struct UsageFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Writes through a temporary file so a failed run never leaves a truncated
// output behind.
void write_file(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
    if (!out) throw std::runtime_error("failed writing " + path);
  }
  std::filesystem::rename(tmp, path);
}

struct ConfigFlags {
  TrainConfig cfg;
  std::string optimizer = "adam";
  std::string lr_decay = "plateau";

  void add_to(CLI::App& cmd) {
    cmd.add_option("--lr", cfg.lr, "Learning rate")->capture_default_str();
    cmd.add_option("--k", cfg.k, "Regions refined per epoch")->capture_default_str();
    cmd.add_option("--region-cap", cfg.region_cap, "Maximum number of regions")->capture_default_str();
    cmd.add_option("--eps-accuracy", cfg.eps_accuracy, "Accuracy loss bound")->capture_default_str();
    cmd.add_option("--max-epochs", cfg.max_epochs, "Epoch budget")->capture_default_str();
    cmd.add_option("--optimizer", optimizer, "sgd or adam")
        ->check(CLI::IsMember({"sgd", "adam"}))
        ->capture_default_str();
    cmd.add_option("--lr-decay", lr_decay, "plateau or none")
        ->check(CLI::IsMember({"plateau", "none"}))
        ->capture_default_str();
    cmd.add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
    cmd.add_option("--margin", cfg.margin, "Slack for strict inequalities")->capture_default_str();
    cmd.add_flag("--record-time", cfg.record_time, "Store wall-clock seconds in the report");
  }

  TrainConfig resolve(bool no_refine, unsigned threads) {
    TrainConfig out = cfg;
    out.optimizer = optimizer == "sgd" ? OptimizerKind::sgd : OptimizerKind::adam;
    out.lr_decay.enabled = lr_decay == "plateau";
    out.refine = !no_refine;
    out.threads = threads;
    validate_config(out);
    return out;
  }
};

void print_epoch(std::ostream& out, const EpochRecord& e) {
  out << std::setw(6) << e.epoch << "  " << std::setw(14) << format_double(e.loss_d) << "  " << std::setw(14)
      << format_double(e.loss_a) << "  " << std::setw(8) << e.regions << '\n';
}

void print_epoch_header(std::ostream& out) {
  out << std::setw(6) << "epoch" << "  " << std::setw(14) << "loss_d" << "  " << std::setw(14) << "loss_a" << "  "
      << std::setw(8) << "regions" << '\n';
}

RegionSet region_set_for(const Network& net, std::vector<CorrectnessProperty> props) {
  if (props.empty()) throw UsageFailure("property file holds no properties");
  for (std::size_t i = 0; i < props.size(); ++i) {
    if (props[i].input.dim() != net.input_dim() || props[i].output.output_dim() != net.output_dim()) {
      throw ShapeError("property #" + std::to_string(i) + " does not match the network shape " +
                       std::to_string(net.input_dim()) + " -> " + std::to_string(net.output_dim()));
    }
  }
  return RegionSet(std::move(props));
}

std::vector<std::size_t> parse_dims(const std::string& text) {
  std::vector<std::size_t> dims;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(part, &used);
      if (used != part.size() || v <= 0) throw std::invalid_argument(part);
      dims.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw UsageFailure("bad layer width '" + part + "' in --dims");
    }
  }
  if (dims.size() < 2) throw UsageFailure("--dims needs at least input and output widths");
  return dims;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Abstraction-refinement training of provably correct ReLU networks", "art"};
  app.require_subcommand(1);
  unsigned threads = 1;
  app.add_option("--threads", threads, "Worker threads")->capture_default_str();

  // demo
  auto* demo = app.add_subcommand("demo", "Train the built-in vehicle monitor example");
  ConfigFlags demo_flags;
  demo_flags.cfg.lr = 0.01;
  demo_flags.cfg.max_epochs = 200;
  demo_flags.optimizer = "sgd";
  demo_flags.lr_decay = "none";
  demo_flags.add_to(*demo);
  bool demo_no_refine = false;
  bool demo_unsat = false;
  bool demo_quiet = false;
  std::string demo_export;
  demo->add_flag("--no-refine", demo_no_refine, "Train on the unrefined input box only");
  demo->add_flag("--unsatisfiable", demo_unsat, "Replace the output predicate by (P and not P)");
  demo->add_flag("--quiet", demo_quiet, "Only print the verdict");
  demo->add_option("--export", demo_export, "Write net.txt and property.json for the example to this directory");

  // init
  auto* init = app.add_subcommand("init", "Create a randomly initialised network");
  std::string init_dims;
  std::string init_out;
  std::uint64_t init_seed = 0;
  init->add_option("--dims", init_dims, "Layer widths, e.g. 2,8,8,2")->required();
  init->add_option("--out", init_out, "Network file to write")->required();
  init->add_option("--seed", init_seed, "Random seed")->capture_default_str();

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Label uniform samples with an oracle network");
  std::string gen_oracle, gen_property, gen_train_out, gen_test_out, gen_polarity = "argmax";
  std::size_t gen_train = 10000, gen_test = 5000;
  std::uint64_t gen_seed = 0;
  gen->add_option("--oracle", gen_oracle, "Oracle network file")->required();
  gen->add_option("--property", gen_property, "Property file; the first input box is sampled")->required();
  gen->add_option("--train", gen_train, "Training samples")->capture_default_str();
  gen->add_option("--test", gen_test, "Test samples")->capture_default_str();
  gen->add_option("--train-out", gen_train_out, "Training CSV")->required();
  gen->add_option("--test-out", gen_test_out, "Test CSV");
  gen->add_option("--seed", gen_seed, "Random seed")->capture_default_str();
  gen->add_option("--polarity", gen_polarity, "argmax or argmin")
      ->check(CLI::IsMember({"argmax", "argmin"}))
      ->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Train a network until it provably satisfies its properties");
  ConfigFlags train_flags;
  train_flags.add_to(*train);
  std::string train_net, train_property, train_data, train_out, train_report, train_split_log;
  bool train_no_refine = false;
  train->add_option("--net", train_net, "Initial network file")->required();
  train->add_option("--property", train_property, "Property file")->required();
  train->add_option("--data", train_data, "Training dataset CSV (optional)");
  train->add_option("--out", train_out, "Trained network file")->required();
  train->add_option("--report", train_report, "Report prefix; writes <prefix>.csv and <prefix>.json")->required();
  train->add_option("--split-log", train_split_log, "Split log CSV");
  train->add_flag("--no-refine", train_no_refine, "Disable input-space refinement");

  // certify
  auto* certify = app.add_subcommand("certify", "Prove a property by input splitting, without training");
  std::string cert_net, cert_property;
  std::size_t cert_budget = 1000;
  certify->add_option("--net", cert_net, "Network file")->required();
  certify->add_option("--property", cert_property, "Property file")->required();
  certify->add_option("--budget", cert_budget, "Maximum number of splits")->capture_default_str();

  // audit
  auto* audit = app.add_subcommand("audit", "Sample-based check of interval soundness and property satisfaction");
  std::string audit_net, audit_property;
  std::size_t audit_samples = 100000;
  std::uint64_t audit_seed = 0;
  audit->add_option("--net", audit_net, "Network file")->required();
  audit->add_option("--property", audit_property, "Property file")->required();
  audit->add_option("--samples", audit_samples, "Samples per property")->capture_default_str();
  audit->add_option("--seed", audit_seed, "Random seed")->capture_default_str();

  std::vector<const char*> argv;
  argv.push_back("art");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_code::ok : exit_code::usage;
  }

  try {
    if (demo->parsed()) {
      const TrainConfig cfg = demo_flags.resolve(demo_no_refine, threads);
      CorrectnessProperty prop = monitor_property();
      if (demo_unsat) {
        prop.output = OutputPredicate::all_of({prop.output, OutputPredicate::negate(prop.output)});
      }
      if (!demo_export.empty()) {
        std::filesystem::create_directories(demo_export);
        write_file(demo_export + "/net.txt", network_to_text(monitor_network()));
        write_file(demo_export + "/property.json", properties_to_string({prop}));
      }
      RegionSet regions({prop});
      if (!demo_quiet) print_epoch_header(out);
      auto result = art_train(monitor_network(), regions, {}, cfg, [&](const EpochRecord& e) {
        if (!demo_quiet) print_epoch(out, e);
      });
      const auto& rep = result.report;
      out << "verdict: " << to_string(rep.outcome) << " after " << rep.optimizer_steps << " updates, "
          << rep.final_regions << " regions, max-region loss "
          << format_double(region_losses(result.net, regions, {cfg.margin, threads, false}).max) << '\n';
      return rep.outcome == TrainOutcome::certified ? exit_code::ok : exit_code::not_certified;
    }

    if (init->parsed()) {
      const auto dims = parse_dims(init_dims);
      write_file(init_out, network_to_text(Network::random(dims, init_seed)));
      out << "wrote " << init_out << '\n';
      return exit_code::ok;
    }

    if (gen->parsed()) {
      const Network oracle = load_network(gen_oracle);
      const auto props = load_properties(gen_property);
      if (props.empty()) throw UsageFailure("property file holds no properties");
      const auto polarity = gen_polarity == "argmin" ? LabelPolarity::argmin : LabelPolarity::argmax;
      const auto split = label_with_oracle(oracle, gen_train, gen_test, props.front().input, gen_seed, polarity);
      write_file(gen_train_out, dataset_to_csv(split.train));
      if (!gen_test_out.empty()) write_file(gen_test_out, dataset_to_csv(split.test));
      out << "wrote " << split.train.size() << " training and " << split.test.size() << " test samples\n";
      return exit_code::ok;
    }

    if (train->parsed()) {
      const TrainConfig cfg = train_flags.resolve(train_no_refine, threads);
      Network net = load_network(train_net);
      RegionSet regions = region_set_for(net, load_properties(train_property));
      Dataset data;
      if (!train_data.empty()) data = load_dataset(train_data);
      validate_dataset(data, net.input_dim(), net.output_dim());

      print_epoch_header(out);
      TrainResult result;
      try {
        result = art_train(std::move(net), regions, data, cfg, [&](const EpochRecord& e) { print_epoch(out, e); });
      } catch (const DivergenceError& e) {
        err << "art: training diverged: " << e.what() << '\n';
        return exit_code::not_certified;
      }
      write_file(train_out, network_to_text(result.net));
      write_file(train_report + ".csv", report_csv(result.report));
      write_file(train_report + ".json", report_json(result.report));
      if (!train_split_log.empty()) write_file(train_split_log, regions.split_log_csv());
      out << "verdict: " << to_string(result.report.outcome) << '\n';
      if (!data.empty()) out << "training accuracy: " << format_double(accuracy(result.net, data)) << '\n';
      return result.report.outcome == TrainOutcome::certified ? exit_code::ok : exit_code::not_certified;
    }

    if (certify->parsed()) {
      const Network net = load_network(cert_net);
      RegionSet regions = region_set_for(net, load_properties(cert_property));
      const auto verdict = certify_only(net, regions, cert_budget, {0.0, threads, false});
      if (const auto* c = std::get_if<Certified>(&verdict)) {
        out << "certified after " << c->splits << " splits (" << regions.size() << " regions)\n";
        return exit_code::ok;
      }
      const auto& u = std::get<Unknown>(verdict);
      out << "unknown: max region loss " << format_double(u.max_loss) << " after " << u.splits << " splits\n";
      return exit_code::not_certified;
    }

    if (audit->parsed()) {
      if (audit_samples == 0) throw UsageFailure("--samples must be positive");
      const Network net = load_network(audit_net);
      const auto props = load_properties(audit_property);
      region_set_for(net, props);  // shape check
      std::size_t bound_violations = 0;
      std::size_t predicate_violations = 0;
      for (std::size_t i = 0; i < props.size(); ++i) {
        const auto unsound = mc_soundness(net, props[i].input, audit_samples, audit_seed, threads);
        const auto check = sample_satisfaction(net, props[i], audit_samples, audit_seed, 10, threads);
        bound_violations += unsound.size();
        predicate_violations += check.violations;
        out << "property " << i << ": " << check.violations << " of " << check.samples
            << " samples violate the output predicate, " << unsound.size() << " interval-bound violations\n";
        for (const auto& c : check.examples) {
          out << "  counterexample x=(";
          for (std::size_t j = 0; j < c.x.size(); ++j) out << (j ? ", " : "") << format_double(c.x[j]);
          out << ") y=(";
          for (std::size_t j = 0; j < c.y.size(); ++j) out << (j ? ", " : "") << format_double(c.y[j]);
          out << ") dist=" << format_double(c.dist) << '\n';
        }
      }
      return bound_violations == 0 && predicate_violations == 0 ? exit_code::ok : exit_code::not_certified;
    }
  } catch (const ParseError& e) {
    err << "art: " << e.what() << '\n';
    return exit_code::usage;
  } catch (const ShapeError& e) {
    err << "art: shape mismatch: " << e.what() << '\n';
    return exit_code::usage;
  } catch (const std::exception& e) {
    err << "art: " << e.what() << '\n';
    return exit_code::usage;
  }
  return exit_code::usage;
}

}  // namespace art
