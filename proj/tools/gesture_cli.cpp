// Command-line front end: dataset generation, training, lifting, evaluation.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "gesture/error.hpp"
#include "gesture/harness.hpp"
#include "gesture/lifter.hpp"
#include "gesture/runtime.hpp"
#include "gesture/synth_data.hpp"

namespace {

using namespace gesture;
using harness::Artifact;
using harness::ExperimentConfig;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string fgd_variant;
  bool parallel = false;
  bool print_config = false;
};

void add_common(CLI::App& app, Options& o) {
  app.add_option("--config", o.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "Master seed");
  app.add_option("--out", o.out, "Artifact directory");
  app.add_option("--fgd-variant", o.fgd_variant, "FGD formula")
      ->check(CLI::IsMember({"standard", "paper-literal"}));
  app.add_flag("--parallel", o.parallel, "Train and evaluate independent parts concurrently");
  app.add_flag("--print-config", o.print_config, "Print the effective config and exit");
}

ExperimentConfig effective_config(const Options& o) {
  ExperimentConfig c;
  if (!o.config.empty()) c = harness::load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (!o.out.empty()) c.artifacts = o.out;
  if (!o.fgd_variant.empty())
    c.fgd_variant = o.fgd_variant == "standard" ? metrics::FgdVariant::Standard : metrics::FgdVariant::PaperLiteral;
  if (o.parallel) c.parallel = true;
  c.validate();
  return c;
}

Artifact generator_artifact(int dims, bool uncond) {
  if (dims == 3) return uncond ? Artifact::UncondGenerator3d : Artifact::Generator3d;
  return uncond ? Artifact::UncondGenerator2d : Artifact::Generator2d;
}

void train_one(const ExperimentConfig& c, Artifact a) {
  const auto corpus = harness::prepare_dataset(c);
  const auto parts = harness::split_dataset(c, corpus);
  harness::train_artifact(c, parts.first, a);
  std::cout << harness::artifact_path(c, a).string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  configure_allocator();

  CLI::App app{"Speech-driven gesture generation: 3D versus 2D-then-lift"};
  app.require_subcommand(0, 1);
  Options opts;
  add_common(app, opts);

  auto* gen_data = app.add_subcommand("gen-data", "Generate the synthetic corpus");
  add_common(*gen_data, opts);

  int dims = 3;
  bool uncond = false;
  auto* train_gen = app.add_subcommand("train-generator", "Train a diffusion generator");
  add_common(*train_gen, opts);
  train_gen->add_option("--dims", dims, "Pose space")->check(CLI::IsMember({2, 3}));
  train_gen->add_flag("--uncond", uncond, "Mask speech on every step");

  auto* train_lift = app.add_subcommand("train-lifter", "Train the 2D to 3D lifter");
  add_common(*train_lift, opts);

  auto* train_enc = app.add_subcommand("train-encoder", "Train the metric encoder for one space");
  add_common(*train_enc, opts);
  train_enc->add_option("--dims", dims, "Pose space")->check(CLI::IsMember({2, 3}));

  std::string input, output;
  auto* lift = app.add_subcommand("lift", "Lift a dataset's poses to 3D");
  add_common(*lift, opts);
  lift->add_option("--input", input, "Dataset file (2D, or 3D to be projected first)")
      ->required()
      ->check(CLI::ExistingFile);
  lift->add_option("--output", output, "Lifted dataset file")->required();

  std::string report_dir;
  auto* evaluate = app.add_subcommand("evaluate", "Run every configured setting and write the report");
  add_common(*evaluate, opts);
  evaluate->get_option("--config")->required();
  evaluate->add_option("--report-dir", report_dir, "Report directory (default <out>/report)");

  auto* report = app.add_subcommand("report", "Render report.md from results.csv and metadata.json");
  report->add_option("--input", input, "Directory holding results.csv")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const CLI::App* failed = &app;
    for (auto* sub : app.get_subcommands()) failed = sub;
    std::cerr << e.what() << "\n\n" << failed->help();
    return 1;
  }

  try {
    if (opts.print_config) {
      std::cout << nlohmann::json(effective_config(opts)).dump(2) << "\n";
      return 0;
    }
    if (app.get_subcommands().empty()) {
      std::cerr << app.help();
      return 1;
    }
    const auto* sub = app.get_subcommands().front();

    if (sub == report) {
      const std::filesystem::path dir = input;
      std::ifstream csv(dir / "results.csv");
      if (!csv) throw Error(ErrorCode::Io, "cannot read " + (dir / "results.csv").string());
      const auto rows = harness::read_csv(csv);
      nlohmann::json meta = nlohmann::json::object();
      if (std::ifstream m(dir / "metadata.json"); m) meta = nlohmann::json::parse(m);
      std::ostringstream md;
      harness::write_markdown(rows, meta, md);
      std::ofstream out(dir / "report.md", std::ios::trunc);
      if (!(out << md.str())) throw Error(ErrorCode::Io, "cannot write " + (dir / "report.md").string());
      std::cout << md.str();
      return 0;
    }

    const auto config = effective_config(opts);
    if (sub == gen_data) {
      harness::prepare_dataset(config);
      std::cout << harness::dataset_path(config).string() << "\n";
    } else if (sub == train_gen) {
      train_one(config, generator_artifact(dims, uncond));
    } else if (sub == train_lift) {
      train_one(config, Artifact::Lifter);
    } else if (sub == train_enc) {
      train_one(config, dims == 3 ? Artifact::Encoder3d : Artifact::Encoder2d);
    } else if (sub == lift) {
      const auto model = lifter::TrainedLifter::load_file(harness::artifact_path(config, Artifact::Lifter));
      auto ds = synth::load_dataset(input);
      const auto flat = ds.dims == 3 ? synth::project_dataset(ds) : ds;
      auto lifted = flat;
      lifted.dims = 3;
      for (auto& p : lifted.pairs) p.pose = model.lift(p.pose);
      synth::save_dataset(lifted, output);
      std::cout << output << "\n";
    } else if (sub == evaluate) {
      const auto result = harness::run_experiment(config);
      const std::filesystem::path dir = report_dir.empty() ? config.artifacts / "report" : std::filesystem::path(report_dir);
      harness::write_report(result, dir);
      harness::write_csv(result, std::cout);
      std::cerr << "report written to " << dir.string() << "\n";
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
