// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: generate, ingest, train, holdout, analyze, sample, gradcheck.

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "cpvae/pipeline/commands.hpp"

namespace {

using cpvae::cli::GlobalOptions;

void add_train_flags(CLI::App* cmd, cpvae::cli::TrainOptions& t) {
  cmd->add_option("--dataset", t.dataset, "Dataset file written by generate or ingest")
      ->required();
  cmd->add_option("--variant", t.variant, "Model variant")
      ->check(CLI::IsMember({"cpvae", "dvae"}));
  cmd->add_option_function<std::string>(
         "--weights", [&t](const std::string& w) { t.weights = w; },
         "Loss-weight preset")
      ->check(CLI::IsMember({"nnn", "lr", "rydberg"}));
  cmd->add_option_function<std::size_t>(
      "--epochs", [&t](std::size_t v) { t.epochs = v; }, "Training epochs");
  cmd->add_option_function<std::size_t>(
      "--batch-size", [&t](std::size_t v) { t.batch_size = v; }, "Minibatch size");
  cmd->add_option_function<double>(
      "--lr", [&t](double v) { t.learning_rate = v; }, "AdaBelief learning rate");
  cmd->add_option("--checkpoint", t.checkpoint, "Checkpoint manifest name inside --out-dir");
}

}  // namespace

int main(int argc, char** argv) {
  cpvae::cli::tune_allocator();
  CLI::App app{"cpvae: probabilistic VAEs for quantum measurement data"};
  app.fallthrough();
  app.require_subcommand(1);

  GlobalOptions global;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Seed overriding any config value");
  app.add_option("--config", global.config, "JSON configuration file");
  app.add_option("--out-dir", global.out_dir, "Directory for artifacts and manifests");
  app.add_flag("--strict", global.strict, "Exit 1 when any input record was rejected");
  app.add_option("--threads", global.threads, "Worker threads for grid-parallel work")
      ->check(CLI::PositiveNumber);

  cpvae::cli::GenerateOptions gen;
  auto* generate = app.add_subcommand("generate", "Sample a Hamiltonian parameter grid");
  generate->add_option_function<std::string>(
      "--preset", [&gen](const std::string& p) { gen.preset = p; },
      "nnn-desk, nnn-paper, lr-desk or lr-paper");
  generate->add_option("--output", gen.output, "Dataset file name");

  cpvae::cli::IngestOptions ing;
  auto* ingest = app.add_subcommand("ingest", "Import newline-delimited Rydberg snapshots");
  ingest->add_option("--input", ing.input, "NDJSON snapshot records")->required();
  ingest->add_option("--rows", ing.rows, "Lattice rows")->required();
  ingest->add_option("--cols", ing.cols, "Lattice columns")->required();
  ingest->add_option("--output", ing.output, "Snapshot set file name");
  ingest->add_option("--grid-output", ing.grid_output, "Also write a training dataset");

  cpvae::cli::TrainOptions tr;
  auto* train = app.add_subcommand("train", "Train a cpVAE or dVAE");
  add_train_flags(train, tr);

  cpvae::cli::HoldoutOptions ho;
  auto* holdout = app.add_subcommand("holdout", "Train without a parameter band, test everywhere");
  add_train_flags(holdout, ho.train);
  holdout->add_option("--axis", ho.axis, "Axis name (h, j2, alpha) or axis1/axis2");
  holdout->add_option("--lo", ho.lo, "Lower edge of the excluded band");
  holdout->add_option("--hi", ho.hi, "Upper edge of the excluded band");
  holdout->add_option("--observable", ho.observable, "Observable compared on the grid");

  cpvae::cli::AnalyzeOptions an;
  auto* analyze = app.add_subcommand("analyze", "Phase maps and latent sweeps");
  analyze->add_option("analysis", an.analysis,
                      "latent-map, reconstruction, data-map, sweep or active")
      ->required();
  analyze->add_option("--checkpoint", an.checkpoint, "Checkpoint manifest");
  analyze->add_option("--dataset", an.dataset, "Dataset file");
  analyze->add_option("--observable", an.observable, "Observable for map analyses");
  analyze->add_option("--dim", an.dim, "Latent dimension to sweep");
  analyze->add_option("--from", an.from, "First sweep value");
  analyze->add_option("--to", an.to, "Last sweep value");
  analyze->add_option("--steps", an.steps, "Number of sweep values");
  analyze->add_option("--count", an.count, "Samples per sweep value");
  analyze->add_option("--threshold", an.threshold, "Active-neuron sigma threshold");

  cpvae::cli::SampleOptions sa;
  auto* sample = app.add_subcommand("sample", "Draw configurations at a latent point");
  sample->add_option("--checkpoint", sa.checkpoint, "Checkpoint manifest")->required();
  sample->add_option("--z", sa.z, "Latent coordinates")->delimiter(',');
  sample->add_option("--count", sa.count, "Number of configurations");
  sample->add_option("--output", sa.output, "Output file name");

  cpvae::cli::GradcheckOptions gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the objective");
  gradcheck->add_option("--sites", gc.sites, "Chain length");
  gradcheck->add_option("--batch", gc.batch, "Minibatch size");
  gradcheck->add_option("--seeds", gc.seeds, "Number of consecutive seeds");
  gradcheck->add_option("--weights", gc.weights, "unit, nnn, lr or rydberg");
  gradcheck->add_option("--tolerance", gc.tolerance, "Maximum relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cpvae::cli::kValidation;
  }
  if (seed_opt->count() > 0) global.seed = seed;

  return cpvae::cli::guarded(
      [&]() -> int {
        if (*generate) return cpvae::cli::cmd_generate(global, gen);
        if (*ingest) return cpvae::cli::cmd_ingest(global, ing);
        if (*train) return cpvae::cli::cmd_train(global, tr);
        if (*holdout) return cpvae::cli::cmd_holdout(global, ho);
        if (*analyze) return cpvae::cli::cmd_analyze(global, an);
        if (*sample) return cpvae::cli::cmd_sample(global, sa);
        return cpvae::cli::cmd_gradcheck(global, gc);
      },
      std::cerr);
}
