// bridgedpi: train, evaluate and apply drug-protein interaction models.
//
// Exit status: 0 success, 2 usage error, 1 runtime error.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bridgedpi/app/commands.hpp"

namespace {

using bridgedpi::app::RunSpec;

void add_config_options(CLI::App *sub, RunSpec &spec) {
  sub->add_option("--config", spec.config_path, "flat key=value config document");
  sub->add_option("--seed", spec.seed, "seed for initialisation, batching and splitting");
  sub->add_option("--set", spec.overrides, "override a config key (key=value, repeatable)");
}

void add_split_options(CLI::App *sub, RunSpec &spec) {
  sub->add_option("--data", spec.data, "labelled pairs (TSV)");
  sub->add_option("--valid", spec.valid, "explicit validation pairs (TSV)");
  sub->add_option("--test", spec.test, "explicit test pairs (TSV)");
  sub->add_option("--folds", spec.folds, "k-fold cross-validation: number of folds");
  sub->add_option("--fold", spec.fold, "k-fold cross-validation: held-out fold index");
  sub->add_flag("--deterministic", spec.deterministic, "train without dropout noise");
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"BridgeDPI drug-protein interaction toolkit"};
  app.require_subcommand(1);
  RunSpec spec;

  auto *train = app.add_subcommand("train", "train a model and report test metrics");
  add_config_options(train, spec);
  add_split_options(train, spec);
  train->add_option("--out", spec.out, "output directory");

  auto *eval = app.add_subcommand("eval", "evaluate a checkpoint on labelled pairs");
  add_config_options(eval, spec);
  eval->add_option("--checkpoint", spec.checkpoint, "model checkpoint");
  eval->add_option("--data", spec.data, "labelled pairs (TSV)");
  eval->add_option("--train-data", spec.train_data, "training pairs; enables seen/unseen strata");
  eval->add_option("--out", spec.out, "report CSV");

  auto *predict = app.add_subcommand("predict", "drugs x proteins probability matrix");
  add_config_options(predict, spec);
  predict->add_option("--checkpoint", spec.checkpoint, "model checkpoint");
  predict->add_option("--proteins", spec.proteins, "TSV with protein_id, protein_sequence");
  predict->add_option("--drugs", spec.drugs, "TSV with drug_id, smiles");
  predict->add_option("--out", spec.out, "matrix CSV (stdout when omitted)");

  auto *sweep = app.add_subcommand("sweep", "ablation over hyper-node counts or branches");
  add_config_options(sweep, spec);
  add_split_options(sweep, spec);
  sweep->add_option("--hyper-nodes", spec.hyper_nodes, "hyper-node counts, e.g. \"-1,1,8\"");
  sweep->add_flag("--branches", spec.branches, "sweep the feature-branch combinations");
  sweep->add_option("--jobs", spec.jobs, "runs trained concurrently (default 1)");
  sweep->add_option("--out", spec.out, "output directory");

  auto *featurize = app.add_subcommand("featurize", "export k-mer counts and fingerprints");
  add_config_options(featurize, spec);
  featurize->add_option("--data", spec.data, "pairs (TSV)");
  featurize->add_option("--out", spec.out, "output directory");

  auto *synthetic = app.add_subcommand("make-synthetic", "generate the synthetic benchmark");
  add_config_options(synthetic, spec);
  synthetic->add_option("--out", spec.out, "output TSV");

  auto *ic50 = app.add_subcommand("label-ic50", "label affinity rows by IC50 thresholds");
  ic50->add_option("--data", spec.data, "TSV with an ic50_nm column");
  ic50->add_option("--out", spec.out, "labelled TSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  spec.command = app.get_subcommands().front()->get_name();

  try {
    return bridgedpi::app::dispatch(spec, std::cout, std::cerr);
  } catch (const bridgedpi::app::UsageError &e) {
    std::cerr << "usage error: " << e.what() << "\nrun '" << argv[0] << " " << spec.command
              << " --help' for options\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
