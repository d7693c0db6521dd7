#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bridgedpi/app/run_config.hpp"
#include "bridgedpi/data/checkpoint.hpp"
#include "bridgedpi/data/feature_store.hpp"
#include "bridgedpi/metrics/metrics.hpp"

namespace bridgedpi::app {

/// Parsed command line of one invocation.
struct RunSpec {
  std::string command;
  std::string config_path;
  std::string data, valid, test;
  std::string train_data; // eval: reference set defining seen proteins
  std::string proteins, drugs;
  std::string checkpoint;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::string hyper_nodes;
  bool branches = false;
  std::optional<std::size_t> folds, fold;
  bool deterministic = false;
  std::size_t jobs = 1; // sweep: concurrent runs
};

/// Config file, then --seed, then --deterministic, then --set overrides.
inline RunConfig resolve_config(const RunSpec &spec) {
  RunConfig config;
  if (!spec.config_path.empty())
    apply_config_file(config, spec.config_path);
  if (spec.seed)
    config.set_seed(*spec.seed);
  if (spec.deterministic)
    config.train.deterministic = true;
  for (const auto &o : spec.overrides)
    apply_assignment(config, o);
  // Vocabulary sizes follow the built-in tables.
  config.model.protein_vocab = protein::Vocabulary::amino_acids().size();
  config.model.smiles_vocab = protein::Vocabulary::smiles().size();
  try {
    config.model.validate();
    config.train.validate();
  } catch (const ConfigError &e) {
    throw UsageError(e.what());
  }
  return config;
}

namespace detail {

inline void require(const std::string &value, const char *flag, const std::string &command) {
  if (value.empty())
    throw UsageError(command + ": missing required option " + flag);
}

inline std::filesystem::path ensure_dir(const std::string &dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw DataError("cannot create output directory '" + dir + "': " + ec.message());
  return dir;
}

inline void write_text(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

/// Header-named columns of a tab-separated file.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;

  std::size_t column(const std::string &name, const std::string &source) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name)
        return i;
    throw DataError(source + ": missing column '" + name + "'");
  }
};

inline Table read_table(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw DataError("cannot read '" + path + "'");
  Table t;
  std::string line;
  if (!std::getline(in, line))
    throw DataError(path + ": missing header row");
  data::detail::strip_cr(line);
  t.header = data::detail::split_tabs(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    data::detail::strip_cr(line);
    if (line.empty())
      continue;
    auto cells = data::detail::split_tabs(line);
    if (cells.size() != t.header.size())
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(t.header.size()) + " fields, found " +
                      std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
    t.lines.push_back(line_no);
  }
  return t;
}

inline std::string fmt_short(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

inline std::vector<int> parse_hyper_nodes(const std::string &text) {
  std::vector<int> out;
  std::string item;
  std::stringstream ss(text);
  while (ss >> item) {
    std::stringstream parts(item);
    std::string tok;
    while (std::getline(parts, tok, ',')) {
      if (tok.empty())
        continue;
      const int m = app::detail::parse_number<int>("--hyper-nodes", tok);
      if (m < -1)
        throw UsageError("--hyper-nodes: values must be >= -1, got " + tok);
      out.push_back(m);
    }
  }
  if (out.empty())
    throw UsageError("--hyper-nodes: empty list");
  return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Data preparation

struct PreparedData {
  std::vector<data::PairRecord> records;
  data::DatasetSplit split;
};

/// Throws when a test or validation record flagged unseen has a protein that
/// occurs in train, or when a seen flag disagrees with train membership.
inline void check_no_leakage(const std::vector<data::PairRecord> &records,
                             const data::DatasetSplit &split) {
  std::set<std::string> train_proteins;
  for (auto i : split.train)
    train_proteins.insert(records[i].protein_id);
  auto check = [&](const std::vector<std::size_t> &idx, const std::vector<bool> &seen,
                   const char *part) {
    for (std::size_t k = 0; k < idx.size(); ++k)
      if (static_cast<bool>(seen[k]) != (train_proteins.count(records[idx[k]].protein_id) > 0))
        throw DataError(std::string("leakage check failed: ") + part + " record " +
                        std::to_string(idx[k]) + " has a wrong seen flag");
  };
  check(split.test, split.test_seen, "test");
  check(split.valid, split.valid_seen, "validation");
}

/// Builds the record list and partitions from --data/--valid/--test or a
/// k-fold request. With k-fold, the held-out fold is both validation and
/// test set.
inline PreparedData prepare_data(const RunSpec &spec, const RunConfig &config) {
  detail::require(spec.data, "--data", spec.command);
  PreparedData p;
  p.records = data::load_dataset(spec.data);
  if (spec.folds || spec.fold) {
    if (!spec.folds || !spec.fold)
      throw UsageError("--folds and --fold must be given together");
    if (!spec.valid.empty() || !spec.test.empty())
      throw UsageError("--folds cannot be combined with --valid/--test");
    if (*spec.folds < 2 || *spec.fold >= *spec.folds)
      throw UsageError("--fold must lie in [0, --folds) with --folds >= 2");
    p.split = data::kfold(p.records, *spec.folds, *spec.fold, config.split_seed);
    p.split.test = p.split.valid;
    p.split.test_seen = p.split.valid_seen;
  } else if (!spec.valid.empty()) {
    const auto n_train = p.records.size();
    auto valid = data::load_dataset(spec.valid);
    for (std::size_t i = 0; i < n_train; ++i)
      p.split.train.push_back(i);
    for (std::size_t i = 0; i < valid.size(); ++i)
      p.split.valid.push_back(n_train + i);
    p.records.insert(p.records.end(), valid.begin(), valid.end());
    if (!spec.test.empty()) {
      const auto offset = p.records.size();
      auto test = data::load_dataset(spec.test);
      for (std::size_t i = 0; i < test.size(); ++i)
        p.split.test.push_back(offset + i);
      p.records.insert(p.records.end(), test.begin(), test.end());
    } else {
      p.split.test = p.split.valid;
    }
    data::detail::flag_seen(p.records, p.split);
  } else {
    if (!spec.test.empty())
      throw UsageError("--test requires --valid");
    p.split = data::split_seen_unseen(p.records, config.split, config.split_seed);
  }
  check_no_leakage(p.records, p.split);
  return p;
}

// ---------------------------------------------------------------------------
// Training

struct StrataReport {
  metrics::EvalReport overall, seen, unseen;
};

inline metrics::EvalReport evaluate_subset(const std::vector<double> &scores,
                                           const std::vector<int> &labels) {
  if (scores.empty())
    return {};
  return metrics::evaluate(scores, labels);
}

inline StrataReport evaluate_strata(const std::vector<double> &scores,
                                    const std::vector<int> &labels,
                                    const std::vector<bool> &seen) {
  StrataReport r;
  r.overall = evaluate_subset(scores, labels);
  for (int want : {1, 0}) {
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t i = 0; i < scores.size(); ++i)
      if (static_cast<int>(seen[i]) == want) {
        s.push_back(scores[i]);
        y.push_back(labels[i]);
      }
    (want ? r.seen : r.unseen) = evaluate_subset(s, y);
  }
  return r;
}

inline std::string strata_csv(const StrataReport &r) {
  return metrics::csv_header() + "\n" + metrics::csv_row("overall", r.overall) + "\n" +
         metrics::csv_row("seen", r.seen) + "\n" + metrics::csv_row("unseen", r.unseen) + "\n";
}

inline std::string strata_table(const StrataReport &r) {
  return metrics::format_table({{"overall", r.overall}, {"seen", r.seen}, {"unseen", r.unseen}});
}

struct RunOutcome {
  train::TrainResult result;
  StrataReport test;
};

/// Trains one model and writes its artifacts into `dir`: model.bdpi,
/// history.csv, split.tsv, test_report.csv and config.txt.
inline RunOutcome run_training(const PreparedData &data, const RunConfig &config,
                               const std::filesystem::path &dir, std::ostream &log) {
  detail::ensure_dir(dir.string());
  detail::write_text(dir / "config.txt", dump_config(config));
  detail::write_text(dir / "split.tsv", data::split_manifest(data.split, data.records.size()));

  const model::Featurizer featurizer(config.model);
  const data::FeatureStore features(featurizer, data.records);
  model::BridgeDPI<float> net(config.model);

  train::TrainCallbacks callbacks;
  callbacks.on_epoch = [&](const train::EpochRecord &e) {
    log << "epoch " << e.epoch << "  loss " << detail::fmt_short(e.train_loss) << "  val_auc "
        << detail::fmt_short(e.val_auc) << "  val_acc " << detail::fmt_short(e.val_acc) << '\n';
  };
  RunOutcome outcome;
  outcome.result = train::train(net, features, data.records, data.split.train, data.split.valid,
                                config.train, callbacks);
  detail::write_text(dir / "history.csv", train::history_csv(outcome.result.history));

  auto ckpt = data::capture(net, featurizer);
  ckpt.seed = config.train.seed;
  ckpt.best_val_auc = outcome.result.best_val_auc;
  ckpt.best_epoch = outcome.result.best_epoch;
  data::save_checkpoint((dir / "model.bdpi").string(), ckpt);

  const auto scores = train::predict(net, features, data.split.test, config.train.batch_size);
  outcome.test = evaluate_strata(scores, train::labels_of(data.records, data.split.test),
                                 data.split.test_seen);
  detail::write_text(dir / "test_report.csv", strata_csv(outcome.test));
  return outcome;
}

inline int cmd_train(const RunSpec &spec, std::ostream &out, std::ostream &log) {
  detail::require(spec.data, "--data", "train");
  detail::require(spec.out, "--out", "train");
  const auto config = resolve_config(spec);
  const auto data = prepare_data(spec, config);
  log << "train: " << data.split.train.size() << " train / " << data.split.valid.size()
      << " valid / " << data.split.test.size() << " test records\n";
  const auto outcome = run_training(data, config, spec.out, log);
  out << "best validation AUC " << detail::fmt_short(outcome.result.best_val_auc) << " at epoch "
      << outcome.result.best_epoch << "\n"
      << strata_table(outcome.test);
  return 0;
}

// ---------------------------------------------------------------------------
// Evaluation and prediction

inline int cmd_eval(const RunSpec &spec, std::ostream &out, std::ostream &log) {
  detail::require(spec.checkpoint, "--checkpoint", "eval");
  detail::require(spec.data, "--data", "eval");
  const auto ckpt = data::load_checkpoint(spec.checkpoint,
                                          [&](const std::string &m) { log << "warning: " << m << '\n'; });
  const auto net = data::restore<float>(ckpt);
  const auto featurizer = data::make_featurizer(ckpt);
  const auto records = data::load_dataset(spec.data);
  if (records.empty())
    throw DataError(spec.data + ": no records to evaluate");
  const data::FeatureStore features(featurizer, records);
  std::vector<std::size_t> idx(records.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});

  std::set<std::string> reference;
  if (!spec.train_data.empty())
    for (const auto &r : data::load_dataset(spec.train_data))
      reference.insert(r.protein_id);
  std::vector<bool> seen;
  for (const auto &r : records)
    seen.push_back(reference.count(r.protein_id) > 0);

  const auto report = evaluate_strata(train::predict(net, features, idx),
                                      train::labels_of(records, idx), seen);
  // Without a reference training set there is no seen/unseen distinction.
  const bool strata = !spec.train_data.empty();
  if (!spec.out.empty())
    detail::write_text(spec.out, strata ? strata_csv(report)
                                        : metrics::csv_header() + "\n" +
                                              metrics::csv_row("overall", report.overall) + "\n");
  out << (strata ? strata_table(report) : metrics::format_table({{"overall", report.overall}}));
  return 0;
}

/// Rows = drugs, columns = proteins, values = interaction probabilities.
inline int cmd_predict(const RunSpec &spec, std::ostream &out, std::ostream &log) {
  detail::require(spec.checkpoint, "--checkpoint", "predict");
  detail::require(spec.proteins, "--proteins", "predict");
  detail::require(spec.drugs, "--drugs", "predict");
  const auto ckpt = data::load_checkpoint(spec.checkpoint,
                                          [&](const std::string &m) { log << "warning: " << m << '\n'; });
  const auto net = data::restore<float>(ckpt);
  const auto featurizer = data::make_featurizer(ckpt);

  std::vector<std::string> protein_ids, drug_ids;
  std::vector<model::ProteinInput> proteins;
  std::vector<model::DrugInput> drugs;
  std::size_t skipped_proteins = 0, skipped_drugs = 0;

  const auto ptable = detail::read_table(spec.proteins);
  const auto pid = ptable.column("protein_id", spec.proteins);
  const auto pseq = ptable.column("protein_sequence", spec.proteins);
  for (std::size_t r = 0; r < ptable.rows.size(); ++r) {
    const auto &seq = ptable.rows[r][pseq];
    const bool valid = !seq.empty() && std::all_of(seq.begin(), seq.end(), [](char c) {
      return std::isupper(static_cast<unsigned char>(c));
    });
    if (!valid) {
      log << spec.proteins << ":" << ptable.lines[r] << ": skipping protein '"
          << ptable.rows[r][pid] << "': invalid sequence\n";
      ++skipped_proteins;
      continue;
    }
    protein_ids.push_back(ptable.rows[r][pid]);
    proteins.push_back(featurizer.protein(seq));
  }
  const auto dtable = detail::read_table(spec.drugs);
  const auto did = dtable.column("drug_id", spec.drugs);
  const auto dsmi = dtable.column("smiles", spec.drugs);
  for (std::size_t r = 0; r < dtable.rows.size(); ++r) {
    try {
      drugs.push_back(featurizer.drug(dtable.rows[r][dsmi]));
      drug_ids.push_back(dtable.rows[r][did]);
    } catch (const ParseError &e) {
      log << spec.drugs << ":" << dtable.lines[r] << ": skipping drug '" << dtable.rows[r][did]
          << "': " << e.what() << '\n';
      ++skipped_drugs;
    }
  }

  std::string csv = "drug_id";
  for (const auto &id : protein_ids)
    csv += "," + id;
  csv += "\n";
  std::vector<const model::ProteinInput *> pbatch;
  for (const auto &p : proteins)
    pbatch.push_back(&p);
  for (std::size_t d = 0; d < drugs.size(); ++d) {
    csv += drug_ids[d];
    if (!pbatch.empty()) {
      const std::vector<const model::DrugInput *> dbatch(pbatch.size(), &drugs[d]);
      const auto y = net.forward(pbatch, dbatch, model::Mode::inference());
      for (float v : y.values())
        csv += "," + detail::fmt_short(v);
    }
    csv += "\n";
  }
  if (spec.out.empty())
    out << csv;
  else
    detail::write_text(spec.out, csv);
  log << "predict: " << drugs.size() << " drugs x " << proteins.size() << " proteins; skipped "
      << skipped_drugs << " drug row(s) and " << skipped_proteins << " protein row(s)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// Ablation sweeps

namespace detail {

struct SweepJob {
  RunConfig config;
  std::string name;
  std::optional<RunOutcome> outcome;
  std::string log;
};

/// Runs the jobs on up to `workers` threads. Each run is isolated: its own
/// model, feature store and output directory; logs are buffered per run.
inline void run_jobs(std::vector<SweepJob> &jobs, const PreparedData &data,
                     const std::filesystem::path &root, std::size_t workers) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      auto &job = jobs[i];
      std::ostringstream log;
      log << "sweep: run " << job.name << '\n';
      try {
        job.config.model.validate();
        job.outcome = run_training(data, job.config, root / job.name, log);
      } catch (const std::exception &e) {
        log << "sweep: run " << job.name << " failed: " << e.what() << '\n';
      }
      job.log = log.str();
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, jobs.size());
  if (workers == 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back(worker);
  for (auto &t : pool)
    t.join();
}

} // namespace detail

inline int cmd_sweep(const RunSpec &spec, std::ostream &out, std::ostream &log) {
  detail::require(spec.data, "--data", "sweep");
  detail::require(spec.out, "--out", "sweep");
  if (spec.hyper_nodes.empty() && !spec.branches)
    throw UsageError("sweep: give --hyper-nodes <list> and/or --branches");
  if (spec.jobs == 0)
    throw UsageError("sweep: --jobs must be positive");
  const auto base = resolve_config(spec);
  const auto counts =
      spec.hyper_nodes.empty() ? std::vector<int>{} : detail::parse_hyper_nodes(spec.hyper_nodes);
  // The four single-branch pairings, then everything enabled.
  const bool combos[5][4] = {{true, false, true, false},
                             {true, false, false, true},
                             {false, true, true, false},
                             {false, true, false, true},
                             {true, true, true, true}};
  auto combo_name = [](const bool *c) {
    std::string name = "branches_";
    for (int k = 0; k < 4; ++k)
      name += c[k] ? '1' : '0';
    return name;
  };

  std::vector<detail::SweepJob> jobs;
  for (int m : counts) {
    auto config = base;
    config.model.hyper_nodes = m;
    jobs.push_back({config, "m_" + std::to_string(m), std::nullopt, {}});
  }
  if (spec.branches)
    for (const auto &c : combos) {
      auto config = base;
      config.model.use_protein_kmer = c[0];
      config.model.use_protein_cnn = c[1];
      config.model.use_drug_fp = c[2];
      config.model.use_drug_cnn = c[3];
      jobs.push_back({config, combo_name(c), std::nullopt, {}});
    }

  const auto data = prepare_data(spec, base);
  const auto root = detail::ensure_dir(spec.out);
  detail::run_jobs(jobs, data, root, spec.jobs);
  std::size_t failures = 0;
  for (const auto &job : jobs) {
    log << job.log;
    failures += !job.outcome;
  }

  auto cell = [](const metrics::EvalReport &r, double metrics::EvalReport::*field) {
    return field == &metrics::EvalReport::auc && !r.auc_defined ? std::string("NA")
                                                                : detail::fmt_short(r.*field);
  };
  std::size_t j = 0;
  if (!counts.empty()) {
    std::string csv = "m,overall_auc,overall_acc,unseen_auc,unseen_acc,status\n";
    for (int m : counts) {
      const auto &o = jobs[j++].outcome;
      csv += std::to_string(m) + ",";
      if (o)
        csv += cell(o->test.overall, &metrics::EvalReport::auc) + "," +
               cell(o->test.overall, &metrics::EvalReport::acc) + "," +
               cell(o->test.unseen, &metrics::EvalReport::auc) + "," +
               cell(o->test.unseen, &metrics::EvalReport::acc) + ",ok\n";
      else
        csv += "NA,NA,NA,NA,failed\n";
    }
    detail::write_text(root / "sweep.csv", csv);
    out << csv;
  }
  if (spec.branches) {
    std::string csv = "protein_kmer,protein_cnn,drug_fp,drug_cnn,auc,acc,f1,unseen_auc,status\n";
    for (const auto &c : combos) {
      const auto &o = jobs[j++].outcome;
      for (bool on : c)
        csv += std::string(on ? "1" : "0") + ",";
      if (o)
        csv += cell(o->test.overall, &metrics::EvalReport::auc) + "," +
               cell(o->test.overall, &metrics::EvalReport::acc) + "," +
               cell(o->test.overall, &metrics::EvalReport::f1) + "," +
               cell(o->test.unseen, &metrics::EvalReport::auc) + ",ok\n";
      else
        csv += "NA,NA,NA,NA,failed\n";
    }
    detail::write_text(root / "branch_sweep.csv", csv);
    out << csv;
  }
  log << "sweep: " << jobs.size() - failures << " of " << jobs.size() << " runs succeeded\n";
  return failures == jobs.size() ? 1 : 0;
}

// ---------------------------------------------------------------------------
// Data utilities

inline int cmd_make_synthetic(const RunSpec &spec, std::ostream &, std::ostream &log) {
  detail::require(spec.out, "--out", "make-synthetic");
  const auto config = resolve_config(spec);
  auto syn = config.synthetic;
  syn.fp_bits = config.model.fp_bits;
  std::vector<data::PairRecord> records;
  try {
    records = data::make_synthetic(syn);
  } catch (const DataError &e) {
    throw UsageError(e.what());
  }
  data::save_dataset(spec.out, records);
  std::size_t positives = 0;
  for (const auto &r : records)
    positives += static_cast<std::size_t>(r.label);
  log << "make-synthetic: " << records.size() << " pairs, " << positives << " positive\n";
  return 0;
}

/// Per-protein sparse k-mer counts and per-drug fingerprints.
inline int cmd_featurize(const RunSpec &spec, std::ostream &, std::ostream &log) {
  detail::require(spec.data, "--data", "featurize");
  detail::require(spec.out, "--out", "featurize");
  const auto config = resolve_config(spec);
  const auto records = data::load_dataset(spec.data);
  const auto dir = detail::ensure_dir(spec.out);

  std::string ptsv = "protein_id\tlength\tdistinct_kmers\tkmer_counts\n";
  std::string dtsv = "drug_id\tsmiles\tatoms\tbonds\tbits_set\tfingerprint_hex\n";
  std::set<std::string> done_p, done_d;
  for (const auto &r : records) {
    if (done_p.insert(r.protein_id).second) {
      const auto k = protein::kmer_features(r.protein_sequence);
      std::string counts;
      std::size_t distinct = 0;
      for (std::size_t i = 0; i < k.values.size(); ++i)
        if (k.values[i] != 0.0) {
          counts += (distinct++ ? " " : "") + std::to_string(i) + ":" +
                    std::to_string(static_cast<long>(k.values[i]));
        }
      ptsv += r.protein_id + "\t" + std::to_string(r.protein_sequence.size()) + "\t" +
              std::to_string(distinct) + "\t" + counts + "\n";
    }
    if (done_d.insert(r.drug_id).second) {
      const auto mol = chem::parse_smiles(r.smiles);
      const auto fp = chem::morgan_fingerprint(mol, config.model.fp_radius, config.model.fp_bits);
      dtsv += r.drug_id + "\t" + r.smiles + "\t" + std::to_string(mol.atoms.size()) + "\t" +
              std::to_string(mol.bonds.size()) + "\t" + std::to_string(fp.popcount()) + "\t" +
              chem::to_hex(fp) + "\n";
    }
  }
  detail::write_text(dir / "proteins.tsv", ptsv);
  detail::write_text(dir / "drugs.tsv", dtsv);
  log << "featurize: " << done_p.size() << " proteins, " << done_d.size() << " drugs\n";
  return 0;
}

inline constexpr double kPositiveIc50 = 100.0;     // nM
inline constexpr double kNegativeIc50 = 10000.0;   // nM

/// Labels raw affinity rows: IC50 < 100 nM positive, > 10,000 nM negative,
/// anything between (or unparseable) dropped.
inline int cmd_label_ic50(const RunSpec &spec, std::ostream &, std::ostream &log) {
  detail::require(spec.data, "--data", "label-ic50");
  detail::require(spec.out, "--out", "label-ic50");
  const auto table = detail::read_table(spec.data);
  const auto pid = table.column("protein_id", spec.data);
  const auto did = table.column("drug_id", spec.data);
  const auto seq = table.column("protein_sequence", spec.data);
  const auto smi = table.column("smiles", spec.data);
  const auto ic = table.column("ic50_nm", spec.data);
  std::vector<data::PairRecord> records;
  std::size_t ambiguous = 0, malformed = 0;
  for (const auto &row : table.rows) {
    double value = 0.0;
    try {
      value = app::detail::parse_number<double>("ic50_nm", row[ic]);
    } catch (const UsageError &) {
      ++malformed;
      continue;
    }
    if (value < kPositiveIc50)
      records.push_back({row[pid], row[did], row[seq], row[smi], 1});
    else if (value > kNegativeIc50)
      records.push_back({row[pid], row[did], row[seq], row[smi], 0});
    else
      ++ambiguous;
  }
  data::save_dataset(spec.out, records);
  log << "label-ic50: kept " << records.size() << ", dropped " << ambiguous
      << " between thresholds and " << malformed << " unparseable\n";
  return 0;
}

inline int dispatch(const RunSpec &spec, std::ostream &out, std::ostream &log) {
  if (spec.command == "train")
    return cmd_train(spec, out, log);
  if (spec.command == "eval")
    return cmd_eval(spec, out, log);
  if (spec.command == "predict")
    return cmd_predict(spec, out, log);
  if (spec.command == "sweep")
    return cmd_sweep(spec, out, log);
  if (spec.command == "featurize")
    return cmd_featurize(spec, out, log);
  if (spec.command == "make-synthetic")
    return cmd_make_synthetic(spec, out, log);
  if (spec.command == "label-ic50")
    return cmd_label_ic50(spec, out, log);
  throw UsageError("unknown command '" + spec.command + "'");
}

} // namespace bridgedpi::app
