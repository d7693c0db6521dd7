// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Criteria 6-8 drive the command-line tool end to end.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bridgedpi/ad/gradcheck.hpp"
#include "bridgedpi/ad/ops.hpp"
#include "bridgedpi/chem/fingerprint.hpp"
#include "bridgedpi/chem/smiles.hpp"
#include "bridgedpi/data/checkpoint.hpp"
#include "bridgedpi/data/feature_store.hpp"
#include "bridgedpi/data/split.hpp"
#include "bridgedpi/metrics/metrics.hpp"
#include "bridgedpi/model/bridgedpi.hpp"
#include "bridgedpi/protein/features.hpp"
#include "bridgedpi/train/trainer.hpp"
#include "model_fixtures.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace bridgedpi;
using bridgedpi::testing::run_cli;
using bridgedpi::testing::slurp;
using T = ad::Tensor<double>;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string &what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<std::vector<std::string>> csv_rows(const std::string &text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
      cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::string quote(const fs::path &p) { return "'" + p.string() + "'"; }

// ---------------------------------------------------------------------------
// 1. gradients

T random_tensor(ad::Shape shape, std::mt19937_64 &rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(ad::numel(shape));
  for (auto &x : v)
    x = dist(rng);
  return T(std::move(shape), std::move(v));
}

T weighted_sum(const T &out) {
  std::mt19937_64 rng(11);
  return ad::ops::sum(ad::ops::mul(out, random_tensor(out.shape(), rng, 0.5, 1.5)));
}

struct PairBatch {
  std::vector<model::ProteinInput> proteins;
  std::vector<model::DrugInput> drugs;

  std::vector<const model::ProteinInput *> p() const {
    std::vector<const model::ProteinInput *> out;
    for (const auto &x : proteins)
      out.push_back(&x);
    return out;
  }
  std::vector<const model::DrugInput *> d() const {
    std::vector<const model::DrugInput *> out;
    for (const auto &x : drugs)
      out.push_back(&x);
    return out;
  }
};

PairBatch make_batch(const model::ModelConfig &config, std::size_t n, std::uint64_t seed) {
  static const std::vector<std::string> smiles{"CCO", "c1ccccc1O", "CC(=O)Nc1ccc(O)cc1",
                                               "C1CCNCC1", "OC(=O)C(N)Cc1ccccc1", "CS(=O)(=O)N"};
  std::mt19937_64 rng(seed);
  model::Featurizer f(config);
  PairBatch b;
  for (std::size_t i = 0; i < n; ++i) {
    b.proteins.push_back(f.protein(bridgedpi::testing::random_protein(rng, 8 + rng() % 10)));
    b.drugs.push_back(f.drug(smiles[rng() % smiles.size()]));
  }
  return b;
}

void gradient_criterion(Outcome &o) {
  constexpr double kTol = 1e-4;
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(42);
  double worst = 0.0;
  std::size_t primitives = 0;
  auto check = [&](const std::string &name, const std::function<T()> &fn,
                   std::vector<std::pair<std::string, T>> params,
                   ad::GradCheckOptions opt = {}) {
    const auto report = ad::finite_difference_check<double>(fn, std::move(params), opt);
    ++primitives;
    worst = std::max(worst, report.max_rel_error);
    o.require(report.passed(kTol), name);
  };

  T a = random_tensor({3, 4}, rng), b = random_tensor({4, 5}, rng), c = random_tensor({3, 4}, rng);
  T ba = random_tensor({2, 3, 4}, rng), bb = random_tensor({2, 4, 3}, rng);
  check("matmul", [&] { return weighted_sum(ad::ops::matmul(a, b)); }, {{"a", a}, {"b", b}});
  check("batched matmul", [&] { return weighted_sum(ad::ops::matmul(ba, bb)); },
        {{"a", ba}, {"b", bb}});
  check("add", [&] { return weighted_sum(ad::ops::add(a, c)); }, {{"a", a}, {"c", c}});
  check("mul", [&] { return weighted_sum(ad::ops::mul(a, c)); }, {{"a", a}, {"c", c}});
  check("scale", [&] { return weighted_sum(ad::ops::scale(a, -2.5)); }, {{"a", a}});
  T bias = random_tensor({4}, rng);
  check("add_bias", [&] { return weighted_sum(ad::ops::add_bias(ba, bias)); },
        {{"x", ba}, {"bias", bias}});
  check("sigmoid", [&] { return weighted_sum(ad::ops::sigmoid(a)); }, {{"a", a}});
  {
    T x = random_tensor({40}, rng);
    ad::GradCheckOptions opt;
    opt.include = [&](std::size_t, std::size_t k) { return std::abs(x.at(k)) > 1e-3; };
    check("relu", [&] { return weighted_sum(ad::ops::relu(x)); }, {{"x", x}}, opt);
  }
  check("sum", [&] { return ad::ops::sum(a); }, {{"a", a}});
  check("mean", [&] { return ad::ops::mean(a); }, {{"a", a}});
  check("sum_squares", [&] { return ad::ops::sum_squares(a); }, {{"a", a}});
  check("reshape", [&] { return weighted_sum(ad::ops::reshape(a, {2, 6})); }, {{"a", a}});
  check("repeat", [&] { return weighted_sum(ad::ops::repeat(a, 3)); }, {{"a", a}});
  check("slice", [&] { return weighted_sum(ad::ops::slice(ba, 1, 1, 3)); }, {{"x", ba}});
  T other = random_tensor({2, 2, 4}, rng);
  check("concat", [&] { return weighted_sum(ad::ops::concat<double>({ba, other}, 1)); },
        {{"x", ba}, {"y", other}});
  T table = random_tensor({6, 3}, rng);
  const std::vector<int> ids{2, 0, 5, 2, 1, 0};
  check("embedding", [&] { return weighted_sum(ad::ops::embedding(table, ids, {2, 3})); },
        {{"table", table}});
  T seq = random_tensor({2, 7, 3}, rng), kernel = random_tensor({3, 3, 4}, rng),
    kbias = random_tensor({4}, rng);
  check("conv1d", [&] { return weighted_sum(ad::ops::conv1d(seq, kernel, kbias)); },
        {{"x", seq}, {"kernel", kernel}, {"bias", kbias}});
  check("global_maxpool", [&] { return weighted_sum(ad::ops::global_maxpool(seq)); },
        {{"x", seq}});
  T feats = random_tensor({6, 4}, rng), gamma = random_tensor({4}, rng, 0.5, 1.5),
    beta = random_tensor({4}, rng);
  ad::ops::BatchNormStats<double> stats(4);
  stats.running_mean = random_tensor({4}, rng);
  stats.running_var = random_tensor({4}, rng, 0.5, 2.0);
  check("batchnorm (batch statistics)",
        [&] { return weighted_sum(ad::ops::batchnorm(feats, gamma, beta, stats, true)); },
        {{"x", feats}, {"gamma", gamma}, {"beta", beta}});
  check("batchnorm (running statistics)",
        [&] { return weighted_sum(ad::ops::batchnorm(feats, gamma, beta, stats, false)); },
        {{"x", feats}, {"gamma", gamma}, {"beta", beta}});
  check("dropout",
        [&] {
          std::mt19937_64 mask(5);
          return weighted_sum(ad::ops::dropout(feats, 0.3, mask, true));
        },
        {{"x", feats}});
  T nodes = random_tensor({2, 5, 4}, rng);
  check("cosine_similarity_matrix",
        [&] { return weighted_sum(ad::ops::cosine_similarity_matrix(nodes)); },
        {{"nodes", nodes}});
  T adj = random_tensor({2, 5, 5}, rng, 0.1, 1.0);
  check("degree_normalize", [&] { return weighted_sum(ad::ops::degree_normalize(adj)); },
        {{"A", adj}});
  T probs = random_tensor({6}, rng, 0.05, 0.95);
  const std::vector<double> labels{1, 0, 0, 1, 1, 0};
  check("binary_cross_entropy", [&] { return ad::ops::binary_cross_entropy(probs, labels); },
        {{"p", probs}});

  // Full model, 2 pairs, m = 4, inference-mode (deterministic) forward.
  const auto config = bridgedpi::testing::tiny_config(4);
  model::BridgeDPI<double> net(config);
  bridgedpi::testing::randomise(net, 31);
  const auto batch = make_batch(config, 2, 5);
  const std::vector<double> y{1.0, 0.0};
  std::vector<std::pair<std::string, T>> params;
  for (auto &p : net.parameters().params())
    params.emplace_back(p.name, p.value);
  ad::GradCheckOptions opt;
  opt.max_coords_per_param = 200;
  opt.seed = 3;
  const auto report = ad::finite_difference_check<double>(
      [&] {
        return ad::ops::binary_cross_entropy(
            net.forward(batch.p(), batch.d(), model::Mode::inference()), y);
      },
      params, opt);
  o.require(report.passed(kTol), "full model");
  const double elapsed = seconds_since(start);
  o.require(elapsed < 60.0, "runtime < 60 s");
  o.detail << primitives << " primitive checks max rel err " << worst << "; full model ("
           << report.params.size() << " tensors) max rel err " << report.max_rel_error << "; "
           << elapsed << " s";
}

// ---------------------------------------------------------------------------
// 2. fingerprints and parser

void fingerprint_criterion(Outcome &o) {
  using bridgedpi::testing::fixture;
  using bridgedpi::testing::read_tsv;
  const auto golden = read_tsv(fixture("morgan_r2_1024.tsv"));
  std::size_t exact = 0;
  for (const auto &row : golden) {
    try {
      if (chem::to_hex(chem::morgan_fingerprint(chem::parse_smiles(row.at("smiles")), 2, 1024)) ==
          row.at("hex"))
        ++exact;
    } catch (const std::exception &) {
    }
  }
  o.require(golden.size() >= 20, ">= 20 golden molecules");
  o.require(exact == golden.size(), "all golden fingerprints exact");

  const auto corpus = read_tsv(fixture("smiles_corpus.tsv"));
  std::size_t ok = 0, crashes = 0;
  for (const auto &row : corpus) {
    try {
      const auto mol = chem::parse_smiles(row.at("smiles"));
      if (mol.atom_count() == std::stoul(row.at("atoms")) &&
          mol.bond_count() == std::stoul(row.at("bonds")))
        ++ok;
    } catch (const std::exception &) {
      ++crashes;
    }
  }
  o.require(corpus.size() >= 50, ">= 50 corpus strings");
  o.require(crashes == 0, "no parser failures");
  o.require(ok == corpus.size(), "atom/bond counts");
  o.detail << exact << "/" << golden.size() << " fingerprints exact; " << ok << "/" << corpus.size()
           << " corpus counts correct, " << crashes << " failures";
}

// ---------------------------------------------------------------------------
// 3. k-mers

void kmer_criterion(Outcome &o) {
  using protein::kAlphabet;
  std::vector<std::string> kmers;
  for (char a : kAlphabet)
    kmers.emplace_back(1, a);
  for (char a : kAlphabet)
    for (char b : kAlphabet)
      kmers.push_back(std::string{a, b});
  for (char a : kAlphabet)
    for (char b : kAlphabet)
      for (char c : kAlphabet)
        kmers.push_back(std::string{a, b, c});
  o.require(kmers.size() == 8420, "8420 k-mers");

  std::mt19937_64 rng(2024);
  std::size_t mismatches = 0;
  double worst_mean = 0.0, worst_std = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::string seq;
    const std::size_t len = 1 + rng() % 50;
    for (std::size_t i = 0; i < len; ++i)
      seq += kAlphabet[rng() % kAlphabet.size()];
    const auto v = protein::kmer_features(seq);
    for (std::size_t i = 0; i < kmers.size(); ++i) {
      std::size_t n = 0;
      for (auto pos = seq.find(kmers[i]); pos != std::string::npos; pos = seq.find(kmers[i], pos + 1))
        ++n;
      mismatches += v.values[i] != static_cast<double>(n);
    }
    const auto z = protein::block_normalize(v);
    for (std::size_t k = 1; k <= 3; ++k) {
      const auto raw = v.block(k);
      if (std::adjacent_find(raw.begin(), raw.end(), std::not_equal_to<>()) == raw.end())
        continue; // constant block
      const auto block = z.block(k);
      double mean = 0.0, sq = 0.0;
      for (double x : block)
        mean += x;
      mean /= static_cast<double>(block.size());
      for (double x : block)
        sq += (x - mean) * (x - mean);
      worst_mean = std::max(worst_mean, std::abs(mean));
      worst_std = std::max(worst_std, std::abs(std::sqrt(sq / static_cast<double>(block.size())) - 1));
    }
  }
  o.require(mismatches == 0, "brute-force counts");
  o.require(worst_mean <= 1e-9 && worst_std <= 1e-9, "block_normalize within 1e-9");
  o.detail << "100 sequences x 8420 coordinates, " << mismatches << " mismatches; |mean| <= "
           << worst_mean << ", |std-1| <= " << worst_std;
}

// ---------------------------------------------------------------------------
// 4. AUC

void auc_criterion(Outcome &o) {
  std::mt19937_64 rng(77);
  double worst = 0.0;
  std::size_t with_ties = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 199;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(rng() % 2);
      s[i] = std::uniform_real_distribution<double>(0.0, 1.0)(rng) + 0.3 * y[i];
      if (trial % 2 == 0)
        s[i] = std::round(s[i] * 8.0) / 8.0;
    }
    y[0] = 1;
    y[1] = 0;
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (y[i] == 1 && y[j] == 0) {
          pairs += 1.0;
          wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    auto sorted = s;
    std::sort(sorted.begin(), sorted.end());
    with_ties += std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
    worst = std::max(worst, std::abs(metrics::roc_auc(s, y) - wins / pairs));
  }
  o.require(worst <= 1e-9, "within 1e-9 of pairwise oracle");
  o.require(with_ties > 0, "instances with ties");
  o.detail << "100 instances (" << with_ties << " with ties), max |diff| " << worst;
}

// ---------------------------------------------------------------------------
// 5. model invariants

double power_iteration(const std::vector<double> &m, std::size_t n) {
  std::vector<double> x(n, 1.0), y(n);
  double lambda = 0.0;
  for (int it = 0; it < 2000; ++it) {
    double norm = 0.0, rq = 0.0, xx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        y[i] += m[i * n + j] * x[j];
      norm += y[i] * y[i];
      rq += x[i] * y[i];
      xx += x[i] * x[i];
    }
    lambda = rq / xx;
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i)
      x[i] = y[i] / norm;
  }
  return lambda;
}

void invariants_criterion(Outcome &o) {
  using model::BridgeDPI;
  using model::Mode;

  // Hyper-node permutation.
  {
    const auto c = bridgedpi::testing::tiny_config(6);
    BridgeDPI<double> net(c);
    bridgedpi::testing::randomise(net, 21);
    const auto batch = make_batch(c, 4, 1);
    const auto before = net.forward(batch.p(), batch.d(), Mode::inference());
    auto &bank = net.parameters().get("hyper_nodes");
    const std::size_t m = bank.dim(0), d = bank.dim(1);
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(8);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto original = bank.values();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < d; ++j)
        bank.values()[i * d + j] = original[perm[i] * d + j];
    const auto after = net.forward(batch.p(), batch.d(), Mode::inference());
    double delta = 0.0;
    for (std::size_t i = 0; i < before.size(); ++i)
      delta = std::max(delta, std::abs(before.at(i) - after.at(i)));
    o.require(delta < 1e-6, "permutation invariance");
    o.detail << "permutation max|dy| " << delta << "; ";
  }

  // Residual identity.
  {
    const auto c = bridgedpi::testing::tiny_config();
    BridgeDPI<double> net(c);
    bridgedpi::testing::randomise(net, 2);
    for (auto &p : net.parameters().params())
      if (p.name.rfind("gnn.", 0) == 0)
        std::fill(p.value.values().begin(), p.value.values().end(), 0.0);
    const auto batch = make_batch(c, 4, 1);
    const auto u = net.embed_protein(batch.p(), Mode::inference());
    const auto v = net.embed_drug(batch.d(), Mode::inference());
    const auto [uh, vh] = net.gnn_forward(net.build_pair_graph(u, v));
    const bool exact = uh.values() == u.values() && vh.values() == v.values();
    o.require(exact, "zero-weight GNN is the identity");
    o.detail << "residual identity " << (exact ? "exact" : "inexact") << "; ";
  }

  // Spectral bound for every m with m + 2 <= 16.
  {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> dist;
    double top = 0.0;
    for (std::size_t m = 1; m + 2 <= 16; ++m) {
      const std::size_t d = 5, b = 3, n = m + 2;
      std::vector<double> uv(b * d), vv(b * d), nv(m * d);
      for (auto *vec : {&uv, &vv, &nv})
        for (auto &x : *vec)
          x = dist(rng);
      const auto g = BridgeDPI<double>::build_pair_graph(T({b, d}, uv), T({b, d}, vv), T({m, d}, nv));
      for (std::size_t s = 0; s < b; ++s) {
        const std::vector<double> L(g.operator_.values().begin() + static_cast<long>(s * n * n),
                                    g.operator_.values().begin() + static_cast<long>((s + 1) * n * n));
        top = std::max(top, power_iteration(L, n));
      }
    }
    o.require(top <= 1.0 + 1e-6, "spectral bound");
    o.detail << "max eigenvalue " << top << "; ";
  }

  // Disabled branch equals zeroed branch.
  {
    struct Case {
      bool model::ModelConfig::*flag;
      std::vector<std::string> zeroed;
    };
    const std::vector<Case> cases{
        {&model::ModelConfig::use_protein_kmer, {"protein.kmer.1.bn.gamma", "protein.kmer.1.bn.beta"}},
        {&model::ModelConfig::use_protein_cnn, {"protein.cnn.kernel", "protein.cnn.bias"}},
        {&model::ModelConfig::use_drug_fp, {"drug.fp.2.bn.gamma", "drug.fp.2.bn.beta"}},
        {&model::ModelConfig::use_drug_cnn, {"drug.cnn.kernel", "drug.cnn.bias"}},
    };
    const auto base = bridgedpi::testing::tiny_config();
    const auto batch = make_batch(base, 5, 1);
    std::size_t equal = 0;
    for (const auto &cs : cases) {
      BridgeDPI<double> full(base);
      bridgedpi::testing::randomise(full, 11);
      for (const auto &name : cs.zeroed) {
        auto &t = full.parameters().get(name);
        std::fill(t.values().begin(), t.values().end(), 0.0);
      }
      auto reduced_cfg = base;
      reduced_cfg.*cs.flag = false;
      BridgeDPI<double> reduced(reduced_cfg);
      bridgedpi::testing::copy_shared(full, reduced);
      equal += full.forward(batch.p(), batch.d(), Mode::inference()).values() ==
               reduced.forward(batch.p(), batch.d(), Mode::inference()).values();
    }
    o.require(equal == cases.size(), "branch toggles exact");
    o.detail << "branch toggles " << equal << "/" << cases.size() << " exact";
  }
}

// ---------------------------------------------------------------------------
// 6-8. end to end through the command-line tool

struct Workspace {
  fs::path dir;
  fs::path config = fs::path(BRIDGEDPI_SOURCE_DIR) / "configs" / "synthetic.conf";
  bool data_ready = false;

  std::string common() const {
    return " --config " + quote(config) + " --data " + quote(dir / "synthetic.tsv");
  }
};

void learnability_criterion(Outcome &o, Workspace &ws) {
  const auto gen = run_cli("make-synthetic --config " + quote(ws.config) + " --out " +
                               quote(ws.dir / "synthetic.tsv"),
                           ws.dir);
  o.require(gen.status == 0, "make-synthetic exit status");
  if (gen.status != 0) {
    o.detail << gen.log;
    return;
  }
  ws.data_ready = true;

  const auto start = std::chrono::steady_clock::now();
  const auto run = run_cli("train" + ws.common() + " --out " + quote(ws.dir / "train"), ws.dir);
  const double elapsed = seconds_since(start);
  o.require(run.status == 0, "train exit status");
  if (run.status != 0) {
    o.detail << run.log;
    return;
  }

  std::size_t n_train = 0, n_valid = 0, n_test = 0;
  {
    std::istringstream in(slurp(ws.dir / "train" / "split.tsv"));
    std::string idx, part, seen;
    while (in >> idx >> part >> seen) {
      n_train += part == "train";
      n_valid += part == "valid";
      n_test += part == "test";
    }
  }
  o.require(n_train == 2000 && n_valid == 500 && n_test == 500, "2000/500/500 split");

  const auto history = csv_rows(slurp(ws.dir / "train" / "history.csv"));
  double best_val = 0.0;
  std::size_t best_epoch = 0;
  for (std::size_t i = 1; i < history.size(); ++i)
    if (std::stod(history[i][2]) > best_val) {
      best_val = std::stod(history[i][2]);
      best_epoch = std::stoul(history[i][0]);
    }
  const std::size_t epochs = history.size() - 1;
  double unseen_auc = 0.0;
  std::string unseen_n = "0";
  for (const auto &row : csv_rows(slurp(ws.dir / "train" / "test_report.csv")))
    if (!row.empty() && row[0] == "unseen" && row[2] != "NA") {
      unseen_auc = std::stod(row[2]);
      unseen_n = row[1];
    }
  o.require(epochs <= 50, "<= 50 epochs");
  o.require(best_val >= 0.95, "validation AUC >= 0.95");
  o.require(unseen_auc >= 0.80, "unseen-protein AUC >= 0.80");
  o.require(elapsed < 300.0, "runtime < 5 min");
  o.detail << "split " << n_train << "/" << n_valid << "/" << n_test << "; best val AUC "
           << best_val << " at epoch " << best_epoch << " of " << epochs << "; unseen AUC "
           << unseen_auc << " (n=" << unseen_n << "); " << elapsed << " s";
}

// The sweep uses a short schedule: the criterion concerns the machinery.
void sweep_criterion(Outcome &o, const Workspace &ws) {
  o.require(ws.data_ready, "synthetic data available");
  if (!ws.data_ready)
    return;
  const std::string schedule = " --set max_epochs=3 --set patience=0";
  const auto sweep = run_cli("sweep" + ws.common() + schedule + " --hyper-nodes=-1,1,8 --out " +
                                 quote(ws.dir / "sweep"),
                             ws.dir);
  o.require(sweep.status == 0, "sweep exit status");
  const auto single = run_cli("train" + ws.common() + schedule + " --set hyper_nodes=-1 --out " +
                                  quote(ws.dir / "bypass"),
                              ws.dir);
  o.require(single.status == 0, "bypass run exit status");
  if (sweep.status != 0 || single.status != 0) {
    o.detail << sweep.log << single.log;
    return;
  }
  const auto rows = csv_rows(slurp(ws.dir / "sweep" / "sweep.csv"));
  const bool shape = rows.size() == 4 && rows[0][0] == "m" && rows[1][0] == "-1" &&
                     rows[2][0] == "1" && rows[3][0] == "8";
  bool all_ok = shape;
  for (std::size_t i = 1; shape && i < rows.size(); ++i)
    all_ok = all_ok && rows[i].back() == "ok";
  o.require(shape, "sweep CSV has rows m = -1, 1, 8");
  o.require(all_ok, "every sweep run succeeded");
  const bool same_model = slurp(ws.dir / "sweep" / "m_-1" / "model.bdpi") ==
                          slurp(ws.dir / "bypass" / "model.bdpi");
  const bool same_history = slurp(ws.dir / "sweep" / "m_-1" / "history.csv") ==
                            slurp(ws.dir / "bypass" / "history.csv");
  o.require(same_model && same_history, "m = -1 bitwise equal to bypass run");
  o.detail << "sweep.csv " << (rows.empty() ? 0 : rows.size() - 1) << " rows";
  for (std::size_t i = 1; shape && i < rows.size(); ++i)
    o.detail << " (m=" << rows[i][0] << " auc " << rows[i][1] << ")";
  o.detail << "; m=-1 vs bypass: checkpoint " << (same_model ? "identical" : "differs")
           << ", history " << (same_history ? "identical" : "differs");
}

void determinism_criterion(Outcome &o, const Workspace &ws) {
  o.require(ws.data_ready, "synthetic data available");
  if (!ws.data_ready)
    return;
  const std::string schedule = " --set max_epochs=3 --set patience=0";
  const auto a = run_cli("train" + ws.common() + schedule + " --out " + quote(ws.dir / "det_a"), ws.dir);
  const auto b = run_cli("train" + ws.common() + schedule + " --out " + quote(ws.dir / "det_b"), ws.dir);
  o.require(a.status == 0 && b.status == 0, "train exit status");
  if (a.status != 0 || b.status != 0) {
    o.detail << a.log << b.log;
    return;
  }
  const bool same_history =
      slurp(ws.dir / "det_a" / "history.csv") == slurp(ws.dir / "det_b" / "history.csv");
  o.require(same_history, "identical history CSVs");

  // Checkpoint round trip: a model trained in memory against its reloaded copy.
  const auto records = data::load_dataset((ws.dir / "synthetic.tsv").string());
  auto cfg = model::ModelConfig{};
  cfg.embed_dim = 16;
  cfg.protein_mlp_widths = {64, 16};
  cfg.drug_mlp_widths = {64, 16};
  cfg.hyper_nodes = 8;
  cfg.token_dim = 8;
  cfg.protein_max_len = 64;
  cfg.smiles_max_len = 32;
  cfg.init_seed = 3;
  const model::Featurizer featurizer(cfg);
  const data::FeatureStore features(featurizer, records);
  const auto split = data::split_seen_unseen(records, {}, 3);
  std::vector<std::size_t> train_idx(split.train.begin(), split.train.begin() + 400);
  train::TrainConfig tc;
  tc.batch_size = 64;
  tc.max_epochs = 2;
  tc.seed = 3;
  model::BridgeDPI<float> net(cfg);
  train::train(net, features, records, train_idx, split.valid, tc);
  const auto before = train::predict(net, features, split.test);
  const auto path = ws.dir / "roundtrip.bdpi";
  data::save_checkpoint(path.string(), data::capture(net, featurizer));
  const auto restored = data::restore<float>(data::load_checkpoint(path.string()));
  const auto after = train::predict(restored, features, split.test);
  std::size_t differing = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const float x = static_cast<float>(before[i]), y = static_cast<float>(after[i]);
    differing += std::memcmp(&x, &y, sizeof x) != 0;
  }
  o.require(before.size() == after.size() && differing == 0, "bitwise float32 predictions");
  o.detail << "history CSVs " << (same_history ? "identical" : "differ") << "; round trip "
           << before.size() - differing << "/" << before.size() << " predictions bitwise equal";
}

} // namespace

int main() {
  Workspace ws;
  ws.dir = bridgedpi::testing::scratch_dir("acceptance");
  struct Criterion {
    int id;
    const char *name;
    std::function<void(Outcome &)> run;
  };
  const std::vector<Criterion> criteria{
      {1, "gradient correctness", gradient_criterion},
      {2, "fingerprint oracle", fingerprint_criterion},
      {3, "k-mer oracle", kmer_criterion},
      {4, "AUC oracle", auc_criterion},
      {5, "model invariants", invariants_criterion},
      {6, "end-to-end learnability", [&](Outcome &o) { learnability_criterion(o, ws); }},
      {7, "ablation machinery", [&](Outcome &o) { sweep_criterion(o, ws); }},
      {8, "determinism and persistence", [&](Outcome &o) { determinism_criterion(o, ws); }},
  };
  int failures = 0;
  for (const auto &c : criteria) {
    Outcome o;
    try {
      c.run(o);
    } catch (const std::exception &e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name
              << "): " << o.detail.str() << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
