// Acceptance suite: one pass/fail line per criterion. Exit code is the
// number of failed criteria. `--smoke` additionally runs the non-gating
// semi-supervised improvement benchmark on a synthetic corpus.

#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <set>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <vector>

#include "helpers.hpp"
#include "oracles.hpp"
#include "scitag/corpus.hpp"
#include "scitag/crf.hpp"
#include "scitag/encoder.hpp"
#include "scitag/eval.hpp"
#include "scitag/graph.hpp"
#include "scitag/ssl.hpp"

using namespace scitag;
using Eigen::MatrixXd;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  void fail(const std::string& why) {
    pass = false;
    if (!detail.empty()) detail += "; ";
    detail += why;
  }
};

// --- C1: inference against exhaustive enumeration ---------------------------

Outcome inference_oracle_suite() {
  Outcome outcome;
  std::mt19937_64 rng(20240901);
  int checked = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 6);
    const MatrixXd emissions = helpers::random_emissions(n, rng, 2.5);
    const MatrixXd transitions = helpers::random_structural_transitions(rng);

    const double log_z = crf::log_partition(emissions, transitions);
    const double enum_log_z = oracles::enum_log_mass(emissions, transitions);
    worst = std::max(worst, oracles::relative_error(log_z, enum_log_z));

    const MatrixXd marginals = crf::token_marginals(emissions, transitions);
    const MatrixXd enum_marg = oracles::enum_marginals(emissions, transitions);
    for (int t = 0; t < n; ++t)
      for (int y = 0; y < kNumLabels; ++y)
        worst = std::max(worst, std::abs(marginals(t, y) - enum_marg(t, y)) /
                                    std::max({marginals(t, y), enum_marg(t, y), 1e-12}));

    const auto [path, score] = crf::viterbi(emissions, transitions);
    const auto [enum_path, enum_score] = oracles::enum_viterbi(emissions, transitions);
    if (path != enum_path) outcome.fail("viterbi path mismatch at trial " + std::to_string(trial));
    worst = std::max(worst, oracles::relative_error(score, enum_score));

    const crf::TagLattice lattice = helpers::random_lattice(n, rng);
    const double lattice_ll = crf::lattice_log_likelihood(emissions, transitions, lattice);
    const double enum_ll =
        oracles::enum_log_mass(emissions, transitions, &lattice) - enum_log_z;
    worst = std::max(worst, oracles::relative_error(lattice_ll, enum_ll));
    ++checked;
  }
  std::ostringstream detail;
  detail << checked << " instances, worst rel err " << std::scientific << std::setprecision(2)
         << worst;
  if (worst >= 1e-10) outcome.fail("tolerance 1e-10 exceeded");
  outcome.detail = detail.str() + (outcome.pass ? "" : "; " + outcome.detail);
  return outcome;
}

// --- C2: full-network gradients against central finite differences ----------

Outcome gradient_suite() {
  Outcome outcome;
  std::mt19937_64 rng(7101);
  std::vector<corpus::LabeledSentence> sentences = {
      helpers::make_sentence({"we", "use", "crfs"}, {"PRP", "VBP", "NNS"},
                             {"O", "O", "S-Process"}),
      helpers::make_sentence({"deep", "parsing", "helps"}, {"JJ", "NN", "VBZ"},
                             {"O", "S-Task", "O"}),
  };
  encoder::ModelParams params =
      helpers::make_model({&sentences}, encoder::Dims{}, rng);  // paper-scale dimensions

  MatrixXd q(3, kNumLabels);
  std::uniform_real_distribution<double> uniform(0.02, 1.0);
  for (int t = 0; t < 3; ++t) {
    for (int y = 0; y < kNumLabels; ++y) q(t, y) = uniform(rng);
    q.row(t) /= q.row(t).sum();
  }
  crf::TagLattice mixed = crf::TagLattice::full(3);
  mixed.allowed[0] = static_cast<std::uint16_t>(1u << sentences[1].labels[0]);

  // two objectives: supervised sequence likelihood, and the constrained
  // lattice likelihood with graph rows feeding the M mixing matrix
  std::vector<encoder::TrainItem> sequence_items = {
      {&sentences[0], crf::TagLattice::singletons(sentences[0].labels), 1.0, std::nullopt},
      {&sentences[1], crf::TagLattice::singletons(sentences[1].labels), 1.0, std::nullopt},
  };
  std::vector<encoder::TrainItem> lattice_items = {
      {&sentences[0], crf::TagLattice::full(3), 1.0, std::nullopt},
      {&sentences[1], mixed, 1.0, q},
  };

  double worst = 0.0;
  auto check_items = [&](const std::vector<encoder::TrainItem>& items, bool expect_mix,
                         const std::string& tag) {
    auto loss = [&](const encoder::ModelParams& p) {
      double total = 0.0;
      for (const auto& item : items) total += encoder::item_log_likelihood(p, item);
      return total;
    };
    encoder::ModelGrads grads = encoder::ModelGrads::zeros_like(params);
    for (const auto& item : items) encoder::item_loss_and_grads(params, item, grads);

    std::map<std::string, MatrixXd*> grad_blocks;
    grads.for_each_block(
        [&](const std::string& name, MatrixXd& block) { grad_blocks.emplace(name, &block); });

    params.for_each_block([&](const std::string& name, MatrixXd& block) {
      if (name == "word_table") return;
      if (name == "graph_mix" && !expect_mix) return;
      const MatrixXd& analytic = *grad_blocks.at(name);
      const Eigen::Index size = block.size();
      const Eigen::Index samples = std::min<Eigen::Index>(size, 12);
      const Eigen::Index stride = std::max<Eigen::Index>(1, size / samples);
      for (Eigen::Index flat = 0; flat < size; flat += stride) {
        const Eigen::Index r = flat % block.rows();
        const Eigen::Index c = flat / block.rows();
        if (name == "transitions" && block(r, c) <= kNegInfCutoff) continue;
        const double fd = oracles::finite_difference(params, block, r, c, loss, 1e-5);
        const double err = oracles::fd_error(analytic(r, c), fd);
        if (err > worst) worst = err;
        if (err >= 1e-4) {
          outcome.fail(tag + " block " + name + " (" + std::to_string(r) + "," +
                       std::to_string(c) + ") rel err " + std::to_string(err));
        }
      }
    });
  };
  check_items(sequence_items, false, "sequence");
  check_items(lattice_items, true, "lattice");
  std::ostringstream detail;
  detail << "worst rel err " << std::scientific << std::setprecision(2) << worst;
  outcome.detail = detail.str() + (outcome.pass ? "" : "; " + outcome.detail);
  return outcome;
}

// --- C3: ULM reduction identities -------------------------------------------

Outcome ulm_reduction_identities() {
  Outcome outcome;
  std::mt19937_64 rng(333);
  double worst_singleton = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 6);
    const MatrixXd emissions = helpers::random_emissions(n, rng);
    const MatrixXd transitions = helpers::random_structural_transitions(rng);

    const double full = crf::lattice_log_likelihood(emissions, transitions,
                                                    crf::TagLattice::full(n));
    if (full != 0.0) outcome.fail("full lattice gave " + std::to_string(full) + ", not 0");

    const std::vector<int> path = crf::viterbi(emissions, transitions).first;
    const double singleton = crf::lattice_log_likelihood(
        emissions, transitions, crf::TagLattice::singletons(path));
    const double sequence = crf::sequence_log_likelihood(emissions, transitions, path);
    worst_singleton = std::max(worst_singleton, std::abs(singleton - sequence));
  }
  if (worst_singleton >= 1e-12)
    outcome.fail("singleton vs sequence diff " + std::to_string(worst_singleton));
  std::ostringstream detail;
  detail << "full lattice exactly 0; singleton diff " << std::scientific
         << std::setprecision(2) << worst_singleton;
  outcome.detail = detail.str() + (outcome.pass ? "" : "; " + outcome.detail);
  return outcome;
}

// --- C4: propagation behavior ------------------------------------------------

graph::PropagationGraph random_small_graph(std::mt19937_64& rng) {
  const int n = 3 + static_cast<int>(rng() % 10);
  graph::PropagationGraph g;
  g.refs.resize(static_cast<std::size_t>(n));
  g.gold.assign(static_cast<std::size_t>(n), -1);
  std::uniform_real_distribution<double> uniform(0.02, 1.0);
  g.p_tilde.resize(n, kNumLabels);
  for (int u = 0; u < n; ++u) {
    for (int y = 0; y < kNumLabels; ++y) g.p_tilde(u, y) = uniform(rng);
    g.p_tilde.row(u) /= g.p_tilde.row(u).sum();
    if (rng() % 3 == 0) g.gold[static_cast<std::size_t>(u)] = static_cast<int>(rng() % kNumLabels);
  }
  for (int u = 0; u + 1 < n; ++u)
    if (rng() % 4 != 0) g.topology.edges.push_back({u, u + 1, 1.0});
  if (rng() % 2 == 0 && n > 3) g.topology.edges.push_back({0, n - 1, 1.0});
  g.topology.sigma = 1.0;
  g.topology.rebuild_neighbors(n);
  return g;
}

Outcome propagation_suite() {
  Outcome outcome;
  std::mt19937_64 rng(440);

  // monotone objective on 50 random graphs
  int violations = 0;
  for (int trial = 0; trial < 50; ++trial) {
    graph::PropagationGraph g = random_small_graph(rng);
    graph::PropagationConfig config;
    config.mu = trial % 2 == 0 ? 0.3 : 1e-4;
    config.nu = 0.05;
    config.max_iters = 50;
    config.tol = 1e-12;
    const auto result = graph::propagate(g, config);
    for (std::size_t i = 1; i < result.objective.size(); ++i)
      if (result.objective[i] > result.objective[i - 1] + 1e-12) ++violations;
  }
  if (violations > 0)
    outcome.fail(std::to_string(violations) + " objective increases observed");

  // 3-node hand graph against a dense simplex minimizer
  {
    std::mt19937_64 seed_rng(441);
    graph::PropagationGraph g;
    g.refs.resize(3);
    g.gold = {2, -1, -1};
    std::uniform_real_distribution<double> uniform(0.05, 1.0);
    g.p_tilde.resize(3, kNumLabels);
    for (int u = 0; u < 3; ++u) {
      for (int y = 0; y < kNumLabels; ++y) g.p_tilde(u, y) = uniform(seed_rng);
      g.p_tilde.row(u) /= g.p_tilde.row(u).sum();
    }
    g.topology.edges = {{0, 1, 1.0}, {1, 2, 1.0}};
    g.topology.sigma = 1.0;
    g.topology.rebuild_neighbors(3);

    graph::PropagationConfig config;
    config.mu = 1.0;
    config.nu = 1.0;
    config.max_iters = 4000;
    config.tol = 1e-14;
    graph::PropagationGraph run = g;
    const auto result = graph::propagate(run, config);

    auto objective = [&](const MatrixXd& q) {
      return graph::propagation_objective(run, q, config.mu, config.nu);
    };
    auto gradient = [&](const MatrixXd& q) {
      MatrixXd grad = MatrixXd::Zero(3, kNumLabels);
      const double h = 1e-7;
      MatrixXd probe = q;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < kNumLabels; ++c) {
          probe(r, c) = q(r, c) + h;
          const double up = objective(probe);
          probe(r, c) = q(r, c) - h;
          const double down = objective(probe);
          probe(r, c) = q(r, c);
          grad(r, c) = (up - down) / (2 * h);
        }
      return grad;
    };
    MatrixXd start(3, kNumLabels);
    start.setConstant(1.0 / kNumLabels);
    const MatrixXd reference = oracles::pgd_minimize(objective, gradient, start, 20000, 0.05);
    const double gap = std::abs(result.objective.back() - objective(reference));
    if (gap >= 1e-4) outcome.fail("3-node objective gap " + std::to_string(gap));
    outcome.detail = "3-node gap " + std::to_string(gap);
  }

  // isolated-node closed forms
  {
    std::mt19937_64 iso_rng(442);
    std::uniform_real_distribution<double> uniform(0.05, 1.0);
    graph::PropagationGraph g;
    g.refs.resize(1);
    g.gold = {-1};
    g.p_tilde.resize(1, kNumLabels);
    for (int y = 0; y < kNumLabels; ++y) g.p_tilde(0, y) = uniform(iso_rng);
    g.p_tilde.row(0) /= g.p_tilde.row(0).sum();
    g.topology.sigma = 1.0;
    g.topology.rebuild_neighbors(1);
    graph::PropagationConfig config;
    config.mu = 0.5;
    config.nu = 1e-5;
    config.max_iters = 200;
    graph::PropagationGraph unlabeled_node = g;
    graph::propagate(unlabeled_node, config);
    const double tv_prior =
        0.5 * (unlabeled_node.q.row(0) - unlabeled_node.p_tilde.row(0)).lpNorm<1>();
    if (tv_prior >= 1e-6) outcome.fail("isolated unlabeled TV " + std::to_string(tv_prior));

    graph::PropagationGraph labeled_node = g;
    labeled_node.gold = {4};
    config.mu = 0.0;
    config.nu = 0.0;
    config.tol = 1e-15;
    graph::propagate(labeled_node, config);
    Eigen::RowVectorXd point = Eigen::RowVectorXd::Zero(kNumLabels);
    point[4] = 1.0;
    const double tv_point = 0.5 * (labeled_node.q.row(0) - point).lpNorm<1>();
    if (tv_point >= 1e-6) outcome.fail("isolated labeled TV " + std::to_string(tv_point));
  }
  return outcome;
}

// --- C5: exact k-NN against brute force --------------------------------------

Outcome knn_oracle() {
  Outcome outcome;
  std::mt19937_64 rng(550);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd points(50, 100);
  for (int r = 0; r < 50; ++r)
    for (int c = 0; c < 100; ++c) points(r, c) = normal(rng);
  for (int k : {1, 5, 10}) {
    const graph::KnnGraph built = graph::build_knn_graph(points, k);
    const auto brute = oracles::brute_force_knn(points, k);
    std::set<std::pair<int, int>> expected, actual;
    for (int u = 0; u < 50; ++u)
      for (int v : brute[static_cast<std::size_t>(u)])
        expected.insert({std::min(u, v), std::max(u, v)});
    for (const auto& edge : built.edges) actual.insert({edge.u, edge.v});
    if (expected != actual) outcome.fail("edge mismatch at k=" + std::to_string(k));
  }
  outcome.detail = "k in {1,5,10} on 50 points, exact edge match";
  return outcome;
}

// --- C6: deterministic overfit on the synthetic corpus -----------------------

Outcome overfit_check() {
  Outcome outcome;
  const auto corpus = helpers::toy_corpus();

  auto train_once = [&]() {
    std::mt19937_64 rng(88);
    encoder::ModelParams model = helpers::make_model({&corpus}, encoder::Dims{}, rng);
    encoder::TrainConfig config;
    config.max_epochs = 200;
    config.patience = 0;  // the criterion allows the full epoch budget
    return encoder::train_supervised(corpus, corpus, std::move(model), config, rng);
  };
  const encoder::TrainResult first = train_once();
  if (first.best_dev_f1 != 1.0) {
    outcome.fail("training F1 " + std::to_string(first.best_dev_f1) + " after " +
                 std::to_string(first.history.size() - 1) + " epochs");
  }
  const encoder::TrainResult second = train_once();
  bool identical = first.best_epoch == second.best_epoch;
  first.params.for_each_block([&](const std::string& name, const MatrixXd& block) {
    second.params.for_each_block([&](const std::string& other, const MatrixXd& reference) {
      if (name == other && (block - reference).norm() != 0.0) identical = false;
    });
  });
  if (!identical) outcome.fail("rerun with the same seed diverged");
  const std::string summary =
      "F1 1.0 first reached at epoch " + std::to_string(first.best_epoch) + ", reruns identical";
  outcome.detail = summary + (outcome.pass ? "" : "; " + outcome.detail);
  return outcome;
}

// --- C7: SSL reduction chain --------------------------------------------------

Outcome ssl_reduction_chain() {
  Outcome outcome;
  const auto corpus = helpers::toy_corpus();
  std::mt19937_64 rng(777);
  encoder::ModelParams model = helpers::make_model({&corpus}, encoder::Dims{}, rng);
  model.graph_mix.setZero();

  double worst = 0.0;
  for (int s = 0; s < 3; ++s) {
    const auto& sentence = corpus[static_cast<std::size_t>(s)];
    MatrixXd q(sentence.size(), kNumLabels);
    std::uniform_real_distribution<double> uniform(0.02, 1.0);
    for (int t = 0; t < sentence.size(); ++t) {
      for (int y = 0; y < kNumLabels; ++y) q(t, y) = uniform(rng);
      q.row(t) /= q.row(t).sum();
    }
    const MatrixXd plain = encoder::emissions(model, sentence);
    const MatrixXd plain_marginals = crf::token_marginals(plain, model.transitions);
    const MatrixXd feat_marginals = crf::token_marginals(
        ssl::graph_feat_emissions(plain, q, model.graph_mix), model.transitions);
    const MatrixXd interp = ssl::graph_interp(plain_marginals, q, 1.0);
    worst = std::max(worst, (feat_marginals - plain_marginals).cwiseAbs().maxCoeff());
    worst = std::max(worst, (interp - plain_marginals).cwiseAbs().maxCoeff());
  }
  if (worst >= 1e-12) outcome.fail("marginal deviation " + std::to_string(worst));
  std::ostringstream detail;
  detail << "max deviation " << std::scientific << std::setprecision(2) << worst;
  outcome.detail = detail.str() + (outcome.pass ? "" : "; " + outcome.detail);
  return outcome;
}

// --- C8: scorer hand counts and ordering invariant ----------------------------

Outcome scorer_check() {
  Outcome outcome;
  using corpus::Span;
  const std::vector<std::vector<Span>> gold = {
      {{0, 1, Category::Task}, {4, 5, Category::Process}}};
  const std::vector<std::vector<Span>> pred = {
      {{0, 1, Category::Task}, {2, 2, Category::Process}, {7, 8, Category::Material}}};
  const eval::MetricReport report = eval::span_prf(gold, pred, eval::Subtask::Classification);
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.3f %.3f %.3f", report.overall.precision,
                report.overall.recall, report.overall.f1);
  if (std::string(buffer) != "0.333 0.500 0.400")
    outcome.fail(std::string("hand-counted case gave ") + buffer);

  std::mt19937_64 rng(880);
  std::uniform_int_distribution<int> label(0, kNumLabels - 1);
  int violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<int>> gold_labels, pred_labels;
    for (int s = 0; s < 4; ++s) {
      const int n = 2 + static_cast<int>(rng() % 8);
      std::vector<Span> spans;
      int cursor = 0;
      while (cursor < n) {
        if (rng() % 2 == 0) {
          const int last = std::min(n - 1, cursor + static_cast<int>(rng() % 3));
          spans.push_back({cursor, last, static_cast<Category>(rng() % 3)});
          cursor = last + 2;
        } else {
          ++cursor;
        }
      }
      gold_labels.push_back(corpus::spans_to_iobes(static_cast<std::size_t>(n), spans));
      auto corrupted = gold_labels.back();
      for (auto& l : corrupted)
        if (rng() % 3 == 0) l = label(rng);
      pred_labels.push_back(corrupted);
    }
    std::vector<std::vector<Span>> gold_spans, pred_spans;
    for (std::size_t s = 0; s < gold_labels.size(); ++s) {
      gold_spans.push_back(corpus::iobes_to_spans(gold_labels[s]));
      pred_spans.push_back(corpus::iobes_to_spans(pred_labels[s]));
    }
    const double ident =
        eval::span_prf(gold_spans, pred_spans, eval::Subtask::Identification).overall.f1;
    const double cls =
        eval::span_prf(gold_spans, pred_spans, eval::Subtask::Classification).overall.f1;
    if (ident < cls - 1e-12) ++violations;
  }
  if (violations > 0)
    outcome.fail(std::to_string(violations) + " identification<classification violations");
  outcome.detail = "hand counts exact at 3 decimals; 100 corruption trials ordered";
  return outcome;
}

// --- C9: paper-number statement and optional smoke benchmark -------------------

Outcome paper_number_statement(bool smoke) {
  Outcome outcome;
  outcome.detail =
      "reported corpus-scale F1 values (supervised 40.2 / semi 45.3 / transductive 46.6 and "
      "ablations) depend on large pretraining corpora and an external tokenizer/POS pipeline; "
      "they are reported-only here and replaced by the property suites above";
  if (!smoke) return outcome;

  // Non-gating smoke: on a synthetic corpus with random embeddings, the
  // semi-supervised rounds should beat the supervised round 0 on at least one
  // of three seeds. Noun pairs carry a fixed category; "we study X Y ." and
  // "we apply X Y ." reveal it through context, "we analyze X Y today ." does
  // not. Dev pairs never occur in the labeled data, only in unlabeled text.
  struct Pair {
    const char *first, *second;
    bool task;
  };
  const std::vector<Pair> train_pairs = {
      {"entity", "recognition", true}, {"relation", "extraction", true},
      {"image", "segmentation", false}, {"speech", "synthesis", false},
      {"machine", "translation", true}, {"beam", "search", false}};
  const std::vector<Pair> dev_pairs = {
      {"graph", "matching", true}, {"pose", "estimation", true},
      {"text", "parsing", false},  {"scene", "labeling", false},
      {"topic", "modeling", true}, {"data", "mining", false}};
  auto revealing = [](const Pair& pair, bool labeled, int index) {
    const std::string cat = pair.task ? "Task" : "Process";
    std::vector<std::string> labels;
    if (labeled) labels = {"O", "O", "B-" + cat, "E-" + cat, "O"};
    return helpers::make_sentence({"we", pair.task ? "study" : "apply", pair.first, pair.second,
                                   "."},
                                  {"PRP", "VBP", "NN", "NN", "."}, labels, "synth", index);
  };
  auto ambiguous = [](const Pair& pair, bool labeled, int index) {
    const std::string cat = pair.task ? "Task" : "Process";
    std::vector<std::string> labels;
    if (labeled) labels = {"O", "O", "B-" + cat, "E-" + cat, "O", "O"};
    return helpers::make_sentence({"we", "analyze", pair.first, pair.second, "today", "."},
                                  {"PRP", "VBP", "NN", "NN", "RB", "."}, labels, "synth", index);
  };
  ssl::SslDataset data;
  int index = 0;
  for (const Pair& pair : train_pairs) {
    data.labeled.push_back(revealing(pair, true, index++));
    data.labeled.push_back(ambiguous(pair, true, index++));
  }
  for (const Pair& pair : dev_pairs) data.dev.push_back(ambiguous(pair, true, index++));
  for (const Pair& pair : dev_pairs) {
    data.unlabeled.push_back(revealing(pair, false, index++));
    data.unlabeled.push_back(revealing(pair, false, index++));
  }

  int improved = 0;
  std::string curve;
  for (unsigned seed : {11u, 12u, 13u}) {
    std::mt19937_64 rng(seed);
    encoder::ModelParams model =
        helpers::make_model({&data.labeled, &data.dev, &data.unlabeled}, helpers::tiny_dims(),
                            rng);
    encoder::TrainConfig round0;
    round0.max_epochs = 25;
    round0.patience = 0;
    const encoder::TrainResult supervised =
        encoder::train_supervised(data.labeled, data.dev, std::move(model), round0, rng);

    ssl::SslConfig config;
    config.mode = ssl::Mode::Interp;
    config.pca_dim = 8;
    config.propagation.k = 5;
    // desk-scale propagation weights: the neighbor term must carry signal
    config.propagation.mu = 0.05;
    config.propagation.nu = 0.01;
    config.max_rounds = 2;
    config.retrain = round0;
    const ssl::SslResult result = ssl::ssl_train(data, supervised.params, config, rng);
    const double round0_f1 = result.rounds[0].dev_f1;
    double best = round0_f1;
    for (const auto& entry : result.rounds) best = std::max(best, entry.dev_f1);
    char step[64];
    std::snprintf(step, sizeof(step), " seed%u %.2f->%.2f", seed, round0_f1, best);
    curve += step;
    if (best > round0_f1) ++improved;
  }
  outcome.detail += "; smoke (non-gating): " + std::to_string(improved) +
                    "/3 seeds improved over round 0," + curve;
  return outcome;
}

}  // namespace

int main(int argc, char** argv) {
  const bool smoke = argc > 1 && std::string(argv[1]) == "--smoke";
  struct Criterion {
    std::string name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"C1 inference oracle suite", inference_oracle_suite},
      {"C2 gradient suite", gradient_suite},
      {"C3 ULM reduction identities", ulm_reduction_identities},
      {"C4 propagation suite", propagation_suite},
      {"C5 k-NN oracle", knn_oracle},
      {"C6 overfit check", overfit_check},
      {"C7 SSL reduction chain", ssl_reduction_chain},
      {"C8 scorer check", scorer_check},
      {"C9 paper-number statement", [smoke] { return paper_number_statement(smoke); }},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criterion.run();
    } catch (const std::exception& error) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + error.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    // C1 < 60 s, C2 < 120 s are part of the criteria
    if (criterion.name.rfind("C1", 0) == 0 && seconds >= 60.0) {
      outcome.pass = false;
      outcome.detail += "; over the 60 s budget";
    }
    if (criterion.name.rfind("C2", 0) == 0 && seconds >= 120.0) {
      outcome.pass = false;
      outcome.detail += "; over the 120 s budget";
    }
    std::cout << (outcome.pass ? "[PASS] " : "[FAIL] ") << criterion.name << " ("
              << std::fixed << std::setprecision(1) << seconds << "s)"
              << (outcome.detail.empty() ? "" : ": " + outcome.detail) << "\n";
    if (!outcome.pass) ++failures;
  }
  std::cout << (failures == 0 ? "ACCEPTANCE: all criteria passed"
                              : "ACCEPTANCE: " + std::to_string(failures) + " criteria failed")
            << "\n";
  return failures;
}
