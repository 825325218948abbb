#include "scitag/ssl.hpp"

#include <chrono>
#include <iomanip>
#include <ostream>

#include "scitag/util.hpp"

namespace scitag::ssl {

void SslConfig::validate() const {
  require(alpha >= 0.0 && alpha <= 1.0, "ssl: alpha must lie in [0,1]");
  require(eta >= 0.0 && eta <= 1.0, "ssl: eta must lie in [0,1]");
  require(max_rounds >= 0, "ssl: negative round budget");
  if (mode == Mode::Feat) {
    require(setting == Setting::Transductive,
            "ssl: GraphFeat needs graph output at test time and is transductive-only");
  }
}

MatrixXd graph_interp(const Eigen::Ref<const MatrixXd>& marginals,
                      const Eigen::Ref<const MatrixXd>& propagated, double alpha) {
  require(alpha >= 0.0 && alpha <= 1.0, "graph_interp: alpha must lie in [0,1]");
  require(marginals.rows() == propagated.rows() && marginals.cols() == propagated.cols(),
          "graph_interp: shape mismatch");
  return alpha * marginals + (1.0 - alpha) * propagated;
}

MatrixXd graph_feat_emissions(const Eigen::Ref<const MatrixXd>& emissions,
                              const Eigen::Ref<const MatrixXd>& graph_rows,
                              const Eigen::Ref<const MatrixXd>& mix) {
  require(emissions.rows() == graph_rows.rows() && emissions.cols() == graph_rows.cols(),
          "graph_feat_emissions: emission/graph shape mismatch");
  require(mix.rows() == emissions.cols() && mix.cols() == emissions.cols(),
          "graph_feat_emissions: mix matrix shape mismatch");
  return emissions + graph_rows * mix.transpose();
}

crf::TagLattice build_confidence_lattice(const Eigen::Ref<const MatrixXd>& posterior,
                                         double eta) {
  crf::TagLattice lattice;
  lattice.allowed.reserve(static_cast<std::size_t>(posterior.rows()));
  constexpr std::uint16_t kFullMask = (1u << kNumLabels) - 1u;
  for (Eigen::Index t = 0; t < posterior.rows(); ++t) {
    Eigen::Index best = 0;
    posterior.row(t).maxCoeff(&best);  // first maximum: lowest label index
    if (posterior(t, best) > eta) {
      lattice.allowed.push_back(static_cast<std::uint16_t>(1u << best));
    } else {
      lattice.allowed.push_back(kFullMask);
    }
  }
  return lattice;
}

crf::TagLattice relax_to_feasible(crf::TagLattice lattice,
                                  const Eigen::Ref<const MatrixXd>& posterior,
                                  const Eigen::Ref<const MatrixXd>& transitions) {
  if (crf::lattice_feasible(lattice, transitions)) return lattice;
  constexpr std::uint16_t kFullMask = (1u << kNumLabels) - 1u;
  std::vector<std::pair<double, int>> constrained;
  for (int t = 0; t < lattice.size(); ++t) {
    if (lattice.allowed[static_cast<std::size_t>(t)] != kFullMask) {
      constrained.emplace_back(posterior.row(t).maxCoeff(), t);
    }
  }
  std::sort(constrained.begin(), constrained.end());
  for (const auto& [confidence, t] : constrained) {
    lattice.allowed[static_cast<std::size_t>(t)] = kFullMask;
    if (crf::lattice_feasible(lattice, transitions)) break;
  }
  return lattice;
}

void write_round_log(std::ostream& out, const std::vector<RoundEntry>& rounds) {
  out << std::fixed << std::setprecision(6);
  for (const RoundEntry& entry : rounds) {
    out << entry.round << "\t" << entry.objective << "\t" << entry.dev_precision << "\t"
        << entry.dev_recall << "\t" << entry.dev_f1 << "\t" << entry.seconds << "\n";
  }
}

namespace {

std::vector<int> posterior_decode(const MatrixXd& posterior) {
  std::vector<int> path(static_cast<std::size_t>(posterior.rows()));
  for (Eigen::Index t = 0; t < posterior.rows(); ++t) {
    Eigen::Index best = 0;
    posterior.row(t).maxCoeff(&best);
    path[static_cast<std::size_t>(t)] = static_cast<int>(best);
  }
  return path;
}

MatrixXd sentence_q(const SslState& state, int scope_index) {
  const int offset = state.node_offset[static_cast<std::size_t>(scope_index)];
  const int n = state.scope[static_cast<std::size_t>(scope_index)].size();
  return state.graph.q.middleRows(offset, n);
}

eval::MetricReport eval_dev(const encoder::ModelParams& model,
                            const std::vector<corpus::LabeledSentence>& dev,
                            const std::vector<MatrixXd>* dev_rows) {
  std::vector<std::vector<corpus::Span>> gold, pred;
  for (std::size_t s = 0; s < dev.size(); ++s) {
    const MatrixXd* rows = dev_rows ? &(*dev_rows)[s] : nullptr;
    gold.push_back(corpus::iobes_to_spans(dev[s].labels));
    pred.push_back(corpus::iobes_to_spans(encoder::decode(model, dev[s], rows)));
  }
  return eval::span_prf(gold, pred, eval::Subtask::Classification);
}

}  // namespace

SslState build_ssl_state(const SslDataset& data, const encoder::EmbeddingTable& embeddings,
                         const SslConfig& config) {
  SslState state;
  state.scope = data.labeled;
  state.labeled_count = static_cast<int>(data.labeled.size());
  for (const auto& sentence : data.dev) {
    corpus::LabeledSentence text_only = sentence;
    text_only.labels.clear();  // dev gold is for selection, not for the graph
    state.scope.push_back(std::move(text_only));
  }
  for (const auto& sentence : data.unlabeled) state.scope.push_back(sentence);

  state.node_offset.resize(state.scope.size());
  int nodes = 0;
  for (std::size_t s = 0; s < state.scope.size(); ++s) {
    state.node_offset[s] = nodes;
    nodes += state.scope[s].size();
  }

  if (config.mode != Mode::Interp && config.mode != Mode::Feat) return state;

  const MatrixXd raw = graph::node_features(state.scope, embeddings);
  const graph::PcaModel pca = graph::pca_fit(raw, config.pca_dim);
  const MatrixXd projected = graph::pca_project(pca, raw);
  state.graph.topology = graph::build_knn_graph(projected, config.propagation.k, config.threads,
                                                config.propagation.sigma_override);
  state.graph.refs.resize(static_cast<std::size_t>(nodes));
  state.graph.gold.assign(static_cast<std::size_t>(nodes), -1);
  for (std::size_t s = 0; s < state.scope.size(); ++s) {
    for (int t = 0; t < state.scope[s].size(); ++t) {
      const int node = state.node_offset[s] + t;
      state.graph.refs[static_cast<std::size_t>(node)] = {static_cast<int>(s), t};
      if (static_cast<int>(s) < state.labeled_count) {
        state.graph.gold[static_cast<std::size_t>(node)] =
            state.scope[s].labels[static_cast<std::size_t>(t)];
      }
    }
  }
  state.graph.p_tilde = MatrixXd::Zero(nodes, kNumLabels);
  state.graph.q = MatrixXd::Zero(nodes, kNumLabels);
  state.has_graph = true;
  return state;
}

RoundStats self_train_round(encoder::ModelParams& model, SslState& state,
                            const SslDataset& data, const SslConfig& config,
                            std::mt19937_64& rng, std::ostream* log) {
  config.validate();
  RoundStats stats;
  const bool uses_graph = config.mode == Mode::Interp || config.mode == Mode::Feat;

  // (1) CRF marginals for every scope sentence; graph nodes take their rows.
  std::vector<MatrixXd> marginals(state.scope.size());
  for (std::size_t s = 0; s < state.scope.size(); ++s) {
    marginals[s] = crf::token_marginals(encoder::emissions(model, state.scope[s]),
                                        model.transitions);
    if (uses_graph) {
      state.graph.p_tilde.middleRows(state.node_offset[s], state.scope[s].size()) = marginals[s];
    }
  }

  // (2) Label propagation.
  if (uses_graph) {
    require(state.has_graph, "self_train_round: graph scope was not built");
    const graph::PropagationResult prop = graph::propagate(state.graph, config.propagation);
    stats.propagation_converged = prop.converged;
    if (!prop.converged && log) {
      *log << "warning: label propagation stopped after " << config.propagation.max_iters
           << " sweeps without reaching tolerance; continuing with the last iterate\n";
    }
  }

  // (3)+(4) Posterior estimates and per-sentence target lattices.
  std::vector<encoder::TrainItem> items;
  items.reserve(state.scope.size());
  for (int s = 0; s < static_cast<int>(state.scope.size()); ++s) {
    const auto us = static_cast<std::size_t>(s);
    const corpus::LabeledSentence& sentence = state.scope[us];
    if (sentence.size() == 0) continue;
    encoder::TrainItem item;
    item.sentence = &sentence;
    if (config.mode == Mode::Feat) item.graph_rows = sentence_q(state, s);
    if (s < state.labeled_count) {
      item.lattice = crf::TagLattice::singletons(sentence.labels);
      item.weight = 1.0;
    } else {
      MatrixXd posterior;
      switch (config.mode) {
        case Mode::Interp:
          posterior = graph_interp(marginals[us], sentence_q(state, s), config.alpha);
          break;
        case Mode::Feat: {
          const MatrixXd fused = graph_feat_emissions(
              encoder::emissions(model, sentence), *item.graph_rows, model.graph_mix);
          posterior = crf::token_marginals(fused, model.transitions);
          break;
        }
        case Mode::HardSelfTrain:
        case Mode::UlmOnly:
          posterior = marginals[us];
          break;
      }
      if (config.mode == Mode::HardSelfTrain) {
        item.lattice = relax_to_feasible(crf::TagLattice::singletons(posterior_decode(posterior)),
                                         posterior, model.transitions);
      } else {
        const MatrixXd& gate = config.gate_on_crf_marginal ? marginals[us] : posterior;
        item.lattice =
            relax_to_feasible(build_confidence_lattice(gate, config.eta), gate, model.transitions);
      }
      item.weight = config.pseudo_weight;
    }
    items.push_back(std::move(item));
  }

  // (5) Warm-started retrain under the lattice likelihood objective.
  std::vector<MatrixXd> dev_rows_storage;
  std::vector<const MatrixXd*> dev_rows;
  if (config.mode == Mode::Feat) {
    for (std::size_t i = 0; i < data.dev.size(); ++i) {
      dev_rows_storage.push_back(sentence_q(state, state.labeled_count + static_cast<int>(i)));
    }
    for (const MatrixXd& rows : dev_rows_storage) dev_rows.push_back(&rows);
  }
  encoder::TrainResult result =
      encoder::train_objective(items, data.dev, std::move(model), config.retrain, rng,
                               dev_rows.empty() ? nullptr : &dev_rows);
  model = std::move(result.params);
  stats.objective = result.final_mean_log_likelihood;
  stats.dev = eval_dev(model, data.dev, dev_rows_storage.empty() ? nullptr : &dev_rows_storage);
  return stats;
}

SslResult ssl_train(const SslDataset& data, encoder::ModelParams model, const SslConfig& config,
                    std::mt19937_64& rng, std::ostream* log) {
  config.validate();
  if (data.dev.empty() && data.unlabeled.empty() && log) {
    *log << "warning: no unlabeled text in scope; rounds degenerate to supervised retraining\n";
  }

  SslResult result;
  result.state = build_ssl_state(data, model.word_table, config);

  auto elapsed = [](auto start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  // Round 0 is the incoming supervised model.
  const auto start0 = std::chrono::steady_clock::now();
  double objective0 = 0.0;
  if (!data.labeled.empty()) {
    for (const auto& sentence : data.labeled) {
      objective0 += crf::sequence_log_likelihood(encoder::emissions(model, sentence),
                                                 model.transitions, sentence.labels);
    }
    objective0 /= static_cast<double>(data.labeled.size());
  }
  const eval::MetricReport dev0 = [&] {
    std::vector<std::vector<corpus::Span>> gold, pred;
    for (const auto& sentence : data.dev) {
      gold.push_back(corpus::iobes_to_spans(sentence.labels));
      pred.push_back(corpus::iobes_to_spans(encoder::decode(model, sentence)));
    }
    return eval::span_prf(gold, pred, eval::Subtask::Classification);
  }();
  result.rounds.push_back({0, objective0, dev0.overall.precision, dev0.overall.recall,
                           dev0.overall.f1, elapsed(start0)});

  result.model = model;
  result.best_round = 0;
  double best_f1 = dev0.overall.f1;
  MatrixXd best_p_tilde = result.state.graph.p_tilde;
  MatrixXd best_q = result.state.graph.q;

  for (int round = 1; round <= config.max_rounds; ++round) {
    const auto start = std::chrono::steady_clock::now();
    const RoundStats stats = self_train_round(model, result.state, data, config, rng, log);
    result.rounds.push_back({round, stats.objective, stats.dev.overall.precision,
                             stats.dev.overall.recall, stats.dev.overall.f1, elapsed(start)});
    if (stats.dev.overall.f1 > best_f1) {
      best_f1 = stats.dev.overall.f1;
      result.best_round = round;
      result.model = model;
      best_p_tilde = result.state.graph.p_tilde;
      best_q = result.state.graph.q;
    }
    if (log) {
      *log << "round " << round << " objective " << stats.objective << " dev-f1 "
           << stats.dev.overall.f1 << "\n";
    }
  }
  result.state.graph.p_tilde = std::move(best_p_tilde);
  result.state.graph.q = std::move(best_q);
  return result;
}

}  // namespace scitag::ssl
