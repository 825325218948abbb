#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <random>
#include <vector>

#include "scitag/corpus.hpp"
#include "scitag/crf.hpp"
#include "scitag/encoder.hpp"
#include "scitag/eval.hpp"
#include "scitag/graph.hpp"

namespace scitag::ssl {

using Eigen::MatrixXd;

enum class Mode { Interp, Feat, HardSelfTrain, UlmOnly };
enum class Setting { Inductive, Transductive };

struct SslConfig {
  Mode mode = Mode::Interp;
  Setting setting = Setting::Inductive;
  double alpha = 0.3;
  double eta = 0.4;
  int max_rounds = 5;
  double pseudo_weight = 1.0;
  // When set, the confidence gate reads the raw CRF marginal instead of the
  // fused posterior.
  bool gate_on_crf_marginal = false;
  int pca_dim = 100;
  int threads = 1;  // k-NN construction workers; results are order-independent
  graph::PropagationConfig propagation;
  encoder::TrainConfig retrain;

  void validate() const;  // Feat requires Transductive
};

// p_hat = alpha * p + (1 - alpha) * q, rowwise.
MatrixXd graph_interp(const Eigen::Ref<const MatrixXd>& marginals,
                      const Eigen::Ref<const MatrixXd>& propagated, double alpha);

// P~ = P + Q M^T: each emission row gains M applied to the graph row.
MatrixXd graph_feat_emissions(const Eigen::Ref<const MatrixXd>& emissions,
                              const Eigen::Ref<const MatrixXd>& graph_rows,
                              const Eigen::Ref<const MatrixXd>& mix);

// Position t allows only the posterior-decode label when its probability
// exceeds eta, and every label otherwise. Ties go to the lower label index.
crf::TagLattice build_confidence_lattice(const Eigen::Ref<const MatrixXd>& posterior, double eta);

// Reopens the least-confident constrained positions of a lattice until some
// path through it survives the structural transition constraints.
crf::TagLattice relax_to_feasible(crf::TagLattice lattice,
                                  const Eigen::Ref<const MatrixXd>& posterior,
                                  const Eigen::Ref<const MatrixXd>& transitions);

struct RoundEntry {
  int round = 0;
  double objective = 0.0;
  double dev_precision = 0.0;
  double dev_recall = 0.0;
  double dev_f1 = 0.0;
  double seconds = 0.0;
};

void write_round_log(std::ostream& out, const std::vector<RoundEntry>& rounds);

struct SslDataset {
  std::vector<corpus::LabeledSentence> labeled;
  std::vector<corpus::LabeledSentence> dev;        // gold, used for selection
  std::vector<corpus::LabeledSentence> unlabeled;  // additional unlabeled text
};

// Graph scope and per-round state. The scope is the labeled corpus followed
// by dev text (as unlabeled) and the extra unlabeled corpus; node k of the
// graph maps to (scope sentence, position) through node offsets.
struct SslState {
  std::vector<corpus::LabeledSentence> scope;
  int labeled_count = 0;
  std::vector<int> node_offset;
  graph::PropagationGraph graph;
  bool has_graph = false;
};

SslState build_ssl_state(const SslDataset& data, const encoder::EmbeddingTable& embeddings,
                         const SslConfig& config);

struct RoundStats {
  double objective = 0.0;
  eval::MetricReport dev;
  bool propagation_converged = true;
};

// One self-training round: marginals, propagation, posterior fusion,
// confidence lattices, and a warm-started retrain of the model in place.
RoundStats self_train_round(encoder::ModelParams& model, SslState& state,
                            const SslDataset& data, const SslConfig& config,
                            std::mt19937_64& rng, std::ostream* log = nullptr);

struct SslResult {
  encoder::ModelParams model;
  std::vector<RoundEntry> rounds;
  int best_round = 0;
  SslState state;  // graph distributions as of the selected round
};

SslResult ssl_train(const SslDataset& data, encoder::ModelParams model, const SslConfig& config,
                    std::mt19937_64& rng, std::ostream* log = nullptr);

}  // namespace scitag::ssl
