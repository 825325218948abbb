#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "scitag/corpus.hpp"
#include "scitag/crf.hpp"

namespace scitag::encoder {

using Eigen::MatrixXd;

// Word vectors with reserved <UNK>/<BOS>/<EOS> rows. Out-of-vocabulary
// lookups return the UNK row.
struct EmbeddingTable {
  std::vector<std::string> words;
  std::unordered_map<std::string, int> index;
  MatrixXd vectors;  // |V| x dim
  int unk = -1, bos = -1, eos = -1;

  int dim() const { return static_cast<int>(vectors.cols()); }
  int rows() const { return static_cast<int>(vectors.rows()); }
  int lookup(std::string_view surface) const;

  // Word2vec text format: header `vocab_size dim`, then one word per line.
  // The dimension must be 250; missing specials are appended (UNK = mean of
  // loaded vectors, BOS/EOS = zero).
  static EmbeddingTable load(const std::string& path);
  static EmbeddingTable random(const std::vector<std::string>& vocabulary, int dim,
                               std::mt19937_64& rng);
};

inline constexpr const char* kUnkWord = "<UNK>";
inline constexpr const char* kBosWord = "<BOS>";
inline constexpr const char* kEosWord = "<EOS>";

// Single-direction LSTM cell: input/forget/output gates plus tanh candidate,
// gates stacked [i; f; o; g] along the rows of the weight matrices.
struct LstmCell {
  MatrixXd w_in;   // 4H x D
  MatrixXd w_rec;  // 4H x H
  MatrixXd bias;   // 4H x 1

  int hidden() const { return static_cast<int>(w_rec.cols()); }
  int input() const { return static_cast<int>(w_in.cols()); }
  void init(int input_dim, int hidden_dim, std::mt19937_64& rng);
};

// Cached activations of one directional run; column t is step t.
struct LstmTrace {
  MatrixXd x, gate_i, gate_f, gate_o, gate_g, cell, tanh_cell, hidden;
  int steps() const { return static_cast<int>(hidden.cols()); }
};

struct LstmGrads {
  MatrixXd w_in, w_rec, bias;
};

LstmTrace lstm_forward(const LstmCell& cell, const MatrixXd& inputs);
// d_hidden has one column per step; accumulates parameter grads, returns dx.
MatrixXd lstm_backward(const LstmCell& cell, const LstmTrace& trace, const MatrixXd& d_hidden,
                       LstmGrads& grads);

struct Dims {
  int word = 250;
  int char_emb = 25;
  int char_hidden = 25;
  int feat = 25;
  int token_hidden = 100;

  int token_input() const { return word + 2 * char_hidden + 2 * feat; }
  int token_output() const { return 2 * token_hidden; }
};

struct ModelParams {
  EmbeddingTable word_table;
  std::vector<int> char_vocab;         // byte values; table row 0 is UNK
  std::array<int, 256> char_index{};   // byte -> row (0 = UNK)
  MatrixXd char_table;                 // (1 + |chars|) x char_emb
  LstmCell char_fwd, char_bwd;
  MatrixXd cap_table;                  // 4 x feat
  MatrixXd pos_table;                  // 43 x feat
  LstmCell token_fwd, token_bwd;
  MatrixXd proj_weight;                // token_output x 13
  MatrixXd proj_bias;                  // 1 x 13
  MatrixXd transitions;                // 15 x 15, structural -inf clamped
  MatrixXd graph_mix;                  // 13 x 13 (GraphFeat M)
  Dims dims;

  // Draw order is fixed: char_table, cap, pos, char_fwd(w_in, w_rec),
  // char_bwd, token_fwd, token_bwd, proj_weight, transitions, graph_mix.
  static ModelParams init(EmbeddingTable word_table, const std::vector<int>& char_vocab,
                          const Dims& dims, std::mt19937_64& rng);

  void rebuild_char_index();

  // Dense parameter blocks in canonical order (word table included).
  void for_each_block(const std::function<void(const std::string&, MatrixXd&)>& fn);
  void for_each_block(const std::function<void(const std::string&, const MatrixXd&)>& fn) const;
};

// Byte values observed across the given corpora, ascending.
std::vector<int> collect_char_vocab(const std::vector<const std::vector<corpus::LabeledSentence>*>& corpora);
// First-seen surface order across the given corpora.
std::vector<std::string> collect_word_vocab(const std::vector<const std::vector<corpus::LabeledSentence>*>& corpora);

struct ModelGrads {
  MatrixXd char_table, cap_table, pos_table, proj_weight, proj_bias, transitions, graph_mix;
  LstmGrads char_fwd, char_bwd, token_fwd, token_bwd;
  std::map<int, Eigen::RowVectorXd> word_rows;  // sparse word-table gradient

  static ModelGrads zeros_like(const ModelParams& params);
  void for_each_block(const std::function<void(const std::string&, MatrixXd&)>& fn);
  double squared_norm() const;
  void scale(double factor);
};

// Concatenation of the final forward and backward character states.
Eigen::VectorXd char_embed(const ModelParams& params, std::string_view surface);

// Full forward pass over one sentence with everything the backward pass needs.
struct SentenceTrace {
  std::vector<std::vector<int>> char_rows;
  std::vector<LstmTrace> char_fwd_traces, char_bwd_traces;
  std::vector<int> word_rows, cap_rows, pos_rows;
  MatrixXd inputs;     // token_input x n
  LstmTrace tok_fwd, tok_bwd;
  MatrixXd hidden;     // token_output x n
  MatrixXd emissions;  // n x 13
};

SentenceTrace encode_sentence(const ModelParams& params, const corpus::LabeledSentence& sentence);
MatrixXd emissions(const ModelParams& params, const corpus::LabeledSentence& sentence);

// Backpropagates d(loss)/d(emissions) through the network.
void backprop_emissions(const ModelParams& params, const SentenceTrace& trace,
                        const MatrixXd& d_emissions, ModelGrads& grads);

// One training item: a sentence with its target lattice. graph_rows, when
// present, are the propagated distributions Q feeding the GraphFeat emission
// adjustment P + M Q.
struct TrainItem {
  const corpus::LabeledSentence* sentence = nullptr;
  crf::TagLattice lattice;
  double weight = 1.0;
  std::optional<MatrixXd> graph_rows;  // n x 13
};

// Lattice log-likelihood of one item and its parameter gradients.
double item_loss_and_grads(const ModelParams& params, const TrainItem& item, ModelGrads& grads);
double item_log_likelihood(const ModelParams& params, const TrainItem& item);

struct TrainConfig {
  double learning_rate = 0.05;
  int max_epochs = 100;
  int patience = 10;
  double clip_norm = 0.0;  // 0 disables clipping
  bool verbose = false;
};

struct EpochStat {
  int epoch = 0;
  double mean_log_likelihood = 0.0;
  double dev_f1 = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochStat> history;
  int best_epoch = 0;
  double best_dev_f1 = 0.0;
  double final_mean_log_likelihood = 0.0;
};

// Gradient-ascent step: theta <- theta + lr * grad.
void sgd_step(ModelParams& params, const ModelGrads& grads, double learning_rate);
void clip_gradients(ModelGrads& grads, double max_norm);

// Viterbi decode with plain emissions (or P + M Q when graph rows given).
std::vector<int> decode(const ModelParams& params, const corpus::LabeledSentence& sentence,
                        const MatrixXd* graph_rows = nullptr);

// Dev metric used for model selection: span-classification micro F1.
double dev_span_f1(const ModelParams& params, const std::vector<corpus::LabeledSentence>& dev,
                   const std::vector<const MatrixXd*>* dev_graph_rows = nullptr);

// Sentence-level SGD over the items, shuffled each epoch; keeps the epoch
// with the best dev span F1 (the starting parameters count as epoch 0).
TrainResult train_objective(const std::vector<TrainItem>& items,
                            const std::vector<corpus::LabeledSentence>& dev,
                            ModelParams params, const TrainConfig& config, std::mt19937_64& rng,
                            const std::vector<const MatrixXd*>* dev_graph_rows = nullptr);

// Supervised training on gold label sequences.
TrainResult train_supervised(const std::vector<corpus::LabeledSentence>& train,
                             const std::vector<corpus::LabeledSentence>& dev, ModelParams params,
                             const TrainConfig& config, std::mt19937_64& rng);

}  // namespace scitag::encoder
