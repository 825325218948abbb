#include "scitag/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "scitag/eval.hpp"
#include "scitag/util.hpp"

namespace scitag::encoder {

namespace {

constexpr int kWordDim = 250;

double glorot_bound(int fan_in, int fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void fill_uniform(MatrixXd& m, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
}

Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& x) { return 1.0 / (1.0 + (-x).exp()); }

}  // namespace

int EmbeddingTable::lookup(std::string_view surface) const {
  const auto it = index.find(std::string(surface));
  return it == index.end() ? unk : it->second;
}

EmbeddingTable EmbeddingTable::load(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open embeddings file: " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), path + ": missing header line");
  std::istringstream header(line);
  long long count = -1, dim = -1;
  header >> count >> dim;
  require(static_cast<bool>(header) && count >= 0 && dim > 0,
          path + ":1: header must be 'vocab_size dim'");
  require(dim == kWordDim, path + ": embedding dimension must be 250, got " + std::to_string(dim));

  EmbeddingTable table;
  table.vectors.resize(count, dim);
  int row = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    require(row < count, path + ":" + std::to_string(line_no) + ": more rows than header declares");
    std::istringstream fields(line);
    std::string word;
    fields >> word;
    require(!word.empty(), path + ":" + std::to_string(line_no) + ": missing surface");
    for (int d = 0; d < dim; ++d) {
      double value;
      if (!(fields >> value)) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": expected " + std::to_string(dim) + " values");
      }
      table.vectors(row, d) = value;
    }
    double extra;
    require(!(fields >> extra), path + ":" + std::to_string(line_no) + ": trailing values");
    if (table.index.count(word) == 0) {
      table.index.emplace(word, row);
      table.words.push_back(word);
      ++row;
    }
  }
  require(row == count, path + ": header declares " + std::to_string(count) + " rows, found " +
                            std::to_string(row));

  // Append missing specials: UNK gets the corpus mean, BOS/EOS zero.
  Eigen::RowVectorXd mean = row > 0 ? table.vectors.topRows(row).colwise().mean().eval()
                                    : Eigen::RowVectorXd::Zero(dim).eval();
  auto ensure = [&](const char* word, const Eigen::RowVectorXd& value) {
    const auto it = table.index.find(word);
    if (it != table.index.end()) return it->second;
    const int r = static_cast<int>(table.vectors.rows());
    table.vectors.conservativeResize(r + 1, Eigen::NoChange);
    table.vectors.row(r) = value;
    table.index.emplace(word, r);
    table.words.push_back(word);
    return r;
  };
  table.unk = ensure(kUnkWord, mean);
  table.bos = ensure(kBosWord, Eigen::RowVectorXd::Zero(dim));
  table.eos = ensure(kEosWord, Eigen::RowVectorXd::Zero(dim));
  return table;
}

EmbeddingTable EmbeddingTable::random(const std::vector<std::string>& vocabulary, int dim,
                                      std::mt19937_64& rng) {
  EmbeddingTable table;
  std::vector<std::string> all = {kUnkWord, kBosWord, kEosWord};
  for (const std::string& word : vocabulary) {
    if (word != kUnkWord && word != kBosWord && word != kEosWord) all.push_back(word);
  }
  table.vectors.resize(static_cast<Eigen::Index>(all.size()), dim);
  fill_uniform(table.vectors, 0.1, rng);
  for (std::size_t i = 0; i < all.size(); ++i) {
    table.index.emplace(all[i], static_cast<int>(i));
    table.words.push_back(all[i]);
  }
  table.unk = 0;
  table.bos = 1;
  table.eos = 2;
  return table;
}

void LstmCell::init(int input_dim, int hidden_dim, std::mt19937_64& rng) {
  w_in.resize(4 * hidden_dim, input_dim);
  w_rec.resize(4 * hidden_dim, hidden_dim);
  bias = MatrixXd::Zero(4 * hidden_dim, 1);
  fill_uniform(w_in, glorot_bound(input_dim, 4 * hidden_dim), rng);
  fill_uniform(w_rec, glorot_bound(hidden_dim, 4 * hidden_dim), rng);
}

LstmTrace lstm_forward(const LstmCell& cell, const MatrixXd& inputs) {
  const int h = cell.hidden();
  const int steps = static_cast<int>(inputs.cols());
  LstmTrace trace;
  trace.x = inputs;
  trace.gate_i.resize(h, steps);
  trace.gate_f.resize(h, steps);
  trace.gate_o.resize(h, steps);
  trace.gate_g.resize(h, steps);
  trace.cell.resize(h, steps);
  trace.tanh_cell.resize(h, steps);
  trace.hidden.resize(h, steps);

  Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(h);
  Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(h);
  for (int t = 0; t < steps; ++t) {
    const Eigen::VectorXd pre = cell.w_in * inputs.col(t) + cell.w_rec * h_prev + cell.bias.col(0);
    const Eigen::ArrayXd gi = sigmoid(pre.segment(0, h).array());
    const Eigen::ArrayXd gf = sigmoid(pre.segment(h, h).array());
    const Eigen::ArrayXd go = sigmoid(pre.segment(2 * h, h).array());
    const Eigen::ArrayXd gg = pre.segment(3 * h, h).array().tanh();
    const Eigen::ArrayXd c = gf * c_prev.array() + gi * gg;
    const Eigen::ArrayXd tc = c.tanh();
    trace.gate_i.col(t) = gi;
    trace.gate_f.col(t) = gf;
    trace.gate_o.col(t) = go;
    trace.gate_g.col(t) = gg;
    trace.cell.col(t) = c;
    trace.tanh_cell.col(t) = tc;
    trace.hidden.col(t) = go * tc;
    h_prev = trace.hidden.col(t);
    c_prev = trace.cell.col(t);
  }
  return trace;
}

MatrixXd lstm_backward(const LstmCell& cell, const LstmTrace& trace, const MatrixXd& d_hidden,
                       LstmGrads& grads) {
  const int h = cell.hidden();
  const int steps = trace.steps();
  if (grads.w_in.size() == 0) {
    grads.w_in = MatrixXd::Zero(cell.w_in.rows(), cell.w_in.cols());
    grads.w_rec = MatrixXd::Zero(cell.w_rec.rows(), cell.w_rec.cols());
    grads.bias = MatrixXd::Zero(cell.bias.rows(), 1);
  }
  MatrixXd dx = MatrixXd::Zero(trace.x.rows(), steps);
  Eigen::VectorXd dh_rec = Eigen::VectorXd::Zero(h);
  Eigen::VectorXd dc_rec = Eigen::VectorXd::Zero(h);
  Eigen::VectorXd pre_grad(4 * h);
  for (int t = steps - 1; t >= 0; --t) {
    const Eigen::ArrayXd dh = d_hidden.col(t).array() + dh_rec.array();
    const Eigen::ArrayXd gi = trace.gate_i.col(t).array();
    const Eigen::ArrayXd gf = trace.gate_f.col(t).array();
    const Eigen::ArrayXd go = trace.gate_o.col(t).array();
    const Eigen::ArrayXd gg = trace.gate_g.col(t).array();
    const Eigen::ArrayXd tc = trace.tanh_cell.col(t).array();
    const Eigen::ArrayXd c_prev =
        t > 0 ? trace.cell.col(t - 1).array() : Eigen::ArrayXd::Zero(h).eval();

    const Eigen::ArrayXd dc = dh * go * (1.0 - tc * tc) + dc_rec.array();
    pre_grad.segment(0, h) = dc * gg * gi * (1.0 - gi);          // input gate
    pre_grad.segment(h, h) = dc * c_prev * gf * (1.0 - gf);      // forget gate
    pre_grad.segment(2 * h, h) = dh * tc * go * (1.0 - go);      // output gate
    pre_grad.segment(3 * h, h) = dc * gi * (1.0 - gg * gg);      // candidate

    grads.w_in += pre_grad * trace.x.col(t).transpose();
    if (t > 0) grads.w_rec += pre_grad * trace.hidden.col(t - 1).transpose();
    grads.bias.col(0) += pre_grad;
    dx.col(t) = cell.w_in.transpose() * pre_grad;
    dh_rec = cell.w_rec.transpose() * pre_grad;
    dc_rec = (dc * gf).matrix();
  }
  return dx;
}

ModelParams ModelParams::init(EmbeddingTable word_table, const std::vector<int>& char_vocab,
                              const Dims& dims, std::mt19937_64& rng) {
  ModelParams params;
  params.dims = dims;
  params.word_table = std::move(word_table);
  require(params.word_table.dim() == dims.word, "ModelParams: word table dimension mismatch");
  params.char_vocab = char_vocab;
  params.rebuild_char_index();

  params.char_table.resize(static_cast<Eigen::Index>(char_vocab.size()) + 1, dims.char_emb);
  fill_uniform(params.char_table, 0.1, rng);
  params.cap_table.resize(corpus::kNumCapClasses, dims.feat);
  fill_uniform(params.cap_table, 0.1, rng);
  params.pos_table.resize(corpus::kNumPosTags, dims.feat);
  fill_uniform(params.pos_table, 0.1, rng);

  params.char_fwd.init(dims.char_emb, dims.char_hidden, rng);
  params.char_bwd.init(dims.char_emb, dims.char_hidden, rng);
  params.token_fwd.init(dims.token_input(), dims.token_hidden, rng);
  params.token_bwd.init(dims.token_input(), dims.token_hidden, rng);

  params.proj_weight.resize(dims.token_output(), kNumLabels);
  fill_uniform(params.proj_weight, glorot_bound(dims.token_output(), kNumLabels), rng);
  params.proj_bias = MatrixXd::Zero(1, kNumLabels);

  params.transitions.resize(kNumTags, kNumTags);
  fill_uniform(params.transitions, glorot_bound(kNumTags, kNumTags), rng);
  crf::clamp_structural(params.transitions);

  params.graph_mix.resize(kNumLabels, kNumLabels);
  fill_uniform(params.graph_mix, glorot_bound(kNumLabels, kNumLabels), rng);
  return params;
}

void ModelParams::rebuild_char_index() {
  char_index.fill(0);
  for (std::size_t i = 0; i < char_vocab.size(); ++i) {
    const int byte = char_vocab[i];
    require(byte >= 0 && byte < 256, "char vocab entry out of byte range");
    char_index[static_cast<std::size_t>(byte)] = static_cast<int>(i) + 1;
  }
}

namespace {

template <typename Params, typename Fn>
void visit_blocks(Params& p, Fn&& fn) {
  fn("word_table", p.word_table.vectors);
  fn("char_table", p.char_table);
  fn("cap_table", p.cap_table);
  fn("pos_table", p.pos_table);
  fn("char_fwd.w_in", p.char_fwd.w_in);
  fn("char_fwd.w_rec", p.char_fwd.w_rec);
  fn("char_fwd.bias", p.char_fwd.bias);
  fn("char_bwd.w_in", p.char_bwd.w_in);
  fn("char_bwd.w_rec", p.char_bwd.w_rec);
  fn("char_bwd.bias", p.char_bwd.bias);
  fn("token_fwd.w_in", p.token_fwd.w_in);
  fn("token_fwd.w_rec", p.token_fwd.w_rec);
  fn("token_fwd.bias", p.token_fwd.bias);
  fn("token_bwd.w_in", p.token_bwd.w_in);
  fn("token_bwd.w_rec", p.token_bwd.w_rec);
  fn("token_bwd.bias", p.token_bwd.bias);
  fn("proj_weight", p.proj_weight);
  fn("proj_bias", p.proj_bias);
  fn("transitions", p.transitions);
  fn("graph_mix", p.graph_mix);
}

}  // namespace

void ModelParams::for_each_block(const std::function<void(const std::string&, MatrixXd&)>& fn) {
  visit_blocks(*this, fn);
}

void ModelParams::for_each_block(
    const std::function<void(const std::string&, const MatrixXd&)>& fn) const {
  visit_blocks(*this, fn);
}

std::vector<int> collect_char_vocab(
    const std::vector<const std::vector<corpus::LabeledSentence>*>& corpora) {
  std::set<int> bytes;
  for (const auto* sentences : corpora)
    for (const auto& sentence : *sentences)
      for (const auto& token : sentence.tokens)
        for (unsigned char c : token.surface) bytes.insert(static_cast<int>(c));
  return {bytes.begin(), bytes.end()};
}

std::vector<std::string> collect_word_vocab(
    const std::vector<const std::vector<corpus::LabeledSentence>*>& corpora) {
  std::vector<std::string> vocab;
  std::set<std::string> seen;
  for (const auto* sentences : corpora)
    for (const auto& sentence : *sentences)
      for (const auto& token : sentence.tokens)
        if (seen.insert(token.surface).second) vocab.push_back(token.surface);
  return vocab;
}

ModelGrads ModelGrads::zeros_like(const ModelParams& params) {
  ModelGrads grads;
  grads.char_table = MatrixXd::Zero(params.char_table.rows(), params.char_table.cols());
  grads.cap_table = MatrixXd::Zero(params.cap_table.rows(), params.cap_table.cols());
  grads.pos_table = MatrixXd::Zero(params.pos_table.rows(), params.pos_table.cols());
  grads.proj_weight = MatrixXd::Zero(params.proj_weight.rows(), params.proj_weight.cols());
  grads.proj_bias = MatrixXd::Zero(1, kNumLabels);
  grads.transitions = MatrixXd::Zero(kNumTags, kNumTags);
  grads.graph_mix = MatrixXd::Zero(kNumLabels, kNumLabels);
  auto cell = [](const LstmCell& c) {
    return LstmGrads{MatrixXd::Zero(c.w_in.rows(), c.w_in.cols()),
                     MatrixXd::Zero(c.w_rec.rows(), c.w_rec.cols()),
                     MatrixXd::Zero(c.bias.rows(), 1)};
  };
  grads.char_fwd = cell(params.char_fwd);
  grads.char_bwd = cell(params.char_bwd);
  grads.token_fwd = cell(params.token_fwd);
  grads.token_bwd = cell(params.token_bwd);
  return grads;
}

void ModelGrads::for_each_block(const std::function<void(const std::string&, MatrixXd&)>& fn) {
  fn("char_table", char_table);
  fn("cap_table", cap_table);
  fn("pos_table", pos_table);
  fn("char_fwd.w_in", char_fwd.w_in);
  fn("char_fwd.w_rec", char_fwd.w_rec);
  fn("char_fwd.bias", char_fwd.bias);
  fn("char_bwd.w_in", char_bwd.w_in);
  fn("char_bwd.w_rec", char_bwd.w_rec);
  fn("char_bwd.bias", char_bwd.bias);
  fn("token_fwd.w_in", token_fwd.w_in);
  fn("token_fwd.w_rec", token_fwd.w_rec);
  fn("token_fwd.bias", token_fwd.bias);
  fn("token_bwd.w_in", token_bwd.w_in);
  fn("token_bwd.w_rec", token_bwd.w_rec);
  fn("token_bwd.bias", token_bwd.bias);
  fn("proj_weight", proj_weight);
  fn("proj_bias", proj_bias);
  fn("transitions", transitions);
  fn("graph_mix", graph_mix);
}

double ModelGrads::squared_norm() const {
  double total = char_table.squaredNorm() + cap_table.squaredNorm() + pos_table.squaredNorm() +
                 proj_weight.squaredNorm() + proj_bias.squaredNorm() +
                 transitions.squaredNorm() + graph_mix.squaredNorm();
  for (const LstmGrads* cell : {&char_fwd, &char_bwd, &token_fwd, &token_bwd})
    total += cell->w_in.squaredNorm() + cell->w_rec.squaredNorm() + cell->bias.squaredNorm();
  for (const auto& [row, grad] : word_rows) total += grad.squaredNorm();
  return total;
}

void ModelGrads::scale(double factor) {
  for_each_block([&](const std::string&, MatrixXd& m) { m *= factor; });
  for (auto& [row, grad] : word_rows) grad *= factor;
}

namespace {

std::vector<int> char_row_ids(const ModelParams& params, std::string_view surface) {
  std::vector<int> rows;
  rows.reserve(surface.size());
  for (unsigned char c : surface) rows.push_back(params.char_index[c]);
  return rows;
}

MatrixXd char_inputs(const ModelParams& params, const std::vector<int>& rows) {
  MatrixXd inputs(params.dims.char_emb, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    inputs.col(static_cast<Eigen::Index>(i)) = params.char_table.row(rows[i]).transpose();
  return inputs;
}

}  // namespace

Eigen::VectorXd char_embed(const ModelParams& params, std::string_view surface) {
  const int h = params.dims.char_hidden;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(2 * h);
  if (surface.empty()) return out;
  const std::vector<int> rows = char_row_ids(params, surface);
  const MatrixXd inputs = char_inputs(params, rows);
  const LstmTrace fwd = lstm_forward(params.char_fwd, inputs);
  const LstmTrace bwd = lstm_forward(params.char_bwd, inputs.rowwise().reverse());
  out.segment(0, h) = fwd.hidden.col(fwd.steps() - 1);
  out.segment(h, h) = bwd.hidden.col(bwd.steps() - 1);
  return out;
}

SentenceTrace encode_sentence(const ModelParams& params, const corpus::LabeledSentence& sentence) {
  const Dims& dims = params.dims;
  const int n = sentence.size();
  SentenceTrace trace;
  trace.inputs.resize(dims.token_input(), n);
  trace.char_rows.resize(static_cast<std::size_t>(n));
  trace.char_fwd_traces.resize(static_cast<std::size_t>(n));
  trace.char_bwd_traces.resize(static_cast<std::size_t>(n));
  trace.word_rows.resize(static_cast<std::size_t>(n));
  trace.cap_rows.resize(static_cast<std::size_t>(n));
  trace.pos_rows.resize(static_cast<std::size_t>(n));

  for (int t = 0; t < n; ++t) {
    const corpus::Token& token = sentence.tokens[static_cast<std::size_t>(t)];
    const std::size_t ut = static_cast<std::size_t>(t);
    trace.word_rows[ut] = params.word_table.lookup(token.surface);
    trace.cap_rows[ut] = static_cast<int>(token.cap);
    trace.pos_rows[ut] = token.pos;
    trace.char_rows[ut] = char_row_ids(params, token.surface);

    auto column = trace.inputs.col(t);
    column.segment(0, dims.word) =
        params.word_table.vectors.row(trace.word_rows[ut]).transpose();
    if (!trace.char_rows[ut].empty()) {
      const MatrixXd chars = char_inputs(params, trace.char_rows[ut]);
      trace.char_fwd_traces[ut] = lstm_forward(params.char_fwd, chars);
      trace.char_bwd_traces[ut] = lstm_forward(params.char_bwd, chars.rowwise().reverse());
      column.segment(dims.word, dims.char_hidden) =
          trace.char_fwd_traces[ut].hidden.col(trace.char_fwd_traces[ut].steps() - 1);
      column.segment(dims.word + dims.char_hidden, dims.char_hidden) =
          trace.char_bwd_traces[ut].hidden.col(trace.char_bwd_traces[ut].steps() - 1);
    } else {
      column.segment(dims.word, 2 * dims.char_hidden).setZero();
    }
    column.segment(dims.word + 2 * dims.char_hidden, dims.feat) =
        params.cap_table.row(trace.cap_rows[ut]).transpose();
    column.segment(dims.word + 2 * dims.char_hidden + dims.feat, dims.feat) =
        params.pos_table.row(trace.pos_rows[ut]).transpose();
  }

  trace.tok_fwd = lstm_forward(params.token_fwd, trace.inputs);
  trace.tok_bwd = lstm_forward(params.token_bwd, trace.inputs.rowwise().reverse());
  trace.hidden.resize(dims.token_output(), n);
  for (int t = 0; t < n; ++t) {
    trace.hidden.col(t).segment(0, dims.token_hidden) = trace.tok_fwd.hidden.col(t);
    trace.hidden.col(t).segment(dims.token_hidden, dims.token_hidden) =
        trace.tok_bwd.hidden.col(n - 1 - t);
  }
  trace.emissions =
      trace.hidden.transpose() * params.proj_weight + params.proj_bias.replicate(n, 1);
  return trace;
}

MatrixXd emissions(const ModelParams& params, const corpus::LabeledSentence& sentence) {
  return encode_sentence(params, sentence).emissions;
}

void backprop_emissions(const ModelParams& params, const SentenceTrace& trace,
                        const MatrixXd& d_emissions, ModelGrads& grads) {
  const Dims& dims = params.dims;
  const int n = static_cast<int>(trace.emissions.rows());
  if (n == 0) return;

  grads.proj_weight += trace.hidden * d_emissions;
  grads.proj_bias += d_emissions.colwise().sum();
  const MatrixXd d_hidden = params.proj_weight * d_emissions.transpose();  // token_output x n

  MatrixXd d_fwd = d_hidden.topRows(dims.token_hidden);
  MatrixXd d_bwd(dims.token_hidden, n);
  for (int t = 0; t < n; ++t)
    d_bwd.col(n - 1 - t) = d_hidden.col(t).segment(dims.token_hidden, dims.token_hidden);

  const MatrixXd dx_fwd = lstm_backward(params.token_fwd, trace.tok_fwd, d_fwd, grads.token_fwd);
  const MatrixXd dx_bwd = lstm_backward(params.token_bwd, trace.tok_bwd, d_bwd, grads.token_bwd);

  for (int t = 0; t < n; ++t) {
    const std::size_t ut = static_cast<std::size_t>(t);
    const Eigen::VectorXd dx = dx_fwd.col(t) + dx_bwd.col(n - 1 - t);

    auto& word_grad = grads.word_rows[trace.word_rows[ut]];
    if (word_grad.size() == 0) word_grad = Eigen::RowVectorXd::Zero(dims.word);
    word_grad += dx.segment(0, dims.word).transpose();

    if (!trace.char_rows[ut].empty()) {
      const LstmTrace& cf = trace.char_fwd_traces[ut];
      const LstmTrace& cb = trace.char_bwd_traces[ut];
      MatrixXd dh_f = MatrixXd::Zero(dims.char_hidden, cf.steps());
      MatrixXd dh_b = MatrixXd::Zero(dims.char_hidden, cb.steps());
      dh_f.col(cf.steps() - 1) = dx.segment(dims.word, dims.char_hidden);
      dh_b.col(cb.steps() - 1) = dx.segment(dims.word + dims.char_hidden, dims.char_hidden);
      const MatrixXd dchar_f = lstm_backward(params.char_fwd, cf, dh_f, grads.char_fwd);
      const MatrixXd dchar_b = lstm_backward(params.char_bwd, cb, dh_b, grads.char_bwd);
      const int len = cf.steps();
      for (int p = 0; p < len; ++p) {
        const int row = trace.char_rows[ut][static_cast<std::size_t>(p)];
        grads.char_table.row(row) +=
            (dchar_f.col(p) + dchar_b.col(len - 1 - p)).transpose();
      }
    }
    grads.cap_table.row(trace.cap_rows[ut]) +=
        dx.segment(dims.word + 2 * dims.char_hidden, dims.feat).transpose();
    grads.pos_table.row(trace.pos_rows[ut]) +=
        dx.segment(dims.word + 2 * dims.char_hidden + dims.feat, dims.feat).transpose();
  }
}

namespace {

MatrixXd fused_emissions(const ModelParams& params, const MatrixXd& plain,
                         const std::optional<MatrixXd>& graph_rows) {
  if (!graph_rows) return plain;
  require(graph_rows->rows() == plain.rows() && graph_rows->cols() == plain.cols(),
          "graph rows shape mismatch against emissions");
  return plain + *graph_rows * params.graph_mix.transpose();
}

}  // namespace

double item_loss_and_grads(const ModelParams& params, const TrainItem& item, ModelGrads& grads) {
  const SentenceTrace trace = encode_sentence(params, *item.sentence);
  const MatrixXd scores = fused_emissions(params, trace.emissions, item.graph_rows);
  const crf::Gradients crf_grads = crf::gradients(scores, params.transitions, item.lattice);
  const double value =
      crf::lattice_log_likelihood(scores, params.transitions, item.lattice);

  MatrixXd d_emissions = crf_grads.emission * item.weight;
  grads.transitions += crf_grads.transition * item.weight;
  if (item.graph_rows) {
    // P~ = P + Q M^T: gradient reaches M and passes through to P untouched.
    grads.graph_mix += d_emissions.transpose() * *item.graph_rows;
  }
  backprop_emissions(params, trace, d_emissions, grads);
  return value * item.weight;
}

double item_log_likelihood(const ModelParams& params, const TrainItem& item) {
  const MatrixXd plain = emissions(params, *item.sentence);
  const MatrixXd scores = fused_emissions(params, plain, item.graph_rows);
  return crf::lattice_log_likelihood(scores, params.transitions, item.lattice) * item.weight;
}

void sgd_step(ModelParams& params, const ModelGrads& grads, double learning_rate) {
  const ModelGrads& g = grads;
  auto step = [&](MatrixXd& param, const MatrixXd& grad) {
    require(param.rows() == grad.rows() && param.cols() == grad.cols(),
            "sgd_step: gradient shape mismatch");
    param += learning_rate * grad;
  };
  step(params.char_table, g.char_table);
  step(params.cap_table, g.cap_table);
  step(params.pos_table, g.pos_table);
  step(params.proj_weight, g.proj_weight);
  step(params.proj_bias, g.proj_bias);
  step(params.transitions, g.transitions);
  step(params.graph_mix, g.graph_mix);
  auto cell = [&](LstmCell& c, const LstmGrads& cg) {
    step(c.w_in, cg.w_in);
    step(c.w_rec, cg.w_rec);
    step(c.bias, cg.bias);
  };
  cell(params.char_fwd, g.char_fwd);
  cell(params.char_bwd, g.char_bwd);
  cell(params.token_fwd, g.token_fwd);
  cell(params.token_bwd, g.token_bwd);
  for (const auto& [row, grad] : grads.word_rows)
    params.word_table.vectors.row(row) += learning_rate * grad;
  crf::clamp_structural(params.transitions);
}

void clip_gradients(ModelGrads& grads, double max_norm) {
  if (max_norm <= 0) return;
  const double norm = std::sqrt(grads.squared_norm());
  if (norm > max_norm) grads.scale(max_norm / norm);
}

std::vector<int> decode(const ModelParams& params, const corpus::LabeledSentence& sentence,
                        const MatrixXd* graph_rows) {
  MatrixXd scores = emissions(params, sentence);
  if (graph_rows) scores += *graph_rows * params.graph_mix.transpose();
  return crf::viterbi(scores, params.transitions).first;
}

double dev_span_f1(const ModelParams& params, const std::vector<corpus::LabeledSentence>& dev,
                   const std::vector<const MatrixXd*>* dev_graph_rows) {
  std::vector<std::vector<corpus::Span>> gold, pred;
  gold.reserve(dev.size());
  pred.reserve(dev.size());
  for (std::size_t s = 0; s < dev.size(); ++s) {
    const MatrixXd* rows =
        dev_graph_rows && s < dev_graph_rows->size() ? (*dev_graph_rows)[s] : nullptr;
    gold.push_back(corpus::iobes_to_spans(dev[s].labels));
    pred.push_back(corpus::iobes_to_spans(decode(params, dev[s], rows)));
  }
  return eval::span_prf(gold, pred, eval::Subtask::Classification).overall.f1;
}

TrainResult train_objective(const std::vector<TrainItem>& items,
                            const std::vector<corpus::LabeledSentence>& dev, ModelParams params,
                            const TrainConfig& config, std::mt19937_64& rng,
                            const std::vector<const MatrixXd*>* dev_graph_rows) {
  require(!items.empty(), "train: empty corpus");
  require(config.learning_rate > 0, "train: learning rate must be positive");

  auto mean_ll = [&](const ModelParams& p) {
    double total = 0.0;
    for (const TrainItem& item : items) total += item_log_likelihood(p, item);
    return total / static_cast<double>(items.size());
  };

  TrainResult result;
  result.best_dev_f1 = dev.empty() ? 0.0 : dev_span_f1(params, dev, dev_graph_rows);
  result.best_epoch = 0;
  result.history.push_back({0, mean_ll(params), result.best_dev_f1});
  result.params = params;

  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (const std::size_t idx : order) {
      ModelGrads grads = ModelGrads::zeros_like(params);
      item_loss_and_grads(params, items[idx], grads);
      if (config.clip_norm > 0) clip_gradients(grads, config.clip_norm);
      sgd_step(params, grads, config.learning_rate);
    }
    const double ll = mean_ll(params);
    const double f1 = dev.empty() ? 0.0 : dev_span_f1(params, dev, dev_graph_rows);
    result.history.push_back({epoch, ll, f1});
    if (config.verbose) {
      std::cerr << "epoch " << epoch << " mean-ll " << ll << " dev-f1 " << f1 << "\n";
    }
    if (f1 > result.best_dev_f1) {
      result.best_dev_f1 = f1;
      result.best_epoch = epoch;
      result.params = params;
    }
    if (config.patience > 0 && epoch - result.best_epoch >= config.patience) break;
  }
  result.final_mean_log_likelihood = result.history.back().mean_log_likelihood;
  return result;
}

TrainResult train_supervised(const std::vector<corpus::LabeledSentence>& train,
                             const std::vector<corpus::LabeledSentence>& dev, ModelParams params,
                             const TrainConfig& config, std::mt19937_64& rng) {
  require(!train.empty(), "train_supervised: empty corpus");
  std::vector<TrainItem> items;
  items.reserve(train.size());
  for (const auto& sentence : train) {
    require(sentence.labeled(), "train_supervised: unlabeled sentence in " + sentence.doc_id);
    require(corpus::iobes_valid(sentence.labels),
            "train_supervised: invalid IOBES gold sequence in " + sentence.doc_id +
                " sentence " + std::to_string(sentence.index));
    items.push_back({&sentence, crf::TagLattice::singletons(sentence.labels), 1.0, std::nullopt});
  }
  return train_objective(items, dev, std::move(params), config, rng);
}

}  // namespace scitag::encoder
