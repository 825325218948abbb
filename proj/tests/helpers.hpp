// Shared fixtures for the test suites: random CRF instances, toy corpora and
// models, and scratch directories.
#pragma once

#include <unistd.h>

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "scitag/corpus.hpp"
#include "scitag/crf.hpp"
#include "scitag/encoder.hpp"
#include "scitag/util.hpp"

namespace helpers {

using Eigen::MatrixXd;
namespace fs = std::filesystem;

inline MatrixXd random_emissions(int n, std::mt19937_64& rng, double range = 2.0) {
  std::uniform_real_distribution<double> dist(-range, range);
  MatrixXd emissions(n, scitag::kNumLabels);
  for (int t = 0; t < n; ++t)
    for (int y = 0; y < scitag::kNumLabels; ++y) emissions(t, y) = dist(rng);
  return emissions;
}

// Random finite scores on legal entries, structural -inf elsewhere.
inline MatrixXd random_structural_transitions(std::mt19937_64& rng, double range = 1.0) {
  std::uniform_real_distribution<double> dist(-range, range);
  MatrixXd transitions(scitag::kNumTags, scitag::kNumTags);
  for (int i = 0; i < scitag::kNumTags; ++i)
    for (int j = 0; j < scitag::kNumTags; ++j) transitions(i, j) = dist(rng);
  scitag::crf::clamp_structural(transitions);
  return transitions;
}

inline MatrixXd random_dense_transitions(std::mt19937_64& rng, double range = 1.0) {
  std::uniform_real_distribution<double> dist(-range, range);
  MatrixXd transitions(scitag::kNumTags, scitag::kNumTags);
  for (int i = 0; i < scitag::kNumTags; ++i)
    for (int j = 0; j < scitag::kNumTags; ++j) transitions(i, j) = dist(rng);
  return transitions;
}

// Random lattice whose allowed sets always include O, so a structurally legal
// path survives the restriction.
inline scitag::crf::TagLattice random_lattice(int n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> label(0, scitag::kNumLabels - 1);
  std::uniform_int_distribution<int> coin(0, 2);
  scitag::crf::TagLattice lattice = scitag::crf::TagLattice::full(n);
  for (int t = 0; t < n; ++t) {
    if (coin(rng) == 0) continue;  // keep fully open
    std::uint16_t mask = static_cast<std::uint16_t>(1u << scitag::kOutside);
    const int extras = coin(rng) + 1;
    for (int e = 0; e < extras; ++e) mask |= static_cast<std::uint16_t>(1u << label(rng));
    lattice.allowed[static_cast<std::size_t>(t)] = mask;
  }
  return lattice;
}

inline scitag::corpus::LabeledSentence make_sentence(const std::vector<std::string>& surfaces,
                                                     const std::vector<std::string>& pos,
                                                     const std::vector<std::string>& labels,
                                                     const std::string& doc_id = "toy",
                                                     int index = 0) {
  scitag::require(surfaces.size() == pos.size(), "make_sentence: pos length mismatch");
  scitag::require(labels.empty() || labels.size() == surfaces.size(),
                  "make_sentence: label length mismatch");
  scitag::corpus::LabeledSentence sentence;
  sentence.doc_id = doc_id;
  sentence.index = index;
  std::size_t offset = 0;
  for (std::size_t t = 0; t < surfaces.size(); ++t) {
    scitag::corpus::Token token;
    token.surface = surfaces[t];
    token.begin = offset;
    token.end = offset + token.surface.size();
    offset = token.end + 1;
    token.pos = scitag::corpus::pos_index(pos[t]);
    token.cap = scitag::corpus::cap_class(token.surface);
    sentence.tokens.push_back(std::move(token));
  }
  for (const std::string& name : labels) {
    const auto label = scitag::parse_label(name);
    scitag::require(label.has_value(), "make_sentence: bad label " + name);
    sentence.labels.push_back(*label);
  }
  return sentence;
}

// Ten short synthetic sentences covering every category and span shape.
inline std::vector<scitag::corpus::LabeledSentence> toy_corpus() {
  std::vector<scitag::corpus::LabeledSentence> corpus;
  auto add = [&](const std::vector<std::string>& surfaces, const std::vector<std::string>& pos,
                 const std::vector<std::string>& labels) {
    corpus.push_back(make_sentence(surfaces, pos, labels, "toy", static_cast<int>(corpus.size())));
  };
  add({"we", "use", "conditional", "random", "fields", "."},
      {"PRP", "VBP", "JJ", "JJ", "NNS", "."},
      {"O", "O", "B-Process", "I-Process", "E-Process", "O"});
  add({"the", "corpus", "is", "large", "."}, {"DT", "NN", "VBZ", "JJ", "."},
      {"O", "S-Material", "O", "O", "O"});
  add({"this", "paper", "studies", "entity", "recognition", "."},
      {"DT", "NN", "VBZ", "NN", "NN", "."},
      {"O", "O", "O", "B-Task", "E-Task", "O"});
  add({"Cu40Zn", "melts", "quickly", "."}, {"NNP", "VBZ", "RB", "."},
      {"S-Material", "O", "O", "O"});
  add({"we", "evaluate", "parsing", "."}, {"PRP", "VBP", "NN", "."},
      {"O", "O", "S-Task", "O"});
  add({"gradient", "descent", "converges", "."}, {"NN", "NN", "VBZ", "."},
      {"B-Process", "E-Process", "O", "O"});
  add({"annotated", "treebank", "data", "helps", "."}, {"JJ", "NN", "NNS", "VBZ", "."},
      {"B-Material", "I-Material", "E-Material", "O", "O"});
  add({"solving", "equations", "is", "hard", "."}, {"VBG", "NNS", "VBZ", "JJ", "."},
      {"B-Task", "E-Task", "O", "O", "O"});
  add({"kernel", "methods", "need", "tuning", "."}, {"NN", "NNS", "VBP", "NN", "."},
      {"B-Process", "E-Process", "O", "S-Process", "O"});
  add({"results", "on", "wikipedia", "improve", "."}, {"NNS", "IN", "NN", "VBP", "."},
      {"O", "O", "S-Material", "O", "O"});
  return corpus;
}

inline scitag::encoder::Dims tiny_dims() {
  scitag::encoder::Dims dims;
  dims.word = 8;
  dims.char_emb = 3;
  dims.char_hidden = 3;
  dims.feat = 2;
  dims.token_hidden = 5;
  return dims;
}

inline scitag::encoder::ModelParams make_model(
    const std::vector<const std::vector<scitag::corpus::LabeledSentence>*>& corpora,
    const scitag::encoder::Dims& dims, std::mt19937_64& rng) {
  scitag::encoder::EmbeddingTable table = scitag::encoder::EmbeddingTable::random(
      scitag::encoder::collect_word_vocab(corpora), dims.word, rng);
  return scitag::encoder::ModelParams::init(std::move(table),
                                            scitag::encoder::collect_char_vocab(corpora), dims,
                                            rng);
}

// Fresh scratch directory under the system temp root.
inline fs::path scratch_dir(const std::string& tag) {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path() /
                       ("scitag_" + tag + "_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

inline void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  scitag::require(out.good(), "cannot write " + path.string());
  out << content;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  scitag::require(in.good(), "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace helpers
