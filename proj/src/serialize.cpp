#include "scitag/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "scitag/util.hpp"

namespace scitag::io {

namespace {

constexpr char kModelMagic[6] = {'S', 'T', 'S', 'S', 'L', '1'};
constexpr char kGraphMagic[6] = {'S', 'T', 'G', 'R', 'F', '1'};
constexpr std::uint8_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void write_u64(std::ostream& out, std::uint64_t value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(value));
}

void write_f64(std::ostream& out, double value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(value));
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t value = 0;
  in.read(reinterpret_cast<char*>(&value), sizeof(value));
  require(in.good(), "checkpoint: truncated file");
  return value;
}

double read_f64(std::istream& in) {
  double value = 0;
  in.read(reinterpret_cast<char*>(&value), sizeof(value));
  require(in.good(), "checkpoint: truncated file");
  return value;
}

void write_string(std::ostream& out, const std::string& value) {
  write_u64(out, value.size());
  out.write(value.data(), static_cast<std::streamsize>(value.size()));
}

std::string read_string(std::istream& in) {
  const std::uint64_t size = read_u64(in);
  std::string value(size, '\0');
  in.read(value.data(), static_cast<std::streamsize>(size));
  require(in.good(), "checkpoint: truncated string");
  return value;
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  write_u64(out, static_cast<std::uint64_t>(m.rows()));
  write_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) write_f64(out, m(r, c));
}

Eigen::MatrixXd read_matrix(std::istream& in) {
  const auto rows = static_cast<Eigen::Index>(read_u64(in));
  const auto cols = static_cast<Eigen::Index>(read_u64(in));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = read_f64(in);
  return m;
}

enum class BlockKind : std::uint8_t { Matrix = 0, StringList = 1 };

void check_header(std::istream& in, const char (&magic)[6], const std::string& path) {
  char found[6];
  in.read(found, 6);
  require(in.good() && std::memcmp(found, magic, 6) == 0,
          path + ": not a recognized checkpoint (bad magic)");
  std::uint8_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 1);
  require(in.good() && version == kVersion,
          path + ": unsupported checkpoint version " + std::to_string(version));
}

}  // namespace

void save_model(const std::string& path, const encoder::ModelParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot write model checkpoint: " + path);
  out.write(kModelMagic, 6);
  out.put(static_cast<char>(kVersion));

  std::uint64_t blocks = 2;  // word vocab + char vocab
  params.for_each_block([&](const std::string&, const Eigen::MatrixXd&) { ++blocks; });
  write_u64(out, blocks);

  out.put(static_cast<char>(BlockKind::StringList));
  write_string(out, "word_vocab");
  write_u64(out, params.word_table.words.size());
  for (const std::string& word : params.word_table.words) write_string(out, word);

  out.put(static_cast<char>(BlockKind::Matrix));
  write_string(out, "char_vocab");
  Eigen::MatrixXd chars(1, static_cast<Eigen::Index>(params.char_vocab.size()));
  for (std::size_t i = 0; i < params.char_vocab.size(); ++i)
    chars(0, static_cast<Eigen::Index>(i)) = params.char_vocab[i];
  write_matrix(out, chars);

  params.for_each_block([&](const std::string& name, const Eigen::MatrixXd& m) {
    out.put(static_cast<char>(BlockKind::Matrix));
    write_string(out, name);
    write_matrix(out, m);
  });
  require(out.good(), "model checkpoint write failed: " + path);
}

encoder::ModelParams load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open model checkpoint: " + path);
  check_header(in, kModelMagic, path);

  const std::uint64_t blocks = read_u64(in);
  std::map<std::string, Eigen::MatrixXd> matrices;
  std::vector<std::string> word_vocab;
  for (std::uint64_t b = 0; b < blocks; ++b) {
    char kind = 0;
    in.read(&kind, 1);
    require(in.good(), path + ": truncated block header");
    const std::string name = read_string(in);
    if (kind == static_cast<char>(BlockKind::StringList)) {
      require(name == "word_vocab", path + ": unexpected string block '" + name + "'");
      const std::uint64_t count = read_u64(in);
      word_vocab.reserve(count);
      for (std::uint64_t i = 0; i < count; ++i) word_vocab.push_back(read_string(in));
    } else if (kind == static_cast<char>(BlockKind::Matrix)) {
      matrices.emplace(name, read_matrix(in));
    } else {
      throw std::runtime_error(path + ": unknown block kind");
    }
  }

  auto take = [&](const std::string& name) {
    const auto it = matrices.find(name);
    require(it != matrices.end(), path + ": missing parameter block '" + name + "'");
    return it->second;
  };

  encoder::ModelParams params;
  params.word_table.vectors = take("word_table");
  require(static_cast<Eigen::Index>(word_vocab.size()) == params.word_table.vectors.rows(),
          path + ": word vocabulary does not match the word table");
  params.word_table.words = word_vocab;
  for (std::size_t i = 0; i < word_vocab.size(); ++i)
    params.word_table.index.emplace(word_vocab[i], static_cast<int>(i));
  const auto find_special = [&](const char* word) {
    const auto it = params.word_table.index.find(word);
    require(it != params.word_table.index.end(),
            path + ": word table lacks reserved entry " + std::string(word));
    return it->second;
  };
  params.word_table.unk = find_special(encoder::kUnkWord);
  params.word_table.bos = find_special(encoder::kBosWord);
  params.word_table.eos = find_special(encoder::kEosWord);

  const Eigen::MatrixXd chars = take("char_vocab");
  params.char_vocab.clear();
  for (Eigen::Index i = 0; i < chars.cols(); ++i)
    params.char_vocab.push_back(static_cast<int>(chars(0, i)));
  params.rebuild_char_index();

  params.char_table = take("char_table");
  params.cap_table = take("cap_table");
  params.pos_table = take("pos_table");
  params.char_fwd = {take("char_fwd.w_in"), take("char_fwd.w_rec"), take("char_fwd.bias")};
  params.char_bwd = {take("char_bwd.w_in"), take("char_bwd.w_rec"), take("char_bwd.bias")};
  params.token_fwd = {take("token_fwd.w_in"), take("token_fwd.w_rec"), take("token_fwd.bias")};
  params.token_bwd = {take("token_bwd.w_in"), take("token_bwd.w_rec"), take("token_bwd.bias")};
  params.proj_weight = take("proj_weight");
  params.proj_bias = take("proj_bias");
  params.transitions = take("transitions");
  params.graph_mix = take("graph_mix");

  params.dims.word = static_cast<int>(params.word_table.vectors.cols());
  params.dims.char_emb = static_cast<int>(params.char_table.cols());
  params.dims.char_hidden = static_cast<int>(params.char_fwd.w_rec.cols());
  params.dims.feat = static_cast<int>(params.cap_table.cols());
  params.dims.token_hidden = static_cast<int>(params.token_fwd.w_rec.cols());
  return params;
}

void save_graph(const std::string& path, const graph::PropagationGraph& graph) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot write graph checkpoint: " + path);
  out.write(kGraphMagic, 6);
  out.put(static_cast<char>(kVersion));
  write_u64(out, static_cast<std::uint64_t>(graph.size()));
  write_u64(out, graph.topology.edges.size());
  write_f64(out, graph.topology.sigma);
  for (const graph::Edge& edge : graph.topology.edges) {
    write_u64(out, static_cast<std::uint64_t>(edge.u));
    write_u64(out, static_cast<std::uint64_t>(edge.v));
    write_f64(out, edge.distance);
  }
  for (int u = 0; u < graph.size(); ++u) {
    const auto uu = static_cast<std::size_t>(u);
    write_u64(out, static_cast<std::uint64_t>(graph.refs[uu].sentence));
    write_u64(out, static_cast<std::uint64_t>(graph.refs[uu].position));
    write_u64(out, static_cast<std::uint64_t>(graph.gold[uu] + 1));  // 0 = unlabeled
    for (int y = 0; y < kNumLabels; ++y) write_f64(out, graph.p_tilde(u, y));
    for (int y = 0; y < kNumLabels; ++y)
      write_f64(out, graph.q.rows() > u ? graph.q(u, y) : 0.0);
  }
  require(out.good(), "graph checkpoint write failed: " + path);
}

graph::PropagationGraph load_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open graph checkpoint: " + path);
  check_header(in, kGraphMagic, path);

  graph::PropagationGraph graph;
  const auto nodes = static_cast<int>(read_u64(in));
  const std::uint64_t edges = read_u64(in);
  graph.topology.sigma = read_f64(in);
  graph.topology.edges.reserve(edges);
  for (std::uint64_t e = 0; e < edges; ++e) {
    graph::Edge edge;
    edge.u = static_cast<int>(read_u64(in));
    edge.v = static_cast<int>(read_u64(in));
    edge.distance = read_f64(in);
    graph.topology.edges.push_back(edge);
  }
  graph.refs.resize(static_cast<std::size_t>(nodes));
  graph.gold.resize(static_cast<std::size_t>(nodes));
  graph.p_tilde.resize(nodes, kNumLabels);
  graph.q.resize(nodes, kNumLabels);
  for (int u = 0; u < nodes; ++u) {
    const auto uu = static_cast<std::size_t>(u);
    graph.refs[uu].sentence = static_cast<int>(read_u64(in));
    graph.refs[uu].position = static_cast<int>(read_u64(in));
    graph.gold[uu] = static_cast<int>(read_u64(in)) - 1;
    for (int y = 0; y < kNumLabels; ++y) graph.p_tilde(u, y) = read_f64(in);
    for (int y = 0; y < kNumLabels; ++y) graph.q(u, y) = read_f64(in);
  }
  graph.topology.rebuild_neighbors(nodes);
  return graph;
}

}  // namespace scitag::io
