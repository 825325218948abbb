#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "scitag/graph.hpp"
#include "scitag/serialize.hpp"

using namespace scitag;
using Eigen::MatrixXd;

TEST_CASE("model checkpoint: save, load, re-save is byte-identical") {
  const auto corpus = helpers::toy_corpus();
  std::mt19937_64 rng(3);
  const encoder::ModelParams params =
      helpers::make_model({&corpus}, helpers::tiny_dims(), rng);

  const auto dir = helpers::scratch_dir("model_io");
  const std::string first = (dir / "model.bin").string();
  const std::string second = (dir / "model2.bin").string();
  io::save_model(first, params);
  const encoder::ModelParams loaded = io::load_model(first);
  io::save_model(second, loaded);
  CHECK(helpers::read_file(first) == helpers::read_file(second));

  // loaded model behaves identically
  CHECK(loaded.dims.word == params.dims.word);
  CHECK(loaded.dims.token_hidden == params.dims.token_hidden);
  CHECK(loaded.word_table.lookup("zzz") == params.word_table.unk);
  const MatrixXd a = encoder::emissions(params, corpus[0]);
  const MatrixXd b = encoder::emissions(loaded, corpus[0]);
  CHECK((a - b).norm() == 0.0);
}

TEST_CASE("model checkpoint rejects garbage") {
  const auto dir = helpers::scratch_dir("model_bad");
  helpers::write_file(dir / "junk.bin", "not a checkpoint");
  CHECK_THROWS_WITH_AS(io::load_model((dir / "junk.bin").string()),
                       doctest::Contains("magic"), std::runtime_error);
  CHECK_THROWS(io::load_model((dir / "missing.bin").string()));
}

TEST_CASE("graph checkpoint: save, load, re-save is byte-identical") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd points(12, 5);
  for (int r = 0; r < 12; ++r)
    for (int c = 0; c < 5; ++c) points(r, c) = normal(rng);

  graph::PropagationGraph prop;
  prop.topology = graph::build_knn_graph(points, 3);
  prop.refs.resize(12);
  prop.gold.assign(12, -1);
  for (int u = 0; u < 12; ++u) prop.refs[static_cast<std::size_t>(u)] = {u / 4, u % 4};
  prop.gold[0] = 5;
  prop.gold[7] = 2;
  std::uniform_real_distribution<double> uniform(0.01, 1.0);
  prop.p_tilde.resize(12, kNumLabels);
  for (int u = 0; u < 12; ++u) {
    for (int y = 0; y < kNumLabels; ++y) prop.p_tilde(u, y) = uniform(rng);
    prop.p_tilde.row(u) /= prop.p_tilde.row(u).sum();
  }
  graph::PropagationConfig config;
  config.max_iters = 15;
  graph::propagate(prop, config);

  const auto dir = helpers::scratch_dir("graph_io");
  const std::string first = (dir / "graph.bin").string();
  const std::string second = (dir / "graph2.bin").string();
  io::save_graph(first, prop);
  const graph::PropagationGraph loaded = io::load_graph(first);
  io::save_graph(second, loaded);
  CHECK(helpers::read_file(first) == helpers::read_file(second));

  CHECK(loaded.size() == prop.size());
  CHECK(loaded.topology.edges.size() == prop.topology.edges.size());
  CHECK(loaded.topology.sigma == prop.topology.sigma);
  CHECK((loaded.q - prop.q).norm() == 0.0);
  CHECK((loaded.p_tilde - prop.p_tilde).norm() == 0.0);
  CHECK(loaded.gold == prop.gold);
  CHECK(loaded.refs[5].sentence == prop.refs[5].sentence);
  // adjacency with similarities is rebuilt on load
  REQUIRE(loaded.topology.neighbors.size() == prop.topology.neighbors.size());
  for (std::size_t u = 0; u < loaded.topology.neighbors.size(); ++u) {
    REQUIRE(loaded.topology.neighbors[u].size() == prop.topology.neighbors[u].size());
    for (std::size_t i = 0; i < loaded.topology.neighbors[u].size(); ++i) {
      CHECK(loaded.topology.neighbors[u][i].first == prop.topology.neighbors[u][i].first);
      CHECK(loaded.topology.neighbors[u][i].second == prop.topology.neighbors[u][i].second);
    }
  }
}
