#pragma once

#include <Eigen/Dense>
#include <vector>

#include "scitag/corpus.hpp"
#include "scitag/encoder.hpp"

namespace scitag::graph {

using Eigen::MatrixXd;

// Raw node feature width: embeddings of the 5-gram around the token, the
// closest verb's embedding, and POS/capitalization one-hots.
int raw_feature_width(int embedding_dim);

// One row per token occurrence, sentences traversed in order.
MatrixXd node_features(const std::vector<corpus::LabeledSentence>& sentences,
                       const encoder::EmbeddingTable& embeddings);

struct PcaModel {
  Eigen::RowVectorXd mean;
  MatrixXd basis;              // D x out_dim, columns in descending eigenvalue order
  Eigen::VectorXd eigenvalues; // full spectrum, descending
};

// Mean-centers and keeps the top principal directions; each direction is
// oriented so its largest-magnitude coordinate is positive.
PcaModel pca_fit(const Eigen::Ref<const MatrixXd>& rows, int out_dim);
MatrixXd pca_project(const PcaModel& model, const Eigen::Ref<const MatrixXd>& rows);

struct Edge {
  int u = 0, v = 0;
  double distance = 0.0;
};

struct KnnGraph {
  std::vector<Edge> edges;  // undirected, u < v
  double sigma = 0.0;       // similarity bandwidth: mean stored k-NN distance
  // Adjacency with Gaussian similarities exp(-d^2 / sigma^2).
  std::vector<std::vector<std::pair<int, double>>> neighbors;

  void rebuild_neighbors(int node_count);
};

// Exact Euclidean k-NN, ties toward the lower node index; an edge exists when
// either endpoint selects the other.
KnnGraph build_knn_graph(const Eigen::Ref<const MatrixXd>& points, int k, int threads = 1,
                         double sigma_override = 0.0);

struct NodeRef {
  int sentence = 0;  // ordinal in the corpus scope the graph was built over
  int position = 0;
};

struct PropagationGraph {
  std::vector<NodeRef> refs;
  std::vector<int> gold;  // label index, or -1 for unlabeled nodes
  MatrixXd p_tilde;       // N x 13 CRF marginals
  MatrixXd q;             // N x 13 propagated distributions
  KnnGraph topology;

  int size() const { return static_cast<int>(refs.size()); }
};

struct PropagationConfig {
  double mu = 1e-6;
  double nu = 1e-5;
  int k = 10;
  int max_iters = 100;
  double tol = 1e-6;
  double sigma_override = 0.0;  // 0: mean k-NN distance rule
  bool jacobi = false;          // parallel-style sweep with a global step search
};

struct PropagationResult {
  std::vector<double> objective;  // initial value plus one entry per sweep
  bool converged = false;
};

// Prior-regularized measure propagation:
//   C(q) = sum_{u labeled} KL(r_u||q_u)
//        + mu * sum_u sum_{v in N(u)} s_uv KL(q_u||q_v)
//        + nu * sum_u KL(q_u||p~_u)
// minimized by exponentiated-gradient sweeps; the objective never increases.
PropagationResult propagate(PropagationGraph& graph, const PropagationConfig& config);

double propagation_objective(const PropagationGraph& graph, const MatrixXd& q, double mu,
                             double nu);

}  // namespace scitag::graph
