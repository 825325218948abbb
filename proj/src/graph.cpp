#include "scitag/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "scitag/util.hpp"

namespace scitag::graph {

namespace {

constexpr double kProbFloor = 1e-12;
constexpr double kQFloor = 1e-30;

// Kahan-compensated accumulator; the propagation monotonicity contract is
// tighter than plain double summation noise.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double value) {
    const double y = value - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

Eigen::RowVectorXd floored_simplex(const Eigen::RowVectorXd& row, double floor) {
  Eigen::RowVectorXd out = row.cwiseMax(floor);
  out /= out.sum();
  return out;
}

double kl(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] <= 0.0) continue;
    total += a[i] * (std::log(a[i]) - std::log(b[i]));
  }
  return total;
}

}  // namespace

int raw_feature_width(int embedding_dim) {
  return 6 * embedding_dim + corpus::kNumPosTags + corpus::kNumCapClasses;
}

MatrixXd node_features(const std::vector<corpus::LabeledSentence>& sentences,
                       const encoder::EmbeddingTable& embeddings) {
  const int d = embeddings.dim();
  const int width = raw_feature_width(d);
  Eigen::Index total = 0;
  for (const auto& sentence : sentences) total += sentence.size();

  MatrixXd features(total, width);
  Eigen::Index row = 0;
  for (const auto& sentence : sentences) {
    const int n = sentence.size();
    for (int t = 0; t < n; ++t) {
      auto out = features.row(row++);
      // 5-gram window; BOS/EOS vectors pad beyond the sentence boundary.
      for (int offset = -2; offset <= 2; ++offset) {
        const int slot = offset + 2;
        const int pos = t + offset;
        int emb_row;
        if (pos < 0) emb_row = embeddings.bos;
        else if (pos >= n) emb_row = embeddings.eos;
        else emb_row = embeddings.lookup(sentence.tokens[static_cast<std::size_t>(pos)].surface);
        out.segment(slot * d, d) = embeddings.vectors.row(emb_row);
      }
      // Closest verb by token distance; ties prefer the preceding one.
      int verb = -1;
      for (int dist = 0; dist < n && verb < 0; ++dist) {
        if (t - dist >= 0 && corpus::pos_is_verb(sentence.tokens[static_cast<std::size_t>(t - dist)].pos))
          verb = t - dist;
        else if (t + dist < n && corpus::pos_is_verb(sentence.tokens[static_cast<std::size_t>(t + dist)].pos))
          verb = t + dist;
      }
      if (verb >= 0) {
        out.segment(5 * d, d) = embeddings.vectors.row(
            embeddings.lookup(sentence.tokens[static_cast<std::size_t>(verb)].surface));
      } else {
        out.segment(5 * d, d).setZero();
      }
      out.segment(6 * d, corpus::kNumPosTags).setZero();
      out[6 * d + sentence.tokens[static_cast<std::size_t>(t)].pos] = 1.0;
      out.segment(6 * d + corpus::kNumPosTags, corpus::kNumCapClasses).setZero();
      out[6 * d + corpus::kNumPosTags +
          static_cast<int>(sentence.tokens[static_cast<std::size_t>(t)].cap)] = 1.0;
    }
  }
  return features;
}

PcaModel pca_fit(const Eigen::Ref<const MatrixXd>& rows, int out_dim) {
  const Eigen::Index n = rows.rows();
  const Eigen::Index dim = rows.cols();
  require(out_dim >= 1 && out_dim <= dim, "pca_fit: output dimension out of range");
  require(n >= out_dim, "pca_fit: fewer rows than the requested dimension");

  PcaModel model;
  model.mean = rows.colwise().mean();
  const MatrixXd centered = rows.rowwise() - model.mean;
  const MatrixXd covariance = centered.adjoint() * centered / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(covariance);
  require(solver.info() == Eigen::Success, "pca_fit: eigendecomposition failed");

  // Eigen reports ascending eigenvalues; flip to descending.
  model.eigenvalues = solver.eigenvalues().reverse();
  model.basis.resize(dim, out_dim);
  for (int c = 0; c < out_dim; ++c) {
    Eigen::VectorXd direction = solver.eigenvectors().col(dim - 1 - c);
    Eigen::Index argmax = 0;
    direction.cwiseAbs().maxCoeff(&argmax);
    if (direction[argmax] < 0) direction = -direction;
    model.basis.col(c) = direction;
  }
  return model;
}

MatrixXd pca_project(const PcaModel& model, const Eigen::Ref<const MatrixXd>& rows) {
  require(rows.cols() == model.basis.rows(), "pca_project: dimension mismatch");
  return (rows.rowwise() - model.mean) * model.basis;
}

void KnnGraph::rebuild_neighbors(int node_count) {
  neighbors.assign(static_cast<std::size_t>(node_count), {});
  for (const Edge& edge : edges) {
    const double sim = sigma > 0.0
                           ? std::exp(-(edge.distance * edge.distance) / (sigma * sigma))
                           : (edge.distance == 0.0 ? 1.0 : 0.0);
    neighbors[static_cast<std::size_t>(edge.u)].emplace_back(edge.v, sim);
    neighbors[static_cast<std::size_t>(edge.v)].emplace_back(edge.u, sim);
  }
  for (auto& list : neighbors) std::sort(list.begin(), list.end());
}

KnnGraph build_knn_graph(const Eigen::Ref<const MatrixXd>& points, int k, int threads,
                         double sigma_override) {
  const int n = static_cast<int>(points.rows());
  require(k >= 1, "build_knn_graph: k must be at least 1");
  require(k < n, "build_knn_graph: k must be smaller than the node count");

  std::vector<std::vector<std::pair<double, int>>> nearest(static_cast<std::size_t>(n));
  auto compute_rows = [&](int begin, int end) {
    std::vector<std::pair<double, int>> candidates;
    for (int u = begin; u < end; ++u) {
      candidates.clear();
      candidates.reserve(static_cast<std::size_t>(n) - 1);
      for (int v = 0; v < n; ++v) {
        if (v == u) continue;
        candidates.emplace_back((points.row(u) - points.row(v)).squaredNorm(), v);
      }
      std::partial_sort(candidates.begin(), candidates.begin() + k, candidates.end());
      nearest[static_cast<std::size_t>(u)].assign(candidates.begin(), candidates.begin() + k);
    }
  };

  if (threads <= 1 || n < 2 * threads) {
    compute_rows(0, n);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int begin = t * chunk;
      const int end = std::min(n, begin + chunk);
      if (begin < end) pool.emplace_back(compute_rows, begin, end);
    }
    for (auto& worker : pool) worker.join();
  }

  KnnGraph graph;
  double distance_sum = 0.0;
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(k));
  for (int u = 0; u < n; ++u) {
    for (const auto& [d2, v] : nearest[static_cast<std::size_t>(u)]) {
      distance_sum += std::sqrt(d2);
      pairs.emplace_back(std::min(u, v), std::max(u, v));
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  for (const auto& [u, v] : pairs) {
    graph.edges.push_back({u, v, std::sqrt((points.row(u) - points.row(v)).squaredNorm())});
  }
  graph.sigma = sigma_override > 0.0
                    ? sigma_override
                    : distance_sum / (static_cast<double>(n) * static_cast<double>(k));
  graph.rebuild_neighbors(n);
  return graph;
}

double propagation_objective(const PropagationGraph& graph, const MatrixXd& q, double mu,
                             double nu) {
  KahanSum total;
  const int n = graph.size();
  for (int u = 0; u < n; ++u) {
    if (graph.gold[static_cast<std::size_t>(u)] >= 0) {
      // Point-mass empirical distribution: KL(r||q) = -log q[gold].
      total.add(-std::log(q(u, graph.gold[static_cast<std::size_t>(u)])));
    }
    for (const auto& [v, sim] : graph.topology.neighbors[static_cast<std::size_t>(u)]) {
      total.add(mu * sim * kl(q.row(u), q.row(v)));
    }
    total.add(nu * kl(q.row(u), graph.p_tilde.row(u)));
  }
  return total.sum;
}

namespace {

struct Propagator {
  PropagationGraph& graph;
  const PropagationConfig& config;
  MatrixXd q;

  double local_objective(int u, const Eigen::RowVectorXd& row) const {
    double total = 0.0;
    const int gold = graph.gold[static_cast<std::size_t>(u)];
    if (gold >= 0) total += -std::log(row[gold]);
    for (const auto& [v, sim] : graph.topology.neighbors[static_cast<std::size_t>(u)]) {
      total += config.mu * sim * (kl(row, q.row(v)) + kl(q.row(v), row));
    }
    total += config.nu * kl(row, graph.p_tilde.row(u));
    return total;
  }

  Eigen::RowVectorXd local_gradient(int u) const {
    const Eigen::RowVectorXd row = q.row(u);
    Eigen::RowVectorXd grad = Eigen::RowVectorXd::Zero(kNumLabels);
    const int gold = graph.gold[static_cast<std::size_t>(u)];
    if (gold >= 0) grad[gold] -= 1.0 / row[gold];
    for (const auto& [v, sim] : graph.topology.neighbors[static_cast<std::size_t>(u)]) {
      for (int y = 0; y < kNumLabels; ++y) {
        grad[y] += config.mu * sim *
                   (std::log(row[y]) - std::log(q(v, y)) + 1.0 - q(v, y) / row[y]);
      }
    }
    for (int y = 0; y < kNumLabels; ++y) {
      grad[y] += config.nu * (std::log(row[y]) - std::log(graph.p_tilde(u, y)) + 1.0);
    }
    return grad;
  }

  Eigen::RowVectorXd exponentiated_step(int u, double step) const {
    const Eigen::RowVectorXd grad = local_gradient(u);
    const double shift = grad.minCoeff();
    Eigen::RowVectorXd candidate =
        (q.row(u).array() * (-step * (grad.array() - shift)).exp()).matrix();
    return floored_simplex(candidate, kQFloor);
  }

  // Returns true when the node moved. Acceptance is strict, so fixed points
  // stay put bit-for-bit and the recorded objective never increases.
  bool update_node(int u) {
    const double before = local_objective(u, q.row(u));
    for (double step = 0.5; step > 1e-12; step *= 0.5) {
      const Eigen::RowVectorXd candidate = exponentiated_step(u, step);
      if (local_objective(u, candidate) < before) {
        q.row(u) = candidate;
        return true;
      }
    }
    return false;
  }

  // Jacobi-style sweep: all candidates from the current iterate, then a
  // global step search that keeps the objective non-increasing.
  bool jacobi_sweep() {
    MatrixXd candidate(q.rows(), q.cols());
    for (int u = 0; u < graph.size(); ++u) candidate.row(u) = exponentiated_step(u, 0.5);
    const double before = propagation_objective(graph, q, config.mu, config.nu);
    for (double t = 1.0; t > 1e-12; t *= 0.5) {
      MatrixXd blended = (1.0 - t) * q + t * candidate;
      if (propagation_objective(graph, blended, config.mu, config.nu) < before) {
        q = std::move(blended);
        return true;
      }
    }
    return false;
  }
};

}  // namespace

PropagationResult propagate(PropagationGraph& graph, const PropagationConfig& config) {
  const int n = graph.size();
  require(config.mu >= 0.0 && config.nu >= 0.0, "propagate: mu and nu must be non-negative");
  require(graph.p_tilde.rows() == n && graph.p_tilde.cols() == kNumLabels,
          "propagate: p_tilde must be N x 13");
  require(static_cast<int>(graph.gold.size()) == n, "propagate: gold vector size mismatch");
  require(static_cast<int>(graph.topology.neighbors.size()) == n,
          "propagate: adjacency size mismatch");

  // Floor and renormalize the prior before use; q starts at the prior.
  for (int u = 0; u < n; ++u)
    graph.p_tilde.row(u) = floored_simplex(graph.p_tilde.row(u), kProbFloor);

  Propagator state{graph, config, graph.p_tilde};
  PropagationResult result;
  result.objective.push_back(propagation_objective(graph, state.q, config.mu, config.nu));

  for (int iter = 0; iter < config.max_iters; ++iter) {
    bool moved = false;
    if (config.jacobi) {
      moved = state.jacobi_sweep();
    } else {
      for (int u = 0; u < n; ++u) moved = state.update_node(u) || moved;
    }
    const double value = propagation_objective(graph, state.q, config.mu, config.nu);
    const double previous = result.objective.back();
    result.objective.push_back(value);
    if (!moved || previous - value < config.tol * std::max(std::abs(previous), 1.0)) {
      result.converged = true;
      break;
    }
  }
  graph.q = std::move(state.q);
  return result;
}

}  // namespace scitag::graph
