#include "scitag/crf.hpp"

#include <cmath>
#include <limits>

#include "scitag/util.hpp"

namespace scitag::crf {

namespace {

constexpr std::uint16_t kFullMask = (1u << kNumLabels) - 1u;

double log_sum_exp(const Eigen::VectorXd& values) {
  double max = kNegInf;
  for (int i = 0; i < values.size(); ++i) {
    if (values[i] > kNegInfCutoff && values[i] > max) max = values[i];
  }
  if (max <= kNegInfCutoff) return kNegInf;
  double sum = 0.0;
  for (int i = 0; i < values.size(); ++i) {
    if (values[i] > kNegInfCutoff) sum += std::exp(values[i] - max);
  }
  return max + std::log(sum);
}

void check_shapes(const EmissionRef& emissions, const TransitionRef& transitions) {
  require(emissions.cols() == kNumLabels, "crf: emission matrix must have 13 columns");
  require(transitions.rows() == kNumTags && transitions.cols() == kNumTags,
          "crf: transition matrix must be 15x15");
}

// Forward recursion, optionally restricted to a lattice. alpha(t, j) is the
// log-mass of partial paths ending in label j at position t.
MatrixXd forward_scores(const EmissionRef& emissions, const TransitionRef& transitions,
                        const TagLattice* lattice) {
  const int n = static_cast<int>(emissions.rows());
  MatrixXd alpha(n, kNumLabels);
  Eigen::VectorXd work(kNumLabels);
  for (int t = 0; t < n; ++t) {
    const std::uint16_t mask =
        lattice ? lattice->allowed[static_cast<std::size_t>(t)] : kFullMask;
    for (int j = 0; j < kNumLabels; ++j) {
      if (!((mask >> j) & 1u)) {
        alpha(t, j) = kNegInf;
        continue;
      }
      if (t == 0) {
        const double start = transitions(kStartTag, j);
        alpha(t, j) = start <= kNegInfCutoff ? kNegInf : start + emissions(t, j);
        continue;
      }
      for (int i = 0; i < kNumLabels; ++i) {
        const double prev = alpha(t - 1, i);
        const double step = transitions(i, j);
        work[i] = (prev <= kNegInfCutoff || step <= kNegInfCutoff) ? kNegInf : prev + step;
      }
      const double mass = log_sum_exp(work);
      alpha(t, j) = mass <= kNegInfCutoff ? kNegInf : mass + emissions(t, j);
    }
  }
  return alpha;
}

// Backward recursion; beta(t, i) is the log-mass of completions from label i
// at position t through STOP.
MatrixXd backward_scores(const EmissionRef& emissions, const TransitionRef& transitions,
                         const TagLattice* lattice) {
  const int n = static_cast<int>(emissions.rows());
  MatrixXd beta(n, kNumLabels);
  Eigen::VectorXd work(kNumLabels);
  for (int t = n - 1; t >= 0; --t) {
    const std::uint16_t mask =
        lattice ? lattice->allowed[static_cast<std::size_t>(t)] : kFullMask;
    for (int i = 0; i < kNumLabels; ++i) {
      if (!((mask >> i) & 1u)) {
        beta(t, i) = kNegInf;
        continue;
      }
      if (t == n - 1) {
        beta(t, i) = transitions(i, kStopTag) <= kNegInfCutoff ? kNegInf
                                                               : transitions(i, kStopTag);
        continue;
      }
      for (int j = 0; j < kNumLabels; ++j) {
        const double next = beta(t + 1, j);
        const double step = transitions(i, j);
        work[j] = (next <= kNegInfCutoff || step <= kNegInfCutoff)
                      ? kNegInf
                      : step + emissions(t + 1, j) + next;
      }
      beta(t, i) = log_sum_exp(work);
    }
  }
  return beta;
}

double terminal_log_mass(const MatrixXd& alpha, const TransitionRef& transitions) {
  const int n = static_cast<int>(alpha.rows());
  Eigen::VectorXd work(kNumLabels);
  for (int j = 0; j < kNumLabels; ++j) {
    const double tail = transitions(j, kStopTag);
    work[j] = (alpha(n - 1, j) <= kNegInfCutoff || tail <= kNegInfCutoff)
                  ? kNegInf
                  : alpha(n - 1, j) + tail;
  }
  return log_sum_exp(work);
}

double log_mass(const EmissionRef& emissions, const TransitionRef& transitions,
                const TagLattice* lattice) {
  if (emissions.rows() == 0) return transitions(kStartTag, kStopTag);
  const MatrixXd alpha = forward_scores(emissions, transitions, lattice);
  return terminal_log_mass(alpha, transitions);
}

}  // namespace

TagLattice TagLattice::full(int n) {
  TagLattice lattice;
  lattice.allowed.assign(static_cast<std::size_t>(n), kFullMask);
  return lattice;
}

TagLattice TagLattice::singletons(const std::vector<int>& path) {
  TagLattice lattice;
  lattice.allowed.reserve(path.size());
  for (int label : path) {
    require(label >= 0 && label < kNumLabels, "TagLattice: label out of range");
    lattice.allowed.push_back(static_cast<std::uint16_t>(1u << label));
  }
  return lattice;
}

void TagLattice::validate() const {
  for (std::uint16_t mask : allowed) {
    require(mask != 0, "TagLattice: empty allowed set");
    require((mask & ~kFullMask) == 0, "TagLattice: bit beyond label inventory");
  }
}

MatrixXd structural_transitions() {
  MatrixXd transitions = MatrixXd::Zero(kNumTags, kNumTags);
  clamp_structural(transitions);
  return transitions;
}

void clamp_structural(MatrixXd& transitions) {
  require(transitions.rows() == kNumTags && transitions.cols() == kNumTags,
          "clamp_structural: transition matrix must be 15x15");
  for (int i = 0; i < kNumTags; ++i)
    for (int j = 0; j < kNumTags; ++j)
      if (!legal_transition(i, j)) transitions(i, j) = kNegInf;
}

double score_path(const EmissionRef& emissions, const TransitionRef& transitions,
                  const std::vector<int>& path) {
  check_shapes(emissions, transitions);
  require(static_cast<Eigen::Index>(path.size()) == emissions.rows(),
          "score_path: path length does not match emission rows");
  double score = 0.0;
  int prev = kStartTag;
  for (std::size_t t = 0; t < path.size(); ++t) {
    const int label = path[t];
    require(label >= 0 && label < kNumLabels, "score_path: label out of range");
    score += transitions(prev, label) + emissions(static_cast<Eigen::Index>(t), label);
    prev = label;
  }
  score += transitions(prev, kStopTag);
  return score;
}

double log_partition(const EmissionRef& emissions, const TransitionRef& transitions) {
  check_shapes(emissions, transitions);
  return log_mass(emissions, transitions, nullptr);
}

double sequence_log_likelihood(const EmissionRef& emissions, const TransitionRef& transitions,
                               const std::vector<int>& path) {
  return score_path(emissions, transitions, path) - log_partition(emissions, transitions);
}

MatrixXd token_marginals(const EmissionRef& emissions, const TransitionRef& transitions) {
  check_shapes(emissions, transitions);
  const int n = static_cast<int>(emissions.rows());
  MatrixXd marginals = MatrixXd::Zero(n, kNumLabels);
  if (n == 0) return marginals;
  const MatrixXd alpha = forward_scores(emissions, transitions, nullptr);
  const MatrixXd beta = backward_scores(emissions, transitions, nullptr);
  const double log_z = terminal_log_mass(alpha, transitions);
  for (int t = 0; t < n; ++t) {
    for (int j = 0; j < kNumLabels; ++j) {
      if (alpha(t, j) <= kNegInfCutoff || beta(t, j) <= kNegInfCutoff) continue;
      marginals(t, j) = std::exp(alpha(t, j) + beta(t, j) - log_z);
    }
  }
  return marginals;
}

std::pair<std::vector<int>, double> viterbi(const EmissionRef& emissions,
                                            const TransitionRef& transitions) {
  check_shapes(emissions, transitions);
  const int n = static_cast<int>(emissions.rows());
  if (n == 0) return {{}, transitions(kStartTag, kStopTag)};

  MatrixXd best(n, kNumLabels);
  Eigen::MatrixXi back(n, kNumLabels);
  for (int j = 0; j < kNumLabels; ++j) {
    const double start = transitions(kStartTag, j);
    best(0, j) = start <= kNegInfCutoff ? kNegInf : start + emissions(0, j);
    back(0, j) = -1;
  }
  for (int t = 1; t < n; ++t) {
    for (int j = 0; j < kNumLabels; ++j) {
      double top = kNegInf;
      int arg = -1;
      for (int i = 0; i < kNumLabels; ++i) {
        if (best(t - 1, i) <= kNegInfCutoff || transitions(i, j) <= kNegInfCutoff) continue;
        const double candidate = best(t - 1, i) + transitions(i, j);
        if (candidate > top) {  // strict: ties keep the lowest label index
          top = candidate;
          arg = i;
        }
      }
      best(t, j) = (arg < 0) ? kNegInf : top + emissions(t, j);
      back(t, j) = arg;
    }
  }
  double top = kNegInf;
  int arg = -1;
  for (int j = 0; j < kNumLabels; ++j) {
    if (best(n - 1, j) <= kNegInfCutoff || transitions(j, kStopTag) <= kNegInfCutoff) continue;
    const double candidate = best(n - 1, j) + transitions(j, kStopTag);
    if (candidate > top) {
      top = candidate;
      arg = j;
    }
  }
  require(arg >= 0, "viterbi: no structurally legal path");
  std::vector<int> path(static_cast<std::size_t>(n));
  for (int t = n - 1; t >= 0; --t) {
    path[static_cast<std::size_t>(t)] = arg;
    arg = back(t, arg);
  }
  return {path, top};
}

double lattice_log_likelihood(const EmissionRef& emissions, const TransitionRef& transitions,
                              const TagLattice& lattice) {
  check_shapes(emissions, transitions);
  require(lattice.size() == emissions.rows(), "lattice_log_likelihood: lattice length mismatch");
  lattice.validate();
  const double numerator = log_mass(emissions, transitions, &lattice);
  const double denominator = log_mass(emissions, transitions, nullptr);
  return numerator - denominator;
}

bool lattice_feasible(const TagLattice& lattice, const TransitionRef& transitions) {
  if (lattice.size() == 0) return transitions(kStartTag, kStopTag) > kNegInfCutoff;
  std::uint16_t reachable = 0;
  for (int j = 0; j < kNumLabels; ++j) {
    if (lattice.allows(0, j) && transitions(kStartTag, j) > kNegInfCutoff)
      reachable |= static_cast<std::uint16_t>(1u << j);
  }
  for (int t = 1; t < lattice.size(); ++t) {
    std::uint16_t next = 0;
    for (int j = 0; j < kNumLabels; ++j) {
      if (!lattice.allows(t, j)) continue;
      for (int i = 0; i < kNumLabels; ++i) {
        if (((reachable >> i) & 1u) && transitions(i, j) > kNegInfCutoff) {
          next |= static_cast<std::uint16_t>(1u << j);
          break;
        }
      }
    }
    reachable = next;
    if (reachable == 0) return false;
  }
  for (int i = 0; i < kNumLabels; ++i) {
    if (((reachable >> i) & 1u) && transitions(i, kStopTag) > kNegInfCutoff) return true;
  }
  return false;
}

PosteriorStats posterior_stats(const EmissionRef& emissions, const TransitionRef& transitions,
                               const TagLattice* lattice) {
  check_shapes(emissions, transitions);
  const int n = static_cast<int>(emissions.rows());
  PosteriorStats stats;
  stats.unary = MatrixXd::Zero(n, kNumLabels);
  stats.transition = MatrixXd::Zero(kNumTags, kNumTags);
  if (n == 0) {
    stats.log_z = transitions(kStartTag, kStopTag);
    return stats;
  }
  const MatrixXd alpha = forward_scores(emissions, transitions, lattice);
  const MatrixXd beta = backward_scores(emissions, transitions, lattice);
  stats.log_z = terminal_log_mass(alpha, transitions);
  require(stats.log_z > kNegInfCutoff, "posterior_stats: distribution has no support");

  for (int t = 0; t < n; ++t) {
    for (int j = 0; j < kNumLabels; ++j) {
      if (alpha(t, j) <= kNegInfCutoff || beta(t, j) <= kNegInfCutoff) continue;
      stats.unary(t, j) = std::exp(alpha(t, j) + beta(t, j) - stats.log_z);
    }
  }
  // START -> j and j -> STOP expected counts are the boundary posteriors.
  for (int j = 0; j < kNumLabels; ++j) {
    stats.transition(kStartTag, j) += stats.unary(0, j);
    stats.transition(j, kStopTag) += stats.unary(n - 1, j);
  }
  for (int t = 0; t + 1 < n; ++t) {
    for (int i = 0; i < kNumLabels; ++i) {
      if (alpha(t, i) <= kNegInfCutoff) continue;
      for (int j = 0; j < kNumLabels; ++j) {
        if (transitions(i, j) <= kNegInfCutoff || beta(t + 1, j) <= kNegInfCutoff) continue;
        stats.transition(i, j) +=
            std::exp(alpha(t, i) + transitions(i, j) + emissions(t + 1, j) + beta(t + 1, j) -
                     stats.log_z);
      }
    }
  }
  return stats;
}

Gradients gradients(const EmissionRef& emissions, const TransitionRef& transitions,
                    const TagLattice& target) {
  require(target.size() == emissions.rows(), "gradients: lattice length mismatch");
  target.validate();
  const PosteriorStats restricted = posterior_stats(emissions, transitions, &target);
  const PosteriorStats full = posterior_stats(emissions, transitions, nullptr);
  Gradients grads;
  grads.emission = restricted.unary - full.unary;
  grads.transition = restricted.transition - full.transition;
  // Structurally forbidden transitions stay out of learning.
  for (int i = 0; i < kNumTags; ++i)
    for (int j = 0; j < kNumTags; ++j)
      if (transitions(i, j) <= kNegInfCutoff) grads.transition(i, j) = 0.0;
  return grads;
}

}  // namespace scitag::crf
