#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "scitag/labels.hpp"

namespace scitag::crf {

using Eigen::MatrixXd;
using EmissionRef = Eigen::Ref<const Eigen::MatrixXd>;    // n x 13
using TransitionRef = Eigen::Ref<const Eigen::MatrixXd>;  // 15 x 15

// Per-position allowed-label sets; bit i of allowed[t] permits label i at t.
struct TagLattice {
  std::vector<std::uint16_t> allowed;

  static TagLattice full(int n);
  static TagLattice singletons(const std::vector<int>& path);

  int size() const { return static_cast<int>(allowed.size()); }
  bool allows(int t, int label) const {
    return (allowed[static_cast<std::size_t>(t)] >> label) & 1u;
  }
  void validate() const;  // every set non-empty, no bits beyond the inventory
};

// 15x15 matrix of zeros with kNegInf at IOBES-illegal entries.
MatrixXd structural_transitions();
// Overwrites illegal entries of T with kNegInf in place.
void clamp_structural(MatrixXd& transitions);

double score_path(const EmissionRef& emissions, const TransitionRef& transitions,
                  const std::vector<int>& path);

double log_partition(const EmissionRef& emissions, const TransitionRef& transitions);

double sequence_log_likelihood(const EmissionRef& emissions, const TransitionRef& transitions,
                               const std::vector<int>& path);

// Row t is the posterior distribution of the label at position t.
MatrixXd token_marginals(const EmissionRef& emissions, const TransitionRef& transitions);

// Max-scoring path; ties resolved toward the lowest label index.
std::pair<std::vector<int>, double> viterbi(const EmissionRef& emissions,
                                            const TransitionRef& transitions);

// log p(lattice | x): restricted forward mass minus the full partition.
double lattice_log_likelihood(const EmissionRef& emissions, const TransitionRef& transitions,
                              const TagLattice& lattice);

// Whether any path through the lattice avoids -inf transitions. Per-token
// confidence singletons can be jointly unsatisfiable under the structural
// constraints, which zeroes the restricted mass.
bool lattice_feasible(const TagLattice& lattice, const TransitionRef& transitions);

// Forward-backward sufficient statistics of the (optionally restricted) path
// distribution: log-normalizer, per-position label posteriors, and expected
// transition counts over the 15-tag matrix.
struct PosteriorStats {
  double log_z = 0.0;
  MatrixXd unary;       // n x 13
  MatrixXd transition;  // 15 x 15 expected counts
};
PosteriorStats posterior_stats(const EmissionRef& emissions, const TransitionRef& transitions,
                               const TagLattice* lattice = nullptr);

struct Gradients {
  MatrixXd emission;    // n x 13
  MatrixXd transition;  // 15 x 15; zero at structurally forbidden entries
};

// Gradient of lattice_log_likelihood(target) w.r.t. emissions and transitions.
Gradients gradients(const EmissionRef& emissions, const TransitionRef& transitions,
                    const TagLattice& target);

}  // namespace scitag::crf
