#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "hlta/corpus.hpp"
#include "hlta/model.hpp"

namespace hlta {

/// Posterior quantities for one document. Indexed like the model.
struct Posteriors {
  double log_likelihood = 0.0;
  /// marginal[v][k] = P(v = k | d).
  std::vector<std::array<double, 2>> marginal;
  /// pair[v][2j + k] = P(pa(v) = j, v = k | d). For the root, pair[root][k]
  /// holds the marginal and the other two entries are zero.
  std::vector<std::array<double, 4>> pair;
};

/// Exact message passing on a tree of binary variables. Observed variables
/// take their value from the evidence, latent ones are summed out.
///
/// Messages are kept in linear space and rescaled by powers of two, so the
/// scaling is exact and the log-likelihood needs a single log per document.
class TreeInference {
 public:
  explicit TreeInference(const LatentTreeModel& model);

  struct Workspace {
    std::vector<std::array<double, 2>> lambda, up, down;
    std::vector<std::array<double, 2>> prefix, suffix;
    std::vector<std::array<double, 2>> marginal;  // by variable
    std::vector<std::array<double, 4>> pair;      // by variable
  };

  Workspace make_workspace() const;

  /// Upward pass. `values` holds one entry per model variable; entries of
  /// latent variables are ignored. Returns log P(evidence), possibly -inf.
  double collect(const std::uint8_t* values, Workspace& ws) const;

  /// Downward pass; requires a preceding collect() with finite result.
  /// Fills ws.marginal and ws.pair.
  void distribute(const std::uint8_t* values, Workspace& ws) const;

  std::size_t size() const { return var_.size(); }

 private:
  std::vector<int> var_;          // position -> variable
  std::vector<int> parent_pos_;   // -1 at the root
  std::vector<int> first_child_;  // children are contiguous in BFS order
  std::vector<int> num_children_;
  std::vector<char> observed_;
  std::vector<Cpt> cpt_;
  std::size_t max_children_ = 0;
};

/// log P(d) = log sum_H P(d, H).
double doc_log_likelihood(const LatentTreeModel& model, const Assignment& doc);
/// P(v | d).
std::array<double, 2> posterior_marginal(const LatentTreeModel& model,
                                         const Assignment& doc, int v);
/// All single and pairwise posteriors from one upward and one downward pass.
Posteriors pairwise_posterior(const LatentTreeModel& model, const Assignment& doc);

inline constexpr std::size_t kBruteForceMaxVariables = 20;

/// Test oracle: the same quantities by enumerating every latent assignment.
/// Throws std::length_error for models with more than 20 variables.
Posteriors brute_force_posteriors(const LatentTreeModel& model,
                                  const Assignment& doc);

/// Fully observed cases over a model's observed variables with
/// multiplicities. Stores, per case, the observed variables equal to 1.
class CaseData {
 public:
  /// Columns of the corpus are matched to model variables by name. Every
  /// observed model variable must be a column; extra columns are ignored.
  CaseData(const LatentTreeModel& model, const SparseBinaryCorpus& corpus);
  CaseData(const LatentTreeModel& model, const ProjectedData& data);

  std::size_t size() const { return weights_.size(); }
  double weight(std::size_t i) const { return weights_[i]; }
  double total_weight() const;
  std::span<const int> active(std::size_t i) const {
    return {active_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }

  /// Sets the active variables of case i to 1 in `values`, which must be
  /// all-zero on observed variables; clear() undoes it.
  void fill(std::size_t i, std::uint8_t* values) const;
  void clear(std::size_t i, std::uint8_t* values) const;

  /// Cases restricted to the given indices, in that order.
  CaseData subset(std::span<const std::size_t> indices) const;

 private:
  CaseData() = default;
  void push(std::span<const int> active, double weight);

  std::vector<std::size_t> offsets_{0};
  std::vector<int> active_;
  std::vector<double> weights_;
};

/// Weighted sum of per-case log-likelihoods.
double log_likelihood(const LatentTreeModel& model, const CaseData& data);

/// log P(D | m) - d/2 ln |D| with |D| the total case weight.
/// Throws DataError on empty data.
double bic(const LatentTreeModel& model, const CaseData& data);
double bic(const LatentTreeModel& model, const ProjectedData& data);

}  // namespace hlta
