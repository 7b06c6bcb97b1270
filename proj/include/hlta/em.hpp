#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hlta/corpus.hpp"
#include "hlta/inference.hpp"
#include "hlta/model.hpp"

namespace hlta {

struct EmConfig {
  int max_iters = 64;
  /// Stop once an iteration improves the log-likelihood by less than this.
  double ll_tolerance = 1e-4;
  int restarts = 1;
  /// Restart 0 starts from the given parameters; otherwise every restart
  /// draws the free tables at random.
  bool keep_initial = true;
  /// Variables whose tables are never updated.
  std::set<std::string> frozen;
  std::uint64_t seed = 0;
};

/// Expected counts n[v][2j + k] = sum_d w_d P(v = k, pa(v) = j | d); the root
/// uses n[root][k].
struct SufficientStats {
  std::vector<std::array<double, 4>> n;
  double log_likelihood = 0.0;
};

struct EmResult {
  LatentTreeModel model;
  /// Log-likelihood of `model` on the training data.
  double log_likelihood = 0.0;
  /// Log-likelihood before each M-step of the winning restart, then after
  /// the last one.
  std::vector<double> trace;
  int iterations = 0;
};

/// E-step. Deterministic for any thread count.
SufficientStats expected_counts(const LatentTreeModel& model, const CaseData& data);

/// M-step: theta = n / sum_k n, clamped. Rows with no mass and frozen
/// variables (by index) keep their current values.
LatentTreeModel maximize(const LatentTreeModel& model, const SufficientStats& stats,
                         const std::vector<char>& frozen);

/// Replaces every table not in `frozen` with rows drawn uniformly from the
/// simplex.
void randomize(LatentTreeModel& model, const std::set<std::string>& frozen, Rng& rng);

/// EM with restarts; the restart with the highest final log-likelihood wins
/// (ties keep the earlier one). Throws DataError on empty data.
EmResult batch_em(const LatentTreeModel& model, const CaseData& data,
                  const EmConfig& config);
EmResult batch_em(const LatentTreeModel& model, const ProjectedData& data,
                  const EmConfig& config);

/// Runs EM on the subtree induced by `submodel_vars`, updating only the
/// tables of `free_vars`. The subtree root keeps its table when it is the
/// model root and otherwise gets its current marginal as a frozen prior.
/// Throws std::invalid_argument when the variables do not induce a connected
/// subtree or a free variable is outside it or is a non-root subtree root.
EmResult local_em(const LatentTreeModel& model,
                  const std::vector<std::string>& submodel_vars,
                  const std::vector<std::string>& free_vars,
                  const ProjectedData& data, EmConfig config);

struct StepwiseState {
  SufficientStats stats;  // accumulators, start at zero
  int updates = 0;        // u, the number of minibatches processed
  double alpha = 0.75;
};

/// eta_u = (u + 2)^-alpha.
double stepwise_eta(int u, double alpha);

/// n <- (1 - eta) n + eta n'.
void stepwise_update(StepwiseState& state, const SufficientStats& batch, double eta);

struct StepwiseConfig {
  std::size_t minibatch_size = 1000;
  int updates = 100;
  double alpha = 0.75;
  std::uint64_t seed = 0;
  /// Replaces the stepsize schedule when set.
  std::optional<double> eta;
};

/// Stepwise EM. Each pass shuffles the cases and cuts them into
/// floor(N / B) minibatches of size B; the remainder of a pass is unused.
/// Throws std::invalid_argument when B is zero or exceeds the data size.
LatentTreeModel stepwise_em(const LatentTreeModel& model, const CaseData& data,
                            const StepwiseConfig& config,
                            StepwiseState* state = nullptr);

/// A latent class model: one binary latent `latent` over `vars`, fitted with
/// random restarts. Throws std::invalid_argument for fewer than three vars.
LatentTreeModel learn_lcm(const std::vector<std::string>& vars,
                          const ProjectedData& data, const EmConfig& config,
                          const std::string& latent = "Z");

/// learn_lcm without the size check, for the documented small-pool cases.
LatentTreeModel fit_lcm(const std::vector<std::string>& vars,
                        const ProjectedData& data, const EmConfig& config,
                        const std::string& latent = "Z");

}  // namespace hlta
