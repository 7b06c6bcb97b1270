#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hlta/corpus.hpp"
#include "hlta/em.hpp"
#include "hlta/model.hpp"

namespace hlta {

/// Symmetric matrix of pairwise empirical MI (nats); the diagonal holds
/// entropies.
class MiMatrix {
 public:
  MiMatrix() = default;
  explicit MiMatrix(std::size_t n) : n_(n), values_(n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  void set(std::size_t i, std::size_t j, double v) {
    values_[i * n_ + j] = v;
    values_[j * n_ + i] = v;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

/// MI between every pair of columns from co-occurrence counts.
MiMatrix pairwise_mi(const SparseBinaryCorpus& data);

/// max over a in S of MI(x, a). S must be nonempty.
double mi_to_set(int x, std::span<const int> set, const MiMatrix& mi);

/// BIC(m2) - BIC(m1) < delta.
bool unidimensional(double bic_m1, double bic_m2, double delta);
bool ud_test(const LatentTreeModel& m1, const LatentTreeModel& m2,
             const ProjectedData& data, double delta);

/// A latent class model over a cluster of variables. `members` lists the
/// children in the order they joined; the first two are the seeds.
struct Island {
  LatentTreeModel model;  // rooted at the latent
  std::vector<std::string> members;

  const std::string& latent() const { return model.name(model.root()); }
};

/// Adds x under the latent of `m` and fits only P(x | Y), on the submodel
/// made of Y, the two anchors and x.
LatentTreeModel pem_lcm(const LatentTreeModel& m, const std::array<std::string, 2>& anchors,
                        const std::string& x, const ProjectedData& data,
                        const EmConfig& config);

/// Two-latent alternative: a new latent z_name under Y with w moved to it and
/// x added to it. Fits P(z|Y), P(w|z) and P(x|z) on the submodel made of Y, z,
/// w, x and two anchors: the seeds, or when w is a seed the other seed and
/// the third variable.
LatentTreeModel pem_ltm_2l(const LatentTreeModel& m, const std::vector<std::string>& members,
                           const std::string& w, const std::string& x,
                           const ProjectedData& data, const EmConfig& config,
                           const std::string& z_name);

struct IslandOptions {
  double delta = 3.0;
  std::size_t mu = 15;
  EmConfig em{64, 1e-4, 4, false, {}, 0};
};

/// Grows one island from `pool` (column indices of `data`). Variables not in
/// the returned island stay in the pool. Randomness is drawn from rng.
Island one_island(const SparseBinaryCorpus& data, const ColumnIndex& index,
                  const MiMatrix& mi, std::span<const int> pool,
                  const IslandOptions& options, const std::string& latent, Rng& rng);

/// Partitions all columns of `data` into islands. Latents are named
/// latent_name(level, 1), latent_name(level, 2), ...
std::vector<Island> build_islands(const SparseBinaryCorpus& data, const ColumnIndex& index,
                                  const MiMatrix& mi, const IslandOptions& options,
                                  int level, Rng& rng);

/// Per-document P(Y = 1 | d) of an island latent, stored sparsely: docs that
/// contain no member share the value `base`.
struct SoftColumn {
  double base = 0.0;
  std::vector<std::pair<std::uint32_t, double>> docs;  // (doc, value - base)
};

SoftColumn island_posterior(const Island& island, const SparseBinaryCorpus& data,
                            const ColumnIndex& index);
/// Indicator column of an observed variable.
SoftColumn indicator_column(int term, const ColumnIndex& index);

/// MI of the normalized sum over documents of P(Y | d) P(Y' | d), for every
/// pair of columns.
MiMatrix soft_pair_mi(const std::vector<SoftColumn>& columns, std::size_t num_docs);
double latent_pair_mi(const Island& a, const Island& b, const SparseBinaryCorpus& data);

/// Maximum spanning tree of a complete graph (Kruskal). Equal weights are
/// broken by (i, j) in increasing order. Edges are returned as (i, j), i < j.
std::vector<std::pair<int, int>> maximum_spanning_tree(const MiMatrix& weights);

/// Links island latents along the maximum spanning tree of their pairwise MI.
/// The result is rooted at the first island's latent; each new edge table is
/// fitted on the latents and up to two members of each island.
LatentTreeModel bridge_islands(const std::vector<Island>& islands,
                               const SparseBinaryCorpus& data, const ColumnIndex& index,
                               const EmConfig& em, Rng& rng);

/// Swaps latent states so that state 1 has marginal probability <= 0.5.
void relabel_minority_states(LatentTreeModel& model);

/// Completed data over the latents of `model`: each document takes, for every
/// latent, the state with the higher posterior (ties go to 0).
SparseBinaryCorpus hard_assignment(const LatentTreeModel& model,
                                   const SparseBinaryCorpus& data);

/// Islands, then bridging. Observed variables of the result are the columns
/// of `data`; latents sit at level 1 and are named for `level`.
LatentTreeModel learn_flat_model(const SparseBinaryCorpus& data,
                                 const IslandOptions& options, int level, Rng& rng);

enum class FinalEm { kBatch, kStepwise };

struct HltaConfig {
  std::size_t tau = 20;
  std::size_t mu = 15;
  double delta = 3.0;
  int kappa = 50;
  /// Documents sampled for the structure phase; 0 uses all of them.
  std::size_t subsample = 0;
  FinalEm final_em = FinalEm::kBatch;
  std::size_t minibatch = 1000;
  int stepwise_updates = 100;
  double alpha = 0.75;
  std::uint64_t seed = 1;
  /// EM settings for LCM fits and progressive EM.
  int island_restarts = 4;
  int island_iters = 64;
};

struct LevelReport {
  int level;
  std::size_t inputs;   // variables at the level below
  std::size_t latents;  // variables created at this level
  double seconds;
};

struct HltaResult {
  LatentTreeModel model;
  std::vector<LevelReport> levels;
  double structure_seconds = 0.0;
  double final_seconds = 0.0;
  double train_log_likelihood = 0.0;
};

/// Learns a hierarchical latent tree model. Throws DataError when the corpus
/// has fewer than three terms or no documents.
HltaResult run_hlta(const SparseBinaryCorpus& corpus, const HltaConfig& config);

}  // namespace hlta
