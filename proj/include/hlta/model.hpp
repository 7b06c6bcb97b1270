#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hlta/common.hpp"

namespace hlta {

enum class VarKind { kObserved, kLatent };

/// A binary variable. Observed variables sit at level 0.
struct Variable {
  std::string name;
  VarKind kind = VarKind::kObserved;
  int level = 0;

  bool latent() const { return kind == VarKind::kLatent; }
};

inline constexpr double kProbFloor = 1e-6;

/// Conditional table of a binary variable: p[2*j + k] = P(child = k | parent = j).
/// A root uses only the first row, p[k] = P(child = k).
struct Cpt {
  std::array<double, 4> p{0.5, 0.5, 0.5, 0.5};

  double operator()(int parent_state, int state) const {
    return p[2 * parent_state + state];
  }
  double& operator()(int parent_state, int state) {
    return p[2 * parent_state + state];
  }

  static Cpt prior(double p1) { return Cpt{{1.0 - p1, p1, 0.5, 0.5}}; }
  /// Rows (P(1 | parent=0), P(1 | parent=1)).
  static Cpt conditional(double p1_given0, double p1_given1) {
    return Cpt{{1.0 - p1_given0, p1_given0, 1.0 - p1_given1, p1_given1}};
  }
};

/// Keeps every probability in [kProbFloor, 1 - kProbFloor] and rows summing
/// to one.
void clamp_cpt(Cpt& cpt, bool is_root);

/// A tree-structured Bayesian network over binary variables, stored in one
/// rooted representative of its undirected equivalence class. Indices are
/// stable until a variable is removed.
class LatentTreeModel {
 public:
  LatentTreeModel() = default;

  /// Builds a model from parallel arrays (parents[v] = -1 for the root) and
  /// validates it with check().
  static LatentTreeModel from_parents(std::vector<Variable> vars,
                                      std::vector<int> parents,
                                      std::vector<Cpt> cpts);

  /// Adds a variable under `parent` (-1 makes it the root; only allowed when
  /// the model is empty). Returns its index.
  int add_variable(Variable var, int parent, const Cpt& cpt);
  /// Removes a non-root leaf. Indices above `v` shift down by one.
  void remove_leaf(int v);
  /// Moves v (and its subtree) under new_parent with a new table.
  void reparent(int v, int new_parent, const Cpt& cpt);
  void rename(int v, const std::string& name);

  std::size_t size() const { return vars_.size(); }
  bool empty() const { return vars_.empty(); }
  int root() const { return root_; }

  const Variable& variable(int v) const { return vars_[v]; }
  Variable& variable(int v) { return vars_[v]; }
  const std::string& name(int v) const { return vars_[v].name; }
  int parent(int v) const { return parent_[v]; }
  const std::vector<int>& children(int v) const { return children_[v]; }
  const Cpt& cpt(int v) const { return cpts_[v]; }
  Cpt& cpt(int v) { return cpts_[v]; }

  /// Index of a named variable, or -1.
  int find(const std::string& name) const;
  /// Index of a named variable; throws DataError when absent.
  int index_of(const std::string& name) const;

  std::vector<int> observed() const;
  std::vector<int> latents() const;
  std::vector<int> neighbors(int v) const;
  /// Undirected edges as (parent, child) pairs in index order.
  std::vector<std::pair<int, int>> edges() const;
  /// Root first, every parent before its children.
  std::vector<int> topological_order() const;
  int max_latent_level() const;

  /// Throws InvariantError if the structure is not a rooted tree or a table
  /// is not a distribution (tolerance 1e-9).
  void check() const;

  /// Exchanges the two states of v; the represented distribution over the
  /// relabeled variable is unchanged.
  void swap_states(int v);

 private:
  void rebuild_links();

  std::vector<Variable> vars_;
  std::vector<int> parent_;
  std::vector<std::vector<int>> children_;
  std::vector<Cpt> cpts_;
  std::unordered_map<std::string, int> index_;
  int root_ = -1;
};

/// Value of every variable (0 or 1), indexed like the model.
using Assignment = std::vector<std::uint8_t>;

/// Sum of log table entries; -infinity when an entry is zero.
double joint_log_prob(const LatentTreeModel& model, const Assignment& values);

/// Marginal P(v = 1) for every variable, by forward propagation.
std::vector<double> marginals(const LatentTreeModel& model);

/// Joint P(a, b) of two variables with no evidence, flattened as [2*a + b].
std::array<double, 4> pair_marginal(const LatentTreeModel& model, int a, int b);

/// Mutual information in nats of a 2x2 joint flattened as [2*a + b]. Zero
/// cells contribute nothing.
double mutual_information(const std::array<double, 4>& joint);

/// Regularity condition |Z| <= prod|Zi| / max|Zi| for a latent with the given
/// neighbor cardinalities, strict when there are exactly two neighbors.
bool regular_node(int cardinality, const std::vector<int>& neighbor_cards);

struct RegularityViolation {
  std::string latent;
  int neighbors;
};

/// Latent nodes violating the regularity condition (binary: fewer than three
/// neighbors). Empty means regular.
std::vector<RegularityViolation> validate_regular(const LatentTreeModel& model);

/// Same undirected model rooted at new_root. Only tables on the path between
/// the old and the new root change.
LatentTreeModel reroot(const LatentTreeModel& model, const std::string& new_root);

/// Violations of the layering rules of a hierarchical latent tree model.
std::vector<std::string> hltm_violations(const LatentTreeModel& model);

/// Places `upper` (a flat model whose observed variables are exactly the
/// top-level latents of `lower`) on top of `lower`. Lateral edges among the
/// lower top level are dropped; the tables of those latents come from
/// `upper`, everything below them from `lower`.
LatentTreeModel stack_models(const LatentTreeModel& upper,
                             const LatentTreeModel& lower);

/// One parameter for the root, two for every other binary variable.
int free_param_count(const LatentTreeModel& model);

/// Observed variables in the hierarchical subtree of z, i.e. those reached
/// from z by moving only to lower-level neighbors. Sorted by index.
std::vector<int> subtree_observed(const LatentTreeModel& model, int z);

std::string latent_name(int level, int counter);

// JSON document with variables, edges, root, cpts and levels.
std::string to_json(const LatentTreeModel& model);
LatentTreeModel model_from_json(const std::string& text);
void write_model(const LatentTreeModel& model, const std::string& path);
LatentTreeModel read_model(const std::string& path);

}  // namespace hlta
