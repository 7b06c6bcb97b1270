#include "hlta/model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "json.hpp"

namespace hlta {

using Matrix2 = std::array<std::array<double, 2>, 2>;

namespace {

Matrix2 identity2() { return {{{1.0, 0.0}, {0.0, 1.0}}}; }

Matrix2 table_of(const Cpt& c) { return {{{c.p[0], c.p[1]}, {c.p[2], c.p[3]}}}; }

Matrix2 multiply(const Matrix2& a, const Matrix2& b) {
  Matrix2 r{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
  return r;
}

// P(desc = k | anc = j) for an ancestor in the rooted form.
Matrix2 conditional_down(const LatentTreeModel& m, int anc, int desc) {
  std::vector<int> path;
  for (int v = desc; v != anc; v = m.parent(v)) {
    if (v < 0) throw std::invalid_argument("not an ancestor");
    path.push_back(v);
  }
  Matrix2 r = identity2();
  for (auto it = path.rbegin(); it != path.rend(); ++it)
    r = multiply(r, table_of(m.cpt(*it)));
  return r;
}

}  // namespace

void clamp_cpt(Cpt& cpt, bool is_root) {
  const int rows = is_root ? 1 : 2;
  for (int j = 0; j < rows; ++j) {
    double p1 = cpt(j, 1);
    if (!(p1 >= kProbFloor)) p1 = kProbFloor;  // also catches NaN
    if (p1 > 1.0 - kProbFloor) p1 = 1.0 - kProbFloor;
    cpt(j, 1) = p1;
    cpt(j, 0) = 1.0 - p1;
  }
}

// ---------------------------------------------------------------------------

LatentTreeModel LatentTreeModel::from_parents(std::vector<Variable> vars,
                                              std::vector<int> parents,
                                              std::vector<Cpt> cpts) {
  if (vars.size() != parents.size() || vars.size() != cpts.size())
    throw std::invalid_argument("variable, parent and table arrays differ");
  LatentTreeModel m;
  m.vars_ = std::move(vars);
  m.parent_ = std::move(parents);
  m.cpts_ = std::move(cpts);
  m.rebuild_links();
  m.check();
  return m;
}

void LatentTreeModel::rebuild_links() {
  const int n = static_cast<int>(vars_.size());
  children_.assign(n, {});
  index_.clear();
  root_ = -1;
  for (int v = 0; v < n; ++v) {
    if (!index_.emplace(vars_[v].name, v).second)
      throw InvariantError("duplicate variable name " + vars_[v].name);
    const int p = parent_[v];
    if (p < 0) {
      if (root_ >= 0) throw InvariantError("more than one root");
      root_ = v;
    } else {
      if (p >= n) throw InvariantError("parent index out of range");
      children_[p].push_back(v);
    }
  }
}

int LatentTreeModel::add_variable(Variable var, int parent, const Cpt& cpt) {
  if (parent < 0 && root_ >= 0)
    throw std::invalid_argument("model already has a root");
  if (parent >= static_cast<int>(vars_.size()))
    throw std::invalid_argument("unknown parent");
  if (index_.count(var.name))
    throw std::invalid_argument("duplicate variable name " + var.name);
  const int v = static_cast<int>(vars_.size());
  index_.emplace(var.name, v);
  vars_.push_back(std::move(var));
  parent_.push_back(parent);
  children_.emplace_back();
  cpts_.push_back(cpt);
  if (parent < 0)
    root_ = v;
  else
    children_[parent].push_back(v);
  return v;
}

void LatentTreeModel::remove_leaf(int v) {
  if (v < 0 || v >= static_cast<int>(vars_.size()))
    throw std::invalid_argument("unknown variable");
  if (!children_[v].empty() || parent_[v] < 0)
    throw std::invalid_argument("only non-root leaves can be removed");
  vars_.erase(vars_.begin() + v);
  parent_.erase(parent_.begin() + v);
  cpts_.erase(cpts_.begin() + v);
  for (int& p : parent_)
    if (p > v) --p;
  rebuild_links();
}

void LatentTreeModel::reparent(int v, int new_parent, const Cpt& cpt) {
  if (new_parent < 0 || v == root_)
    throw std::invalid_argument("cannot reparent the root");
  for (int u = new_parent; u >= 0; u = parent_[u])
    if (u == v) throw std::invalid_argument("reparent would create a cycle");
  auto& siblings = children_[parent_[v]];
  siblings.erase(std::find(siblings.begin(), siblings.end(), v));
  parent_[v] = new_parent;
  children_[new_parent].push_back(v);
  cpts_[v] = cpt;
}

void LatentTreeModel::rename(int v, const std::string& name) {
  if (name == vars_[v].name) return;
  if (index_.count(name))
    throw std::invalid_argument("duplicate variable name " + name);
  index_.erase(vars_[v].name);
  vars_[v].name = name;
  index_.emplace(name, v);
}

int LatentTreeModel::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

int LatentTreeModel::index_of(const std::string& name) const {
  int v = find(name);
  if (v < 0) throw DataError("variable " + name + " not in model");
  return v;
}

std::vector<int> LatentTreeModel::observed() const {
  std::vector<int> out;
  for (int v = 0; v < static_cast<int>(vars_.size()); ++v)
    if (!vars_[v].latent()) out.push_back(v);
  return out;
}

std::vector<int> LatentTreeModel::latents() const {
  std::vector<int> out;
  for (int v = 0; v < static_cast<int>(vars_.size()); ++v)
    if (vars_[v].latent()) out.push_back(v);
  return out;
}

std::vector<int> LatentTreeModel::neighbors(int v) const {
  std::vector<int> out = children_[v];
  if (parent_[v] >= 0) out.push_back(parent_[v]);
  return out;
}

std::vector<std::pair<int, int>> LatentTreeModel::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int v = 0; v < static_cast<int>(vars_.size()); ++v)
    if (parent_[v] >= 0) out.emplace_back(parent_[v], v);
  return out;
}

std::vector<int> LatentTreeModel::topological_order() const {
  std::vector<int> order;
  if (root_ < 0) return order;
  order.reserve(vars_.size());
  order.push_back(root_);
  for (std::size_t i = 0; i < order.size(); ++i)
    for (int c : children_[order[i]]) order.push_back(c);
  return order;
}

int LatentTreeModel::max_latent_level() const {
  int level = 0;
  for (const auto& v : vars_)
    if (v.latent()) level = std::max(level, v.level);
  return level;
}

void LatentTreeModel::check() const {
  if (vars_.empty()) return;
  if (root_ < 0) throw InvariantError("model has no root");
  if (topological_order().size() != vars_.size())
    throw InvariantError("model structure is not a connected tree");
  for (int v = 0; v < static_cast<int>(vars_.size()); ++v) {
    const int rows = v == root_ ? 1 : 2;
    for (int j = 0; j < rows; ++j) {
      const double a = cpts_[v](j, 0), b = cpts_[v](j, 1);
      if (!(a >= 0.0 && b >= 0.0 && a <= 1.0 && b <= 1.0) ||
          std::abs(a + b - 1.0) > 1e-9)
        throw InvariantError("table of " + vars_[v].name +
                             " is not a distribution");
    }
  }
}

void LatentTreeModel::swap_states(int v) {
  Cpt& own = cpts_[v];
  std::swap(own.p[0], own.p[1]);
  if (v != root_) std::swap(own.p[2], own.p[3]);
  for (int c : children_[v]) {
    Cpt& t = cpts_[c];
    std::swap(t.p[0], t.p[2]);
    std::swap(t.p[1], t.p[3]);
  }
}

// ---------------------------------------------------------------------------

double joint_log_prob(const LatentTreeModel& model, const Assignment& values) {
  if (values.size() != model.size())
    throw std::invalid_argument("assignment does not cover the model");
  double total = 0.0;
  for (int v = 0; v < static_cast<int>(model.size()); ++v) {
    const int p = model.parent(v);
    const double prob = model.cpt(v)(p < 0 ? 0 : values[p], values[v]);
    total += std::log(prob);
  }
  return total;
}

std::vector<double> marginals(const LatentTreeModel& model) {
  std::vector<double> m(model.size(), 0.0);
  for (int v : model.topological_order()) {
    const int p = model.parent(v);
    const Cpt& c = model.cpt(v);
    m[v] = p < 0 ? c(0, 1) : (1.0 - m[p]) * c(0, 1) + m[p] * c(1, 1);
  }
  return m;
}

std::array<double, 4> pair_marginal(const LatentTreeModel& model, int a, int b) {
  std::vector<int> ancestors_a;
  for (int v = a; v >= 0; v = model.parent(v)) ancestors_a.push_back(v);
  int common = -1;
  for (int v = b; v >= 0 && common < 0; v = model.parent(v))
    if (std::find(ancestors_a.begin(), ancestors_a.end(), v) != ancestors_a.end())
      common = v;
  const double pc1 = marginals(model)[common];
  const double pc[2] = {1.0 - pc1, pc1};
  const Matrix2 ta = conditional_down(model, common, a);
  const Matrix2 tb = conditional_down(model, common, b);
  std::array<double, 4> joint{};
  for (int s = 0; s < 2; ++s)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) joint[2 * i + j] += pc[s] * ta[s][i] * tb[s][j];
  return joint;
}

double mutual_information(const std::array<double, 4>& joint) {
  const double pa[2] = {joint[0] + joint[1], joint[2] + joint[3]};
  const double pb[2] = {joint[0] + joint[2], joint[1] + joint[3]};
  double mi = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const double p = joint[2 * a + b];
      if (p > 0.0) mi += p * std::log(p / (pa[a] * pb[b]));
    }
  return mi;
}

bool regular_node(int cardinality, const std::vector<int>& neighbor_cards) {
  if (neighbor_cards.empty()) return false;
  double product = 1.0;
  int largest = 0;
  for (int c : neighbor_cards) {
    product *= c;
    largest = std::max(largest, c);
  }
  const double bound = product / largest;
  return neighbor_cards.size() == 2 ? cardinality < bound : cardinality <= bound;
}

std::vector<RegularityViolation> validate_regular(const LatentTreeModel& model) {
  std::vector<RegularityViolation> out;
  for (int z : model.latents()) {
    const auto nb = model.neighbors(z);
    if (!regular_node(2, std::vector<int>(nb.size(), 2)))
      out.push_back({model.name(z), static_cast<int>(nb.size())});
  }
  return out;
}

LatentTreeModel reroot(const LatentTreeModel& model, const std::string& new_root) {
  const int r = model.find(new_root);
  if (r < 0) throw std::invalid_argument("variable " + new_root + " not in model");
  if (!model.variable(r).latent())
    throw std::invalid_argument("new root " + new_root + " is not latent");
  if (r == model.root()) return model;

  const auto m1 = marginals(model);
  std::vector<Variable> vars;
  std::vector<int> parents;
  std::vector<Cpt> cpts;
  for (int v = 0; v < static_cast<int>(model.size()); ++v) {
    vars.push_back(model.variable(v));
    parents.push_back(model.parent(v));
    cpts.push_back(model.cpt(v));
  }
  // Walk from the new root up to the old one, flipping each edge.
  cpts[r] = Cpt::prior(m1[r]);
  for (int child = r, up = model.parent(r); up >= 0;
       child = up, up = model.parent(up)) {
    // The old table of `child` is P(child | up); the new one is P(up | child).
    const Cpt& old = model.cpt(child);
    const double mc[2] = {1.0 - m1[child], m1[child]};
    const double mu[2] = {1.0 - m1[up], m1[up]};
    Cpt flipped;
    for (int j = 0; j < 2; ++j) {  // state of child (new parent)
      if (mc[j] <= 0.0) {
        flipped(j, 0) = flipped(j, 1) = 0.5;
        continue;
      }
      for (int k = 0; k < 2; ++k) flipped(j, k) = mu[k] * old(k, j) / mc[j];
    }
    cpts[up] = flipped;
    parents[up] = child;
  }
  parents[r] = -1;
  return LatentTreeModel::from_parents(std::move(vars), std::move(parents),
                                       std::move(cpts));
}

std::vector<std::string> hltm_violations(const LatentTreeModel& model) {
  std::vector<std::string> out;
  const int top = model.max_latent_level();
  for (int v = 0; v < static_cast<int>(model.size()); ++v) {
    const Variable& var = model.variable(v);
    const auto nb = model.neighbors(v);
    if (!var.latent()) {
      if (var.level != 0) out.push_back(var.name + ": observed variable not at level 0");
      int latent_nb = 0;
      for (int u : nb) latent_nb += model.variable(u).latent() ? 1 : 0;
      if (latent_nb != 1 || nb.size() != 1)
        out.push_back(var.name + ": observed variable must have exactly one latent neighbor");
      continue;
    }
    if (var.level < 1) out.push_back(var.name + ": latent variable below level 1");
    int parents_above = 0;
    for (int u : nb) {
      const int d = model.variable(u).level - var.level;
      if (d > 1 || d < -1)
        out.push_back(var.name + ": edge to " + model.name(u) + " skips a level");
      if (d == 0 && var.level != top)
        out.push_back(var.name + ": lateral edge below the top level");
      if (d == 1) ++parents_above;
    }
    if (var.level < top && parents_above != 1)
      out.push_back(var.name + ": needs exactly one parent one level up");
  }
  return out;
}

LatentTreeModel stack_models(const LatentTreeModel& upper,
                             const LatentTreeModel& lower) {
  const int top = lower.max_latent_level();
  std::set<std::string> tops, upper_obs;
  for (int z : lower.latents())
    if (lower.variable(z).level == top) tops.insert(lower.name(z));
  for (int x : upper.observed()) upper_obs.insert(upper.name(x));
  if (tops.empty() || tops != upper_obs)
    throw std::invalid_argument(
        "upper model's observed variables must be the lower model's top latents");
  if (lower.variable(lower.root()).level != top)
    throw std::invalid_argument("lower model must be rooted at its top level");

  LatentTreeModel out;
  std::map<int, int> placed;  // upper index -> output index
  for (int v : upper.topological_order()) {
    const int p = upper.parent(v) < 0 ? -1 : placed.at(upper.parent(v));
    Variable var = upper.variable(v);
    if (var.latent()) {
      var.level = top + 1;
      placed[v] = out.add_variable(var, p, upper.cpt(v));
      continue;
    }
    // A lower top latent: keep its identity, take its table from upper and
    // copy its vertical subtree from lower.
    const int lz = lower.index_of(var.name);
    placed[v] = out.add_variable(lower.variable(lz), p, upper.cpt(v));
    std::vector<std::pair<int, int>> stack{{lz, placed[v]}};
    while (!stack.empty()) {
      auto [lu, ou] = stack.back();
      stack.pop_back();
      for (int c : lower.children(lu)) {
        if (lower.variable(c).level >= lower.variable(lu).level) continue;
        const int oc = out.add_variable(lower.variable(c), ou, lower.cpt(c));
        stack.emplace_back(c, oc);
      }
    }
  }
  if (out.size() != lower.size() + upper.latents().size())
    throw InvariantError("stacked model lost variables");
  return out;
}

int free_param_count(const LatentTreeModel& model) {
  if (model.empty()) return 0;
  return 1 + 2 * static_cast<int>(model.size() - 1);
}

std::vector<int> subtree_observed(const LatentTreeModel& model, int z) {
  std::vector<int> out, stack{z};
  std::vector<char> seen(model.size(), 0);
  seen[z] = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    if (!model.variable(u).latent()) {
      out.push_back(u);
      continue;
    }
    for (int w : model.neighbors(u)) {
      if (seen[w] || model.variable(w).level >= model.variable(u).level) continue;
      seen[w] = 1;
      stack.push_back(w);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string latent_name(int level, int counter) {
  if (level >= 10)
    return "Z" + std::to_string(level) + "_" + std::to_string(counter);
  return "Z" + std::to_string(level) + std::to_string(counter);
}

// ---------------------------------------------------------------------------

std::string to_json(const LatentTreeModel& model) {
  using nlohmann::json;
  json doc;
  doc["variables"] = json::array();
  doc["edges"] = json::array();
  doc["cpts"] = json::array();
  std::map<int, std::vector<std::string>> levels;
  for (int v = 0; v < static_cast<int>(model.size()); ++v) {
    const Variable& var = model.variable(v);
    doc["variables"].push_back({{"name", var.name},
                                {"kind", var.latent() ? "latent" : "observed"},
                                {"level", var.level}});
    levels[var.level].push_back(var.name);
    const int p = model.parent(v);
    const Cpt& c = model.cpt(v);
    json entry{{"variable", var.name}};
    if (p < 0) {
      entry["parent"] = nullptr;
      entry["probabilities"] = {c.p[0], c.p[1]};
    } else {
      doc["edges"].push_back({model.name(p), var.name});
      entry["parent"] = model.name(p);
      entry["probabilities"] = {c.p[0], c.p[1], c.p[2], c.p[3]};
    }
    doc["cpts"].push_back(std::move(entry));
  }
  doc["root"] = model.root() < 0 ? json(nullptr) : json(model.name(model.root()));
  json lv = json::object();
  for (auto& [level, names] : levels) lv[std::to_string(level)] = names;
  doc["levels"] = lv;
  return doc.dump(1);
}

LatentTreeModel model_from_json(const std::string& text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("model JSON: ") + e.what());
  }
  try {
    std::vector<Variable> vars;
    std::map<std::string, int> index;
    for (const auto& jv : doc.at("variables")) {
      Variable var;
      var.name = jv.at("name").get<std::string>();
      const auto kind = jv.at("kind").get<std::string>();
      if (kind != "latent" && kind != "observed")
        throw DataError("unknown variable kind " + kind);
      var.kind = kind == "latent" ? VarKind::kLatent : VarKind::kObserved;
      var.level = jv.at("level").get<int>();
      index[var.name] = static_cast<int>(vars.size());
      vars.push_back(std::move(var));
    }
    std::vector<int> parents(vars.size(), -1);
    std::vector<Cpt> cpts(vars.size());
    std::vector<char> seen(vars.size(), 0);
    for (const auto& jc : doc.at("cpts")) {
      const int v = index.at(jc.at("variable").get<std::string>());
      seen[v] = 1;
      const auto& probs = jc.at("probabilities");
      if (jc.at("parent").is_null()) {
        if (probs.size() != 2) throw DataError("root table needs 2 entries");
        cpts[v] = Cpt{{probs[0].get<double>(), probs[1].get<double>(), 0.5, 0.5}};
      } else {
        parents[v] = index.at(jc.at("parent").get<std::string>());
        if (probs.size() != 4) throw DataError("table needs 4 entries");
        for (int i = 0; i < 4; ++i) cpts[v].p[i] = probs[i].get<double>();
      }
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
      throw DataError("model JSON: variable without a table");
    auto m = LatentTreeModel::from_parents(std::move(vars), std::move(parents),
                                           std::move(cpts));
    if (!m.empty() && doc.at("root").get<std::string>() != m.name(m.root()))
      throw DataError("model JSON: root does not match the tables");
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("model JSON: ") + e.what());
  } catch (const std::out_of_range&) {
    throw DataError("model JSON: reference to an unknown variable");
  } catch (const InvariantError& e) {
    throw DataError(std::string("model JSON: ") + e.what());
  }
}

void write_model(const LatentTreeModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << to_json(model) << '\n';
}

LatentTreeModel read_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read model " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return model_from_json(text);
}

}  // namespace hlta
