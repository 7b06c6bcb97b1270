#include "hlta/em.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hlta {

namespace {

constexpr std::size_t kChunk = 256;

std::vector<char> frozen_mask(const LatentTreeModel& model,
                              const std::set<std::string>& frozen) {
  std::vector<char> mask(model.size(), 0);
  for (const auto& name : frozen) {
    const int v = model.find(name);
    if (v >= 0) mask[v] = 1;
  }
  return mask;
}

}  // namespace

SufficientStats expected_counts(const LatentTreeModel& model, const CaseData& data) {
  TreeInference engine(model);
  const std::size_t n = model.size();
  const std::size_t chunks = (data.size() + kChunk - 1) / kChunk;
  std::vector<SufficientStats> partial(chunks);
  for_each_chunk(data.size(), kChunk, [&](std::size_t c, std::size_t b, std::size_t e) {
    auto ws = engine.make_workspace();
    std::vector<std::uint8_t> values(n, 0);
    SufficientStats& s = partial[c];
    s.n.assign(n, {0.0, 0.0, 0.0, 0.0});
    for (std::size_t i = b; i < e; ++i) {
      data.fill(i, values.data());
      const double ll = engine.collect(values.data(), ws);
      const double w = data.weight(i);
      s.log_likelihood += w * ll;
      if (std::isfinite(ll)) {
        engine.distribute(values.data(), ws);
        for (std::size_t v = 0; v < n; ++v)
          for (int k = 0; k < 4; ++k) s.n[v][k] += w * ws.pair[v][k];
      }
      data.clear(i, values.data());
    }
  });
  SufficientStats total;
  total.n.assign(n, {0.0, 0.0, 0.0, 0.0});
  for (const auto& s : partial) {
    total.log_likelihood += s.log_likelihood;
    for (std::size_t v = 0; v < n; ++v)
      for (int k = 0; k < 4; ++k) total.n[v][k] += s.n[v][k];
  }
  return total;
}

LatentTreeModel maximize(const LatentTreeModel& model, const SufficientStats& stats,
                         const std::vector<char>& frozen) {
  LatentTreeModel out = model;
  for (int v = 0; v < static_cast<int>(model.size()); ++v) {
    if (!frozen.empty() && frozen[v]) continue;
    const bool root = model.parent(v) < 0;
    Cpt& t = out.cpt(v);
    for (int j = 0; j < (root ? 1 : 2); ++j) {
      const double n0 = stats.n[v][2 * j], n1 = stats.n[v][2 * j + 1];
      const double sum = n0 + n1;
      if (!(sum > 1e-300)) continue;
      t(j, 0) = n0 / sum;
      t(j, 1) = n1 / sum;
    }
    clamp_cpt(t, root);
  }
  return out;
}

void randomize(LatentTreeModel& model, const std::set<std::string>& frozen, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int v = 0; v < static_cast<int>(model.size()); ++v) {
    if (frozen.count(model.name(v))) continue;
    const bool root = model.parent(v) < 0;
    Cpt& t = model.cpt(v);
    for (int j = 0; j < (root ? 1 : 2); ++j) {
      const double p1 = unit(rng);
      t(j, 0) = 1.0 - p1;
      t(j, 1) = p1;
    }
    clamp_cpt(t, root);
  }
}

EmResult batch_em(const LatentTreeModel& model, const CaseData& data,
                  const EmConfig& config) {
  if (data.size() == 0) throw DataError("EM on empty data");
  if (config.max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  const auto mask = frozen_mask(model, config.frozen);
  Rng rng(config.seed);
  std::optional<EmResult> best;
  for (int r = 0; r < std::max(1, config.restarts); ++r) {
    EmResult run;
    run.model = model;
    if (r > 0 || !config.keep_initial) randomize(run.model, config.frozen, rng);
    SufficientStats stats = expected_counts(run.model, data);
    double ll = stats.log_likelihood;
    run.trace.push_back(ll);
    for (int it = 0; it < config.max_iters; ++it) {
      LatentTreeModel next = maximize(run.model, stats, mask);
      SufficientStats next_stats = expected_counts(next, data);
      run.model = std::move(next);
      stats = std::move(next_stats);
      run.trace.push_back(stats.log_likelihood);
      ++run.iterations;
      const double gain = stats.log_likelihood - ll;
      ll = stats.log_likelihood;
      if (gain < config.ll_tolerance) break;
    }
    run.log_likelihood = ll;
    log_info("em restart ", r, ": ", run.iterations, " iterations, loglik ", ll);
    if (!best || run.log_likelihood > best->log_likelihood) best = std::move(run);
  }
  return std::move(*best);
}

EmResult batch_em(const LatentTreeModel& model, const ProjectedData& data,
                  const EmConfig& config) {
  return batch_em(model, CaseData(model, data), config);
}

EmResult local_em(const LatentTreeModel& model,
                  const std::vector<std::string>& submodel_vars,
                  const std::vector<std::string>& free_vars,
                  const ProjectedData& data, EmConfig config) {
  std::vector<int> members;
  std::vector<int> local(model.size(), -1);
  for (const auto& name : submodel_vars) {
    const int v = model.find(name);
    if (v < 0) throw std::invalid_argument("unknown variable " + name);
    if (local[v] >= 0) continue;
    local[v] = static_cast<int>(members.size());
    members.push_back(v);
  }
  if (members.empty()) throw std::invalid_argument("empty submodel");
  int sub_root = -1;
  for (int v : members) {
    const int p = model.parent(v);
    if (p < 0 || local[p] < 0) {
      if (sub_root >= 0) throw std::invalid_argument("submodel is not connected");
      sub_root = v;
    }
  }
  for (const auto& name : free_vars) {
    const int v = model.find(name);
    if (v < 0 || local[v] < 0)
      throw std::invalid_argument("free variable " + name + " outside the submodel");
    if (v == sub_root && model.parent(v) >= 0)
      throw std::invalid_argument("the submodel root table cannot be free");
  }

  // Order members root first so from_parents sees parents by local index.
  std::vector<int> order;
  for (int v : model.topological_order())
    if (local[v] >= 0) order.push_back(v);
  for (std::size_t i = 0; i < order.size(); ++i) local[order[i]] = static_cast<int>(i);
  std::vector<Variable> vars;
  std::vector<int> parents;
  std::vector<Cpt> cpts;
  for (int v : order) {
    vars.push_back(model.variable(v));
    if (v == sub_root) {
      parents.push_back(-1);
      if (model.parent(v) < 0) {
        cpts.push_back(model.cpt(v));
      } else {
        Cpt prior = Cpt::prior(marginals(model)[v]);
        clamp_cpt(prior, true);
        cpts.push_back(prior);
      }
    } else {
      parents.push_back(local[model.parent(v)]);
      cpts.push_back(model.cpt(v));
    }
  }
  LatentTreeModel sub = LatentTreeModel::from_parents(vars, parents, cpts);

  const std::set<std::string> free(free_vars.begin(), free_vars.end());
  config.frozen.clear();
  for (int v : order)
    if (!free.count(model.name(v))) config.frozen.insert(model.name(v));

  std::vector<std::string> observed;
  for (int v : order)
    if (!model.variable(v).latent()) observed.push_back(model.name(v));
  EmResult result = batch_em(sub, project(data, observed), config);
  LatentTreeModel out = model;
  for (const auto& name : free) out.cpt(out.index_of(name)) = result.model.cpt(result.model.index_of(name));
  result.model = std::move(out);
  return result;
}

double stepwise_eta(int u, double alpha) {
  return std::pow(static_cast<double>(u) + 2.0, -alpha);
}

void stepwise_update(StepwiseState& state, const SufficientStats& batch, double eta) {
  if (state.stats.n.empty()) state.stats.n.assign(batch.n.size(), {0.0, 0.0, 0.0, 0.0});
  for (std::size_t v = 0; v < batch.n.size(); ++v)
    for (int k = 0; k < 4; ++k)
      state.stats.n[v][k] = (1.0 - eta) * state.stats.n[v][k] + eta * batch.n[v][k];
  state.stats.log_likelihood = batch.log_likelihood;
}

LatentTreeModel stepwise_em(const LatentTreeModel& model, const CaseData& data,
                            const StepwiseConfig& config, StepwiseState* state) {
  const std::size_t b = config.minibatch_size;
  if (b == 0 || b > data.size())
    throw std::invalid_argument("minibatch size must be in [1, number of documents]");
  if (config.alpha < 0.5 || config.alpha > 1.0)
    throw std::invalid_argument("alpha must lie in [0.5, 1]");
  StepwiseState local_state;
  StepwiseState& st = state ? *state : local_state;
  st.alpha = config.alpha;
  st.stats.n.assign(model.size(), {0.0, 0.0, 0.0, 0.0});
  st.updates = 0;

  Rng rng(config.seed);
  std::vector<std::size_t> perm(data.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  const std::size_t per_pass = data.size() / b;
  std::size_t next_batch = per_pass;
  const std::vector<char> no_frozen;
  LatentTreeModel current = model;
  for (int u = 1; u <= config.updates; ++u) {
    if (next_batch == per_pass) {
      if (per_pass > 1) std::shuffle(perm.begin(), perm.end(), rng);
      next_batch = 0;
    }
    std::vector<std::size_t> idx(perm.begin() + next_batch * b,
                                 perm.begin() + (next_batch + 1) * b);
    ++next_batch;
    std::sort(idx.begin(), idx.end());
    const CaseData batch = data.subset(idx);
    const SufficientStats stats = expected_counts(current, batch);
    const double eta = config.eta ? *config.eta : stepwise_eta(u, config.alpha);
    stepwise_update(st, stats, eta);
    st.updates = u;
    current = maximize(current, st.stats, no_frozen);
  }
  return current;
}

LatentTreeModel fit_lcm(const std::vector<std::string>& vars,
                        const ProjectedData& data, const EmConfig& config,
                        const std::string& latent) {
  LatentTreeModel lcm;
  const int z = lcm.add_variable({latent, VarKind::kLatent, 1}, -1, Cpt::prior(0.5));
  for (const auto& name : vars)
    lcm.add_variable({name, VarKind::kObserved, 0}, z, Cpt::conditional(0.5, 0.5));
  EmConfig c = config;
  c.keep_initial = false;
  c.restarts = std::max(1, c.restarts);
  return batch_em(lcm, data, c).model;
}

LatentTreeModel learn_lcm(const std::vector<std::string>& vars,
                          const ProjectedData& data, const EmConfig& config,
                          const std::string& latent) {
  if (vars.size() < 3)
    throw std::invalid_argument("a latent class model needs at least three variables");
  return fit_lcm(vars, data, config, latent);
}

}  // namespace hlta
