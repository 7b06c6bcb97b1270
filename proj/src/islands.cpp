#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <stdexcept>

#include "hlta/inference.hpp"
#include "hlta/structure.hpp"

namespace hlta {

namespace {

const std::string kPemLatent = "__pem_z";

double entropy(double p1) {
  double h = 0.0;
  for (double p : {p1, 1.0 - p1})
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

EmConfig seeded(const EmConfig& base, Rng& rng) {
  EmConfig c = base;
  c.seed = rng();
  return c;
}

std::vector<std::string> names_of(const SparseBinaryCorpus& data, std::span<const int> terms) {
  std::vector<std::string> out;
  out.reserve(terms.size());
  for (int t : terms) out.push_back(data.vocab.term(t));
  return out;
}

}  // namespace

MiMatrix pairwise_mi(const SparseBinaryCorpus& data) {
  const std::size_t n = data.num_terms();
  const double docs = static_cast<double>(data.num_docs());
  MiMatrix mi(n);
  if (data.num_docs() == 0) return mi;
  // Upper triangle, row i holding the pairs (i, j > i).
  auto at = [n](std::size_t i, std::size_t j) { return i * n - i * (i + 1) / 2 + (j - i - 1); };
  std::vector<std::uint32_t> df(n, 0), co(n * (n - 1) / 2 + 1, 0);
  for (const auto& row : data.rows)
    for (std::size_t a = 0; a < row.size(); ++a) {
      ++df[row[a]];
      for (std::size_t b = a + 1; b < row.size(); ++b) ++co[at(row[a], row[b])];
    }
  for (std::size_t i = 0; i < n; ++i) {
    mi.set(i, i, entropy(df[i] / docs));
    for (std::size_t j = i + 1; j < n; ++j) {
      const double both = co[at(i, j)];
      const double only_i = df[i] - both, only_j = df[j] - both;
      const double none = docs - both - only_i - only_j;
      mi.set(i, j, mutual_information({none / docs, only_j / docs, only_i / docs, both / docs}));
    }
  }
  return mi;
}

double mi_to_set(int x, std::span<const int> set, const MiMatrix& mi) {
  if (set.empty()) throw std::invalid_argument("MI to an empty set");
  double best = -std::numeric_limits<double>::infinity();
  for (int a : set) best = std::max(best, mi(x, a));
  return best;
}

bool unidimensional(double bic_m1, double bic_m2, double delta) {
  return bic_m2 - bic_m1 < delta;
}

bool ud_test(const LatentTreeModel& m1, const LatentTreeModel& m2,
             const ProjectedData& data, double delta) {
  return unidimensional(bic(m1, data), bic(m2, data), delta);
}

LatentTreeModel pem_lcm(const LatentTreeModel& m, const std::array<std::string, 2>& anchors,
                        const std::string& x, const ProjectedData& data,
                        const EmConfig& config) {
  LatentTreeModel m1 = m;
  const int y = m1.root();
  m1.add_variable({x, VarKind::kObserved, 0}, y, Cpt::conditional(0.5, 0.5));
  return local_em(m1, {m1.name(y), anchors[0], anchors[1], x}, {x}, data, config).model;
}

LatentTreeModel pem_ltm_2l(const LatentTreeModel& m, const std::vector<std::string>& members,
                           const std::string& w, const std::string& x,
                           const ProjectedData& data, const EmConfig& config,
                           const std::string& z_name) {
  if (members.size() < 3) throw std::invalid_argument("two-latent test needs three members");
  LatentTreeModel m2 = m;
  const int y = m2.root();
  const int z = m2.add_variable({z_name, VarKind::kLatent, 1}, y, Cpt::conditional(0.5, 0.5));
  m2.reparent(m2.index_of(w), z, Cpt::conditional(0.5, 0.5));
  m2.add_variable({x, VarKind::kObserved, 0}, z, Cpt::conditional(0.5, 0.5));
  std::array<std::string, 2> anchors{members[0], members[1]};
  if (w == members[0]) anchors = {members[1], members[2]};
  if (w == members[1]) anchors = {members[0], members[2]};
  return local_em(m2, {m2.name(y), z_name, w, x, anchors[0], anchors[1]}, {z_name, w, x},
                  data, config)
      .model;
}

Island one_island(const SparseBinaryCorpus& data, const ColumnIndex& index,
                  const MiMatrix& mi, std::span<const int> pool,
                  const IslandOptions& options, const std::string& latent, Rng& rng) {
  std::vector<int> rest(pool.begin(), pool.end());
  std::sort(rest.begin(), rest.end());
  Island island;
  if (rest.size() <= 3) {
    island.members = names_of(data, rest);
    island.model = fit_lcm(island.members, project(data, index, rest),
                           seeded(options.em, rng), latent);
    return island;
  }

  // Seeds: the pair with the highest MI; the lowest indices win ties.
  int a = -1, b = -1;
  double best = -1.0;
  for (std::size_t i = 0; i < rest.size(); ++i)
    for (std::size_t j = i + 1; j < rest.size(); ++j)
      if (mi(rest[i], rest[j]) > best) {
        best = mi(rest[i], rest[j]);
        a = rest[i];
        b = rest[j];
      }
  std::vector<int> set{a, b};
  std::erase(rest, a);
  std::erase(rest, b);
  std::vector<double> to_set(mi.size(), 0.0);
  for (int x : rest) to_set[x] = std::max(mi(x, a), mi(x, b));

  // rest is sorted, so the first maximum is the lowest index.
  auto take_best = [&]() {
    auto it = std::max_element(rest.begin(), rest.end(),
                               [&](int u, int v) { return to_set[u] < to_set[v]; });
    const int x = *it;
    rest.erase(it);
    return x;
  };
  auto join = [&](int x) {
    set.push_back(x);
    for (int r : rest) to_set[r] = std::max(to_set[r], mi(r, x));
  };

  join(take_best());
  LatentTreeModel m = fit_lcm(names_of(data, set), project(data, index, set),
                              seeded(options.em, rng), latent);
  while (!rest.empty()) {
    const int x = take_best();
    int w = set.front();
    for (int s : set)
      if (mi(s, x) > mi(w, x) || (mi(s, x) == mi(w, x) && s < w)) w = s;
    std::vector<int> vars = set;
    vars.push_back(x);
    const ProjectedData d = project(data, index, vars);
    const auto members = names_of(data, set);
    const std::string& xn = data.vocab.term(x);
    const std::string& wn = data.vocab.term(w);
    LatentTreeModel m1 = pem_lcm(m, {members[0], members[1]}, xn, d, seeded(options.em, rng));
    // The last pool variable joins without a test.
    if (rest.empty()) {
      join(x);
      m = std::move(m1);
      break;
    }
    LatentTreeModel m2 =
        pem_ltm_2l(m, members, wn, xn, d, seeded(options.em, rng), kPemLatent);
    const double b1 = bic(m1, d), b2 = bic(m2, d);
    if (!unidimensional(b1, b2, options.delta)) {
      log_info("island ", latent, ": UD-test fails on ", xn, " (BIC gain ", b2 - b1,
               "), dropping ", wn);
      m.remove_leaf(m.index_of(wn));
      std::erase(set, w);
      break;
    }
    join(x);
    m = std::move(m1);
    if (set.size() >= options.mu) break;
  }
  island.model = std::move(m);
  island.members = names_of(data, set);
  return island;
}

std::vector<Island> build_islands(const SparseBinaryCorpus& data, const ColumnIndex& index,
                                  const MiMatrix& mi, const IslandOptions& options,
                                  int level, Rng& rng) {
  std::vector<int> pool(data.num_terms());
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<Island> islands;
  while (!pool.empty()) {
    if (pool.size() <= 2 && !islands.empty()) break;
    Island island = one_island(data, index, mi, pool, options,
                               latent_name(level, static_cast<int>(islands.size()) + 1), rng);
    for (const auto& name : island.members) std::erase(pool, data.vocab.find(name));
    log_info("island ", island.latent(), ": ", island.members.size(), " members, ",
             pool.size(), " variables left");
    islands.push_back(std::move(island));
  }
  if (pool.empty()) return islands;

  // A remainder too small for its own island joins the island whose latent
  // it shares the most information with.
  std::vector<SoftColumn> cols;
  for (const auto& island : islands) cols.push_back(island_posterior(island, data, index));
  for (int x : pool) {
    cols.push_back(indicator_column(x, index));
    const MiMatrix w = soft_pair_mi(cols, data.num_docs());
    cols.pop_back();
    const std::size_t self = islands.size();
    std::size_t target = 0;
    for (std::size_t i = 1; i < islands.size(); ++i)
      if (w(self, i) > w(self, target)) target = i;
    Island& isl = islands[target];
    std::vector<int> vars{data.vocab.find(isl.members[0]), data.vocab.find(isl.members[1]), x};
    isl.model = pem_lcm(isl.model, {isl.members[0], isl.members[1]}, data.vocab.term(x),
                        project(data, index, vars), seeded(options.em, rng));
    isl.members.push_back(data.vocab.term(x));
    log_info("leftover ", data.vocab.term(x), " joins island ", isl.latent());
  }
  return islands;
}

SoftColumn island_posterior(const Island& island, const SparseBinaryCorpus& data,
                            const ColumnIndex& index) {
  const LatentTreeModel& m = island.model;
  TreeInference engine(m);
  auto ws = engine.make_workspace();
  std::vector<std::uint8_t> values(m.size(), 0);
  auto posterior = [&]() {
    if (!std::isfinite(engine.collect(values.data(), ws))) return 0.5;
    engine.distribute(values.data(), ws);
    return ws.marginal[m.root()][1];
  };
  SoftColumn col;
  col.base = posterior();

  std::vector<std::pair<std::uint32_t, int>> hits;  // (doc, model variable)
  for (const auto& name : island.members)
    for (std::uint32_t d : index.postings(data.vocab.find(name)))
      hits.emplace_back(d, m.index_of(name));
  std::sort(hits.begin(), hits.end());
  for (std::size_t i = 0; i < hits.size();) {
    std::size_t j = i;
    for (; j < hits.size() && hits[j].first == hits[i].first; ++j) values[hits[j].second] = 1;
    col.docs.emplace_back(hits[i].first, posterior() - col.base);
    for (std::size_t k = i; k < j; ++k) values[hits[k].second] = 0;
    i = j;
  }
  return col;
}

SoftColumn indicator_column(int term, const ColumnIndex& index) {
  SoftColumn col;
  for (std::uint32_t d : index.postings(term)) col.docs.emplace_back(d, 1.0);
  return col;
}

MiMatrix soft_pair_mi(const std::vector<SoftColumn>& columns, std::size_t num_docs) {
  const std::size_t k = columns.size();
  MiMatrix mi(k);
  if (num_docs == 0) return mi;
  const double n = static_cast<double>(num_docs);
  std::vector<double> delta_sum(k, 0.0);
  std::vector<std::vector<std::pair<int, double>>> by_doc(num_docs);
  for (std::size_t c = 0; c < k; ++c)
    for (const auto& [d, v] : columns[c].docs) {
      delta_sum[c] += v;
      by_doc[d].emplace_back(static_cast<int>(c), v);
    }
  std::vector<double> cross(k * k, 0.0);
  for (const auto& entries : by_doc)
    for (std::size_t i = 0; i < entries.size(); ++i)
      for (std::size_t j = i + 1; j < entries.size(); ++j) {
        auto [a, va] = entries[i];
        auto [b, vb] = entries[j];
        if (a > b) std::swap(a, b);
        cross[a * k + b] += va * vb;
      }
  std::vector<double> mean(k);
  for (std::size_t c = 0; c < k; ++c) {
    mean[c] = std::clamp((n * columns[c].base + delta_sum[c]) / n, 0.0, 1.0);
    mi.set(c, c, entropy(mean[c]));
  }
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) {
      const double qa = columns[a].base, qb = columns[b].base;
      const double both = (n * qa * qb + qb * delta_sum[a] + qa * delta_sum[b] + cross[a * k + b]) / n;
      const double p11 = std::max(both, 0.0);
      const double p10 = std::max(mean[a] - p11, 0.0);
      const double p01 = std::max(mean[b] - p11, 0.0);
      const double p00 = std::max(1.0 - p11 - p10 - p01, 0.0);
      const double z = p00 + p01 + p10 + p11;
      mi.set(a, b, std::max(0.0, mutual_information({p00 / z, p01 / z, p10 / z, p11 / z})));
    }
  return mi;
}

double latent_pair_mi(const Island& a, const Island& b, const SparseBinaryCorpus& data) {
  const ColumnIndex index(data);
  return soft_pair_mi({island_posterior(a, data, index), island_posterior(b, data, index)},
                      data.num_docs())(0, 1);
}

std::vector<std::pair<int, int>> maximum_spanning_tree(const MiMatrix& weights) {
  const int k = static_cast<int>(weights.size());
  std::vector<std::pair<int, int>> candidates;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) candidates.emplace_back(i, j);
  std::stable_sort(candidates.begin(), candidates.end(), [&](const auto& e, const auto& f) {
    return weights(e.first, e.second) > weights(f.first, f.second);
  });
  std::vector<int> parent(k);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  std::vector<std::pair<int, int>> tree;
  for (const auto& [i, j] : candidates) {
    const int ri = find(i), rj = find(j);
    if (ri == rj) continue;
    parent[ri] = rj;
    tree.emplace_back(i, j);
    if (static_cast<int>(tree.size()) == k - 1) break;
  }
  return tree;
}

LatentTreeModel bridge_islands(const std::vector<Island>& islands,
                               const SparseBinaryCorpus& data, const ColumnIndex& index,
                               const EmConfig& em, Rng& rng) {
  if (islands.empty()) throw std::invalid_argument("no islands to bridge");
  if (islands.size() == 1) return islands.front().model;

  std::vector<SoftColumn> cols;
  for (const auto& island : islands) cols.push_back(island_posterior(island, data, index));
  const MiMatrix weights = soft_pair_mi(cols, data.num_docs());
  const auto tree = maximum_spanning_tree(weights);

  std::vector<std::vector<int>> adj(islands.size());
  for (const auto& [i, j] : tree) {
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());

  LatentTreeModel model = islands.front().model;
  std::vector<char> placed(islands.size(), 0);
  placed[0] = 1;
  std::deque<int> queue{0};
  while (!queue.empty()) {
    const int pa = queue.front();
    queue.pop_front();
    for (int ch : adj[pa]) {
      if (placed[ch]) continue;
      placed[ch] = 1;
      queue.push_back(ch);
      const Island& a = islands[pa];
      const Island& b = islands[ch];
      const LatentTreeModel& bm = b.model;
      const int y = model.add_variable(bm.variable(bm.root()), model.index_of(a.latent()),
                                       Cpt::conditional(0.5, 0.5));
      for (const auto& name : b.members) {
        const int v = bm.index_of(name);
        model.add_variable(bm.variable(v), y, bm.cpt(v));
      }
      std::vector<std::string> sub{a.latent(), b.latent()};
      std::vector<int> observed;
      for (const Island* isl : {&a, &b})
        for (std::size_t i = 0; i < std::min<std::size_t>(2, isl->members.size()); ++i) {
          sub.push_back(isl->members[i]);
          observed.push_back(data.vocab.find(isl->members[i]));
        }
      model = local_em(model, sub, {b.latent()}, project(data, index, observed),
                       seeded(em, rng))
                  .model;
      log_info("bridge ", a.latent(), " - ", b.latent(), " (MI ", weights(pa, ch), ")");
    }
  }
  return model;
}

}  // namespace hlta
