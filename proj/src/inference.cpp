#include "hlta/inference.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace hlta {

namespace {

constexpr double kRescaleBelow = 0x1p-256;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Divides v by the power of two nearest its largest entry; returns the
// exponent removed. Exact in floating point.
inline int rescale(std::array<double, 2>& v) {
  const double s = std::max(v[0], v[1]);
  if (!(s > 0.0)) return 0;
  int e;
  std::frexp(s, &e);
  v[0] = std::ldexp(v[0], -e);
  v[1] = std::ldexp(v[1], -e);
  return e;
}

inline void mul(std::array<double, 2>& a, const std::array<double, 2>& b) {
  a[0] *= b[0];
  a[1] *= b[1];
}

}  // namespace

TreeInference::TreeInference(const LatentTreeModel& model) {
  const auto order = model.topological_order();
  const int n = static_cast<int>(order.size());
  std::vector<int> pos(model.size(), -1);
  for (int p = 0; p < n; ++p) pos[order[p]] = p;
  var_ = order;
  parent_pos_.resize(n);
  first_child_.assign(n, 0);
  num_children_.assign(n, 0);
  observed_.resize(n);
  cpt_.resize(n);
  for (int p = 0; p < n; ++p) {
    const int v = order[p];
    parent_pos_[p] = model.parent(v) < 0 ? -1 : pos[model.parent(v)];
    observed_[p] = model.variable(v).latent() ? 0 : 1;
    cpt_[p] = model.cpt(v);
    const auto& ch = model.children(v);
    num_children_[p] = static_cast<int>(ch.size());
    first_child_[p] = ch.empty() ? 0 : pos[ch.front()];
    for (std::size_t i = 0; i < ch.size(); ++i)
      if (pos[ch[i]] != first_child_[p] + static_cast<int>(i))
        throw InvariantError("children are not contiguous in BFS order");
    max_children_ = std::max(max_children_, ch.size());
  }
}

TreeInference::Workspace TreeInference::make_workspace() const {
  Workspace ws;
  const std::size_t n = var_.size();
  ws.lambda.resize(n);
  ws.up.resize(n);
  ws.down.resize(n);
  ws.prefix.resize(max_children_ + 1);
  ws.suffix.resize(max_children_ + 1);
  ws.marginal.resize(n);
  ws.pair.resize(n);
  return ws;
}

double TreeInference::collect(const std::uint8_t* values, Workspace& ws) const {
  const int n = static_cast<int>(var_.size());
  long exponent = 0;
  for (int p = n - 1; p >= 0; --p) {
    std::array<double, 2> lam{1.0, 1.0};
    if (observed_[p]) lam[values[var_[p]] ? 0 : 1] = 0.0;
    const int f = first_child_[p];
    for (int c = f; c < f + num_children_[p]; ++c) {
      mul(lam, ws.up[c]);
      if (std::max(lam[0], lam[1]) < kRescaleBelow) exponent += rescale(lam);
    }
    ws.lambda[p] = lam;
    if (p == 0) break;
    const Cpt& t = cpt_[p];
    std::array<double, 2> up{t.p[0] * lam[0] + t.p[1] * lam[1],
                             t.p[2] * lam[0] + t.p[3] * lam[1]};
    if (!(std::max(up[0], up[1]) > 0.0)) return kNegInf;
    exponent += rescale(up);
    ws.up[p] = up;
  }
  const Cpt& prior = cpt_[0];
  const double total = prior.p[0] * ws.lambda[0][0] + prior.p[1] * ws.lambda[0][1];
  if (!(total > 0.0)) return kNegInf;
  return std::log(total) + static_cast<double>(exponent) * std::numbers::ln2;
}

void TreeInference::distribute(const std::uint8_t* values, Workspace& ws) const {
  const int n = static_cast<int>(var_.size());
  {
    const Cpt& prior = cpt_[0];
    ws.down[0] = {prior.p[0], prior.p[1]};
    std::array<double, 2> post{prior.p[0] * ws.lambda[0][0],
                               prior.p[1] * ws.lambda[0][1]};
    const double z = post[0] + post[1];
    ws.marginal[var_[0]] = {post[0] / z, post[1] / z};
    ws.pair[var_[0]] = {post[0] / z, post[1] / z, 0.0, 0.0};
  }
  for (int p = 0; p < n; ++p) {
    const int m = num_children_[p];
    if (m == 0) continue;
    const int f = first_child_[p];
    std::array<double, 2> base = ws.down[p];
    if (observed_[p]) base[values[var_[p]] ? 0 : 1] = 0.0;
    auto& pre = ws.prefix;
    auto& suf = ws.suffix;
    pre[0] = base;
    for (int i = 0; i < m; ++i) {
      pre[i + 1] = pre[i];
      mul(pre[i + 1], ws.up[f + i]);
      if (std::max(pre[i + 1][0], pre[i + 1][1]) < kRescaleBelow) rescale(pre[i + 1]);
    }
    suf[m] = {1.0, 1.0};
    for (int i = m - 1; i >= 0; --i) {
      suf[i] = suf[i + 1];
      mul(suf[i], ws.up[f + i]);
      if (std::max(suf[i][0], suf[i][1]) < kRescaleBelow) rescale(suf[i]);
    }
    for (int i = 0; i < m; ++i) {
      const int c = f + i;
      std::array<double, 2> out = pre[i];
      mul(out, suf[i + 1]);
      const Cpt& t = cpt_[c];
      const auto& lam = ws.lambda[c];
      std::array<double, 4> joint{out[0] * t.p[0] * lam[0], out[0] * t.p[1] * lam[1],
                                  out[1] * t.p[2] * lam[0], out[1] * t.p[3] * lam[1]};
      const double z = joint[0] + joint[1] + joint[2] + joint[3];
      for (double& x : joint) x /= z;
      ws.pair[var_[c]] = joint;
      ws.marginal[var_[c]] = {joint[0] + joint[2], joint[1] + joint[3]};
      std::array<double, 2> down{out[0] * t.p[0] + out[1] * t.p[2],
                                 out[0] * t.p[1] + out[1] * t.p[3]};
      rescale(down);
      ws.down[c] = down;
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

void check_evidence(const LatentTreeModel& model, const Assignment& doc) {
  if (doc.size() != model.size())
    throw std::invalid_argument("evidence must hold one value per variable");
}

}  // namespace

double doc_log_likelihood(const LatentTreeModel& model, const Assignment& doc) {
  check_evidence(model, doc);
  TreeInference engine(model);
  auto ws = engine.make_workspace();
  return engine.collect(doc.data(), ws);
}

Posteriors pairwise_posterior(const LatentTreeModel& model, const Assignment& doc) {
  check_evidence(model, doc);
  TreeInference engine(model);
  auto ws = engine.make_workspace();
  Posteriors out;
  out.log_likelihood = engine.collect(doc.data(), ws);
  if (std::isfinite(out.log_likelihood)) {
    engine.distribute(doc.data(), ws);
    out.marginal = std::move(ws.marginal);
    out.pair = std::move(ws.pair);
  } else {
    out.marginal.assign(model.size(), {0.0, 0.0});
    out.pair.assign(model.size(), {0.0, 0.0, 0.0, 0.0});
  }
  return out;
}

std::array<double, 2> posterior_marginal(const LatentTreeModel& model,
                                         const Assignment& doc, int v) {
  return pairwise_posterior(model, doc).marginal.at(v);
}

Posteriors brute_force_posteriors(const LatentTreeModel& model,
                                  const Assignment& doc) {
  check_evidence(model, doc);
  if (model.size() > kBruteForceMaxVariables)
    throw std::length_error("brute-force inference limited to 20 variables");
  const auto latents = model.latents();
  const std::size_t count = std::size_t{1} << latents.size();
  Assignment values = doc;
  std::vector<double> logp(count);
  double best = kNegInf;
  for (std::size_t h = 0; h < count; ++h) {
    for (std::size_t i = 0; i < latents.size(); ++i) values[latents[i]] = (h >> i) & 1u;
    logp[h] = joint_log_prob(model, values);
    best = std::max(best, logp[h]);
  }
  Posteriors out;
  out.marginal.assign(model.size(), {0.0, 0.0});
  out.pair.assign(model.size(), {0.0, 0.0, 0.0, 0.0});
  if (best == kNegInf) {
    out.log_likelihood = kNegInf;
    return out;
  }
  double z = 0.0;
  for (std::size_t h = 0; h < count; ++h) z += std::exp(logp[h] - best);
  out.log_likelihood = best + std::log(z);
  for (std::size_t h = 0; h < count; ++h) {
    const double w = std::exp(logp[h] - best) / z;
    if (w == 0.0) continue;
    for (std::size_t i = 0; i < latents.size(); ++i) values[latents[i]] = (h >> i) & 1u;
    for (int v = 0; v < static_cast<int>(model.size()); ++v) {
      const int k = values[v];
      out.marginal[v][k] += w;
      const int p = model.parent(v);
      if (p < 0)
        out.pair[v][k] += w;
      else
        out.pair[v][2 * values[p] + k] += w;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

void CaseData::push(std::span<const int> active, double weight) {
  active_.insert(active_.end(), active.begin(), active.end());
  offsets_.push_back(active_.size());
  weights_.push_back(weight);
}

CaseData::CaseData(const LatentTreeModel& model, const SparseBinaryCorpus& corpus) {
  std::vector<int> column_var(corpus.num_terms(), -1);
  for (std::size_t t = 0; t < corpus.num_terms(); ++t) {
    const int v = model.find(corpus.vocab.term(t));
    if (v >= 0 && model.variable(v).latent())
      throw DataError("data column " + corpus.vocab.term(t) + " is latent in the model");
    column_var[t] = v;
  }
  for (int v : model.observed())
    if (!corpus.vocab.contains(model.name(v)))
      throw DataError("data has no column for variable " + model.name(v));
  std::vector<int> active;
  weights_.reserve(corpus.num_docs());
  for (const auto& row : corpus.rows) {
    active.clear();
    for (int t : row)
      if (column_var[t] >= 0) active.push_back(column_var[t]);
    push(active, 1.0);
  }
}

CaseData::CaseData(const LatentTreeModel& model, const ProjectedData& data) {
  std::vector<int> bit_var(data.variables.size(), -1);
  for (std::size_t i = 0; i < data.variables.size(); ++i) {
    const int v = model.find(data.variables[i]);
    if (v >= 0 && model.variable(v).latent())
      throw DataError("data column " + data.variables[i] + " is latent in the model");
    bit_var[i] = v;
  }
  for (int v : model.observed())
    if (data.find(model.name(v)) < 0)
      throw DataError("data has no column for variable " + model.name(v));
  std::vector<int> active;
  for (const auto& c : data.cases) {
    active.clear();
    for (std::size_t i = 0; i < bit_var.size(); ++i)
      if ((c.pattern >> i & 1u) && bit_var[i] >= 0) active.push_back(bit_var[i]);
    push(active, c.count);
  }
}

double CaseData::total_weight() const {
  double t = 0.0;
  for (double w : weights_) t += w;
  return t;
}

void CaseData::fill(std::size_t i, std::uint8_t* values) const {
  for (int v : active(i)) values[v] = 1;
}

void CaseData::clear(std::size_t i, std::uint8_t* values) const {
  for (int v : active(i)) values[v] = 0;
}

CaseData CaseData::subset(std::span<const std::size_t> indices) const {
  CaseData out;
  for (std::size_t i : indices) out.push(active(i), weights_.at(i));
  return out;
}

double log_likelihood(const LatentTreeModel& model, const CaseData& data) {
  TreeInference engine(model);
  constexpr std::size_t kChunk = 512;
  const std::size_t chunks = (data.size() + kChunk - 1) / kChunk;
  std::vector<double> partial(chunks, 0.0);
  for_each_chunk(data.size(), kChunk, [&](std::size_t c, std::size_t b, std::size_t e) {
    auto ws = engine.make_workspace();
    std::vector<std::uint8_t> values(model.size(), 0);
    double sum = 0.0;
    for (std::size_t i = b; i < e; ++i) {
      data.fill(i, values.data());
      sum += data.weight(i) * engine.collect(values.data(), ws);
      data.clear(i, values.data());
    }
    partial[c] = sum;
  });
  double total = 0.0;
  for (double x : partial) total += x;
  return total;
}

double bic(const LatentTreeModel& model, const CaseData& data) {
  const double n = data.total_weight();
  if (data.size() == 0 || !(n > 0.0)) throw DataError("BIC of empty data");
  return log_likelihood(model, data) -
         0.5 * free_param_count(model) * std::log(n);
}

double bic(const LatentTreeModel& model, const ProjectedData& data) {
  return bic(model, CaseData(model, data));
}

}  // namespace hlta
