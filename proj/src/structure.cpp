#include <chrono>
#include <cmath>
#include <numeric>

#include "hlta/inference.hpp"
#include "hlta/structure.hpp"

namespace hlta {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

void relabel_minority_states(LatentTreeModel& model) {
  const auto m = marginals(model);
  for (int z : model.latents())
    if (m[z] > 0.5) model.swap_states(z);
}

SparseBinaryCorpus hard_assignment(const LatentTreeModel& model,
                                   const SparseBinaryCorpus& data) {
  const CaseData cases(model, data);
  const auto latents = model.latents();
  std::vector<std::string> names;
  for (int z : latents) names.push_back(model.name(z));

  SparseBinaryCorpus out;
  out.vocab = Vocabulary(names);
  out.doc_ids = data.doc_ids;
  out.rows.resize(cases.size());
  TreeInference engine(model);
  for_each_chunk(cases.size(), 256, [&](std::size_t, std::size_t b, std::size_t e) {
    auto ws = engine.make_workspace();
    std::vector<std::uint8_t> values(model.size(), 0);
    for (std::size_t i = b; i < e; ++i) {
      cases.fill(i, values.data());
      if (std::isfinite(engine.collect(values.data(), ws))) {
        engine.distribute(values.data(), ws);
        for (std::size_t c = 0; c < latents.size(); ++c) {
          const auto& p = ws.marginal[latents[c]];
          if (p[1] > p[0]) out.rows[i].push_back(static_cast<int>(c));
        }
      }
      cases.clear(i, values.data());
    }
  });
  return out;
}

LatentTreeModel learn_flat_model(const SparseBinaryCorpus& data,
                                 const IslandOptions& options, int level, Rng& rng) {
  const ColumnIndex index(data);
  const MiMatrix mi = pairwise_mi(data);
  const auto islands = build_islands(data, index, mi, options, level, rng);
  LatentTreeModel flat = bridge_islands(islands, data, index, options.em, rng);
  relabel_minority_states(flat);
  return flat;
}

HltaResult run_hlta(const SparseBinaryCorpus& corpus, const HltaConfig& config) {
  if (corpus.num_terms() < 3) throw DataError("HLTA needs at least three terms");
  if (corpus.num_docs() == 0) throw DataError("HLTA needs at least one document");
  if (config.tau < 1) throw std::invalid_argument("tau must be >= 1");
  if (config.mu < 4) throw std::invalid_argument("mu must be >= 4");
  if (config.delta < 0.0) throw std::invalid_argument("delta must be >= 0");
  if (config.kappa < 0) throw std::invalid_argument("kappa must be >= 0");

  HltaResult result;
  Rng rng(config.seed);
  const auto start = std::chrono::steady_clock::now();

  SparseBinaryCorpus current;
  if (config.subsample > 0 && config.subsample < corpus.num_docs()) {
    std::vector<std::size_t> docs(corpus.num_docs());
    std::iota(docs.begin(), docs.end(), std::size_t{0});
    std::shuffle(docs.begin(), docs.end(), rng);
    docs.resize(config.subsample);
    std::sort(docs.begin(), docs.end());
    current = select_docs(corpus, docs);
    log_info("structure phase on ", docs.size(), " of ", corpus.num_docs(), " documents");
  } else {
    current = corpus;
  }

  IslandOptions options;
  options.delta = config.delta;
  options.mu = config.mu;
  options.em.max_iters = config.island_iters;
  options.em.restarts = config.island_restarts;

  LatentTreeModel model;
  for (int level = 1;; ++level) {
    const auto t0 = std::chrono::steady_clock::now();
    LatentTreeModel flat = learn_flat_model(current, options, level, rng);
    const std::size_t tops = flat.latents().size();
    model = level == 1 ? flat : stack_models(flat, model);
    result.levels.push_back({level, current.num_terms(), tops, seconds_since(t0)});
    log_info("level ", level, ": ", current.num_terms(), " variables -> ", tops,
             " latents (", result.levels.back().seconds, " s)");
    if (tops <= config.tau) break;
    if (tops >= current.num_terms()) {
      log_line("[warning] level " + std::to_string(level) +
               " did not reduce the number of variables; stopping with " +
               std::to_string(tops) + " top-level latents");
      break;
    }
    if (tops <= 2)
      log_line("[warning] next level has " + std::to_string(tops) +
               " variables; its latent will have fewer than three neighbors");
    current = hard_assignment(flat, current);
  }
  result.structure_seconds = seconds_since(start);

  const auto t1 = std::chrono::steady_clock::now();
  const CaseData full(model, corpus);
  if (config.final_em == FinalEm::kBatch) {
    if (config.kappa > 0) {
      EmConfig em;
      em.max_iters = config.kappa;
      em.restarts = 1;
      em.seed = rng();
      EmResult fit = batch_em(model, full, em);
      model = std::move(fit.model);
      result.train_log_likelihood = fit.log_likelihood;
    } else {
      result.train_log_likelihood = log_likelihood(model, full);
    }
  } else {
    StepwiseConfig sw;
    sw.minibatch_size = std::min(config.minibatch, full.size());
    if (sw.minibatch_size < config.minibatch)
      log_line("[warning] minibatch reduced to the corpus size " +
               std::to_string(sw.minibatch_size));
    sw.updates = config.stepwise_updates;
    sw.alpha = config.alpha;
    sw.seed = rng();
    model = stepwise_em(model, full, sw);
    result.train_log_likelihood = log_likelihood(model, full);
  }
  result.final_seconds = seconds_since(t1);
  log_info("final EM: loglik ", result.train_log_likelihood, " (", result.final_seconds, " s)");

  model.check();
  const auto violations = hltm_violations(model);
  if (!violations.empty())
    throw InvariantError("learned model is not hierarchical: " + violations.front());
  result.model = std::move(model);
  return result;
}

}  // namespace hlta
