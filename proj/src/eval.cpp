#include "hlta/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hlta/inference.hpp"
#include "json.hpp"

namespace hlta {

double heldout_per_doc_ll(const LatentTreeModel& model, const SparseBinaryCorpus& test) {
  if (test.num_docs() == 0) throw DataError("empty test set");
  return log_likelihood(model, CaseData(model, test)) / static_cast<double>(test.num_docs());
}

DocCounts::DocCounts(const SparseBinaryCorpus& corpus) : corpus_(&corpus), index_(corpus) {}

std::size_t DocCounts::df(const std::string& word) const {
  const int t = corpus_->vocab.find(word);
  if (t < 0) throw DataError("word " + word + " not in the corpus vocabulary");
  return index_.doc_freq(t);
}

std::size_t DocCounts::co_df(const std::string& w1, const std::string& w2) const {
  const int a = corpus_->vocab.find(w1), b = corpus_->vocab.find(w2);
  if (a < 0 || b < 0) throw DataError("word not in the corpus vocabulary");
  const auto& pa = index_.postings(a);
  const auto& pb = index_.postings(b);
  std::size_t n = 0;
  for (std::size_t i = 0, j = 0; i < pa.size() && j < pb.size();) {
    if (pa[i] < pb[j]) {
      ++i;
    } else if (pb[j] < pa[i]) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

double coherence(const std::vector<std::string>& words, const DocCounts& counts) {
  double score = 0.0;
  for (std::size_t i = 1; i < words.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const std::size_t dj = counts.df(words[j]);
      if (dj == 0) throw DataError("word " + words[j] + " occurs in no document");
      score += std::log((static_cast<double>(counts.co_df(words[i], words[j])) + 1.0) /
                        static_cast<double>(dj));
    }
  return score;
}

double coherence(const std::vector<std::string>& words, const SparseBinaryCorpus& corpus) {
  return coherence(words, DocCounts(corpus));
}

Embeddings read_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read embeddings file " + path);
  Embeddings e;
  std::string line;
  bool first = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string word;
    if (!(fields >> word)) continue;
    std::vector<double> v;
    for (double x; fields >> x;) v.push_back(x);
    if (!fields.eof()) throw DataError(path + ":" + std::to_string(line_no) + ": bad number");
    if (first) {
      first = false;
      // "count dim" header: a number followed by one more number.
      if (v.size() == 1 && word.find_first_not_of("0123456789") == std::string::npos) continue;
    }
    if (v.empty()) throw DataError(path + ":" + std::to_string(line_no) + ": no vector");
    if (e.dim == 0) e.dim = v.size();
    if (v.size() != e.dim)
      throw DataError(path + ":" + std::to_string(line_no) + ": inconsistent dimension");
    e.vectors[word] = std::move(v);
  }
  return e;
}

std::optional<double> compactness(const std::vector<std::string>& words,
                                  const Embeddings& embeddings) {
  std::vector<const std::vector<double>*> vecs;
  std::vector<double> norms;
  for (const auto& w : words) {
    auto it = embeddings.vectors.find(w);
    if (it == embeddings.vectors.end()) continue;
    double n = 0.0;
    for (double x : it->second) n += x * x;
    if (!(n > 0.0)) continue;
    vecs.push_back(&it->second);
    norms.push_back(std::sqrt(n));
  }
  if (vecs.size() < 2) return std::nullopt;
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < vecs.size(); ++i)
    for (std::size_t j = i + 1; j < vecs.size(); ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < vecs[i]->size(); ++k) dot += (*vecs[i])[k] * (*vecs[j])[k];
      total += std::clamp(dot / (norms[i] * norms[j]), -1.0, 1.0);
      ++pairs;
    }
  return total / static_cast<double>(pairs);
}

EvalReport evaluate_run(const LatentTreeModel& model, const SparseBinaryCorpus& test,
                        const SparseBinaryCorpus& analyzed, const TopicHierarchy& topics,
                        const Embeddings* embeddings, std::size_t m) {
  EvalReport r;
  r.per_doc_ll = heldout_per_doc_ll(model, test);
  r.test_docs = test.num_docs();
  const DocCounts counts(analyzed);
  double coh = 0.0, comp = 0.0;
  for (const auto& node : topics.nodes) {
    TopicScore s;
    s.latent = node.topic.latent;
    s.level = node.topic.level;
    for (std::size_t i = 0; i < std::min(m, node.topic.words.size()); ++i)
      s.words.push_back(node.topic.words[i].word);
    s.coherence = coherence(s.words, counts);
    coh += s.coherence;
    if (embeddings) {
      s.compactness = compactness(s.words, *embeddings);
      if (s.compactness) {
        comp += *s.compactness;
        ++r.compactness_topics;
      }
    }
    r.topics.push_back(std::move(s));
  }
  if (!r.topics.empty()) r.mean_coherence = coh / static_cast<double>(r.topics.size());
  if (r.compactness_topics > 0)
    r.mean_compactness = comp / static_cast<double>(r.compactness_topics);
  return r;
}

std::string report_json(const EvalReport& r) {
  using ojson = nlohmann::ordered_json;
  auto opt = [](const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); };
  ojson j;
  j["per_doc_loglik"] = r.per_doc_ll;
  j["test_docs"] = r.test_docs;
  j["coherence"] = opt(r.mean_coherence);
  j["compactness"] = opt(r.mean_compactness);
  j["compactness_topics"] = r.compactness_topics;
  ojson topics = ojson::array();
  for (const auto& t : r.topics)
    topics.push_back({{"latent", t.latent},
                      {"level", t.level},
                      {"words", t.words},
                      {"coherence", t.coherence},
                      {"compactness", opt(t.compactness)}});
  j["topics"] = std::move(topics);
  return j.dump(1) + "\n";
}

std::string report_table(const EvalReport& r) {
  auto fmt = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return std::string(buf);
  };
  std::string out;
  out += "metric               value\n";
  out += "per-doc loglik       " + fmt(r.per_doc_ll) + "\n";
  out += "test documents       " + std::to_string(r.test_docs) + "\n";
  out += "topic coherence      " + fmt(r.mean_coherence) + "\n";
  out += "topic compactness    " + fmt(r.mean_compactness) + "\n";
  out += "topics scored        " + std::to_string(r.topics.size()) + "\n";
  return out;
}

}  // namespace hlta
