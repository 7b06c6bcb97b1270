#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "hlta/corpus.hpp"
#include "hlta/model.hpp"
#include "hlta/topics.hpp"

namespace hlta {

inline constexpr std::size_t kCoherenceWords = 4;

/// Mean log P(d) over the test documents. Throws DataError when empty.
double heldout_per_doc_ll(const LatentTreeModel& model, const SparseBinaryCorpus& test);

/// Document and co-document frequencies of a corpus.
class DocCounts {
 public:
  explicit DocCounts(const SparseBinaryCorpus& corpus);

  /// D(w); throws DataError for a word outside the vocabulary.
  std::size_t df(const std::string& word) const;
  /// D(w1, w2).
  std::size_t co_df(const std::string& w1, const std::string& w2) const;

 private:
  const SparseBinaryCorpus* corpus_;
  ColumnIndex index_;
};

/// sum_{i=2..M} sum_{j<i} ln((D(wi, wj) + 1) / D(wj)) over the given words in
/// order. Throws DataError when some D(wj) is zero.
double coherence(const std::vector<std::string>& words, const DocCounts& counts);
double coherence(const std::vector<std::string>& words, const SparseBinaryCorpus& corpus);

struct Embeddings {
  std::unordered_map<std::string, std::vector<double>> vectors;
  std::size_t dim = 0;
};

/// "word v1 ... vk" per line; a leading "count dim" header line is skipped.
Embeddings read_embeddings(const std::string& path);

/// Mean cosine similarity over pairs of words that have a (nonzero) vector.
/// Empty when fewer than two words have one.
std::optional<double> compactness(const std::vector<std::string>& words,
                                  const Embeddings& embeddings);

struct TopicScore {
  std::string latent;
  int level = 0;
  std::vector<std::string> words;
  double coherence = 0.0;
  std::optional<double> compactness;
};

struct EvalReport {
  double per_doc_ll = 0.0;
  std::size_t test_docs = 0;
  std::optional<double> mean_coherence;
  std::optional<double> mean_compactness;
  std::size_t compactness_topics = 0;
  std::vector<TopicScore> topics;
};

/// Held-out LL on `test`, coherence of every topic's top-M words counted on
/// `analyzed`, and compactness when embeddings are given.
EvalReport evaluate_run(const LatentTreeModel& model, const SparseBinaryCorpus& test,
                        const SparseBinaryCorpus& analyzed, const TopicHierarchy& topics,
                        const Embeddings* embeddings, std::size_t m = kCoherenceWords);

std::string report_json(const EvalReport& report);
std::string report_table(const EvalReport& report);

}  // namespace hlta
