#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hlta/common.hpp"

namespace hlta {

// ---------------------------------------------------------------------------
// Raw text

/// A document as the token sequence left after tokenization. Order is kept so
/// that adjacent tokens can be promoted to n-grams.
struct Document {
  std::string id;
  std::vector<std::string> tokens;

  /// No tokens survived preprocessing. Such documents are kept.
  bool empty() const { return tokens.empty(); }
};

struct TextCorpus {
  std::vector<Document> docs;

  std::size_t size() const { return docs.size(); }
};

/// Lowercases, splits on non-alphanumeric bytes and drops tokens shorter than
/// two characters or consisting only of digits. Bytes >= 0x80 are treated as
/// word characters so UTF-8 words stay intact.
std::vector<std::string> tokenize(std::string_view text);

/// Reads a directory of .txt files (one document each, ids = file stems,
/// sorted by file name) or a file with one document per line (ids = 1-based
/// line numbers). Throws DataError when the path is unreadable.
TextCorpus read_text_corpus(const std::string& path);

/// One word per line; blank lines ignored.
std::unordered_set<std::string> read_stopwords(const std::string& path);

// ---------------------------------------------------------------------------
// Vocabulary

class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> terms);

  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::string& term(std::size_t i) const { return terms_[i]; }

  /// Position of a term, or -1.
  int find(const std::string& term) const;
  bool contains(const std::string& term) const { return find(term) >= 0; }

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, int> index_;
};

void write_vocabulary(const Vocabulary& vocab, const std::string& path);
Vocabulary read_vocabulary(const std::string& path);

struct SelectionOptions {
  std::unordered_set<std::string> stopwords;
  /// Terms occurring in fewer documents are dropped as barely occurring.
  int min_doc_freq = 3;
};

/// Average TF-IDF of a term: sum_d tf(t,d) * ln(|D| / df(t)) / |D|.
/// Zero for a term absent from the corpus.
double average_tfidf(const std::string& term, const TextCorpus& corpus);

/// Candidate terms sorted by average TF-IDF (descending, ties by term).
std::vector<std::pair<std::string, double>> rank_terms(
    const TextCorpus& corpus, const SelectionOptions& options = {});

/// The n terms with the highest average TF-IDF. Logs a warning and returns
/// every candidate when fewer than n exist.
Vocabulary select_vocabulary(const TextCorpus& corpus, std::size_t n,
                             const SelectionOptions& options = {});

struct NgramVocabulary {
  Vocabulary vocab;
  /// The input corpus with selected n-grams rewritten as joined tokens.
  TextCorpus corpus;
};

inline constexpr char kNgramJoiner = '-';

/// Vocabulary selection with n-gram promotion. Selected 2-grams (and 3-grams
/// when max_gram == 3) are rewritten as single joined tokens ("social-network")
/// left to right, and the top-n selection is rerun on the rewritten corpus.
/// n-grams with a stopword component are never candidates.
NgramVocabulary promote_ngrams(const TextCorpus& corpus, std::size_t n,
                               int max_gram,
                               const SelectionOptions& options = {});

// ---------------------------------------------------------------------------
// Binary document-term data

/// Documents as sorted lists of present vocabulary indices.
struct SparseBinaryCorpus {
  Vocabulary vocab;
  std::vector<std::vector<int>> rows;
  std::vector<std::string> doc_ids;

  std::size_t num_docs() const { return rows.size(); }
  std::size_t num_terms() const { return vocab.size(); }
  bool has(std::size_t doc, int term) const;

  /// Throws InvariantError unless every row is strictly increasing, in range
  /// and aligned with doc_ids.
  void check() const;
};

SparseBinaryCorpus binarize(const TextCorpus& corpus, const Vocabulary& vocab);

/// Rows restricted to the given documents, in the given order.
SparseBinaryCorpus select_docs(const SparseBinaryCorpus& corpus,
                               std::span<const std::size_t> docs);

/// Header line "N_DOCS N_TERMS", then "doc_id idx idx ..." per document.
void write_sparse_corpus(const SparseBinaryCorpus& corpus,
                         const std::string& path);
SparseBinaryCorpus read_sparse_corpus(const std::string& path,
                                      const Vocabulary& vocab);

/// Shuffles documents under the seed and puts the first round(f * N) of them
/// in the training part. Each part keeps the original document order.
std::pair<SparseBinaryCorpus, SparseBinaryCorpus> split(
    const SparseBinaryCorpus& corpus, double train_fraction,
    std::uint64_t seed);

// ---------------------------------------------------------------------------
// Projection

/// Distinct value patterns of a dataset restricted to a few variables.
/// Bit i of a pattern is the value of variables[i].
struct ProjectedData {
  struct Case {
    std::uint32_t pattern;
    double count;
  };

  std::vector<std::string> variables;
  std::vector<Case> cases;  // sorted by pattern, counts > 0

  double total() const;
  int find(const std::string& variable) const;
};

inline constexpr std::size_t kMaxProjectionWidth = 32;

/// Per-term posting lists, for projecting repeatedly onto small subsets.
class ColumnIndex {
 public:
  explicit ColumnIndex(const SparseBinaryCorpus& corpus);

  std::size_t num_docs() const { return num_docs_; }
  const std::vector<std::uint32_t>& postings(int term) const {
    return postings_[term];
  }
  std::size_t doc_freq(int term) const { return postings_[term].size(); }

 private:
  std::size_t num_docs_;
  std::vector<std::vector<std::uint32_t>> postings_;
};

ProjectedData project(const SparseBinaryCorpus& corpus,
                      std::span<const int> terms);
ProjectedData project(const SparseBinaryCorpus& corpus, const ColumnIndex& index,
                      std::span<const int> terms);
/// Marginalizes a projection onto a subset of its variables (given by name).
ProjectedData project(const ProjectedData& data,
                      std::span<const std::string> variables);

}  // namespace hlta
