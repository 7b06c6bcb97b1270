#include "hlta/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

namespace hlta {

namespace fs = std::filesystem;

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

struct TermStats {
  double tf_sum = 0.0;
  std::size_t df = 0;
};

// Term frequency sums and document frequencies over token sequences.
template <typename TokensOf>
std::unordered_map<std::string, TermStats> collect_stats(
    const TextCorpus& corpus, TokensOf&& tokens_of) {
  std::unordered_map<std::string, TermStats> stats;
  std::unordered_map<std::string, int> local;
  for (const Document& doc : corpus.docs) {
    local.clear();
    for (auto& t : tokens_of(doc)) ++local[t];
    for (const auto& [term, tf] : local) {
      TermStats& s = stats[term];
      s.tf_sum += tf;
      s.df += 1;
    }
  }
  return stats;
}

double tfidf_score(const TermStats& s, std::size_t num_docs) {
  if (s.df == 0 || num_docs == 0) return 0.0;
  const double n = static_cast<double>(num_docs);
  return s.tf_sum * std::log(n / static_cast<double>(s.df)) / n;
}

void sort_ranking(std::vector<std::pair<std::string, double>>& ranking) {
  std::sort(ranking.begin(), ranking.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
}

std::vector<std::string_view> components(std::string_view token) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = token.find(kNgramJoiner, start);
    if (pos == std::string_view::npos) {
      parts.push_back(token.substr(start));
      return parts;
    }
    parts.push_back(token.substr(start, pos - start));
    start = pos + 1;
  }
}

std::size_t gram_order(std::string_view token) {
  return static_cast<std::size_t>(
             std::count(token.begin(), token.end(), kNgramJoiner)) +
         1;
}

std::string join(const std::string& a, const std::string& b) {
  std::string out;
  out.reserve(a.size() + b.size() + 1);
  out += a;
  out += kNgramJoiner;
  out += b;
  return out;
}

// Adjacent token pairs whose joined form is an n-gram of exactly `order`
// words, none of them a stopword.
std::vector<std::string> ngram_candidates(const Document& doc,
                                          std::size_t order,
                                          const SelectionOptions& options) {
  std::vector<std::string> out;
  const auto& tk = doc.tokens;
  for (std::size_t i = 0; i + 1 < tk.size(); ++i) {
    if (gram_order(tk[i]) + gram_order(tk[i + 1]) != order) continue;
    std::string joined = join(tk[i], tk[i + 1]);
    bool clean = true;
    for (auto part : components(joined)) {
      if (options.stopwords.count(std::string(part))) {
        clean = false;
        break;
      }
    }
    if (clean) out.push_back(std::move(joined));
  }
  return out;
}

std::vector<std::pair<std::string, double>> rank_stats(
    const std::unordered_map<std::string, TermStats>& stats,
    std::size_t num_docs, const SelectionOptions& options) {
  std::vector<std::pair<std::string, double>> ranking;
  ranking.reserve(stats.size());
  for (const auto& [term, s] : stats) {
    if (static_cast<int>(s.df) < options.min_doc_freq) continue;
    if (options.stopwords.count(term)) continue;
    ranking.emplace_back(term, tfidf_score(s, num_docs));
  }
  sort_ranking(ranking);
  return ranking;
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (current.size() >= 2 &&
        !std::all_of(current.begin(), current.end(),
                     [](unsigned char c) { return std::isdigit(c); })) {
      tokens.push_back(current);
    }
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_word_byte(c)) {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

TextCorpus read_text_corpus(const std::string& path) {
  TextCorpus corpus;
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path, ec)) {
      if (entry.is_regular_file() && entry.path().extension() == ".txt")
        files.push_back(entry.path());
    }
    if (ec) throw DataError("cannot list directory " + path);
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      std::ifstream in(file, std::ios::binary);
      if (!in) throw DataError("cannot read " + file.string());
      std::string text((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
      corpus.docs.push_back({file.stem().string(), tokenize(text)});
    }
    return corpus;
  }
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    corpus.docs.push_back({std::to_string(n), tokenize(line)});
  }
  return corpus;
}

std::unordered_set<std::string> read_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read stopword file " + path);
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string word;
    if (!(fields >> word)) continue;
    for (char& c : word)
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    words.insert(std::move(word));
  }
  return words;
}

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary(std::vector<std::string> terms)
    : terms_(std::move(terms)) {
  index_.reserve(terms_.size());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (!index_.emplace(terms_[i], static_cast<int>(i)).second)
      throw DataError("duplicate vocabulary term: " + terms_[i]);
  }
}

int Vocabulary::find(const std::string& term) const {
  auto it = index_.find(term);
  return it == index_.end() ? -1 : it->second;
}

void write_vocabulary(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& t : vocab.terms()) out << t << '\n';
}

Vocabulary read_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read vocabulary " + path);
  std::vector<std::string> terms;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) terms.push_back(line);
  }
  return Vocabulary(std::move(terms));
}

double average_tfidf(const std::string& term, const TextCorpus& corpus) {
  TermStats s;
  for (const Document& doc : corpus.docs) {
    const auto tf = std::count(doc.tokens.begin(), doc.tokens.end(), term);
    if (tf > 0) {
      s.tf_sum += static_cast<double>(tf);
      s.df += 1;
    }
  }
  return tfidf_score(s, corpus.size());
}

std::vector<std::pair<std::string, double>> rank_terms(
    const TextCorpus& corpus, const SelectionOptions& options) {
  auto stats = collect_stats(
      corpus, [](const Document& d) -> const std::vector<std::string>& {
        return d.tokens;
      });
  return rank_stats(stats, corpus.size(), options);
}

Vocabulary select_vocabulary(const TextCorpus& corpus, std::size_t n,
                             const SelectionOptions& options) {
  if (n == 0) throw std::invalid_argument("vocabulary size must be >= 1");
  auto ranking = rank_terms(corpus, options);
  if (ranking.size() < n) {
    log_line("warning: only " + std::to_string(ranking.size()) +
             " candidate terms for a vocabulary of " + std::to_string(n));
    n = ranking.size();
  }
  std::vector<std::string> terms;
  terms.reserve(n);
  for (std::size_t i = 0; i < n; ++i) terms.push_back(ranking[i].first);
  return Vocabulary(std::move(terms));
}

NgramVocabulary promote_ngrams(const TextCorpus& corpus, std::size_t n,
                               int max_gram, const SelectionOptions& options) {
  if (max_gram < 1 || max_gram > 3)
    throw std::invalid_argument("max_gram must be 1, 2 or 3");
  if (n == 0) throw std::invalid_argument("vocabulary size must be >= 1");

  TextCorpus current = corpus;
  for (int order = 2; order <= max_gram; ++order) {
    auto ranking = rank_terms(current, options);
    auto gram_stats = collect_stats(current, [&](const Document& d) {
      return ngram_candidates(d, static_cast<std::size_t>(order), options);
    });
    auto grams = rank_stats(gram_stats, current.size(), options);
    ranking.insert(ranking.end(), grams.begin(), grams.end());
    sort_ranking(ranking);

    std::unordered_set<std::string> selected;
    for (std::size_t i = 0; i < std::min(n, ranking.size()); ++i) {
      if (gram_order(ranking[i].first) == static_cast<std::size_t>(order))
        selected.insert(ranking[i].first);
    }
    log_info("n-gram promotion: ", selected.size(), " ", order,
             "-grams selected");
    if (selected.empty()) continue;

    for (Document& doc : current.docs) {
      std::vector<std::string> rewritten;
      rewritten.reserve(doc.tokens.size());
      const auto& tk = doc.tokens;
      for (std::size_t i = 0; i < tk.size();) {
        if (i + 1 < tk.size() &&
            gram_order(tk[i]) + gram_order(tk[i + 1]) ==
                static_cast<std::size_t>(order)) {
          std::string joined = join(tk[i], tk[i + 1]);
          if (selected.count(joined)) {
            rewritten.push_back(std::move(joined));
            i += 2;
            continue;
          }
        }
        rewritten.push_back(tk[i]);
        ++i;
      }
      doc.tokens = std::move(rewritten);
    }
  }
  Vocabulary vocab = select_vocabulary(current, n, options);
  return {std::move(vocab), std::move(current)};
}

// ---------------------------------------------------------------------------

bool SparseBinaryCorpus::has(std::size_t doc, int term) const {
  const auto& row = rows[doc];
  return std::binary_search(row.begin(), row.end(), term);
}

void SparseBinaryCorpus::check() const {
  if (rows.size() != doc_ids.size())
    throw InvariantError("corpus rows and document ids differ in length");
  const int n = static_cast<int>(vocab.size());
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (row[i] < 0 || row[i] >= n)
        throw InvariantError("term index out of range");
      if (i > 0 && row[i] <= row[i - 1])
        throw InvariantError("corpus row not strictly increasing");
    }
  }
}

SparseBinaryCorpus binarize(const TextCorpus& corpus, const Vocabulary& vocab) {
  if (vocab.empty()) throw std::invalid_argument("empty vocabulary");
  SparseBinaryCorpus out;
  out.vocab = vocab;
  out.rows.reserve(corpus.size());
  out.doc_ids.reserve(corpus.size());
  for (const Document& doc : corpus.docs) {
    std::vector<int> row;
    for (const auto& t : doc.tokens) {
      int idx = vocab.find(t);
      if (idx >= 0) row.push_back(idx);
    }
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    out.rows.push_back(std::move(row));
    out.doc_ids.push_back(doc.id);
  }
  return out;
}

SparseBinaryCorpus select_docs(const SparseBinaryCorpus& corpus,
                               std::span<const std::size_t> docs) {
  SparseBinaryCorpus out;
  out.vocab = corpus.vocab;
  out.rows.reserve(docs.size());
  out.doc_ids.reserve(docs.size());
  for (std::size_t d : docs) {
    out.rows.push_back(corpus.rows.at(d));
    out.doc_ids.push_back(corpus.doc_ids.at(d));
  }
  return out;
}

void write_sparse_corpus(const SparseBinaryCorpus& corpus,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << corpus.num_docs() << ' ' << corpus.num_terms() << '\n';
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    std::string id = corpus.doc_ids[d];
    for (char& c : id)
      if (std::isspace(static_cast<unsigned char>(c))) c = '_';
    if (id.empty()) id = std::to_string(d + 1);
    out << id;
    for (int idx : corpus.rows[d]) out << ' ' << idx;
    out << '\n';
  }
}

SparseBinaryCorpus read_sparse_corpus(const std::string& path,
                                      const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read corpus " + path);
  std::size_t num_docs = 0, num_terms = 0;
  std::string line;
  if (!std::getline(in, line))
    throw DataError("empty corpus file " + path);
  {
    std::istringstream header(line);
    if (!(header >> num_docs >> num_terms))
      throw DataError("bad corpus header in " + path);
  }
  if (num_terms != vocab.size())
    throw DataError("corpus has " + std::to_string(num_terms) +
                    " terms but the vocabulary has " +
                    std::to_string(vocab.size()));
  SparseBinaryCorpus corpus;
  corpus.vocab = vocab;
  corpus.rows.reserve(num_docs);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string id;
    fields >> id;
    std::vector<int> row;
    long idx;
    while (fields >> idx) {
      if (idx < 0 || static_cast<std::size_t>(idx) >= num_terms)
        throw DataError("term index out of range in " + path);
      row.push_back(static_cast<int>(idx));
    }
    if (!fields.eof()) throw DataError("malformed corpus line in " + path);
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    corpus.rows.push_back(std::move(row));
    corpus.doc_ids.push_back(std::move(id));
  }
  if (corpus.rows.size() != num_docs)
    throw DataError("corpus header announces " + std::to_string(num_docs) +
                    " documents, file has " +
                    std::to_string(corpus.rows.size()));
  return corpus;
}

std::pair<SparseBinaryCorpus, SparseBinaryCorpus> split(
    const SparseBinaryCorpus& corpus, double train_fraction,
    std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train fraction must lie in (0, 1)");
  const std::size_t n = corpus.num_docs();
  if (n < 2) throw DataError("cannot split a corpus with fewer than 2 documents");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto train_size = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(n)));
  train_size = std::clamp<std::size_t>(train_size, 1, n - 1);
  std::vector<std::size_t> train(order.begin(), order.begin() + train_size);
  std::vector<std::size_t> test(order.begin() + train_size, order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {select_docs(corpus, train), select_docs(corpus, test)};
}

// ---------------------------------------------------------------------------

double ProjectedData::total() const {
  double t = 0.0;
  for (const auto& c : cases) t += c.count;
  return t;
}

int ProjectedData::find(const std::string& variable) const {
  auto it = std::find(variables.begin(), variables.end(), variable);
  return it == variables.end() ? -1
                               : static_cast<int>(it - variables.begin());
}

ColumnIndex::ColumnIndex(const SparseBinaryCorpus& corpus)
    : num_docs_(corpus.num_docs()), postings_(corpus.num_terms()) {
  for (std::size_t d = 0; d < corpus.num_docs(); ++d)
    for (int t : corpus.rows[d])
      postings_[t].push_back(static_cast<std::uint32_t>(d));
}

namespace {

void check_width(std::size_t width) {
  if (width > kMaxProjectionWidth)
    throw std::invalid_argument("projection onto more than 32 variables");
}

std::vector<ProjectedData::Case> run_length(std::vector<std::uint32_t>& patterns,
                                            double zero_count) {
  std::sort(patterns.begin(), patterns.end());
  std::vector<ProjectedData::Case> cases;
  if (zero_count > 0) cases.push_back({0u, zero_count});
  for (std::size_t i = 0; i < patterns.size();) {
    std::size_t j = i;
    while (j < patterns.size() && patterns[j] == patterns[i]) ++j;
    if (patterns[i] == 0u && !cases.empty() && cases.front().pattern == 0u)
      cases.front().count += static_cast<double>(j - i);
    else
      cases.push_back({patterns[i], static_cast<double>(j - i)});
    i = j;
  }
  return cases;
}

std::vector<std::string> names_of(const SparseBinaryCorpus& corpus,
                                  std::span<const int> terms) {
  std::vector<std::string> names;
  names.reserve(terms.size());
  for (int t : terms) names.push_back(corpus.vocab.term(t));
  return names;
}

}  // namespace

ProjectedData project(const SparseBinaryCorpus& corpus,
                      std::span<const int> terms) {
  check_width(terms.size());
  std::vector<int> bit(corpus.num_terms(), -1);
  for (std::size_t i = 0; i < terms.size(); ++i) bit.at(terms[i]) = static_cast<int>(i);
  std::vector<std::uint32_t> patterns;
  patterns.reserve(corpus.num_docs());
  for (const auto& row : corpus.rows) {
    std::uint32_t p = 0;
    for (int t : row)
      if (bit[t] >= 0) p |= 1u << bit[t];
    patterns.push_back(p);
  }
  ProjectedData out;
  out.variables = names_of(corpus, terms);
  out.cases = run_length(patterns, 0.0);
  return out;
}

ProjectedData project(const SparseBinaryCorpus& corpus, const ColumnIndex& index,
                      std::span<const int> terms) {
  check_width(terms.size());
  thread_local std::vector<std::uint32_t> scratch;
  if (scratch.size() < index.num_docs()) scratch.assign(index.num_docs(), 0u);
  std::vector<std::uint32_t> touched;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    for (std::uint32_t d : index.postings(terms[i])) {
      if (scratch[d] == 0u) touched.push_back(d);
      scratch[d] |= 1u << i;
    }
  }
  std::vector<std::uint32_t> patterns;
  patterns.reserve(touched.size());
  for (std::uint32_t d : touched) {
    patterns.push_back(scratch[d]);
    scratch[d] = 0u;
  }
  ProjectedData out;
  out.variables = names_of(corpus, terms);
  out.cases = run_length(
      patterns, static_cast<double>(index.num_docs() - touched.size()));
  return out;
}

ProjectedData project(const ProjectedData& data,
                      std::span<const std::string> variables) {
  check_width(variables.size());
  std::vector<int> source(variables.size());
  for (std::size_t i = 0; i < variables.size(); ++i) {
    source[i] = data.find(variables[i]);
    if (source[i] < 0)
      throw DataError("variable " + variables[i] + " not in projected data");
  }
  std::map<std::uint32_t, double> counts;
  for (const auto& c : data.cases) {
    std::uint32_t p = 0;
    for (std::size_t i = 0; i < source.size(); ++i)
      if (c.pattern >> source[i] & 1u) p |= 1u << i;
    counts[p] += c.count;
  }
  ProjectedData out;
  out.variables.assign(variables.begin(), variables.end());
  for (const auto& [p, n] : counts) out.cases.push_back({p, n});
  return out;
}

}  // namespace hlta
