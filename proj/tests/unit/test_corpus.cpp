#include <cmath>
#include <numeric>

#include "doctest.h"
#include "hlta/corpus.hpp"
#include "testing.hpp"

using namespace hlta;
using hlta::testing::doc;

namespace {

SelectionOptions keep_all() {
  SelectionOptions o;
  o.min_doc_freq = 1;
  return o;
}

SparseBinaryCorpus rows_corpus(std::size_t terms, const std::vector<std::vector<int>>& rows) {
  std::vector<std::string> names;
  for (std::size_t t = 0; t < terms; ++t) names.push_back("w" + std::to_string(t));
  SparseBinaryCorpus c;
  c.vocab = Vocabulary(names);
  c.rows = rows;
  for (std::size_t d = 0; d < rows.size(); ++d) c.doc_ids.push_back("d" + std::to_string(d));
  return c;
}

}  // namespace

TEST_CASE("tokenize lowercases and drops short and numeric tokens") {
  CHECK(tokenize("Hello, World! 42 a x2 NASA's") ==
        std::vector<std::string>{"hello", "world", "x2", "nasa"});
  CHECK(tokenize("") .empty());
}

TEST_CASE("average tf-idf") {
  TextCorpus c;
  c.docs = {doc("a", {"common", "rare", "rare"}), doc("b", {"common"}), doc("c", {"common"}),
            doc("d", {"common"})};
  CHECK(average_tfidf("common", c) == 0.0);
  CHECK(average_tfidf("rare", c) == doctest::Approx(2.0 * std::log(4.0) / 4.0).epsilon(1e-12));
  CHECK(average_tfidf("rare", c) == doctest::Approx(0.6931).epsilon(1e-4));
  CHECK(average_tfidf("absent", c) == 0.0);
}

TEST_CASE("vocabulary selection") {
  TextCorpus c;
  c.docs = {doc("1", {"nasa", "nasa", "nasa", "the"}), doc("2", {"nasa", "orbit", "the"}),
            doc("3", {"orbit", "the"}), doc("4", {"game", "the"}), doc("5", {"the"})};

  SUBCASE("the top term") {
    CHECK(select_vocabulary(c, 1, keep_all()).terms() == std::vector<std::string>{"nasa"});
  }
  SUBCASE("saturation returns every candidate") {
    const auto v = select_vocabulary(c, 100, keep_all());
    CHECK(v.size() == 4);
  }
  SUBCASE("ties go to the lexicographically smaller term") {
    TextCorpus t;
    t.docs = {doc("1", {"ab"}), doc("2", {"aa"}), doc("3", {"zz", "zz", "zz"})};
    CHECK(select_vocabulary(t, 2, keep_all()).terms() == std::vector<std::string>{"zz", "aa"});
  }
  SUBCASE("stopwords and rare terms are removed") {
    SelectionOptions o;
    o.min_doc_freq = 2;
    o.stopwords = {"orbit"};
    // "the" is in every document, so it scores zero but stays a candidate.
    const auto v = select_vocabulary(c, 10, o);
    CHECK(v.terms() == std::vector<std::string>{"nasa", "the"});
  }
  SUBCASE("the selection is a prefix of the ranking") {
    const auto ranking = rank_terms(c, keep_all());
    const auto v = select_vocabulary(c, 3, keep_all());
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(v.term(i) == ranking[i].first);
  }
}

TEST_CASE("n-gram promotion") {
  TextCorpus c;
  for (int i = 0; i < 6; ++i)
    c.docs.push_back(
        doc(std::to_string(i), {"social", "network", "analysis", "social", "network"}));
  for (int i = 6; i < 12; ++i) c.docs.push_back(doc(std::to_string(i), {"data", "cooking"}));

  SUBCASE("a recurring bigram becomes one token") {
    // The bigram ties its unigrams and sorts after them.
    const auto out = promote_ngrams(c, 3, 2, keep_all());
    CHECK(out.vocab.contains("social-network"));
    CHECK(out.corpus.docs[0].tokens.front() == "social-network");
  }
  SUBCASE("max_gram 1 matches plain selection") {
    CHECK(promote_ngrams(c, 4, 1, keep_all()).vocab.terms() ==
          select_vocabulary(c, 4, keep_all()).terms());
  }
  SUBCASE("bigrams ranked below the cut leave the unigram vocabulary") {
    TextCorpus t;
    t.docs = {doc("1", {"gamma", "gamma", "gamma"}), doc("2", {"delta", "delta"}),
              doc("3", {"alpha", "beta"}), doc("4", {"epsilon"})};
    CHECK(promote_ngrams(t, 2, 2, keep_all()).vocab.terms() ==
          select_vocabulary(t, 2, keep_all()).terms());
  }
  SUBCASE("bad max_gram") { CHECK_THROWS_AS(promote_ngrams(c, 4, 4), std::invalid_argument); }
}

TEST_CASE("binarize") {
  TextCorpus c;
  c.docs = {doc("a", {"space", "space", "space", "space", "space"}), doc("b", {"other"}),
            doc("c", {"nasa", "space"}), doc("d", {"nasa"})};
  const auto b = binarize(c, Vocabulary({"space", "nasa"}));
  CHECK(b.rows == std::vector<std::vector<int>>{{0}, {}, {0, 1}, {1}});
  CHECK(b.doc_ids == std::vector<std::string>{"a", "b", "c", "d"});
  CHECK_NOTHROW(b.check());
}

TEST_CASE("sparse corpus and vocabulary files round-trip") {
  testing::TempDir dir;
  const auto c = rows_corpus(3, {{0, 2}, {}, {1}});
  write_vocabulary(c.vocab, dir.file("v.txt"));
  write_sparse_corpus(c, dir.file("c.txt"));
  const auto v = read_vocabulary(dir.file("v.txt"));
  const auto back = read_sparse_corpus(dir.file("c.txt"), v);
  CHECK(back.rows == c.rows);
  CHECK(back.doc_ids == c.doc_ids);
  CHECK(back.vocab.terms() == c.vocab.terms());

  dir.write("bad.txt", "1 3\nd0 0 7\n");
  CHECK_THROWS_AS(read_sparse_corpus(dir.file("bad.txt"), v), DataError);
  CHECK_THROWS_AS(read_sparse_corpus(dir.file("missing.txt"), v), DataError);
}

TEST_CASE("text corpus readers") {
  testing::TempDir dir;
  std::filesystem::create_directories(dir.path() / "docs");
  dir.write("docs/b.txt", "Shuttle mission");
  dir.write("docs/a.txt", "NASA space");
  dir.write("docs/skip.md", "ignored");
  const auto c = read_text_corpus(dir.file("docs"));
  REQUIRE(c.size() == 2);
  CHECK(c.docs[0].id == "a");
  CHECK(c.docs[0].tokens == std::vector<std::string>{"nasa", "space"});

  const auto lines = read_text_corpus(dir.write("lines.txt", "one doc\n\nthird doc\n"));
  REQUIRE(lines.size() == 3);
  CHECK(lines.docs[1].empty());
  CHECK(lines.docs[2].id == "3");

  CHECK_THROWS_AS(read_text_corpus(dir.file("nothing")), DataError);
  CHECK(read_stopwords(dir.write("stop.txt", "The\n\nof\n")) ==
        std::unordered_set<std::string>{"the", "of"});
}

TEST_CASE("projection") {
  Rng rng(7);
  std::vector<std::vector<int>> rows(1000);
  for (auto& r : rows)
    for (int t = 0; t < 5; ++t)
      if (rng() & 1u) r.push_back(t);
  const auto c = rows_corpus(5, rows);
  const ColumnIndex index(c);

  SUBCASE("three variables give at most eight patterns") {
    const std::vector<int> vars{0, 2, 4};
    const auto p = project(c, index, vars);
    CHECK(p.cases.size() <= 8);
    CHECK(p.total() == 1000.0);
    CHECK(p.variables == std::vector<std::string>{"w0", "w2", "w4"});
    const auto q = project(c, vars);
    REQUIRE(q.cases.size() == p.cases.size());
    for (std::size_t i = 0; i < p.cases.size(); ++i) {
      CHECK(q.cases[i].pattern == p.cases[i].pattern);
      CHECK(q.cases[i].count == p.cases[i].count);
    }
  }
  SUBCASE("no variables give one pattern") {
    const auto p = project(c, index, std::vector<int>{});
    REQUIRE(p.cases.size() == 1);
    CHECK(p.cases[0].count == 1000.0);
  }
  SUBCASE("all variables keep every row") {
    const auto two = rows_corpus(3, {{0, 1}, {2}});
    const std::vector<int> vars{0, 1, 2};
    const auto p = project(two, vars);
    REQUIRE(p.cases.size() == 2);
    CHECK(p.cases[0].pattern == 0b011u);
    CHECK(p.cases[1].pattern == 0b100u);
    CHECK(p.cases[0].count == 1.0);
  }
  SUBCASE("marginalizing a projection") {
    const std::vector<int> vars{0, 1, 2};
    const auto p = project(c, index, vars);
    const std::vector<std::string> sub{"w2", "w0"};
    const auto q = project(p, sub);
    const auto direct = project(c, index, std::vector<int>{2, 0});
    REQUIRE(q.cases.size() == direct.cases.size());
    for (std::size_t i = 0; i < q.cases.size(); ++i) {
      CHECK(q.cases[i].pattern == direct.cases[i].pattern);
      CHECK(q.cases[i].count == direct.cases[i].count);
    }
    const std::vector<std::string> unknown{"nope"};
    CHECK_THROWS_AS(project(p, unknown), DataError);
  }
  SUBCASE("too wide") {
    std::vector<int> wide(33, 0);
    CHECK_THROWS_AS(project(c, index, wide), std::invalid_argument);
  }
}

TEST_CASE("train/test split") {
  std::vector<std::vector<int>> rows(10);
  const auto c = rows_corpus(1, rows);

  const auto [train, test] = split(c, 0.8, 3);
  CHECK(train.num_docs() == 8);
  CHECK(test.num_docs() == 2);
  std::vector<std::string> all = train.doc_ids;
  all.insert(all.end(), test.doc_ids.begin(), test.doc_ids.end());
  std::sort(all.begin(), all.end());
  auto expected = c.doc_ids;
  std::sort(expected.begin(), expected.end());
  CHECK(all == expected);
  CHECK(std::is_sorted(train.doc_ids.begin(), train.doc_ids.end(), [&](auto& a, auto& b) {
    return std::stoi(a.substr(1)) < std::stoi(b.substr(1));
  }));

  const auto again = split(c, 0.8, 3);
  CHECK(again.first.doc_ids == train.doc_ids);

  const auto five = split(rows_corpus(1, std::vector<std::vector<int>>(5)), 0.5, 1);
  CHECK(five.first.num_docs() == 3);
  CHECK(five.second.num_docs() == 2);

  CHECK_THROWS_AS(split(rows_corpus(1, {{}}), 0.5, 1), DataError);
  CHECK_THROWS_AS(split(c, 1.0, 1), std::invalid_argument);
}
