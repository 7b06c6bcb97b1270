#include <cmath>
#include <set>

#include "doctest.h"
#include "hlta/inference.hpp"
#include "hlta/topics.hpp"
#include "testing.hpp"

using namespace hlta;

namespace {

// Word rows (P(w | s1), P(w | s0)) of a space topic with P(s1) = 0.05.
const std::vector<std::tuple<std::string, double, double>> kSpaceRows = {
    {"space", 0.58, 0.04}, {"nasa", 0.43, 0.03},    {"orbit", 0.33, 0.01},
    {"earth", 0.33, 0.01}, {"shuttle", 0.24, 0.01}, {"moon", 0.26, 0.02},
    {"mission", 0.21, 0.01}};

std::vector<WordJoint> space_joints(bool swapped) {
  const double s1 = 0.05;
  std::vector<WordJoint> out;
  for (const auto& [w, p1, p0] : kSpaceRows) {
    // Row z of the joint holds P(z) P(w | z); swapping exchanges the rows.
    const std::array<double, 2> on = {(1 - s1) * (1 - p0), (1 - s1) * p0};
    const std::array<double, 2> off = {s1 * (1 - p1), s1 * p1};
    out.push_back(swapped ? WordJoint{w, {off[0], off[1], on[0], on[1]}}
                          : WordJoint{w, {on[0], on[1], off[0], off[1]}});
  }
  return out;
}

std::vector<std::string> words_of(const Topic& t) {
  std::vector<std::string> out;
  for (const auto& w : t.words) out.push_back(w.word);
  return out;
}

}  // namespace

TEST_CASE("labeling a topic from word joints") {
  for (bool swapped : {false, true}) {
    CAPTURE(swapped);
    const Topic t = label_topic("Z11", 1, space_joints(swapped), 0);
    CHECK(t.size == doctest::Approx(0.05));
    CHECK(t.background_size == doctest::Approx(0.95));
    REQUIRE(t.words.size() == 7);
    CHECK(t.words[0].word == "space");
    CHECK(t.words[1].word == "nasa");
    CHECK(std::set<std::string>{t.words[2].word, t.words[3].word} ==
          std::set<std::string>{"orbit", "earth"});
    CHECK(t.words[0].p1 == doctest::Approx(0.58));
    CHECK(t.words[0].p0 == doctest::Approx(0.04));
    for (std::size_t i = 1; i < t.words.size(); ++i) CHECK(t.words[i - 1].mi >= t.words[i].mi);
  }
  SUBCASE("truncation keeps the strongest words") {
    const Topic t = label_topic("Z11", 1, space_joints(false), 3);
    CHECK(words_of(t) == std::vector<std::string>{"space", "nasa", "orbit"});
  }
  SUBCASE("equal MI keeps input order") {
    const Topic t = label_topic("Z", 1, space_joints(false), 0);
    // orbit and earth have identical rows, so orbit stays first.
    CHECK(t.words[2].word == "orbit");
  }
}

TEST_CASE("topics of a model") {
  const auto toy = testing::toy_generator().model;
  const auto marg = marginals(toy);

  SUBCASE("word rows are consistent with word marginals") {
    for (int z : toy.latents()) {
      const Topic t = extract_topic(toy, z, 0);
      CHECK(t.size + t.background_size == doctest::Approx(1.0));
      for (const auto& w : t.words) {
        const double pw = marg[toy.index_of(w.word)];
        CHECK(std::abs(w.p1 * t.size + w.p0 * t.background_size - pw) < 1e-9);
      }
    }
  }
  SUBCASE("a level-1 topic covers its own words") {
    const Topic t = extract_topic(toy, toy.index_of("G1"), 0);
    CHECK(t.level == 1);
    CHECK(t.words.size() == 4);
    CHECK(t.words[0].p1 > t.words[0].p0);
    const Topic top = extract_topic(toy, toy.root(), 5);
    CHECK(top.words.size() == 5);
  }
  SUBCASE("the hierarchy follows the levels") {
    const auto h = extract_hierarchy(toy, 0, false);
    CHECK(h.nodes.size() == 15);
    REQUIRE(h.roots.size() == 1);
    const auto& root = h.nodes[h.roots[0]];
    CHECK(root.topic.latent == "R");
    CHECK(root.children.size() == 3);
    std::size_t level1 = 0;
    for (int c : root.children) {
      CHECK(h.nodes[c].topic.level == 2);
      level1 += h.nodes[c].children.size();
    }
    CHECK(level1 == 11);

    const auto skipped = extract_hierarchy(toy, 0, true);
    CHECK(skipped.nodes.size() == 4);
    for (const auto& n : skipped.nodes) CHECK(n.topic.level >= 2);
  }
  SUBCASE("a flat model keeps its only level") {
    const auto m = testing::lcm("Z11", 0.3, {{"a", {0.1, 0.9}}, {"b", {0.1, 0.9}}, {"c", {0.1, 0.9}}});
    const auto h = extract_hierarchy(m, 0, true);
    CHECK(h.nodes.size() == 1);
    CHECK(h.roots.size() == 1);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(extract_topic(toy, toy.index_of("space"), 0), std::invalid_argument);
    LatentTreeModel m;
    const int z = m.add_variable({"Z", VarKind::kLatent, 2}, -1, Cpt::prior(0.5));
    m.add_variable({"x", VarKind::kObserved, 0}, z, Cpt::conditional(0.1, 0.9));
    const int y = m.add_variable({"Y", VarKind::kLatent, 1}, z, Cpt::conditional(0.1, 0.9));
    CHECK_THROWS_AS(extract_topic(m, y, 0), InvariantError);
  }
}

TEST_CASE("narrow topics") {
  const auto m = testing::lcm("Z", 0.3, {{"a", {0.0, 1.0}}, {"b", {0.0, 1.0}}, {"c", {0.0, 1.0}}});
  SparseBinaryCorpus data;
  data.vocab = Vocabulary({"a", "b", "c"});
  for (int d = 0; d < 100; ++d) {
    data.rows.push_back(d < 40 ? std::vector<int>{0, 1, 2} : std::vector<int>{});
    data.doc_ids.push_back(std::to_string(d));
  }
  SUBCASE("no updates keep the broad size") {
    const Topic t = narrow_topic(m, 0, 3, 0, data);
    REQUIRE(t.narrow_size);
    CHECK(*t.narrow_size == doctest::Approx(0.3));
    CHECK(t.size == *t.narrow_size);
  }
  SUBCASE("the word pattern decides the cluster") {
    const Topic t = narrow_topic(m, 0, 3, 10, data);
    REQUIRE(t.narrow_size);
    CHECK(*t.narrow_size == doctest::Approx(0.4).epsilon(1e-3));
    // Word tables are not refitted.
    CHECK(t.words[0].p1 == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("topic output") {
  const auto toy = testing::toy_generator().model;
  auto h = extract_hierarchy(toy, 0, false);
  h.nodes[0].topic.narrow_size = 0.125;

  SUBCASE("JSON round-trip") {
    const std::string json = hierarchy_json(h);
    const auto back = hierarchy_from_json(json);
    CHECK(back.nodes.size() == h.nodes.size());
    CHECK(hierarchy_json(back) == json);
    CHECK(json.find("\"narrow_size\"") != std::string::npos);
    CHECK_THROWS_AS(hierarchy_from_json("{\"latent\": 1}"), DataError);
    CHECK_THROWS_AS(hierarchy_from_json("[{\"latent\": \"Z\"}]"), DataError);
  }
  SUBCASE("text lines") {
    TopicHierarchy small;
    Topic a;
    a.latent = "Z21";
    a.level = 2;
    a.size = 0.05;
    a.words = {{"space", 0, 0, 0}, {"nasa", 0, 0, 0}, {"orbit", 0, 0, 0}};
    Topic b = a;
    b.latent = "Z11";
    b.level = 1;
    b.size = 0.125;
    b.words = {{"moon", 0, 0, 0}};
    small.nodes = {{a, {1}}, {b, {}}};
    small.roots = {0};
    CHECK(hierarchy_text(small, 2) == "[0.05] space nasa\n  [0.12] moon\n");
    small.nodes[1].topic.words[0].word = "a<b";
    const std::string html = hierarchy_html(small, 7);
    CHECK(html.find("<details open><summary>[0.05] space nasa orbit</summary>") !=
          std::string::npos);
    CHECK(html.find("<li>[0.12] a&lt;b</li>") != std::string::npos);
  }
}
