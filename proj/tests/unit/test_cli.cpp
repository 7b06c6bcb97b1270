#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "doctest.h"
#include "hlta/topics.hpp"
#include "json.hpp"
#include "testing.hpp"

using namespace hlta;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// One line per document, words in vocabulary order.
std::string toy_lines(std::size_t docs, std::uint64_t seed) {
  const auto g = testing::toy_generator();
  Rng rng(seed);
  const auto c = testing::sample_corpus(g.model, docs, rng);
  std::string text;
  for (const auto& row : c.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) text += (i ? " " : "") + c.vocab.term(row[i]);
    text += "\n";
  }
  return text;
}

}  // namespace

TEST_CASE("command line pipeline") {
  testing::TempDir dir;
  const std::string lines = dir.write("docs.txt", toy_lines(1500, 71));
  const auto f = [&](const char* name) { return dir.file(name); };

  auto r = invoke({"vocab", "--input", lines, "--size", "30", "--min-df", "1", "--out-vocab",
                   f("vocab.txt"), "--out-corpus", f("corpus.txt"), "--stopwords", f("none.txt")});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("documents: 1500") != std::string::npos);
  CHECK(r.err.find("warning: stopword file") != std::string::npos);
  CHECK(read_vocabulary(f("vocab.txt")).size() == 30);

  r = invoke({"split", "--corpus", f("corpus.txt"), "--vocab", f("vocab.txt"), "--out-train",
              f("train.txt"), "--out-test", f("test.txt"), "--seed", "2"});
  REQUIRE(r.code == 0);
  CHECK(r.out == "train: 1200\ntest: 300\n");

  const std::vector<std::string> learn = {
      "learn", "--corpus", f("train.txt"), "--vocab", f("vocab.txt"),
      "--tau", "5",        "--kappa",      "20",      "--out-model"};
  auto args = learn;
  args.insert(args.end(), {f("model.json"), "--out-topics", f("topics.json")});
  r = invoke(args);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("levels: ") != std::string::npos);
  const auto model = read_model(f("model.json"));
  CHECK(model.observed().size() == 30);
  CHECK(hltm_violations(model).empty());
  const auto manifest = nlohmann::json::parse(slurp(f("model.json") + ".manifest.json"));
  CHECK(manifest["config"]["tau"] == 5);
  CHECK(manifest["documents"] == 1200);

  SUBCASE("learning is deterministic") {
    args = learn;
    args.push_back(f("again.json"));
    REQUIRE(invoke(args).code == 0);
    CHECK(slurp(f("again.json")) == slurp(f("model.json")));
  }
  SUBCASE("topics") {
    r = invoke({"topics", "--model", f("model.json"), "--display", "3", "--out-json", f("t.json"),
                "--out-html", f("t.html"), "--narrow", "--corpus", f("train.txt"), "--vocab",
                f("vocab.txt")});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("[", 0) == 0);
    const auto h = hierarchy_from_json(slurp(f("t.json")));
    CHECK(h.nodes.size() == model.latents().size());
    for (const auto& n : h.nodes) CHECK(n.topic.narrow_size);
    CHECK(slurp(f("t.html")).find("<!DOCTYPE html>") == 0);
    CHECK(invoke({"topics", "--model", f("model.json"), "--narrow"}).code == 2);
  }
  SUBCASE("eval") {
    r = invoke({"eval", "--model", f("model.json"), "--test-corpus", f("test.txt"), "--vocab",
                f("vocab.txt"), "--topics", f("topics.json"), "--out", f("metrics.json")});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("per-doc loglik") != std::string::npos);
    const auto m = nlohmann::json::parse(slurp(f("metrics.json")));
    CHECK(m["test_docs"] == 300);
    CHECK(m["per_doc_loglik"].get<double>() < 0.0);
    CHECK(m["compactness"].is_null());
  }
  SUBCASE("stepwise final EM") {
    args = learn;
    args.insert(args.end(),
                {f("sw.json"), "--em", "stepwise", "--minibatch", "200", "--updates", "20"});
    r = invoke(args);
    REQUIRE(r.code == 0);
    const auto mf = nlohmann::json::parse(slurp(f("sw.json") + ".manifest.json"));
    CHECK(mf["config"]["subsample"] == 10000);
    CHECK(mf["config"]["em"] == "stepwise");
  }
}

TEST_CASE("command line errors") {
  testing::TempDir dir;
  SUBCASE("usage") {
    CHECK(invoke({}).code == 2);
    CHECK(invoke({"frobnicate"}).code == 2);
    CHECK(invoke({"learn", "--corpus", "x"}).code == 2);
    CHECK(invoke({"vocab", "--input", dir.write("d.txt", "a b\n"), "--out-vocab", dir.file("v.txt"),
                  "--max-gram", "4"})
              .code == 2);
    CHECK(invoke({"learn", "--corpus", "c", "--vocab", "v", "--out-model", "m", "--em", "fast"})
              .code == 2);
  }
  SUBCASE("data errors") {
    const auto r =
        invoke({"split", "--corpus", dir.file("missing.txt"), "--vocab", dir.file("missing.txt"),
                "--out-train", dir.file("a"), "--out-test", dir.file("b")});
    CHECK(r.code == 3);
    CHECK(r.err.find("data error") != std::string::npos);
    CHECK(invoke({"topics", "--model", dir.write("bad.json", "{")}).code == 3);
  }
  SUBCASE("invariant violations") {
    // A latent with no observed variable below it has no topic.
    LatentTreeModel m;
    const int z = m.add_variable({"Z", VarKind::kLatent, 2}, -1, Cpt::prior(0.5));
    m.add_variable({"x", VarKind::kObserved, 0}, z, Cpt::conditional(0.1, 0.9));
    m.add_variable({"Y", VarKind::kLatent, 1}, z, Cpt::conditional(0.1, 0.9));
    write_model(m, dir.file("m.json"));
    const auto r = invoke({"topics", "--model", dir.file("m.json")});
    CHECK(r.code == 4);
  }
  SUBCASE("version") {
    const auto r = invoke({"--version"});
    CHECK(r.code == 0);
    CHECK(r.out.rfind("hlta ", 0) == 0);
    CHECK(r.out.find("delta=3") != std::string::npos);
  }
}
