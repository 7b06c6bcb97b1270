#include <cmath>

#include "doctest.h"
#include "hlta/model.hpp"
#include "testing.hpp"

using namespace hlta;

namespace {

Variable latent(const std::string& name, int level = 1) {
  return {name, VarKind::kLatent, level};
}
Variable observed(const std::string& name) { return {name, VarKind::kObserved, 0}; }

// Z1 - {X1, X2, Z2}, Z2 - {X3, X4, X5}, rooted at Z1.
LatentTreeModel two_latent_model(Rng& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  LatentTreeModel m;
  const int z1 = m.add_variable(latent("Z1"), -1, Cpt::prior(u(rng)));
  m.add_variable(observed("X1"), z1, Cpt::conditional(u(rng), u(rng)));
  m.add_variable(observed("X2"), z1, Cpt::conditional(u(rng), u(rng)));
  const int z2 = m.add_variable(latent("Z2"), z1, Cpt::conditional(u(rng), u(rng)));
  for (const char* x : {"X3", "X4", "X5"})
    m.add_variable(observed(x), z2, Cpt::conditional(u(rng), u(rng)));
  return m;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_CASE("joint_log_prob") {
  SUBCASE("a lone root") {
    LatentTreeModel m;
    m.add_variable(latent("Z"), -1, Cpt::prior(0.5));
    CHECK(joint_log_prob(m, {0}) == doctest::Approx(std::log(0.5)));
  }
  SUBCASE("deterministic chain") {
    LatentTreeModel m;
    const int a = m.add_variable(latent("A"), -1, Cpt::prior(0.3));
    const int b = m.add_variable(latent("B"), a, Cpt::conditional(0.0, 1.0));
    m.add_variable(observed("C"), b, Cpt::conditional(0.0, 1.0));
    CHECK(joint_log_prob(m, {1, 1, 1}) == doctest::Approx(std::log(0.3)));
    CHECK(joint_log_prob(m, {1, 0, 1}) == -INFINITY);
  }
  SUBCASE("product of factors") {
    Rng rng(11);
    const auto m = two_latent_model(rng);
    const Assignment a{1, 0, 1, 1, 0, 1, 0};
    double expected = std::log(m.cpt(0)(0, a[0]));
    for (int v = 1; v < 7; ++v) expected += std::log(m.cpt(v)(a[m.parent(v)], a[v]));
    CHECK(joint_log_prob(m, a) == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("regularity") {
  LatentTreeModel m;
  const int z = m.add_variable(latent("Z"), -1, Cpt::prior(0.5));
  m.add_variable(observed("X1"), z, Cpt::conditional(0.2, 0.8));
  m.add_variable(observed("X2"), z, Cpt::conditional(0.2, 0.8));
  REQUIRE(validate_regular(m).size() == 1);
  CHECK(validate_regular(m)[0].latent == "Z");
  CHECK(validate_regular(m)[0].neighbors == 2);
  m.add_variable(observed("X3"), z, Cpt::conditional(0.2, 0.8));
  CHECK(validate_regular(m).empty());

  CHECK(regular_node(2, {2, 2, 2}));
  CHECK_FALSE(regular_node(2, {2, 2}));
  CHECK(regular_node(1, {2, 4}));
  CHECK_FALSE(regular_node(2, {2, 4}));
  CHECK(regular_node(4, {2, 2, 4}));

  const auto toy = testing::toy_generator().model;
  // The toy generator's root has three theme children, each latent three
  // or more neighbors.
  CHECK(validate_regular(toy).empty());
}

TEST_CASE("rerooting preserves the joint") {
  SUBCASE("to the current root is the identity") {
    Rng rng(1);
    const auto m = two_latent_model(rng);
    const auto r = reroot(m, "Z1");
    for (std::size_t v = 0; v < m.size(); ++v) CHECK(r.cpt(v).p == m.cpt(v).p);
  }
  SUBCASE("two-latent model rerooted at Z2") {
    Rng rng(2);
    const auto m = two_latent_model(rng);
    const auto r = reroot(m, "Z2");
    CHECK(r.root() == r.index_of("Z2"));
    CHECK(max_abs_diff(testing::joint_table(m), testing::joint_table(r)) < 1e-10);
    CHECK(free_param_count(r) == free_param_count(m));
  }
  SUBCASE("random models") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      const auto m = testing::random_model(rng, 6 + trial % 7);
      for (int z : m.latents()) {
        const auto r = reroot(m, m.name(z));
        CHECK(max_abs_diff(testing::joint_table(m), testing::joint_table(r)) < 1e-10);
      }
    }
  }
  SUBCASE("errors") {
    Rng rng(4);
    const auto m = two_latent_model(rng);
    CHECK_THROWS_AS(reroot(m, "nope"), std::invalid_argument);
    CHECK_THROWS_AS(reroot(m, "X1"), std::invalid_argument);
  }
}

TEST_CASE("free parameter count") {
  LatentTreeModel one;
  one.add_variable(latent("Z"), -1, Cpt::prior(0.5));
  CHECK(free_param_count(one) == 1);
  const auto lcm = testing::lcm("Z", 0.3, {{"a", {0.1, 0.9}}, {"b", {0.1, 0.9}},
                                           {"c", {0.1, 0.9}}, {"d", {0.1, 0.9}}});
  CHECK(free_param_count(lcm) == 9);
  Rng rng(5);
  CHECK(free_param_count(two_latent_model(rng)) == 13);
}

TEST_CASE("marginals and pair marginals match enumeration") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = testing::random_model(rng, 8);
    const auto table = testing::joint_table(m);
    const auto mg = marginals(m);
    for (int a = 0; a < 8; ++a) {
      double p1 = 0.0;
      for (std::size_t mask = 0; mask < table.size(); ++mask)
        if ((mask >> a) & 1u) p1 += table[mask];
      CHECK(mg[a] == doctest::Approx(p1).epsilon(1e-10));
      for (int b = 0; b < 8; ++b) {
        if (a == b) continue;
        std::array<double, 4> joint{};
        for (std::size_t mask = 0; mask < table.size(); ++mask)
          joint[2 * ((mask >> a) & 1u) + ((mask >> b) & 1u)] += table[mask];
        const auto pm = pair_marginal(m, a, b);
        for (int k = 0; k < 4; ++k) CHECK(std::abs(pm[k] - joint[k]) < 1e-10);
      }
    }
  }
}

TEST_CASE("mutual information of 2x2 joints") {
  CHECK(mutual_information({0.25, 0.25, 0.25, 0.25}) == doctest::Approx(0.0));
  CHECK(mutual_information({0.5, 0.0, 0.0, 0.5}) == doctest::Approx(std::log(2.0)));
  CHECK(mutual_information({0.06, 0.14, 0.24, 0.56}) == doctest::Approx(0.0));
}

TEST_CASE("stacking a flat model on a lower model") {
  // Lower: Z11, Z12, Z13 with three words each; lateral edges Z11-Z12-Z13.
  LatentTreeModel lower;
  const int z11 = lower.add_variable(latent("Z11"), -1, Cpt::prior(0.2));
  const int z12 = lower.add_variable(latent("Z12"), z11, Cpt::conditional(0.1, 0.7));
  const int z13 = lower.add_variable(latent("Z13"), z12, Cpt::conditional(0.2, 0.6));
  int w = 0;
  for (int z : {z11, z12, z13})
    for (int i = 0; i < 3; ++i)
      lower.add_variable(observed("w" + std::to_string(w++)), z, Cpt::conditional(0.05, 0.6));
  // Upper: one latent over the three tops.
  LatentTreeModel upper;
  const int z21 = upper.add_variable(latent("Z21"), -1, Cpt::prior(0.3));
  for (const char* t : {"Z11", "Z12", "Z13"})
    upper.add_variable(observed(t), z21, Cpt::conditional(0.1, 0.8));

  const auto s = stack_models(upper, lower);
  CHECK(s.size() == lower.size() + 1);
  CHECK(s.edges().size() == s.size() - 1);
  CHECK(s.variable(s.index_of("Z21")).level == 2);
  CHECK(s.parent(s.index_of("Z12")) == s.index_of("Z21"));
  CHECK(s.cpt(s.index_of("Z12")).p == upper.cpt(upper.index_of("Z12")).p);
  CHECK(s.cpt(s.index_of("w4")).p == lower.cpt(lower.index_of("w4")).p);
  CHECK(hltm_violations(s).empty());
  CHECK(validate_regular(s).empty());
  CHECK(hltm_violations(lower).empty());

  LatentTreeModel wrong = upper;
  wrong.rename(wrong.index_of("Z13"), "Z99");
  CHECK_THROWS_AS(stack_models(wrong, lower), std::invalid_argument);
}

TEST_CASE("layering violations are reported") {
  LatentTreeModel m;
  const int z2 = m.add_variable(latent("Z21", 2), -1, Cpt::prior(0.5));
  const int z1 = m.add_variable(latent("Z11", 1), z2, Cpt::conditional(0.2, 0.8));
  m.add_variable(observed("a"), z1, Cpt::conditional(0.2, 0.8));
  m.add_variable(observed("b"), z2, Cpt::conditional(0.2, 0.8));
  CHECK_FALSE(hltm_violations(m).empty());
}

TEST_CASE("editing operations") {
  Rng rng(8);
  auto m = two_latent_model(rng);
  const auto before = testing::joint_table(m);

  SUBCASE("swapping states keeps the observed distribution") {
    m.swap_states(m.index_of("Z2"));
    m.check();
    const auto after = testing::joint_table(m);
    // Marginalize out Z2 (index 3) in both tables.
    for (std::size_t mask = 0; mask < before.size(); ++mask) {
      if (mask & 8u) continue;
      const double a = before[mask] + before[mask | 8u];
      const double b = after[mask] + after[mask | 8u];
      CHECK(std::abs(a - b) < 1e-12);
    }
  }
  SUBCASE("remove, reparent, rename") {
    m.remove_leaf(m.index_of("X1"));
    CHECK(m.size() == 6);
    CHECK(m.find("X1") == -1);
    CHECK_THROWS_AS(m.remove_leaf(m.root()), std::invalid_argument);
    m.reparent(m.index_of("X5"), m.root(), Cpt::conditional(0.3, 0.4));
    CHECK(m.parent(m.index_of("X5")) == m.root());
    CHECK_THROWS_AS(m.reparent(m.index_of("Z2"), m.index_of("X3"), Cpt{}), std::invalid_argument);
    m.rename(m.index_of("X2"), "Y2");
    CHECK(m.index_of("Y2") >= 0);
    CHECK_THROWS_AS(m.rename(m.index_of("Y2"), "X3"), std::invalid_argument);
    CHECK_THROWS_AS(m.index_of("X2"), DataError);
    CHECK_THROWS_AS(m.add_variable(observed("X3"), 0, Cpt{}), std::invalid_argument);
    m.check();
  }
}

TEST_CASE("table validation") {
  LatentTreeModel m;
  const int z = m.add_variable(latent("Z"), -1, Cpt::prior(0.5));
  m.add_variable(observed("X"), z, Cpt{{0.5, 0.6, 0.5, 0.5}});
  CHECK_THROWS_AS(m.check(), InvariantError);

  Cpt c = Cpt::conditional(0.0, 1.0);
  clamp_cpt(c, false);
  CHECK(c(0, 1) == kProbFloor);
  CHECK(c(1, 1) == 1.0 - kProbFloor);
  CHECK(c(0, 0) + c(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("latent names") {
  CHECK(latent_name(1, 1) == "Z11");
  CHECK(latent_name(2, 13) == "Z213");
  CHECK(latent_name(12, 3) == "Z12_3");
}

TEST_CASE("JSON round-trip is bit-exact") {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    auto m = testing::random_model(rng, 9);
    m.cpt(m.root()).p[1] = 1.0 / 3.0;
    m.cpt(m.root()).p[0] = 1.0 - 1.0 / 3.0;
    const auto back = model_from_json(to_json(m));
    REQUIRE(back.size() == m.size());
    CHECK(back.root() == m.root());
    for (std::size_t v = 0; v < m.size(); ++v) {
      CHECK(back.name(v) == m.name(v));
      CHECK(back.parent(v) == m.parent(v));
      CHECK(back.variable(v).level == m.variable(v).level);
      CHECK(back.variable(v).kind == m.variable(v).kind);
      CHECK(back.cpt(v).p == m.cpt(v).p);
    }
    CHECK(to_json(back) == to_json(m));
  }
  testing::TempDir dir;
  Rng r2(10);
  const auto m = testing::random_model(r2, 5);
  write_model(m, dir.file("m.json"));
  CHECK(to_json(read_model(dir.file("m.json"))) == to_json(m));
  CHECK_THROWS_AS(model_from_json("{"), DataError);
  CHECK_THROWS_AS(read_model(dir.file("none.json")), DataError);
}
