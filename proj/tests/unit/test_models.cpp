#include <gtest/gtest.h>

#include <algorithm>

#include "locfield/builtin_models.hpp"
#include "locfield/csv.hpp"
#include "locfield/model.hpp"
#include "locfield/model_config.hpp"
#include "locfield/random.hpp"

using namespace locfield;

namespace {

ModelSpec sir() { return builtin("sir", {{"beta", 1.0}, {"gamma", 0.5}}); }
ModelSpec voter() { return builtin("voter"); }
ModelSpec seizure() {
  return builtin("seizure",
                 {{"alpha_plus", 1.0}, {"alpha_minus", 0.5}, {"beta", 2.0}, {"recovery_cap", 10.0}});
}
ModelSpec hawkes() {
  return builtin("hawkes_threshold", {{"M", 3.0}, {"alpha", 1.0}, {"u", 0.1}, {"f", std::string("identity")}});
}

std::vector<ModelSpec> catalog() {
  return {sir(),
          builtin("seir", {{"beta", 1.0}, {"sigma", 1.0}, {"gamma", 0.5}}),
          builtin("two_strain_sir", {{"beta1", 1.0}, {"beta2", 0.8}, {"gamma1", 0.5}, {"gamma2", 0.5}}),
          seizure(),
          voter(),
          hawkes()};
}

ModelSpec load_config(const std::string& name) {
  return parse_model_config(read_file(std::string(LOCFIELD_SOURCE_DIR) + "/configs/models/" + name));
}

std::vector<std::pair<int, int>> by_label(const ModelSpec& m,
                                          std::vector<std::pair<std::string, std::string>> edges) {
  std::vector<std::pair<int, int>> out;
  for (auto& [a, b] : edges) out.emplace_back(m.index_of_label(a), m.index_of_label(b));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST(TransitionGraph, Sir) {
  const auto m = sir();
  EXPECT_EQ(transition_graph(m).edges, by_label(m, {{"S", "I"}, {"I", "R"}}));
  const auto order = check_acyclic(transition_graph(m));
  ASSERT_TRUE(order);
  EXPECT_EQ(format_states(m, order.order), "S,I,R");
}

TEST(TransitionGraph, Voter) {
  const auto m = voter();
  EXPECT_EQ(transition_graph(m).edges, by_label(m, {{"0", "1"}, {"0", "-1"}}));
  EXPECT_TRUE(check_acyclic(transition_graph(m)));
}

TEST(TransitionGraph, SisHasCycle) {
  const auto m = load_config("sis.json");
  EXPECT_EQ(transition_graph(m).edges, by_label(m, {{"S", "I"}, {"I", "S"}}));
  const auto res = check_acyclic(transition_graph(m));
  EXPECT_FALSE(res);
  ASSERT_EQ(res.cycle.size(), 3u);
  EXPECT_EQ(res.cycle.front(), res.cycle.back());
  EXPECT_EQ(format_states(m, res.cycle), "S,I,S");
  EXPECT_THROW(require_acyclic(m), ModelError);
}

TEST(TransitionGraph, HawkesChain) {
  const auto m = hawkes();
  EXPECT_EQ(m.num_states(), 4);
  EXPECT_EQ(m.jumps(), std::vector<int>{1});
  const auto res = check_acyclic(transition_graph(m));
  ASSERT_TRUE(res);
  EXPECT_EQ(format_states(m, res.order), "0,1,2,3");
}

TEST(TransitionGraph, ReachabilityIsAntisymmetricForCatalog) {
  for (const auto& m : catalog()) {
    const auto tg = transition_graph(m);
    ASSERT_TRUE(check_acyclic(tg)) << m.name();
    for (int a = 0; a < m.num_states(); ++a) {
      EXPECT_FALSE(tg.reachable(a, a)) << m.name();
      for (int b = 0; b < m.num_states(); ++b) {
        if (a == b) continue;
        EXPECT_FALSE(tg.reachable(a, b) && tg.reachable(b, a)) << m.name();
      }
    }
    const auto order = check_acyclic(tg).order;
    std::vector<int> pos(m.num_states());
    for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = static_cast<int>(i);
    for (auto [a, b] : tg.edges) EXPECT_LT(pos[a], pos[b]);
  }
}

TEST(EvaluateRate, SeizureHandValues) {
  const auto m = seizure();
  const int s_exc = m.index_of_label("S+"), i_exc = m.index_of_label("I+"),
            i_inh = m.index_of_label("I-"), s_inh = m.index_of_label("S-");
  EXPECT_DOUBLE_EQ(evaluate_rate(m, 2, 0.0, s_exc, std::vector<int>{i_exc}), 3.0);
  EXPECT_DOUBLE_EQ(evaluate_rate(m, 2, 0.0, i_exc, std::vector<int>{s_exc, i_inh, i_exc}), 0.5);
  EXPECT_DOUBLE_EQ(evaluate_rate(m, 2, 0.0, s_inh, std::vector<int>{}), 0.0);
  // one inhibitory susceptible neighbor: s = 1.5, d - s = 1.5
  EXPECT_DOUBLE_EQ(evaluate_rate(m, 2, 0.0, i_inh, std::vector<int>{s_inh, s_exc, i_exc}), 1.0);
  EXPECT_DOUBLE_EQ(evaluate_rate(m, 2, 0.0, i_inh, std::vector<int>{}), 10.0);
  EXPECT_DOUBLE_EQ(evaluate_rate(m, 1, 0.0, s_exc, std::vector<int>{i_exc}), 0.0);
}

TEST(EvaluateRate, VoterIndicators) {
  const auto m = voter();
  const int red = m.index_of_label("-1"), und = m.index_of_label("0"), blue = m.index_of_label("1");
  const std::vector<int> majority{blue, blue, red}, tie{blue, red};
  EXPECT_EQ(evaluate_rate(m, 1, 0.0, und, majority), 1.0);
  EXPECT_EQ(evaluate_rate(m, -1, 0.0, und, majority), 0.0);
  EXPECT_EQ(evaluate_rate(m, 1, 0.0, und, tie), 0.0);
  EXPECT_EQ(evaluate_rate(m, -1, 0.0, und, tie), 0.0);
  EXPECT_EQ(evaluate_rate(m, 1, 0.0, blue, majority), 0.0);
  EXPECT_EQ(evaluate_rate(m, 7, 0.0, und, majority), 0.0);
}

TEST(EvaluateRate, StarNeighborsAreAbsent) {
  const auto m = sir();
  const int s = m.index_of_label("S"), i = m.index_of_label("I");
  EXPECT_EQ(evaluate_rate(m, 1, 0.0, s, std::vector<int>{i, kStar, i}), 2.0);
  EXPECT_EQ(evaluate_rate(m, 1, 0.0, kStar, std::vector<int>{i, i}), 0.0);
}

TEST(Builtin, CatalogShapes) {
  const auto s = sir();
  EXPECT_EQ(s.num_states(), 3);
  EXPECT_EQ(s.jumps(), std::vector<int>{1});
  const auto v = voter();
  EXPECT_EQ(v.num_states(), 3);
  EXPECT_EQ(v.jumps(), (std::vector<int>{1, -1}));
  EXPECT_EQ(v.code(0), -1);
  for (const auto& name : builtin_names()) EXPECT_NO_THROW(load_config(name + ".json")) << name;
}

TEST(Builtin, ParameterErrors) {
  EXPECT_THROW(builtin("sir", {{"beta", 1.0}}), ConfigError);
  EXPECT_THROW(builtin("sir", {{"beta", 1.0}, {"gamma", 0.5}, {"delta", 1.0}}), ConfigError);
  EXPECT_THROW(builtin("sir", {{"beta", -1.0}, {"gamma", 0.5}}), ConfigError);
  EXPECT_THROW(builtin("sir", {{"beta", std::string("x")}, {"gamma", 0.5}}), ConfigError);
  EXPECT_THROW(builtin("hawkes_threshold", {{"M", 2.5}, {"alpha", 1.0}, {"u", 0.1}, {"f", std::string("identity")}}),
               ConfigError);
  EXPECT_THROW(builtin("hawkes_threshold", {{"M", 3.0}, {"alpha", 1.0}, {"u", 0.1}, {"f", std::string("exp")}}),
               ConfigError);
  EXPECT_THROW(builtin("seizure", {{"alpha_plus", 1.0}, {"alpha_minus", 0.5}, {"beta", 2.0}, {"recovery_cap", 0.0}}),
               ConfigError);
  EXPECT_THROW(builtin("nope"), ConfigError);
  try {
    builtin("seir", {{"beta", 1.0}, {"gamma", 1.0}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("sigma"), std::string::npos);
  }
}

TEST(Rates, PermutationInvariantAndBounded) {
  Engine rng = make_stream(21);
  for (const auto& m : catalog()) {
    for (int probe = 0; probe < 1000; ++probe) {
      const double t = 10.0 * uniform01(rng);
      const int a = static_cast<int>(uniform_index(rng, m.num_states()));
      const int k = static_cast<int>(uniform_index(rng, 7));
      std::vector<int> nb(k);
      for (auto& x : nb) x = static_cast<int>(uniform_index(rng, m.num_states() + 1)) - 1;
      std::vector<int> shuffled = nb;
      for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[uniform_index(rng, i)]);
      const int present = static_cast<int>(std::count_if(nb.begin(), nb.end(), [](int x) { return x != kStar; }));
      for (int jump : m.jumps()) {
        const double r = evaluate_rate(m, jump, t, a, nb);
        EXPECT_EQ(r, evaluate_rate(m, jump, t, a, shuffled)) << m.name();
        EXPECT_GE(r, 0.0);
        EXPECT_LE(r, m.rate_bound(present + 1, t)) << m.name();
      }
    }
    EXPECT_TRUE(probe_rates(m).ok()) << m.name();
  }
}

TEST(Probe, BoundViolationIsReported) {
  const auto m = load_config("bad_bound.json");
  const auto report = probe_rates(m);
  EXPECT_TRUE(report.has(ViolationKind::bound_exceeded));
  EXPECT_FALSE(report.has(ViolationKind::undeclared_edge));
  EXPECT_NO_THROW(transition_graph(m));
}

TEST(Probe, UndeclaredEdgeAndEscape) {
  auto one = [](std::size_t, double, int, std::span<const double>, int) { return 1.0; };
  auto bound = [](int, double) { return 1.0; };
  const ModelSpec undeclared("undeclared", {{0, "A"}, {1, "B"}, {2, "C"}}, {1}, one, {{0, 1}}, bound);
  EXPECT_TRUE(probe_rates(undeclared).has(ViolationKind::undeclared_edge));
  EXPECT_TRUE(probe_rates(undeclared).has(ViolationKind::leaves_state_space));
  try {
    transition_graph(undeclared);
    FAIL();
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("j=1"), std::string::npos);
  }
  auto negative = [](std::size_t, double, int, std::span<const double>, int) { return -1.0; };
  const ModelSpec neg("neg", {{0, "A"}, {1, "B"}}, {1}, negative, {{0, 1}}, bound);
  EXPECT_TRUE(probe_rates(neg).has(ViolationKind::negative_rate));
}

TEST(ModelSpec, ConstructionErrors) {
  auto zero = [](std::size_t, double, int, std::span<const double>, int) { return 0.0; };
  auto bound = [](int, double) { return 0.0; };
  EXPECT_THROW(ModelSpec("x", {}, {1}, zero, {}, bound), ModelError);
  EXPECT_THROW(ModelSpec("x", {{0, "A"}, {0, "B"}}, {1}, zero, {}, bound), ModelError);
  EXPECT_THROW(ModelSpec("x", {{0, "A"}, {1, "B"}}, {0}, zero, {}, bound), ModelError);
  EXPECT_THROW(ModelSpec("x", {{0, "A"}, {2, "B"}}, {1}, zero, {{0, 1}}, bound), ModelError);
}
