#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "inforeasoner/cluster.hpp"
#include "inforeasoner/random.hpp"

using namespace inforeasoner;

namespace {

std::vector<AnswerSample> make_samples(const std::vector<std::string>& texts, ContextTag ctx = ContextTag::prior_B) {
  std::vector<AnswerSample> out;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    out.push_back(AnswerSample{texts[i], std::nullopt, -0.1 * static_cast<double>(i + 1), ctx});
  }
  return out;
}

using Classes = std::vector<std::vector<std::size_t>>;

std::shared_ptr<EntailmentOracle> exact() { return std::make_shared<ExactMatchOracle>(); }
std::shared_ptr<EntailmentOracle> normalized() { return std::make_shared<NormalizedMatchOracle>(); }

// Counts calls and always throws a transport error.
class DownOracle final : public EntailmentOracle {
 public:
  double entail(const std::string&, const std::string&, const std::string&) override {
    throw Error(ErrorKind::oracle_unavailable, "connection refused");
  }
  OracleKind kind() const noexcept override { return OracleKind::remote; }
};

class BadRangeOracle final : public EntailmentOracle {
 public:
  double entail(const std::string&, const std::string&, const std::string&) override { return 1.5; }
  OracleKind kind() const noexcept override { return OracleKind::remote; }
};

}  // namespace

TEST(Normalize, Rules) {
  EXPECT_EQ(normalize_answer("  The   Eiffel Tower. "), "eiffel tower");
  EXPECT_EQ(normalize_answer("Bolton, England"), "bolton england");
  EXPECT_EQ(normalize_answer("A an the Paris"), "paris");
  EXPECT_EQ(normalize_answer("THE"), "");
  for (std::string s : {"The  A. b", "  x,y ", "An apple!"}) {
    EXPECT_EQ(normalize_answer(normalize_answer(s)), normalize_answer(s));
  }
}

TEST(AnswerSample, Validation) {
  EXPECT_NO_THROW(AnswerSample::from_tokens("x", {-0.5, -0.25}, ContextTag::prior_B).validate());
  EXPECT_EQ(*AnswerSample::from_tokens("x", {-0.5, -0.25}, ContextTag::prior_B).total_logprob, -0.75);
  AnswerSample bad{"x", std::vector<double>{-0.5}, -0.1, ContextTag::prior_B};
  EXPECT_THROW(bad.validate(), Error);
  AnswerSample positive{"x", std::nullopt, 0.2, ContextTag::prior_B};
  EXPECT_THROW(positive.validate(), Error);
  EXPECT_EQ(context_from_string("B"), ContextTag::prior_B);
  EXPECT_EQ(context_from_string("C"), ContextTag::posterior_C);
  EXPECT_THROW(context_from_string("D"), Error);
}

TEST(JudgePair, Examples) {
  EntailmentJudge ex(exact());
  EXPECT_TRUE(judge_pair(ex, "q", "Paris", "Paris", 0.5));
  EXPECT_FALSE(judge_pair(ex, "q", "Paris", "London", 0.5));

  auto table = std::make_shared<TableOracle>();
  table->set("A", "B", 0.9);
  table->set("B", "A", 0.4);
  EntailmentJudge tj(table);
  EXPECT_FALSE(judge_pair(tj, "q", "A", "B", 0.5));
  EXPECT_FALSE(judge_pair(tj, "q", "B", "A", 0.5));
  EXPECT_TRUE(judge_pair(tj, "q", "A", "B", 0.3));
  EXPECT_THROW(judge_pair(tj, "q", "A", "B", 0.0), Error);
  EXPECT_THROW(judge_pair(tj, "q", "A", "B", 1.0), Error);
}

TEST(JudgePair, StrictThreshold) {
  auto table = std::make_shared<TableOracle>();
  table->set_both("A", "B", 0.5);
  EntailmentJudge j(table);
  EXPECT_FALSE(judge_pair(j, "q", "A", "B", 0.5));
}

TEST(Judge, TrimsBeforeCallingAndCaches) {
  EntailmentJudge j(exact());
  EXPECT_EQ(j.score("q", "  Paris ", "Paris"), 1.0);
  EXPECT_EQ(j.oracle_calls(), 1u);
  EXPECT_EQ(j.score("q", "Paris", "Paris  "), 1.0);
  EXPECT_EQ(j.oracle_calls(), 1u);
  EXPECT_EQ(j.score("other question", "Paris", "Paris"), 1.0);
  EXPECT_EQ(j.oracle_calls(), 2u);
}

TEST(Judge, TransportErrorsCarryThePair) {
  EntailmentJudge j(std::make_shared<DownOracle>());
  try {
    j.score("q", "Paris", "London");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::oracle_unavailable);
    EXPECT_TRUE(e.is_transport());
    EXPECT_NE(std::string(e.what()).find("Paris"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("London"), std::string::npos);
  }
  EntailmentJudge bad(std::make_shared<BadRangeOracle>());
  try {
    bad.score("q", "a", "b");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::protocol);
  }
}

TEST(BuildPartition, Examples) {
  EntailmentJudge ex(exact());
  const auto s = make_samples({"Paris", "Paris", "London"});
  const auto p = build_partition(s, ex, "q", 0.5);
  EXPECT_EQ(p.classes, (Classes{{0, 1}, {2}}));
  EXPECT_NEAR(p.class_logmass[0], std::log(std::exp(-0.1) + std::exp(-0.2)), 1e-12);
  EXPECT_NEAR(p.class_logmass[1], -0.3, 1e-12);
  EXPECT_EQ(p.labels(3), (std::vector<std::size_t>{0, 0, 1}));

  auto table = std::make_shared<TableOracle>();
  table->set_both("A", "B", 0.9);
  table->set_both("B", "C", 0.9);
  EntailmentJudge tj(table);
  const auto chain = build_partition(make_samples({"A", "C", "B"}), tj, "q", 0.5);
  EXPECT_EQ(chain.classes, (Classes{{0, 1, 2}}));
}

TEST(BuildPartition, Errors) {
  EntailmentJudge ex(exact());
  EXPECT_THROW(build_partition(std::vector<AnswerSample>{}, ex, "q", 0.5), Error);
  auto mixed = make_samples({"a", "b"});
  mixed[1].context = ContextTag::posterior_C;
  EXPECT_THROW(build_partition(mixed, ex, "q", 0.5), Error);
  EXPECT_THROW(build_partition(make_samples({"a"}), ex, "q", 1.2), Error);

  EntailmentJudge down(std::make_shared<DownOracle>());
  try {
    build_partition(make_samples({"a", "b"}), down, "q", 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::oracle_unavailable);
  }
}

TEST(BuildPartition, SingleSampleAndMissingLogprob) {
  EntailmentJudge ex(exact());
  std::vector<AnswerSample> one{AnswerSample{"x", std::nullopt, std::nullopt, ContextTag::prior_B}};
  const auto p = build_partition(one, ex, "q", 0.5);
  EXPECT_EQ(p.classes, (Classes{{0}}));
  EXPECT_EQ(p.class_logmass[0], 0.0);
  EXPECT_EQ(ex.oracle_calls(), 0u);
}

TEST(BuildPartition, CallBudgetAndCache) {
  EntailmentJudge j(normalized());
  const auto s = make_samples({"Paris", "paris", "The Paris", "London", "Rome", "Paris", "london", "Oslo"});
  const std::size_t m = s.size();
  build_partition(s, j, "q", 0.5);
  EXPECT_LE(j.oracle_calls(), m * (m - 1));
  const std::size_t first = j.oracle_calls();
  build_partition(s, j, "q", 0.5);
  EXPECT_EQ(j.oracle_calls(), first);
}

TEST(BuildPartition, ParallelMatchesSerial) {
  Rng rng(9);
  const std::vector<std::string> pool{"Paris", "paris.", "The Paris", "London", "london", "Rome", "Oslo", "An Oslo"};
  for (int t = 0; t < 20; ++t) {
    std::vector<std::string> texts;
    for (int i = 0; i < 16; ++i) texts.push_back(pool[rng() % pool.size()]);
    const auto s = make_samples(texts);
    EntailmentJudge a(normalized());
    EntailmentJudge b(normalized());
    const auto serial = build_partition(s, a, "q", 0.5);
    const auto parallel = build_partition(s, b, "q", 0.5, PartitionOptions{4});
    EXPECT_EQ(serial.classes, parallel.classes);
    EXPECT_EQ(serial.class_logmass, parallel.class_logmass);
  }
}

TEST(BuildPartition, MatchesGroupByNormalizedString) {
  Rng rng(123);
  const std::vector<std::string> atoms{"paris", "london", "rome", "bolton england", "x"};
  for (int t = 0; t < 200; ++t) {
    const std::size_t m = 1 + rng() % 12;
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < m; ++i) {
      std::string s = atoms[rng() % atoms.size()];
      if (rng() % 2) s[0] = static_cast<char>(std::toupper(s[0]));
      if (rng() % 3 == 0) s = "The " + s;
      if (rng() % 3 == 0) s += ".";
      texts.push_back(s);
    }
    EntailmentJudge j(normalized());
    const auto p = build_partition(make_samples(texts), j, "q", 0.5);
    ASSERT_TRUE(p.is_partition_of(m));

    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < m; ++i) groups[normalize_answer(texts[i])].push_back(i);
    Classes want;
    for (auto& [k, v] : groups) want.push_back(v);
    std::sort(want.begin(), want.end());
    EXPECT_EQ(p.classes, want);
  }
}

TEST(BuildPartition, PermutationEquivariance) {
  Rng rng(77);
  const std::vector<std::string> pool{"Paris", "paris", "London", "Rome", "rome.", "Oslo"};
  for (int t = 0; t < 100; ++t) {
    const std::size_t m = 2 + rng() % 10;
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < m; ++i) texts.push_back(pool[rng() % pool.size()]);
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::string> permuted(m);
    for (std::size_t i = 0; i < m; ++i) permuted[i] = texts[perm[i]];

    EntailmentJudge j(normalized());
    const auto a = build_partition(make_samples(texts), j, "q", 0.5).labels(m);
    const auto b = build_partition(make_samples(permuted), j, "q", 0.5).labels(m);
    // Samples i and k share a class before iff their images share one after.
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < m; ++k) EXPECT_EQ(a[perm[i]] == a[perm[k]], b[i] == b[k]);
  }
}

TEST(BuildPartition, RaisingTauNeverMerges) {
  Rng rng(5);
  const std::vector<std::string> names{"a", "b", "c", "d", "e", "f"};
  for (int t = 0; t < 100; ++t) {
    auto table = std::make_shared<TableOracle>();
    for (const auto& x : names)
      for (const auto& y : names)
        if (x != y) table->set(x, y, uniform01(rng));
    std::vector<std::string> texts;
    for (int i = 0; i < 8; ++i) texts.push_back(names[rng() % names.size()]);
    const auto s = make_samples(texts);
    EntailmentJudge j(table);
    std::size_t prev = 0;
    std::vector<std::size_t> prev_labels;
    for (double tau : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const auto p = build_partition(s, j, "q", tau);
      EXPECT_GE(p.size(), prev);
      const auto lab = p.labels(s.size());
      if (!prev_labels.empty()) {
        // Every new class sits inside one old class.
        for (std::size_t i = 0; i < s.size(); ++i)
          for (std::size_t k = 0; k < s.size(); ++k)
            if (lab[i] == lab[k]) {
              EXPECT_EQ(prev_labels[i], prev_labels[k]);
            }
      }
      prev = p.size();
      prev_labels = lab;
    }
  }
}

TEST(ConnectedComponents, MatchesTransitiveClosure) {
  Rng rng(31);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng() % 12;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) reach[i][i] = true;
    const std::size_t e = rng() % (2 * n);
    for (std::size_t k = 0; k < e; ++k) {
      const std::size_t a = rng() % n, b = rng() % n;
      edges.emplace_back(a, b);
      reach[a][b] = reach[b][a] = true;
    }
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (reach[i][k] && reach[k][j]) reach[i][j] = true;
    const auto comps = connected_components(n, edges);
    std::vector<std::size_t> label(n);
    for (std::size_t c = 0; c < comps.size(); ++c)
      for (std::size_t i : comps[c]) label[i] = c;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) EXPECT_EQ(label[i] == label[j], static_cast<bool>(reach[i][j]));
    for (std::size_t c = 1; c < comps.size(); ++c) EXPECT_LT(comps[c - 1].front(), comps[c].front());
  }
}

TEST(LogSumExp, StableAndExact) {
  const std::vector<double> big{1000.0, 1000.0};
  EXPECT_NEAR(log_sum_exp(big), 1000.0 + std::log(2.0), 1e-12);
  const std::vector<double> small{-1.0, -1.0, -2.0};
  EXPECT_NEAR(log_sum_exp(small), std::log(2 * std::exp(-1.0) + std::exp(-2.0)), 1e-14);
  EXPECT_EQ(log_sum_exp(std::vector<double>{}), -std::numeric_limits<double>::infinity());
}

TEST(GoldenClass, Examples) {
  EntailmentJudge ex(exact());
  const auto s = make_samples({"Paris", "London"});
  const auto p = build_partition(s, ex, "q", 0.5);
  const auto hit = find_golden_class(p, s, "Paris", ex, "q", 0.5);
  ASSERT_TRUE(hit.index);
  EXPECT_EQ(p.classes[*hit.index].front(), 0u);
  EXPECT_FALSE(hit.ambiguous());
  EXPECT_FALSE(find_golden_class(p, s, "Berlin", ex, "q", 0.5).index);
  EXPECT_THROW(find_golden_class(p, s, "  ", ex, "q", 0.5), Error);

  EntailmentJudge nj(normalized());
  const auto b = make_samples({"Bolton, England"});
  const auto bp = build_partition(b, nj, "q", 0.5);
  EXPECT_TRUE(find_golden_class(bp, b, "Bolton, England", nj, "q", 0.5).index);
}

TEST(GoldenClass, AmbiguityPicksLargestMass) {
  auto table = std::make_shared<TableOracle>();
  table->set_both("NYC", "New York", 0.9);
  table->set_both("New York State", "New York", 0.9);
  EntailmentJudge j(table);
  std::vector<AnswerSample> s{{"NYC", std::nullopt, -2.0, ContextTag::prior_B},
                              {"New York State", std::nullopt, -0.5, ContextTag::prior_B}};
  const auto p = build_partition(s, j, "q", 0.5);
  ASSERT_EQ(p.size(), 2u);
  const auto g = find_golden_class(p, s, "New York", j, "q", 0.5);
  EXPECT_TRUE(g.ambiguous());
  ASSERT_TRUE(g.index);
  EXPECT_EQ(*g.index, 1u);
}
