#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "g2s/common.hpp"
#include "g2s/eval.hpp"
#include "g2s/metrics.hpp"
#include "../support/testgraphs.hpp"

using namespace g2s;

namespace {

// Brute-force reference scorer: independent set logic, same formulas.
F1Result reference_f1(const std::vector<std::string>& pred,
                      const std::vector<std::string>& truth) {
  std::vector<std::string> p_unique;
  for (const auto& w : pred) {
    if (w == "<SOS>" || w == "<UNK>" || w == "<EOS>") continue;
    bool dup = false;
    for (const auto& seen : p_unique) dup = dup || seen == w;
    if (!dup) p_unique.push_back(w);
  }
  std::vector<std::string> t_unique;
  for (const auto& w : truth) {
    bool dup = false;
    for (const auto& seen : t_unique) dup = dup || seen == w;
    if (!dup) t_unique.push_back(w);
  }
  F1Result r;
  for (const auto& w : p_unique) {
    bool in_truth = false;
    for (const auto& t : t_unique) in_truth = in_truth || t == w;
    if (in_truth) ++r.tp;
    else ++r.fp;
  }
  for (const auto& w : t_unique) {
    bool in_pred = false;
    for (const auto& p : p_unique) in_pred = in_pred || p == w;
    if (!in_pred) ++r.fn;
  }
  r.precision = r.tp + r.fp == 0 ? 0.0 : double(r.tp) / double(r.tp + r.fp);
  r.recall = r.tp + r.fn == 0 ? 0.0 : double(r.tp) / double(r.tp + r.fn);
  r.f1 = r.precision + r.recall == 0.0
             ? 0.0
             : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

std::vector<std::string> random_words(Rng& rng, std::size_t max_len, bool allow_empty,
                                      bool with_specials) {
  static const std::vector<std::string> pool = {"get",  "set",  "mean", "max",  "sum",
                                                "name", "node", "list", "size", "key"};
  static const std::vector<std::string> specials = {"<UNK>", "<EOS>", "<SOS>"};
  std::vector<std::string> out;
  const std::size_t n = (allow_empty ? 0 : 1) + rng.below(max_len);
  for (std::size_t i = 0; i < n; ++i) {
    if (with_specials && rng.below(5) == 0) {
      out.push_back(specials[rng.below(specials.size())]);
    } else {
      out.push_back(pool[rng.below(pool.size())]);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("f1 worked examples") {
  const auto perfect = f1_score({"get", "mean"}, {"get", "mean"});
  CHECK(perfect.f1 == doctest::Approx(1.0));
  CHECK(perfect.tp == 2);

  const auto half = f1_score({"get", "max"}, {"get", "mean"});
  CHECK(half.tp == 1);
  CHECK(half.fp == 1);
  CHECK(half.fn == 1);
  CHECK(half.f1 == doctest::Approx(0.5));

  const auto dup = f1_score({"get", "get"}, {"get"});
  CHECK(dup.f1 == doctest::Approx(1.0));

  const auto empty = f1_score({}, {"get"});
  CHECK(empty.f1 == 0.0);
  CHECK(empty.precision == 0.0);
  CHECK(empty.recall == 0.0);

  const auto unk = f1_score({"<UNK>"}, {"<UNK>"});  // specials never match
  CHECK(unk.f1 == 0.0);
}

TEST_CASE("f1 matches the brute-force scorer on 1000 random pairs") {
  Rng rng(101);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto pred = random_words(rng, 6, true, true);
    const auto truth = random_words(rng, 4, false, false);
    const auto a = f1_score(pred, truth);
    const auto b = reference_f1(pred, truth);
    CHECK(a.tp == b.tp);
    CHECK(a.fp == b.fp);
    CHECK(a.fn == b.fn);
    CHECK(a.precision == b.precision);
    CHECK(a.recall == b.recall);
    CHECK(a.f1 == b.f1);
  }
}

TEST_CASE("f1 stays in range and symmetry links precision and recall") {
  Rng rng(103);
  for (int trial = 0; trial < 500; ++trial) {
    const auto a = random_words(rng, 5, true, false);
    const auto b = random_words(rng, 5, false, false);
    const auto ab = f1_score(a, b);
    const auto ba = f1_score(b, a);
    CHECK(ab.f1 >= 0.0);
    CHECK(ab.f1 <= 1.0);
    CHECK(ab.precision == doctest::Approx(ba.recall));
    CHECK(ab.recall == doctest::Approx(ba.precision));

    std::set<std::string> sa(a.begin(), a.end());
    std::set<std::string> sb(b.begin(), b.end());
    if (!sa.empty() && sa == sb) CHECK(ab.f1 == doctest::Approx(1.0));
    if (ab.f1 == 1.0) CHECK(sa == sb);
  }
}

TEST_CASE("aggregate_runs reports mean and unbiased standard deviation") {
  const auto constant = aggregate_runs({0.5, 0.5, 0.5});
  CHECK(constant.mean == doctest::Approx(0.5));
  CHECK(constant.stddev.value() == doctest::Approx(0.0));

  const auto two = aggregate_runs({0.16, 0.18});
  CHECK(two.mean == doctest::Approx(0.17));
  CHECK(two.stddev.value() == doctest::Approx(0.014142135624).epsilon(1e-9));

  const auto single = aggregate_runs({0.3});
  CHECK(single.mean == doctest::Approx(0.3));
  CHECK(!single.stddev.has_value());

  CHECK_THROWS_AS(aggregate_runs({}), ContractError);

  Rng rng(107);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> xs;
    double lo = 1.0;
    double hi = 0.0;
    for (std::size_t i = 0; i < 1 + rng.below(8); ++i) {
      xs.push_back(rng.uniform());
      lo = std::min(lo, xs.back());
      hi = std::max(hi, xs.back());
    }
    const auto rep = aggregate_runs(xs);
    CHECK(rep.mean >= lo - 1e-12);
    CHECK(rep.mean <= hi + 1e-12);
  }
}

TEST_CASE("student t survival values match an independent reference") {
  // reference values computed with scipy.stats.t.sf
  CHECK(student_t_two_sided_p(2.0, 10.0) == doctest::Approx(0.073388034771).epsilon(1e-9));
  CHECK(student_t_two_sided_p(1.0, 3.5) == doctest::Approx(0.381337253563).epsilon(1e-9));
  CHECK(student_t_two_sided_p(0.5, 18.0) == doctest::Approx(0.623132457297).epsilon(1e-9));
  CHECK(student_t_two_sided_p(3.2, 7.25) == doctest::Approx(0.014371344769).epsilon(1e-9));
  CHECK(student_t_two_sided_p(0.0, 5.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("welch comparison matches the reference implementation") {
  const std::vector<double> a = {0.171, 0.168, 0.175, 0.170};
  const std::vector<double> b = {0.160, 0.166, 0.158, 0.163, 0.161};
  const auto cmp = compare_runs(a, b);
  CHECK(cmp.t_stat == doctest::Approx(4.684411234005).epsilon(1e-9));
  CHECK(cmp.p_value == doctest::Approx(0.002554019184).epsilon(1e-8));
  CHECK(cmp.cohens_d == doctest::Approx(3.128371598893).epsilon(1e-9));
}

TEST_CASE("cohen's d closed forms and invariances") {
  const auto same = compare_runs({0.4, 0.4}, {0.4, 0.4});
  CHECK(same.cohens_d == 0.0);
  CHECK(same.p_value == doctest::Approx(1.0));

  // identical spreads shifted by exactly one pooled standard deviation
  const std::vector<double> a = {0.9, 1.1};
  const double sp = std::sqrt(0.02);  // pooled std of two {.., ..} samples with var 0.02
  const std::vector<double> b = {0.9 - sp, 1.1 - sp};
  const auto cmp = compare_runs(a, b);
  CHECK(cmp.cohens_d == doctest::Approx(1.0).epsilon(1e-9));

  // shift invariance and antisymmetry
  std::vector<double> a2 = a;
  std::vector<double> b2 = b;
  for (auto& x : a2) x += 5.0;
  for (auto& x : b2) x += 5.0;
  CHECK(compare_runs(a2, b2).cohens_d == doctest::Approx(cmp.cohens_d).epsilon(1e-12));
  CHECK(compare_runs(b, a).cohens_d == doctest::Approx(-cmp.cohens_d).epsilon(1e-12));
}

TEST_CASE("p-values shrink as separation grows") {
  Rng rng(109);
  double prev_mean_p = 1.1;
  for (const double gap : {0.0, 0.5, 1.5, 4.0}) {
    double mean_p = 0.0;
    const int reps = 40;
    for (int rep = 0; rep < reps; ++rep) {
      std::vector<double> a;
      std::vector<double> b;
      for (int i = 0; i < 12; ++i) {
        a.push_back(rng.normal(0.0, 1.0));
        b.push_back(rng.normal(gap, 1.0));
      }
      mean_p += compare_runs(b, a).p_value;
    }
    mean_p /= reps;
    CHECK(mean_p < prev_mean_p);
    prev_mean_p = mean_p;
  }
  CHECK(prev_mean_p < 0.001);
}

TEST_CASE("evaluate_split averages per-graph scores and matches re-scoring") {
  ModelConfig cfg;
  cfg.encoder.num_layers = 2;
  cfg.encoder.hidden_dim = 4;
  cfg.encoder.dropout_p = 0.0;
  cfg.encoder.depth_vocab = 6;
  cfg.encoder.type_vocab = 10;
  cfg.encoder.attr_vocab = 12;
  cfg.decoder = DecoderKind::kLinear;
  cfg.target_vocab = 11;
  cfg.max_len = 5;
  Model<double> model(cfg);
  model.init(113);

  Dataset ds;
  std::unordered_map<std::string, std::size_t> freq;
  Rng rng(127);
  for (int i = 0; i < 30; ++i) {
    ds.graphs.push_back(testing::random_program_graph(rng, {.max_nodes = 8}));
    for (const auto& t : ds.graphs.back().target) ++freq[t];
  }
  ds.target_vocab = Vocabulary::build(freq, 0);
  ds.meta.train = {0};
  ds.meta.valid = {1};
  std::vector<std::size_t> rest;
  for (std::size_t i = 2; i < 30; ++i) rest.push_back(i);
  ds.meta.test = rest;

  const auto eval = evaluate_split(model, ds, ds.meta.test);
  REQUIRE(eval.examples.size() == rest.size());

  double total = 0.0;
  for (const auto& ex : eval.examples) {
    const auto decoded = model.decode_graph(ds.graphs[ex.index]);
    std::vector<std::string> words;
    for (auto id : decoded.ids) words.push_back(ds.target_vocab.decode(id));
    const auto ref = reference_f1(words, ds.graphs[ex.index].target);
    CHECK(ex.f1 == ref.f1);
    total += ref.f1;
  }
  CHECK(eval.mean_f1 == doctest::Approx(total / double(rest.size())).epsilon(1e-12));

  // duplicating every example leaves the mean unchanged
  auto doubled = rest;
  doubled.insert(doubled.end(), rest.begin(), rest.end());
  const auto eval2 = evaluate_split(model, ds, doubled);
  CHECK(eval2.mean_f1 == doctest::Approx(eval.mean_f1).epsilon(1e-12));
}
