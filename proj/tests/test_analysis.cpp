#include <cmath>
#include <sstream>

#include "doctest.h"
#include "smoothsnn/analysis.hpp"
#include "smoothsnn/errors.hpp"

using namespace smoothsnn;

namespace {

ForwardTrace<double> trace_of(const std::vector<std::vector<double>>& h_pre_per_t) {
  ForwardTrace<double> trace;
  trace.input = Tensor<double>({h_pre_per_t.size(), 1, 1});
  trace.layers.resize(1);
  for (const auto& values : h_pre_per_t) {
    LayerState<double> s;
    s.h_pre = Tensor<double>(Shape{1, values.size()}, values);
    trace.layers[0].steps.push_back(s);
  }
  return trace;
}

std::size_t occupied(const std::vector<std::uint64_t>& hist) {
  std::size_t n = 0;
  for (auto c : hist) n += c > 0;
  return n;
}

}  // namespace

TEST_CASE("mp_stats on constant and two-valued layers") {
  const auto flat = mp_stats(trace_of({{0.7, 0.7, 0.7}, {0.7, 0.7, 0.7}}), 0, 16);
  for (std::size_t t = 0; t < 2; ++t) {
    CHECK(flat.mean[t] == doctest::Approx(0.7));
    CHECK(flat.stddev[t] == 0.0);
    CHECK(occupied(flat.histogram[t]) == 1);
    CHECK(flat.count[t] == 3);
  }

  const auto bern = mp_stats(trace_of({{0, 1, 0, 1}}), 0, 8);
  CHECK(bern.mean[0] == 0.5);
  CHECK(bern.stddev[0] == 0.5);
  CHECK(bern.histogram[0].front() == 2);
  CHECK(bern.histogram[0].back() == 2);
}

TEST_CASE("mp_stats histogram mass and fixed range clamping") {
  const auto st = mp_stats(trace_of({{-9, -0.5, 0.25, 1.0, 9}, {0.1, 0.2, 0.3, 0.4, 0.5}}), 0,
                           4, RangeMode::Fixed, 1.0);
  CHECK(st.range_lo == -2.0);
  CHECK(st.range_hi == 2.0);
  for (const auto& h : st.histogram) {
    std::uint64_t total = 0;
    for (auto c : h) total += c;
    CHECK(total == 5);
  }
  CHECK(st.histogram[0] == std::vector<std::uint64_t>{1, 1, 1, 2});
  CHECK_THROWS_AS(mp_stats(trace_of({{1}}), 3), ParameterError);
  CHECK_THROWS_AS(mp_stats(trace_of({}), 0), DataError);
}

TEST_CASE("cosine similarity") {
  const std::vector<double> a{1, 1}, b{1, 0}, c{0, 1}, z{0, 0};
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0));
  CHECK(cosine_similarity(b, c) == 0.0);
  CHECK(cosine_similarity(a, b) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(cosine_similarity(a, z) == 0.0);

  DistributionStats st;
  st.histogram = {{3, 0}, {3, 0}, {0, 5}};
  CHECK(adjacent_cosine(st) == std::vector<double>{1.0, 0.0});
}

TEST_CASE("prefix accuracies on crafted logits") {
  // Sample 0 (label 1) and sample 1 (label 0): uniform at t=1, decisive at t=2.
  const auto logits = Tensor<double>(Shape{2, 2, 2}, std::vector<double>{0, 0, 0, 3, 0, 0, 3, 0});
  const std::vector<std::uint32_t> labels{1, 0};
  const auto acc = prefix_accuracies(logits, labels);
  CHECK(acc == std::vector<double>{0.5, 1.0});

  auto shifted = logits;
  for (auto& v : shifted.data()) v += 4.0;
  CHECK(prefix_accuracies(shifted, labels) == acc);

  const auto perfect = Tensor<double>(Shape{1, 3, 2}, std::vector<double>{0, 1, 0, 1, 0, 1});
  const std::vector<std::uint32_t> one{1};
  CHECK(prefix_accuracies(perfect, one) == std::vector<double>{1, 1, 1});
}

TEST_CASE("temporal sensitivity closed forms") {
  SensitivityQuery q;
  q.tau = 2.0;
  q.alpha = 0.25;
  q.delta_t = 3;
  auto r = temporal_sensitivity(q);
  CHECK(std::abs(r.vanilla - 0.125) < 1e-12);
  CHECK(std::abs(r.smoothed - 0.146484375) < 1e-12);
  q.delta_t = 5;
  r = temporal_sensitivity(q);
  CHECK(std::abs(r.vanilla - 0.03125) < 1e-12);
  CHECK(std::abs(r.smoothed - 0.057220458984375) < 1e-12);
  CHECK(r.smoothed / r.vanilla == doctest::Approx(1.831).epsilon(1e-3));

  for (double alpha : {0.01, 0.25, 0.5, 0.9}) {
    q.alpha = alpha;
    q.delta_t = 1;
    const auto base = temporal_sensitivity(q);
    CHECK(base.vanilla == 0.5);
    CHECK(base.smoothed == doctest::Approx((1 - alpha) * 0.5));
    CHECK(base.smoothed <= base.vanilla);
    double prev_ratio = base.smoothed / base.vanilla;
    for (std::size_t dt = 2; dt <= 12; ++dt) {
      q.delta_t = dt;
      const auto cur = temporal_sensitivity(q);
      q.delta_t = dt - 1;
      const auto before = temporal_sensitivity(q);
      CHECK(std::abs(cur.smoothed - (alpha + (1 - alpha) * 0.5) * before.smoothed) < 1e-12);
      const double ratio = cur.smoothed / cur.vanilla;
      CHECK(ratio > prev_ratio);
      prev_ratio = ratio;
    }
  }
  q.epsilon = 0.8;
  q.delta_t = 2;
  q.alpha = 0.5;
  CHECK(temporal_sensitivity(q).vanilla == doctest::Approx(0.64));
}

TEST_CASE("logits csv") {
  Tensor<float> logits({2, 2, 3});
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = 0.5f * static_cast<float>(i) - 1.0f;
  const std::string csv = logits_csv(logits);
  std::istringstream in(csv);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  REQUIRE(rows.size() == 13);
  CHECK(rows[0] == "sample,t,class,logit");
  CHECK(rows[1] == "0,0,0,-1");
  CHECK(rows[4] == "0,1,0,0.5");
  CHECK(rows[12] == "1,1,2,4.5");
  CHECK(parse_logits_csv(csv) == logits);
  CHECK_THROWS(parse_logits_csv("sample,t,class,logit\n0,0,x,1\n"));
}

TEST_CASE("csv writers have the documented headers") {
  DistributionStats st;
  st.mean = {0.5};
  st.stddev = {0.1};
  st.count = {4};
  st.bins = 2;
  st.range_lo = 0.0;
  st.range_hi = 1.0;
  st.histogram = {{1, 3}};
  CHECK(mp_stats_csv({st}) == "layer,t,mean,std,count\n0,0,0.5,0.1,4\n");
  CHECK(histogram_csv({st}) ==
        "layer,t,bin,bin_lo,bin_hi,count\n0,0,0,0,0.5,1\n0,0,1,0.5,1,3\n");
  CHECK(similarity_csv({st}) == "layer,t_prev,t_next,cosine\n");
  CHECK(prefix_accuracy_csv({0.5, 1.0}) == "k,accuracy\n1,0.5\n2,1\n");
  SensitivityQuery q;
  q.alpha = 0.25;
  q.delta_t = 5;
  CHECK(sensitivity_csv({q}) ==
        "tau,alpha,delta_t,epsilon,vanilla,smoothed,ratio\n2,0.25,5,0.5,0.03125,0.057220459,1.83105469\n");
}
