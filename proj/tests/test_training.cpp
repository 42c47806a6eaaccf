#include <cmath>
#include <cstdlib>

#include "doctest.h"
#include "oracle/vanilla_trainer.hpp"
#include "smoothsnn/data.hpp"
#include "smoothsnn/errors.hpp"
#include "smoothsnn/training.hpp"

using namespace smoothsnn;

namespace {

ModelParams<double> scalar_params(double w) {
  ModelParams<double> p;
  p.weights.push_back(Tensor<double>({1, 1}, w));
  return p;
}

Gradients<double> scalar_grads(double g) {
  Gradients<double> grads;
  grads.weights.push_back(Tensor<double>({1, 1}, g));
  return grads;
}

ModelSpec task_spec(bool smoothing) {
  ModelSpec spec;
  spec.layer_sizes = {20, 32, 3};
  spec.smoothing_enabled = smoothing;
  return spec;
}

TrainConfig quick_config(double gamma) {
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.batch_size = 16;
  cfg.guidance.gamma = gamma;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("sgd_step examples") {
  auto p = scalar_params(1.0);
  auto opt = OptimizerState<double>::zeros_like(p);
  sgd_step(p, scalar_grads(0.1), opt, 0.1, 0.0, 0.0);
  CHECK(p.weights[0][0] == doctest::Approx(0.99).epsilon(1e-15));

  auto fixed = scalar_params(0.37);
  auto opt2 = OptimizerState<double>::zeros_like(fixed);
  sgd_step(fixed, scalar_grads(0.0), opt2, 0.1, 0.9, 0.0);
  CHECK(fixed.weights[0][0] == 0.37);

  auto m = scalar_params(0.0);
  auto opt3 = OptimizerState<double>::zeros_like(m);
  sgd_step(m, scalar_grads(1.0), opt3, 1.0, 0.9, 0.0);
  sgd_step(m, scalar_grads(1.0), opt3, 1.0, 0.9, 0.0);
  CHECK(m.weights[0][0] == doctest::Approx(-2.9).epsilon(1e-15));

  auto decay = scalar_params(2.0);
  auto opt4 = OptimizerState<double>::zeros_like(decay);
  sgd_step(decay, scalar_grads(0.0), opt4, 0.5, 0.0, 0.1);
  CHECK(decay.weights[0][0] == doctest::Approx(1.9));

  auto bad = scalar_grads(1.0);
  bad.weights.push_back(Tensor<double>({1, 1}));
  CHECK_THROWS_AS(sgd_step(m, bad, opt3, 1.0, 0.9, 0.0), ConsistencyError);
}

TEST_CASE("weight decay skips smoothing parameters") {
  ModelParams<double> p = scalar_params(1.0);
  p.betas = {1.0};
  Gradients<double> g = scalar_grads(0.0);
  g.betas = {0.0};
  auto opt = OptimizerState<double>::zeros_like(p);
  sgd_step(p, g, opt, 0.1, 0.0, 0.5);
  CHECK(p.weights[0][0] == doctest::Approx(0.95));
  CHECK(p.betas[0] == 1.0);
}

TEST_CASE("lr_at steps down tenfold") {
  TrainConfig cfg;
  CHECK(lr_at(0, cfg) == 0.1);
  CHECK(lr_at(29, cfg) == 0.1);
  CHECK(lr_at(30, cfg) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(lr_at(65, cfg) == doctest::Approx(0.001).epsilon(1e-15));
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.T = 0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = TrainConfig{};
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = TrainConfig{};
  cfg.guidance.drop_probability = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
}

TEST_CASE("argmax and ensemble accuracy") {
  const std::vector<float> tie{1.0f, 3.0f, 3.0f};
  CHECK(argmax<float>(tie) == 1);
  const auto logits = Tensor<double>(Shape{2, 2, 2}, std::vector<double>{1, 0, 1, 0, 0, 1, 2, 0});
  const std::vector<std::uint32_t> labels{0, 0};
  CHECK(ensemble_accuracy(logits, labels) == 1.0);
}

TEST_CASE("stream seeds are distinct") {
  CHECK(stream_seed(1, SeedStream::Init) != stream_seed(1, SeedStream::Shuffle));
  CHECK(stream_seed(1, SeedStream::Init) != stream_seed(2, SeedStream::Init));
  CHECK(stream_seed(9, SeedStream::Drop) == stream_seed(9, SeedStream::Drop));
}

TEST_CASE("train rejects mismatched data") {
  const auto data = gen_temporal_patterns(3, 20, 5, 10, 0.1, 1);
  auto spec = task_spec(false);
  TrainConfig cfg = quick_config(0.0);
  cfg.T = 4;
  CHECK_THROWS_AS(train<float>(spec, data, cfg), ConsistencyError);
  spec.layer_sizes = {21, 8, 3};
  CHECK_THROWS_AS(train<float>(spec, data, TrainConfig{}), ConsistencyError);
}

TEST_CASE("training learns the easy synthetic task") {
  const auto data = gen_temporal_patterns(3, 20, 5, 60, 0.1, 17);
  for (bool full : {false, true}) {
    const auto spec = task_spec(full);
    const auto res = train<float>(spec, data, quick_config(full ? 1.0 : 0.0));
    REQUIRE(res.history.size() == 8);
    CHECK(res.history.back().train_acc > 0.9);
    CHECK(res.history.back().val_acc > 0.8);
    CHECK(res.history.back().train_loss < res.history.front().train_loss);
    for (const auto& rec : res.history) {
      REQUIRE(rec.alphas.size() == 1);
      if (full) {
        CHECK(rec.alphas[0] > 0.0);
        CHECK(rec.alphas[0] < 1.0);
        CHECK(rec.guidance_loss >= 0.0);
      } else {
        CHECK(rec.alphas[0] == 0.0);
      }
    }
  }
}

TEST_CASE("training is deterministic and thread-count independent") {
  const auto data = gen_temporal_patterns(3, 20, 5, 30, 0.15, 4);
  const auto spec = task_spec(true);
  auto cfg = quick_config(1.0);
  cfg.epochs = 3;
  const auto a = train<float>(spec, data, cfg);
  const auto b = train<float>(spec, data, cfg);
  CHECK(a.params == b.params);
  CHECK(metrics_csv(a.history) == metrics_csv(b.history));

  const auto logits1 = collect_logits(spec, a.params, data, 7, 99, 1);
  const auto logits4 = collect_logits(spec, a.params, data, 7, 99, 4);
  CHECK(logits1 == logits4);

  cfg.seed = 4;
  CHECK_FALSE(train<float>(spec, data, cfg).params == a.params);
}

TEST_CASE("single timestep trains on cross-entropy alone") {
  const auto data = gen_temporal_patterns(3, 20, 1, 40, 0.05, 8);
  auto cfg = quick_config(1.0);
  cfg.T = 1;
  const auto res = train<float>(task_spec(true), data, cfg);
  for (const auto& rec : res.history) {
    CHECK(rec.guidance_loss == 0.0);
    CHECK(rec.train_loss == rec.train_ce);
  }
  CHECK(res.history.back().train_acc > 0.6);
}

TEST_CASE("no validation split reports NaN accuracy") {
  const auto data = gen_temporal_patterns(2, 20, 3, 10, 0.1, 2);
  ModelSpec spec;
  spec.layer_sizes = {20, 8, 2};
  TrainConfig cfg;
  cfg.T = 3;
  cfg.epochs = 1;
  cfg.val_fraction = 0.0;
  const auto res = train<double>(spec, data, cfg);
  CHECK(std::isnan(res.history[0].val_acc));
  CHECK(metrics_csv(res.history).find("nan") != std::string::npos);
}

TEST_CASE("vanilla training matches the stand-alone reference bit for bit") {
  const auto data = gen_temporal_patterns(3, 20, 4, 20, 0.2, 6);
  ModelSpec spec;
  spec.layer_sizes = {20, 12, 10, 3};
  TrainConfig cfg;
  cfg.T = 4;
  cfg.epochs = 4;
  cfg.batch_size = 8;
  cfg.lr_decay_every = 2;
  cfg.guidance.gamma = 0.0;
  cfg.seed = 12;
  const auto lib = train<float>(spec, data, cfg);
  const auto ref = oracle::train_vanilla(spec.layer_sizes, data, cfg.T, cfg.epochs,
                                         cfg.batch_size, cfg.lr0, cfg.lr_decay_every,
                                         cfg.weight_decay, cfg.momentum, cfg.val_fraction,
                                         cfg.seed);
  REQUIRE(ref.weights.size() == lib.params.weights.size());
  for (std::size_t l = 0; l < ref.weights.size(); ++l) {
    const auto& w = lib.params.weights[l];
    CHECK(std::vector<float>(w.data().begin(), w.data().end()) == ref.weights[l]);
  }
}

TEST_CASE("metrics csv layout") {
  MetricsRecord r;
  r.epoch = 1;
  r.lr = 0.1;
  r.train_loss = 1.5;
  r.guidance_loss = 0.25;
  r.train_acc = 0.5;
  r.val_acc = 0.75;
  r.alphas = {0.5, 0.25};
  r.total_spikes = 42;
  CHECK(metrics_csv({r}) ==
        "epoch,lr,train_loss,guidance_loss,train_acc,val_acc,alpha_l1,alpha_l2,total_spikes\n"
        "1,0.1,1.5,0.25,0.5,0.75,0.5,0.25,42\n");
}

TEST_CASE("eval thread count from the environment") {
  setenv("SMOOTHSNN_THREADS", "3", 1);
  CHECK(eval_threads_from_env() == 3);
  setenv("SMOOTHSNN_THREADS", "zero", 1);
  CHECK(eval_threads_from_env() == 1);
  unsetenv("SMOOTHSNN_THREADS");
  CHECK(eval_threads_from_env() == 1);
}
