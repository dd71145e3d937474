#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <deque>
#include <vector>

#include "oracles.hpp"
#include "ptc/contrast.hpp"
#include "ptc/grad_check.hpp"
#include "ptc/tokenizer.hpp"
#include "ptc/vocab.hpp"

using ptc::Adam;
using ptc::EmbeddingQueue;
using ptc::EncodeMode;
using ptc::EncoderConfig;
using ptc::MomentumState;
using ptc::PtModel;
using ptc::Tape;
using ptc::Tensor;
using ptc::TrainConfig;
using ptc::TrainMode;
using ptc::Vocabulary;

namespace {

std::vector<double> unit(std::vector<double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double inv = 1.0 / std::sqrt(sq);
  for (double& x : v) x *= inv;
  return v;
}

Tensor<> unit_rows(ptc::Shape shape, std::uint64_t seed) {
  auto t = Tensor<>::randn(std::move(shape), seed);
  return ptc::l2_normalize(t);
}

struct Toy {
  Vocabulary vocab;
  EncoderConfig cfg;
  ptc::TokenizedBatch batch;
  TrainConfig tc;

  Toy() : vocab(Vocabulary::build({"a b c d e f g h"}, 1)) {
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.d_model = 8;
    cfg.d_ff = 16;
    cfg.max_len = 8;
    cfg.dropout = 0.1;
    cfg.vocab_size = vocab.size();
    batch = ptc::tokenize_batch({"a b c", "d e f g"}, vocab, 8);
    tc.tau = 0.05;
    tc.momentum = 0.885;
    tc.lr = 1e-3;
    tc.batch_size = 2;
    tc.queue_capacity = 8;
    tc.pseudo_len = 4;
    tc.seed = 13;
  }
};

}  // namespace

TEST_CASE("queue keeps the newest entries in order", "[queue]") {
  EmbeddingQueue<> q(3, 2);
  auto a = unit({1, 1}), b = unit({1, -1}), c = unit({-1, 1}),
       d = unit({-1, -1});
  q.push(a);
  CHECK(q.size() == 1);
  q.push(b);
  q.push(c);
  q.push(d);
  CHECK(q.size() == 3);
  auto got = q.contents();
  CHECK(got[0] == b);
  CHECK(got[1] == c);
  CHECK(got[2] == d);
  auto t = q.as_tensor();
  CHECK(t.shape() == ptc::Shape{3, 2});
  CHECK(t.data()[0] == b[0]);
}

TEST_CASE("queue rejects non-unit vectors", "[queue]") {
  EmbeddingQueue<> q(3, 2);
  CHECK_THROWS_AS(q.push(std::vector<double>{1.0, 1.0}), ptc::ContractError);
  CHECK_THROWS_AS(q.push(std::vector<double>{0.5}), ptc::ShapeError);
  CHECK_THROWS_AS(q.as_tensor(), ptc::ContractError);
}

TEST_CASE("enqueue_batch inserts rows in order and saturates", "[queue]") {
  EmbeddingQueue<> q(4, 3);
  auto first = unit_rows({2, 3}, 1);
  ptc::enqueue_batch(q, first);
  CHECK(q.size() == 2);
  // 6 rows through a capacity-4 queue: only the last 4 survive
  auto big = unit_rows({6, 3}, 2);
  ptc::enqueue_batch(q, big);
  CHECK(q.size() == 4);
  auto got = q.contents();
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(got[r][j] == big.data()[(r + 2) * 3 + j]);
}

TEST_CASE("queue matches a list oracle over many insertions", "[queue]") {
  const std::size_t cap = 37, dim = 4;
  EmbeddingQueue<> q(cap, dim);
  std::deque<std::vector<double>> oracle;
  auto rng = ptc::make_rng(99);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> v(dim);
    for (double& x : v) x = dist(rng);
    v = unit(v);
    q.push(v);
    oracle.push_back(v);
    if (oracle.size() > cap) oracle.pop_front();
  }
  auto got = q.contents();
  REQUIRE(got.size() == oracle.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == oracle[i]);
}

TEST_CASE("momentum_update endpoint and interpolation cases", "[momentum]") {
  auto target = Tensor<>::full({3}, 1.0);
  auto source = Tensor<>::zeros({3});
  ptc::ParamList<> t{{"w", target}}, s{{"w", source}};

  ptc::momentum_update(t, s, 1.0);
  CHECK(target.data()[0] == 1.0);
  ptc::momentum_update(t, s, 0.885);
  CHECK(target.data()[0] == Catch::Approx(0.885).margin(1e-15));
  ptc::momentum_update(t, s, 0.0);
  CHECK(target.data()[0] == 0.0);
}

TEST_CASE("momentum_update reports the first divergence", "[momentum]") {
  ptc::ParamList<> t{{"a", Tensor<>::zeros({2})}, {"b", Tensor<>::zeros({2})}};
  ptc::ParamList<> s{{"a", Tensor<>::zeros({2})}, {"c", Tensor<>::zeros({2})}};
  try {
    ptc::momentum_update(t, s, 0.5);
    FAIL("expected ContractError");
  } catch (const ptc::ContractError& e) {
    CHECK(std::string(e.what()).find("index 1") != std::string::npos);
    CHECK(std::string(e.what()).find("'b'") != std::string::npos);
  }
  ptc::ParamList<> s2{{"a", Tensor<>::zeros({2})}, {"b", Tensor<>::zeros({3})}};
  CHECK_THROWS_AS(ptc::momentum_update(t, s2, 0.5), ptc::ContractError);
  ptc::ParamList<> shorter{{"a", Tensor<>::zeros({2})}};
  CHECK_THROWS_AS(ptc::momentum_update(t, shorter, 0.5), ptc::ContractError);
  CHECK_THROWS_AS(ptc::momentum_update(t, s, 1.5), ptc::ParameterError);
}

TEST_CASE("momentum distance contracts geometrically", "[momentum]") {
  for (double lambda : {0.0, 0.5, 0.885, 1.0}) {
    auto target = Tensor<>::randn({4, 3}, 7);
    auto source = Tensor<>::randn({4, 3}, 8);
    std::vector<double> diff0(12);
    for (std::size_t i = 0; i < 12; ++i)
      diff0[i] = target.data()[i] - source.data()[i];
    const double dist0 = ptc::l2_norm<double>(diff0);
    ptc::ParamList<> t{{"w", target}}, s{{"w", source}};
    const int k = 20;
    for (int i = 0; i < k; ++i) ptc::momentum_update(t, s, lambda);
    std::vector<double> diff(12);
    for (std::size_t i = 0; i < 12; ++i)
      diff[i] = target.data()[i] - source.data()[i];
    CHECK(ptc::l2_norm<double>(diff) ==
          Catch::Approx(std::pow(lambda, k) * dist0).margin(1e-9));
  }
}

TEST_CASE("info_nce with empty queue is exactly zero", "[loss]") {
  EmbeddingQueue<> q(4, 3);
  auto h = Tensor<>::randn({2, 3}, 1);
  auto pos = Tensor<>::randn({2, 3}, 2);
  auto loss = ptc::info_nce_loss(h, pos, q, 0.05);
  CHECK(loss.item() == 0.0);
  // and with a tape: gradient exists but is zero
  h.set_requires_grad(true);
  Tape<> tape;
  auto l2 = ptc::info_nce_loss(h, pos, q, 0.05, &tape);
  CHECK(l2.item() == 0.0);
  tape.backward(l2);
  for (double g : h.grad()) CHECK(g == 0.0);
}

TEST_CASE("info_nce documented one-negative case", "[loss]") {
  EmbeddingQueue<> q(4, 2);
  q.push(std::vector<double>{0.0, 1.0});
  auto h = Tensor<>::from({1, 2}, {1.0, 0.0});
  auto pos = Tensor<>::from({1, 2}, {1.0, 0.0});
  auto loss = ptc::info_nce_loss(h, pos, q, 1.0);
  CHECK(loss.item() ==
        Catch::Approx(std::log(1.0 + std::exp(-1.0))).margin(1e-12));
  CHECK(loss.item() == Catch::Approx(0.313262).margin(1e-6));

  // duplicating the positive into the queue grows the denominator
  q.push(std::vector<double>{1.0, 0.0});
  auto worse = ptc::info_nce_loss(h, pos, q, 1.0);
  CHECK(worse.item() > loss.item());
}

TEST_CASE("info_nce is non-negative and matches a row oracle", "[loss]") {
  const std::size_t b = 5, d = 7, fill = 9;
  EmbeddingQueue<> q(16, d);
  auto negs = unit_rows({fill, d}, 3);
  ptc::enqueue_batch(q, negs);
  auto h = Tensor<>::randn({b, d}, 4);
  auto pos = Tensor<>::randn({b, d}, 5);
  const double tau = 0.07;
  auto loss = ptc::info_nce_loss(h, pos, q, tau);
  CHECK(loss.item() >= 0.0);

  auto hn = ptc::l2_normalize(h);
  auto pn = ptc::l2_normalize(pos);
  double want = 0.0;
  for (std::size_t r = 0; r < b; ++r) {
    std::vector<double> sims;
    double dot = 0.0;
    for (std::size_t j = 0; j < d; ++j)
      dot += hn.data()[r * d + j] * pn.data()[r * d + j];
    sims.push_back(dot);  // positive first
    for (std::size_t n = 0; n < fill; ++n) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j)
        s += hn.data()[r * d + j] * negs.data()[n * d + j];
      sims.push_back(s);
    }
    want += oracle::info_nce_row(sims, tau);
  }
  want /= static_cast<double>(b);
  CHECK(loss.item() == Catch::Approx(want).margin(1e-12));

  CHECK_THROWS_AS(ptc::info_nce_loss(h, pos, q, 0.0), ptc::ParameterError);
  CHECK_THROWS_AS(ptc::info_nce_loss(h, pos, q, -1.0), ptc::ParameterError);
}

TEST_CASE("info_nce gradient check", "[loss][grad]") {
  const std::size_t b = 3, d = 6;
  EmbeddingQueue<> q(8, d);
  ptc::enqueue_batch(q, unit_rows({4, d}, 11));
  auto h = Tensor<>::randn({b, d}, 12);
  auto pos = Tensor<>::randn({b, d}, 13);
  h.set_requires_grad(true);
  auto forward = [&](Tape<>* tape) {
    return ptc::info_nce_loss(h, pos, q, 0.05, tape);
  };
  auto report =
      ptc::grad_check<double>(forward, {{"h", h}}, 1e-6, 1e-6);
  INFO(report.worst_param << " analytic=" << report.analytic_at_worst
                          << " numeric=" << report.numeric_at_worst);
  CHECK(report.pass);
}

TEST_CASE("in-batch info_nce gradient flows to both views", "[loss][grad]") {
  const std::size_t b = 3, d = 5;
  auto h1 = Tensor<>::randn({b, d}, 21);
  auto h2 = Tensor<>::randn({b, d}, 22);
  h1.set_requires_grad(true);
  h2.set_requires_grad(true);
  auto forward = [&](Tape<>* tape) {
    return ptc::in_batch_info_nce(h1, h2, 0.05, tape);
  };
  auto report = ptc::grad_check<double>(
      forward, {{"h1", h1}, {"h2", h2}}, 1e-6, 1e-6);
  CHECK(report.pass);
  // identical views with in-batch negatives still give positive loss for b>1
  auto loss = ptc::in_batch_info_nce(h1, h1, 0.05);
  CHECK(loss.item() > 0.0);
}

TEST_CASE("training_step smoke contract", "[train]") {
  Toy toy;
  auto model = PtModel<>::init(toy.cfg, toy.tc.pseudo_len, 5);
  model.set_requires_grad(true);
  auto momentum = MomentumState<>::from(model, false);
  EmbeddingQueue<> queue(toy.tc.queue_capacity, toy.cfg.d_model);
  Adam<> opt(model.named(), {toy.tc.lr});

  auto r1 = ptc::training_step(toy.batch, model, momentum, queue, opt, toy.tc,
                               0);
  CHECK(std::isfinite(r1.loss));
  CHECK(r1.loss == 0.0);  // queue was empty
  CHECK(r1.queue_fill == 2);

  auto r2 = ptc::training_step(toy.batch, model, momentum, queue, opt, toy.tc,
                               1);
  CHECK(r2.loss > 0.0);
  CHECK(r2.grad_norm > 0.0);
  CHECK(r2.queue_fill == 4);
  for (const auto& p : model.named())
    CHECK(p.tensor.has_grad());
}

TEST_CASE("training_step keeps gradients away from momentum and queue",
          "[train]") {
  Toy toy;
  auto model = PtModel<>::init(toy.cfg, toy.tc.pseudo_len, 6);
  model.set_requires_grad(true);
  auto momentum = MomentumState<>::from(model, false);
  EmbeddingQueue<> queue(toy.tc.queue_capacity, toy.cfg.d_model);
  Adam<> opt(model.named(), {toy.tc.lr});
  for (std::uint64_t s = 0; s < 10; ++s)
    ptc::training_step(toy.batch, model, momentum, queue, opt, toy.tc, s);
  for (const auto& p : momentum.named()) {
    CHECK_FALSE(p.tensor.has_grad());
    CHECK_FALSE(p.tensor.requires_grad());
  }
}

TEST_CASE("training_step with lambda=1 freezes the momentum encoder",
          "[train]") {
  Toy toy;
  toy.tc.momentum = 1.0;
  toy.tc.lr = 0.01;
  toy.cfg.dropout = 0.0;  // keep the loss sequence noise-free
  auto model = PtModel<>::init(toy.cfg, toy.tc.pseudo_len, 7);
  model.set_requires_grad(true);
  auto momentum = MomentumState<>::from(model, false);
  auto frozen = momentum.encoder.clone_detached();
  EmbeddingQueue<> queue(toy.tc.queue_capacity, toy.cfg.d_model);
  Adam<> opt(model.named(), {toy.tc.lr});

  std::vector<double> losses;
  for (std::uint64_t s = 0; s < 8; ++s)
    losses.push_back(
        ptc::training_step(toy.batch, model, momentum, queue, opt, toy.tc, s)
            .loss);
  // the queue saturates at step 3 (capacity 8, two inserts per step); only
  // after that are losses comparable across steps
  CHECK(losses[7] < losses[4]);

  auto now = momentum.encoder.named();
  auto was = frozen.named();
  for (std::size_t i = 0; i < now.size(); ++i)
    for (std::size_t j = 0; j < now[i].tensor.numel(); ++j)
      REQUIRE(now[i].tensor.data()[j] == was[i].tensor.data()[j]);
}

TEST_CASE("training is deterministic given the seed", "[train]") {
  auto run = [](std::uint64_t seed) {
    Toy toy;
    toy.tc.seed = seed;
    auto model = PtModel<>::init(toy.cfg, toy.tc.pseudo_len, seed);
    model.set_requires_grad(true);
    auto momentum = MomentumState<>::from(model, false);
    EmbeddingQueue<> queue(toy.tc.queue_capacity, toy.cfg.d_model);
    Adam<> opt(model.named(), {toy.tc.lr});
    std::vector<double> losses;
    for (std::uint64_t s = 0; s < 5; ++s)
      losses.push_back(ptc::training_step(toy.batch, model, momentum, queue,
                                          opt, toy.tc, s)
                           .loss);
    return losses;
  };
  auto a = run(42), b = run(42), c = run(43);
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("dropout-only mode trains without queue or momentum", "[train]") {
  Toy toy;
  toy.tc.mode = TrainMode::dropout_only;
  auto model = PtModel<>::init(toy.cfg, toy.tc.pseudo_len, 8);
  model.set_requires_grad(true);
  auto momentum = MomentumState<>::from(model, false);
  auto frozen = momentum.encoder.clone_detached();
  EmbeddingQueue<> queue(toy.tc.queue_capacity, toy.cfg.d_model);
  Adam<> opt(model.named(), {toy.tc.lr});

  auto r = ptc::training_step(toy.batch, model, momentum, queue, opt, toy.tc,
                              0);
  CHECK(std::isfinite(r.loss));
  CHECK(r.loss > 0.0);
  CHECK(r.queue_fill == 0);
  CHECK(queue.empty());
  // momentum state untouched
  auto now = momentum.encoder.named();
  auto was = frozen.named();
  for (std::size_t i = 0; i < now.size(); ++i)
    CHECK(now[i].tensor.data()[0] == was[i].tensor.data()[0]);
  // pseudo mapping not in the graph
  CHECK_FALSE(model.pseudo.table.has_grad());
  CHECK_FALSE(model.shared.wq.has_grad());
}

TEST_CASE("moco-no-pseudo mode bypasses the pseudo mapping", "[train]") {
  Toy toy;
  toy.tc.mode = TrainMode::moco_no_pseudo;
  auto model = PtModel<>::init(toy.cfg, toy.tc.pseudo_len, 9);
  model.set_requires_grad(true);
  auto momentum = MomentumState<>::from(model, false);
  EmbeddingQueue<> queue(toy.tc.queue_capacity, toy.cfg.d_model);
  Adam<> opt(model.named(), {toy.tc.lr});

  auto r0 = ptc::training_step(toy.batch, model, momentum, queue, opt, toy.tc,
                               0);
  auto r1 = ptc::training_step(toy.batch, model, momentum, queue, opt, toy.tc,
                               1);
  CHECK(r0.queue_fill == 2);
  CHECK(r1.loss > 0.0);
  CHECK_FALSE(model.pseudo.table.has_grad());
  CHECK_FALSE(model.shared.wq.has_grad());
  CHECK(model.encoder.tok_embed.has_grad());
}

TEST_CASE("mirrored shared parameters decay like the encoder", "[train]") {
  Toy toy;
  toy.tc.mirror_shared = true;
  toy.tc.momentum = 0.5;
  auto model = PtModel<>::init(toy.cfg, toy.tc.pseudo_len, 10);
  model.set_requires_grad(true);
  auto momentum = MomentumState<>::from(model, true);
  REQUIRE(momentum.mirrors_shared());
  EmbeddingQueue<> queue(toy.tc.queue_capacity, toy.cfg.d_model);
  Adam<> opt(model.named(), {toy.tc.lr});
  auto before = momentum.pseudo->table.clone();
  ptc::training_step(toy.batch, model, momentum, queue, opt, toy.tc, 0);
  ptc::training_step(toy.batch, model, momentum, queue, opt, toy.tc, 1);
  // live pseudo moved, so the mirror must have moved toward it
  double moved = 0.0;
  for (std::size_t i = 0; i < before.numel(); ++i)
    moved = std::max(moved, std::abs(momentum.pseudo->table.data()[i] -
                                     before.data()[i]));
  CHECK(moved > 0.0);
}

TEST_CASE("adam minimizes a quadratic", "[adam]") {
  auto x = Tensor<>::from({1}, {10.0});
  x.set_requires_grad(true);
  ptc::AdamConfig cfg;
  cfg.lr = 0.1;
  Adam<> opt({{"x", x}}, cfg);
  for (int i = 0; i < 500; ++i) {
    x.zero_grad();
    Tape<> tape;
    auto diff = ptc::sub(x, Tensor<>::from({1}, {3.0}), &tape);
    auto loss = ptc::mul(diff, diff, &tape);
    tape.backward(loss);
    opt.step();
  }
  CHECK(std::abs(x.data()[0] - 3.0) < 1e-3);
  CHECK(opt.steps_taken() == 500);
}

TEST_CASE("adam first step moves by about lr", "[adam]") {
  auto x = Tensor<>::from({1}, {5.0});
  x.set_requires_grad(true);
  x.accumulate_grad(std::vector<double>{2.0});
  ptc::AdamConfig cfg;
  cfg.lr = 0.01;
  Adam<> opt({{"x", x}}, cfg);
  opt.step();
  // bias-corrected first step: mhat = g, vhat = g*g, update = lr*g/(|g|+eps)
  CHECK(x.data()[0] == Catch::Approx(5.0 - 0.01).epsilon(1e-6));
  CHECK_THROWS_AS(Adam<>({}, cfg), ptc::ParameterError);
  ptc::AdamConfig bad;
  bad.lr = -1.0;
  CHECK_THROWS_AS(Adam<>({{"x", x}}, bad), ptc::ParameterError);
}

TEST_CASE("full pipeline gradient check with one queue negative",
          "[train][grad]") {
  auto vocab = Vocabulary::build({"p q r s t u v w"}, 1);
  EncoderConfig cfg;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.d_model = 8;
  cfg.d_ff = 16;
  cfg.max_len = 8;
  cfg.dropout = 0.1;
  cfg.vocab_size = vocab.size();
  auto model = PtModel<>::init(cfg, 4, 31);
  model.set_requires_grad(true);
  auto momentum = MomentumState<>::from(model, false);
  auto batch = ptc::tokenize_batch({"p q r s t", "u v w p q"}, vocab, 8);

  EmbeddingQueue<> queue(4, cfg.d_model);
  queue.push(unit(std::vector<double>{1, -1, 2, 0.5, -0.25, 1.5, -2, 0.75}));

  TrainConfig tc;
  // unit temperature keeps the loss at unit scale, where central differences
  // resolve 1e-5 relative error; smaller tau only rescales the same graph
  tc.tau = 1.0;
  tc.seed = 77;

  // the momentum branch is a constant of the step: compute it once so the
  // finite differences probe only the gradient path
  auto h_pos = ptc::embed_batch(batch, momentum.encoder, cfg, model.pseudo,
                                model.shared, true, EncodeMode::train(202));
  auto forward = [&](Tape<>* tape) {
    auto h = ptc::embed_batch(batch, model.encoder, cfg, model.pseudo,
                              model.shared, true, EncodeMode::train(101), tape);
    return ptc::info_nce_loss(h, h_pos, queue, tc.tau, tape);
  };
  auto report = ptc::grad_check<double>(forward, model.named(), 1e-5, 1e-5);
  INFO(report.worst_param << "[" << report.worst_index
                          << "] analytic=" << report.analytic_at_worst
                          << " numeric=" << report.numeric_at_worst
                          << " checked=" << report.entries_checked);
  CHECK(report.pass);
  CHECK(report.max_rel_error <= 1e-5);
}
