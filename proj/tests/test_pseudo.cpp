#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "ptc/grad_check.hpp"
#include "ptc/pseudo.hpp"

using ptc::BoolMask;
using ptc::PseudoTokenTable;
using ptc::SharedAttentionParams;
using ptc::Tape;
using ptc::Tensor;

namespace {

Tensor<> randt(ptc::Shape shape, std::uint64_t seed) {
  return Tensor<>::randn(std::move(shape), seed);
}

std::vector<double> to_vec(const Tensor<>& t) {
  return {t.data().begin(), t.data().end()};
}

BoolMask prefix_mask(std::size_t rows, std::size_t cols, std::size_t real) {
  BoolMask m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = real; c < cols; ++c) m.at(r, c) = 0;
  return m;
}

}  // namespace

TEST_CASE("attention with one key copies the value row", "[pseudo]") {
  auto q = randt({3, 4}, 1);
  auto k = randt({1, 4}, 2);
  auto v = randt({1, 4}, 3);
  auto out = ptc::attention(q, k, v);
  REQUIRE(out.shape() == ptc::Shape{3, 4});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(out.data()[i * 4 + j] == Catch::Approx(v.data()[j]).margin(1e-15));
}

TEST_CASE("attention with identical keys averages values", "[pseudo]") {
  auto row = randt({1, 4}, 5);
  std::vector<double> kd;
  for (int r = 0; r < 3; ++r)
    kd.insert(kd.end(), row.data().begin(), row.data().end());
  auto k = Tensor<>::from({3, 4}, kd);
  auto v = randt({3, 4}, 6);
  auto q = randt({2, 4}, 7);
  auto out = ptc::attention(q, k, v);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double mean = (v.data()[j] + v.data()[4 + j] + v.data()[8 + j]) / 3.0;
      CHECK(out.data()[i * 4 + j] == Catch::Approx(mean).margin(1e-12));
    }
}

TEST_CASE("attention matches naive oracle", "[pseudo]") {
  auto q = randt({3, 4}, 11);
  auto k = randt({5, 4}, 12);
  auto v = randt({5, 4}, 13);
  auto out = ptc::attention(q, k, v);
  auto want = oracle::attention(to_vec(q), to_vec(k), to_vec(v), 3, 5, 4);
  for (std::size_t i = 0; i < want.size(); ++i)
    CHECK(out.data()[i] == Catch::Approx(want[i]).margin(1e-12));

  // masked keys get exactly zero weight
  auto mask = prefix_mask(1, 5, 3);
  auto masked = ptc::attention(q, k, v, &mask);
  auto want_masked = oracle::attention(to_vec(q), to_vec(k), to_vec(v), 3, 5, 4,
                                       {1, 1, 1, 0, 0});
  for (std::size_t i = 0; i < want_masked.size(); ++i)
    CHECK(masked.data()[i] == Catch::Approx(want_masked[i]).margin(1e-12));

  auto none = prefix_mask(1, 5, 0);
  CHECK_THROWS_AS(ptc::attention(q, k, v, &none), ptc::DegenerateInputError);
}

TEST_CASE("attention shape errors", "[pseudo]") {
  CHECK_THROWS_AS(ptc::attention(randt({3, 4}, 1), randt({5, 6}, 2),
                                 randt({5, 6}, 3)),
                  ptc::ShapeError);
  CHECK_THROWS_AS(ptc::attention(randt({3, 4}, 1), randt({5, 4}, 2),
                                 randt({6, 4}, 3)),
                  ptc::ShapeError);
}

TEST_CASE("pseudo_project output length is fixed", "[pseudo]") {
  const std::size_t d = 8, m = 4;
  auto pseudo = PseudoTokenTable<>::init(m, d, 1);
  auto w = SharedAttentionParams<>::init(d, 2);
  for (std::size_t t : {std::size_t{1}, std::size_t{3}, std::size_t{30}}) {
    auto y = randt({t, d}, 100 + t);
    auto mask = prefix_mask(1, t, t);
    auto proj = ptc::pseudo_project(y, pseudo, w, &mask);
    REQUIRE(proj.z.shape() == ptc::Shape{m, d});
  }
}

TEST_CASE("pseudo_project ignores masked pad rows", "[pseudo]") {
  const std::size_t d = 8, m = 4, t = 5, pad = 3;
  auto pseudo = PseudoTokenTable<>::init(m, d, 3);
  auto w = SharedAttentionParams<>::init(d, 4);
  auto y = randt({t, d}, 9);

  std::vector<double> padded_rows = to_vec(y);
  auto junk = randt({pad, d}, 10);
  padded_rows.insert(padded_rows.end(), junk.data().begin(),
                     junk.data().end());
  auto y_padded = Tensor<>::from({t + pad, d}, padded_rows);

  auto mask_tight = prefix_mask(1, t, t);
  auto mask_padded = prefix_mask(1, t + pad, t);
  auto a = ptc::pseudo_project(y, pseudo, w, &mask_tight);
  auto b = ptc::pseudo_project(y_padded, pseudo, w, &mask_padded);
  for (std::size_t i = 0; i < a.z.numel(); ++i)
    CHECK(a.z.data()[i] == Catch::Approx(b.z.data()[i]).margin(1e-9));
}

TEST_CASE("pseudo_project with a single real token", "[pseudo]") {
  const std::size_t d = 6, m = 5;
  auto pseudo = PseudoTokenTable<>::init(m, d, 5);
  auto w = SharedAttentionParams<>::init(d, 6);
  auto y = randt({1, d}, 7);
  auto mask = prefix_mask(1, 1, 1);
  auto proj = ptc::pseudo_project(y, pseudo, w, &mask);
  // with one key every pseudo row is exactly y * W^V
  auto want = ptc::matmul(y, w.wv);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t j = 0; j < d; ++j)
      CHECK(proj.z.data()[r * d + j] ==
            Catch::Approx(want.data()[j]).margin(1e-12));
}

TEST_CASE("back_project insists on the same shared parameters", "[pseudo]") {
  const std::size_t d = 6, m = 3, t = 4;
  auto pseudo = PseudoTokenTable<>::init(m, d, 8);
  auto w = SharedAttentionParams<>::init(d, 9);
  auto other = SharedAttentionParams<>::init(d, 9);  // equal values, new set
  auto y = randt({t, d}, 10);
  auto mask = prefix_mask(1, t, t);
  auto proj = ptc::pseudo_project(y, pseudo, w, &mask);
  CHECK_THROWS_AS(ptc::back_project(y, proj, other), ptc::ContractError);
  CHECK_NOTHROW(ptc::back_project(y, proj, w));
}

TEST_CASE("back_project constant pseudo rows", "[pseudo]") {
  const std::size_t d = 5, t = 4, m = 3;
  auto w = SharedAttentionParams<>::init(d, 11);
  auto vrow = randt({1, d}, 12);
  std::vector<double> zd;
  for (std::size_t r = 0; r < m; ++r)
    zd.insert(zd.end(), vrow.data().begin(), vrow.data().end());
  ptc::PseudoProjection<> proj;
  proj.z = Tensor<>::from({m, d}, zd);
  proj.origin = &w;
  auto y = randt({t, d}, 13);
  auto h = ptc::back_project(y, proj, w);
  auto want = ptc::matmul(vrow, w.wv);
  REQUIRE(h.shape() == ptc::Shape{t, d});
  for (std::size_t r = 0; r < t; ++r)
    for (std::size_t j = 0; j < d; ++j)
      CHECK(h.data()[r * d + j] == Catch::Approx(want.data()[j]).margin(1e-12));
}

TEST_CASE("back_project m=1 singleton", "[pseudo]") {
  const std::size_t d = 4, t = 6;
  auto w = SharedAttentionParams<>::init(d, 14);
  ptc::PseudoProjection<> proj;
  proj.z = randt({1, d}, 15);
  proj.origin = &w;
  auto y = randt({t, d}, 16);
  auto h = ptc::back_project(y, proj, w);
  auto want = ptc::matmul(proj.z, w.wv);
  for (std::size_t r = 0; r < t; ++r)
    for (std::size_t j = 0; j < d; ++j)
      CHECK(h.data()[r * d + j] == Catch::Approx(want.data()[j]).margin(1e-12));
}

TEST_CASE("back_project matches composed oracle", "[pseudo]") {
  const std::size_t d = 4, t = 5, m = 3;
  auto w = SharedAttentionParams<>::init(d, 17);
  auto y = randt({t, d}, 18);
  ptc::PseudoProjection<> proj;
  proj.z = randt({m, d}, 19);
  proj.origin = &w;
  auto h = ptc::back_project(y, proj, w);
  auto q = oracle::matmul(to_vec(y), to_vec(w.wq), t, d, d);
  auto k = oracle::matmul(to_vec(proj.z), to_vec(w.wk), m, d, d);
  auto v = oracle::matmul(to_vec(proj.z), to_vec(w.wv), m, d, d);
  auto want = oracle::attention(q, k, v, t, m, d);
  for (std::size_t i = 0; i < want.size(); ++i)
    CHECK(h.data()[i] == Catch::Approx(want[i]).margin(1e-12));
}

TEST_CASE("sentence_embedding pooling contracts", "[pseudo]") {
  const std::size_t d = 5;
  auto single = randt({1, d}, 20);
  auto m1 = prefix_mask(1, 1, 1);
  auto h1 = ptc::sentence_embedding(single, m1);
  REQUIRE(h1.shape() == ptc::Shape{d});
  for (std::size_t j = 0; j < d; ++j)
    CHECK(h1.data()[j] == single.data()[j]);

  // identical rows -> that row
  auto row = randt({1, d}, 21);
  std::vector<double> hd;
  for (int r = 0; r < 4; ++r)
    hd.insert(hd.end(), row.data().begin(), row.data().end());
  auto h = Tensor<>::from({4, d}, hd);
  auto m4 = prefix_mask(1, 4, 4);
  auto pooled = ptc::sentence_embedding(h, m4);
  for (std::size_t j = 0; j < d; ++j)
    CHECK(pooled.data()[j] == Catch::Approx(row.data()[j]).margin(1e-15));

  // perturbing a masked row changes nothing
  auto base = randt({4, d}, 22);
  auto mask3 = prefix_mask(1, 4, 3);
  auto before = ptc::sentence_embedding(base, mask3);
  auto tweaked = base.clone();
  tweaked.data()[3 * d + 2] += 100.0;
  auto after = ptc::sentence_embedding(tweaked, mask3);
  for (std::size_t j = 0; j < d; ++j)
    CHECK(before.data()[j] == after.data()[j]);

  auto empty = prefix_mask(1, 4, 0);
  CHECK_THROWS_AS(ptc::sentence_embedding(base, empty),
                  ptc::DegenerateInputError);
}

TEST_CASE("shared parameter set feeds both directions", "[pseudo]") {
  const std::size_t d = 6, m = 3, t = 4;
  auto pseudo = PseudoTokenTable<>::init(m, d, 30);
  auto w = SharedAttentionParams<>::init(d, 31);
  auto y = randt({t, d}, 32);
  auto mask = prefix_mask(1, t, t);

  auto proj0 = ptc::pseudo_project(y, pseudo, w, &mask);
  auto h0 = ptc::back_project(y, proj0, w);

  // nudge one entry of the single shared W^V
  w.wv.data()[0] += 0.25;
  auto proj1 = ptc::pseudo_project(y, pseudo, w, &mask);
  auto h1 = ptc::back_project(y, proj1, w);

  double dz = 0.0, dh = 0.0;
  for (std::size_t i = 0; i < proj0.z.numel(); ++i)
    dz = std::max(dz, std::abs(proj0.z.data()[i] - proj1.z.data()[i]));
  for (std::size_t i = 0; i < h0.numel(); ++i)
    dh = std::max(dh, std::abs(h0.data()[i] - h1.data()[i]));
  CHECK(dz > 0.0);
  CHECK(dh > 0.0);
}

TEST_CASE("batched pseudo path agrees with per-sentence path", "[pseudo]") {
  const std::size_t d = 8, m = 4, b = 3, t = 6;
  auto pseudo = PseudoTokenTable<>::init(m, d, 40);
  auto w = SharedAttentionParams<>::init(d, 41);
  auto y = randt({b, t, d}, 42);
  BoolMask mask(b, t);
  const std::size_t lens[b] = {6, 4, 2};
  for (std::size_t r = 0; r < b; ++r)
    for (std::size_t c = lens[r]; c < t; ++c) mask.at(r, c) = 0;

  auto proj = ptc::pseudo_project(y, pseudo, w, &mask);
  auto h = ptc::back_project(y, proj, w);
  REQUIRE(proj.z.shape() == ptc::Shape{b, m, d});
  REQUIRE(h.shape() == ptc::Shape{b, t, d});

  for (std::size_t r = 0; r < b; ++r) {
    std::vector<double> rows(y.data().begin() + r * t * d,
                             y.data().begin() + (r + 1) * t * d);
    auto yr = Tensor<>::from({t, d}, rows);
    auto mr = prefix_mask(1, t, lens[r]);
    auto pr = ptc::pseudo_project(yr, pseudo, w, &mr);
    auto hr = ptc::back_project(yr, pr, w);
    for (std::size_t i = 0; i < m * d; ++i)
      CHECK(proj.z.data()[r * m * d + i] ==
            Catch::Approx(pr.z.data()[i]).margin(1e-12));
    for (std::size_t i = 0; i < t * d; ++i)
      CHECK(h.data()[r * t * d + i] ==
            Catch::Approx(hr.data()[i]).margin(1e-12));
  }
}

TEST_CASE("pseudo round trip gradient check", "[pseudo][grad]") {
  const std::size_t d = 8, m = 4, t = 5;
  auto pseudo = PseudoTokenTable<>::init(m, d, 50);
  auto w = SharedAttentionParams<>::init(d, 51);
  auto y = randt({t, d}, 52);
  pseudo.table.set_requires_grad(true);
  w.wq.set_requires_grad(true);
  w.wk.set_requires_grad(true);
  w.wv.set_requires_grad(true);
  y.set_requires_grad(true);
  auto mask = prefix_mask(1, t, 4);

  auto forward = [&](Tape<>* tape) {
    auto proj = ptc::pseudo_project(y, pseudo, w, &mask, tape);
    auto h = ptc::back_project(y, proj, w, tape);
    auto pooled = ptc::sentence_embedding(h, mask, tape);
    return ptc::mean_all(ptc::mul(pooled, pooled, tape), tape);
  };
  ptc::ParamList<> params = w.named();
  params.push_back({"pseudo.table", pseudo.table});
  params.push_back({"y", y});
  auto report = ptc::grad_check<double>(forward, params, 1e-5, 1e-5);
  INFO(report.worst_param << " analytic=" << report.analytic_at_worst
                          << " numeric=" << report.numeric_at_worst);
  CHECK(report.pass);
}
