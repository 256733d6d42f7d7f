// Copyright 2026 The ConvForm Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <vector>

#include "convform/error.hpp"
#include "convform/kernels.hpp"
#include "convform/random.hpp"
#include "convform/tensor.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace convform;

namespace {

Tensor random_f32(Rng& rng, Shape shape, double stddev = 1.0) {
  std::vector<float> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = static_cast<float>(rng.normal(0.0, stddev));
  return Tensor::from_f32(std::move(shape), std::move(v));
}

std::vector<double> widen(const Tensor& t) {
  auto s = t.f32();
  return {s.begin(), s.end()};
}

void check_close(const Tensor& got, const std::vector<double>& want,
                 double tol) {
  auto g = got.f32();
  REQUIRE(g.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    const double denom = std::abs(want[i]) + 1e-8;
    CHECK(std::abs(g[i] - want[i]) / denom <= tol);
  }
}

}  // namespace

TEST_CASE("tensor shape and storage basics") {
  auto t = Tensor::from_f32({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.rank() == 2);
  CHECK(t.numel() == 6);
  CHECK(t.dim(1) == 3);
  CHECK(t.f32()[4] == 5.0f);

  auto r = t.reshaped({3, 2});
  CHECK(r.shape() == Shape{3, 2});
  CHECK(r.f32().data() == t.f32().data());

  CHECK_THROWS_AS(t.reshaped({4, 2}), DimError);
  CHECK_THROWS_AS(t.dim(2), DimError);
  CHECK_THROWS_AS(t.i8(), DimError);
  CHECK_THROWS_AS(Tensor::from_f32({2, 2}, {1.0f}), DimError);
  CHECK_THROWS_AS(Tensor::from_f32({0, 2}, {}), DimError);
  CHECK_THROWS_AS(Tensor().f32(), DimError);

  auto z = Tensor::zeros(DType::I32, {4});
  CHECK(z.i32()[3] == 0);
  auto f = Tensor::full_f32({2, 2}, 0.5f);
  CHECK(f.f32()[3] == 0.5f);
}

TEST_CASE("conv2d matches the reference on random geometries") {
  Rng rng(101);
  struct Geom {
    std::int64_t B, Cin, H, W, Cout, K, stride;
  };
  const Geom geoms[] = {
      {1, 3, 8, 8, 16, 4, 4}, {2, 4, 6, 6, 5, 3, 3}, {1, 2, 5, 7, 3, 1, 2},
      {2, 8, 1, 9, 8, 1, 1},  {1, 1, 4, 4, 1, 2, 2},
  };
  for (const auto& g : geoms) {
    auto x = random_f32(rng, {g.B, g.Cin, g.H, g.W});
    auto w = random_f32(rng, {g.Cout, g.Cin, g.K, g.K});
    auto b = random_f32(rng, {g.Cout});
    auto y = conv2d(x, w, &b, g.stride);
    auto want = oracles::conv2d(widen(x), widen(w), widen(b), g.B, g.Cin, g.H,
                                g.W, g.Cout, g.K, g.K, g.stride);
    const std::int64_t Ho = (g.H - g.K) / g.stride + 1;
    const std::int64_t Wo = (g.W - g.K) / g.stride + 1;
    CHECK(y.shape() == Shape{g.B, g.Cout, Ho, Wo});
    check_close(y, want, 1e-5);
  }
}

TEST_CASE("conv2d rejects bad geometry") {
  auto x = Tensor::zeros(DType::F32, {1, 2, 5, 5});
  auto w = Tensor::zeros(DType::F32, {3, 2, 2, 2});
  CHECK_THROWS_AS(conv2d(x, w, nullptr, 2), GeometryError);
  CHECK_THROWS_AS(conv2d(x, w, nullptr, 0), GeometryError);
  auto big = Tensor::zeros(DType::F32, {3, 2, 6, 6});
  CHECK_THROWS_AS(conv2d(x, big, nullptr, 1), GeometryError);
  auto wrong_ch = Tensor::zeros(DType::F32, {3, 4, 1, 1});
  CHECK_THROWS_AS(conv2d(x, wrong_ch, nullptr, 1), DimError);
  auto bad_bias = Tensor::zeros(DType::F32, {4});
  CHECK_THROWS_AS(conv2d(x, w, &bad_bias, 1), DimError);
}

TEST_CASE("matmul_batched matches the reference") {
  Rng rng(202);
  auto a = random_f32(rng, {3, 2, 4, 5});
  auto b = random_f32(rng, {3, 2, 5, 6});
  auto c = matmul_batched(a, b);
  CHECK(c.shape() == Shape{3, 2, 4, 6});
  auto want = oracles::matmul(widen(a), widen(b), 6, 4, 5, 6);
  check_close(c, want, 1e-5);

  auto bad = random_f32(rng, {3, 2, 4, 6});
  CHECK_THROWS_AS(matmul_batched(a, bad), DimError);
}

TEST_CASE("linear over the last axis is bitwise identical to 1x1 conv over "
          "channels") {
  Rng rng(303);
  const std::int64_t B = 2, N = 7, I = 24, O = 13;
  auto x = random_f32(rng, {B, N, I});
  auto w = random_f32(rng, {O, I});
  auto b = random_f32(rng, {O});

  auto lin = linear_lastdim(x, w, &b);

  // (B, N, I) -> (B, I, 1, N), conv with (O, I, 1, 1), back to (B, N, O).
  auto xc = permute(x, {0, 2, 1}).reshaped({B, I, 1, N});
  auto wc = w.reshaped({O, I, 1, 1});
  auto yc = conv2d(xc, wc, &b, 1);
  auto back = permute(yc.reshaped({B, O, N}), {0, 2, 1});

  auto ls = lin.f32();
  auto cs = back.f32();
  REQUIRE(ls.size() == cs.size());
  for (std::size_t i = 0; i < ls.size(); ++i) {
    CHECK(std::memcmp(&ls[i], &cs[i], sizeof(float)) == 0);
  }
}

TEST_CASE("softmax rows sum to one and match the reference") {
  Rng rng(404);
  auto x = random_f32(rng, {4, 9}, 3.0);
  auto y = softmax_lastdim(x);
  auto want = oracles::softmax(widen(x), 4, 9);
  check_close(y, want, 1e-5);
  auto s = y.f32();
  for (int r = 0; r < 4; ++r) {
    float sum = 0;
    for (int i = 0; i < 9; ++i) sum += s[static_cast<std::size_t>(r * 9 + i)];
    CHECK(sum == doctest::Approx(1.0f).epsilon(1e-5));
  }

  // shift invariance is exact for exactly-representable shifts, thanks to
  // the max-subtracted form
  std::vector<float> grid(18), grid_sh(18);
  for (int i = 0; i < 18; ++i) {
    grid[static_cast<std::size_t>(i)] =
        static_cast<float>((i * 37 % 64) - 32) / 64.0f;
    grid_sh[static_cast<std::size_t>(i)] =
        grid[static_cast<std::size_t>(i)] + 5.0f;
  }
  auto yg = softmax_lastdim(Tensor::from_f32({2, 9}, std::move(grid)));
  auto ygs = softmax_lastdim(Tensor::from_f32({2, 9}, std::move(grid_sh)));
  for (std::size_t i = 0; i < 18; ++i) {
    CHECK(yg.f32()[i] == ygs.f32()[i]);
  }

  auto bad = Tensor::from_f32({2}, {1.0f, INFINITY});
  CHECK_THROWS_AS(softmax_lastdim(bad), NumericError);
}

TEST_CASE("gelu uses the exact erf form") {
  auto x = Tensor::from_f32({5}, {0.0f, 1.0f, -1.0f, 2.0f, -3.5f});
  auto y = gelu(x);
  auto s = y.f32();
  CHECK(s[0] == 0.0f);
  CHECK(s[1] == doctest::Approx(0.841344746068543).epsilon(1e-7));
  CHECK(s[2] == doctest::Approx(-0.158655253931457).epsilon(1e-7));
  CHECK(s[3] == doctest::Approx(1.954499736103642).epsilon(1e-7));
  CHECK(s[4] == doctest::Approx(oracles::gelu(-3.5)).epsilon(1e-7));
}

TEST_CASE("layernorm uses biased variance") {
  auto x = Tensor::from_f32({1, 4}, {1, 2, 3, 4});
  auto gamma = Tensor::full_f32({4}, 1.0f);
  auto beta = Tensor::zeros(DType::F32, {4});
  auto y = layernorm_lastdim(x, gamma, beta, 0.0f);
  // mean 2.5, biased variance 1.25
  auto s = y.f32();
  CHECK(s[0] == doctest::Approx(-1.3416407865).epsilon(1e-6));
  CHECK(s[3] == doctest::Approx(1.3416407865).epsilon(1e-6));

  Rng rng(505);
  auto xr = random_f32(rng, {3, 5, 16});
  auto g2 = random_f32(rng, {16});
  auto b2 = random_f32(rng, {16});
  auto yr = layernorm_lastdim(xr, g2, b2, 1e-6f);
  auto want =
      oracles::layernorm(widen(xr), widen(g2), widen(b2), 15, 16, 1e-6);
  check_close(yr, want, 1e-4);
}

TEST_CASE("permute moves data and inverts cleanly") {
  auto x = Tensor::from_f32({2, 3}, {1, 2, 3, 4, 5, 6});
  auto t = permute(x, {1, 0});
  CHECK(t.shape() == Shape{3, 2});
  CHECK(t.f32()[0] == 1.0f);
  CHECK(t.f32()[1] == 4.0f);
  CHECK(t.f32()[2] == 2.0f);

  Rng rng(606);
  auto r = random_f32(rng, {2, 3, 4, 5});
  auto fwd = permute(r, {0, 2, 1, 3});
  auto inv = permute(fwd, {0, 2, 1, 3});
  auto a = r.f32();
  auto b = inv.f32();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

  CHECK_THROWS_AS(permute(x, {0, 0}), DimError);
  CHECK_THROWS_AS(permute(x, {0}), DimError);

  auto q = Tensor::from_i8({2, 2}, {1, 2, 3, 4});
  auto qt = permute(q, {1, 0});
  CHECK(qt.i8()[1] == 3);
}

TEST_CASE("elementwise binaries broadcast rank-4 singleton dims") {
  Rng rng(707);
  auto a = random_f32(rng, {2, 3, 1, 4});
  auto b = random_f32(rng, {2, 3, 1, 4});
  auto s = add(a, b);
  CHECK(s.f32()[5] == a.f32()[5] + b.f32()[5]);
  auto d = sub(a, b);
  CHECK(d.f32()[7] == a.f32()[7] - b.f32()[7]);

  auto vec = random_f32(rng, {1, 3, 1, 1});
  auto m = mul(a, vec);
  CHECK(m.f32()[0] == a.f32()[0] * vec.f32()[0]);
  // element (0, 2, 0, 3) uses channel 2
  CHECK(m.f32()[11] == a.f32()[11] * vec.f32()[2]);
  auto m2 = sub(vec, a);
  CHECK(m2.f32()[11] == vec.f32()[2] - a.f32()[11]);

  // per-position stats tensor against the full stream, as in the
  // layernorm decomposition
  auto mu = random_f32(rng, {2, 1, 1, 4});
  auto ds = sub(a, mu);
  CHECK(ds.shape() == Shape{2, 3, 1, 4});
  // element (1, 2, 0, 1) pairs with mu (1, 0, 0, 1)
  CHECK(ds.f32()[21] == a.f32()[21] - mu.f32()[5]);

  auto badvec = random_f32(rng, {1, 4, 1, 1});
  CHECK_THROWS_AS(add(a, badvec), DimError);
  auto bad = random_f32(rng, {2, 3, 4});
  CHECK_THROWS_AS(add(a, bad), DimError);
}

TEST_CASE("scalar unaries") {
  auto x = Tensor::from_f32({3}, {-2.0f, 0.5f, 3.0f});
  CHECK(mul_scalar(x, 2.0f).f32()[0] == -4.0f);
  CHECK(square(x).f32()[2] == 9.0f);
  auto v = Tensor::from_f32({2}, {4.0f, 0.0f});
  auto r = rsqrt_eps(v, 0.0f);
  CHECK(r.f32()[0] == 0.5f);
  CHECK(std::isinf(r.f32()[1]));
  auto rr = rsqrt_eps(v, 1e-6f);
  CHECK(std::isfinite(rr.f32()[1]));
  auto neg = Tensor::from_f32({1}, {-1.0f});
  CHECK_THROWS_AS(rsqrt_eps(neg, 1e-6f), NumericError);
}

TEST_CASE("kernel counters record exact MAC counts") {
  Rng rng(808);
  auto x = random_f32(rng, {1, 3, 8, 8});
  auto w = random_f32(rng, {16, 3, 4, 4});
  KernelCounters c;
  {
    CounterScope scope(&c);
    conv2d(x, w, nullptr, 4);
    auto a = random_f32(rng, {2, 3, 4});
    auto b = random_f32(rng, {2, 4, 5});
    matmul_batched(a, b);
  }
  // conv: 1 * 16 * 2 * 2 * 3 * 4 * 4 = 3072
  CHECK(c.conv_macs == 3072);
  CHECK(c.matmul_macs == 2 * 3 * 4 * 5);
  conv2d(x, w, nullptr, 4);
  CHECK(c.conv_macs == 3072);
}

TEST_CASE("rng is deterministic and box-muller moments are sane") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
  Rng c(7);
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double v = c.normal(0.0, 0.02);
    sum += v;
    sq += v * v;
  }
  CHECK(std::abs(sum / n) < 1e-3);
  CHECK(std::sqrt(sq / n) == doctest::Approx(0.02).epsilon(0.05));
}
