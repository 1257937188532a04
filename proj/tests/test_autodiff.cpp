// Copyright 2026 The stsp Authors.
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

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "oracles/finite_difference.hpp"
#include "stsp/autodiff.hpp"
#include "stsp/error.hpp"
#include "stsp/gradcheck.hpp"

using stsp::Shape;
using stsp::Tensor;
namespace ad = stsp::ad;
using G = ad::Graph<double>;
using V = ad::Var<double>;

namespace {

Tensor<double> tensor(Shape shape, std::vector<double> data) {
  return Tensor<double>(std::move(shape), std::move(data));
}

// One op under test: input shapes, a domain map applied to uniform(-1, 1)
// draws, and the graph expression.
struct OpCase {
  const char* name;
  std::vector<Shape> inputs;
  std::function<double(double)> domain;
  std::function<V(G&, std::vector<V>&)> build;
};

double identity(double x) { return x; }
double positive(double x) { return 0.2 + 1.4 * (x + 1.0); }
double away_from_zero(double x) { return std::copysign(0.1 + std::abs(x), x); }

std::vector<OpCase> op_cases() {
  static const std::vector<std::uint32_t> rows{2, 0, 2, 1};
  static const std::vector<std::uint8_t> mask{0, 1, 0, 0, 1, 1, 0, 0, 0, 1, 0, 1};
  return {
      {"matmul", {{3, 4}, {4, 2}}, identity, [](G&, auto& x) { return ad::matmul(x[0], x[1]); }},
      {"matmul_batched", {{2, 3, 4}, {2, 4, 3}}, identity,
       [](G&, auto& x) { return ad::matmul(x[0], x[1]); }},
      {"add", {{3, 4}, {1, 4}}, identity, [](G&, auto& x) { return ad::add(x[0], x[1]); }},
      {"sub", {{2, 3, 4}, {2, 3, 1}}, identity, [](G&, auto& x) { return ad::sub(x[0], x[1]); }},
      {"mul", {{2, 3, 4}, {2, 1, 4}}, identity, [](G&, auto& x) { return ad::mul(x[0], x[1]); }},
      {"div", {{3, 4}, {3, 1}}, positive, [](G&, auto& x) { return ad::div(x[0], x[1]); }},
      {"exp", {{3, 4}}, identity, [](G&, auto& x) { return ad::exp(x[0]); }},
      {"log", {{3, 4}}, positive, [](G&, auto& x) { return ad::log(x[0]); }},
      {"tanh", {{3, 4}}, identity, [](G&, auto& x) { return ad::tanh(x[0]); }},
      {"relu", {{3, 4}}, away_from_zero, [](G&, auto& x) { return ad::relu(x[0]); }},
      {"scale", {{3, 4}}, identity, [](G&, auto& x) { return ad::scale(x[0], -2.5); }},
      {"softmax_rows", {{3, 4}}, identity, [](G&, auto& x) { return ad::softmax_rows(x[0]); }},
      {"log_softmax_rows", {{2, 3, 4}}, identity,
       [](G&, auto& x) { return ad::log_softmax_rows(x[0]); }},
      {"logsumexp_rows", {{2, 3, 4}}, identity,
       [](G&, auto& x) { return ad::logsumexp_rows(x[0]); }},
      {"transpose", {{2, 3, 4}}, identity, [](G&, auto& x) { return ad::transpose(x[0]); }},
      {"reshape", {{3, 4}}, identity, [](G&, auto& x) { return ad::reshape(x[0], {2, 6}); }},
      {"gather_rows", {{3, 4}}, identity,
       [](G&, auto& x) { return ad::gather_rows(x[0], std::span(rows)); }},
      {"masked_fill", {{3, 4}}, identity,
       [](G&, auto& x) { return ad::masked_fill(x[0], std::span(mask), -3.0); }},
      {"reduce_sum", {{3, 4}}, identity, [](G&, auto& x) { return ad::reduce_sum(x[0]); }},
      {"reduce_mean", {{3, 4}}, identity, [](G&, auto& x) { return ad::reduce_mean(x[0]); }},
      {"slice_cols", {{3, 5}}, identity, [](G&, auto& x) { return ad::slice_cols(x[0], 1, 3); }},
      {"concat_cols", {{3, 2}, {3, 3}}, identity,
       [](G&, auto& x) {
         std::vector<V> parts{x[0], x[1]};
         return ad::concat_cols<double>(parts);
       }},
      {"clamp_min", {{3, 4}}, away_from_zero,
       [](G&, auto& x) { return ad::clamp_min(x[0], 0.0); }},
      {"batch_normalize_train", {{5, 3}, {1, 3}, {1, 3}}, identity,
       [](G&, auto& x) {
         static Tensor<double> mean({1, 3}, 0.0);
         static Tensor<double> var({1, 3}, 1.0);
         ad::BatchNormArgs<double> args{x[1], x[2], &mean, &var, true};
         return ad::batch_normalize(x[0], args);
       }},
      {"batch_normalize_eval", {{5, 3}, {1, 3}, {1, 3}}, identity,
       [](G&, auto& x) {
         static Tensor<double> mean({1, 3}, std::vector<double>{0.1, -0.2, 0.3});
         static Tensor<double> var({1, 3}, std::vector<double>{0.5, 1.5, 2.0});
         ad::BatchNormArgs<double> args{x[1], x[2], &mean, &var, false};
         return ad::batch_normalize(x[0], args);
       }},
  };
}

}  // namespace

// Every op, 100 random inputs: loss = sum(op(x) * R) for a random R, analytic
// gradient against a fourth-order central difference.
TEST(AutodiffGradients, EveryOpMatchesFiniteDifferences) {
  std::mt19937_64 rng(20260214);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (const OpCase& op : op_cases()) {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<Tensor<double>> inputs;
      for (const Shape& s : op.inputs) {
        Tensor<double> t(s);
        for (double& v : t.data) v = op.domain(unif(rng));
        inputs.push_back(std::move(t));
      }
      Tensor<double> weights;
      auto loss_of = [&](G& g, std::vector<V>& vars) {
        V out = op.build(g, vars);
        if (weights.size() != out.value().size()) {
          weights = Tensor<double>(out.shape());
          for (double& w : weights.data) w = unif(rng);
        }
        return ad::reduce_sum(ad::mul(out, g.constant(weights)));
      };

      G g;
      std::vector<V> vars;
      for (const auto& t : inputs) vars.push_back(g.variable(t));
      V loss = loss_of(g, vars);
      g.backward(loss);
      std::vector<double> analytic;
      std::vector<double> flat;
      for (std::size_t k = 0; k < vars.size(); ++k) {
        const Tensor<double> gk = g.grad(vars[k]);
        analytic.insert(analytic.end(), gk.data.begin(), gk.data.end());
        flat.insert(flat.end(), inputs[k].data.begin(), inputs[k].data.end());
      }

      auto f = [&](const std::vector<double>& x) {
        G ge(false);
        std::vector<V> vs;
        std::size_t off = 0;
        for (const auto& t : inputs) {
          Tensor<double> c(t.shape);
          std::copy(x.begin() + off, x.begin() + off + c.size(), c.data.begin());
          off += c.size();
          vs.push_back(ge.constant(std::move(c)));
        }
        return loss_of(ge, vs).value().item();
      };
      const std::vector<double> numeric = oracle::gradient(f, flat, 1e-3);
      for (std::size_t i = 0; i < numeric.size(); ++i) {
        worst = std::max(worst, oracle::rel_error(analytic[i], numeric[i]));
      }
    }
    EXPECT_LE(worst, 1e-6) << op.name;
  }
}

TEST(Autodiff, MatmulIdentity) {
  G g;
  V i = g.constant(tensor({2, 2}, {1, 0, 0, 1}));
  V a = g.constant(tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(ad::matmul(i, a).value().data, a.value().data);
}

TEST(Autodiff, SoftmaxOfZerosIsUniform) {
  G g;
  V p = ad::softmax_rows(g.constant(Tensor<double>({1, 3}, 0.0)));
  for (double v : p.value().data) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Autodiff, TanhOfZeroIsZero) {
  G g;
  V t = ad::tanh(g.constant(Tensor<double>({3, 3}, 0.0)));
  for (double v : t.value().data) EXPECT_EQ(v, 0.0);
}

TEST(Autodiff, GradOfSumIsOnes) {
  stsp::ParamStore<double> store;
  store.add("w", tensor({2, 2}, {0.3, -1, 2, 5}));
  G g;
  g.backward(ad::reduce_sum(g.param(store, "w")));
  for (double v : store.at("w").grad.data) EXPECT_EQ(v, 1.0);
}

TEST(Autodiff, GradOfSumOfSquaresIsTwiceW) {
  stsp::ParamStore<double> store;
  store.add("w", tensor({2, 2}, {0.3, -1, 2, 5}));
  G g;
  V w = g.param(store, "w");
  g.backward(ad::reduce_sum(ad::mul(w, w)));
  const auto& e = store.at("w");
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(e.grad[i], 2.0 * e.value[i]);
}

TEST(Autodiff, FanOutSumsContributions) {
  G g;
  V x = g.variable(tensor({1}, {1.7}));
  g.backward(ad::reduce_sum(ad::add(x, x)));
  EXPECT_EQ(g.grad(x).item(), 2.0);
}

TEST(Autodiff, RepeatedBackwardAccumulatesIntoStore) {
  stsp::ParamStore<double> store;
  store.add("w", tensor({3}, {1, 2, 3}));
  for (int k = 0; k < 3; ++k) {
    G g;
    g.backward(ad::reduce_sum(ad::scale(g.param(store, "w"), 2.0)));
  }
  for (double v : store.at("w").grad.data) EXPECT_EQ(v, 6.0);
  store.zero_grad();
  for (double v : store.at("w").grad.data) EXPECT_EQ(v, 0.0);
}

TEST(Autodiff, NonScalarLossIsRejected) {
  G g;
  V x = g.variable(Tensor<double>({2, 2}, 1.0));
  EXPECT_THROW(g.backward(x), stsp::ConfigError);
}

TEST(Autodiff, LogOfNonPositiveIsDomainError) {
  G g;
  try {
    ad::log(g.constant(tensor({2}, {1.0, 0.0})));
    FAIL() << "expected NumericalDomainError";
  } catch (const stsp::NumericalDomainError& e) {
    EXPECT_NE(std::string(e.what()).find("log"), std::string::npos);
  }
}

TEST(Autodiff, DivisionByZeroIsDomainError) {
  G g;
  EXPECT_THROW(ad::div(g.constant(tensor({2}, {1, 2})), g.constant(tensor({2}, {1, 0}))),
               stsp::NumericalDomainError);
}

TEST(Autodiff, ShapeMismatchIsConfigError) {
  G g;
  V a = g.constant(Tensor<double>({2, 3}, 1.0));
  V b = g.constant(Tensor<double>({3, 2}, 1.0));
  EXPECT_THROW(ad::add(a, b), stsp::ConfigError);
  EXPECT_THROW(ad::matmul(a, a), stsp::ConfigError);
  EXPECT_THROW(ad::gather_rows(a, std::vector<std::uint32_t>{5}), stsp::ConfigError);
}

TEST(Autodiff, MaskedFillUsesLargeNegativeConstant) {
  G g;
  std::vector<std::uint8_t> mask{0, 1};
  V out = ad::masked_fill(g.constant(tensor({1, 2}, {0.5, 0.5})), std::span(mask));
  EXPECT_EQ(out.value()[0], 0.5);
  EXPECT_EQ(out.value()[1], 0.5 + ad::kMaskFill);
  V p = ad::softmax_rows(out);
  EXPECT_EQ(p.value()[1], 0.0);
  EXPECT_FALSE(std::isnan(p.value()[0]));
}

TEST(Autodiff, ClampMinCountsFlooredEntries) {
  G g;
  ad::FloorCounter counter;
  V x = g.variable(tensor({4}, {1e-40, 0.5, -1.0, 2.0}));
  V y = ad::clamp_min(x, 1e-30, &counter);
  EXPECT_EQ(counter.calls_floored, 1u);
  EXPECT_EQ(counter.entries_floored, 2u);
  EXPECT_EQ(y.value()[0], 1e-30);
  g.backward(ad::reduce_sum(y));
  const Tensor<double> gx = g.grad(x);
  EXPECT_EQ(gx[0], 0.0);
  EXPECT_EQ(gx[1], 1.0);
}

TEST(Autodiff, BatchNormTrainingUpdatesRunningStatistics) {
  G g;
  Tensor<double> mean({1, 1}, 0.0);
  Tensor<double> var({1, 1}, 1.0);
  V x = g.constant(tensor({4, 1}, {1, 2, 3, 4}));
  ad::BatchNormArgs<double> args{g.constant(Tensor<double>({1, 1}, 1.0)),
                                 g.constant(Tensor<double>({1, 1}, 0.0)), &mean, &var, true};
  V y = ad::batch_normalize(x, args);
  double s = 0;
  for (double v : y.value().data) s += v;
  EXPECT_NEAR(s, 0.0, 1e-12);
  EXPECT_NEAR(mean.item(), 0.1 * 2.5, 1e-15);
  // Running variance tracks the unbiased batch variance (5/3).
  EXPECT_NEAR(var.item(), 0.9 + 0.1 * (5.0 / 3.0), 1e-12);
}

TEST(Autodiff, EvaluationIsBitwiseDeterministic) {
  auto run = [] {
    G g;
    V a = g.constant(tensor({2, 3}, {0.1, 0.2, -0.3, 0.4, 0.5, -0.6}));
    V b = g.constant(tensor({3, 2}, {1.1, -0.2, 0.3, 0.7, -0.5, 0.6}));
    return ad::log_softmax_rows(ad::tanh(ad::matmul(a, b))).value().data;
  };
  EXPECT_EQ(run(), run());
}

TEST(GradCheck, QuadraticIsTight) {
  stsp::ParamStore<double> store;
  store.add("w", tensor({2, 3}, {0.5, -1.5, 2.0, 0.25, 3.0, -0.75}));
  ad::LossBuilder<double> fn = [&](G& g) {
    V w = g.param(store, "w");
    return ad::reduce_sum(ad::mul(ad::scale(w, 1.5), w));
  };
  auto report = ad::finite_difference_check(fn, store, 1e-6, 1e-8);
  EXPECT_TRUE(report.passed) << report.max_rel_error;
  EXPECT_LE(report.max_rel_error, 1e-8);
  for (double v : store.at("w").grad.data) EXPECT_EQ(v, 0.0);
}

TEST(GradCheck, ConstantFunctionHasZeroGradients) {
  stsp::ParamStore<double> store;
  store.add("w", tensor({2}, {1.0, 2.0}));
  ad::LossBuilder<double> fn = [&](G& g) {
    g.param(store, "w");
    return ad::reduce_sum(g.constant(tensor({1}, {4.0})));
  };
  auto report = ad::finite_difference_check(fn, store, 1e-6, 1e-8);
  ASSERT_EQ(report.entries.size(), 1u);
  EXPECT_EQ(report.entries[0].analytic, 0.0);
  EXPECT_EQ(report.entries[0].numeric, 0.0);
  EXPECT_TRUE(report.passed);
}

TEST(Autodiff, TanhSaturatesWithoutNaN) {
  G g;
  V x = g.variable(tensor({4}, {-1e3, -40.0, 40.0, 1e3}));
  V y = ad::tanh(x);
  g.backward(ad::reduce_sum(y));
  for (double v : y.value().data) EXPECT_EQ(std::abs(v), 1.0);
  for (double v : g.grad(x).data) {
    EXPECT_FALSE(std::isnan(v));
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1e-30);
  }
}
