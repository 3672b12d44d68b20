#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <thread>

#include "distilkit/tensor.hpp"
#include "testutil.hpp"

using namespace distilkit;
using testutil::random_tensor;

TEST(Tensor, ShapeInvariant) {
  Tensor t = Tensor::zeros({2, 3});
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_THROW(Tensor::from({2, 3}, {1.0, 2.0}), ShapeError);
  EXPECT_THROW(Tensor::zeros({2, 0}), ShapeError);
}

TEST(Matmul, IdentityCase) {
  Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor c = matmul(eye, a);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(c.data()[i], a.data()[i]);
}

TEST(Matmul, HandProduct) {
  Tensor a = Tensor::from({1, 2}, {1, 2});
  Tensor b = Tensor::from({2, 1}, {3, 4});
  EXPECT_DOUBLE_EQ(matmul(a, b).item(), 11.0);
}

TEST(Matmul, MatchesNaiveOracle) {
  std::mt19937_64 rng(7);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 5}, rng);
  Tensor c = matmul(a, b);
  auto ref = testutil::naive_matmul({a.data().begin(), a.data().end()},
                                    {b.data().begin(), b.data().end()}, 3, 4, 5);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(c.data()[i], ref[i], 1e-12);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 2});
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos);
    EXPECT_NE(msg.find("[4, 2]"), std::string::npos);
  }
}

TEST(Matmul, AssociativityAgainstOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor a = random_tensor({4, 3}, rng);
    Tensor b = random_tensor({3, 5}, rng);
    Tensor c = random_tensor({5, 2}, rng);
    Tensor left = matmul(matmul(a, b), c);
    Tensor right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.numel(); ++i)
      EXPECT_NEAR(left.data()[i], right.data()[i], 1e-9);
  }
}

TEST(Softmax, EqualLogitsUniform) {
  Tensor z = Tensor::from({3}, {0, 0, 0});
  Tensor p = softmax_with_temperature(z, 1.0);
  for (double v : p.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-12);
}

TEST(Softmax, HandTemperedValue) {
  // exp(0.5)=1.648721..., exp(1)=2.718281...; probabilities 0.37754 / 0.62246
  Tensor z = Tensor::from({2}, {1, 2});
  Tensor p = softmax_with_temperature(z, 2.0);
  EXPECT_NEAR(p.data()[0], 0.37754, 1e-4);
  EXPECT_NEAR(p.data()[1], 0.62246, 1e-4);
}

TEST(Softmax, HighTemperatureApproachesUniform) {
  Tensor z = Tensor::from({2}, {5, -5});
  Tensor p = softmax_with_temperature(z, 1000.0);
  EXPECT_NEAR(p.data()[0], 0.5, 0.01);
  EXPECT_NEAR(p.data()[1], 0.5, 0.01);
}

TEST(Softmax, NonPositiveTemperatureRejected) {
  Tensor z = Tensor::from({2}, {1, 2});
  EXPECT_THROW(softmax_with_temperature(z, 0.0), DomainError);
  EXPECT_THROW(softmax_with_temperature(z, -1.0), DomainError);
}

TEST(Softmax, RowsSumToOneProperty) {
  std::mt19937_64 rng(3);
  for (double t : {0.5, 1.0, 2.0, 10.0}) {
    Tensor z = random_tensor({16, 9}, rng, -50.0, 50.0);
    Tensor p = softmax_with_temperature(z, t);
    for (std::size_t r = 0; r < 16; ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < 9; ++j) s += p.data()[r * 9 + j];
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(Softmax, TemperaturePreservesArgmax) {
  std::mt19937_64 rng(5);
  for (double t : {0.5, 1.0, 2.0, 10.0, 100.0}) {
    Tensor z = random_tensor({8, 7}, rng, -50.0, 50.0);
    Tensor p = softmax_with_temperature(z, t);
    for (std::size_t r = 0; r < 8; ++r) {
      auto zrow = z.data().subspan(r * 7, 7);
      auto prow = p.data().subspan(r * 7, 7);
      EXPECT_EQ(argmax(zrow), argmax(prow));
    }
  }
}

TEST(Activations, KnownPoints) {
  Tensor x = Tensor::from({1}, {0.0});
  EXPECT_DOUBLE_EQ(sigmoid(x).item(), 0.5);
  Tensor neg = Tensor::from({1}, {-2.0});
  EXPECT_DOUBLE_EQ(leaky_relu(neg).item(), -0.02);
  Tensor one = Tensor::from({1}, {1.0});
  EXPECT_NEAR(gelu(one).item(), 0.8412, 1e-3);  // exact-erf form: 0.841345
}

TEST(Activations, UnknownKindRejected) {
  EXPECT_THROW(activation_from_string("relu6"), ConfigError);
  EXPECT_EQ(activation_from_string("gelu"), Activation::gelu);
}

TEST(Losses, PerfectPredictions) {
  Tensor pred = Tensor::from({1, 2}, {1.0 - 1e-12, 1e-12});
  Tensor target = Tensor::from({1, 2}, {1.0, 0.0});
  EXPECT_NEAR(loss(pred, target, LossKind::cross_entropy).item(), 0.0, 1e-9);

  std::mt19937_64 rng(9);
  Tensor x = random_tensor({4, 3}, rng);
  EXPECT_DOUBLE_EQ(loss(x, x, LossKind::mse).item(), 0.0);
}

TEST(Losses, BceHalf) {
  Tensor pred = Tensor::from({1}, {0.5});
  Tensor target = Tensor::from({1}, {1.0});
  EXPECT_NEAR(loss(pred, target, LossKind::binary_cross_entropy).item(), std::log(2.0), 1e-12);
}

TEST(Losses, DomainAndShapeErrors) {
  Tensor bad = Tensor::from({1}, {1.5});
  Tensor t = Tensor::from({1}, {1.0});
  EXPECT_THROW(loss(bad, t, LossKind::binary_cross_entropy), DomainError);
  Tensor a = Tensor::zeros({2, 2});
  Tensor b = Tensor::zeros({2, 3});
  EXPECT_THROW(loss(a, b, LossKind::mse), ShapeError);
}

TEST(Backward, SquareDerivative) {
  Tensor x = Tensor::from({1}, {3.0});
  x.set_requires_grad(true);
  Tape tape;
  Tensor y = mul(x, x);
  backward(y);
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Backward, NonScalarLossRejected) {
  Tensor x = Tensor::from({2}, {1.0, 2.0});
  x.set_requires_grad(true);
  Tape tape;
  Tensor y = mul(x, x);
  EXPECT_THROW(backward(y), ContractError);
}

TEST(Backward, TapeConsumedAfterUse) {
  Tensor x = Tensor::from({1}, {2.0});
  x.set_requires_grad(true);
  Tape tape;
  Tensor y = mul(x, x);
  backward(y);
  EXPECT_THROW(backward(y), ContractError);
}

TEST(Backward, NoActiveTape) {
  Tensor x = Tensor::from({1}, {2.0});
  x.set_requires_grad(true);
  Tensor y = mul(x, x);
  EXPECT_THROW(backward(y), ContractError);
}

TEST(Backward, GradsFreshPerCall) {
  Tensor x = Tensor::from({1}, {3.0});
  x.set_requires_grad(true);
  for (int i = 0; i < 2; ++i) {
    Tape tape;
    Tensor y = mul(x, x);
    backward(y);
    EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);  // not accumulated across calls
  }
}

TEST(Backward, SoftmaxCrossEntropyMatchesFiniteDifferences) {
  std::mt19937_64 rng(13);
  Tensor z = random_tensor({4, 5}, rng, -2.0, 2.0);
  Tensor target = Tensor::zeros({4, 5});
  for (std::size_t r = 0; r < 4; ++r) target.mutable_data()[r * 5 + (r + 1) % 5] = 1.0;
  double worst = testutil::max_grad_rel_error(
      z, [&]() { return loss(softmax_with_temperature(z, 2.0), target, LossKind::cross_entropy); });
  EXPECT_LT(worst, 1e-4);
}

TEST(Backward, PrimitiveGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(17);
  // Inputs bounded away from the leaky_relu kink.
  auto away_from_zero = [&](distilkit::Shape s) {
    Tensor t = random_tensor(std::move(s), rng, 0.2, 1.5);
    std::bernoulli_distribution flip(0.5);
    for (double& v : t.mutable_data())
      if (flip(rng)) v = -v;
    return t;
  };

  {  // matmul, both sides
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4, 2}, rng);
    b.set_requires_grad(true);
    EXPECT_LT(testutil::max_grad_rel_error(a, [&] { return sum(matmul(a, b)); }), 1e-4);
    EXPECT_LT(testutil::max_grad_rel_error(b, [&] { return mean(matmul(a, b)); }), 1e-4);
  }
  {  // matmul with transposed rhs
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({5, 4}, rng);
    EXPECT_LT(testutil::max_grad_rel_error(b, [&] { return sum(matmul(a, b, true)); }), 1e-4);
  }
  {  // bmm
    Tensor a = random_tensor({2, 3, 4}, rng);
    Tensor b = random_tensor({2, 4, 3}, rng);
    EXPECT_LT(testutil::max_grad_rel_error(a, [&] { return sum(bmm(a, b)); }), 1e-4);
    Tensor c = random_tensor({2, 5, 4}, rng);
    EXPECT_LT(testutil::max_grad_rel_error(c, [&] { return sum(bmm(a, c, true)); }), 1e-4);
  }
  for (auto kind : {Activation::gelu, Activation::leaky_relu, Activation::sigmoid,
                    Activation::tanh}) {
    Tensor x = away_from_zero({3, 3});
    EXPECT_LT(testutil::max_grad_rel_error(x, [&] { return mean(activation(x, kind)); }),
              1e-4);
  }
  {  // log-softmax
    Tensor z = random_tensor({3, 6}, rng, -3.0, 3.0);
    Tensor w = random_tensor({3, 6}, rng);
    EXPECT_LT(testutil::max_grad_rel_error(
                  z, [&] { return mean(mul(w, log_softmax_with_temperature(z, 2.0))); }),
              1e-4);
  }
  {  // layer_norm, all three inputs
    Tensor x = random_tensor({4, 6}, rng);
    Tensor g = random_tensor({6}, rng, 0.5, 1.5);
    Tensor b = random_tensor({6}, rng);
    EXPECT_LT(testutil::max_grad_rel_error(x, [&] { return mean(layer_norm(x, g, b)); }), 1e-4);
    EXPECT_LT(testutil::max_grad_rel_error(g, [&] { return mean(layer_norm(x, g, b)); }), 1e-4);
    EXPECT_LT(testutil::max_grad_rel_error(b, [&] { return mean(layer_norm(x, g, b)); }), 1e-4);
  }
  {  // embedding + select + reshape + rowwise bias
    Tensor table = random_tensor({7, 4}, rng);
    Tensor bias = random_tensor({4}, rng);
    std::vector<int> ids{1, 3, 3, 6};
    std::vector<std::size_t> sel{0, 2};
    auto build = [&] {
      Tensor e = embedding_lookup(table, ids);
      Tensor s = select_rows(add_rowwise(e, bias), sel);
      return mean(reshape(s, {8}));
    };
    EXPECT_LT(testutil::max_grad_rel_error(table, build), 1e-4);
    EXPECT_LT(testutil::max_grad_rel_error(bias, build), 1e-4);
  }
  {  // split/merge heads round trip
    Tensor x = random_tensor({6, 4}, rng);  // batch=2, seq=3, hidden=4, heads=2
    Tensor w = random_tensor({6, 4}, rng);
    auto build = [&] {
      Tensor h = split_heads(x, 2, 3, 2);
      Tensor back = merge_heads(h, 2, 3, 2);
      return mean(mul(w, back));
    };
    EXPECT_LT(testutil::max_grad_rel_error(x, build), 1e-4);
  }
  {  // probability-space losses
    Tensor p = random_tensor({3, 4}, rng, 0.05, 0.9);
    Tensor t = random_tensor({3, 4}, rng, 0.05, 0.9);
    EXPECT_LT(testutil::max_grad_rel_error(
                  p, [&] { return loss(p, t, LossKind::cross_entropy); }),
              1e-4);
    EXPECT_LT(testutil::max_grad_rel_error(
                  p, [&] { return loss(p, t, LossKind::binary_cross_entropy); }),
              1e-4);
    EXPECT_LT(testutil::max_grad_rel_error(p, [&] { return loss(p, t, LossKind::mse); }),
              1e-4);
  }
  {  // fused logit losses
    Tensor z = random_tensor({4, 5}, rng, -2.0, 2.0);
    std::vector<int> targets{0, 2, 4, 1};
    EXPECT_LT(testutil::max_grad_rel_error(
                  z, [&] { return cross_entropy_with_logits(z, targets); }),
              1e-4);
    Tensor y = random_tensor({6}, rng, -3.0, 3.0);
    std::vector<double> bt{0, 1, 1, 0, 1, 0};
    EXPECT_LT(testutil::max_grad_rel_error(y, [&] { return bce_with_logits(y, bt); }), 1e-4);
  }
}

TEST(Backward, ElementwiseCompositionMatchesFiniteDifferences) {
  std::mt19937_64 rng(19);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({3, 4}, rng);
  Tensor w = random_tensor({3, 4}, rng);
  auto build = [&] { return mean(mul(sub(a, b), w)); };
  EXPECT_LT(testutil::max_grad_rel_error(a, build), 1e-4);
  EXPECT_LT(testutil::max_grad_rel_error(b, build), 1e-4);
  Tensor rows = random_tensor({4, 3}, rng);
  EXPECT_LT(testutil::max_grad_rel_error(
                rows, [&] { return mean(mul(sum_last_axis(rows), Tensor::from({4}, {1, 2, 3, 4}))); }),
            1e-4);
}

TEST(Dropout, GradientIsTheKeepMask) {
  std::mt19937_64 rng(21);
  Tensor x = random_tensor({40}, rng, 0.5, 1.5);
  x.set_requires_grad(true);
  Tape tape;
  std::mt19937_64 drop_rng(5);
  Tensor y = dropout(x, 0.25, drop_rng, true);
  backward(sum(y));
  // each coordinate's gradient equals its forward scaling (0 or 1/(1-p))
  bool saw_dropped = false, saw_kept = false;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    double scaling = y.data()[i] / x.data()[i];
    EXPECT_DOUBLE_EQ(x.grad()[i], scaling);
    if (scaling == 0.0) saw_dropped = true;
    if (scaling > 1.0) saw_kept = true;
  }
  EXPECT_TRUE(saw_dropped);
  EXPECT_TRUE(saw_kept);

  // eval mode is the identity
  Tensor same = dropout(x, 0.25, drop_rng, false);
  EXPECT_TRUE(same.same_buffer(x));
}

TEST(ClipGradNorm, BoundaryAndScaling) {
  auto with_grad = [](std::vector<double> g) {
    Tensor t = Tensor::zeros({g.size()});
    t.set_requires_grad(true);
    t.zero_grad();
    auto mg = t.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) mg[i] = g[i];
    return t;
  };
  {
    Tensor t = with_grad({3, 4});
    EXPECT_DOUBLE_EQ(clip_grad_norm({t}, 5.0), 5.0);
    EXPECT_DOUBLE_EQ(t.grad()[0], 3.0);
    EXPECT_DOUBLE_EQ(t.grad()[1], 4.0);
  }
  {
    Tensor t = with_grad({6, 8});
    EXPECT_DOUBLE_EQ(clip_grad_norm({t}, 5.0), 10.0);
    EXPECT_NEAR(t.grad()[0], 3.0, 1e-12);
    EXPECT_NEAR(t.grad()[1], 4.0, 1e-12);
  }
  {
    Tensor t = with_grad({0, 0});
    EXPECT_DOUBLE_EQ(clip_grad_norm({t}, 5.0), 0.0);
    EXPECT_DOUBLE_EQ(t.grad()[0], 0.0);
  }
}

TEST(ClipGradNorm, Idempotent) {
  std::mt19937_64 rng(23);
  Tensor t = Tensor::zeros({10});
  t.set_requires_grad(true);
  t.zero_grad();
  std::uniform_real_distribution<double> dist(-3.0, 3.0);
  for (double& g : t.mutable_grad()) g = dist(rng);
  clip_grad_norm({t}, 2.0);
  std::vector<double> once(t.grad().begin(), t.grad().end());
  clip_grad_norm({t}, 2.0);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_DOUBLE_EQ(t.grad()[i], once[i]);
}

TEST(ClipGradNorm, MissingGradientsRejected) {
  Tensor t = Tensor::zeros({3});
  EXPECT_THROW(clip_grad_norm({t}, 5.0), ContractError);
}

TEST(Serialization, RoundTripBitExact) {
  std::mt19937_64 rng(29);
  Tensor t = random_tensor({3, 5, 2}, rng, -100.0, 100.0);
  std::stringstream ss;
  write_tensor(ss, t);
  Tensor back = read_tensor(ss);
  ASSERT_EQ(back.shape(), t.shape());
  for (std::size_t i = 0; i < t.numel(); ++i)
    EXPECT_EQ(std::bit_cast<std::uint64_t>(t.data()[i]),
              std::bit_cast<std::uint64_t>(back.data()[i]));
}

TEST(Serialization, TruncatedAndCorrupted) {
  Tensor t = Tensor::from({2, 2}, {1, 2, 3, 4});
  std::stringstream ss;
  write_tensor(ss, t);
  std::string blob = ss.str();
  {
    std::stringstream bad(blob.substr(0, blob.size() / 2));
    EXPECT_THROW(read_tensor(bad), FormatError);
  }
  {
    std::string corrupt = blob;
    corrupt[0] = 'X';
    std::stringstream bad(corrupt);
    EXPECT_THROW(read_tensor(bad), FormatError);
  }
}

TEST(Concurrency, ParallelReadOnlyForwards) {
  std::mt19937_64 rng(31);
  Tensor a = random_tensor({8, 8}, rng);
  Tensor b = random_tensor({8, 8}, rng);
  Tensor expected = matmul(gelu(a), b);
  std::vector<std::vector<double>> results(4);
  std::vector<std::thread> workers;
  for (auto& slot : results)
    workers.emplace_back([&, out = &slot] {
      Tensor r = matmul(gelu(a), b);
      out->assign(r.data().begin(), r.data().end());
    });
  for (auto& w : workers) w.join();
  for (const auto& r : results) {
    ASSERT_EQ(r.size(), expected.numel());
    for (std::size_t i = 0; i < r.size(); ++i) EXPECT_DOUBLE_EQ(r[i], expected.data()[i]);
  }
}
