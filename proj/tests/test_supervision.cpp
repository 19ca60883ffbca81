#include <doctest.h>

#include <cmath>
#include <numbers>

#include "acf/numerics/grad_check.hpp"
#include "acf/supervision.hpp"
#include "loss_chain.hpp"
#include "support.hpp"

using namespace acf;
using acf::test::dot;
using acf::test::random_tensor;

namespace {

Tensor<double> scalar_map(double v) { return Tensor<double>({1, 1}, v); }

UnimodalTargetVolume<double> one_pixel_target(double dgt, double sigma, std::size_t D) {
  return unimodal_target(DisparityMap<double>{scalar_map(dgt)}, VarianceMap<double>{scalar_map(sigma)}, D,
                         Mask(1, 1, true), 1e-12);
}

// Direct evaluation of exp(-|d - dgt| / sigma) / Z.
std::vector<double> target_oracle(double dgt, double sigma, std::size_t D) {
  std::vector<double> p(D);
  double z = 0.0;
  for (std::size_t d = 0; d < D; ++d) z += p[d] = std::exp(-std::abs(static_cast<double>(d) - dgt) / sigma);
  for (double& v : p) v /= z;
  return p;
}

// Cross entropy written from scratch: -sum_d P(d) log softmax(-c)(d).
double cross_entropy_oracle(const Tensor<double>& target, const Tensor<double>& costs, const Mask& valid) {
  const std::size_t D = costs.dim(2);
  double total = 0.0;
  for (std::size_t px = 0; px < valid.size(); ++px) {
    if (!valid[px]) continue;
    double z = 0.0;
    for (std::size_t d = 0; d < D; ++d) z += std::exp(-costs[px * D + d]);
    for (std::size_t d = 0; d < D; ++d) {
      const double log_p = -costs[px * D + d] - std::log(z);
      total -= target[px * D + d] * log_p;
    }
  }
  return total / static_cast<double>(valid.count());
}

}  // namespace

TEST_SUITE("confidence_to_variance") {
  TEST_CASE("formula values") {
    CHECK(confidence_to_variance(ConfidenceMap<double>{scalar_map(1.0)}, 1.0, 1.0).sigma[0] == 1.0);
    CHECK(confidence_to_variance(ConfidenceMap<double>{scalar_map(0.0)}, 1.0, 1.0).sigma[0] == 2.0);
    CHECK(confidence_to_variance(ConfidenceMap<double>{scalar_map(0.5)}, 2.0, 1.0).sigma[0] == 2.0);
  }

  TEST_CASE("bounds hold on random confidences") {
    Rng rng(1);
    const Tensor<double> f = random_tensor({100, 100}, rng, 0.0, 1.0);
    const VarianceMap<double> v = confidence_to_variance(ConfidenceMap<double>{f}, 1.5, 0.25);
    for (const double s : v.sigma.values()) {
      CHECK(s >= 0.25);
      CHECK(s <= 1.75);
    }
  }

  TEST_CASE("gradient is -s") {
    const Tensor<double> g = confidence_to_variance_backward(Tensor<double>({2, 1}, std::vector<double>{1.0, -2.0}), 3.0);
    CHECK(g[0] == -3.0);
    CHECK(g[1] == 6.0);
  }

  TEST_CASE("non-positive eps and negative s are rejected") {
    const ConfidenceMap<double> f{scalar_map(0.5)};
    CHECK_THROWS_AS(confidence_to_variance(f, 1.0, 0.0), Error);
    CHECK_THROWS_AS(confidence_to_variance(f, 1.0, -1.0), Error);
    CHECK_THROWS_AS(confidence_to_variance(f, -0.1, 1.0), Error);
    CHECK_NOTHROW(confidence_to_variance(f, 0.0, 1.0));
  }
}

TEST_SUITE("unimodal_target") {
  TEST_CASE("dgt 2, sigma 1, D 4") {
    const UnimodalTargetVolume<double> t = one_pixel_target(2.0, 1.0, 4);
    const std::vector<double> oracle = target_oracle(2.0, 1.0, 4);
    const double expected[] = {0.0723, 0.1966, 0.5344, 0.1966};
    for (std::size_t d = 0; d < 4; ++d) {
      CHECK(t.target[d] == doctest::Approx(oracle[d]).epsilon(1e-14));
      CHECK(std::abs(t.target[d] - expected[d]) < 1e-4);
    }
  }

  TEST_CASE("huge sigma approaches uniform") {
    for (const double dgt : {0.0, 2.7, 7.0}) {
      const UnimodalTargetVolume<double> t = one_pixel_target(dgt, 1e6, 8);
      for (const double p : t.target.values()) CHECK(std::abs(p - 0.125) < 1e-4);
    }
  }

  TEST_CASE("larger sigma lowers the peak") {
    const UnimodalTargetVolume<double> sharp = one_pixel_target(2.0, 1.0, 4);
    const UnimodalTargetVolume<double> flat = one_pixel_target(2.0, 2.0, 4);
    CHECK(flat.target[2] < sharp.target[2]);
    CHECK(flat.target[2] == doctest::Approx(target_oracle(2.0, 2.0, 4)[2]).epsilon(1e-14));
  }

  TEST_CASE("normalized, strictly unimodal, peaked at the nearest bin") {
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t D = 2 + rng.below(30);
      const double dgt = rng.uniform(0.0, static_cast<double>(D - 1));
      const double sigma = rng.uniform(1.0, 2.0);
      const UnimodalTargetVolume<double> t = one_pixel_target(dgt, sigma, D);
      double sum = 0.0;
      for (const double p : t.target.values()) sum += p;
      CHECK(std::abs(sum - 1.0) < 1e-9);
      for (std::size_t a = 0; a < D; ++a)
        for (std::size_t b = 0; b < D; ++b) {
          const double da = std::abs(static_cast<double>(a) - dgt), db = std::abs(static_cast<double>(b) - dgt);
          if (da < db - 1e-12) CHECK(t.target[a] > t.target[b]);
        }
      const std::size_t peak =
          static_cast<std::size_t>(std::max_element(t.target.values().begin(), t.target.values().end()) -
                                   t.target.values().begin());
      CHECK(std::abs(static_cast<double>(peak) - dgt) <= 0.5);
    }
  }

  TEST_CASE("peak flattens monotonically with sigma") {
    double last = 1.0;
    for (double sigma = 1.0; sigma <= 5.0; sigma += 0.25) {
      const double peak = one_pixel_target(3.0, sigma, 8).target[3];
      CHECK(peak < last);
      last = peak;
    }
  }

  TEST_CASE("invalid pixels carry an all-zero slice") {
    Tensor<double> dgt({1, 2}, std::vector<double>{1.0, 99.0});
    Mask valid(1, 2, true);
    valid.set(1, false);
    const UnimodalTargetVolume<double> t =
        unimodal_target(DisparityMap<double>{dgt}, VarianceMap<double>{Tensor<double>({1, 2}, 1.0)}, 4, valid, 1.0);
    for (std::size_t d = 0; d < 4; ++d) CHECK(t.target[4 + d] == 0.0);
    CHECK(t.valid == valid);
  }

  TEST_CASE("out-of-range disparity and sigma below the floor are rejected") {
    const VarianceMap<double> one{scalar_map(1.0)};
    CHECK_THROWS_AS(unimodal_target(DisparityMap<double>{scalar_map(4.0)}, one, 4, Mask(1, 1, true), 1.0), Error);
    CHECK_THROWS_AS(unimodal_target(DisparityMap<double>{scalar_map(-0.5)}, one, 4, Mask(1, 1, true), 1.0), Error);
    CHECK_THROWS_AS(
        unimodal_target(DisparityMap<double>{scalar_map(1.0)}, VarianceMap<double>{scalar_map(0.5)}, 4, Mask(1, 1, true), 1.0),
        Error);
    CHECK_THROWS_AS(unimodal_target(DisparityMap<double>{scalar_map(1.0)}, one, 4, Mask(1, 1, true), 0.0), Error);
  }

  TEST_CASE("backward with respect to sigma matches central differences") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      Rng rng(seed);
      const Tensor<double> dgt = random_tensor({2, 3}, rng, 0.0, 5.0);
      const Tensor<double> sigma = random_tensor({2, 3}, rng, 1.0, 2.0);
      const Tensor<double> w = random_tensor({2, 3, 6}, rng);
      const Mask valid = acf::test::random_mask(2, 3, rng);
      const ScalarFunction f = [&](const Tensor<double>& s, Tensor<double>* g) {
        const UnimodalTargetVolume<double> t =
            unimodal_target(DisparityMap<double>{dgt}, VarianceMap<double>{s}, 6, valid, 0.5);
        if (g) *g = unimodal_target_backward(t, DisparityMap<double>{dgt}, VarianceMap<double>{s}, w);
        return dot(w, t.target);
      };
      CHECK(grad_check(f, sigma).max_rel_error < 1e-4);
    }
  }
}

TEST_SUITE("stereo_focal_loss") {
  TEST_CASE("alpha 0 with a uniform prediction gives log D") {
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
      const UnimodalTargetVolume<double> t = one_pixel_target(rng.uniform(0.0, 2.0), rng.uniform(1.0, 2.0), 3);
      const FocalLossResult<double> r = stereo_focal_loss(t, CostVolume<double>{Tensor<double>({1, 1, 3}, 0.4), 3}, 0.0, false);
      CHECK(r.loss == doctest::Approx(std::log(3.0)).epsilon(1e-14));
      CHECK(std::abs(r.loss - 1.0986) < 1e-4);
    }
  }

  TEST_CASE("alpha 0 equals an independent cross entropy on random instances") {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
      Rng rng(1000 + seed);
      const std::size_t H = 1 + rng.below(4), W = 1 + rng.below(4), D = 2 + rng.below(10);
      const Tensor<double> costs = random_tensor({H, W, D}, rng, -3.0, 3.0);
      const Tensor<double> dgt = random_tensor({H, W}, rng, 0.0, static_cast<double>(D - 1));
      const Tensor<double> sigma = random_tensor({H, W}, rng, 1.0, 2.0);
      const Mask valid = acf::test::random_mask(H, W, rng);
      const UnimodalTargetVolume<double> t =
          unimodal_target(DisparityMap<double>{dgt}, VarianceMap<double>{sigma}, D, valid, 1.0);
      const double loss = stereo_focal_loss(t, CostVolume<double>{costs, D}, 0.0, false).loss;
      CHECK(std::abs(loss - cross_entropy_oracle(t.target, costs, valid)) < 1e-10);
    }
  }

  TEST_CASE("alpha 5 with the prediction equal to the target") {
    const std::vector<double> p{0.2119, 0.5761, 0.2119};
    Tensor<double> costs({1, 1, 3});
    for (std::size_t d = 0; d < 3; ++d) costs[d] = -std::log(p[d]);
    const UnimodalTargetVolume<double> t{Tensor<double>({1, 1, 3}, p), Mask(1, 1, true)};
    // Term-by-term: (1 - P)^-5 * (-P log P_hat) with P_hat renormalized from the costs.
    const double z = p[0] + p[1] + p[2];
    double oracle = 0.0;
    for (const double v : p) oracle += std::pow(1.0 - v, -5.0) * (-v * std::log(v / z));
    const double loss = stereo_focal_loss(t, CostVolume<double>{costs, 3}, 5.0, false).loss;
    CHECK(loss == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(std::abs(loss - 25.38) < 0.01);
  }

  TEST_CASE("non-negative with a non-zero gradient on random inputs") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      Rng rng(seed);
      const Tensor<double> costs = random_tensor({3, 3, 6}, rng, -4.0, 4.0);
      const UnimodalTargetVolume<double> t =
          unimodal_target(DisparityMap<double>{random_tensor({3, 3}, rng, 0.0, 5.0)},
                          VarianceMap<double>{random_tensor({3, 3}, rng, 1.0, 2.0)}, 6, Mask(3, 3, true), 1.0);
      const FocalLossResult<double> r = stereo_focal_loss(t, CostVolume<double>{costs, 6}, 5.0, false);
      CHECK(r.loss >= 0.0);
      double norm = 0.0;
      for (const double g : r.grad_costs.values()) norm += g * g;
      CHECK(norm > 0.0);
    }
  }

  TEST_CASE("focal weight grows with target probability") {
    const std::vector<double> p = target_oracle(2.3, 1.4, 7);
    std::vector<std::size_t> order(p.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    for (std::size_t i = 1; i < order.size(); ++i) {
      const double lo = std::pow(1.0 - p[order[i - 1]], -5.0), hi = std::pow(1.0 - p[order[i]], -5.0);
      if (p[order[i]] > p[order[i - 1]]) CHECK(hi > lo);
    }
    // The loss sees the same ordering: raising a one-bin cross-entropy term
    // costs more at the peak than in the tail.
    Tensor<double> costs({1, 1, 7}, 0.0);
    const UnimodalTargetVolume<double> t{Tensor<double>({1, 1, 7}, p), Mask(1, 1, true)};
    const FocalLossResult<double> r = stereo_focal_loss(t, CostVolume<double>{costs, 7}, 5.0, false);
    const FocalLossResult<double> ce = stereo_focal_loss(t, CostVolume<double>{costs, 7}, 0.0, false);
    CHECK(r.loss > ce.loss);
  }

  TEST_CASE("gradients with respect to costs and target match central differences") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      Rng rng(500 + seed);
      const Tensor<double> costs = random_tensor({2, 2, 5}, rng, -2.0, 2.0);
      // Random normalized distributions, as the loss only ever sees those.
      Tensor<double> raw = random_tensor({2, 2, 5}, rng, 0.05, 1.0);
      for (std::size_t px = 0; px < 4; ++px) {
        double z = 0.0;
        for (std::size_t d = 0; d < 5; ++d) z += raw[px * 5 + d];
        for (std::size_t d = 0; d < 5; ++d) raw[px * 5 + d] /= z;
      }
      const Mask valid = acf::test::random_mask(2, 2, rng);
      const ScalarFunction wrt_costs = [&](const Tensor<double>& c, Tensor<double>* g) {
        const FocalLossResult<double> r =
            stereo_focal_loss(UnimodalTargetVolume<double>{raw, valid}, CostVolume<double>{c, 5}, 5.0, false);
        if (g) *g = r.grad_costs;
        return r.loss;
      };
      const ScalarFunction wrt_target = [&](const Tensor<double>& p, Tensor<double>* g) {
        const FocalLossResult<double> r =
            stereo_focal_loss(UnimodalTargetVolume<double>{p, valid}, CostVolume<double>{costs, 5}, 5.0, true);
        if (g) *g = r.grad_target;
        return r.loss;
      };
      CHECK(grad_check(wrt_costs, costs).max_rel_error < 1e-4);
      CHECK(grad_check(wrt_target, raw).max_rel_error < 1e-4);
    }
  }
}

TEST_SUITE("smooth_l1_regression_loss") {
  TEST_CASE("branch values") {
    CHECK(smooth_l1(0.5) == 0.125);
    CHECK(smooth_l1(2.0) == 1.5);
    CHECK(smooth_l1(-2.0) == 1.5);
    CHECK(smooth_l1(1.0) == 0.5);
    CHECK(0.5 * 1.0 * 1.0 == std::abs(1.0) - 0.5);
    CHECK(smooth_l1_derivative(1.0) == 1.0);
    CHECK(smooth_l1_derivative(-1.0) == -1.0);
    CHECK(smooth_l1_derivative(0.25) == 0.25);
  }

  TEST_CASE("masked mean and gradient") {
    const Tensor<double> dhat({1, 3}, std::vector<double>{1.5, 0.0, 4.0});
    const Tensor<double> dgt({1, 3}, std::vector<double>{1.0, 2.0, 0.0});
    Mask valid(1, 3, true);
    valid.set(2, false);
    const RegressionLossResult<double> r =
        smooth_l1_regression_loss(DisparityMap<double>{dhat}, DisparityMap<double>{dgt}, valid);
    CHECK(r.loss == doctest::Approx((0.125 + 1.5) / 2.0).epsilon(1e-15));
    CHECK(r.grad_disparity[0] == doctest::Approx(0.5 / 2.0).epsilon(1e-15));
    CHECK(r.grad_disparity[1] == doctest::Approx(-1.0 / 2.0).epsilon(1e-15));
    CHECK(r.grad_disparity[2] == 0.0);
  }

  TEST_CASE("empty valid set gives zero") {
    const RegressionLossResult<double> r = smooth_l1_regression_loss(
        DisparityMap<double>{scalar_map(3.0)}, DisparityMap<double>{scalar_map(0.0)}, Mask(1, 1, false));
    CHECK(r.loss == 0.0);
    CHECK(r.grad_disparity[0] == 0.0);
  }

  TEST_CASE("gradient matches central differences away from the kink") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      Rng rng(seed);
      const Tensor<double> dhat = random_tensor({3, 4}, rng, 0.0, 6.0);
      const Tensor<double> dgt = random_tensor({3, 4}, rng, 0.0, 6.0);
      const Mask valid = acf::test::random_mask(3, 4, rng);
      const ScalarFunction f = [&](const Tensor<double>& x, Tensor<double>* g) {
        const RegressionLossResult<double> r =
            smooth_l1_regression_loss(DisparityMap<double>{x}, DisparityMap<double>{dgt}, valid);
        if (g) *g = r.grad_disparity;
        return r.loss;
      };
      CHECK(grad_check(f, dhat).max_rel_error < 1e-4);
    }
  }
}

TEST_SUITE("confidence_loss") {
  TEST_CASE("values") {
    const Mask all(2, 2, true);
    CHECK(confidence_loss(ConfidenceMap<double>{Tensor<double>({2, 2}, 1.0)}, all).loss == 0.0);
    CHECK(confidence_loss(ConfidenceMap<double>{Tensor<double>({2, 2}, std::exp(-1.0))}, all).loss ==
          doctest::Approx(1.0).epsilon(1e-15));
    const double half = confidence_loss(ConfidenceMap<double>{Tensor<double>({2, 2}, 0.5)}, all).loss;
    CHECK(half == doctest::Approx(std::numbers::ln2).epsilon(1e-15));
    CHECK(std::abs(half - 0.6931) < 1e-4);
  }

  TEST_CASE("zero confidence is clamped") {
    const double l = confidence_loss(ConfidenceMap<double>{scalar_map(0.0)}, Mask(1, 1, true)).loss;
    CHECK(l == doctest::Approx(-std::log(1e-12)).epsilon(1e-12));
  }

  TEST_CASE("gradient matches central differences") {
    Rng rng(4);
    const Tensor<double> f = random_tensor({3, 3}, rng, 0.1, 0.9);
    const Mask valid = acf::test::random_mask(3, 3, rng);
    const ScalarFunction fn = [&](const Tensor<double>& x, Tensor<double>* g) {
      const ConfidenceLossResult<double> r = confidence_loss(ConfidenceMap<double>{x}, valid);
      if (g) *g = r.grad_confidence;
      return r.loss;
    };
    CHECK(grad_check(fn, f).max_rel_error < 1e-4);
  }
}

TEST_SUITE("total_loss") {
  TEST_CASE("zero weights keep only the focal term") {
    const LossBreakdown b = total_loss(2.5, 3.0, 4.0, LossWeights{0.0, 0.0});
    CHECK(b.total == 2.5);
  }

  TEST_CASE("weighted sum") {
    const LossBreakdown b = total_loss(1.0, 2.0, 0.5, LossWeights{1.0, 8.0});
    CHECK(b.total == 7.0);
    CHECK(b.stereo_focal == 1.0);
    CHECK(b.regression == 2.0);
    CHECK(b.confidence == 0.5);
  }

  TEST_CASE("combined gradient on a 2x2x4 instance") {
    Rng rng(6);
    const Tensor<double> costs = random_tensor({2, 2, 4}, rng, -2.0, 2.0);
    const Tensor<double> f = random_tensor({2, 2}, rng, 0.2, 0.8);
    const Tensor<double> dgt = random_tensor({2, 2}, rng, 0.0, 3.0);
    const Mask valid(2, 2, true);
    const ScalarFunction fn = [&](const Tensor<double>& c, Tensor<double>* g) {
      const acf::test::LossChainResult r = acf::test::loss_chain(c, f, dgt, valid, {});
      if (g) *g = r.grad_costs;
      return r.loss.total;
    };
    CHECK(grad_check(fn, costs).max_rel_error < 1e-4);
  }

  TEST_CASE("combined gradient with respect to costs and confidence, 4x4 with D 8") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      Rng rng(700 + seed);
      const Tensor<double> costs = random_tensor({4, 4, 8}, rng, -2.0, 2.0);
      const Tensor<double> f = random_tensor({4, 4}, rng, 0.05, 0.95);
      const Tensor<double> dgt = random_tensor({4, 4}, rng, 0.0, 7.0);
      const Mask valid = acf::test::random_mask(4, 4, rng, 0.8);
      const ScalarFunction wrt_costs = [&](const Tensor<double>& c, Tensor<double>* g) {
        const acf::test::LossChainResult r = acf::test::loss_chain(c, f, dgt, valid, {});
        if (g) *g = r.grad_costs;
        return r.loss.total;
      };
      const ScalarFunction wrt_f = [&](const Tensor<double>& x, Tensor<double>* g) {
        const acf::test::LossChainResult r = acf::test::loss_chain(costs, x, dgt, valid, {});
        if (g) *g = r.grad_confidence;
        return r.loss.total;
      };
      CHECK(grad_check(wrt_costs, costs).max_rel_error < 1e-4);
      CHECK(grad_check(wrt_f, f).max_rel_error < 1e-4);
    }
  }
}
