#include <doctest.h>

#include <cmath>

#include "acf/cost_volume.hpp"
#include "acf/numerics/grad_check.hpp"
#include "support.hpp"

using namespace acf;
using acf::test::dot;
using acf::test::random_tensor;

namespace {

// Triple loop over (y, x, d) with the out-of-frame rule applied afterwards.
Tensor<double> brute_force_costs(const Tensor<double>& l, const Tensor<double>& r, std::size_t D) {
  const std::size_t H = l.dim(0), W = l.dim(1), C = l.dim(2);
  Tensor<double> out({H, W, D});
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      double worst = 0.0;
      for (std::size_t d = 0; d < D && d <= x; ++d) {
        double s = 0.0;
        for (std::size_t c = 0; c < C; ++c) s += std::abs(l.at(y, x, c) - r.at(y, x - d, c));
        out.at(y, x, d) = s / static_cast<double>(C);
        worst = std::max(worst, out.at(y, x, d));
      }
      for (std::size_t d = x + 1; d < D; ++d) out.at(y, x, d) = worst;
    }
  return out;
}

std::vector<double> softmax_neg(const std::vector<double>& c) {
  double z = 0.0;
  for (const double v : c) z += std::exp(-v);
  std::vector<double> p;
  for (const double v : c) p.push_back(std::exp(-v) / z);
  return p;
}

ProbabilityVolume<double> pixel_probs(const std::vector<double>& p) {
  return ProbabilityVolume<double>{Tensor<double>({1, 1, p.size()}, p)};
}

}  // namespace

TEST_SUITE("build_cost_volume") {
  TEST_CASE("identical features match at zero disparity") {
    Rng rng(1);
    const Tensor<double> f = random_tensor({3, 6, 2}, rng);
    const CostVolume<double> cv = build_cost_volume(f, f, 4);
    CHECK(cv.costs.shape() == Shape{3, 6, 4});
    CHECK(cv.max_disp == 4);
    for (std::size_t y = 0; y < 3; ++y)
      for (std::size_t x = 0; x < 6; ++x) CHECK(cv.costs.at(y, x, 0) == 0.0);
  }

  TEST_CASE("a 3 px shift is recovered by the per-pixel argmin") {
    Rng rng(2);
    const std::size_t H = 4, W = 16, C = 3, D = 8;
    const Tensor<double> left = random_tensor({H, W, C}, rng);
    Tensor<double> right = random_tensor({H, W, C}, rng);
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x + 3 < W; ++x)
        for (std::size_t c = 0; c < C; ++c) right.at(y, x, c) = left.at(y, x + 3, c);
    const CostVolume<double> cv = build_cost_volume(left, right, D);
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 3; x < W; ++x) {
        std::size_t best = 0;
        for (std::size_t d = 1; d < D; ++d)
          if (cv.costs.at(y, x, d) < cv.costs.at(y, x, best)) best = d;
        CHECK(best == 3);
      }
  }

  TEST_CASE("equals the brute-force triple loop bit for bit") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      Rng rng(seed);
      const std::size_t H = 1 + seed % 8, W = 4 + seed % 5, C = 1 + seed % 4;
      const Tensor<double> l = random_tensor({H, W, C}, rng);
      const Tensor<double> r = random_tensor({H, W, C}, rng);
      CHECK(build_cost_volume(l, r, 4).costs == brute_force_costs(l, r, 4));
    }
    Rng rng(77);
    const Tensor<double> l = random_tensor({4, 8, 2}, rng);
    const Tensor<double> r = random_tensor({4, 8, 2}, rng);
    CHECK(build_cost_volume(l, r, 8).costs == brute_force_costs(l, r, 8));
  }

  TEST_CASE("out-of-frame slices never beat the in-frame minimum") {
    Rng rng(3);
    const CostVolume<double> cv = build_cost_volume(random_tensor({2, 5, 2}, rng), random_tensor({2, 5, 2}, rng), 5);
    for (std::size_t x = 0; x < 5; ++x)
      for (std::size_t d = x + 1; d < 5; ++d) {
        double worst = 0.0;
        for (std::size_t k = 0; k <= x; ++k) worst = std::max(worst, cv.costs.at(0, x, k));
        CHECK(cv.costs.at(0, x, d) == worst);
      }
  }

  TEST_CASE("bad geometry is rejected") {
    const Tensor<double> f({2, 4, 1});
    CHECK_THROWS_AS(build_cost_volume(f, f, 5), Error);
    CHECK_THROWS_AS(build_cost_volume(f, f, 1), Error);
    CHECK_THROWS_AS(build_cost_volume(f, Tensor<double>({2, 4, 2}), 2), Error);
  }

  TEST_CASE("backward matches central differences") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      Rng rng(40 + seed);
      const Tensor<double> l = random_tensor({3, 6, 2}, rng);
      const Tensor<double> r = random_tensor({3, 6, 2}, rng);
      const Tensor<double> w = random_tensor({3, 6, 4}, rng);
      const ScalarFunction wrt_left = [&](const Tensor<double>& x, Tensor<double>* g) {
        const CostVolume<double> cv = build_cost_volume(x, r, 4);
        if (g) *g = build_cost_volume_backward(x, r, cv, w).left;
        return dot(w, cv.costs);
      };
      const ScalarFunction wrt_right = [&](const Tensor<double>& x, Tensor<double>* g) {
        const CostVolume<double> cv = build_cost_volume(l, x, 4);
        if (g) *g = build_cost_volume_backward(l, x, cv, w).right;
        return dot(w, cv.costs);
      };
      const GradCheckResult gl = grad_check(wrt_left, l);
      const GradCheckResult gr = grad_check(wrt_right, r);
      CHECK(gl.max_rel_error < 1e-4);
      CHECK(gr.max_rel_error < 1e-4);
      CHECK(gl.checked + gl.skipped.size() == l.size());
    }
  }
}

TEST_SUITE("concat volume") {
  TEST_CASE("layout and out-of-frame zeros") {
    Rng rng(5);
    const Tensor<double> l = random_tensor({2, 5, 3}, rng);
    const Tensor<double> r = random_tensor({2, 5, 3}, rng);
    const Tensor<double> v = build_concat_volume(l, r, 4);
    CHECK(v.shape() == Shape{2, 5, 6, 4});
    for (std::size_t y = 0; y < 2; ++y)
      for (std::size_t x = 0; x < 5; ++x)
        for (std::size_t d = 0; d < 4; ++d)
          for (std::size_t c = 0; c < 3; ++c) {
            CHECK(v.at(y, x, c, d) == l.at(y, x, c));
            CHECK(v.at(y, x, 3 + c, d) == (d <= x ? r.at(y, x - d, c) : 0.0));
          }
  }

  TEST_CASE("backward is the adjoint of the forward map") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      Rng rng(60 + seed);
      const Tensor<double> l = random_tensor({3, 5, 2}, rng);
      const Tensor<double> r = random_tensor({3, 5, 2}, rng);
      const Tensor<double> w = random_tensor({3, 5, 4, 3}, rng);
      const FeatureGrads<double> g = build_concat_volume_backward(w, 2);
      // The map is linear, so <w, V(l, r)> = <g.left, l> + <g.right, r>.
      CHECK(dot(w, build_concat_volume(l, r, 3)) == doctest::Approx(dot(g.left, l) + dot(g.right, r)).epsilon(1e-12));
    }
  }
}

TEST_SUITE("fill_out_of_frame") {
  TEST_CASE("backward matches central differences") {
    Rng rng(8);
    const Tensor<double> c = random_tensor({2, 5, 4}, rng);
    const Tensor<double> w = random_tensor({2, 5, 4}, rng);
    const ScalarFunction f = [&](const Tensor<double>& x, Tensor<double>* g) {
      Tensor<double> filled = x;
      fill_out_of_frame(filled);
      if (g) *g = fill_out_of_frame_backward(filled, w);
      return dot(w, filled);
    };
    CHECK(grad_check(f, c).max_rel_error < 1e-4);
  }
}

TEST_SUITE("cost_to_probability") {
  TEST_CASE("equal costs give a uniform distribution") {
    const CostVolume<double> cv{Tensor<double>({1, 1, 4}, 3.0), 4};
    const ProbabilityVolume<double> pv = cost_to_probability(cv);
    for (const double p : pv.probs.values()) CHECK(p == doctest::Approx(0.25).epsilon(1e-15));
  }

  TEST_CASE("costs 2,1,0,1") {
    const std::vector<double> costs{2, 1, 0, 1};
    const ProbabilityVolume<double> pv = cost_to_probability(CostVolume<double>{Tensor<double>({1, 1, 4}, costs), 4});
    const std::vector<double> oracle = softmax_neg(costs);
    const double expected[] = {0.0723, 0.1966, 0.5344, 0.1966};
    for (std::size_t d = 0; d < 4; ++d) {
      CHECK(pv.probs[d] == doctest::Approx(oracle[d]).epsilon(1e-14));
      CHECK(std::abs(pv.probs[d] - expected[d]) < 1e-4);
    }
  }

  TEST_CASE("shift invariance") {
    Rng rng(9);
    const Tensor<double> c = random_tensor({3, 3, 6}, rng, -3.0, 3.0);
    Tensor<double> shifted = c;
    for (double& v : shifted.values()) v += 17.25;
    const ProbabilityVolume<double> a = cost_to_probability(CostVolume<double>{c, 6});
    const ProbabilityVolume<double> b = cost_to_probability(CostVolume<double>{shifted, 6});
    CHECK(acf::test::max_abs_diff(a.probs, b.probs) < 1e-12);
  }

  TEST_CASE("normalized and positive even for extreme costs") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      Rng rng(seed);
      const Tensor<double> c = random_tensor({4, 4, 8}, rng, -1e4, 1e4);
      const ProbabilityVolume<double> pv = cost_to_probability(CostVolume<double>{c, 8});
      for (std::size_t px = 0; px < 16; ++px) {
        double s = 0.0;
        for (std::size_t d = 0; d < 8; ++d) {
          const double p = pv.probs[px * 8 + d];
          CHECK(std::isfinite(p));
          CHECK(p >= 0.0);
          s += p;
        }
        CHECK(std::abs(s - 1.0) < 1e-6);
      }
      const Tensor<double> moderate = random_tensor({2, 2, 8}, rng, -20.0, 20.0);
      const ProbabilityVolume<double> mp = cost_to_probability(CostVolume<double>{moderate, 8});
      for (const double p : mp.probs.values()) CHECK(p > 0.0);
    }
  }

  TEST_CASE("log probability agrees with the log of the softmax") {
    Rng rng(10);
    const Tensor<double> c = random_tensor({2, 3, 5}, rng, -4.0, 4.0);
    const Tensor<double> lp = log_probability(CostVolume<double>{c, 5});
    const ProbabilityVolume<double> pv = cost_to_probability(CostVolume<double>{c, 5});
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(lp[i] == doctest::Approx(std::log(pv.probs[i])).epsilon(1e-12));
  }

  TEST_CASE("backward passes match central differences") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      Rng rng(80 + seed);
      const Tensor<double> c = random_tensor({2, 3, 5}, rng, -3.0, 3.0);
      const Tensor<double> w = random_tensor({2, 3, 5}, rng);
      const ScalarFunction prob = [&](const Tensor<double>& x, Tensor<double>* g) {
        const ProbabilityVolume<double> pv = cost_to_probability(CostVolume<double>{x, 5});
        if (g) *g = cost_to_probability_backward(pv, w);
        return dot(w, pv.probs);
      };
      const ScalarFunction logp = [&](const Tensor<double>& x, Tensor<double>* g) {
        const ProbabilityVolume<double> pv = cost_to_probability(CostVolume<double>{x, 5});
        if (g) *g = log_probability_backward(pv, w);
        return dot(w, log_probability(CostVolume<double>{x, 5}));
      };
      const Tensor<double> wd = random_tensor({2, 3}, rng);
      const ScalarFunction argmin = [&](const Tensor<double>& x, Tensor<double>* g) {
        const ProbabilityVolume<double> pv = cost_to_probability(CostVolume<double>{x, 5});
        if (g) *g = cost_to_probability_backward(pv, soft_argmin_backward(wd, 5));
        return dot(wd, soft_argmin(pv).disparity);
      };
      CHECK(grad_check(prob, c).max_rel_error < 1e-4);
      CHECK(grad_check(logp, c).max_rel_error < 1e-4);
      CHECK(grad_check(argmin, c).max_rel_error < 1e-4);
    }
  }
}

TEST_SUITE("soft_argmin") {
  TEST_CASE("uniform distribution") {
    CHECK(soft_argmin(pixel_probs({0.25, 0.25, 0.25, 0.25})).disparity[0] == 1.5);
  }

  TEST_CASE("truncated unimodal distribution is biased toward the centre") {
    // Target 2 with sigma 1 in a 4-bin volume; the short left tail pulls the mean down.
    const std::vector<double> rounded{0.0723, 0.1966, 0.5344, 0.1966};
    CHECK(soft_argmin(pixel_probs(rounded)).disparity[0] == doctest::Approx(1.8552).epsilon(1e-12));
    const std::vector<double> p = softmax_neg({2, 1, 0, 1});
    const double dhat = soft_argmin(pixel_probs(p)).disparity[0];
    CHECK(dhat == doctest::Approx(p[1] + 2 * p[2] + 3 * p[3]).epsilon(1e-14));
    CHECK(dhat < 2.0);
  }

  TEST_CASE("one-hot distribution") {
    CHECK(soft_argmin(pixel_probs({0, 0, 1, 0})).disparity[0] == 2.0);
  }

  TEST_CASE("symmetric distributions return their centre") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      Rng rng(seed);
      const std::size_t D = 9, m = 2 + seed % 5, half = std::min(m, D - 1 - m);
      std::vector<double> p(D, 0.0);
      double z = 0.0;
      for (std::size_t k = 0; k <= half; ++k) {
        const double v = rng.uniform(0.1, 1.0);
        p[m + k] = v;
        p[m - k] = v;
        z += k ? 2 * v : v;
      }
      for (double& v : p) v /= z;
      CHECK(soft_argmin(pixel_probs(p)).disparity[0] == doctest::Approx(static_cast<double>(m)).epsilon(1e-14));
    }
  }

  TEST_CASE("output stays in [0, D-1]") {
    Rng rng(11);
    const Tensor<double> c = random_tensor({5, 5, 7}, rng, -6.0, 6.0);
    const DisparityMap<double> dm = soft_argmin(cost_to_probability(CostVolume<double>{c, 7}));
    for (const double d : dm.disparity.values()) {
      CHECK(d >= 0.0);
      CHECK(d <= 6.0);
    }
  }

  TEST_CASE("backward is the index ramp") {
    const Tensor<double> g = soft_argmin_backward(Tensor<double>({1, 1}, 2.0), 4);
    CHECK(g == Tensor<double>({1, 1, 4}, std::vector<double>{0, 2, 4, 6}));
  }
}
