#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "diagkernel/basis.hpp"
#include "diagkernel/rng.hpp"

using namespace diagkernel;

namespace {

MultiIndex mi(std::vector<std::int64_t> m, std::vector<Phase> ph) { return {std::move(m), std::move(ph)}; }

}  // namespace

TEST(Enumerate, CountsAndFirstElements) {
  auto e = enumerate_basis(1, 1);
  ASSERT_EQ(e.size(), 3u);
  EXPECT_EQ(e[0].idx.phase[0], Phase::constant);
  EXPECT_EQ(e[1].idx.phase[0], Phase::cosine);
  EXPECT_EQ(e[2].idx.phase[0], Phase::sine);
  EXPECT_EQ(enumerate_basis(2, 1).size(), 9u);
  EXPECT_EQ(enumerate_basis(2, 20).size(), 1681u);
  EXPECT_EQ(enumerate_basis(3, 2).size(), 125u);
}

TEST(Enumerate, RejectsBadArguments) {
  EXPECT_THROW(enumerate_basis(0, 3), std::invalid_argument);
  EXPECT_THROW(enumerate_basis(2, -1), std::invalid_argument);
}

TEST(Enumerate, IndicesValidAndDistinct) {
  auto e = enumerate_basis(2, 6);
  std::set<std::string> seen;
  for (const auto& el : e) {
    EXPECT_TRUE(el.idx.valid());
    EXPECT_TRUE(seen.insert(el.idx.str()).second);
    double nc = 1;
    for (auto p : el.idx.phase) nc *= p == Phase::constant ? 1.0 : std::numbers::sqrt2;
    EXPECT_DOUBLE_EQ(el.norm_const, nc);
  }
}

TEST(Eval, HandValues) {
  std::vector<double> x{0.3};
  EXPECT_DOUBLE_EQ(eval_basis(make_element(mi({0}, {Phase::constant})), x), 1.0);
  std::vector<double> z{0.0};
  EXPECT_DOUBLE_EQ(eval_basis(make_element(mi({1}, {Phase::cosine})), z), std::numbers::sqrt2);
  EXPECT_DOUBLE_EQ(eval_basis(make_element(mi({1}, {Phase::sine})), z), 0.0);
}

TEST(Eval, WrapsOutOfRangeCoordinates) {
  const auto el = make_element(mi({3, 1}, {Phase::sine, Phase::cosine}));
  std::vector<double> a{0.37, -0.81}, b{0.37 + 2.0, -0.81 - 4.0};
  EXPECT_NEAR(eval_basis(el, a), eval_basis(el, b), 1e-12);
}

// Huge frequencies: reduced phase against a long-double evaluation.
TEST(Eval, LargeFrequencyPhase) {
  for (std::int64_t k : {std::int64_t(1) << 20, std::int64_t(81) * 81 * 81 * 81, std::int64_t(4'000'000'007)}) {
    for (double x : {0.123456789, -0.987654321, 0.5}) {
      long double p = static_cast<long double>(k) * static_cast<long double>(x);
      p = std::fmod(p, 2.0L);
      const double ref = std::sqrt(2.0) * static_cast<double>(std::cos(static_cast<long double>(std::numbers::pi) * p));
      std::vector<double> pt{x};
      EXPECT_NEAR(eval_basis(make_element(mi({k}, {Phase::cosine})), pt), ref, 1e-6) << k << " " << x;
    }
  }
}

TEST(Eval, UniformBound) {
  auto e = enumerate_basis(2, 8);
  CounterRng g(stream_key({42}));
  double mx = 0;
  for (int i = 0; i < 100000; ++i) {
    std::vector<double> x{g.uniform(-1, 1), g.uniform(-1, 1)};
    const auto& el = e[static_cast<std::size_t>(i) % e.size()];
    mx = std::max(mx, std::abs(eval_basis(el, x)));
  }
  EXPECT_LE(mx, 2.0 + 1e-12);
}

// Exact discrete orthogonality: a uniform grid with N points per axis
// integrates trig products of frequency < N exactly.
TEST(Orthonormality, ExactGridQuadrature) {
  const int d = 2, M = 20, N = 48;
  auto e = enumerate_basis(d, M);
  Eigen::MatrixXd E(N * N, static_cast<Eigen::Index>(e.size()));
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      std::vector<double> x{-1.0 + 2.0 * i / N, -1.0 + 2.0 * j / N};
      for (std::size_t c = 0; c < e.size(); ++c) E(i * N + j, static_cast<Eigen::Index>(c)) = eval_basis(e[c], x);
    }
  Eigen::MatrixXd G = E.transpose() * E / double(N * N);
  EXPECT_LT((G - Eigen::MatrixXd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff(), 1e-10);
}

// Monte Carlo Gram on 10^6 uniform points for a random subset of the
// max_freq = 20 basis.
TEST(Orthonormality, MonteCarloGram) {
  auto e = enumerate_basis(2, 20);
  std::mt19937_64 pick(7);
  std::vector<std::size_t> cols{0, e.size() - 1};
  while (cols.size() < 40) cols.push_back(pick() % e.size());
  const Eigen::Index K = static_cast<Eigen::Index>(cols.size());
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(K, K);
  CounterRng g(stream_key({2024}));
  const int N = 1'000'000, chunk = 20000;
  Eigen::MatrixXd E(chunk, K);
  for (int done = 0; done < N; done += chunk) {
    for (int i = 0; i < chunk; ++i) {
      std::vector<double> x{g.uniform(-1, 1), g.uniform(-1, 1)};
      for (Eigen::Index c = 0; c < K; ++c) E(i, c) = eval_basis(e[cols[c]], x);
    }
    G.noalias() += E.transpose() * E;
  }
  G /= N;
  // duplicated picks legitimately give off-diagonal ones
  int inside = 0, total = 0;
  for (Eigen::Index a = 0; a < K; ++a)
    for (Eigen::Index b = 0; b < K; ++b) {
      const double want = cols[a] == cols[b] ? 1.0 : 0.0;
      EXPECT_NEAR(G(a, b), want, 0.05);
      inside += std::abs(G(a, b) - want) <= 4.0 / std::sqrt(double(N));
      ++total;
    }
  EXPECT_GE(double(inside) / total, 0.95);
}

TEST(Sobolev, EigenvalueExamples) {
  EXPECT_DOUBLE_EQ(sobolev_eigenvalue(mi({0, 0}, {Phase::constant, Phase::constant}), 1.5), 1.0);
  EXPECT_NEAR(sobolev_eigenvalue(mi({1, 0}, {Phase::cosine, Phase::constant}), 1.5), 0.353553390593273762, 1e-15);
  // 26^{-3/2} at 30 digits: 0.0075429282745455396...
  EXPECT_NEAR(sobolev_eigenvalue(mi({3, 4}, {Phase::cosine, Phase::sine}), 1.5), 0.0075429282745455397, 1e-16);
  EXPECT_EQ(sobolev_eigenvalue(mi({3, 4}, {Phase::cosine, Phase::sine}), 1.5),
            sobolev_eigenvalue(mi({3, 4}, {Phase::sine, Phase::cosine}), 1.5));
}

TEST(Sobolev, SummabilityError) {
  EXPECT_THROW(sobolev_spectrum(2, 3, 1.0), std::domain_error);
  EXPECT_THROW(sobolev_spectrum_1d({1, 2, 3}, 0.5), std::domain_error);
  EXPECT_NO_THROW(sobolev_spectrum(2, 3, 1.01));
}

TEST(Sobolev, SortedWithDeterministicTies) {
  auto s = sobolev_spectrum(2, 10, 1.5);
  EXPECT_TRUE(s.sorted_descending());
  for (std::size_t j = 1; j < s.size(); ++j) {
    const auto& a = s.elements[j - 1].idx;
    const auto& b = s.elements[j].idx;
    EXPECT_TRUE(a < b) << a.str() << " " << b.str();
  }
  auto again = sobolev_spectrum(2, 10, 1.5);
  for (std::size_t j = 0; j < s.size(); ++j) EXPECT_EQ(s.elements[j].idx, again.elements[j].idx);
}

TEST(Sobolev, DecaySandwichSlope) {
  const double r = 1.5;
  auto s = sobolev_spectrum(2, 40, r);
  std::vector<double> x, y;
  for (std::size_t j = 10; j <= 1000; ++j) {
    x.push_back(std::log(double(j)));
    y.push_back(std::log(s.eigenvalues[j - 1]));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= x.size(), my /= y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my), sxx += (x[i] - mx) * (x[i] - mx);
  EXPECT_NEAR(sxy / sxx, -2 * r / 2, 0.15);
}

TEST(Sobolev, OneDimensionalRanks) {
  auto s = sobolev_spectrum_1d({5, 1, 2, 3, 2}, 1.0);
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s.ranks, (std::vector<std::int64_t>{1, 2, 3, 5}));
  EXPECT_EQ(s.elements[1].idx.phase[0], Phase::cosine);
  EXPECT_EQ(s.elements[2].idx.phase[0], Phase::sine);
  EXPECT_EQ(s.elements[3].idx.m[0], 2);
  EXPECT_DOUBLE_EQ(s.eigenvalues[3], 0.2);
  // flat ranks agree with the dense d = 1 ordering
  auto dense = sobolev_spectrum(1, 10, 1.0);
  for (std::int64_t k = 1; k <= 21; ++k) EXPECT_EQ(element_1d(k).idx, dense.elements[k - 1].idx);
}

TEST(LowDim, Examples) {
  auto s = sobolev_spectrum(2, 4, 1.5);
  auto l = low_dim_spectrum(s, 1);
  const auto off = l.find(mi({0, 1}, {Phase::constant, Phase::cosine}));
  const auto on = l.find(mi({3, 0}, {Phase::cosine, Phase::constant}));
  ASSERT_GE(off, 0);
  ASSERT_GE(on, 0);
  EXPECT_EQ(l.eigenvalues[off], 0.0);
  EXPECT_TRUE(l.frozen(static_cast<std::size_t>(off)));
  EXPECT_EQ(l.eigenvalues[on], std::pow(10.0, -1.5));
}

TEST(LowDim, ZeroesInactiveAxes) {
  auto s = sobolev_spectrum(2, 4, 1.5);
  auto l = low_dim_spectrum(s, 1);
  for (std::size_t j = 0; j < l.size(); ++j) {
    const auto& m = l.elements[j].idx.m;
    const double orig = sobolev_eigenvalue(l.elements[j].idx, 1.5);
    if (m[1] != 0) EXPECT_EQ(l.eigenvalues[j], 0.0);
    else EXPECT_EQ(l.eigenvalues[j], orig);
  }
  EXPECT_TRUE(l.sorted_descending());
  auto same = low_dim_spectrum(s, 2);
  EXPECT_EQ(same.eigenvalues, s.eigenvalues);
  EXPECT_THROW(low_dim_spectrum(s, 3), std::invalid_argument);
}
