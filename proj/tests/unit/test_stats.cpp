#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <thread>

#include <Eigen/Eigenvalues>

#include "driftgate/error.hpp"
#include "driftgate/stats.hpp"
#include "oracles.hpp"

using driftgate::DegenerateModelError;
using driftgate::FixedAlpha;
using driftgate::GaussianInit;
using driftgate::InputError;
using driftgate::LedoitWolfAlpha;
using driftgate::NormalStats;

namespace {

// The init draws regenerated exactly as documented: column-major standard
// normals from mt19937_64(seed), scaled by sigma.
Eigen::MatrixXd init_draws(Eigen::Index dim, Eigen::Index m0, std::uint64_t seed, double sigma) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(dim, m0);
  for (Eigen::Index c = 0; c < m0; ++c) {
    for (Eigen::Index r = 0; r < dim; ++r) m(r, c) = sigma * normal(rng);
  }
  return m;
}

Eigen::MatrixXd concat(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

}  // namespace

TEST(InitGaussian, ZeroNoiseIsDegenerate) {
  EXPECT_THROW(NormalStats::init_gaussian(4, {2, 0.0, 0}, FixedAlpha{0.1}), DegenerateModelError);
}

TEST(InitGaussian, RejectsFewerThanTwoSamples) {
  EXPECT_THROW(NormalStats::init_gaussian(4, {1, 1.0, 0}, FixedAlpha{0.1}), InputError);
}

TEST(InitGaussian, MatchesBatchStatisticsOfTheSameDraws) {
  const NormalStats s = NormalStats::init_gaussian(8, {64, 1.0, 7}, LedoitWolfAlpha{});
  const Eigen::MatrixXd draws = init_draws(8, 64, 7, 1.0);
  EXPECT_EQ(s.count(), 64u);
  EXPECT_EQ(s.version(), 0u);
  EXPECT_LE(oracle::relative_error(s.mean(), oracle::mean(draws)), 1e-12);
  EXPECT_LE(oracle::relative_error(s.empirical_covariance(), oracle::covariance(draws)), 1e-12);
  for (Eigen::Index i = 0; i < 8; ++i) EXPECT_LE(std::abs(s.mean()(i)), 0.5);
  const double trace = s.empirical_covariance().trace();
  EXPECT_GE(trace, 4.0);
  EXPECT_LE(trace, 12.0);
}

TEST(InitGaussian, IsDeterministicPerSeed) {
  const auto a = NormalStats::init_gaussian(6, {16, 2.0, 3}, FixedAlpha{0.2});
  const auto b = NormalStats::init_gaussian(6, {16, 2.0, 3}, FixedAlpha{0.2});
  const auto c = NormalStats::init_gaussian(6, {16, 2.0, 4}, FixedAlpha{0.2});
  EXPECT_EQ(a.sum_b(), b.sum_b());
  EXPECT_EQ(a.sum_A(), b.sum_A());
  EXPECT_NE(a.sum_b(), c.sum_b());
}

TEST(InitGaussian, FactorizesInHighDimensionWithFewSamples) {
  const NormalStats s = NormalStats::init_gaussian(2560, {64, 1.0, 0}, LedoitWolfAlpha{});
  EXPECT_GT(s.alpha(), 0.0);
  const auto snap = s.snapshot();
  EXPECT_EQ(snap->dim(), 2560u);
}

TEST(Absorb, ReproducesIncrementalMeanArithmetic) {
  Eigen::VectorXd b(2);
  b << 3, 3;
  Eigen::MatrixXd a(2, 2);
  a << 5, 3, 3, 5;
  NormalStats s = NormalStats::restore(2, 3, 0.0, b, a, {}, FixedAlpha{0.5});
  Eigen::MatrixXd z(2, 1);
  z << 5, 5;
  s.absorb(z);
  EXPECT_EQ(s.count(), 4u);
  EXPECT_DOUBLE_EQ(s.mean()(0), 2.0);
  EXPECT_DOUBLE_EQ(s.mean()(1), 2.0);
}

TEST(Absorb, CopiesOfTheMeanLeaveItUnchanged) {
  NormalStats s = NormalStats::init_gaussian(5, {10, 1.0, 1}, FixedAlpha{0.1});
  const Eigen::VectorXd mu = s.mean();
  Eigen::MatrixXd copies(5, 7);
  for (Eigen::Index c = 0; c < 7; ++c) copies.col(c) = mu;
  s.absorb(copies);
  EXPECT_LE(oracle::relative_error(s.mean(), mu), 1e-14);
}

TEST(Absorb, StreamingEqualsTwoPassBatch) {
  const std::size_t dim = 8;
  NormalStats s = NormalStats::init_gaussian(dim, {64, 1.0, 11}, LedoitWolfAlpha{32});
  Eigen::MatrixXd all = init_draws(8, 64, 11, 1.0);
  const Eigen::MatrixXd stream = oracle::gaussian(8, 200, 12, 3.0).array() + 2.0;
  const std::vector<Eigen::Index> sizes{1, 1, 4, 16, 2, 64, 8, 32, 1, 3, 68};
  Eigen::Index pos = 0;
  for (Eigen::Index k : sizes) {
    s.absorb(stream.middleCols(pos, k));
    pos += k;
  }
  ASSERT_EQ(pos, 200);
  all = concat(all, stream);
  EXPECT_EQ(s.count(), 264u);
  EXPECT_EQ(s.version(), sizes.size());
  EXPECT_LE(oracle::relative_error(s.mean(), oracle::mean(all)), 1e-10);
  EXPECT_LE(oracle::relative_error(s.empirical_covariance(), oracle::covariance(all)), 1e-10);
  // mean * count == sum_b
  EXPECT_LE(oracle::relative_error(s.mean() * static_cast<double>(s.count()), s.sum_b()), 1e-14);
}

TEST(Absorb, BatchOrderDoesNotMatter) {
  const Eigen::MatrixXd x = oracle::gaussian(6, 50, 21);
  NormalStats a = NormalStats::init_gaussian(6, {8, 1.0, 2}, FixedAlpha{0.1});
  NormalStats b = a;
  a.absorb(x);
  std::vector<Eigen::Index> order(50);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), std::mt19937_64(5));
  for (std::size_t i = 0; i < order.size(); i += 7) {
    const std::size_t n = std::min<std::size_t>(7, order.size() - i);
    Eigen::MatrixXd chunk(6, static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) chunk.col(static_cast<Eigen::Index>(k)) = x.col(order[i + k]);
    b.absorb(chunk);
  }
  EXPECT_LE(oracle::relative_error(b.sum_b(), a.sum_b()), 1e-9);
  EXPECT_LE(oracle::relative_error(b.sum_A(), a.sum_A()), 1e-9);
}

TEST(Absorb, RejectsBadInputWithoutPartialUpdate) {
  NormalStats s = NormalStats::init_gaussian(4, {8, 1.0, 0}, LedoitWolfAlpha{4});
  const NormalStats before = s;
  EXPECT_THROW(s.absorb(Eigen::MatrixXd::Ones(3, 2)), InputError);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Ones(4, 3);
  bad(2, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(s.absorb(bad), InputError);
  bad(2, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(s.absorb(bad), InputError);
  EXPECT_THROW(s.absorb(Eigen::MatrixXd(4, 0)), InputError);
  EXPECT_EQ(s.count(), before.count());
  EXPECT_EQ(s.version(), before.version());
  EXPECT_EQ(s.sum_b(), before.sum_b());
  EXPECT_EQ(s.sum_A(), before.sum_A());
  EXPECT_EQ(s.reservoir().size(), before.reservoir().size());
}

TEST(Absorb, RequiresTwoSamples) {
  NormalStats s(3, FixedAlpha{0.1});
  EXPECT_THROW(s.absorb(Eigen::MatrixXd::Ones(3, 1)), InputError);
}

TEST(Absorb, VersionStrictlyIncreases) {
  NormalStats s = NormalStats::init_gaussian(3, {4, 1.0, 0}, FixedAlpha{0.1});
  std::uint64_t last = s.version();
  for (int i = 0; i < 5; ++i) {
    s.absorb(oracle::gaussian(3, 2, static_cast<std::uint64_t>(i)));
    EXPECT_GT(s.version(), last);
    last = s.version();
  }
}

TEST(Reservoir, BoundedAndDrawnFromAbsorbedVectors) {
  NormalStats s = NormalStats::init_gaussian(3, {4, 1.0, 0}, LedoitWolfAlpha{10});
  std::vector<Eigen::VectorXd> seen;
  const Eigen::MatrixXd init = init_draws(3, 4, 0, 1.0);
  for (Eigen::Index c = 0; c < 4; ++c) seen.push_back(init.col(c));
  for (int i = 0; i < 30; ++i) {
    const Eigen::MatrixXd x = oracle::gaussian(3, 3, 100 + static_cast<std::uint64_t>(i));
    for (Eigen::Index c = 0; c < 3; ++c) seen.push_back(x.col(c));
    s.absorb(x);
    EXPECT_LE(s.reservoir().size(), 10u);
  }
  EXPECT_EQ(s.reservoir().size(), 10u);
  for (const auto& r : s.reservoir()) {
    EXPECT_TRUE(std::any_of(seen.begin(), seen.end(), [&](const auto& v) { return v == r; }));
  }
}

TEST(Shrink, Endpoints) {
  const Eigen::MatrixXd cov = oracle::random_spd(5, 3);
  EXPECT_EQ(driftgate::shrink(cov, 0.0), cov);
  const Eigen::MatrixXd target = driftgate::shrink(cov, 1.0);
  const double t = cov.trace() / 5.0;
  for (Eigen::Index i = 0; i < 5; ++i) {
    for (Eigen::Index j = 0; j < 5; ++j) EXPECT_EQ(target(i, j), i == j ? t : 0.0);
  }
}

TEST(Shrink, RejectsAsymmetryAndZeroTrace) {
  Eigen::MatrixXd cov = oracle::random_spd(3, 1);
  cov(0, 1) += 1e-3;
  EXPECT_THROW(driftgate::shrink(cov, 0.5), InputError);
  EXPECT_THROW(driftgate::shrink(Eigen::MatrixXd::Zero(3, 3), 0.5), DegenerateModelError);
  EXPECT_THROW(driftgate::shrink(oracle::random_spd(3, 1), 1.5), InputError);
  EXPECT_THROW(driftgate::shrink(oracle::random_spd(3, 1), -0.1), InputError);
}

TEST(Shrink, EigenvaluesAreAffineImages) {
  const Eigen::MatrixXd x = oracle::gaussian(12, 5, 8);
  const Eigen::MatrixXd cov = oracle::covariance(x);  // rank 4
  for (double alpha : {0.01, 0.3, 1.0}) {
    const Eigen::MatrixXd s = driftgate::shrink(cov, alpha);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e0(cov), e1(s);
    const double shift = alpha * cov.trace() / 12.0;
    for (Eigen::Index i = 0; i < 12; ++i) {
      EXPECT_NEAR(e1.eigenvalues()(i), (1 - alpha) * e0.eigenvalues()(i) + shift, 1e-10);
    }
    EXPECT_GT(e1.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(LedoitWolf, MatchesDirectFormula) {
  Eigen::MatrixXd x = oracle::gaussian(16, 500, 44);
  for (Eigen::Index r = 0; r < 16; ++r) x.row(r) *= 0.5 + 0.25 * static_cast<double>(r);
  const Eigen::VectorXd center = oracle::mean(x);
  const double got = driftgate::ledoit_wolf_alpha(x, center);
  EXPECT_NEAR(got, oracle::ledoit_wolf(x, center), 1e-8);
  EXPECT_GE(got, 0.0);
  EXPECT_LE(got, 1.0);
}

TEST(LedoitWolf, PolicyUsesReservoirCenteredAtMean) {
  NormalStats s = NormalStats::init_gaussian(6, {32, 1.0, 1}, LedoitWolfAlpha{40});
  s.absorb(oracle::gaussian(6, 25, 2, 2.0));
  Eigen::MatrixXd r(6, static_cast<Eigen::Index>(s.reservoir().size()));
  for (std::size_t i = 0; i < s.reservoir().size(); ++i) r.col(static_cast<Eigen::Index>(i)) = s.reservoir()[i];
  EXPECT_NEAR(s.alpha(), oracle::ledoit_wolf(r, s.mean()), 1e-10);
}

TEST(LedoitWolf, NoDispersionGivesZero) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(4, 10);
  EXPECT_EQ(driftgate::ledoit_wolf_alpha(x, Eigen::VectorXd::Ones(4)), 0.0);
}

TEST(Factorize, IdentityAndDiagonal) {
  const auto id = oracle::model_with(Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3));
  EXPECT_LE(oracle::relative_error(id.snapshot()->factor().to_dense(), Eigen::MatrixXd::Identity(3, 3)),
            1e-14);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  d(0, 0) = 4;
  d(1, 1) = 1;
  const auto diag = oracle::model_with(d, Eigen::VectorXd::Zero(2));
  const Eigen::MatrixXd l = diag.snapshot()->factor().to_dense();
  EXPECT_NEAR(l(0, 0), 2.0, 1e-14);
  EXPECT_NEAR(l(1, 1), 1.0, 1e-14);
  EXPECT_EQ(l(1, 0), 0.0);
}

TEST(Factorize, ReconstructsRandomSpd) {
  const Eigen::MatrixXd sigma = oracle::random_spd(32, 17);
  const auto s = oracle::model_with(sigma, oracle::gaussian(32, 1, 3).col(0));
  const Eigen::MatrixXd l = s.snapshot()->factor().to_dense();
  EXPECT_LE(oracle::relative_error(l * l.transpose(), s.shrunk_covariance()), 1e-10);
  EXPECT_LE(oracle::relative_error(s.shrunk_covariance(), sigma), 1e-10);
}

TEST(Factorize, RankDeficientWithoutShrinkageIsDegenerate) {
  try {
    NormalStats::init_gaussian(10, {4, 1.0, 0}, FixedAlpha{0.0});
    FAIL() << "expected DegenerateModelError";
  } catch (const DegenerateModelError& e) {
    EXPECT_EQ(e.version(), 0u);
  }
  NormalStats r = NormalStats::init_gaussian(10, {4, 1.0, 0}, FixedAlpha{0.5});
  r.absorb(Eigen::MatrixXd::Ones(10, 1));
  NormalStats degenerate = NormalStats::restore(10, r.count(), 0.0, r.sum_b(), r.sum_A(), {},
                                                FixedAlpha{0.0});
  degenerate.absorb(Eigen::MatrixXd::Ones(10, 1));
  try {
    degenerate.snapshot();
    FAIL() << "expected DegenerateModelError";
  } catch (const DegenerateModelError& e) {
    EXPECT_EQ(e.version(), 1u);
  }
  NormalStats t = NormalStats::init_gaussian(10, {12, 1.0, 0}, FixedAlpha{0.0});
  t.absorb(Eigen::MatrixXd::Zero(10, 1));
  t.absorb(Eigen::MatrixXd::Zero(10, 1));
  EXPECT_NO_THROW(t.snapshot());
}

TEST(Factorize, ShrinkageRescuesRankDeficientCovariance) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (double alpha : {1e-6, 0.1, 1.0}) {
      NormalStats s = NormalStats::init_gaussian(20, {5, 1.0, seed}, FixedAlpha{alpha});
      EXPECT_NO_THROW(s.snapshot()) << alpha;
    }
  }
}

TEST(Snapshot, LazyAndVersioned) {
  NormalStats s = NormalStats::init_gaussian(4, {8, 1.0, 0}, FixedAlpha{0.2});
  const auto a = s.snapshot();
  EXPECT_EQ(s.snapshot(), a);
  s.absorb(oracle::gaussian(4, 1, 9, 5.0));
  const auto b = s.snapshot();
  EXPECT_NE(a, b);
  EXPECT_EQ(a->version(), 0u);
  EXPECT_EQ(b->version(), 1u);
  EXPECT_LE(oracle::relative_error(b->mean(), s.mean()), 0.0);
  const Eigen::MatrixXd l = b->factor().to_dense();
  EXPECT_LE(oracle::relative_error(l * l.transpose(), s.shrunk_covariance()), 1e-12);
}

TEST(Snapshot, ConcurrentReadersShareOneFactorization) {
  NormalStats s = NormalStats::init_gaussian(64, {80, 1.0, 0}, LedoitWolfAlpha{});
  s.absorb(oracle::gaussian(64, 3, 1));
  std::vector<driftgate::SnapshotPtr> got(8);
  {
    std::vector<std::jthread> threads;
    for (std::size_t i = 0; i < got.size(); ++i) {
      threads.emplace_back([&, i] { got[i] = s.snapshot(); });
    }
  }
  for (const auto& g : got) EXPECT_EQ(g, got.front());
}

TEST(Equivariance, OrthogonalRotation) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Eigen::MatrixXd q = oracle::random_orthogonal(16, 50 + seed);
    const Eigen::MatrixXd x = oracle::gaussian(16, 120, seed).array() + 1.0;
    const Eigen::MatrixXd rx = q * x;
    auto seeded = [](const Eigen::MatrixXd& d) {
      return NormalStats::restore(16, 2, 0.0, d.leftCols(2).rowwise().sum(),
                                  d.leftCols(2) * d.leftCols(2).transpose(), {d.col(0), d.col(1)},
                                  LedoitWolfAlpha{256});
    };
    NormalStats a = seeded(x);
    NormalStats b = seeded(rx);
    for (Eigen::Index c = 2; c + 6 <= 120; c += 6) {
      a.absorb(x.middleCols(c, 6));
      b.absorb(rx.middleCols(c, 6));
    }
    EXPECT_LE(oracle::relative_error(b.mean(), q * a.mean()), 1e-8);
    EXPECT_LE(oracle::relative_error(b.shrunk_covariance(),
                                     q * a.shrunk_covariance() * q.transpose()),
              1e-8);
    EXPECT_NEAR(b.alpha(), a.alpha(), 1e-8);
    EXPECT_NEAR(b.shrunk_covariance().trace(), a.shrunk_covariance().trace(),
                1e-8 * a.shrunk_covariance().trace());
  }
}
