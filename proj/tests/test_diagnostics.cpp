#include "robustvi/diagnostics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "robustvi/models.hpp"
#include "robustvi/rng.hpp"

using namespace robustvi;
using diagnostics::IterateChains;

namespace {

// One-component chains from raw sequences.
IterateChains chains_from(const std::vector<std::vector<double>>& sequences) {
  IterateChains chains(static_cast<int>(sequences.size()), 1);
  for (std::size_t j = 0; j < sequences.size(); ++j) {
    for (double v : sequences[j]) {
      chains.append(static_cast<int>(j), Eigen::VectorXd::Constant(1, v));
    }
  }
  return chains;
}

std::vector<double> normal_sequence(std::int64_t n, double mean, double sd,
                                    std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> dist(mean, sd);
  std::vector<double> out(n);
  for (auto& v : out) {
    v = dist(rng);
  }
  return out;
}

// Direct O(n^2) autocorrelation used as the independent reference.
Eigen::VectorXd direct_autocorrelation(const std::vector<double>& y) {
  const auto n = static_cast<Eigen::Index>(y.size());
  const Eigen::Map<const Eigen::VectorXd> v(y.data(), n);
  const double mean = v.mean();
  Eigen::VectorXd rho(n);
  double c0 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    c0 += (v(i) - mean) * (v(i) - mean);
  }
  c0 /= static_cast<double>(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i + t < n; ++i) {
      acc += (v(i) - mean) * (v(i + t) - mean);
    }
    rho(t) = acc / static_cast<double>(n) / c0;
  }
  return rho;
}

}  // namespace

// ---------------------------------------------------------------------------
// IterateChains

TEST(IterateChains, RejectsNonFiniteAndMismatchedAppends) {
  IterateChains chains(1, 2);
  EXPECT_THROW(chains.append(0, Eigen::VectorXd::Zero(3)), std::invalid_argument);
  Eigen::VectorXd bad(2);
  bad << 1.0, std::numeric_limits<double>::infinity();
  EXPECT_THROW(chains.append(0, bad), std::invalid_argument);
  chains.append(0, Eigen::Vector2d(1.0, 2.0));
  EXPECT_EQ(chains.size(), 1);
  EXPECT_EQ(chains.value(0, 0, 1), 2.0);
}

TEST(IterateChains, WindowAndMean) {
  IterateChains chains(2, 1);
  for (int t = 1; t <= 6; ++t) {
    chains.append(0, Eigen::VectorXd::Constant(1, static_cast<double>(t)));
    chains.append(1, Eigen::VectorXd::Constant(1, static_cast<double>(10 * t)));
  }
  const Eigen::VectorXd window = chains.component_window(0, 0, 3);
  EXPECT_EQ(window(0), 4.0);
  EXPECT_EQ(window(2), 6.0);
  EXPECT_NEAR(chains.window_mean(2)(0), (5 + 6 + 50 + 60) / 4.0, 1e-14);
  EXPECT_NEAR(chains.mean()(0), (21.0 + 210.0) / 12.0, 1e-14);
}

// ---------------------------------------------------------------------------
// Split-Rhat

TEST(SplitRhat, ConstantChainsGiveExactlyOne) {
  const IterateChains chains =
      chains_from({std::vector<double>(40, 2.5), std::vector<double>(40, 2.5)});
  EXPECT_EQ(diagnostics::split_rhat(chains, 40)(0), 1.0);
}

TEST(SplitRhat, ZeroWithinVarianceReturnsLargeSentinel) {
  const IterateChains chains = chains_from({{0.0, 0.0, 1.0, 1.0}});
  EXPECT_GT(diagnostics::split_rhat(chains, 4)(0), 10.0);
}

TEST(SplitRhat, IidChainsStayNearOne) {
  const IterateChains chains = chains_from(
      {normal_sequence(10000, 0.0, 1.0, 100), normal_sequence(10000, 0.0, 1.0, 101)});
  const double rhat = diagnostics::split_rhat(chains, 10000)(0);
  EXPECT_GE(rhat, 1.0);
  EXPECT_LE(rhat, 1.01);
}

TEST(SplitRhat, DetectsMeanOffset) {
  std::vector<std::vector<double>> seqs;
  for (int j = 0; j < 3; ++j) {
    seqs.push_back(normal_sequence(10000, 0.0, 1.0, 200 + j));
  }
  seqs.push_back(normal_sequence(10000, 3.0, 1.0, 203));
  const IterateChains chains = chains_from(seqs);
  EXPECT_GT(diagnostics::split_rhat(chains, 10000)(0), 1.5);
}

TEST(SplitRhat, AffineInvariance) {
  const std::vector<double> base = normal_sequence(2000, 0.3, 1.4, 300);
  std::vector<double> shifted(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    shifted[i] = -2.5 * base[i] + 7.0;
  }
  const double original = diagnostics::split_rhat(chains_from({base}), 2000)(0);
  const double transformed = diagnostics::split_rhat(chains_from({shifted}), 2000)(0);
  EXPECT_NEAR(original, transformed, 1e-12 * original);
}

TEST(SplitRhat, WindowValidation) {
  const IterateChains chains = chains_from({normal_sequence(100, 0.0, 1.0, 1)});
  EXPECT_THROW(diagnostics::split_rhat(chains, 7), std::invalid_argument);
  EXPECT_THROW(diagnostics::split_rhat(chains, 2), std::invalid_argument);
  EXPECT_THROW(diagnostics::split_rhat(chains, 200), std::invalid_argument);
}

TEST(SplitRhat, ConvergesToOneOnIidChainsAcrossSeeds) {
  int below_cutoff = 0;
  for (int seed = 0; seed < 100; ++seed) {
    std::vector<std::vector<double>> seqs;
    for (int j = 0; j < 4; ++j) {
      seqs.push_back(normal_sequence(10000, 0.0, 1.0, 1000 + 7 * seed + j));
    }
    if (diagnostics::split_rhat(chains_from(seqs), 10000)(0) < 1.01) {
      ++below_cutoff;
    }
  }
  EXPECT_GE(below_cutoff, 99);
}

// ---------------------------------------------------------------------------
// Autocorrelation

TEST(Autocorrelation, LagZeroIsOne) {
  const std::vector<double> seq = normal_sequence(128, 0.0, 1.0, 7);
  EXPECT_EQ(diagnostics::autocorrelation(seq)(0), 1.0);
}

TEST(Autocorrelation, IidSequenceHasSmallLagOne) {
  const std::vector<double> seq = normal_sequence(10000, 0.0, 1.0, 8);
  EXPECT_LT(std::abs(diagnostics::autocorrelation(seq)(1)), 0.05);
}

TEST(Autocorrelation, Ar1RecoverasCoefficient) {
  const std::vector<double> seq = oracles::ar1_sequence(0.9, 1.0, 100000, 9);
  EXPECT_NEAR(diagnostics::autocorrelation(seq)(1), 0.9, 0.02);
}

TEST(Autocorrelation, TransformMatchesDirectComputation) {
  const std::vector<double> seq = normal_sequence(500, 0.2, 2.0, 10);
  const Eigen::VectorXd fft_rho = diagnostics::autocorrelation(seq);
  const Eigen::VectorXd direct = direct_autocorrelation(seq);
  EXPECT_LT((fft_rho - direct).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Autocorrelation, ConstantSequenceIsDegenerate) {
  bool degenerate = false;
  const std::vector<double> seq(64, 3.0);
  const Eigen::VectorXd rho = diagnostics::autocorrelation(seq, &degenerate);
  EXPECT_TRUE(degenerate);
  EXPECT_EQ(rho(0), 1.0);
  EXPECT_EQ(rho.tail(63).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Autocorrelation, TooShort) {
  const std::vector<double> seq{1.0, 2.0, 3.0};
  EXPECT_THROW(diagnostics::autocorrelation(seq), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// ESS / MCSE

TEST(Ess, IidChainsGiveNominalSampleSize) {
  const IterateChains chains = chains_from(
      {normal_sequence(5000, 0.0, 1.0, 20), normal_sequence(5000, 0.0, 1.0, 21)});
  const double ess = diagnostics::ess(chains, 5000)(0);
  EXPECT_NEAR(ess, 10000.0, 1000.0);
}

TEST(Ess, Ar1MatchesTheory) {
  const IterateChains chains = chains_from({oracles::ar1_sequence(0.9, 1.0, 100000, 22)});
  const double ess = diagnostics::ess(chains, 100000)(0);
  const double expected = 100000.0 * (1.0 - 0.9) / (1.0 + 0.9);
  EXPECT_NEAR(ess / expected, 1.0, 0.2);
}

TEST(Ess, AlternatingChainIsSuperEfficient) {
  std::vector<double> alternating(1000);
  for (std::size_t i = 0; i < alternating.size(); ++i) {
    alternating[i] = i % 2 == 0 ? 1.0 : -1.0;
  }
  const IterateChains chains = chains_from({alternating});
  EXPECT_GT(diagnostics::ess(chains, 1000)(0), 1000.0);
}

TEST(Ess, DegenerateWindowReportsNominalDraws) {
  const IterateChains chains = chains_from({std::vector<double>(200, 1.0)});
  EXPECT_EQ(diagnostics::ess(chains, 200)(0), 200.0);
}

TEST(Ess, AffineInvariance) {
  const std::vector<double> base = oracles::ar1_sequence(0.5, 1.0, 4000, 23);
  std::vector<double> shifted(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    shifted[i] = 4.0 * base[i] - 1.0;
  }
  const double a = diagnostics::ess(chains_from({base}), 4000)(0);
  const double b = diagnostics::ess(chains_from({shifted}), 4000)(0);
  EXPECT_NEAR(a, b, 1e-9 * a);
}

TEST(Mcse, IidMatchesRootNScaling) {
  const double sd = 2.5;
  const IterateChains chains = chains_from(
      {normal_sequence(2000, 1.0, sd, 24), normal_sequence(2000, 1.0, sd, 25)});
  const double mcse = diagnostics::mcse(chains, 2000)(0);
  EXPECT_NEAR(mcse / (sd / std::sqrt(4000.0)), 1.0, 0.15);
}

TEST(Mcse, DoublingWindowShrinksBySqrtTwo) {
  const std::vector<double> seq = normal_sequence(4000, 0.0, 1.0, 26);
  const IterateChains chains = chains_from({seq});
  const double narrow = diagnostics::mcse(chains, 2000)(0);
  const double wide = diagnostics::mcse(chains, 4000)(0);
  EXPECT_NEAR(narrow / wide, std::sqrt(2.0), 0.35);
}

TEST(Mcse, ConstantChainIsZero) {
  const IterateChains chains = chains_from({std::vector<double>(100, -4.0)});
  EXPECT_EQ(diagnostics::mcse(chains, 100)(0), 0.0);
}

TEST(Mcse, EquivariantUnderScaling) {
  const std::vector<double> base = oracles::ar1_sequence(0.3, 1.0, 4000, 27);
  std::vector<double> scaled(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    scaled[i] = -3.0 * base[i] + 2.0;
  }
  const double a = diagnostics::mcse(chains_from({base}), 4000)(0);
  const double b = diagnostics::mcse(chains_from({scaled}), 4000)(0);
  EXPECT_NEAR(3.0 * a, b, 1e-9 * b);
}

// ---------------------------------------------------------------------------
// Generalized Pareto fit

TEST(GpdFit, ExponentialSampleHasZeroShape) {
  const std::vector<double> sample = oracles::gpd_sample(0.0, 1.0, 2000, 30);
  EXPECT_NEAR(diagnostics::gpd_fit(sample).k, 0.0, 0.1);
}

TEST(GpdFit, RecoversPositiveShape) {
  const std::vector<double> sample = oracles::gpd_sample(0.5, 1.0, 2000, 31);
  EXPECT_NEAR(diagnostics::gpd_fit(sample).k, 0.5, 0.1);
}

TEST(GpdFit, UniformSampleHasShapeMinusOne) {
  const std::vector<double> sample = oracles::gpd_sample(-1.0, 1.0, 2000, 32);
  EXPECT_NEAR(diagnostics::gpd_fit(sample).k, -1.0, 0.15);
}

TEST(GpdFit, MedianBiasIsSmall) {
  for (double truth : {-0.5, 0.5}) {
    std::vector<double> estimates;
    for (int rep = 0; rep < 200; ++rep) {
      const std::vector<double> sample =
          oracles::gpd_sample(truth, 1.0, 2000, 5000 + 13 * rep + (truth > 0 ? 1 : 0));
      estimates.push_back(diagnostics::gpd_fit(sample).k);
    }
    std::nth_element(estimates.begin(), estimates.begin() + 100, estimates.end());
    EXPECT_NEAR(estimates[100], truth, 0.05) << "true k = " << truth;
  }
}

TEST(GpdFit, ScaleRecovery) {
  const std::vector<double> sample = oracles::gpd_sample(0.0, 3.0, 4000, 33);
  EXPECT_NEAR(diagnostics::gpd_fit(sample).sigma, 3.0, 0.3);
}

TEST(GpdFit, Errors) {
  const std::vector<double> few(19, 1.0);
  EXPECT_THROW(diagnostics::gpd_fit(few), std::invalid_argument);
  std::vector<double> with_zero(30, 1.0);
  with_zero[4] = 0.0;
  EXPECT_THROW(diagnostics::gpd_fit(with_zero), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Iterate tail diagnostics

TEST(KhatIterates, GaussianIteratesHaveLightTails) {
  const IterateChains chains = chains_from({normal_sequence(10000, 0.0, 1.0, 40)});
  const diagnostics::TailIndexReport report = diagnostics::khat_iterates(chains, 10000);
  EXPECT_LT(report.khat_upper(0), 0.3);
  EXPECT_LT(report.khat_lower(0), 0.3);
  EXPECT_FALSE(report.problematic);
}

TEST(KhatIterates, StudentT2HasTailIndexHalf) {
  // Median over seeds: a single fit scatters with sd ~ (1+k)/sqrt(tail).
  std::vector<double> upper;
  std::vector<double> lower;
  for (int seed = 0; seed < 11; ++seed) {
    Rng rng = make_rng(41 + seed);
    std::student_t_distribution<double> t2(2.0);
    std::vector<double> seq(20000);
    for (auto& v : seq) {
      v = t2(rng);
    }
    const diagnostics::TailIndexReport report =
        diagnostics::khat_iterates(chains_from({seq}), 20000);
    upper.push_back(report.khat_upper(0));
    lower.push_back(report.khat_lower(0));
  }
  std::nth_element(upper.begin(), upper.begin() + 5, upper.end());
  std::nth_element(lower.begin(), lower.begin() + 5, lower.end());
  EXPECT_NEAR(upper[5], 0.5, 0.15);
  EXPECT_NEAR(lower[5], 0.5, 0.15);
}

TEST(KhatIterates, RequiresEnoughIterates) {
  const IterateChains chains = chains_from({normal_sequence(99, 0.0, 1.0, 42)});
  EXPECT_THROW(diagnostics::khat_iterates(chains, 99), std::invalid_argument);
}

TEST(TailSampleCount, MatchesConvention) {
  EXPECT_EQ(diagnostics::tail_sample_count(100), 20);
  EXPECT_EQ(diagnostics::tail_sample_count(2000), 135);  // ceil(3 sqrt(2000))
  EXPECT_EQ(diagnostics::tail_sample_count(25), 5);
}

// ---------------------------------------------------------------------------
// Importance-weight screen

TEST(PsisKhat, ExactProposalGivesStronglyNegativeShape) {
  const models::GaussianModel model = models::GaussianModel::standard(2);
  const families::VariationalParams params =
      families::standard(families::FamilyKind::full_rank, 2);
  Rng rng = make_rng(50);
  EXPECT_LT(diagnostics::psis_khat(model, params, 2000, rng), 0.0);
}

TEST(PsisKhat, UnderdispersedProposalIsHeavyTailed) {
  const models::GaussianModel model = models::GaussianModel::standard(1);
  families::VariationalParams params = families::standard(families::FamilyKind::mean_field, 1);
  params.scale_unconstrained << std::log(0.5);
  Rng rng = make_rng(51);
  EXPECT_GT(diagnostics::psis_khat(model, params, 4000, rng), 0.5);
}

TEST(PsisKhat, OverdispersedProposalIsWellBehaved) {
  const models::GaussianModel model = models::GaussianModel::standard(1);
  families::VariationalParams params = families::standard(families::FamilyKind::mean_field, 1);
  params.scale_unconstrained << std::log(2.0);
  Rng rng = make_rng(52);
  EXPECT_LT(diagnostics::psis_khat(model, params, 4000, rng), 0.5);
}

TEST(PsisKhat, RequiresMinimumDraws) {
  const models::GaussianModel model = models::GaussianModel::standard(1);
  const families::VariationalParams params =
      families::standard(families::FamilyKind::mean_field, 1);
  Rng rng = make_rng(53);
  EXPECT_THROW(diagnostics::psis_khat(model, params, 50, rng), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Report assembly

TEST(Report, AggregatesAreConsistent) {
  IterateChains chains(2, 2);
  Rng rng = make_rng(60);
  std::normal_distribution<double> dist;
  for (int t = 0; t < 600; ++t) {
    for (int j = 0; j < 2; ++j) {
      chains.append(j, Eigen::Vector2d(dist(rng), 5.0));  // second component constant
    }
  }
  const diagnostics::DiagnosticsReport report = diagnostics::compute_report(chains, 600);
  EXPECT_EQ(report.max_rhat, report.rhat.maxCoeff());
  EXPECT_EQ(report.min_ess, report.ess.minCoeff());
  EXPECT_TRUE(report.degenerate[1]);
  EXPECT_FALSE(report.degenerate[0]);
  EXPECT_EQ(report.mcse(1), 0.0);
  EXPECT_EQ(report.rhat(1), 1.0);
  EXPECT_EQ(report.ess(1), 1200.0);
  ASSERT_EQ(report.autocorr.size(), 2u);
  EXPECT_LE(report.autocorr[0].size(), 101);
  EXPECT_EQ(report.autocorr[0](0), 1.0);
  EXPECT_FALSE(report.tail_problematic);
}
