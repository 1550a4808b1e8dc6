#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sgdkf/filters.hpp"
#include "sgdkf/numerics.hpp"
#include "sgdkf/scenario.hpp"
#include "test_support.hpp"

using namespace sgdkf;
using sgdkf::testing_support::default_cell;
using sgdkf::testing_support::default_config;

namespace {

StateEstimate state_prior(double soc) {
  StateEstimate e;
  e.mean = ElectrochemicalState{soc, 0.0, 0.0, 0.0, 0.0}.as_vector();
  e.covariance = Vector5(1e-4, 1e-8, 1e-8, 1e-2, 1e-2).asDiagonal();
  return e;
}

ThetaEstimate theta_prior(const ThetaVector& th, double rel_std) {
  ThetaEstimate e;
  e.mean = th.as_vector();
  e.covariance = (rel_std * e.mean).cwiseAbs2().asDiagonal();
  return e;
}

NoiseConfig default_noise_config() { return default_config().noise.to_noise_config(); }

bool is_psd(const Matrix5& m) {
  return numerics::is_symmetric(m) &&
         Eigen::SelfAdjointEigenSolver<Matrix5>(m).eigenvalues().minCoeff() >= -1e-14 * m.norm();
}

}  // namespace

TEST(ScalarToy, MatchesHandComputedStep) {
  // a = 0.9, c = 1, q = 0.01, r = 0.1, x0 = 1, P0 = 1, y = 0.5:
  //   x- = 0.9, P- = 0.82, S = 0.92, K = 0.82/0.92, x+ = 0.9 + K (0.5 - 0.9),
  //   P+ = (1 - K) P- = 0.082/0.92.
  using E1 = GaussianEstimate<1>;
  const E1 post0{Eigen::Matrix<double, 1, 1>(1.0), Eigen::Matrix<double, 1, 1>(1.0)};
  const Eigen::Matrix<double, 1, 1> a(0.9);
  const E1 prior = ekf_predict<1>(post0, a * post0.mean, a, Eigen::Matrix<double, 1, 1>(0.01));
  EXPECT_DOUBLE_EQ(prior.mean(0), 0.9);
  EXPECT_DOUBLE_EQ(prior.covariance(0, 0), 0.82);
  for (CovarianceForm form : {CovarianceForm::Joseph, CovarianceForm::Short}) {
    const auto up = scalar_measurement_update<1>(prior, Eigen::Matrix<double, 1, 1>(1.0), 0.5 - prior.mean(0), 0.1,
                                                 form);
    EXPECT_NEAR(up.gain(0), 0.891304347826087, 1e-15);
    EXPECT_NEAR(up.posterior.mean(0), 0.5434782608695652, 1e-15);
    EXPECT_NEAR(up.posterior.covariance(0, 0), 0.08913043478260864, 1e-15);
    EXPECT_NEAR(up.innovation_variance, 0.92, 1e-15);
  }
}

TEST(ScalarUpdate, RejectsNonPositiveInnovationVariance) {
  using E1 = GaussianEstimate<1>;
  const E1 prior{Eigen::Matrix<double, 1, 1>(0.0), Eigen::Matrix<double, 1, 1>(0.0)};
  try {
    scalar_measurement_update<1>(prior, Eigen::Matrix<double, 1, 1>(1.0), 0.1, 0.0, CovarianceForm::Joseph);
    FAIL() << "expected SingularInnovationCovariance";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingularInnovationCovariance);
  }
}

TEST(JosephUpdate, ZeroGainAndOptimalGainAgreement) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix5 l;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) l(i, j) = g(rng);
  const Matrix5 p = l * l.transpose() + Matrix5::Identity();
  const RowVector5 c(0.7, -0.1, 0.3, 0.05, 0.02);
  const double r = 0.3;

  EXPECT_TRUE(joseph_update(p, Vector5::Zero(), c, r).isApprox(p, 1e-15));

  const Vector5 k = p * c.transpose() / ((c * p * c.transpose())(0, 0) + r);
  const Matrix5 joseph = joseph_update(p, k, c, r);
  const Matrix5 short_form = short_form_update(p, k, c);
  EXPECT_LE((joseph - short_form).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_TRUE(is_psd(joseph));
  EXPECT_EQ(joseph, joseph.transpose());
}

TEST(JosephUpdate, StaysPsdForSuboptimalGain) {
  const Matrix5 p = Vector5(1e-4, 1e-8, 1e-8, 1e-2, 1e-2).asDiagonal();
  const RowVector5 c(0.7, 2.0, -1.5, -6e-6, -6e-6);
  const Vector5 k(5.0, -3.0, 1.0, 1e3, -1e3);
  EXPECT_TRUE(is_psd(joseph_update(p, k, c, 2.5e-5)));
}

TEST(StateEkf, DistrustedMeasurement) {
  const CellParameters p = default_cell();
  const ThetaVector th = nominal_theta(p);
  NoiseConfig noise = default_noise_config();
  noise.r_meas = 1e12;
  const StateStepResult st = state_ekf_step(state_prior(0.8), th, p, 2.9, 3.5, noise);
  EXPECT_LE(st.gain.norm(), 1e-9);
  EXPECT_LE((st.posterior.mean - st.prior.mean).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(StateEkf, ZeroInnovationLeavesPredictedMean) {
  const CellParameters p = default_cell();
  const ThetaVector th = nominal_theta(p);
  const StateEstimate prior = state_prior(0.8);
  const ElectrochemicalState predicted = step_state(ElectrochemicalState::from_vector(prior.mean), th, p, 2.9);
  const double y = terminal_voltage(predicted, th, p, 2.9);
  const StateStepResult st = state_ekf_step(prior, th, p, 2.9, y, default_noise_config());
  EXPECT_EQ(st.innovation, 0.0);
  EXPECT_EQ(st.posterior.mean, predicted.as_vector());
  EXPECT_EQ(st.prior.mean, predicted.as_vector());
}

TEST(StateEkf, JosephAndShortFormAgree) {
  const CellParameters p = default_cell();
  const ThetaVector th = nominal_theta(p);
  FilterOptions short_form;
  short_form.covariance_form = CovarianceForm::Short;
  const auto a = state_ekf_step(state_prior(0.7), th, p, 2.9, 3.7, default_noise_config());
  const auto b = state_ekf_step(state_prior(0.7), th, p, 2.9, 3.7, default_noise_config(), short_form);
  EXPECT_EQ(a.posterior.mean, b.posterior.mean);
  EXPECT_LE((a.posterior.covariance - b.posterior.covariance).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(StateEkf, NumericStateJacobianMatchesAnalytic) {
  const CellParameters p = default_cell();
  const ThetaVector th = nominal_theta(p);
  FilterOptions numeric;
  numeric.numeric_state_jacobian = true;
  const auto a = state_ekf_step(state_prior(0.7), th, p, 2.9, 3.7, default_noise_config());
  const auto b = state_ekf_step(state_prior(0.7), th, p, 2.9, 3.7, default_noise_config(), numeric);
  EXPECT_LE((a.jacobian_a - b.jacobian_a).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE((a.posterior.mean - b.posterior.mean).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(StateEkf, LargerNoiseNeverRaisesGain) {
  const CellParameters p = default_cell();
  const ThetaVector th = nominal_theta(p);
  for (double soc : {0.95, 0.6, 0.2}) {
    NoiseConfig noise = default_noise_config();
    const double k1 = state_ekf_step(state_prior(soc), th, p, 2.9, 3.6, noise).gain.norm();
    noise.r_meas *= 100.0;
    const double k2 = state_ekf_step(state_prior(soc), th, p, 2.9, 3.6, noise).gain.norm();
    EXPECT_LE(k2, k1) << soc;
  }
}

TEST(ParamEkf, NoResidualNoDrift) {
  const CellParameters p = default_cell();
  const ThetaVector th = nominal_theta(p);
  NoiseConfig noise = default_noise_config();
  noise.q_theta = Matrix5::Zero();
  const ThetaEstimate prior = theta_prior(th, 0.01);
  const Vector5 x = ElectrochemicalState{0.6, 1e-4, -1e-4, 30.0, 30.0}.as_vector();
  const double y = terminal_voltage(ElectrochemicalState::from_vector(x), th, p, 2.9);
  const ParamStepResult pr = param_ekf_step(prior, x, p, 2.9, y, noise);
  EXPECT_EQ(pr.residual, 0.0);
  EXPECT_EQ(pr.posterior.mean, prior.mean);
  // A zero residual still carries information: the covariance may only shrink.
  const Matrix5 shrink = prior.covariance - pr.posterior.covariance;
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix5>(shrink).eigenvalues().minCoeff(),
            -1e-15 * prior.covariance.norm());
}

TEST(ParamEkf, InsensitiveOutputIsUnobservableStep) {
  CellParameters p = default_cell();
  p.ocv_p = OcvCurve({0.0, 0.1, 0.5, 1.0}, {4.3, 4.1, 4.1, 3.0});
  p.ocv_n = OcvCurve({0.0, 0.5, 0.95, 1.0}, {0.6, 0.1, 0.1, 0.05});
  const ThetaVector th = nominal_theta(p);
  const NoiseConfig noise = default_noise_config();
  const ThetaEstimate prior = theta_prior(th, 0.01);
  const Vector5 x = ElectrochemicalState{1.0, 0.0, 0.0, 0.0, 0.0}.as_vector();
  const ParamStepResult pr = param_ekf_step(prior, x, p, 0.0, 4.0, noise);
  EXPECT_TRUE(pr.gain.isZero(0.0));
  EXPECT_EQ(pr.posterior.mean, prior.mean);
  EXPECT_LE((pr.posterior.covariance - (prior.covariance + noise.q_theta)).cwiseAbs().maxCoeff(),
            1e-15 * prior.covariance.norm());
}

TEST(ParamEkf, DeterministicReplay) {
  const CellParameters p = default_cell();
  const ThetaEstimate prior = theta_prior(perturb_theta(nominal_theta(p), 0.05), 0.05);
  const Vector5 x = ElectrochemicalState{0.6, 1e-4, -1e-4, 30.0, 30.0}.as_vector();
  const ParamStepResult a = param_ekf_step(prior, x, p, 2.9, 3.61, default_noise_config());
  const ParamStepResult b = param_ekf_step(prior, x, p, 2.9, 3.61, default_noise_config());
  EXPECT_EQ(a.posterior, b.posterior);
  EXPECT_EQ(a.gain, b.gain);
  EXPECT_EQ(a.residual, b.residual);
}

TEST(ParamEkf, CapacityOnlyToyConvergesOnTrueStates) {
  const CellParameters p = default_cell();
  const ThetaVector truth = nominal_theta(p);
  const std::vector<double> profile(2000, p.q_all / 3600.0);
  const TruthTrace trace = simulate_truth(profile, truth, p, 1.0, 0.005, 1234);

  ThetaVector guess = truth;
  guess.q_all *= 1.1;
  ThetaEstimate est;
  est.mean = guess.as_vector();
  est.covariance = Matrix5::Zero();
  est.covariance(2, 2) = std::pow(0.1 * guess.q_all, 2);
  NoiseConfig noise = default_noise_config();
  noise.q_theta = Matrix5::Zero();
  noise.q_theta(2, 2) = 1e-2;

  for (std::size_t k = 0; k < trace.size(); ++k) {
    est = param_ekf_step(est, trace.true_state[k].as_vector(), p, trace.current_a[k], trace.measured_voltage[k],
                         noise)
              .posterior;
    ASSERT_TRUE(is_psd(est.covariance)) << k;
  }
  EXPECT_LE(std::abs(est.mean(2) - truth.q_all), 0.02 * truth.q_all);
  EXPECT_EQ(est.mean(0), truth.d_p);
  EXPECT_EQ(est.mean(3), truth.x_sp0);
}

TEST(ParamEkf, DivergentUpdateIsReported) {
  const CellParameters p = default_cell();
  ThetaEstimate prior = theta_prior(nominal_theta(p), 1.0);
  const Vector5 x = ElectrochemicalState{0.5, 0.0, 0.0, 0.0, 0.0}.as_vector();
  try {
    param_ekf_step(prior, x, p, 2.9, 40.0, default_noise_config());
    FAIL() << "expected ThetaOutOfRange";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ThetaOutOfRange);
  }
}
