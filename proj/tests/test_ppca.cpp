#include <doctest.h>

#include "mnarppca/ppca.hpp"
#include "mnarppca/rng.hpp"
#include "oracle.hpp"

using namespace mnarppca;
using oracle::kind_of;

TEST_CASE("loadings recover the low-rank part exactly") {
  for (std::uint64_t draw = 0; draw < 20; ++draw) {
    const PpcaParams params = random_params(7, 3, 0.4, draw, 100 + draw);
    const Matrix sigma = population_covariance(params);
    const LoadingEstimate est = estimate_loadings(sigma, 3, 0.4);
    const Matrix bb = params.loadings.transpose() * params.loadings;
    CHECK((est.b_hat.transpose() * est.b_hat - bb).cwiseAbs().maxCoeff() < 1e-9 * bb.cwiseAbs().maxCoeff());
    CHECK((est.gamma() - sigma).cwiseAbs().maxCoeff() < 1e-9 * sigma.cwiseAbs().maxCoeff());
    CHECK(est.eigenvalues.tail(4).cwiseAbs().maxCoeff() < 1e-9 * est.eigenvalues(0));
    for (Index k = 0; k < 3; ++k) {
      Index arg = 0;
      est.b_hat.row(k).cwiseAbs().maxCoeff(&arg);
      CHECK(est.b_hat(k, arg) > 0.0);
    }
  }
}

TEST_CASE("residual spectrum matches the reconstruction error") {
  const Matrix a = Matrix::Random(5, 5);
  const Matrix s = a * a.transpose();
  const LoadingEstimate est = estimate_loadings(s, 2, 0.1);
  Matrix shifted = s;
  shifted.diagonal().array() -= 0.1;
  const double resid = (shifted - est.b_hat.transpose() * est.b_hat).norm();
  CHECK(resid == doctest::Approx(est.eigenvalues.tail(3).norm()).epsilon(1e-10));
}

TEST_CASE("pure noise gives zero loadings") {
  const LoadingEstimate est = estimate_loadings(Matrix::Identity(4, 4) * 0.5, 2, 0.5);
  CHECK(est.b_hat.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("loading input checks") {
  const Matrix s = Matrix::Identity(4, 4);
  CHECK(kind_of([&] { estimate_loadings(s, 4, 0.0); }) == ErrorKind::OutOfRange);
  CHECK(kind_of([&] { estimate_loadings(s, 0, 0.0); }) == ErrorKind::OutOfRange);
  Matrix ns = s;
  ns(0, 1) = 0.3;
  CHECK(kind_of([&] { estimate_loadings(ns, 2, 0.0); }) == ErrorKind::NonSymmetric);
}

TEST_CASE("noise from trailing eigenvalues") {
  const PpcaParams params = random_params(8, 2, 0.36, 1, 2);
  CHECK(estimate_noise(population_covariance(params), 2) == doctest::Approx(0.36).epsilon(1e-10));
  CHECK(estimate_noise(Matrix::Zero(3, 3), 1) == 0.0);
  CHECK(kind_of([] { estimate_noise(Matrix::Identity(3, 3), 3); }) == ErrorKind::OutOfRange);
}

TEST_CASE("imputation is exact without noise") {
  const PpcaParams params = random_params(8, 2, 0.0, 3, 4);
  const Matrix y = sample_ppca(params, 200, 5);
  const Dataset data = oracle::self_masked_dataset(params, y, {0, 1, 2}, {3, 4, 5, 6, 7}, 0.5, -3.0, 6);
  LoadingEstimate truth;
  truth.b_hat = params.loadings;
  truth.r = 2;
  truth.sigma2 = 0.0;
  const Matrix out = impute(data, params.alpha, truth);
  CHECK((out - y).cwiseAbs().maxCoeff() < 1e-8 * y.cwiseAbs().maxCoeff());
}

TEST_CASE("imputation matches the gaussian conditional") {
  const PpcaParams params = random_params(4, 1, 0.5, 7, 8);
  Matrix y(1, 4);
  y << 0.3, 1.1, -0.4, 2.0;
  Mask omega = Mask::Ones(1, 4);
  omega(0, 0) = 0;
  omega(0, 1) = 0;  // a missing non-MNAR cell is filled by the same conditional
  const Dataset data = Dataset::from_complete(y, omega, {0}, {2, 3});
  LoadingEstimate est;
  est.b_hat = params.loadings;
  est.r = 1;
  est.sigma2 = 0.5;
  const Matrix out = impute(data, params.alpha, est);
  const Matrix g = est.gamma();
  const IndexList cond{2, 3};
  Matrix gcc(2, 2);
  Vector gmc(2), x(2);
  for (Index a = 0; a < 2; ++a) {
    x(a) = y(0, cond[a]) - params.alpha(cond[a]);
    gmc(a) = g(0, cond[a]);
    for (Index b = 0; b < 2; ++b) gcc(a, b) = g(cond[a], cond[b]);
  }
  CHECK(out(0, 0) == doctest::Approx(params.alpha(0) + gmc.dot(gcc.ldlt().solve(x))).epsilon(1e-12));
  CHECK(out(0, 2) == y(0, 2));
}

TEST_CASE("imputation keeps observed cells") {
  Rng rng(1);
  const PpcaParams params = random_params(6, 2, 0.2, 1, 2);
  const Matrix y = sample_ppca(params, 300, 3);
  std::bernoulli_distribution coin(0.3);
  Mask omega = Mask::Ones(300, 6);
  for (Index i = 0; i < 300; ++i)
    for (Index j = 0; j < 6; ++j) omega(i, j) = coin(rng) ? 0 : 1;
  const Dataset data = Dataset::from_complete(y, omega, {0, 1}, {2, 3, 4, 5});
  LoadingEstimate est = estimate_loadings(population_covariance(params), 2, 0.2);
  const Matrix out = impute(data, params.alpha, est);
  for (Index i = 0; i < 300; ++i)
    for (Index j = 0; j < 6; ++j)
      if (omega(i, j)) CHECK(out(i, j) == y(i, j));
  CHECK(out.allFinite());
}

TEST_CASE("noise reference falls back to the non-MNAR block") {
  const PpcaParams params = random_params(6, 2, 0.3, 1, 2);
  const Matrix y = sample_ppca(params, 100, 3);
  Mask omega = Mask::Ones(100, 6);
  for (Index i = 0; i < 96; ++i) omega(i, i % 2) = 0;
  const Dataset data = Dataset::from_complete(y, omega, {0, 1}, {2, 3, 4, 5});
  const Matrix ref = noise_reference_covariance(data, 2);
  CHECK(ref.rows() == 4);
  const Dataset full = oracle::full_dataset(y, {}, {2, 3, 4, 5});
  CHECK(noise_reference_covariance(full, 2).rows() == 6);
}

TEST_CASE("pipeline end to end") {
  const PpcaParams params = random_params(10, 2, 0.01, 11, 12);
  const Matrix y = sample_ppca(params, 1000, 13);
  const Dataset data =
      oracle::self_masked_dataset(params, y, {0, 1, 2, 3, 4, 5, 6}, {7, 8, 9}, 0.5, -2.5, 14);
  const PipelineResult known = mnar_pipeline(data, EstimatorConfig{}, 0.01);
  CHECK(known.sigma2 == 0.01);
  CHECK(known.imputed.allFinite());
  const PipelineResult estimated = mnar_pipeline(data, EstimatorConfig{}, -1.0);
  CHECK(estimated.sigma2 >= 0.0);
  CHECK(estimated.sigma2 < 0.1);
  const PipelineResult mar = mar_pipeline(data, EstimatorConfig{}, 0.01);
  CHECK(mar.imputed.allFinite());
}
