#include <cmath>

#include "honestsets/simlab.hpp"

namespace honestsets::simlab {

namespace {
constexpr double kToeplitzPhi = 0.5;
constexpr double kExpdecayPhi = 0.4;
constexpr double kEquiRho = 0.8;
}  // namespace

CovarianceFactor::CovarianceFactor(Design design, Index p) : design_(design), p_(p) {
  require(p >= 1, "CovarianceFactor: p must be >= 1");
  if (design_ == Design::expdecay) {
    // Precision K_ij = phi^|i-j| inverts in closed form to the tridiagonal
    // Sigma = T / (1 - phi^2), T = tridiag(-phi; 1, 1+phi^2, ..., 1+phi^2, 1; -phi).
    const double phi = kExpdecayPhi;
    const double scale = 1.0 / (1.0 - phi * phi);
    Vector d(p);
    for (Index i = 0; i < p; ++i) {
      const bool interior = (i > 0 && i + 1 < p);
      d[i] = scale * (interior ? 1.0 + phi * phi : 1.0);
    }
    if (p == 1) d[0] = scale;  // single entry: K = [1], Sigma = [1]... see below
    const double e = -scale * phi;

    chol_diag_.resize(p);
    chol_sub_.resize(p > 1 ? p - 1 : 0);
    chol_diag_[0] = std::sqrt(d[0]);
    for (Index i = 1; i < p; ++i) {
      chol_sub_[i - 1] = e / chol_diag_[i - 1];
      chol_diag_[i] = std::sqrt(d[i] - chol_sub_[i - 1] * chol_sub_[i - 1]);
    }
    if (p == 1) chol_diag_[0] = 1.0;  // Sigma = K^{-1} = 1
  }
}

Vector CovarianceFactor::sample_row(numkit::RngEngine& eng) const {
  Vector x(p_);
  switch (design_) {
    case Design::toeplitz: {
      const double c = std::sqrt(1.0 - kToeplitzPhi * kToeplitzPhi);
      x[0] = eng.normal();
      for (Index j = 1; j < p_; ++j) x[j] = kToeplitzPhi * x[j - 1] + c * eng.normal();
      return x;
    }
    case Design::expdecay: {
      double z_prev = eng.normal();
      x[0] = chol_diag_[0] * z_prev;
      for (Index j = 1; j < p_; ++j) {
        const double z = eng.normal();
        x[j] = chol_sub_[j - 1] * z_prev + chol_diag_[j] * z;
        z_prev = z;
      }
      return x;
    }
    case Design::equicorr: {
      const double z0 = eng.normal();
      const double a = std::sqrt(kEquiRho);
      const double c = std::sqrt(1.0 - kEquiRho);
      for (Index j = 0; j < p_; ++j) x[j] = a * z0 + c * eng.normal();
      return x;
    }
  }
  return x;
}

Matrix CovarianceFactor::dense_factor() const {
  switch (design_) {
    case Design::toeplitz: {
      Matrix L = Matrix::Zero(p_, p_);
      const double c = std::sqrt(1.0 - kToeplitzPhi * kToeplitzPhi);
      for (Index i = 0; i < p_; ++i) {
        L(i, 0) = std::pow(kToeplitzPhi, static_cast<double>(i));
        for (Index j = 1; j <= i; ++j) {
          L(i, j) = c * std::pow(kToeplitzPhi, static_cast<double>(i - j));
        }
      }
      return L;
    }
    case Design::expdecay: {
      Matrix L = Matrix::Zero(p_, p_);
      for (Index i = 0; i < p_; ++i) {
        L(i, i) = chol_diag_[i];
        if (i > 0) L(i, i - 1) = chol_sub_[i - 1];
      }
      return L;
    }
    case Design::equicorr: {
      Matrix L = Matrix::Zero(p_, p_ + 1);
      const double a = std::sqrt(kEquiRho);
      const double c = std::sqrt(1.0 - kEquiRho);
      for (Index i = 0; i < p_; ++i) {
        L(i, 0) = a;
        L(i, i + 1) = c;
      }
      return L;
    }
  }
  return Matrix();
}

double CovarianceFactor::sigma_entry(Index i, Index j) const {
  switch (design_) {
    case Design::toeplitz:
      return std::pow(kToeplitzPhi, static_cast<double>(std::abs(i - j)));
    case Design::expdecay: {
      if (p_ == 1) return 1.0;
      const double phi = kExpdecayPhi;
      const double scale = 1.0 / (1.0 - phi * phi);
      if (i == j) {
        const bool interior = (i > 0 && i + 1 < p_);
        return scale * (interior ? 1.0 + phi * phi : 1.0);
      }
      if (std::abs(i - j) == 1) return -scale * phi;
      return 0.0;
    }
    case Design::equicorr:
      return (i == j) ? 1.0 : kEquiRho;
  }
  return 0.0;
}

CovarianceFactor build_covariance(Design design, Index p) { return CovarianceFactor(design, p); }

SampledData sample_dataset(const SimConfig& config, numkit::RngEngine& eng) {
  require(config.s <= config.p, "sample_dataset: s must be <= p");
  const Index n = config.n;
  const Index p = config.p;
  const CovarianceFactor factor(config.design, p);

  auto draw_half = [&]() {
    Matrix X(n, p);
    for (Index i = 0; i < n; ++i) X.row(i) = factor.sample_row(eng).transpose();
    for (Index j = 0; j < p; ++j) {
      const double norm = X.col(j).norm();
      if (norm > 0.0) X.col(j) *= std::sqrt(static_cast<double>(n)) / norm;
    }
    return X;
  };

  SampledData out;
  out.eval.X = draw_half();
  out.fit.X = draw_half();
  out.eval.sigma2 = out.fit.sigma2 = config.sigma2;

  out.beta = Vector::Zero(p);
  if (config.s > 0) {
    const IndexSet supp = eng.sample_without_replacement(p, config.s);
    if (config.beta_mode == BetaMode::uniform) {
      for (Index idx : supp) out.beta[idx] = eng.uniform(-config.b, config.b);
    } else {
      const int strong = (config.s + 1) / 2;
      for (int i = 0; i < config.s; ++i) {
        out.beta[supp[static_cast<std::size_t>(i)]] =
            (i < strong) ? eng.uniform(-config.b, config.b) : eng.uniform(-0.2, 0.2);
      }
    }
  }

  const double sigma = std::sqrt(config.sigma2);
  out.eval.y = out.eval.X * out.beta;
  out.fit.y = out.fit.X * out.beta;
  for (Index i = 0; i < n; ++i) {
    out.eval.y[i] += sigma * eng.normal();
    out.fit.y[i] += sigma * eng.normal();
  }
  return out;
}

}  // namespace honestsets::simlab
