#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace honestsets {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using IndexSet = std::vector<Index>;  // sorted, unique indices into [0, p)

// Thrown when a simulation-based calibration cannot produce a usable constant.
class calibration_error : public std::runtime_error {
 public:
  explicit calibration_error(const std::string& what) : std::runtime_error(what) {}
};

// (X, y, sigma^2) triple of the Gaussian linear model.
struct Dataset {
  Matrix X;
  Vector y;
  double sigma2 = 1.0;

  Index n() const { return X.rows(); }
  Index p() const { return X.cols(); }
};

inline void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

inline void require_domain(bool cond, const char* msg) {
  if (!cond) throw std::domain_error(msg);
}

}  // namespace honestsets
