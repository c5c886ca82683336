#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace blockboot {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// One site per row; columns are spatial coordinates in region units.
using SiteMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Point on the integer lattice Z^d.
using LatticePoint = std::vector<long>;

inline std::span<const double> site_at(const SiteMatrix& sites, Eigen::Index i) {
  return {sites.row(i).data(), static_cast<std::size_t>(sites.cols())};
}

// Error categories map onto CLI exit codes (config 2, data 3, numeric 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace blockboot
