#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tabspec {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Raised for contract violations and unrecoverable input problems.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Partition of processed columns into original features (one-hot groups,
/// singletons for continuous columns).
using Groups = std::vector<std::vector<std::size_t>>;

}  // namespace tabspec
