#pragma once

#include <stdexcept>
#include <string>

namespace uqmc {

/// Bad argument or violated precondition (invalid parameters, n too small, ...).
class invalid_argument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The estimator could not deliver what was asked of it: budget too small,
/// bias target unmet, no usable model left after validation.
class estimator_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite model output, failed quadrature, stalled Newton iteration,
/// MCMC chain that never moves.
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw invalid_argument(what);
}

}  // namespace detail
}  // namespace uqmc
