// SPDX-License-Identifier: Apache-2.0
#ifndef NPFORM_ERROR_HPP
#define NPFORM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace npf {

enum class ErrorCode {
  InvalidArgument = 1,
  ShapeMismatch,
  Precondition,
  NonConvergence,
  Config,
  Internal,
};

/// Base exception for the library. The C API maps `code()` onto npf_status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) throw Error(code, msg);
}

}  // namespace npf

#endif  // NPFORM_ERROR_HPP
