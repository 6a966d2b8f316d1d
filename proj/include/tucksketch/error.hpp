#pragma once

#include <stdexcept>
#include <string>

namespace tks {

// Error categories. The numeric values double as CLI exit codes.
enum class ErrorCode : int {
  internal = 1,
  invalid_argument = 2,
  io = 3,
  format = 4,
  param_mismatch = 5,
  rank_infeasible = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorCode::invalid_argument, what);
}

}  // namespace tks
