#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <utility>

namespace maxent {

using Index = Eigen::Index;

/// Error carrying a short machine-readable code next to the message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace maxent
