#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace livetex {

enum class ErrorCode {
  io,
  parse,
  missing_uv,
  degenerate_mesh,
  count_mismatch,
  invalid_pose,
  invalid_argument,
  empty_image,
  behind_camera,
  not_visible,
  frame_mismatch,
  unknown_primitive,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace livetex
