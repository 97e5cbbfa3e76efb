#pragma once

#include <stdexcept>
#include <string>

namespace ddml {

enum class Errc {
  unknown_feature,
  unknown_level,
  shape_mismatch,
  empty_batch,
  empty_list,
  pool_too_small,
  bad_magic,
  truncated_file,
  count_mismatch,
  delta_out_of_range,
  bind_failure,
  bad_config,
  protocol,
  io
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

}  // namespace ddml
