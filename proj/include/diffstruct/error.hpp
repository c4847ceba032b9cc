#pragma once

#include <stdexcept>
#include <string>

namespace diffstruct {

enum class Errc {
  insufficient_data,
  shape,
  symmetry,
  convergence,
  parameter,
  vertical_tangent,
  numeric,
  degenerate_spectrum,
  not_solvable,
  root_find,
  unsupported,
  training_diverged,
  degenerate_coefficients,
  io,
  parse,
  usage,
};

const char* to_string(Errc code) noexcept;

/// Process exit code for an error category: 2 usage/config, 3 data, 4 numeric/training.
int exit_code(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace diffstruct
