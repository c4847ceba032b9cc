#include "diffstruct/error.hpp"

namespace diffstruct {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::insufficient_data: return "insufficient-data";
    case Errc::shape: return "shape";
    case Errc::symmetry: return "symmetry";
    case Errc::convergence: return "convergence";
    case Errc::parameter: return "parameter";
    case Errc::vertical_tangent: return "vertical-tangent";
    case Errc::numeric: return "numeric";
    case Errc::degenerate_spectrum: return "degenerate-spectrum";
    case Errc::not_solvable: return "not-solvable-for-u2";
    case Errc::root_find: return "root-find";
    case Errc::unsupported: return "unsupported";
    case Errc::training_diverged: return "training-diverged";
    case Errc::degenerate_coefficients: return "degenerate-coefficients";
    case Errc::io: return "io";
    case Errc::parse: return "parse";
    case Errc::usage: return "usage";
  }
  return "unknown";
}

int exit_code(Errc code) noexcept {
  switch (code) {
    case Errc::parameter:
    case Errc::unsupported:
    case Errc::usage:
      return 2;
    case Errc::insufficient_data:
    case Errc::shape:
    case Errc::symmetry:
    case Errc::vertical_tangent:
    case Errc::degenerate_spectrum:
    case Errc::io:
    case Errc::parse:
      return 3;
    case Errc::convergence:
    case Errc::numeric:
    case Errc::not_solvable:
    case Errc::root_find:
    case Errc::training_diverged:
    case Errc::degenerate_coefficients:
      return 4;
  }
  return 4;
}

}  // namespace diffstruct
