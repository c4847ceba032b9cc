#pragma once

// Subcommands of the diffstruct tool. Each run_* writes its artifacts into
// `common.out_dir` and returns the run summary it also writes there.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "diffstruct/dae.hpp"
#include "diffstruct/decode.hpp"
#include "diffstruct/discovery.hpp"

namespace diffstruct::app {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct Common {
  std::uint64_t seed = 1;
  fs::path out_dir = ".";
  bool plots = false;
  bool record_timing = false;
};

struct GenOptions {
  std::string kind = "sine";  // sine | circle | custom
  std::size_t n = 200;
  /// Abscissa range for sine/custom; empty means [0, 4 pi].
  std::vector<double> range;
  double noise = 0.0;
  std::string expr;
  std::string output = "data.csv";
};

struct JetsOptions {
  std::string input;
  std::size_t k = 7;
  /// Drop the k/2 points at each end whose neighbourhoods are one-sided.
  bool trim = false;
  bool normalize = false;
  std::string method = "pca";  // pca | fd
  std::string output = "jets.csv";
};

struct DiscoverOptions {
  std::string input;
  std::string mode = "linear";  // linear | implicit
  ImplicitConfig implicit;
  /// Probes further than this (normalised units) from the data count as far.
  double far_distance = 0.5;
  std::string output;  // default depends on the mode
};

struct DecodeOptions {
  std::string model;
  std::vector<double> ic{0.0, 0.0, 0.5};  // t0, u0, du0
  std::string method = "integrate";        // integrate | closed-form | pinn
  double t_end = 6.283185307179586;
  double h = 0.01;
  std::size_t points = 128;
  PinnConfig pinn;
  std::string output = "solution.csv";
};

struct DaeOptions {
  std::string input;
  DaeConfig config;
  std::size_t sweep_points = 200;
  /// Direction the learned coefficients are compared against.
  std::vector<double> reference{0.6761, -0.0328, 0.7360};
};

Json run_gen(const GenOptions& opts, const Common& common);
Json run_jets(const JetsOptions& opts, const Common& common);
Json run_discover(const DiscoverOptions& opts, const Common& common);
Json run_decode(const DecodeOptions& opts, const Common& common);
Json run_dae(const DaeOptions& opts, const Common& common);
/// Every pipeline end to end under `common.out_dir`, plus report.json.
Json run_all(const Common& common);

/// Loads a model written by run_discover (normal-vector or implicit JSON).
RelationModel load_model(const fs::path& path);

/// 64-bit FNV-1a of a byte string, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

/// Full command line entry point; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace diffstruct::app
