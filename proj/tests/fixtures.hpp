#pragma once

// Expensive trained models shared between test files.

#include <cmath>
#include <vector>

#include "diffstruct/discovery.hpp"
#include "diffstruct/jets.hpp"
#include "oracles.hpp"

namespace fixture {

/// u = sin t, 200 uniform samples on [0, 4 pi].
inline diffstruct::SampleSeries sine_series() {
  std::vector<double> t, u;
  for (std::size_t i = 0; i < 200; ++i) {
    t.push_back(4.0 * oracle::kPi * static_cast<double>(i) / 199.0);
    u.push_back(std::sin(t.back()));
  }
  return {t, u};
}

/// Estimated sine jets with three points dropped from each end.
inline diffstruct::JetSeries sine_jets() { return diffstruct::estimate_jets(sine_series()).trimmed(3); }

/// Level-set network trained on `sine_jets()` with the default config.
inline const diffstruct::ImplicitFit& sine_fit() {
  static const diffstruct::ImplicitFit fit = diffstruct::train_implicit(sine_jets());
  return fit;
}

}  // namespace fixture
