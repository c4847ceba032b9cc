#pragma once

// Config files hold `key = value` lines (with `#` comments). Each key names a
// long option of the global app or of the chosen subcommand; the entries are
// spliced into the argument list ahead of what the user typed.

#include <string>
#include <vector>

namespace CLI {
class App;
}

namespace diffstruct::app {

struct ConfigEntry {
  std::string key;
  std::string value;
};

std::vector<ConfigEntry> parse_config(const std::string& text);

/// `args` is the full argv (program name first). Unknown keys throw Errc::usage.
std::vector<std::string> expand_config(const std::vector<std::string>& args,
                                       const std::vector<ConfigEntry>& entries, const CLI::App& app);

}  // namespace diffstruct::app
