#pragma once

#include <filesystem>
#include <span>
#include <string>

namespace diffstruct::app {

/// Minimal line plot: one polyline in a framed box, with the data ranges
/// printed along the edges.
void write_svg_plot(const std::filesystem::path& path, const std::string& title,
                    std::span<const double> x, std::span<const double> y);

}  // namespace diffstruct::app
