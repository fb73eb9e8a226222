#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace glassbox::svg {

// Attribution heatmap over (time, species) cells: blue for positive values
// (raises the target probability), red for negative.
std::string heatmap(const std::vector<float>& values, int n_rows, int n_cols,
                    const std::string& title);

// Single profile line over a numeric grid (PDP rendering).
std::string line_profile(const std::vector<double>& grid,
                         const std::vector<double>& profile,
                         const std::string& title, const std::string& x_label,
                         const std::string& y_label);

// 2-d scatter colored by binary class.
std::string scatter(const std::vector<double>& xs, const std::vector<double>& ys,
                    const std::vector<std::uint8_t>& clazz,
                    const std::string& title);

void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace glassbox::svg
