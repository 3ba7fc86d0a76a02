#pragma once

#include <string>
#include <vector>

namespace clot::eval {

// Stacked horizontal segmentation bands (GT row when available, prediction
// row), one rect per run, colored by label through a fixed 22-color palette.
std::string render_band_svg(const std::vector<int>& gt, const std::vector<int>& pred);

void write_band_svg(const std::string& path, const std::vector<int>& gt,
                    const std::vector<int>& pred);

}  // namespace clot::eval
