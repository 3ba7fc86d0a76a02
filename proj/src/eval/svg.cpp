#include "clot/eval/svg.hpp"

#include <fstream>
#include <sstream>

#include "clot/error.hpp"

namespace clot::eval {
namespace {

// Kelly's 22 colors of maximum contrast.
const char* kPalette[22] = {
    "#F2F3F4", "#222222", "#F3C300", "#875692", "#F38400", "#A1CAF1", "#BE0032", "#C2B280",
    "#848482", "#008856", "#E68FAC", "#0067A5", "#F99379", "#604E97", "#F6A600", "#B3446C",
    "#DCD300", "#882D17", "#8DB600", "#654522", "#E25822", "#2B3D26"};

void append_band(std::ostringstream& out, const std::vector<int>& labels, double y, double height,
                 double width) {
  const double n = static_cast<double>(labels.size());
  std::size_t start = 0;
  for (std::size_t i = 1; i <= labels.size(); ++i) {
    if (i == labels.size() || labels[i] != labels[start]) {
      const double x0 = static_cast<double>(start) / n * width;
      const double x1 = static_cast<double>(i) / n * width;
      out << "  <rect x=\"" << x0 << "\" y=\"" << y << "\" width=\"" << (x1 - x0)
          << "\" height=\"" << height << "\" fill=\""
          << kPalette[static_cast<std::size_t>(labels[start]) % 22] << "\"/>\n";
      start = i;
    }
  }
}

}  // namespace

std::string render_band_svg(const std::vector<int>& gt, const std::vector<int>& pred) {
  if (pred.empty()) throw InputError("render_band_svg: empty prediction");
  const double width = 800.0, band = 40.0, gap = 8.0, label_w = 50.0;
  const bool have_gt = !gt.empty();
  const double height = have_gt ? 2 * band + 3 * gap : band + 2 * gap;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << (width + label_w)
      << "\" height=\"" << height << "\">\n";
  double y = gap;
  if (have_gt) {
    out << "  <text x=\"" << width + 6 << "\" y=\"" << y + band / 2 + 4
        << "\" font-size=\"12\" font-family=\"sans-serif\">GT</text>\n";
    append_band(out, gt, y, band, width);
    y += band + gap;
  }
  out << "  <text x=\"" << width + 6 << "\" y=\"" << y + band / 2 + 4
      << "\" font-size=\"12\" font-family=\"sans-serif\">pred</text>\n";
  append_band(out, pred, y, band, width);
  out << "</svg>\n";
  return out.str();
}

void write_band_svg(const std::string& path, const std::vector<int>& gt,
                    const std::vector<int>& pred) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw InputError("svg: cannot open for writing: " + path);
  f << render_band_svg(gt, pred);
  if (!f) throw InputError("svg: write failed: " + path);
}

}  // namespace clot::eval
