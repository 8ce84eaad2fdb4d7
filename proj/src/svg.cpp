// Copyright 2026 The DMRL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dmrl/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace dmrl {

namespace {

std::string time_color(double f) {
  // blue (#1f77b4) to orange (#ff7f0e)
  const int r = static_cast<int>(std::lround(0x1f + f * (0xff - 0x1f)));
  const int g = static_cast<int>(std::lround(0x77 + f * (0x7f - 0x77)));
  const int b = static_cast<int>(std::lround(0xb4 + f * (0x0e - 0xb4)));
  std::ostringstream os;
  os << "#" << std::hex << std::setfill('0') << std::setw(2) << r << std::setw(2) << g
     << std::setw(2) << b;
  return os.str();
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_trajectory_svg(const std::string& path, const world::MotionSequence& motion,
                          const std::string& title) {
  const double box = 360.0;     // arena panel (maps [-3,3] to it)
  const double spark_h = 60.0;  // limb sparkline panel height
  const double width = box;
  const double height = box + 2 * spark_h + 30.0;
  auto ax = [&](double v) { return (v + 3.0) / 6.0 * box; };
  auto ay = [&](double v) { return box - (v + 3.0) / 6.0 * box; };

  std::ostringstream os;
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << box << "\" height=\"" << box
     << "\" fill=\"#fafafa\" stroke=\"#888\"/>\n";
  os << "<text x=\"8\" y=\"" << box + 20 << "\" font-size=\"12\" font-family=\"sans-serif\">"
     << xml_escape(title) << "</text>\n";

  for (int t = 1; t < world::kFrames; ++t) {
    const double f = static_cast<double>(t - 1) / (world::kFrames - 2);
    os << "<line x1=\"" << ax(motion.at(t - 1, world::kRootX)) << "\" y1=\""
       << ay(motion.at(t - 1, world::kRootY)) << "\" x2=\"" << ax(motion.at(t, world::kRootX))
       << "\" y2=\"" << ay(motion.at(t, world::kRootY)) << "\" stroke=\"" << time_color(f)
       << "\" stroke-width=\"2.5\" stroke-linecap=\"round\"/>\n";
  }
  os << "<circle cx=\"" << ax(motion.at(0, world::kRootX)) << "\" cy=\""
     << ay(motion.at(0, world::kRootY)) << "\" r=\"4\" fill=\"#1f77b4\"/>\n";
  // Final heading tick.
  {
    const int t = world::kFrames - 1;
    const double hx = motion.at(t, world::kHeadCos), hy = motion.at(t, world::kHeadSin);
    const double x0 = ax(motion.at(t, world::kRootX)), y0 = ay(motion.at(t, world::kRootY));
    os << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 + 14.0 * hx << "\" y2=\""
       << y0 - 14.0 * hy << "\" stroke=\"#ff7f0e\" stroke-width=\"2\"/>\n";
  }

  const char* names[2] = {"limb a", "limb b"};
  for (int limb = 0; limb < 2; ++limb) {
    const double top = box + 30.0 + limb * spark_h;
    const int ch = limb == 0 ? world::kLimbA : world::kLimbB;
    os << "<rect x=\"0\" y=\"" << top << "\" width=\"" << box << "\" height=\"" << spark_h - 8
       << "\" fill=\"#f4f4f4\" stroke=\"#bbb\"/>\n";
    os << "<text x=\"4\" y=\"" << top + 12 << "\" font-size=\"10\" font-family=\"sans-serif\" "
       << "fill=\"#555\">" << names[limb] << "</text>\n";
    os << "<polyline fill=\"none\" stroke=\"#2a7\" stroke-width=\"1.5\" points=\"";
    for (int t = 0; t < world::kFrames; ++t) {
      const double x = static_cast<double>(t) / (world::kFrames - 1) * box;
      const double v = std::clamp(motion.at(t, ch), -1.2, 1.2);
      const double y = top + (spark_h - 8) / 2.0 - v / 1.2 * (spark_h - 12) / 2.0;
      os << x << "," << y << " ";
    }
    os << "\"/>\n";
  }
  os << "</svg>\n";

  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << os.str();
}

}  // namespace dmrl
