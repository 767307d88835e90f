#pragma once

// CSV formats shared by every module.
//
//   Spectrum:    "x_unit,y_unit" header, then "x,y" rows.
//   TimeSeries:  "# fs=<Hz>" comment, "t_unit,y_unit" header, then "t,y" rows.
//   PsdEstimate: comment lines for window/segment/overlap/ENBW, then
//                "f_Hz,asd_<unit>" header and "f,asd" rows.
//
// Numbers are written with the shortest round-trip representation
// (std::to_chars), so a write/read cycle is lossless and output is
// byte-reproducible.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "vaporcell/records.hpp"

namespace vaporcell {
struct PsdEstimate;
}

namespace vaporcell::io {

std::string format_double(double v);
double parse_double(const std::string& text);

void write_spectrum(std::ostream& os, const Spectrum& s);
void write_spectrum(const std::filesystem::path& path, const Spectrum& s);
Spectrum read_spectrum(std::istream& is);
Spectrum read_spectrum(const std::filesystem::path& path);

void write_time_series(std::ostream& os, const TimeSeries& ts);
void write_time_series(const std::filesystem::path& path, const TimeSeries& ts);
TimeSeries read_time_series(std::istream& is);
TimeSeries read_time_series(const std::filesystem::path& path);

void write_psd(std::ostream& os, const PsdEstimate& psd);
void write_psd(const std::filesystem::path& path, const PsdEstimate& psd);
PsdEstimate read_psd(std::istream& is);
PsdEstimate read_psd(const std::filesystem::path& path);

/// Two-column table with a header row; no ordering requirement on either column.
struct XYTable {
  std::string x_name;
  std::string y_name;
  std::vector<double> x;
  std::vector<double> y;
};
XYTable read_xy_table(std::istream& is);
XYTable read_xy_table(const std::filesystem::path& path);
void write_xy_table(const std::filesystem::path& path, const XYTable& table);

}  // namespace vaporcell::io
