#include "vaporcell/io.hpp"

#include <array>
#include <cmath>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "vaporcell/errors.hpp"
#include "vaporcell/sigproc.hpp"

namespace vaporcell::io {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::pair<std::string, std::string> split_pair(const std::string& line) {
  const auto comma = line.find(',');
  if (comma == std::string::npos) fail(ErrorCode::io, "csv: expected two comma-separated fields: " + line);
  return {trim(line.substr(0, comma)), trim(line.substr(comma + 1))};
}

struct RawCsv {
  std::vector<std::string> comments;  // without the leading '#'
  std::string header_a, header_b;
  std::vector<double> a, b;
};

RawCsv read_raw(std::istream& is) {
  RawCsv raw;
  bool have_header = false;
  std::string line;
  while (std::getline(is, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      raw.comments.push_back(trim(t.substr(1)));
      continue;
    }
    auto [first, second] = split_pair(t);
    if (!have_header) {
      raw.header_a = first;
      raw.header_b = second;
      have_header = true;
      continue;
    }
    raw.a.push_back(parse_double(first));
    raw.b.push_back(parse_double(second));
  }
  if (!have_header) fail(ErrorCode::io, "csv: missing header row");
  return raw;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::io, "cannot open for writing: " + path.string());
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::io, "cannot open for reading: " + path.string());
  return is;
}

void write_rows(std::ostream& os, const std::vector<double>& a, const std::vector<double>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    os << format_double(a[i]) << ',' << format_double(b[i]) << '\n';
  }
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) fail(ErrorCode::io, "cannot format number");
  return std::string(buf.data(), ptr);
}

double parse_double(const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size()) {
    fail(ErrorCode::io, "not a number: '" + text + "'");
  }
  return v;
}

void write_spectrum(std::ostream& os, const Spectrum& s) {
  s.validate();
  os << s.x_unit << ',' << s.y_unit << '\n';
  write_rows(os, s.x, s.y);
}

void write_spectrum(const std::filesystem::path& path, const Spectrum& s) {
  auto os = open_out(path);
  write_spectrum(os, s);
}

Spectrum read_spectrum(std::istream& is) {
  RawCsv raw = read_raw(is);
  Spectrum s{std::move(raw.a), std::move(raw.b), raw.header_a, raw.header_b};
  s.validate();
  return s;
}

Spectrum read_spectrum(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_spectrum(is);
}

void write_time_series(std::ostream& os, const TimeSeries& ts) {
  os << "# fs=" << format_double(ts.sample_rate()) << '\n';
  os << ts.t_unit << ',' << ts.y_unit << '\n';
  write_rows(os, ts.t, ts.y);
}

void write_time_series(const std::filesystem::path& path, const TimeSeries& ts) {
  auto os = open_out(path);
  write_time_series(os, ts);
}

TimeSeries read_time_series(std::istream& is) {
  RawCsv raw = read_raw(is);
  TimeSeries ts;
  ts.t = std::move(raw.a);
  ts.y = std::move(raw.b);
  ts.t_unit = raw.header_a;
  ts.y_unit = raw.header_b;
  ts.check_uniform();
  for (const auto& c : raw.comments) {
    if (c.rfind("fs=", 0) == 0) {
      const double fs = parse_double(c.substr(3));
      if (std::abs(fs * ts.sample_interval() - 1.0) > 1e-6) {
        fail(ErrorCode::non_uniform_sampling, "time series: declared fs disagrees with the t column");
      }
    }
  }
  return ts;
}

TimeSeries read_time_series(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_time_series(is);
}

void write_psd(std::ostream& os, const PsdEstimate& psd) {
  os << "# window=" << psd.window << '\n';
  os << "# segment_length=" << psd.segment_length << '\n';
  os << "# overlap=" << format_double(psd.overlap) << '\n';
  os << "# enbw_hz=" << format_double(psd.enbw) << '\n';
  os << "# segments=" << psd.segments << '\n';
  os << "f_Hz,asd_" << psd.y_unit << '\n';
  write_rows(os, psd.f, psd.asd);
}

void write_psd(const std::filesystem::path& path, const PsdEstimate& psd) {
  auto os = open_out(path);
  write_psd(os, psd);
}

PsdEstimate read_psd(std::istream& is) {
  RawCsv raw = read_raw(is);
  PsdEstimate psd;
  psd.f = std::move(raw.a);
  psd.asd = std::move(raw.b);
  const std::string prefix = "asd_";
  psd.y_unit = raw.header_b.rfind(prefix, 0) == 0 ? raw.header_b.substr(prefix.size()) : raw.header_b;
  for (const auto& c : raw.comments) {
    const auto eq = c.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = trim(c.substr(0, eq));
    const std::string value = trim(c.substr(eq + 1));
    if (key == "window") psd.window = value;
    else if (key == "segment_length") psd.segment_length = static_cast<std::size_t>(parse_double(value));
    else if (key == "overlap") psd.overlap = parse_double(value);
    else if (key == "enbw_hz") psd.enbw = parse_double(value);
    else if (key == "segments") psd.segments = static_cast<std::size_t>(parse_double(value));
  }
  return psd;
}

PsdEstimate read_psd(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_psd(is);
}

XYTable read_xy_table(std::istream& is) {
  RawCsv raw = read_raw(is);
  return XYTable{raw.header_a, raw.header_b, std::move(raw.a), std::move(raw.b)};
}

XYTable read_xy_table(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_xy_table(is);
}

void write_xy_table(const std::filesystem::path& path, const XYTable& table) {
  auto os = open_out(path);
  os << table.x_name << ',' << table.y_name << '\n';
  write_rows(os, table.x, table.y);
}

}  // namespace vaporcell::io
