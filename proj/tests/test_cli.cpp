#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"

namespace fs = std::filesystem;
using vaporcell::cli::run;

namespace {

struct Result {
  int code;
  std::map<std::string, std::string> summary;
  std::string out, err;
  double num(const std::string& k) const {
    const auto it = summary.find(k);
    if (it == summary.end()) FAIL("missing summary key " << k << "\n" << out << err);
    return std::stod(it->second);
  }
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), {"--config", VAPORCELL_TEST_CONFIG});
  std::ostringstream out, err;
  Result r;
  r.code = run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  std::istringstream lines(r.out);
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) r.summary[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("vaporcell_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("absorption round trip") {
  const auto d = scratch("abs");
  const auto spec = (d / "spec.csv").string();
  REQUIRE(cli({"simulate-absorption", "--gamma-ghz", "16.38", "--out", spec}).code == 0);
  const auto fit = cli({"fit-absorption", "--in", spec, "--out", (d / "fit.csv").string()});
  REQUIRE(fit.code == 0);
  CHECK(fit.num("linewidth_ghz") == doctest::Approx(16.38).epsilon(1e-3));
  CHECK(fit.num("buffer_density_amg") == doctest::Approx(0.92).epsilon(1e-3));
  CHECK(fs::exists(d / "fit.csv"));

  const auto noisy = (d / "noisy.csv").string();
  REQUIRE(cli({"--seed", "3", "simulate-absorption", "--noise", "0.01", "--out", noisy}).code == 0);
  CHECK(cli({"fit-absorption", "--in", noisy}).num("linewidth_ghz") == doctest::Approx(16.38).epsilon(0.02));
}

TEST_CASE("aging report") {
  const auto d = scratch("aging");
  write(d / "a.csv", "day,linewidth_ghz\n0,16.38\n5,16.41\n10,16.35\n15,16.40\n20,16.36\n25,16.39\n");
  const auto r = cli({"aging-report", "--in", (d / "a.csv").string()});
  REQUIRE(r.code == 0);
  CHECK(r.summary.at("pass") == "true");
}

TEST_CASE("SAS features") {
  const auto d = scratch("sas");
  const auto r = cli({"simulate-sas", "--out", (d / "s.csv").string(), "--features-out", (d / "f.csv").string()});
  REQUIRE(r.code == 0);
  CHECK(r.num("features") == 12);
  CHECK(slurp(d / "f.csv").rfind("frequency_ghz,kind,label\n", 0) == 0);
  CHECK(cli({"simulate-sas", "--isotope", "Rb87", "--ground-f", "2", "--out", (d / "g.csv").string()}).num("features") ==
        3);
}

TEST_CASE("spin-noise round trip") {
  const auto d = scratch("sns");
  const auto ts = (d / "ts.csv").string();
  const auto psd = (d / "psd.csv").string();
  REQUIRE(cli({"simulate-sns", "--duration-s", "2", "--out", ts, "--psd-out", psd}).code == 0);
  const auto a = cli({"fit-sns", "--in", ts});
  REQUIRE(a.code == 0);
  CHECK(std::abs(a.num("peak.Rb85.larmor_khz") - 46.674) < 0.5);
  CHECK(std::abs(a.num("peak.Rb87.larmor_khz") - 69.958) < 0.5);
  CHECK(a.num("peak.Rb85.field_ut") == doctest::Approx(10.0).epsilon(0.01));
  const auto b = cli({"fit-sns", "--psd-in", psd});
  CHECK(b.summary.at("peak.Rb85.larmor_khz") == a.summary.at("peak.Rb85.larmor_khz"));
}

TEST_CASE("zero-field resonance round trip") {
  const auto d = scratch("hanle");
  const auto ip = (d / "ip.csv").string();
  const auto q = (d / "q.csv").string();
  REQUIRE(cli({"simulate-hanle", "--delta-b-nt", "10.5", "--noise", "0.01", "--in-phase-out", ip, "--quadrature-out", q})
              .code == 0);
  const auto r = cli({"fit-hanle", "--in-phase", ip, "--quadrature", q});
  REQUIRE(r.code == 0);
  CHECK(r.num("delta_b_nt") == doctest::Approx(10.5).epsilon(0.02));
  CHECK(r.num("relaxation_rate_per_s") == doctest::Approx(1849.0).epsilon(0.03));
}

TEST_CASE("modulation, demodulation and calibration") {
  const auto d = scratch("mod");
  const auto cal = (d / "cal.csv").string();
  REQUIRE(cli({"simulate-modulated", "--duration-s", "0.1", "--test-field", "1", "--out", cal}).code == 0);
  const auto ph = cli({"demodulate", "--in", cal, "--out", (d / "cq.csv").string()});
  REQUIRE(ph.code == 0);
  const std::string phase = ph.summary.at("quadrature_phase_rad");
  const auto at = cli({"demodulate", "--in", cal, "--ref-phase", phase, "--out", (d / "cq.csv").string()});
  CHECK(at.num("quadrature_mean") > 0.0);
  CHECK(std::abs(at.num("in_phase_mean")) < 1e-3 * at.num("quadrature_mean"));

  const auto noise = (d / "noise.csv").string();
  REQUIRE(cli({"simulate-modulated", "--duration-s", "4", "--field-noise-ft", "12", "--out", noise}).code == 0);
  const auto q = (d / "q.csv").string();
  REQUIRE(cli({"demodulate", "--in", noise, "--ref-phase", phase, "--out", q}).code == 0);
  const double a_amp = 2.0 * 10.5 * at.num("quadrature_mean");
  const auto s = cli({"calibrate-sensitivity", "--timeseries", q, "--delta-b", "10.5", "--a-amp", std::to_string(a_amp),
                      "--out", (d / "sens.csv").string()});
  REQUIRE(s.code == 0);
  CHECK(s.num("noise_floor_ft_per_rthz") > 5.0);
  CHECK(s.num("noise_floor_ft_per_rthz") < 30.0);
  CHECK(fs::exists(d / "sens.csv"));
}

TEST_CASE("thermal, I-V and residual field") {
  const auto d = scratch("thermal");
  const auto t = cli({"simulate-thermal", "--out", (d / "t.csv").string(), "--power-out", (d / "p.csv").string()});
  REQUIRE(t.code == 0);
  CHECK(t.num("settling_time_s") <= 1000.0);
  CHECK(t.num("peak_fluctuation_mk") <= 10.0);

  write(d / "iv.csv", "current_A,voltage_V\n0.001,0.505\n0.002,1.01\n0.003,1.515\n");
  CHECK(cli({"fit-iv", "--in", (d / "iv.csv").string()}).num("resistance_ohm") == doctest::Approx(505.0));
  write(d / "b.csv", "current_mA,field_nT\n0,0\n10,1.34\n20,2.68\n30,4.02\n");
  CHECK(cli({"fit-residual-field", "--in", (d / "b.csv").string()}).num("coefficient_nt_per_ma") ==
        doctest::Approx(0.134));
}

TEST_CASE("exit codes") {
  CHECK(cli({}).code == 1);
  CHECK(cli({"no-such-command"}).code == 1);
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({"fit-iv", "--in", "/nonexistent.csv"}).code == 1);
  CHECK(cli({"simulate-absorption", "--gamma-ghz", "-1", "--out", "/tmp/x.csv"}).code == 1);
  CHECK(cli({"--set", "novalue", "simulate-thermal", "--out", "/tmp/x.csv"}).code == 1);

  const auto d = scratch("exit");
  write(d / "flat.csv", "x,y\n0,1\n1,1\n2,1\n");
  CHECK(cli({"fit-iv", "--in", (d / "flat.csv").string()}).code == 2);
}

TEST_CASE("config overrides and summary file") {
  const auto d = scratch("config");
  const auto r = cli({"--set", "thermal.pid.setpoint_k=433.15", "--summary", (d / "s.txt").string(), "simulate-thermal",
                      "--duration-s", "100", "--out", (d / "t.csv").string()});
  REQUIRE(r.code == 0);
  CHECK(r.num("setpoint_k") == 433.15);
  CHECK(slurp(d / "s.txt") == r.out);
  CHECK(cli({"--set", "thermal.pid.setpoint_k=433.15", "simulate-thermal", "--setpoint-k", "450", "--duration-s", "100",
             "--out", (d / "t.csv").string()})
            .num("setpoint_k") == 450.0);
}

TEST_CASE("identical arguments give identical files") {
  const std::vector<std::vector<std::string>> commands{
      {"simulate-absorption", "--noise", "0.01", "--out", "a.csv"},
      {"simulate-sas", "--out", "s.csv", "--features-out", "f.csv"},
      {"simulate-sns", "--duration-s", "0.2", "--out", "n.csv", "--psd-out", "p.csv"},
      {"simulate-hanle", "--noise", "0.01", "--in-phase-out", "i.csv", "--quadrature-out", "q.csv"},
      {"simulate-modulated", "--duration-s", "0.1", "--field-noise-ft", "12", "--electronic-noise-v", "1e-8", "--out",
       "m.csv"},
      {"simulate-thermal", "--duration-s", "200", "--out", "t.csv", "--measured-out", "tm.csv"},
  };
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  for (const auto& cmd : commands) {
    std::string sa, sb;
    for (const auto& [dir, summary] : {std::pair{a, &sa}, std::pair{b, &sb}}) {
      std::vector<std::string> args;
      for (const auto& x : cmd) args.push_back(x.ends_with(".csv") ? (dir / x).string() : x);
      const auto r = cli(args);
      REQUIRE(r.code == 0);
      *summary = r.out;
    }
    CHECK(sa == sb);
  }
  for (const auto& entry : fs::directory_iterator(a)) {
    CHECK_MESSAGE(slurp(entry.path()) == slurp(b / entry.path().filename()), entry.path().filename().string());
  }
}
