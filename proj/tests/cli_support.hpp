#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"

namespace binar::testing {

namespace fs = std::filesystem;

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void dump(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

inline CliRun run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "binar");
  std::ostringstream out, err;
  CliRun r;
  r.code = cli::run_command(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

/// Benchmark model keys shared by every subcommand config.
inline nlohmann::json benchmark_config() {
  return nlohmann::json::parse(R"({
    "n": 10,
    "beta": [-1.0, 0.1, 0.4],
    "exo": {"dist": "normal", "mean": 1.0, "sd": 0.1, "clamp_lo": 0.0, "clamp_hi": 10.0, "dim": 1}
  })");
}

/// Writes the first `count` monitored points of `series_csv` after `m` as a
/// stream file "k,x,w1".
inline std::string stream_from_series(const std::string& series_csv, int m, int count) {
  std::istringstream in(series_csv);
  std::string line;
  std::getline(in, line);
  std::ostringstream out;
  out << "k,x,w1\n";
  int t = -1;
  while (std::getline(in, line)) {
    ++t;
    if (t <= m) continue;
    if (t > m + count) break;
    const auto first = line.find(',');
    out << (t - m) << line.substr(first) << '\n';
  }
  return out.str();
}

}  // namespace binar::testing
