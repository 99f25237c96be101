#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cli/config.hpp"

namespace dbctl::cli {

struct Invocation {
  fs::path config;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
  bool json_output = false;
  std::optional<fs::path> gain;  // verify
  std::string mode = "all";      // verify: data | model | poles | all
  std::optional<int> trials;     // bench
  std::optional<unsigned> threads;
};

int cmd_simulate(const Invocation& inv, std::ostream& out, std::ostream& err);
int cmd_synth(const Invocation& inv, std::ostream& out, std::ostream& err);
int cmd_verify(const Invocation& inv, std::ostream& out, std::ostream& err);
int cmd_bench(const Invocation& inv, std::ostream& out, std::ostream& err);

/// Full command line, errors mapped to exit codes 0-4.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

json matrix_json(const Mat& m);
json spectrum_json(const CVec& v);

}  // namespace dbctl::cli
