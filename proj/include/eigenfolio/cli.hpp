#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "eigenfolio/http.hpp"

namespace eigenfolio::cli {

using TransportFactory = std::function<std::unique_ptr<HttpTransport>(const std::string& base_url)>;

/// Runs one subcommand. `args` excludes the program name. Returns the exit
/// code: 0 success, 1 error reported by the library, 2 usage error. Errors
/// are written to `err` as one JSON line {"error": kind, "message": text}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const TransportFactory& transport = {});

int run(int argc, char** argv);

/// `start:stop:points`; "auto" leaves the grid to the command.
struct GridSpec {
  bool automatic = true;
  double start = 0.0;
  double stop = 0.0;
  std::size_t points = 0;
};

GridSpec parse_grid(const std::string& text);

/// Comma-separated numbers, or a `start:stop:points` range.
std::vector<double> parse_values(const std::string& text);

}  // namespace eigenfolio::cli
