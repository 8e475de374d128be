#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eigenfolio {

/// Classifies every failure the library reports. The CLI maps all of these
/// to exit code 1 and prints the kind in its machine-readable error line.
enum class ErrorKind {
  transport,          // network / HTTP failure, retriable
  symbol_not_found,
  parse,              // malformed payload or file
  validation,         // invariant violated by input data
  io,
  domain,             // argument outside the mathematical domain
  argument,
  degenerate_asset,   // zero-variance return row
  degenerate_window,
  insufficient_data,
  no_common_range,
  ill_conditioned,
  cannot_unfold,
  fit_domain,
  no_spanning_tree,
  degenerate_variance,
  lookup,
  contract,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  bool retriable() const noexcept { return kind_ == ErrorKind::transport; }

 private:
  ErrorKind kind_;
};

}  // namespace eigenfolio
