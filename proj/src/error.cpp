#include "eigenfolio/error.hpp"

namespace eigenfolio {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::transport: return "transport";
    case ErrorKind::symbol_not_found: return "symbol_not_found";
    case ErrorKind::parse: return "parse";
    case ErrorKind::validation: return "validation";
    case ErrorKind::io: return "io";
    case ErrorKind::domain: return "domain";
    case ErrorKind::argument: return "argument";
    case ErrorKind::degenerate_asset: return "degenerate_asset";
    case ErrorKind::degenerate_window: return "degenerate_window";
    case ErrorKind::insufficient_data: return "insufficient_data";
    case ErrorKind::no_common_range: return "no_common_range";
    case ErrorKind::ill_conditioned: return "ill_conditioned";
    case ErrorKind::cannot_unfold: return "cannot_unfold";
    case ErrorKind::fit_domain: return "fit_domain";
    case ErrorKind::no_spanning_tree: return "no_spanning_tree";
    case ErrorKind::degenerate_variance: return "degenerate_variance";
    case ErrorKind::lookup: return "lookup";
    case ErrorKind::contract: return "contract";
  }
  return "unknown";
}

}  // namespace eigenfolio
