#include "taskarith/error.hpp"

namespace taskarith {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::parameter: return "parameter error";
    case ErrorKind::capacity: return "capacity error";
    case ErrorKind::sampling: return "sampling error";
    case ErrorKind::shape: return "shape error";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::divergence: return "divergence error";
    case ErrorKind::provenance: return "provenance error";
    case ErrorKind::convergence: return "convergence error";
    case ErrorKind::degenerate: return "degenerate estimator error";
    case ErrorKind::no_solution: return "no-solution error";
    case ErrorKind::config: return "config error";
    case ErrorKind::io: return "I/O error";
  }
  return "error";
}

}  // namespace taskarith
