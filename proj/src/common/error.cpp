#include "common/error.hpp"

namespace prectr {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension error";
    case ErrorKind::Index: return "index error";
    case ErrorKind::Graph: return "graph error";
    case ErrorKind::Numeric: return "numeric error";
    case ErrorKind::Precondition: return "precondition error";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Divergence: return "divergence error";
    case ErrorKind::Lookup: return "lookup error";
    case ErrorKind::Training: return "training error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::UndefinedMetric: return "undefined-metric error";
    case ErrorKind::Dependency: return "dependency error";
    case ErrorKind::Io: return "io error";
  }
  return "error";
}

}  // namespace prectr
