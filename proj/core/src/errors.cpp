#include "skilltrace/errors.hpp"

namespace skilltrace {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Ordering: return "ordering";
    case ErrorKind::Lookup: return "lookup";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::InsufficientData: return "insufficient_data";
    case ErrorKind::UndefinedMetric: return "undefined_metric";
    case ErrorKind::Model: return "model";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::Numerical: return "numerical";
  }
  return "unknown";
}

}  // namespace skilltrace
