#include "phigeo/split_model.hpp"

namespace phigeo {

std::string_view split_model_name(SplitModelKind kind) {
  switch (kind) {
    case SplitModelKind::kFS: return "fs";
    case SplitModelKind::kDS: return "ds";
    case SplitModelKind::kMD: return "md";
    case SplitModelKind::kG: return "g";
    case SplitModelKind::kI: return "i";
  }
  return "?";
}

std::optional<SplitModelKind> parse_split_model(std::string_view name) {
  for (SplitModelKind kind : kAllSplitModels) {
    if (split_model_name(kind) == name) return kind;
  }
  return std::nullopt;
}

}  // namespace phigeo
