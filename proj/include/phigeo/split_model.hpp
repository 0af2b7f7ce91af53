#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace phigeo {

// Split manifolds. FS: fully split, DS: diagonally split graphical model,
// MD: mismatched decoding, G: geometric (causally split), I: independent.
enum class SplitModelKind { kFS, kDS, kMD, kG, kI };

inline constexpr std::array<SplitModelKind, 5> kAllSplitModels = {
    SplitModelKind::kI, SplitModelKind::kFS, SplitModelKind::kDS,
    SplitModelKind::kMD, SplitModelKind::kG};

// Lowercase short name: "fs", "ds", "md", "g", "i".
std::string_view split_model_name(SplitModelKind kind);
std::optional<SplitModelKind> parse_split_model(std::string_view name);

}  // namespace phigeo
