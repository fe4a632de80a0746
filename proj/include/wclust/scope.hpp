#pragma once

#include <string>
#include <string_view>

#include "wclust/error.hpp"

namespace wclust {

/// Which weights share a codebook: every conv layer together, or one table per layer.
enum class Scope : unsigned char { all_layers = 0, per_layer = 1 };

inline const char* to_string(Scope s) { return s == Scope::all_layers ? "all-layers" : "per-layer"; }

inline Scope parse_scope(std::string_view text) {
    if (text == "all-layers" || text == "all_layers" || text == "global") return Scope::all_layers;
    if (text == "per-layer" || text == "per_layer" || text == "local") return Scope::per_layer;
    throw ArgumentError("unknown clustering scope '" + std::string(text) + "'");
}

}  // namespace wclust
