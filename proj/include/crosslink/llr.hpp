#pragma once

#include <algorithm>

namespace crosslink {

// Shared log-likelihood-ratio conventions: positive LLR means bit 0 is more
// likely, and every producer clips to this magnitude before values reach a
// decoder.
inline constexpr double kLlrClip = 30.0;

inline double clip_llr(double v) {
    return std::clamp(v, -kLlrClip, kLlrClip);
}

}  // namespace crosslink
