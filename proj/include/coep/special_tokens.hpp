#pragma once

#include "coep/numerics/ops.hpp"

namespace coep {

inline constexpr TokenId kBos = 0;  // <s>
inline constexpr TokenId kEos = 1;  // </s>
inline constexpr TokenId kPad = 2;  // <pad>
inline constexpr TokenId kUnk = 3;  // <unk>
inline constexpr TokenId kNumSpecial = 4;

inline bool is_special(TokenId id) { return id >= 0 && id < kNumSpecial; }

}  // namespace coep
