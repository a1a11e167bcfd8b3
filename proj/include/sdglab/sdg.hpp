#pragma once

#include <bit>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "sdglab/error.hpp"

namespace sdgl {

inline constexpr int kNumSdgs = 17;

constexpr bool is_valid_sdg(long long sdg) noexcept { return sdg >= 1 && sdg <= kNumSdgs; }

/// A subset of the goals 1..17, stored as a bit mask.
class SdgSet {
 public:
  constexpr SdgSet() = default;
  SdgSet(std::initializer_list<int> sdgs) {
    for (int g : sdgs) insert(g);
  }

  static constexpr SdgSet all() noexcept { return from_mask((1u << kNumSdgs) - 1u); }
  static constexpr SdgSet from_mask(std::uint32_t mask) noexcept {
    SdgSet s;
    s.mask_ = mask & ((1u << kNumSdgs) - 1u);
    return s;
  }

  void insert(int sdg) {
    if (!is_valid_sdg(sdg)) {
      throw Error(ErrorCode::Schema, "SDG id " + std::to_string(sdg) + " outside 1..17");
    }
    mask_ |= bit(sdg);
  }
  constexpr void erase(int sdg) noexcept {
    if (is_valid_sdg(sdg)) mask_ &= ~bit(sdg);
  }
  constexpr bool contains(int sdg) const noexcept {
    return is_valid_sdg(sdg) && (mask_ & bit(sdg)) != 0;
  }
  constexpr bool empty() const noexcept { return mask_ == 0; }
  constexpr int size() const noexcept { return std::popcount(mask_); }
  constexpr std::uint32_t mask() const noexcept { return mask_; }

  constexpr bool is_subset_of(SdgSet other) const noexcept {
    return (mask_ & ~other.mask_) == 0;
  }
  constexpr SdgSet operator|(SdgSet o) const noexcept { return from_mask(mask_ | o.mask_); }
  constexpr SdgSet operator&(SdgSet o) const noexcept { return from_mask(mask_ & o.mask_); }
  SdgSet& operator|=(SdgSet o) noexcept {
    mask_ |= o.mask_;
    return *this;
  }

  /// Members in ascending order.
  std::vector<int> to_vector() const {
    std::vector<int> out;
    for (int g = 1; g <= kNumSdgs; ++g) {
      if (contains(g)) out.push_back(g);
    }
    return out;
  }

  constexpr bool operator==(const SdgSet&) const = default;

 private:
  static constexpr std::uint32_t bit(int sdg) noexcept { return 1u << (sdg - 1); }
  std::uint32_t mask_ = 0;
};

/// "1|3|17" form used in CSV columns.
inline std::string to_pipe_list(SdgSet s) {
  std::string out;
  for (int g : s.to_vector()) {
    if (!out.empty()) out += '|';
    out += std::to_string(g);
  }
  return out;
}

}  // namespace sdgl
