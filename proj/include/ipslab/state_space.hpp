#ifndef IPSLAB_STATE_SPACE_HPP
#define IPSLAB_STATE_SPACE_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ipslab/geometry.hpp"

namespace ipslab {

// configurations of q^sites states; larger spaces are refused
inline constexpr std::uint64_t kMaxStates = std::uint64_t{1} << 24;

std::uint64_t checked_power(int q, std::size_t sites);

// Mixed-radix indexing; site 0 is the most significant digit.
class StateSpace {
 public:
  StateSpace() = default;
  StateSpace(std::size_t sites, int q);

  std::size_t sites() const { return sites_; }
  int q() const { return q_; }
  std::uint64_t size() const { return size_; }
  std::uint64_t stride(std::size_t site) const { return stride_[site]; }

  int digit(std::uint64_t state, std::size_t site) const {
    return static_cast<int>((state / stride_[site]) % static_cast<std::uint64_t>(q_));
  }
  std::uint64_t with_digit(std::uint64_t state, std::size_t site, int value) const {
    return state + (static_cast<std::int64_t>(value) - digit(state, site)) *
                       static_cast<std::int64_t>(stride_[site]);
  }
  void decode(std::uint64_t state, std::span<int> out) const;
  std::vector<int> decode(std::uint64_t state) const;
  std::uint64_t encode(std::span<const int> digits) const;

  // index of the sub-configuration read at the given positions
  std::uint64_t project(std::uint64_t state, std::span<const std::size_t> positions) const;
  // replaces the digits at positions by the digits of sub (a configuration on those positions)
  std::uint64_t substitute(std::uint64_t state, std::span<const std::size_t> positions,
                           std::uint64_t sub) const;

 private:
  std::size_t sites_ = 0;
  int q_ = 1;
  std::uint64_t size_ = 1;
  std::vector<std::uint64_t> stride_;
};

// projection index of every state of `full` onto positions
std::vector<std::uint32_t> projection_table(const StateSpace& full,
                                            std::span<const std::size_t> positions);

// A configuration on a window; states are stored 0..q-1 and printed 1..q.
struct Config {
  Window window;
  std::vector<int> values;
};

std::string config_string(std::span<const int> values, int q);
std::vector<int> parse_config_string(const std::string& s, int q);

}  // namespace ipslab

#endif
