#include "ipslab/state_space.hpp"

#include <cctype>
#include <sstream>
#include <stdexcept>

namespace ipslab {

std::uint64_t checked_power(int q, std::size_t sites) {
  if (q < 2) throw std::invalid_argument("alphabet size must be >= 2");
  std::uint64_t n = 1;
  for (std::size_t k = 0; k < sites; ++k) {
    n *= static_cast<std::uint64_t>(q);
    if (n > kMaxStates)
      throw std::length_error("state space too large: q^" + std::to_string(sites) +
                              " exceeds 2^24");
  }
  return n;
}

StateSpace::StateSpace(std::size_t sites, int q) : sites_(sites), q_(q) {
  size_ = checked_power(q, sites);
  stride_.assign(sites, 1);
  std::uint64_t s = 1;
  for (std::size_t k = sites; k-- > 0;) {
    stride_[k] = s;
    s *= static_cast<std::uint64_t>(q);
  }
}

void StateSpace::decode(std::uint64_t state, std::span<int> out) const {
  for (std::size_t k = sites_; k-- > 0;) {
    out[k] = static_cast<int>(state % static_cast<std::uint64_t>(q_));
    state /= static_cast<std::uint64_t>(q_);
  }
}

std::vector<int> StateSpace::decode(std::uint64_t state) const {
  std::vector<int> out(sites_);
  decode(state, out);
  return out;
}

std::uint64_t StateSpace::encode(std::span<const int> digits) const {
  if (digits.size() != sites_) throw std::invalid_argument("encode: wrong number of sites");
  std::uint64_t s = 0;
  for (int v : digits) {
    if (v < 0 || v >= q_) throw std::out_of_range("encode: state out of alphabet");
    s = s * static_cast<std::uint64_t>(q_) + static_cast<std::uint64_t>(v);
  }
  return s;
}

std::uint64_t StateSpace::project(std::uint64_t state, std::span<const std::size_t> positions) const {
  std::uint64_t s = 0;
  for (std::size_t p : positions) s = s * static_cast<std::uint64_t>(q_) + digit(state, p);
  return s;
}

std::uint64_t StateSpace::substitute(std::uint64_t state, std::span<const std::size_t> positions,
                                     std::uint64_t sub) const {
  for (std::size_t k = positions.size(); k-- > 0;) {
    state = with_digit(state, positions[k], static_cast<int>(sub % static_cast<std::uint64_t>(q_)));
    sub /= static_cast<std::uint64_t>(q_);
  }
  return state;
}

std::vector<std::uint32_t> projection_table(const StateSpace& full,
                                            std::span<const std::size_t> positions) {
  std::vector<std::uint32_t> out(full.size());
  for (std::uint64_t s = 0; s < full.size(); ++s)
    out[s] = static_cast<std::uint32_t>(full.project(s, positions));
  return out;
}

std::string config_string(std::span<const int> values, int q) {
  std::ostringstream os;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (q > 9 && k) os << ',';
    os << values[k] + 1;
  }
  return os.str();
}

std::vector<int> parse_config_string(const std::string& s, int q) {
  std::vector<int> out;
  auto push = [&](int label) {
    if (label < 1 || label > q)
      throw std::invalid_argument("config string '" + s + "': state " + std::to_string(label) +
                                  " outside 1.." + std::to_string(q));
    out.push_back(label - 1);
  };
  if (s.find(',') != std::string::npos || q > 9) {
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.empty()) throw std::invalid_argument("config string '" + s + "': empty field");
      std::size_t used = 0;
      int v = std::stoi(tok, &used);
      if (used != tok.size()) throw std::invalid_argument("config string '" + s + "': bad field");
      push(v);
    }
  } else {
    for (char c : s) {
      if (!std::isdigit(static_cast<unsigned char>(c)))
        throw std::invalid_argument("config string '" + s + "': bad character");
      push(c - '0');
    }
  }
  return out;
}

}  // namespace ipslab
