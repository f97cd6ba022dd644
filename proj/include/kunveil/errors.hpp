// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <stdexcept>
#include <string>

namespace kunveil {

// Thrown when a floating-point computation cannot produce a usable result
// (singular normal matrix, inadmissible weighting, failed decomposition).
class numerical_error : public std::runtime_error {
public:
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when an observation sequence does not visit every state, so the
// empirical kernel has an undefined row.
class unvisited_state_error : public std::runtime_error {
public:
  unvisited_state_error(const std::string& what, int state)
      : std::runtime_error(what), state_(state) {}
  // 0-based index of the first state with no observed outgoing transition.
  int state() const noexcept { return state_; }

private:
  int state_;
};

// Thrown when conditioned sampling gives up after the retry budget.
class retry_exhausted_error : public std::runtime_error {
public:
  explicit retry_exhausted_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace kunveil
