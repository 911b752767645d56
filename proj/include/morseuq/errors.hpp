#pragma once

#include <stdexcept>
#include <string>

namespace morseuq {

// Violated precondition on an API call (caller bug).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Bad input data: malformed files, inconsistent cases, missing records.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractError(what);
}

}  // namespace morseuq
