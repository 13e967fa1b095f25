#pragma once

#include <stdexcept>
#include <string>

namespace bmcond {

/// Argument outside the domain of a density, moment or transform.
class domain_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A statistic was requested from too few observations (e.g. a variance from one path).
class insufficient_data : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A bin store would exceed its configured memory cap.
class capacity_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

[[noreturn]] inline void fail_domain(const std::string& what) { throw domain_error(what); }

inline void require(bool ok, const char* what) {
  if (!ok) fail_domain(what);
}

}  // namespace detail
}  // namespace bmcond
