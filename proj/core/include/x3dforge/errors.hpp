#pragma once

#include <stdexcept>
#include <string>

namespace x3df {

// Invalid data: malformed spec, broken invariant, bad file content.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// An expansion axis cannot reach the requested cost, or a contraction
// target is out of range.
class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& msg) : std::runtime_error(msg) {}
};

// A scoring criterion could not evaluate the given factors
// (budget exceeded, missing replay key, ...).
class CriterionError : public std::runtime_error {
 public:
  explicit CriterionError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace x3df
