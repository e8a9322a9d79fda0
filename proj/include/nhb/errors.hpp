#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nhb {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A primitive (log, sqrt, /, ^, tan) was evaluated outside its domain.
class DomainError : public Error {
 public:
  DomainError(std::string primitive, const std::string& detail)
      : Error("domain error in '" + primitive + "': " + detail), primitive_(std::move(primitive)) {}
  const std::string& primitive() const noexcept { return primitive_; }

 private:
  std::string primitive_;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t offset, std::string expected, const std::string& found)
      : Error("syntax error at offset " + std::to_string(offset) + ": expected " + expected +
              ", found " + found),
        offset_(offset),
        expected_(std::move(expected)) {}
  std::size_t offset() const noexcept { return offset_; }
  const std::string& expected() const noexcept { return expected_; }

 private:
  std::size_t offset_;
  std::string expected_;
};

class UnknownFunction : public Error {
 public:
  using Error::Error;
};

/// Identifier not declared in the symbol table an expression is compiled against.
class UnknownIdentifier : public Error {
 public:
  using Error::Error;
};

/// Identifier missing from a name->value binding at evaluation time.
class UnboundIdentifier : public Error {
 public:
  using Error::Error;
};

/// Wrong arity, missing section, asymmetric metric, name collisions in a system file.
class StructuralError : public Error {
 public:
  using Error::Error;
};

class NotSPD : public Error {
 public:
  using Error::Error;
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

class FrameInvalid : public Error {
 public:
  using Error::Error;
};

class FrameDegenerate : public Error {
 public:
  using Error::Error;
};

class NotOnM : public Error {
 public:
  using Error::Error;
};

/// C Ω⁻¹ Cᵀ is singular: T^D M fails to be a symplectic sub-bundle at the point.
class SplittingDegenerate : public Error {
 public:
  using Error::Error;
};

class SectionNotInD : public Error {
 public:
  using Error::Error;
};

/// Internal: a dense factorization met a zero pivot.
class SingularMatrix : public Error {
 public:
  using Error::Error;
};

}  // namespace nhb
