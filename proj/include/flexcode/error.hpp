#pragma once

#include <stdexcept>
#include <string>

namespace flexcode {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind
{
  config,
  io,
  data_contract,
  numeric
};

class Error : public std::runtime_error
{
public:
  Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(what)
    , kind_(kind)
  {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

//! Invalid configuration (empty grids, bad fractions, unknown names).
struct ConfigError : Error
{
  explicit ConfigError(const std::string& w)
    : Error(ErrorKind::config, w)
  {}
};

struct IoError : Error
{
  explicit IoError(const std::string& w)
    : Error(ErrorKind::io, w)
  {}
};

//! Inputs violate a documented precondition: domain, shape or size.
struct DataError : Error
{
  explicit DataError(const std::string& w)
    : Error(ErrorKind::data_contract, w)
  {}
};

struct DomainError : DataError
{
  using DataError::DataError;
};

struct ShapeError : DataError
{
  using DataError::DataError;
};

struct SizeError : DataError
{
  using DataError::DataError;
};

struct NumericError : Error
{
  explicit NumericError(const std::string& w)
    : Error(ErrorKind::numeric, w)
  {}
};

inline int
exit_code(ErrorKind kind)
{
  switch (kind) {
    case ErrorKind::config:
      return 2;
    case ErrorKind::io:
      return 3;
    case ErrorKind::data_contract:
      return 4;
    case ErrorKind::numeric:
      return 5;
  }
  return 1;
}

} // namespace flexcode
