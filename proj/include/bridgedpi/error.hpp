#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bridgedpi {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
  using Error::Error;
};

class ParseError : public Error {
public:
  ParseError(const std::string &what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

class DataError : public Error {
public:
  using Error::Error;
};

class CheckpointError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

} // namespace bridgedpi
