#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sncpd {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or size mismatch between operands.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// An iterative routine ran out of iterations before reaching its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& msg, double residual, int iterations)
      : Error(msg + " (residual=" + std::to_string(residual) +
              " after " + std::to_string(iterations) + " iterations)"),
        residual(residual),
        iterations(iterations) {}

  double residual;
  int iterations;
};

// A matrix factorization failed (not SPD, singular, ...).
class DecompositionError : public Error {
 public:
  explicit DecompositionError(const std::string& msg) : Error(msg) {}
};

// Malformed input file.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& msg)
      : Error(file + ":" + std::to_string(line) + ": " + msg),
        file(file),
        line(line) {}

  std::string file;
  std::size_t line;
};

// Invalid or inconsistent run configuration.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// A file could not be opened, read or written.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// Non-fatal diagnostics go through here so tests can silence or capture them.
void warn(const std::string& msg);
void set_warn_sink(void (*sink)(const std::string&));

}  // namespace sncpd
