#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ferns {

// Base for every error raised by the library. Subclasses map onto the exit
// codes used by the command-line tool.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class UnsupportedFormat : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Programming error: a pixel read fell outside the image.
class OutOfBounds : public Error {
 public:
  using Error::Error;
};

class InsufficientKeypoints : public Error {
 public:
  InsufficientKeypoints(std::size_t requested, std::size_t found)
      : Error("requested " + std::to_string(requested) +
              " stable keypoints but only " + std::to_string(found) +
              " could be found"),
        requested_(requested),
        found_(found) {}

  std::size_t requested() const noexcept { return requested_; }
  std::size_t found() const noexcept { return found_; }

 private:
  std::size_t requested_;
  std::size_t found_;
};

class InvalidLabel : public Error {
 public:
  using Error::Error;
};

class InvalidPatch : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class CorruptModel : public Error {
 public:
  using Error::Error;
};

class EmptyTestSet : public Error {
 public:
  using Error::Error;
};

}  // namespace ferns
