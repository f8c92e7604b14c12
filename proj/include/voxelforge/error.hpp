#pragma once

#include <stdexcept>
#include <string>

namespace vf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument or violated precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// File exists but its header or payload is malformed or unsupported.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A labeler found nothing to label (no air pockets, no bright bone, ...).
class NoCandidate : public Error {
 public:
  using Error::Error;
};

}  // namespace vf
