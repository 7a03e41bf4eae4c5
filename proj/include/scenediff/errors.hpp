#pragma once

#include <stdexcept>
#include <string>

namespace scenediff {

// Shape or dimension disagreement between tensors/images.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid argument value (bad range, unknown name, degenerate geometry).
class ValueError : public std::runtime_error {
 public:
  explicit ValueError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed on-disk content (labels JSON, checkpoint, PNG).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem failure (missing file, unreadable/unwritable path).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace scenediff
