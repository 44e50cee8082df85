#pragma once

#include <stdexcept>
#include <string>

namespace adrpipe {

// Base class for everything this library throws on purpose.
class error : public std::runtime_error {
 public:
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input file: bad offsets, unknown tags, broken delimiting.
class parse_error : public error {
 public:
  using error::error;
};

// Input parsed but violates a data-model invariant (offset out of bounds,
// surface mismatch, dangling review reference, overlapping plugin spans).
class integrity_error : public error {
 public:
  using error::error;
};

// Delimited file is missing or re-ordering required columns.
class schema_error : public error {
 public:
  using error::error;
};

// A field parsed but holds an out-of-range value (rating 7, duplicate id).
class value_error : public error {
 public:
  using error::error;
};

// Caller-supplied configuration is unusable (k < 2, empty drug set).
class config_error : public error {
 public:
  using error::error;
};

// Gold entities and predictions do not pair up one-to-one.
class alignment_error : public error {
 public:
  using error::error;
};

// An augmentation set leaks supervision from the evaluation corpus.
class provenance_error : public error {
 public:
  using error::error;
};

}  // namespace adrpipe
