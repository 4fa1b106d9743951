#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ensnet {

// Shapes that cannot be combined by an operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A caller broke an operation precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Invalid model or run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or missing dataset input.
class DataError : public std::runtime_error {
 public:
  enum class Kind { other, missing_file, bad_magic, truncated, count_mismatch, bad_label, bad_length };

  explicit DataError(const std::string& what, Kind kind = Kind::other) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Unreadable, truncated, or version-incompatible checkpoint.
class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_ = 0;
};

// A well-formed checkpoint written by an incompatible format version.
class CheckpointVersionError : public CheckpointError {
 public:
  CheckpointVersionError(std::uint32_t found, std::uint32_t supported)
      : CheckpointError("checkpoint format version " + std::to_string(found) + " is not supported (expected " +
                            std::to_string(supported) + ")",
                        8),
        found_(found) {}

  std::uint32_t found() const noexcept { return found_; }

 private:
  std::uint32_t found_;
};

}  // namespace ensnet
