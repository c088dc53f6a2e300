// Copyright (c) LagrangeKit contributors

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "lagrangekit/optim.hpp"

namespace lagrangekit {

/// Checkpoint files are line-oriented text:
///
///   LAGRANGEKIT-CKPT v1
///   <key> = <value>
///   ...
///
/// with keys in sorted order. Values are quoted strings, integers, arrays
/// `[a, b, ...]`, or `absent` for buffers that have not been created yet.
/// Floating-point numbers are hexadecimal literals (`%a`), so a load restores
/// every double bit for bit.
///
/// Keys: version, signature, step, x, groups.<id>.multiplier,
/// groups.<id>.multiplier.counts, groups.<id>.penalty, opt.primal.kind,
/// opt.primal.step_count, opt.primal.first, opt.primal.second,
/// opt.dual.<id>.kind, opt.dual.<id>.error_average, opt.dual.<id>.seen,
/// opt.penalty.<id>.previous_norm.
inline constexpr const char* kCheckpointMagic = "LAGRANGEKIT-CKPT v1";
inline constexpr std::int64_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { Io, UnsupportedVersion, SignatureMismatch, CorruptSection };

  CheckpointError(Kind kind, std::string section, const std::string& what)
      : std::runtime_error(what), kind_(kind), section_(std::move(section)) {}

  Kind kind() const { return kind_; }
  /// Offending key, or the group id for signature mismatches.
  const std::string& section() const { return section_; }

 private:
  Kind kind_;
  std::string section_;
};

std::string serialize_checkpoint(const ConstrainedOptimizer& optimizer);

/// Restores the state in `text` into `optimizer` and its problem and returns
/// the saved step counter. Everything is validated before anything is
/// modified.
std::int64_t restore_checkpoint(const std::string& text, ConstrainedOptimizer& optimizer);

/// Writes to a temporary file next to `path` and renames it into place. On
/// failure no file is left at `path` (a previous one stays intact).
void save_checkpoint(const ConstrainedOptimizer& optimizer, const std::filesystem::path& path);

std::int64_t load_checkpoint(const std::filesystem::path& path, ConstrainedOptimizer& optimizer);

/// "%a" formatting of a double.
std::string format_hex_double(double v);

}  // namespace lagrangekit
