// Copyright (c) LagrangeKit contributors

#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include <Eigen/Core>

#include "lagrangekit/types.hpp"

namespace lagrangekit {

/// Element-wise projection onto the non-negative orthant.
template <typename Derived>
auto positive_part(const Eigen::MatrixBase<Derived>& v) {
  return v.cwiseMax(typename Derived::Scalar(0));
}

/// Dual variables of one constraint group: lambda >= 0 for inequalities, mu
/// free for equalities.
///
/// Dense and indexed multipliers share storage and update rules; an indexed
/// multiplier additionally counts how many times each entry was updated.
/// Inequality values are non-negative after every public operation.
class Multiplier {
 public:
  enum class Kind { Dense, Indexed };

  Multiplier() = default;

  static Multiplier dense(ConstraintType type, Eigen::Index size, double init = 0.0);
  static Multiplier indexed(ConstraintType type, Eigen::Index size, double init = 0.0);
  /// Takes explicit initial values; inequality values are projected.
  static Multiplier from_values(Kind kind, ConstraintType type, Vector values);

  Kind kind() const { return kind_; }
  bool is_indexed() const { return kind_ == Kind::Indexed; }
  ConstraintType constraint_type() const { return type_; }
  Eigen::Index size() const { return values_.size(); }

  const Vector& values() const { return values_; }
  /// Per-entry update counters; all zero for dense multipliers.
  const std::vector<std::int64_t>& update_counts() const { return counts_; }

  /// values[indices[k]] += delta[k] (or values += delta when `indices` is
  /// empty), then projection. Throws InvalidArgument on length mismatch,
  /// out-of-range or duplicate indices, or non-finite delta; the multiplier is
  /// unchanged in that case.
  void apply_dual_delta(const Vector& delta, const std::optional<IndexList>& indices = std::nullopt);

  /// Restores raw state (checkpoint load). Validates before mutating.
  void restore(Vector values, std::vector<std::int64_t> counts);

  void project();

 private:
  Multiplier(Kind kind, ConstraintType type, Vector values);

  Kind kind_ = Kind::Dense;
  ConstraintType type_ = ConstraintType::Inequality;
  Vector values_;
  std::vector<std::int64_t> counts_;
};

/// Returns a projected copy: max(v, 0) for inequality multipliers, identity
/// for equality multipliers.
Multiplier project(Multiplier multiplier);

/// Value-semantics wrapper around Multiplier::apply_dual_delta.
Multiplier apply_dual_delta(Multiplier multiplier, const Vector& delta,
                            const std::optional<IndexList>& indices = std::nullopt);

/// Throws InvalidArgument unless every index is in [0, size) and unique.
void check_indices(std::span<const Eigen::Index> indices, Eigen::Index size);

/// values[indices] in index order, or a copy of `values` when indices are
/// absent.
Vector gather(const Vector& values, const std::optional<IndexList>& indices);

struct ConstraintState;

/// Multiplier entries matching the measured entries of `state`.
Vector multiplier_values_for(const ConstraintState& state, const Multiplier& multiplier);

}  // namespace lagrangekit
