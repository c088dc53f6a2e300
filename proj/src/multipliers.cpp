// Copyright (c) LagrangeKit contributors

#include "lagrangekit/multipliers.hpp"

#include <string>
#include <unordered_set>

#include "lagrangekit/core.hpp"

namespace lagrangekit {

namespace {

// Shared by the dense and indexed paths so both round identically.
double clip_nonnegative(double v) { return v < 0.0 ? 0.0 : v; }

}  // namespace

Multiplier::Multiplier(Kind kind, ConstraintType type, Vector values)
    : kind_(kind), type_(type), values_(std::move(values)), counts_(values_.size(), 0) {
  if (values_.size() == 0) throw InvalidArgument("multiplier size must be positive");
  if (!values_.allFinite()) throw InvalidArgument("multiplier values must be finite");
  project();
}

Multiplier Multiplier::dense(ConstraintType type, Eigen::Index size, double init) {
  if (size <= 0) throw InvalidArgument("multiplier size must be positive");
  return Multiplier(Kind::Dense, type, Vector::Constant(size, init));
}

Multiplier Multiplier::indexed(ConstraintType type, Eigen::Index size, double init) {
  if (size <= 0) throw InvalidArgument("multiplier size must be positive");
  return Multiplier(Kind::Indexed, type, Vector::Constant(size, init));
}

Multiplier Multiplier::from_values(Kind kind, ConstraintType type, Vector values) {
  return Multiplier(kind, type, std::move(values));
}

void Multiplier::project() {
  if (type_ == ConstraintType::Inequality) values_ = values_.unaryExpr(&clip_nonnegative);
}

void check_indices(std::span<const Eigen::Index> indices, Eigen::Index size) {
  std::unordered_set<Eigen::Index> seen;
  seen.reserve(indices.size());
  for (Eigen::Index i : indices) {
    if (i < 0 || i >= size)
      throw InvalidArgument("index " + std::to_string(i) + " out of range for size " +
                            std::to_string(size));
    if (!seen.insert(i).second) throw InvalidArgument("duplicate index " + std::to_string(i));
  }
}

void Multiplier::apply_dual_delta(const Vector& delta, const std::optional<IndexList>& indices) {
  if (!delta.allFinite()) throw InvalidArgument("dual delta must be finite");
  if (!indices) {
    if (delta.size() != size())
      throw InvalidArgument("dual delta has length " + std::to_string(delta.size()) +
                            ", expected " + std::to_string(size()));
    values_ += delta;
    project();
    if (is_indexed())
      for (auto& c : counts_) ++c;
    return;
  }
  if (static_cast<Eigen::Index>(indices->size()) != delta.size())
    throw InvalidArgument("dual delta length does not match the number of indices");
  check_indices(*indices, size());
  for (std::size_t k = 0; k < indices->size(); ++k) {
    const Eigen::Index i = (*indices)[k];
    double v = values_(i) + delta(static_cast<Eigen::Index>(k));
    if (type_ == ConstraintType::Inequality) v = clip_nonnegative(v);
    values_(i) = v;
    if (is_indexed()) ++counts_[static_cast<std::size_t>(i)];
  }
}

void Multiplier::restore(Vector values, std::vector<std::int64_t> counts) {
  if (values.size() != size()) throw InvalidArgument("restored multiplier has the wrong size");
  if (counts.size() != static_cast<std::size_t>(size()))
    throw InvalidArgument("restored counters have the wrong size");
  if (!values.allFinite()) throw InvalidArgument("restored multiplier is not finite");
  if (type_ == ConstraintType::Inequality && (values.array() < 0).any())
    throw InvalidArgument("restored inequality multiplier is negative");
  values_ = std::move(values);
  counts_ = std::move(counts);
}

Multiplier project(Multiplier multiplier) {
  multiplier.project();
  return multiplier;
}

Multiplier apply_dual_delta(Multiplier multiplier, const Vector& delta,
                            const std::optional<IndexList>& indices) {
  multiplier.apply_dual_delta(delta, indices);
  return multiplier;
}

Vector gather(const Vector& values, const std::optional<IndexList>& indices) {
  if (!indices) return values;
  Vector out(static_cast<Eigen::Index>(indices->size()));
  for (std::size_t k = 0; k < indices->size(); ++k) {
    const Eigen::Index i = (*indices)[k];
    if (i < 0 || i >= values.size())
      throw InvalidArgument("index " + std::to_string(i) + " out of range for size " +
                            std::to_string(values.size()));
    out(static_cast<Eigen::Index>(k)) = values(i);
  }
  return out;
}

Vector multiplier_values_for(const ConstraintState& state, const Multiplier& multiplier) {
  return gather(multiplier.values(), state.observed_indices);
}

}  // namespace lagrangekit
