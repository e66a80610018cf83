#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace gsanim {

inline constexpr int kMaxInfluences = 8;

struct WeightEntry {
  int joint = 0;
  double weight = 0.0;

  friend bool operator==(const WeightEntry&, const WeightEntry&) = default;
};

/// Sparse per-vertex joint weights stored row-compressed. Every row holds at
/// most kMaxInfluences entries, weights in [0,1], summing to one.
class SkinningWeights {
 public:
  SkinningWeights() = default;

  /// Builds from dense rows (V x J). Each row keeps its kMaxInfluences largest
  /// entries (ties broken by lower joint index) and is renormalized unless its
  /// sum is within `keep_tolerance` of one.
  static SkinningWeights from_dense(const std::vector<std::vector<double>>& rows, double keep_tolerance = 0.0);

  /// Appends a row; entries are truncated to kMaxInfluences and renormalized
  /// unless their sum is within `keep_tolerance` of one.
  void push_row(std::vector<WeightEntry> entries, double keep_tolerance = 0.0);

  std::size_t rows() const {
    return offsets_.empty() ? 0 : offsets_.size() - 1;
  }
  std::span<const WeightEntry> row(std::size_t i) const {
    return {entries_.data() + offsets_[i], entries_.data() + offsets_[i + 1]};
  }

  /// Largest joint index referenced plus one.
  int joint_span() const;

  /// Row as a dense vector of length `joints`.
  std::vector<double> dense_row(std::size_t i, int joints) const;

  /// Subset of rows, in the given order.
  SkinningWeights select(std::span<const std::size_t> indices) const;

  /// Throws InvariantError if any row violates the weight invariants.
  void validate(double tolerance = 1e-6) const;

  friend bool operator==(const SkinningWeights&, const SkinningWeights&) = default;

 private:
  std::vector<std::size_t> offsets_{0};
  std::vector<WeightEntry> entries_;
};

} // namespace gsanim
