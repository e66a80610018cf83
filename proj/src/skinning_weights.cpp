#include "gsanim/skinning_weights.hpp"

#include "gsanim/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gsanim {

SkinningWeights SkinningWeights::from_dense(const std::vector<std::vector<double>>& rows, double keep_tolerance) {
  SkinningWeights out;
  for (const auto& r : rows) {
    std::vector<WeightEntry> entries;
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (r[j] > 0.0) {
        entries.push_back({static_cast<int>(j), r[j]});
      }
    }
    out.push_row(std::move(entries), keep_tolerance);
  }
  return out;
}

void SkinningWeights::push_row(std::vector<WeightEntry> entries, double keep_tolerance) {
  for (const auto& e : entries) {
    if (!std::isfinite(e.weight) || e.weight < 0.0 || e.joint < 0) {
      throw InvariantError("skinning weight entry is negative or non-finite");
    }
  }
  std::erase_if(entries, [](const WeightEntry& e) { return e.weight == 0.0; });
  if (entries.size() > static_cast<std::size_t>(kMaxInfluences)) {
    std::stable_sort(entries.begin(), entries.end(), [](const WeightEntry& a, const WeightEntry& b) {
      return a.weight > b.weight || (a.weight == b.weight && a.joint < b.joint);
    });
    entries.resize(kMaxInfluences);
  }
  std::sort(entries.begin(), entries.end(),
            [](const WeightEntry& a, const WeightEntry& b) { return a.joint < b.joint; });
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].joint == entries[i - 1].joint) {
      throw InvariantError("duplicate joint in skinning weight row");
    }
  }
  double sum = 0.0;
  for (const auto& e : entries) {
    sum += e.weight;
  }
  if (entries.empty() || !(sum > 0.0)) {
    throw InvariantError("skinning weight row " + std::to_string(rows()) + " is empty");
  }
  if (std::abs(sum - 1.0) > keep_tolerance) {
    for (auto& e : entries) {
      e.weight /= sum;
    }
  }
  entries_.insert(entries_.end(), entries.begin(), entries.end());
  offsets_.push_back(entries_.size());
}

int SkinningWeights::joint_span() const {
  int span = 0;
  for (const auto& e : entries_) {
    span = std::max(span, e.joint + 1);
  }
  return span;
}

std::vector<double> SkinningWeights::dense_row(std::size_t i, int joints) const {
  std::vector<double> out(static_cast<std::size_t>(joints), 0.0);
  for (const auto& e : row(i)) {
    out.at(static_cast<std::size_t>(e.joint)) = e.weight;
  }
  return out;
}

SkinningWeights SkinningWeights::select(std::span<const std::size_t> indices) const {
  SkinningWeights out;
  out.entries_.reserve(indices.size() * 2);
  for (std::size_t i : indices) {
    const auto r = row(i);
    out.entries_.insert(out.entries_.end(), r.begin(), r.end());
    out.offsets_.push_back(out.entries_.size());
  }
  return out;
}

void SkinningWeights::validate(double tolerance) const {
  for (std::size_t i = 0; i < rows(); ++i) {
    const auto r = row(i);
    if (r.empty() || r.size() > static_cast<std::size_t>(kMaxInfluences)) {
      throw InvariantError("skinning weight row " + std::to_string(i) + " has bad entry count");
    }
    double sum = 0.0;
    for (const auto& e : r) {
      if (!(e.weight >= 0.0 && e.weight <= 1.0)) {
        throw InvariantError("skinning weight outside [0,1] in row " + std::to_string(i));
      }
      sum += e.weight;
    }
    if (std::abs(sum - 1.0) > tolerance) {
      throw InvariantError("skinning weight row " + std::to_string(i) + " sums to " +
                           std::to_string(sum));
    }
  }
}

} // namespace gsanim
