#pragma once

#include "repcap/stats.hpp"

#include <map>
#include <string>
#include <vector>

namespace repcap {

/// Labeled collection of fixed-dimension vectors, one per column.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  explicit EmbeddingSet(int dim);
  EmbeddingSet(std::vector<std::string> labels, Matrix vectors);

  int dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }

  void add(std::string label, const Vector& v);

  const std::string& label(std::size_t i) const { return labels_[i]; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  auto vector(std::size_t i) const { return vectors_.col(static_cast<Eigen::Index>(i)); }
  const Matrix& matrix() const noexcept { return vectors_; }

  /// Distinct labels in lexicographic order mapped to their record indices.
  std::map<std::string, std::vector<std::size_t>> groups() const;

  EmbeddingSet subset(const std::vector<std::size_t>& indices) const;

 private:
  int dim_ = 0;
  std::vector<std::string> labels_;
  Matrix vectors_;
};

}  // namespace repcap
