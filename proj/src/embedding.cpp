#include "repcap/embedding.hpp"

#include "repcap/error.hpp"

namespace repcap {

EmbeddingSet::EmbeddingSet(int dim) : dim_(dim), vectors_(dim, 0) {
  if (dim < 1) throw Error(ErrorCode::InvalidArgument, "embedding dimension must be >= 1");
}

EmbeddingSet::EmbeddingSet(std::vector<std::string> labels, Matrix vectors)
    : dim_(static_cast<int>(vectors.rows())),
      labels_(std::move(labels)),
      vectors_(std::move(vectors)) {
  if (dim_ < 1) throw Error(ErrorCode::InvalidArgument, "embedding dimension must be >= 1");
  if (static_cast<Eigen::Index>(labels_.size()) != vectors_.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "label count differs from vector count");
  }
  for (const auto& l : labels_) {
    if (l.empty()) throw Error(ErrorCode::InvalidArgument, "labels must be nonempty");
  }
}

void EmbeddingSet::add(std::string label, const Vector& v) {
  if (label.empty()) throw Error(ErrorCode::InvalidArgument, "labels must be nonempty");
  if (v.size() != dim_) {
    throw Error(ErrorCode::DimensionMismatch, "vector of length " + std::to_string(v.size()) +
                                                  ", set dimension is " + std::to_string(dim_));
  }
  vectors_.conservativeResize(Eigen::NoChange, vectors_.cols() + 1);
  vectors_.col(vectors_.cols() - 1) = v;
  labels_.push_back(std::move(label));
}

std::map<std::string, std::vector<std::size_t>> EmbeddingSet::groups() const {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < labels_.size(); ++i) out[labels_[i]].push_back(i);
  return out;
}

EmbeddingSet EmbeddingSet::subset(const std::vector<std::size_t>& indices) const {
  Matrix m(dim_, static_cast<Eigen::Index>(indices.size()));
  std::vector<std::string> labels;
  labels.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    m.col(static_cast<Eigen::Index>(k)) = vectors_.col(static_cast<Eigen::Index>(indices[k]));
    labels.push_back(labels_[indices[k]]);
  }
  return EmbeddingSet(std::move(labels), std::move(m));
}

}  // namespace repcap
