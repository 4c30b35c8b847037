#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ufgw/cost.hpp"

namespace ufgw {

enum class Modality { text, image, other };

// Dense per-node embeddings for one modality. Rows must be finite and nonzero
// (cosine distance is undefined for the zero vector); validate() enforces both.
struct EmbeddingMatrix {
  Eigen::MatrixXd values;
  Modality modality = Modality::other;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index dim() const { return values.cols(); }
  void validate() const;
};

// Pairwise cosine distances 1 - <h_i, h_j>/(|h_i||h_j|) over the selected rows.
// Symmetric, zero diagonal, entries clamped to [0, 2]. Unnormalized.
CostMatrix cosine_cost(const EmbeddingMatrix& emb, const std::vector<std::uint32_t>& rows);

// Mean-normalizes the cost and attaches the uniform distribution 1/n.
MeasureSpace build_measure_space(const CostMatrix& cost, double delta);

// Wraps an already-normalized cost without rescaling it again.
MeasureSpace measure_space_from_normalized(CostMatrix cost);

// Embedding file I/O. Binary layout: magic "EMB1", N: u64, d: u64, then N*d
// float32 row-major, all little-endian. The text alternative is one row per
// line, space-separated. load_embeddings() sniffs the magic bytes.
EmbeddingMatrix load_embeddings(const std::string& path, Modality modality = Modality::other);
void save_embeddings_binary(const EmbeddingMatrix& emb, const std::string& path);
void save_embeddings_text(const EmbeddingMatrix& emb, const std::string& path);

}  // namespace ufgw
