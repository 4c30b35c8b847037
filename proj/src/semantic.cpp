#include "ufgw/semantic.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ufgw/errors.hpp"

namespace ufgw {

void EmbeddingMatrix::validate() const {
  if (!values.allFinite()) {
    throw ValidationError("embedding matrix contains non-finite entries");
  }
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    if (values.row(i).norm() == 0.0) {
      throw ValidationError("embedding row " + std::to_string(i) +
                            " is the zero vector; cosine distance is undefined");
    }
  }
}

CostMatrix mean_normalize(const CostMatrix& raw, double delta) {
  if (!raw.values.allFinite()) {
    throw ValidationError("cost matrix contains non-finite entries");
  }
  CostMatrix out;
  out.kind = raw.kind;
  out.normalization_mean = raw.values.mean();
  out.values = raw.values / (out.normalization_mean + delta);
  return out;
}

CostMatrix cosine_cost(const EmbeddingMatrix& emb, const std::vector<std::uint32_t>& rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd sel(n, emb.dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (rows[static_cast<std::size_t>(i)] >= emb.rows()) {
      throw InputError("row index " + std::to_string(rows[static_cast<std::size_t>(i)]) +
                       " out of range");
    }
    sel.row(i) = emb.values.row(rows[static_cast<std::size_t>(i)]);
  }
  Eigen::VectorXd norms = sel.rowwise().norm();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (norms(i) == 0.0) {
      throw ValidationError("embedding row " + std::to_string(rows[static_cast<std::size_t>(i)]) +
                            " is the zero vector; cosine distance is undefined");
    }
  }
  // denormal guard behind the explicit zero check
  norms = norms.cwiseMax(1e-12);

  Eigen::MatrixXd unit = sel.array().colwise() / norms.array();
  CostMatrix cost;
  cost.kind = CostKind::semantic;
  cost.values = (1.0 - (unit * unit.transpose()).array()).cwiseMax(0.0).cwiseMin(2.0);
  cost.values.diagonal().setZero();
  return cost;
}

MeasureSpace build_measure_space(const CostMatrix& cost, double delta) {
  MeasureSpace space;
  space.cost = mean_normalize(cost, delta);
  const auto n = cost.values.rows();
  space.mu = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  return space;
}

MeasureSpace measure_space_from_normalized(CostMatrix cost) {
  const auto n = cost.values.rows();
  MeasureSpace space;
  space.cost = std::move(cost);
  space.mu = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  return space;
}

namespace {

constexpr char kEmbMagic[4] = {'E', 'M', 'B', '1'};

EmbeddingMatrix load_embeddings_text(std::ifstream& in, const std::string& path,
                                     Modality modality) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<double> row;
    double x = 0.0;
    while (ls >> x) row.push_back(x);
    if (!ls.eof()) {
      throw InputError(path + ":" + std::to_string(lineno) + ": malformed number");
    }
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw InputError(path + ":" + std::to_string(lineno) + ": inconsistent row width");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw InputError(path + ": no embedding rows");
  }
  EmbeddingMatrix emb;
  emb.modality = modality;
  emb.values.resize(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      emb.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  emb.validate();
  return emb;
}

}  // namespace

EmbeddingMatrix load_embeddings(const std::string& path, Modality modality) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot open embedding file: " + path);
  }
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() == 4 && std::memcmp(magic, kEmbMagic, 4) == 0) {
    std::uint64_t n = 0, d = 0;
    in.read(reinterpret_cast<char*>(&n), 8);
    in.read(reinterpret_cast<char*>(&d), 8);
    if (!in || n == 0 || d == 0) {
      throw InputError(path + ": truncated or empty EMB1 header");
    }
    std::vector<float> buf(n * d);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != buf.size() * sizeof(float)) {
      throw InputError(path + ": truncated EMB1 payload");
    }
    EmbeddingMatrix emb;
    emb.modality = modality;
    emb.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::uint64_t i = 0; i < n; ++i) {
      for (std::uint64_t j = 0; j < d; ++j) {
        emb.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            static_cast<double>(buf[i * d + j]);
      }
    }
    emb.validate();
    return emb;
  }
  in.clear();
  in.seekg(0);
  return load_embeddings_text(in, path, modality);
}

void save_embeddings_binary(const EmbeddingMatrix& emb, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw InputError("cannot write embedding file: " + path);
  }
  out.write(kEmbMagic, 4);
  const std::uint64_t n = static_cast<std::uint64_t>(emb.rows());
  const std::uint64_t d = static_cast<std::uint64_t>(emb.dim());
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(reinterpret_cast<const char*>(&d), 8);
  std::vector<float> buf(n * d);
  for (std::uint64_t i = 0; i < n; ++i) {
    for (std::uint64_t j = 0; j < d; ++j) {
      buf[i * d + j] = static_cast<float>(
          emb.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!out) {
    throw InputError("failed writing embedding file: " + path);
  }
}

void save_embeddings_text(const EmbeddingMatrix& emb, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("cannot write embedding file: " + path);
  }
  out.precision(17);
  for (Eigen::Index i = 0; i < emb.rows(); ++i) {
    for (Eigen::Index j = 0; j < emb.dim(); ++j) {
      if (j) out << ' ';
      out << emb.values(i, j);
    }
    out << '\n';
  }
  if (!out) {
    throw InputError("failed writing embedding file: " + path);
  }
}

}  // namespace ufgw
