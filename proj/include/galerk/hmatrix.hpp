#pragma once

#include <memory>
#include <string>
#include <vector>

#include "galerk/types.hpp"

namespace galerk {

/// Binary geometric cluster tree over a point set: recursive bisection of
/// the longest box axis at the coordinate median until ranges fall below
/// the leaf size. perm() maps tree positions to original point indices.
class ClusterTree {
 public:
  struct Node {
    int begin = 0, end = 0;  // range in tree ordering
    Vec3 lo = Vec3::Zero(), hi = Vec3::Zero();
    int child0 = -1, child1 = -1;
    bool leaf() const { return child0 < 0; }
    int size() const { return end - begin; }
    double diameter() const { return (hi - lo).norm(); }
  };

  static std::shared_ptr<const ClusterTree> build(const MatX3& points, int leaf_size);

  const Node& node(int i) const { return nodes_[i]; }
  int root() const { return 0; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(perm_.size()); }
  /// tree position -> original index
  const std::vector<int>& perm() const { return perm_; }
  /// original index -> tree position
  const std::vector<int>& inverse_perm() const { return iperm_; }

 private:
  std::vector<Node> nodes_;
  std::vector<int> perm_, iperm_;
};

/// Distance between the nodes' bounding boxes (0 when overlapping).
double box_distance(const ClusterTree::Node& a, const ClusterTree::Node& b);

/// Entry generator for H-matrix assembly; indices are original (caller)
/// indices, not tree positions.
class BlockEvaluator {
 public:
  virtual ~BlockEvaluator() = default;
  virtual Eigen::Index rows() const = 0;
  virtual Eigen::Index cols() const = 0;
  virtual void eval(const std::vector<int>& row_ids, const std::vector<int>& col_ids,
                    Eigen::MatrixXcd& out) const = 0;
};

struct AcaResult {
  Eigen::MatrixXcd U;  // m x r
  Eigen::MatrixXcd V;  // n x r, block ~ U * V^T
  bool stagnated = false;
  int rank() const { return static_cast<int>(U.cols()); }
};

/// Partial-pivot adaptive cross approximation. Stops when
/// |u_r||v_r| <= tol * ||U V^T||_F (running estimate) or r = min(m,n);
/// never evaluates the full block.
AcaResult aca(const std::function<Eigen::MatrixXcd(const std::vector<int>&,
                                                   const std::vector<int>&)>& entries,
              Eigen::Index m, Eigen::Index n, double tol);

struct RankMapEntry {
  int row_lo, row_hi, col_lo, col_hi;  // half-open, cluster ordering
  std::string kind;                    // "dense" | "lowrank"
  int rank;
};

struct HParams {
  double tol = 1e-3;
  double eta = 1.0;    // admissibility: min(diam) <= eta * dist
  int leaf_size = 64;
};

class HLu;

/// Hierarchical block matrix with dense and low-rank (U V^T) leaves over a
/// block cluster tree. Public index space is the caller's original
/// ordering; permutations are applied internally.
class HMatrix {
 public:
  HMatrix();
  HMatrix(const HMatrix& other);
  HMatrix& operator=(const HMatrix& other);
  HMatrix(HMatrix&&) noexcept;
  HMatrix& operator=(HMatrix&&) noexcept;
  ~HMatrix();

  static HMatrix assemble(const BlockEvaluator& eval,
                          std::shared_ptr<const ClusterTree> rows,
                          std::shared_ptr<const ClusterTree> cols,
                          const HParams& params);

  Eigen::Index rows() const;
  Eigen::Index cols() const;
  const HParams& params() const { return params_; }
  const std::shared_ptr<const ClusterTree>& row_tree() const { return rows_; }
  const std::shared_ptr<const ClusterTree>& col_tree() const { return cols_; }

  Eigen::VectorXcd matvec(const Eigen::VectorXcd& x) const;
  Eigen::VectorXcd matvec_transpose(const Eigen::VectorXcd& x) const;

  void scale(cplx alpha);
  /// this += alpha * S (S in original indices). Low-rank leaves receiving
  /// entries are densified.
  void axpy_sparse(cplx alpha, const SpMat& S);
  void axpy_sparse(cplx alpha, const SpMatC& S);

  /// this += alpha * other (same cluster trees required).
  void axpy(cplx alpha, const HMatrix& other, double tol);
  static HMatrix add(const HMatrix& a, const HMatrix& b, double tol);
  static HMatrix multiply(const HMatrix& a, const HMatrix& b, double tol);

  HLu lu(double tol) const;

  Eigen::MatrixXcd to_dense() const;
  std::vector<RankMapEntry> rank_map() const;
  void write_rank_map_csv(const std::string& path) const;
  /// Total stored scalars: sum of dense m*n plus low-rank r*(m+n).
  size_t stored_scalars() const;
  /// Admissible blocks where ACA hit full rank and fell back to dense.
  int demoted_blocks() const { return demoted_; }

  struct Block;

 private:
  friend class HLu;
  std::shared_ptr<const ClusterTree> rows_, cols_;
  std::unique_ptr<Block> root_;
  HParams params_;
  int demoted_ = 0;
};

/// Block LU factorization of a square HMatrix (identical row/col trees)
/// with low-rank updates recompressed to tol.
class HLu {
 public:
  Eigen::VectorXcd solve(const Eigen::VectorXcd& b) const;
  /// Export the factors; to_dense(lower()) * to_dense(upper()) ~ to_dense(H).
  HMatrix lower() const;
  HMatrix upper() const;

 private:
  friend class HMatrix;
  HMatrix factored_;
};

}  // namespace galerk
