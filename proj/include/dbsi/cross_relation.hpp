#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace dbsi {

namespace detail {

// Instantaneous cross-relation quadratic form, written into Q. The frame of
// block p is frames[select[p]] (select = identity when empty). Block (p,p)
// is sum_{l != p} x_l x_l^T, block (p,q) is -x_q x_p^T, so that
// h^T Q h = sum_{p<q} (x_p^T h_q - x_q^T h_p)^2.
inline void cr_instantaneous_into(const std::vector<Eigen::VectorXd>& frames,
                                  const std::vector<int>& select, Eigen::MatrixXd& Q,
                                  Eigen::MatrixXd& sum_outer_work) {
  const int n = select.empty() ? static_cast<int>(frames.size())
                               : static_cast<int>(select.size());
  if (n == 0) throw std::invalid_argument("cr_instantaneous: no frames");
  auto frame_of = [&](int p) -> const Eigen::VectorXd& {
    return frames[select.empty() ? p : select[p]];
  };
  const Eigen::Index L = frame_of(0).size();
  for (int p = 0; p < n; ++p)
    if (frame_of(p).size() != L)
      throw std::invalid_argument("cr_instantaneous: mismatched frame lengths");
  Q.setZero(n * L, n * L);
  sum_outer_work.setZero(L, L);
  for (int p = 0; p < n; ++p)
    sum_outer_work.noalias() += frame_of(p) * frame_of(p).transpose();
  for (int p = 0; p < n; ++p) {
    Q.block(p * L, p * L, L, L) = sum_outer_work;
    Q.block(p * L, p * L, L, L).noalias() -= frame_of(p) * frame_of(p).transpose();
    for (int q = 0; q < n; ++q) {
      if (q == p) continue;
      Q.block(p * L, q * L, L, L).noalias() = -frame_of(q) * frame_of(p).transpose();
    }
  }
}

inline void cr_instantaneous_into(const std::vector<Eigen::VectorXd>& frames,
                                  Eigen::MatrixXd& Q) {
  Eigen::MatrixXd sum_outer_work;
  cr_instantaneous_into(frames, {}, Q, sum_outer_work);
}

}  // namespace detail

inline Eigen::MatrixXd cr_instantaneous(const std::vector<Eigen::VectorXd>& frames) {
  Eigen::MatrixXd Q;
  detail::cr_instantaneous_into(frames, Q);
  return Q;
}

// Node-local CR matrix over the owner's neighborhood, tracked with an
// exponential window: P <- lambda*P + (1-lambda)*Q(n). Initialized to
// epsilon*I so the first primal solve is well posed.
class LocalCrMatrix {
 public:
  LocalCrMatrix(int owner, int block_count, int block_length, double lambda,
                double epsilon = 1e-6)
      : owner_(owner), lambda_(lambda) {
    if (!(lambda > 0.0) || lambda > 1.0)
      throw std::invalid_argument("LocalCrMatrix: lambda must be in (0, 1]");
    if (block_count < 1 || block_length < 1)
      throw std::invalid_argument("LocalCrMatrix: bad dimensions");
    const Eigen::Index d = static_cast<Eigen::Index>(block_count) * block_length;
    P_ = epsilon * Eigen::MatrixXd::Identity(d, d);
    Q_work_.resize(d, d);
  }

  void update(const std::vector<Eigen::VectorXd>& hood_frames) {
    update(hood_frames, {});
  }

  // Frames selected by index, avoiding per-frame copies in the hot loop.
  void update(const std::vector<Eigen::VectorXd>& frames, const std::vector<int>& select) {
    detail::cr_instantaneous_into(frames, select, Q_work_, sum_outer_work_);
    if (Q_work_.rows() != P_.rows())
      throw std::invalid_argument("LocalCrMatrix: frame set does not match dimensions");
    P_ = lambda_ * P_ + (1.0 - lambda_) * Q_work_;
  }

  const Eigen::MatrixXd& matrix() const { return P_; }
  double lambda() const { return lambda_; }
  int owner() const { return owner_; }

 private:
  int owner_;
  double lambda_;
  Eigen::MatrixXd P_;
  Eigen::MatrixXd Q_work_;
  Eigen::MatrixXd sum_outer_work_;
};

// Full-network CR matrix accumulated over frames; backs the batch oracle.
class GlobalCrMatrix {
 public:
  GlobalCrMatrix(int node_count, int block_length)
      : node_count_(node_count), block_length_(block_length) {
    const Eigen::Index d = static_cast<Eigen::Index>(node_count) * block_length;
    R_ = Eigen::MatrixXd::Zero(d, d);
    Q_work_.resize(d, d);
  }

  void accumulate(const std::vector<Eigen::VectorXd>& frames) {
    if (static_cast<int>(frames.size()) != node_count_)
      throw std::invalid_argument("GlobalCrMatrix: wrong number of frames");
    detail::cr_instantaneous_into(frames, {}, Q_work_, sum_outer_work_);
    R_ += Q_work_;
    ++frames_accumulated_;
  }

  const Eigen::MatrixXd& matrix() const { return R_; }
  long frames_accumulated() const { return frames_accumulated_; }
  int node_count() const { return node_count_; }
  int block_length() const { return block_length_; }

 private:
  int node_count_;
  int block_length_;
  long frames_accumulated_ = 0;
  Eigen::MatrixXd R_;
  Eigen::MatrixXd Q_work_;
  Eigen::MatrixXd sum_outer_work_;
};

// Batch minimizer of h^T R h subject to ||h|| = 1: the unit eigenvector of
// the smallest eigenvalue, sign fixed so the first nonzero entry is
// positive. A vanishing gap to the next eigenvalue is flagged as degenerate
// rather than treated as an error.
struct BatchEstimate {
  Eigen::VectorXd h;
  double min_eigenvalue = 0.0;
  double spectral_gap = 0.0;
  bool degenerate = false;
};

inline BatchEstimate batch_oracle_estimate(const Eigen::MatrixXd& R) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(R);
  BatchEstimate out;
  out.h = es.eigenvectors().col(0);
  out.min_eigenvalue = es.eigenvalues()[0];
  out.spectral_gap = es.eigenvalues().size() > 1 ? es.eigenvalues()[1] - es.eigenvalues()[0] : 0.0;
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  out.degenerate = out.spectral_gap <= 1e-12 * scale;
  for (Eigen::Index k = 0; k < out.h.size(); ++k) {
    if (std::abs(out.h[k]) > 1e-14) {
      if (out.h[k] < 0.0) out.h = -out.h;
      break;
    }
  }
  return out;
}

inline BatchEstimate batch_oracle_estimate(const GlobalCrMatrix& R) {
  return batch_oracle_estimate(R.matrix());
}

}  // namespace dbsi
