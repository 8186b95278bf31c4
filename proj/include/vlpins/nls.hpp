#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vlpins/nav_state.hpp"

namespace vlpins::nls {

enum class BlockKind { Euclidean, Nav };

/// Parameter block. Nav blocks store NavState::toArray (16 values) and
/// perturb in the 15-dim error space; Euclidean blocks are plain vectors.
struct ParameterBlock {
  BlockKind kind = BlockKind::Euclidean;
  Eigen::VectorXd value;

  int tangentDim() const { return kind == BlockKind::Nav ? err::Dim : static_cast<int>(value.size()); }
  NavState nav() const;
  static ParameterBlock fromNav(const NavState& x);
  static ParameterBlock euclidean(const Eigen::VectorXd& v);
};

ParameterBlock plus(const ParameterBlock& x, const Eigen::VectorXd& delta);
/// y ⊟ x in the tangent space of x.
Eigen::VectorXd minus(const ParameterBlock& y, const ParameterBlock& x);
/// ∂(x ⊞ δ ⊟ x0)/∂δ at δ = 0.
Eigen::MatrixXd minusJacobian(const ParameterBlock& x, const ParameterBlock& x0);

/// Whitened residual term over a fixed list of parameter blocks.
class Factor {
 public:
  explicit Factor(std::vector<int> blocks) : blocks_(std::move(blocks)) {}
  virtual ~Factor() = default;

  const std::vector<int>& blocks() const { return blocks_; }
  virtual int residualDim() const = 0;
  virtual std::string kind() const = 0;
  /// jacobians, when non-null, receives one residualDim × tangentDim matrix per block.
  virtual Eigen::VectorXd evaluate(const std::vector<const ParameterBlock*>& x,
                                   std::vector<Eigen::MatrixXd>* jacobians) const = 0;

 protected:
  std::vector<int> blocks_;
};

/// Offsets of blocks inside the stacked tangent vector, ordered by block id.
struct Ordering {
  std::map<int, int> offset;
  int dim = 0;
};

/// Normal equations H·δ = −g of Σ‖r‖² around the current values.
struct LinearSystem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  double cost = 0.0;
  Ordering ordering;
};

class Graph {
 public:
  int addBlock(ParameterBlock b);
  /// Throws if factors still reference the block.
  void removeBlock(int id);
  bool hasBlock(int id) const { return blocks_.count(id) > 0; }
  ParameterBlock& block(int id);
  const ParameterBlock& block(int id) const;
  const std::map<int, ParameterBlock>& blocks() const { return blocks_; }

  int addFactor(std::unique_ptr<Factor> f);
  void removeFactor(int id);
  const std::map<int, std::unique_ptr<Factor>>& factors() const { return factors_; }
  std::vector<int> factorsTouching(int block_id) const;

  Ordering ordering() const;
  Ordering ordering(const std::vector<int>& block_ids) const;

  double cost() const;
  /// Assembles every factor in a fixed order (factor id), so results do not
  /// depend on evaluation order.
  LinearSystem linearize() const;
  LinearSystem linearize(const std::vector<int>& factor_ids, const Ordering& ordering) const;

  void applyStep(const Ordering& ordering, const Eigen::VectorXd& delta);

  /// Marginal covariance blocks from the inverse of the full information matrix.
  std::map<int, Eigen::MatrixXd> marginalCovariance(const std::vector<int>& block_ids) const;

 private:
  std::vector<const ParameterBlock*> gather(const Factor& f) const;

  std::map<int, ParameterBlock> blocks_;
  std::map<int, std::unique_ptr<Factor>> factors_;
  int next_block_ = 0;
  int next_factor_ = 0;
};

struct LmOptions {
  int max_iterations = 50;
  double relative_cost_tolerance = 1e-8;
  double step_tolerance = 1e-10;
  /// 0 starts with an undamped Gauss-Newton step.
  double lambda_init = 1e-4;
  double lambda_max = 1e10;
};

struct LmIteration {
  double cost = 0.0;
  double lambda = 0.0;
  double step_norm = 0.0;
  bool accepted = false;
};

struct LmReport {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int accepted_steps = 0;
  bool converged = false;
  std::vector<LmIteration> iterations;
  /// Step norm of each watched block for every accepted step.
  std::map<int, std::vector<double>> watched_steps;
};

LmReport solveLm(Graph& graph, const LmOptions& options, const std::vector<int>& watch = {});

/// r = Σ A_i·x_i − b over Euclidean blocks.
class LinearFactor : public Factor {
 public:
  LinearFactor(std::vector<int> blocks, std::vector<Eigen::MatrixXd> A, Eigen::VectorXd b);
  int residualDim() const override { return static_cast<int>(b_.size()); }
  std::string kind() const override { return "linear"; }
  Eigen::VectorXd evaluate(const std::vector<const ParameterBlock*>& x,
                           std::vector<Eigen::MatrixXd>* jacobians) const override;

 private:
  std::vector<Eigen::MatrixXd> A_;
  Eigen::VectorXd b_;
};

/// Prior left behind by marginalization: r = r0 + J·(x ⊟ x0) over the kept blocks.
class MarginalizationFactor : public Factor {
 public:
  MarginalizationFactor(std::vector<int> blocks, std::vector<ParameterBlock> linearization,
                        Eigen::MatrixXd J, Eigen::VectorXd r0);
  int residualDim() const override { return static_cast<int>(r0_.size()); }
  std::string kind() const override { return "marginalization"; }
  Eigen::VectorXd evaluate(const std::vector<const ParameterBlock*>& x,
                           std::vector<Eigen::MatrixXd>* jacobians) const override;

 private:
  std::vector<ParameterBlock> x0_;
  std::vector<int> offsets_;
  Eigen::MatrixXd J_;
  Eigen::VectorXd r0_;
};

struct MarginalizationResult {
  bool prior_added = false;
  bool fallback_dropped = false;
  int removed_factors = 0;
  int prior_factor = -1;
};

/// Folds every factor touching the given blocks into one prior on their
/// neighbours (Schur complement at the current values) and removes the blocks.
/// If the marginalized information block is not positive definite the
/// factors are dropped without a prior and a warning is logged.
MarginalizationResult marginalize(Graph& graph, const std::vector<int>& block_ids);

}  // namespace vlpins::nls
