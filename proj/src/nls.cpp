#include "vlpins/nls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "vlpins/errors.hpp"
#include "vlpins/log.hpp"

namespace vlpins::nls {

NavState ParameterBlock::nav() const { return NavState::fromArray(value.data()); }

ParameterBlock ParameterBlock::fromNav(const NavState& x) {
  ParameterBlock b;
  b.kind = BlockKind::Nav;
  b.value.resize(NavState::kStoredDim);
  x.toArray(b.value.data());
  return b;
}

ParameterBlock ParameterBlock::euclidean(const Eigen::VectorXd& v) {
  ParameterBlock b;
  b.value = v;
  return b;
}

ParameterBlock plus(const ParameterBlock& x, const Eigen::VectorXd& delta) {
  if (x.kind == BlockKind::Euclidean) return ParameterBlock::euclidean(x.value + delta);
  return ParameterBlock::fromNav(boxPlus(x.nav(), Vector15(delta)));
}

Eigen::VectorXd minus(const ParameterBlock& y, const ParameterBlock& x) {
  if (x.kind == BlockKind::Euclidean) return y.value - x.value;
  return boxMinus(y.nav(), x.nav());
}

Eigen::MatrixXd minusJacobian(const ParameterBlock& x, const ParameterBlock& x0) {
  if (x.kind == BlockKind::Euclidean) return Eigen::MatrixXd::Identity(x.value.size(), x.value.size());
  return boxMinusJacobian(x.nav(), x0.nav());
}

int Graph::addBlock(ParameterBlock b) {
  const int id = next_block_++;
  blocks_.emplace(id, std::move(b));
  return id;
}

void Graph::removeBlock(int id) {
  if (!factorsTouching(id).empty()) throw std::logic_error("removing a block that factors still use");
  blocks_.erase(id);
}

ParameterBlock& Graph::block(int id) { return blocks_.at(id); }
const ParameterBlock& Graph::block(int id) const { return blocks_.at(id); }

int Graph::addFactor(std::unique_ptr<Factor> f) {
  for (int b : f->blocks())
    if (!hasBlock(b)) throw std::logic_error("factor references an unknown block");
  const int id = next_factor_++;
  factors_.emplace(id, std::move(f));
  return id;
}

void Graph::removeFactor(int id) { factors_.erase(id); }

std::vector<int> Graph::factorsTouching(int block_id) const {
  std::vector<int> out;
  for (const auto& [id, f] : factors_)
    if (std::find(f->blocks().begin(), f->blocks().end(), block_id) != f->blocks().end())
      out.push_back(id);
  return out;
}

Ordering Graph::ordering() const {
  Ordering o;
  for (const auto& [id, b] : blocks_) {
    o.offset[id] = o.dim;
    o.dim += b.tangentDim();
  }
  return o;
}

Ordering Graph::ordering(const std::vector<int>& block_ids) const {
  Ordering o;
  for (int id : block_ids) {
    o.offset[id] = o.dim;
    o.dim += block(id).tangentDim();
  }
  return o;
}

std::vector<const ParameterBlock*> Graph::gather(const Factor& f) const {
  std::vector<const ParameterBlock*> xs;
  xs.reserve(f.blocks().size());
  for (int b : f.blocks()) xs.push_back(&block(b));
  return xs;
}

double Graph::cost() const {
  double c = 0.0;
  for (const auto& [id, f] : factors_) c += f->evaluate(gather(*f), nullptr).squaredNorm();
  return c;
}

LinearSystem Graph::linearize() const {
  std::vector<int> ids;
  for (const auto& [id, f] : factors_) ids.push_back(id);
  return linearize(ids, ordering());
}

LinearSystem Graph::linearize(const std::vector<int>& factor_ids, const Ordering& ord) const {
  LinearSystem sys;
  sys.ordering = ord;
  sys.H = Eigen::MatrixXd::Zero(ord.dim, ord.dim);
  sys.g = Eigen::VectorXd::Zero(ord.dim);
  std::vector<Eigen::MatrixXd> J;
  for (int fid : factor_ids) {
    const Factor& f = *factors_.at(fid);
    const Eigen::VectorXd r = f.evaluate(gather(f), &J);
    sys.cost += r.squaredNorm();
    const auto& bl = f.blocks();
    for (std::size_t i = 0; i < bl.size(); ++i) {
      const int oi = ord.offset.at(bl[i]);
      const int di = static_cast<int>(J[i].cols());
      sys.g.segment(oi, di) += J[i].transpose() * r;
      for (std::size_t j = i; j < bl.size(); ++j) {
        const int oj = ord.offset.at(bl[j]);
        const Eigen::MatrixXd Hij = J[i].transpose() * J[j];
        sys.H.block(oi, oj, di, J[j].cols()) += Hij;
        if (bl[i] != bl[j]) sys.H.block(oj, oi, J[j].cols(), di) += Hij.transpose();
      }
    }
  }
  return sys;
}

void Graph::applyStep(const Ordering& ord, const Eigen::VectorXd& delta) {
  for (auto& [id, b] : blocks_) {
    auto it = ord.offset.find(id);
    if (it == ord.offset.end()) continue;
    b = plus(b, delta.segment(it->second, b.tangentDim()));
  }
}

std::map<int, Eigen::MatrixXd> Graph::marginalCovariance(const std::vector<int>& block_ids) const {
  const LinearSystem sys = linearize();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(sys.H);
  std::map<int, Eigen::MatrixXd> out;
  for (int id : block_ids) {
    const int o = sys.ordering.offset.at(id);
    const int d = block(id).tangentDim();
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(sys.ordering.dim, d);
    rhs.block(o, 0, d, d).setIdentity();
    Eigen::MatrixXd cols = ldlt.solve(rhs);
    if (ldlt.info() != Eigen::Success || !cols.allFinite())
      cols.setConstant(std::numeric_limits<double>::infinity());
    out[id] = cols.block(o, 0, d, d);
  }
  return out;
}

LmReport solveLm(Graph& graph, const LmOptions& opt, const std::vector<int>& watch) {
  LmReport rep;
  LinearSystem sys = graph.linearize();
  double cost = sys.cost;
  rep.initial_cost = cost;
  if (!std::isfinite(cost)) throw ConfigError("initial cost is not finite");
  double lambda = opt.lambda_init;

  for (int it = 0; it < opt.max_iterations; ++it) {
    if (sys.ordering.dim == 0 || sys.g.lpNorm<Eigen::Infinity>() == 0.0) {
      rep.converged = true;
      break;
    }
    Eigen::MatrixXd A = sys.H;
    if (lambda > 0.0) A.diagonal() += lambda * sys.H.diagonal().cwiseMax(1e-12);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    Eigen::VectorXd delta = ldlt.solve(-sys.g);
    if (ldlt.info() != Eigen::Success || !delta.allFinite()) {
      lambda = lambda > 0.0 ? lambda * 10.0 : 1e-6;
      rep.iterations.push_back({cost, lambda, std::numeric_limits<double>::infinity(), false});
      if (lambda > opt.lambda_max) break;
      continue;
    }
    const double step = delta.norm();
    if (step < opt.step_tolerance) {
      rep.converged = true;
      break;
    }

    const std::map<int, ParameterBlock> backup = graph.blocks();
    graph.applyStep(sys.ordering, delta);
    const double new_cost = graph.cost();
    if (std::isfinite(new_cost) && new_cost <= cost) {
      rep.iterations.push_back({new_cost, lambda, step, true});
      ++rep.accepted_steps;
      for (int b : watch) {
        auto off = sys.ordering.offset.find(b);
        if (off != sys.ordering.offset.end())
          rep.watched_steps[b].push_back(delta.segment(off->second, graph.block(b).tangentDim()).norm());
      }
      const double decrease = cost - new_cost;
      const bool small = decrease <= opt.relative_cost_tolerance * std::max(cost, 1e-300);
      cost = new_cost;
      if (lambda > 0.0) lambda = std::max(lambda / 3.0, 1e-12);
      if (small || cost < 1e-30) {
        rep.converged = true;
        break;
      }
      sys = graph.linearize();
    } else {
      for (auto& [id, b] : backup) graph.block(id) = b;
      rep.iterations.push_back({new_cost, lambda, step, false});
      lambda = lambda > 0.0 ? lambda * 4.0 : 1e-4;
      if (lambda > opt.lambda_max) break;
    }
  }
  rep.final_cost = cost;
  return rep;
}

LinearFactor::LinearFactor(std::vector<int> blocks, std::vector<Eigen::MatrixXd> A, Eigen::VectorXd b)
    : Factor(std::move(blocks)), A_(std::move(A)), b_(std::move(b)) {
  if (A_.size() != blocks_.size()) throw std::invalid_argument("linear factor needs one matrix per block");
  for (const auto& a : A_)
    if (a.rows() != b_.size()) throw std::invalid_argument("linear factor row count mismatch");
}

Eigen::VectorXd LinearFactor::evaluate(const std::vector<const ParameterBlock*>& x,
                                       std::vector<Eigen::MatrixXd>* jacobians) const {
  Eigen::VectorXd r = -b_;
  for (std::size_t i = 0; i < x.size(); ++i) r += A_[i] * x[i]->value;
  if (jacobians) *jacobians = A_;
  return r;
}

MarginalizationFactor::MarginalizationFactor(std::vector<int> blocks,
                                             std::vector<ParameterBlock> linearization,
                                             Eigen::MatrixXd J, Eigen::VectorXd r0)
    : Factor(std::move(blocks)), x0_(std::move(linearization)), J_(std::move(J)), r0_(std::move(r0)) {
  int off = 0;
  for (const auto& b : x0_) {
    offsets_.push_back(off);
    off += b.tangentDim();
  }
  if (off != J_.cols()) throw std::logic_error("marginalization prior dimension mismatch");
}

Eigen::VectorXd MarginalizationFactor::evaluate(const std::vector<const ParameterBlock*>& x,
                                                std::vector<Eigen::MatrixXd>* jacobians) const {
  Eigen::VectorXd dx(J_.cols());
  for (std::size_t i = 0; i < x0_.size(); ++i)
    dx.segment(offsets_[i], x0_[i].tangentDim()) = minus(*x[i], x0_[i]);
  if (jacobians) {
    jacobians->resize(x0_.size());
    for (std::size_t i = 0; i < x0_.size(); ++i) {
      const int d = x0_[i].tangentDim();
      (*jacobians)[i] = J_.middleCols(offsets_[i], d) * minusJacobian(*x[i], x0_[i]);
    }
  }
  return r0_ + J_ * dx;
}

MarginalizationResult marginalize(Graph& graph, const std::vector<int>& block_ids) {
  MarginalizationResult res;
  const std::set<int> marg(block_ids.begin(), block_ids.end());
  std::set<int> factor_set;
  for (int b : block_ids)
    for (int f : graph.factorsTouching(b)) factor_set.insert(f);
  const std::vector<int> factor_ids(factor_set.begin(), factor_set.end());

  std::set<int> kept_set;
  for (int f : factor_ids)
    for (int b : graph.factors().at(f)->blocks())
      if (!marg.count(b)) kept_set.insert(b);
  const std::vector<int> kept(kept_set.begin(), kept_set.end());

  std::vector<int> order = block_ids;
  order.insert(order.end(), kept.begin(), kept.end());
  const Ordering ord = graph.ordering(order);
  int m = 0;
  for (int b : block_ids) m += graph.block(b).tangentDim();
  const int n = ord.dim - m;

  bool ok = !factor_ids.empty() && n > 0;
  Eigen::MatrixXd J;
  Eigen::VectorXd r0;
  if (ok) {
    const LinearSystem sys = graph.linearize(factor_ids, ord);
    const Eigen::MatrixXd Hmm = 0.5 * (sys.H.topLeftCorner(m, m) + sys.H.topLeftCorner(m, m).transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(Hmm);
    const double max_eig = em.eigenvalues().maxCoeff();
    if (!(em.eigenvalues().minCoeff() > 1e-12 * std::max(max_eig, 1e-300))) {
      ok = false;
      res.fallback_dropped = true;
      log::warn("marginalized information block is not positive definite; dropping its factors");
    } else {
      const Eigen::VectorXd inv_eig = em.eigenvalues().cwiseInverse();
      const Eigen::MatrixXd Hmm_inv = em.eigenvectors() * inv_eig.asDiagonal() * em.eigenvectors().transpose();
      const Eigen::MatrixXd Hrm = sys.H.bottomLeftCorner(n, m);
      Eigen::MatrixXd Hs = sys.H.bottomRightCorner(n, n) - Hrm * Hmm_inv * Hrm.transpose();
      const Eigen::VectorXd gs = sys.g.tail(n) - Hrm * Hmm_inv * sys.g.head(m);
      Hs = 0.5 * (Hs + Hs.transpose()).eval();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Hs);
      const double top = std::max(es.eigenvalues().maxCoeff(), 0.0);
      int keep = 0;
      for (int i = 0; i < n; ++i)
        if (es.eigenvalues()[i] > 1e-12 * top) ++keep;
      if (keep == 0) {
        ok = false;
      } else {
        J.resize(keep, n);
        r0.resize(keep);
        int row = 0;
        for (int i = 0; i < n; ++i) {
          const double s = es.eigenvalues()[i];
          if (!(s > 1e-12 * top)) continue;
          const Eigen::VectorXd v = es.eigenvectors().col(i);
          J.row(row) = std::sqrt(s) * v.transpose();
          r0[row] = v.dot(gs) / std::sqrt(s);
          ++row;
        }
      }
    }
  }

  std::vector<ParameterBlock> lin;
  for (int b : kept) lin.push_back(graph.block(b));
  for (int f : factor_ids) graph.removeFactor(f);
  res.removed_factors = static_cast<int>(factor_ids.size());
  for (int b : block_ids) graph.removeBlock(b);
  if (ok) {
    res.prior_factor = graph.addFactor(std::make_unique<MarginalizationFactor>(kept, lin, J, r0));
    res.prior_added = true;
  }
  return res;
}

}  // namespace vlpins::nls
