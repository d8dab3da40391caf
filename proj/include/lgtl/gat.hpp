#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lgtl/attention.hpp"
#include "lgtl/graph.hpp"

namespace lgtl {

/// Single-head GAT layer: e_v = LeakyReLU(a_1 . W x_c + a_2 . W x_v), attention is the
/// softmax of e over the neighbor set, output sum_v att_v W x_v.
struct GatLayer {
  Matrix W;  // d_in x d_out
  Vector a;  // 2 d_out: [a_1; a_2]
  double leaky_slope = 0.2;

  Eigen::Index in_dim() const noexcept { return W.rows(); }
  Eigen::Index out_dim() const noexcept { return W.cols(); }

  static GatLayer zeros(Eigen::Index d_in, Eigen::Index d_out) {
    return {Matrix::Zero(d_in, d_out), Vector::Zero(2 * d_out)};
  }
};

struct GatGrad {
  Matrix dW;
  Vector da;

  explicit GatGrad(const GatLayer& l) : dW(Matrix::Zero(l.W.rows(), l.W.cols())), da(Vector::Zero(l.a.size())) {}
};

/// Everything the backward pass needs from one forward evaluation around `center`.
struct GatCache {
  NodeId center = 0;
  std::vector<NodeId> nodes;  // attended set, self-loop included by the caller
  Vector Wh_center;           // d_out
  Matrix Wh;                  // |nodes| x d_out
  Vector pre;                 // pre-activation scores
  Vector att;                 // softmax(LeakyReLU(pre))
  Vector out;                 // sum att_v Wh_v
};

inline GatCache gat_forward(const GatLayer& l, const FeatureMatrix& x, NodeId center, std::vector<NodeId> nodes) {
  if (l.W.rows() != x.cols()) throw ShapeError("GAT input width != feature width");
  if (l.a.size() != 2 * l.W.cols()) throw ShapeError("GAT attention vector must have 2 * d_out entries");
  if (nodes.empty()) throw PreconditionError("GAT neighbor set is empty");
  const auto d = l.out_dim();
  GatCache c;
  c.center = center;
  c.nodes = std::move(nodes);
  const auto m = static_cast<Eigen::Index>(c.nodes.size());
  c.Wh_center = (x.row(center) * l.W).transpose();
  c.Wh.resize(m, d);
  for (Eigen::Index j = 0; j < m; ++j) c.Wh.row(j) = x.row(c.nodes[static_cast<std::size_t>(j)]) * l.W;
  const double s_center = l.a.head(d).dot(c.Wh_center);
  c.pre = (c.Wh * l.a.tail(d)).array() + s_center;
  Vector e = c.pre.unaryExpr([&](double v) { return v > 0 ? v : l.leaky_slope * v; });
  c.att = softmax(e);
  c.out = c.Wh.transpose() * c.att;
  return c;
}

/// Accumulates into g the gradient given dL/d(out) and an extra dL/d(att) term
/// (either may be empty).
inline void gat_backward(const GatLayer& l, const FeatureMatrix& x, const GatCache& c, const Vector& d_out,
                         const Vector& d_att_extra, GatGrad& g) {
  const auto d = l.out_dim();
  const auto m = static_cast<Eigen::Index>(c.nodes.size());
  Matrix dWh = Matrix::Zero(m, d);
  Vector datt = Vector::Zero(m);
  if (d_out.size() > 0) {
    dWh += c.att * d_out.transpose();
    datt += c.Wh * d_out;
  }
  if (d_att_extra.size() > 0) datt += d_att_extra;
  const Vector de = c.att.array() * (datt.array() - c.att.dot(datt));
  const Vector dpre = de.array() * c.pre.unaryExpr([&](double v) { return v > 0 ? 1.0 : l.leaky_slope; }).array();

  g.da.head(d) += dpre.sum() * c.Wh_center;
  g.da.tail(d) += c.Wh.transpose() * dpre;
  const Vector dWh_center = dpre.sum() * l.a.head(d);
  dWh += dpre * l.a.tail(d).transpose();

  g.dW += x.row(c.center).transpose() * dWh_center.transpose();
  for (Eigen::Index j = 0; j < m; ++j)
    g.dW += x.row(c.nodes[static_cast<std::size_t>(j)]).transpose() * dWh.row(j);
}

}  // namespace lgtl
