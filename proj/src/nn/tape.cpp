#include "sso/nn/tape.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace sso::nn {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<EMat>;
using CMapM = Eigen::Map<const EMat>;

CMapM as_matrix(const DenseArray& a) { return CMapM(a.data(), a.rows(), a.cols()); }
MapM as_matrix(DenseArray& a) { return MapM(a.data(), a.rows(), a.cols()); }

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

Tape::NodeId Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

void Tape::check_id(NodeId id) const {
  if (id < 0 || id >= static_cast<NodeId>(nodes_.size())) {
    throw RangeError("Tape: node id out of range");
  }
}

Tape::NodeId Tape::input(const DenseArray* external) {
  Node n;
  n.ref = external;
  return push(std::move(n));
}

Tape::NodeId Tape::input_owned(DenseArray value) {
  Node n;
  n.owned = std::move(value);
  return push(std::move(n));
}

Tape::NodeId Tape::param(const DenseArray* external, int slot) {
  Node n;
  n.ref = external;
  n.slot = slot;
  return push(std::move(n));
}

const DenseArray& Tape::value(NodeId id) const {
  check_id(id);
  return node_value(nodes_[static_cast<std::size_t>(id)]);
}

DenseArray& Tape::grad(NodeId id) {
  check_id(id);
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.grad_set) {
    n.grad_buf = DenseArray(node_value(n).shape());
    n.grad_set = true;
  }
  return n.grad_buf;
}

bool Tape::has_grad(NodeId id) const {
  check_id(id);
  return nodes_[static_cast<std::size_t>(id)].grad_set;
}

Tape::NodeId Tape::linear(NodeId x, NodeId w, NodeId b) {
  const DenseArray& xv = value(x);
  const DenseArray& wv = value(w);
  const DenseArray& bv = value(b);
  if (xv.cols() != wv.rows() || wv.cols() != static_cast<int>(bv.size())) {
    throw DimensionError("Tape::linear: shape mismatch");
  }
  Node n;
  n.owned = DenseArray({xv.rows(), wv.cols()});
  as_matrix(n.owned).noalias() = as_matrix(xv) * as_matrix(wv);
  {
    MapM out = as_matrix(n.owned);
    Eigen::Map<const Eigen::RowVectorXd> bias(bv.data(), bv.size());
    out.rowwise() += bias;
  }
  n.inputs = {x, w, b};
  n.back = [x, w, b](Tape& t, NodeId self) {
    const DenseArray& g = t.grad(self);
    CMapM gm = as_matrix(g);
    as_matrix(t.grad(x)).noalias() += gm * as_matrix(t.value(w)).transpose();
    as_matrix(t.grad(w)).noalias() += as_matrix(t.value(x)).transpose() * gm;
    Eigen::Map<Eigen::RowVectorXd> db(t.grad(b).data(), t.grad(b).size());
    db += gm.colwise().sum();
  };
  return push(std::move(n));
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const DenseArray& av = value(a);
  const DenseArray& bv = value(b);
  if (!av.same_shape(bv)) throw DimensionError("Tape::add: shape mismatch");
  Node n;
  n.owned = av;
  n.owned.add_in_place(bv);
  n.inputs = {a, b};
  n.back = [a, b](Tape& t, NodeId self) {
    const DenseArray& g = t.grad(self);
    t.grad(a).add_in_place(g);
    t.grad(b).add_in_place(g);
  };
  return push(std::move(n));
}

Tape::NodeId Tape::gelu(NodeId x) {
  const DenseArray& xv = value(x);
  Node n;
  n.owned = DenseArray(xv.shape());
  for (std::int64_t i = 0; i < xv.size(); ++i) {
    const double v = xv.data()[i];
    n.owned.data()[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  }
  n.inputs = {x};
  n.back = [x](Tape& t, NodeId self) {
    const DenseArray& g = t.grad(self);
    const DenseArray& xin = t.value(x);
    DenseArray& gx = t.grad(x);
    for (std::int64_t i = 0; i < xin.size(); ++i) {
      const double v = xin.data()[i];
      const double phi = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      const double dens = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      gx.data()[i] += g.data()[i] * (phi + v * dens);
    }
  };
  return push(std::move(n));
}

Tape::NodeId Tape::layer_norm(NodeId x, NodeId gamma, NodeId beta, double eps) {
  const DenseArray& xv = value(x);
  const DenseArray& gv = value(gamma);
  const DenseArray& bv = value(beta);
  const int cols = xv.cols();
  const int rows = xv.rows();
  if (static_cast<int>(gv.size()) != cols || static_cast<int>(bv.size()) != cols) {
    throw DimensionError("Tape::layer_norm: affine parameter size mismatch");
  }
  auto normalized = std::make_shared<DenseArray>(xv.shape());
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows));
  Node n;
  n.owned = DenseArray(xv.shape());
  for (int r = 0; r < rows; ++r) {
    const double* xr = xv.data() + static_cast<std::size_t>(r) * cols;
    double* nr = normalized->data() + static_cast<std::size_t>(r) * cols;
    double* yr = n.owned.data() + static_cast<std::size_t>(r) * cols;
    double mean = 0.0;
    for (int c = 0; c < cols; ++c) mean += xr[c];
    mean /= cols;
    double var = 0.0;
    for (int c = 0; c < cols; ++c) {
      const double d = xr[c] - mean;
      var += d * d;
    }
    var /= cols;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[static_cast<std::size_t>(r)] = is;
    for (int c = 0; c < cols; ++c) {
      nr[c] = (xr[c] - mean) * is;
      yr[c] = nr[c] * gv.data()[c] + bv.data()[c];
    }
  }
  n.inputs = {x, gamma, beta};
  n.back = [x, gamma, beta, normalized, inv_std, cols, rows](Tape& t, NodeId self) {
    const DenseArray& g = t.grad(self);
    const DenseArray& gv2 = t.value(gamma);
    DenseArray& gx = t.grad(x);
    DenseArray& gg = t.grad(gamma);
    DenseArray& gb = t.grad(beta);
    for (int r = 0; r < rows; ++r) {
      const double* gr = g.data() + static_cast<std::size_t>(r) * cols;
      const double* nr = normalized->data() + static_cast<std::size_t>(r) * cols;
      double* gxr = gx.data() + static_cast<std::size_t>(r) * cols;
      const double is = (*inv_std)[static_cast<std::size_t>(r)];
      double sum_gh = 0.0;
      double sum_ghn = 0.0;
      for (int c = 0; c < cols; ++c) {
        const double gh = gr[c] * gv2.data()[c];
        sum_gh += gh;
        sum_ghn += gh * nr[c];
        gg.data()[c] += gr[c] * nr[c];
        gb.data()[c] += gr[c];
      }
      const double inv_cols = 1.0 / cols;
      for (int c = 0; c < cols; ++c) {
        const double gh = gr[c] * gv2.data()[c];
        gxr[c] += is * (gh - inv_cols * sum_gh - nr[c] * inv_cols * sum_ghn);
      }
    }
  };
  return push(std::move(n));
}

Tape::NodeId Tape::attention(NodeId q, NodeId k, NodeId v, int batch, int tokens, int heads,
                             DenseArray* capture) {
  const DenseArray& qv = value(q);
  const DenseArray& kv = value(k);
  const DenseArray& vv = value(v);
  const int dim = qv.cols();
  if (!qv.same_shape(kv) || !qv.same_shape(vv)) {
    throw DimensionError("Tape::attention: q/k/v shape mismatch");
  }
  if (qv.rows() != batch * tokens) throw DimensionError("Tape::attention: rows != batch*tokens");
  if (dim % heads != 0) throw DimensionError("Tape::attention: dim not divisible by heads");
  const int head_dim = dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  auto probs = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(batch) * heads * tokens * tokens);
  Node n;
  n.owned = DenseArray(qv.shape());
  {
    CMapM qm = as_matrix(qv);
    CMapM km = as_matrix(kv);
    CMapM vm = as_matrix(vv);
    MapM om = as_matrix(n.owned);
    EMat scores(tokens, tokens);
    for (int b = 0; b < batch; ++b) {
      for (int h = 0; h < heads; ++h) {
        auto qb = qm.block(b * tokens, h * head_dim, tokens, head_dim);
        auto kb = km.block(b * tokens, h * head_dim, tokens, head_dim);
        auto vb = vm.block(b * tokens, h * head_dim, tokens, head_dim);
        scores.noalias() = qb * kb.transpose();
        scores *= scale;
        MapM pm(probs->data() +
                    (static_cast<std::size_t>(b) * heads + h) * tokens * tokens,
                tokens, tokens);
        for (int r = 0; r < tokens; ++r) {
          const double row_max = scores.row(r).maxCoeff();
          pm.row(r) = (scores.row(r).array() - row_max).exp();
          pm.row(r) /= pm.row(r).sum();
        }
        om.block(b * tokens, h * head_dim, tokens, head_dim).noalias() = pm * vb;
      }
    }
  }
  if (capture) {
    *capture = DenseArray({batch * heads * tokens, tokens});
    std::copy(probs->begin(), probs->end(), capture->data());
  }
  n.inputs = {q, k, v};
  n.back = [q, k, v, batch, tokens, heads, head_dim, scale, probs](Tape& t, NodeId self) {
    const DenseArray& g = t.grad(self);
    CMapM gm = as_matrix(g);
    CMapM qm = as_matrix(t.value(q));
    CMapM km = as_matrix(t.value(k));
    CMapM vm = as_matrix(t.value(v));
    MapM gq = as_matrix(t.grad(q));
    MapM gk = as_matrix(t.grad(k));
    MapM gv = as_matrix(t.grad(v));
    EMat dprobs(tokens, tokens);
    EMat dscores(tokens, tokens);
    for (int b = 0; b < batch; ++b) {
      for (int h = 0; h < heads; ++h) {
        CMapM pm(probs->data() +
                     (static_cast<std::size_t>(b) * heads + h) * tokens * tokens,
                 tokens, tokens);
        auto gb = gm.block(b * tokens, h * head_dim, tokens, head_dim);
        auto qb = qm.block(b * tokens, h * head_dim, tokens, head_dim);
        auto kb = km.block(b * tokens, h * head_dim, tokens, head_dim);
        auto vb = vm.block(b * tokens, h * head_dim, tokens, head_dim);
        gv.block(b * tokens, h * head_dim, tokens, head_dim).noalias() +=
            pm.transpose() * gb;
        dprobs.noalias() = gb * vb.transpose();
        for (int r = 0; r < tokens; ++r) {
          const double dot = pm.row(r).dot(dprobs.row(r));
          dscores.row(r) = pm.row(r).cwiseProduct(dprobs.row(r).array() - dot);
        }
        dscores *= scale;
        gq.block(b * tokens, h * head_dim, tokens, head_dim).noalias() += dscores * kb;
        gk.block(b * tokens, h * head_dim, tokens, head_dim).noalias() +=
            dscores.transpose() * qb;
      }
    }
  };
  return push(std::move(n));
}

Tape::NodeId Tape::assemble_tokens(NodeId cls, NodeId vis, const std::vector<NodeId>& cine,
                                   NodeId pos, int batch) {
  const DenseArray& cv = value(cls);
  const DenseArray& vv = value(vis);
  const DenseArray& pv = value(pos);
  const int dim = cv.cols();
  if (cv.rows() != 1) throw DimensionError("assemble_tokens: class token must be 1 x dim");
  if (vv.cols() != dim || pv.cols() != dim) throw DimensionError("assemble_tokens: dim mismatch");
  if (vv.rows() % batch != 0) throw DimensionError("assemble_tokens: visual rows not divisible by batch");
  const int num_visual = vv.rows() / batch;
  const int num_cine = static_cast<int>(cine.size());
  const int tokens = 1 + num_visual + num_cine;
  if (pv.rows() != tokens) throw DimensionError("assemble_tokens: positional table rows != tokens");
  for (NodeId c : cine) {
    const DenseArray& cc = value(c);
    if (cc.rows() != batch || cc.cols() != dim) {
      throw DimensionError("assemble_tokens: cinematology token shape mismatch");
    }
  }
  Node n;
  n.owned = DenseArray({batch * tokens, dim});
  for (int b = 0; b < batch; ++b) {
    double* block = n.owned.data() + static_cast<std::size_t>(b) * tokens * dim;
    for (int d = 0; d < dim; ++d) block[d] = cv.data()[d] + pv.data()[d];
    for (int p = 0; p < num_visual; ++p) {
      const double* src = vv.data() + (static_cast<std::size_t>(b) * num_visual + p) * dim;
      const double* pr = pv.data() + static_cast<std::size_t>(1 + p) * dim;
      double* dst = block + static_cast<std::size_t>(1 + p) * dim;
      for (int d = 0; d < dim; ++d) dst[d] = src[d] + pr[d];
    }
    for (int c = 0; c < num_cine; ++c) {
      const DenseArray& cc = value(cine[static_cast<std::size_t>(c)]);
      const double* src = cc.data() + static_cast<std::size_t>(b) * dim;
      const double* pr = pv.data() + static_cast<std::size_t>(1 + num_visual + c) * dim;
      double* dst = block + static_cast<std::size_t>(1 + num_visual + c) * dim;
      for (int d = 0; d < dim; ++d) dst[d] = src[d] + pr[d];
    }
  }
  n.inputs = {cls, vis, pos};
  for (NodeId c : cine) n.inputs.push_back(c);
  std::vector<NodeId> cine_ids = cine;
  n.back = [cls, vis, pos, cine_ids, batch, num_visual, dim, tokens](Tape& t, NodeId self) {
    const DenseArray& g = t.grad(self);
    DenseArray& gc = t.grad(cls);
    DenseArray& gv = t.grad(vis);
    DenseArray& gp = t.grad(pos);
    const int num_cine = static_cast<int>(cine_ids.size());
    for (int b = 0; b < batch; ++b) {
      const double* block = g.data() + static_cast<std::size_t>(b) * tokens * dim;
      for (int d = 0; d < dim; ++d) {
        gc.data()[d] += block[d];
        gp.data()[d] += block[d];
      }
      for (int p = 0; p < num_visual; ++p) {
        const double* src = block + static_cast<std::size_t>(1 + p) * dim;
        double* dv = gv.data() + (static_cast<std::size_t>(b) * num_visual + p) * dim;
        double* dp = gp.data() + static_cast<std::size_t>(1 + p) * dim;
        for (int d = 0; d < dim; ++d) {
          dv[d] += src[d];
          dp[d] += src[d];
        }
      }
      for (int c = 0; c < num_cine; ++c) {
        const double* src = block + static_cast<std::size_t>(1 + num_visual + c) * dim;
        double* dc = t.grad(cine_ids[static_cast<std::size_t>(c)]).data() +
                     static_cast<std::size_t>(b) * dim;
        double* dp = gp.data() + static_cast<std::size_t>(1 + num_visual + c) * dim;
        for (int d = 0; d < dim; ++d) {
          dc[d] += src[d];
          dp[d] += src[d];
        }
      }
    }
  };
  return push(std::move(n));
}

Tape::NodeId Tape::select_first_token(NodeId x, int batch, int tokens) {
  const DenseArray& xv = value(x);
  const int dim = xv.cols();
  if (xv.rows() != batch * tokens) {
    throw DimensionError("select_first_token: rows != batch*tokens");
  }
  Node n;
  n.owned = DenseArray({batch, dim});
  for (int b = 0; b < batch; ++b) {
    const double* src = xv.data() + static_cast<std::size_t>(b) * tokens * dim;
    double* dst = n.owned.data() + static_cast<std::size_t>(b) * dim;
    std::copy(src, src + dim, dst);
  }
  n.inputs = {x};
  n.back = [x, batch, tokens, dim](Tape& t, NodeId self) {
    const DenseArray& g = t.grad(self);
    DenseArray& gx = t.grad(x);
    for (int b = 0; b < batch; ++b) {
      const double* src = g.data() + static_cast<std::size_t>(b) * dim;
      double* dst = gx.data() + static_cast<std::size_t>(b) * tokens * dim;
      for (int d = 0; d < dim; ++d) dst[d] += src[d];
    }
  };
  return push(std::move(n));
}

void Tape::backward(NodeId root, const DenseArray& seed_grad) {
  check_id(root);
  if (!seed_grad.same_shape(value(root))) {
    throw DimensionError("Tape::backward: seed gradient shape mismatch");
  }
  grad(root).add_in_place(seed_grad);
  for (NodeId id = root; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad_set && n.back) n.back(*this, id);
  }
}

void Tape::export_param_grads(std::vector<DenseArray>& grads) const {
  for (const Node& n : nodes_) {
    if (n.slot < 0 || !n.grad_set) continue;
    if (n.slot >= static_cast<int>(grads.size())) {
      throw RangeError("export_param_grads: slot out of range");
    }
    grads[static_cast<std::size_t>(n.slot)].add_in_place(n.grad_buf);
  }
}

}  // namespace sso::nn
