#include "pdeflow/trace.hpp"

#include <cmath>
#include <cstring>
#include <string>

namespace pdeflow {

Trace::Trace(JetSpec spec, std::span<const double> params)
    : spec_(spec), q_(spec.size()), params_(params) {}

void Trace::clear() {
  op_.clear();
  arg0_.clear();
  arg1_.clear();
  aux_.clear();
  jets_.clear();
  affines_.clear();
}

void Trace::reset(JetSpec spec, std::span<const double> params) {
  clear();
  spec_ = spec;
  q_ = spec.size();
  params_ = params;
}

void Trace::check_node(NodeId id) const {
  if (id < 0 || id >= size()) throw UsageError("node id not on this trace");
}

NodeId Trace::push(Op op, int32_t a, int32_t b, double aux) {
  const NodeId id = size();
  op_.push_back(op);
  arg0_.push_back(a);
  arg1_.push_back(b);
  aux_.push_back(aux);
  jets_.resize(jets_.size() + q_);
  return id;
}

NodeId Trace::input(double value, int coord) {
  const NodeId id = push(Op::kInput, coord, -1, value);
  jet_seed(spec_, jet_mut(id), value, coord);
  return id;
}

NodeId Trace::constant(double value) {
  const NodeId id = push(Op::kConst, -1, -1, value);
  jet_const(spec_, jet_mut(id), value);
  return id;
}

NodeId Trace::param(int slot) {
  if (slot < 0 || slot >= n_params()) throw UsageError("parameter slot out of range");
  const NodeId id = push(Op::kParam, slot, -1, 0.0);
  jet_const(spec_, jet_mut(id), params_[slot]);
  return id;
}

NodeId Trace::inject(const double* jet) {
  const NodeId id = push(Op::kInject, -1, -1, 0.0);
  jet_copy(spec_, jet_mut(id), jet);
  return id;
}

NodeId Trace::add(NodeId a, NodeId b) {
  check_node(a);
  check_node(b);
  const NodeId id = push(Op::kAdd, a, b, 0.0);
  jet_add(spec_, jet_mut(id), jet(a), jet(b));
  return id;
}

NodeId Trace::sub(NodeId a, NodeId b) {
  check_node(a);
  check_node(b);
  const NodeId id = push(Op::kSub, a, b, 0.0);
  jet_sub(spec_, jet_mut(id), jet(a), jet(b));
  return id;
}

NodeId Trace::mul(NodeId a, NodeId b) {
  check_node(a);
  check_node(b);
  const NodeId id = push(Op::kMul, a, b, 0.0);
  jet_mul(spec_, jet_mut(id), jet(a), jet(b));
  return id;
}

NodeId Trace::div(NodeId a, NodeId b) {
  check_node(a);
  check_node(b);
  if (value(b) == 0.0) throw std::domain_error("division by zero on trace");
  const NodeId id = push(Op::kDiv, a, b, 0.0);
  jet_div(spec_, jet_mut(id), jet(a), jet(b));
  return id;
}

NodeId Trace::neg(NodeId a) {
  check_node(a);
  const NodeId id = push(Op::kNeg, a, -1, 0.0);
  jet_neg(spec_, jet_mut(id), jet(a));
  return id;
}

NodeId Trace::add_const(NodeId a, double c) {
  check_node(a);
  const NodeId id = push(Op::kAddC, a, -1, c);
  jet_copy(spec_, jet_mut(id), jet(a));
  jet_mut(id)[0] += c;
  return id;
}

NodeId Trace::mul_const(NodeId a, double c) {
  check_node(a);
  const NodeId id = push(Op::kMulC, a, -1, c);
  jet_scale(spec_, jet_mut(id), jet(a), c);
  return id;
}

NodeId Trace::rsub_const(double c, NodeId a) {
  check_node(a);
  const NodeId id = push(Op::kRSubC, a, -1, c);
  jet_neg(spec_, jet_mut(id), jet(a));
  jet_mut(id)[0] += c;
  return id;
}

NodeId Trace::rdiv_const(double c, NodeId a) {
  check_node(a);
  if (value(a) == 0.0) throw std::domain_error("division by zero on trace");
  const NodeId id = push(Op::kRDivC, a, -1, c);
  double cj[kMaxJetComponents];
  jet_const(spec_, cj, c);
  jet_div(spec_, jet_mut(id), cj, jet(a));
  return id;
}

NodeId Trace::push_unary(Op op, NodeId a, const UnaryDerivs& d) {
  check_node(a);
  const NodeId id = push(op, a, -1, 0.0);
  jet_compose(spec_, jet_mut(id), jet(a), d.f0, d.f1, d.f2);
  return id;
}

NodeId Trace::tanh(NodeId a) { return push_unary(Op::kTanh, a, tanh_derivs(value(a))); }

NodeId Trace::softplus(NodeId a) {
  return push_unary(Op::kSoftplus, a, softplus_derivs(value(a)));
}

NodeId Trace::exp(NodeId a) { return push_unary(Op::kExp, a, exp_derivs(value(a))); }

NodeId Trace::log(NodeId a) {
  if (!(value(a) > 0.0)) throw std::domain_error("log of non-positive value on trace");
  return push_unary(Op::kLog, a, log_derivs(value(a)));
}

NodeId Trace::max_const(NodeId a, double c) {
  check_node(a);
  const NodeId id = push(Op::kMaxC, a, -1, c);
  if (value(a) > c) {
    jet_copy(spec_, jet_mut(id), jet(a));
  } else {
    jet_const(spec_, jet_mut(id), c);
  }
  return id;
}

NodeId Trace::extract(NodeId a, int comp) {
  check_node(a);
  if (comp < 0 || comp >= q_) throw UsageError("jet component out of range");
  const NodeId id = push(Op::kExtract, a, comp, 0.0);
  jet_const(spec_, jet_mut(id), jet(a)[comp]);
  return id;
}

NodeId Trace::affine(int n_out, Block a, Block b, int bias_slot) {
  if (a.n <= 0) throw UsageError("affine needs a primary input block");
  check_node(a.x0);
  check_node(a.x0 + a.n - 1);
  if (b.n > 0) {
    check_node(b.x0);
    check_node(b.x0 + b.n - 1);
  }
  auto check_slots = [&](int slot, long count) {
    if (slot < 0 || slot + count > n_params()) throw UsageError("affine slot out of range");
  };
  check_slots(a.weight_slot, static_cast<long>(n_out) * a.n);
  if (b.n > 0) check_slots(b.weight_slot, static_cast<long>(n_out) * b.n);
  if (bias_slot >= 0) check_slots(bias_slot, n_out);
  const NodeId out0 = size();
  const int rec_idx = static_cast<int>(affines_.size());
  affines_.push_back(AffineRec{out0, n_out, a, b, bias_slot});
  for (int r = 0; r < n_out; ++r) push(Op::kAffineRow, rec_idx, r, 0.0);

  // Lane-major evaluation: gather inputs per jet component so each output row
  // is a contiguous dot product.
  scratch_.resize(static_cast<size_t>(q_) * (a.n + b.n));
  double* xa = scratch_.data();
  double* xb = xa + static_cast<size_t>(q_) * a.n;
  for (int j = 0; j < a.n; ++j) {
    const double* src = jet(a.x0 + j);
    for (int q = 0; q < q_; ++q) xa[q * a.n + j] = src[q];
  }
  for (int j = 0; j < b.n; ++j) {
    const double* src = jet(b.x0 + j);
    for (int q = 0; q < q_; ++q) xb[q * b.n + j] = src[q];
  }
  const double* wa = params_.data() + a.weight_slot;
  const double* wb = b.n > 0 ? params_.data() + b.weight_slot : nullptr;
  for (int r = 0; r < n_out; ++r) {
    double* out = jet_mut(out0 + r);
    const double* wra = wa + static_cast<size_t>(r) * a.n;
    const double* wrb = wb ? wb + static_cast<size_t>(r) * b.n : nullptr;
    for (int q = 0; q < q_; ++q) {
      double acc = 0.0;
      const double* xaq = xa + static_cast<size_t>(q) * a.n;
      for (int j = 0; j < a.n; ++j) acc += wra[j] * xaq[j];
      if (wrb) {
        const double* xbq = xb + static_cast<size_t>(q) * b.n;
        for (int j = 0; j < b.n; ++j) acc += wrb[j] * xbq[j];
      }
      out[q] = acc;
    }
    if (bias_slot >= 0) out[0] += params_[bias_slot + r];
  }
  return out0;
}

void Trace::backward_affine(const AffineRec& rec) {
  const int q = q_;
  auto pull_block = [&](const Block& blk) {
    if (blk.n <= 0) return;
    const double* w = params_.data() + blk.weight_slot;
    double* wg = grad_.data() + blk.weight_slot;
    for (int r = 0; r < rec.n_out; ++r) {
      const double* ybar = adj(rec.out0 + r);
      const double* wr = w + static_cast<size_t>(r) * blk.n;
      double* wgr = wg + static_cast<size_t>(r) * blk.n;
      for (int j = 0; j < blk.n; ++j) {
        const double* xj = jet(blk.x0 + j);
        double* xbar = adj(blk.x0 + j);
        double dot = 0.0;
        const double wrj = wr[j];
        for (int c = 0; c < q; ++c) {
          dot += xj[c] * ybar[c];
          xbar[c] += wrj * ybar[c];
        }
        wgr[j] += dot;
      }
    }
  };
  pull_block(rec.a);
  pull_block(rec.b);
  if (rec.bias_slot >= 0) {
    for (int r = 0; r < rec.n_out; ++r) grad_[rec.bias_slot + r] += adj(rec.out0 + r)[0];
  }
}

void Trace::backward(NodeId output) {
  check_node(output);
  // sized to the whole tape: an affine record is swept as a unit, and its
  // rows may extend past `output`
  adjoint_.assign(jets_.size(), 0.0);
  grad_.assign(params_.size(), 0.0);
  adj(output)[0] = 1.0;

  double D[kMaxJetComponents];
  for (NodeId i = output; i >= 0; --i) {
    const double* cbar = adj(i);
    const NodeId a = arg0_[i];
    switch (op_[i]) {
      case Op::kInput:
      case Op::kConst:
      case Op::kInject:
        break;
      case Op::kParam:
        grad_[a] += cbar[0];
        break;
      case Op::kAdd:
        jet_add(spec_, adj(a), adj(a), cbar);
        jet_add(spec_, adj(arg1_[i]), adj(arg1_[i]), cbar);
        break;
      case Op::kSub:
        jet_add(spec_, adj(a), adj(a), cbar);
        jet_sub(spec_, adj(arg1_[i]), adj(arg1_[i]), cbar);
        break;
      case Op::kMul: {
        const NodeId b = arg1_[i];
        jet_mul_transpose_accum(spec_, adj(a), jet(b), cbar);
        jet_mul_transpose_accum(spec_, adj(b), jet(a), cbar);
        break;
      }
      case Op::kDiv: {
        const NodeId b = arg1_[i];
        double one[kMaxJetComponents];
        jet_const(spec_, one, 1.0);
        jet_div(spec_, D, one, jet(b));
        jet_mul_transpose_accum(spec_, adj(a), D, cbar);
        jet_div(spec_, D, jet(i), jet(b));
        jet_neg(spec_, D, D);
        jet_mul_transpose_accum(spec_, adj(b), D, cbar);
        break;
      }
      case Op::kNeg:
        jet_sub(spec_, adj(a), adj(a), cbar);
        break;
      case Op::kAddC:
        jet_add(spec_, adj(a), adj(a), cbar);
        break;
      case Op::kMulC:
        jet_axpy(spec_, adj(a), cbar, aux_[i]);
        break;
      case Op::kRSubC:
        jet_sub(spec_, adj(a), adj(a), cbar);
        break;
      case Op::kRDivC: {
        // d(c/a) = -(c/a^2) da = -(result/a) da
        jet_div(spec_, D, jet(i), jet(a));
        jet_neg(spec_, D, D);
        jet_mul_transpose_accum(spec_, adj(a), D, cbar);
        break;
      }
      case Op::kTanh: {
        const UnaryDerivs d = tanh_derivs(value(a));
        jet_compose_deriv(spec_, D, jet(a), d.f1, d.f2, d.f3);
        jet_mul_transpose_accum(spec_, adj(a), D, cbar);
        break;
      }
      case Op::kSoftplus: {
        const UnaryDerivs d = softplus_derivs(value(a));
        jet_compose_deriv(spec_, D, jet(a), d.f1, d.f2, d.f3);
        jet_mul_transpose_accum(spec_, adj(a), D, cbar);
        break;
      }
      case Op::kExp: {
        const UnaryDerivs d = exp_derivs(value(a));
        jet_compose_deriv(spec_, D, jet(a), d.f1, d.f2, d.f3);
        jet_mul_transpose_accum(spec_, adj(a), D, cbar);
        break;
      }
      case Op::kLog: {
        const UnaryDerivs d = log_derivs(value(a));
        jet_compose_deriv(spec_, D, jet(a), d.f1, d.f2, d.f3);
        jet_mul_transpose_accum(spec_, adj(a), D, cbar);
        break;
      }
      case Op::kMaxC:
        if (value(a) > aux_[i]) jet_add(spec_, adj(a), adj(a), cbar);
        break;
      case Op::kExtract:
        adj(a)[arg1_[i]] += cbar[0];
        break;
      case Op::kAffineRow: {
        const AffineRec& rec = affines_[a];
        // rows are contiguous; handle the whole record once, then skip it
        backward_affine(rec);
        i = rec.out0;
        break;
      }
    }
  }
}

DiffScalar Trace::scalar(NodeId id) {
  check_node(id);
  return DiffScalar(this, id);
}

// ---------------------------------------------------------------------------

namespace {

Trace* same_trace(const DiffScalar& a, const DiffScalar& b) {
  if (a.trace() == nullptr || a.trace() != b.trace())
    throw UsageError("operands recorded on different traces");
  return a.trace();
}

Trace* need_trace(const DiffScalar& a) {
  if (a.trace() == nullptr) throw UsageError("scalar is not bound to a trace");
  return a.trace();
}

}  // namespace

double DiffScalar::spatial_grad(int i) const {
  const JetSpec& s = tr_->spec();
  if (i < 0 || i >= 4) throw UsageError("gradient index out of range");
  if (i >= s.n_grad) return 0.0;
  return tr_->jet(id_)[s.grad(i)];
}

double DiffScalar::spatial_hess(int i, int j) const {
  const JetSpec& s = tr_->spec();
  if (i < 0 || j < 0 || i >= 4 || j >= 4) throw UsageError("hessian index out of range");
  if (i >= s.n_hess || j >= s.n_hess) return 0.0;
  if (i > j) std::swap(i, j);
  return tr_->jet(id_)[s.hess(i, j)];
}

DiffScalar operator+(const DiffScalar& a, const DiffScalar& b) {
  Trace* tr = same_trace(a, b);
  return DiffScalar(tr, tr->add(a.id(), b.id()));
}
DiffScalar operator-(const DiffScalar& a, const DiffScalar& b) {
  Trace* tr = same_trace(a, b);
  return DiffScalar(tr, tr->sub(a.id(), b.id()));
}
DiffScalar operator*(const DiffScalar& a, const DiffScalar& b) {
  Trace* tr = same_trace(a, b);
  return DiffScalar(tr, tr->mul(a.id(), b.id()));
}
DiffScalar operator/(const DiffScalar& a, const DiffScalar& b) {
  Trace* tr = same_trace(a, b);
  return DiffScalar(tr, tr->div(a.id(), b.id()));
}
DiffScalar operator+(const DiffScalar& a, double c) {
  Trace* tr = need_trace(a);
  return DiffScalar(tr, tr->add_const(a.id(), c));
}
DiffScalar operator+(double c, const DiffScalar& a) { return a + c; }
DiffScalar operator-(const DiffScalar& a, double c) { return a + (-c); }
DiffScalar operator-(double c, const DiffScalar& a) {
  Trace* tr = need_trace(a);
  return DiffScalar(tr, tr->rsub_const(c, a.id()));
}
DiffScalar operator*(const DiffScalar& a, double c) {
  Trace* tr = need_trace(a);
  return DiffScalar(tr, tr->mul_const(a.id(), c));
}
DiffScalar operator*(double c, const DiffScalar& a) { return a * c; }
DiffScalar operator/(const DiffScalar& a, double c) {
  if (c == 0.0) throw std::domain_error("division by zero on trace");
  return a * (1.0 / c);
}
DiffScalar operator/(double c, const DiffScalar& a) {
  Trace* tr = need_trace(a);
  return DiffScalar(tr, tr->rdiv_const(c, a.id()));
}
DiffScalar operator-(const DiffScalar& a) {
  Trace* tr = need_trace(a);
  return DiffScalar(tr, tr->neg(a.id()));
}

DiffScalar tanh(const DiffScalar& a) {
  Trace* tr = need_trace(a);
  return DiffScalar(tr, tr->tanh(a.id()));
}
DiffScalar softplus(const DiffScalar& a) {
  Trace* tr = need_trace(a);
  return DiffScalar(tr, tr->softplus(a.id()));
}
DiffScalar exp(const DiffScalar& a) {
  Trace* tr = need_trace(a);
  return DiffScalar(tr, tr->exp(a.id()));
}
DiffScalar log(const DiffScalar& a) {
  Trace* tr = need_trace(a);
  return DiffScalar(tr, tr->log(a.id()));
}
DiffScalar max_const(const DiffScalar& a, double c) {
  Trace* tr = need_trace(a);
  return DiffScalar(tr, tr->max_const(a.id(), c));
}

std::vector<DiffScalar> lift_input(Trace& tr, std::span<const double> x) {
  std::vector<DiffScalar> out;
  out.reserve(x.size());
  for (size_t i = 0; i < x.size(); ++i)
    out.push_back(DiffScalar(&tr, tr.input(x[i], static_cast<int>(i))));
  return out;
}

std::vector<double> parameter_gradient(Trace& tr, const DiffScalar& loss) {
  if (loss.trace() != &tr) throw UsageError("loss was not recorded on this trace");
  tr.backward(loss.id());
  auto g = tr.param_gradient();
  return std::vector<double>(g.begin(), g.end());
}

double finite_difference_check(const ParametricScalar& f, std::span<const double> theta,
                               double h) {
  std::vector<double> work(theta.begin(), theta.end());
  const std::vector<double> ad = f.gradient(work);
  double worst = 0.0;
  for (size_t i = 0; i < work.size(); ++i) {
    const double saved = work[i];
    work[i] = saved + h;
    const double up = f.value(work);
    work[i] = saved - h;
    const double dn = f.value(work);
    work[i] = saved;
    const double fd = (up - dn) / (2.0 * h);
    const double rel = std::abs(ad[i] - fd) / std::max(1.0, std::abs(fd));
    if (rel > worst) worst = rel;
  }
  return worst;
}

}  // namespace pdeflow
