#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pdeflow/errors.hpp"
#include "pdeflow/jet.hpp"

namespace pdeflow {

using NodeId = int32_t;

class DiffScalar;

// Recording tape for scalar automatic differentiation. Every node carries a
// jet (value plus derivatives w.r.t. the input coordinates, see JetSpec),
// propagated forward at record time. A reverse sweep over the tape yields
// exact derivatives of any recorded scalar with respect to the bound
// parameter vector, including contributions that flow through reads of
// jet components (see extract()).
//
// A trace is single-threaded. Parameters are bound by reference and must
// stay alive and unmodified while recording or sweeping.
class Trace {
 public:
  Trace(JetSpec spec, std::span<const double> params);
  Trace(int n_inputs, int order, std::span<const double> params)
      : Trace(JetSpec::for_order(n_inputs, order), params) {}

  // Drops all nodes but keeps capacity and the parameter binding.
  void clear();
  // Rebind the parameter vector (and reset the tape).
  void reset(JetSpec spec, std::span<const double> params);

  const JetSpec& spec() const { return spec_; }
  int size() const { return static_cast<int>(op_.size()); }
  int n_params() const { return static_cast<int>(params_.size()); }

  // --- leaves ---------------------------------------------------------
  NodeId input(double value, int coord);
  NodeId constant(double value);
  NodeId param(int slot);
  // Externally supplied jet; a leaf, nothing propagates back through it.
  NodeId inject(const double* jet);

  // --- scalar ops -----------------------------------------------------
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId div(NodeId a, NodeId b);
  NodeId neg(NodeId a);
  NodeId add_const(NodeId a, double c);
  NodeId mul_const(NodeId a, double c);
  NodeId rsub_const(double c, NodeId a);  // c - a
  NodeId rdiv_const(double c, NodeId a);  // c / a
  NodeId tanh(NodeId a);
  NodeId softplus(NodeId a);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId max_const(NodeId a, double c);  // max(a, c); derivative 0 at the kink

  // Reads jet component `comp` of node a as a new scalar. The result carries
  // no derivatives of its own, but parameter gradients flow through the read.
  NodeId extract(NodeId a, int comp);
  NodeId extract_value(NodeId a) { return extract(a, 0); }
  NodeId extract_grad(NodeId a, int i) { return extract(a, spec_.grad(i)); }
  NodeId extract_hess(NodeId a, int i, int j) {
    return extract(a, i <= j ? spec_.hess(i, j) : spec_.hess(j, i));
  }

  // --- fused layer op -------------------------------------------------
  // Records y = W_A x_A + W_B x_B + b over contiguous node blocks, where the
  // weights and bias live in the bound parameter vector (row-major rows of
  // length block.n at block.weight_slot; bias at bias_slot, or -1 for none).
  // Returns the id of the first of n_out contiguous output nodes.
  struct Block {
    int weight_slot = -1;
    NodeId x0 = -1;
    int n = 0;
  };
  NodeId affine(int n_out, Block a, Block b, int bias_slot);

  // --- access ---------------------------------------------------------
  const double* jet(NodeId id) const { return jets_.data() + static_cast<size_t>(id) * q_; }
  double value(NodeId id) const { return jets_[static_cast<size_t>(id) * q_]; }

  // Reverse sweep from `output`; fills the parameter gradient.
  void backward(NodeId output);
  std::span<const double> param_gradient() const { return grad_; }

  // Scalar handle factory (checks the id).
  DiffScalar scalar(NodeId id);

 private:
  enum class Op : uint8_t {
    kInput, kConst, kParam, kInject,
    kAdd, kSub, kMul, kDiv, kNeg,
    kAddC, kMulC, kRSubC, kRDivC,
    kTanh, kSoftplus, kExp, kLog, kMaxC,
    kExtract, kAffineRow,
  };

  struct AffineRec {
    NodeId out0;
    int n_out;
    Block a, b;
    int bias_slot;
  };

  NodeId push(Op op, int32_t a, int32_t b, double aux);
  NodeId push_unary(Op op, NodeId a, const UnaryDerivs& d);
  double* jet_mut(NodeId id) { return jets_.data() + static_cast<size_t>(id) * q_; }
  double* adj(NodeId id) { return adjoint_.data() + static_cast<size_t>(id) * q_; }
  void backward_affine(const AffineRec& rec);
  void check_node(NodeId id) const;

  JetSpec spec_;
  int q_ = 0;
  std::span<const double> params_;

  std::vector<Op> op_;
  std::vector<int32_t> arg0_, arg1_;
  std::vector<double> aux_;
  std::vector<double> jets_;
  std::vector<AffineRec> affines_;

  std::vector<double> adjoint_;
  std::vector<double> grad_;
  std::vector<double> scratch_;
};

// Lightweight handle for user-facing arithmetic. Operations between handles
// from different traces throw UsageError.
class DiffScalar {
 public:
  DiffScalar() = default;
  DiffScalar(Trace* tr, NodeId id) : tr_(tr), id_(id) {}

  Trace* trace() const { return tr_; }
  NodeId id() const { return id_; }

  double value() const { return tr_->value(id_); }
  // Reads outside the active derivative order return 0.
  double spatial_grad(int i) const;
  double spatial_hess(int i, int j) const;

  friend DiffScalar operator+(const DiffScalar& a, const DiffScalar& b);
  friend DiffScalar operator-(const DiffScalar& a, const DiffScalar& b);
  friend DiffScalar operator*(const DiffScalar& a, const DiffScalar& b);
  friend DiffScalar operator/(const DiffScalar& a, const DiffScalar& b);
  friend DiffScalar operator+(const DiffScalar& a, double c);
  friend DiffScalar operator+(double c, const DiffScalar& a);
  friend DiffScalar operator-(const DiffScalar& a, double c);
  friend DiffScalar operator-(double c, const DiffScalar& a);
  friend DiffScalar operator*(const DiffScalar& a, double c);
  friend DiffScalar operator*(double c, const DiffScalar& a);
  friend DiffScalar operator/(const DiffScalar& a, double c);
  friend DiffScalar operator/(double c, const DiffScalar& a);
  friend DiffScalar operator-(const DiffScalar& a);

 private:
  friend class Trace;
  Trace* tr_ = nullptr;
  NodeId id_ = -1;
};

DiffScalar tanh(const DiffScalar& a);
DiffScalar softplus(const DiffScalar& a);
DiffScalar exp(const DiffScalar& a);
DiffScalar log(const DiffScalar& a);
DiffScalar max_const(const DiffScalar& a, double c);

// Lifts input coordinates onto the trace: coordinate i gets value x[i] and a
// unit first derivative seed (when the trace records first derivatives).
std::vector<DiffScalar> lift_input(Trace& tr, std::span<const double> x);

// Reverse sweep convenience: d(loss)/d(theta_p) for every bound parameter.
std::vector<double> parameter_gradient(Trace& tr, const DiffScalar& loss);

// Central-difference oracle for parameter gradients. `value` evaluates the
// scalar at given parameters; `gradient` is the path under test. Returns the
// maximum over parameters of |ad - fd| / max(1, |fd|).
struct ParametricScalar {
  std::function<double(std::span<const double>)> value;
  std::function<std::vector<double>(std::span<const double>)> gradient;
};
double finite_difference_check(const ParametricScalar& f, std::span<const double> theta,
                               double h);

}  // namespace pdeflow
