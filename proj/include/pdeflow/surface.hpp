#pragma once

#include <span>

#include "pdeflow/trace.hpp"

namespace pdeflow {

// A parametric scalar field u(x; theta). Both solvers train objects with this
// shape: record() builds the field on a tape (parameter gradients flow),
// eval() computes a frozen jet without touching any tape.
class Surface {
 public:
  virtual ~Surface() = default;

  virtual int n_params() const = 0;
  virtual int n_inputs() const = 0;

  // Records u at the lifted inputs `x` using the trace's bound parameters.
  virtual NodeId record(Trace& tr, std::span<const NodeId> x) const = 0;

  // Frozen evaluation: writes the jet of u at `x` (layout per `spec`).
  virtual void eval(std::span<const double> theta, std::span<const double> x,
                    const JetSpec& spec, double* jet_out) const = 0;
};

// u(x; theta) = theta[0], a single trainable constant. Used by tests and by
// the closed-form fixed-point checks of the time steppers.
class ConstantSurface final : public Surface {
 public:
  explicit ConstantSurface(int n_inputs) : n_inputs_(n_inputs) {}
  int n_params() const override { return 1; }
  int n_inputs() const override { return n_inputs_; }
  NodeId record(Trace& tr, std::span<const NodeId>) const override { return tr.param(0); }
  void eval(std::span<const double> theta, std::span<const double>, const JetSpec& spec,
            double* jet_out) const override {
    jet_const(spec, jet_out, theta[0]);
  }

 private:
  int n_inputs_;
};

// The call payoff (S - K)^+ as a parameterless surface; the exact time-zero
// solution every solve starts from. S is input coordinate 0.
class PayoffSurface final : public Surface {
 public:
  PayoffSurface(int n_inputs, double strike) : n_inputs_(n_inputs), strike_(strike) {}
  int n_params() const override { return 0; }
  int n_inputs() const override { return n_inputs_; }
  NodeId record(Trace& tr, std::span<const NodeId> x) const override {
    return tr.max_const(tr.add_const(x[0], -strike_), 0.0);
  }
  void eval(std::span<const double>, std::span<const double> x, const JetSpec& spec,
            double* jet_out) const override {
    const double m = x[0] - strike_;
    jet_const(spec, jet_out, m > 0.0 ? m : 0.0);
    if (m > 0.0 && spec.n_grad > 0) jet_out[spec.grad(0)] = 1.0;
  }

 private:
  int n_inputs_;
  double strike_;
};

}  // namespace pdeflow
