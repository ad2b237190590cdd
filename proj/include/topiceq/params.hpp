#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "topiceq/array.hpp"
#include "topiceq/rng.hpp"

namespace topiceq {

struct Parameter {
  std::string name;
  Array value;
  Array grad;
  Array m;  // Adam first moment
  Array v;  // Adam second moment
  bool frozen = false;
};

/// Named home of every trainable array. Iteration order is insertion order,
/// which keeps reductions and serialization deterministic.
class ParamStore {
 public:
  std::size_t add(std::string name, Array init);
  /// Glorot-uniform weights: a = sqrt(6 / (fan_in + fan_out)).
  std::size_t add_glorot(std::string name, std::size_t rows, std::size_t cols, Rng& rng);
  std::size_t add_zeros(std::string name, Shape shape) { return add(std::move(name), Array(std::move(shape))); }

  bool contains(std::string_view name) const;
  std::size_t index(std::string_view name) const;
  std::size_t size() const noexcept { return params_.size(); }

  Parameter& at(std::size_t i) { return params_.at(i); }
  const Parameter& at(std::size_t i) const { return params_.at(i); }
  Parameter& operator[](std::string_view name) { return params_[index(name)]; }
  const Parameter& operator[](std::string_view name) const { return params_[index(name)]; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  void freeze(std::string_view name, bool frozen = true) { (*this)[name].frozen = frozen; }
  std::size_t scalar_count() const;

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Per-parameter gradient accumulator aligned with a ParamStore's indices.
/// Entries stay empty until something is added to them.
class GradBuffer {
 public:
  explicit GradBuffer(std::size_t n = 0) : grads_(n) {}
  void add(std::size_t param, const Array& g, double scale = 1.0);
  void add(const GradBuffer& other, double scale = 1.0);
  /// grad[i] += scale * buffer[i] for every touched entry.
  void add_to(ParamStore& store, double scale = 1.0) const;
  void clear();
  const Array* get(std::size_t param) const;

 private:
  std::vector<Array> grads_;
};

struct AdamConfig {
  double lr = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam update for every non-frozen parameter, then zeroes
/// all gradients. `step` counts from 1.
void adam_step(ParamStore& store, const AdamConfig& cfg, long step);

double global_grad_norm(const ParamStore& store);
/// Rescales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(ParamStore& store, double max_norm);

struct FiniteDiffReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coords_checked = 0;

  bool ok(double tol) const { return max_rel_err < tol; }
};

/// Central stencils: 2-point (error O(h^2)) and 4-point (error O(h^4)).
enum class FdStencil { Central2, Central4 };

/// Compares the gradients currently held in `store` against central
/// differences of `loss`. At most `coords_per_tensor` coordinates are
/// sampled per parameter (all when the tensor is smaller). Relative error is
/// |a - n| / max(|a|, |n|, abs_floor).
FiniteDiffReport finite_diff_check(const std::function<double()>& loss, ParamStore& store, double step,
                                   std::size_t coords_per_tensor, std::uint64_t seed, double abs_floor = 1e-7,
                                   const std::vector<std::string>& only = {},
                                   FdStencil stencil = FdStencil::Central2);

Array sample_standard_normal(Rng& rng, const Shape& shape);

}  // namespace topiceq
