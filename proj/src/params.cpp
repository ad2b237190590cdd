#include "topiceq/params.hpp"

#include <algorithm>
#include <cmath>

#include "topiceq/error.hpp"

namespace topiceq {

std::size_t ParamStore::add(std::string name, Array init) {
  if (index_.contains(name)) throw Error(ErrorKind::InputError, "duplicate parameter " + name);
  Parameter p;
  p.name = name;
  p.grad = Array(init.shape());
  p.m = Array(init.shape());
  p.v = Array(init.shape());
  p.value = std::move(init);
  params_.push_back(std::move(p));
  index_.emplace(std::move(name), params_.size() - 1);
  return params_.size() - 1;
}

std::size_t ParamStore::add_glorot(std::string name, std::size_t rows, std::size_t cols, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Array w(Shape{rows, cols});
  for (double& x : w.data()) x = rng.uniform(-a, a);
  return add(std::move(name), std::move(w));
}

bool ParamStore::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

std::size_t ParamStore::index(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorKind::InputError, "unknown parameter " + std::string(name));
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void GradBuffer::add(std::size_t param, const Array& g, double scale) {
  if (param >= grads_.size()) grads_.resize(param + 1);
  Array& dst = grads_[param];
  if (dst.empty()) {
    dst = Array(g.shape());
  } else if (dst.shape() != g.shape()) {
    throw Error(ErrorKind::ShapeError, "gradient shape mismatch in buffer");
  }
  auto d = dst.data();
  auto s = g.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += scale * s[i];
}

void GradBuffer::add(const GradBuffer& other, double scale) {
  for (std::size_t i = 0; i < other.grads_.size(); ++i) {
    if (!other.grads_[i].empty()) add(i, other.grads_[i], scale);
  }
}

void GradBuffer::add_to(ParamStore& store, double scale) const {
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    if (grads_[i].empty()) continue;
    auto d = store.at(i).grad.data();
    auto s = grads_[i].data();
    for (std::size_t j = 0; j < d.size(); ++j) d[j] += scale * s[j];
  }
}

void GradBuffer::clear() {
  for (auto& g : grads_) g = Array();
}

const Array* GradBuffer::get(std::size_t param) const {
  if (param >= grads_.size() || grads_[param].empty()) return nullptr;
  return &grads_[param];
}

void adam_step(ParamStore& store, const AdamConfig& cfg, long step) {
  if (step < 1) throw Error(ErrorKind::InputError, "adam step counter must start at 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (auto& p : store) {
    if (!p.frozen) {
      auto w = p.value.data();
      auto g = p.grad.data();
      auto m = p.m.data();
      auto v = p.v.data();
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
      }
    }
    p.grad.fill(0.0);
  }
}

double global_grad_norm(const ParamStore& store) {
  double sq = 0.0;
  for (const auto& p : store) {
    if (p.frozen) continue;
    for (double g : p.grad.data()) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_global_norm(ParamStore& store, double max_norm) {
  if (!(max_norm > 0.0)) throw Error(ErrorKind::InputError, "max_norm must be positive");
  const double norm = global_grad_norm(store);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& p : store) {
      for (double& g : p.grad.data()) g *= scale;
    }
  }
  return norm;
}

FiniteDiffReport finite_diff_check(const std::function<double()>& loss, ParamStore& store, double step,
                                   std::size_t coords_per_tensor, std::uint64_t seed, double abs_floor,
                                   const std::vector<std::string>& only, FdStencil stencil) {
  FiniteDiffReport report;
  Rng rng(seed);
  for (auto& p : store) {
    if (!only.empty() && std::find(only.begin(), only.end(), p.name) == only.end()) continue;
    std::vector<std::size_t> coords(p.value.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (coords.size() > coords_per_tensor) {
      rng.shuffle(coords);
      coords.resize(coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t i : coords) {
      const double saved = p.value[i];
      auto at = [&](double offset) {
        p.value[i] = saved + offset;
        const double v = loss();
        p.value[i] = saved;
        return v;
      };
      const double d1 = at(step) - at(-step);
      const double numeric = stencil == FdStencil::Central4
                                 ? (8.0 * d1 - (at(2.0 * step) - at(-2.0 * step))) / (12.0 * step)
                                 : d1 / (2.0 * step);
      const double analytic = p.grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), abs_floor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++report.coords_checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = p.name;
        report.worst_index = i;
        report.analytic = analytic;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

Array sample_standard_normal(Rng& rng, const Shape& shape) {
  Array out(shape);
  for (double& x : out.data()) x = rng.normal();
  return out;
}

}  // namespace topiceq
