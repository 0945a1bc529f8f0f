#pragma once

// Named parameter tensors plus per-tape binding. Parameters live in a
// ParamStore between steps; a Binder lazily mirrors them onto the current
// tape so gradients can be read back by name after backward().

#include <map>
#include <stdexcept>
#include <string>

#include "hmfnet/rng.hpp"
#include "hmfnet/tensor.hpp"

namespace hmfnet {

struct UnknownParameter : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ParamStore {
public:
  Tensor &at(const std::string &name) {
    auto it = values_.find(name);
    if (it == values_.end())
      throw UnknownParameter("unknown parameter: " + name);
    return it->second;
  }
  const Tensor &at(const std::string &name) const {
    auto it = values_.find(name);
    if (it == values_.end())
      throw UnknownParameter("unknown parameter: " + name);
    return it->second;
  }

  bool has(const std::string &name) const { return values_.count(name) > 0; }

  void put(const std::string &name, Tensor value) {
    values_[name] = std::move(value);
  }

  std::size_t total_parameters() const {
    std::size_t n = 0;
    for (const auto &[name, t] : values_)
      n += t.numel();
    return n;
  }

  auto begin() { return values_.begin(); }
  auto end() { return values_.end(); }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }
  std::size_t size() const { return values_.size(); }
  void clear() { values_.clear(); }

private:
  std::map<std::string, Tensor> values_;  // ordered: serialization stability
};

// Weight init: uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)); biases zero;
// layer-norm gain one, shift zero.
inline Tensor uniform_weights(std::size_t fan_in, std::size_t fan_out,
                              Xoshiro256 &rng) {
  double limit = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor w({fan_in, fan_out});
  for (double &v : w.data)
    v = rng.uniform(-limit, limit);
  return w;
}

inline void init_linear(ParamStore &store, const std::string &prefix,
                        std::size_t in, std::size_t out, Xoshiro256 &rng) {
  store.put(prefix + ".weight", uniform_weights(in, out, rng));
  store.put(prefix + ".bias", Tensor({out}, 0.0));
}

inline void init_layer_norm(ParamStore &store, const std::string &prefix,
                            std::size_t dim) {
  store.put(prefix + ".gamma", Tensor({dim}, 1.0));
  store.put(prefix + ".beta", Tensor({dim}, 0.0));
}

// Binds store tensors onto one tape, one leaf per parameter per step.
class Binder {
public:
  Binder(Tape &tape, ParamStore &store) : tape_(&tape), store_(&store) {}

  Var operator()(const std::string &name) {
    auto it = bound_.find(name);
    if (it != bound_.end())
      return it->second;
    Var v = tape_->leaf(store_->at(name));
    bound_.emplace(name, v);
    return v;
  }

  Tape &tape() { return *tape_; }
  ParamStore &store() { return *store_; }

  // Gradients for every bound parameter, after tape.backward().
  std::map<std::string, Tensor> gradients() const {
    std::map<std::string, Tensor> out;
    for (const auto &[name, var] : bound_)
      out[name] = tape_->grad(var.id);
    return out;
  }

  const std::map<std::string, Var> &bound() const { return bound_; }

private:
  Tape *tape_;
  ParamStore *store_;
  std::map<std::string, Var> bound_;
};

} // namespace hmfnet
