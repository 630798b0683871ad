#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "wsct/error.hpp"
#include "wsct/nn/aligned.hpp"

namespace wsct::nn {

// Named, shaped parameter arrays. Layers refer to entries by index, so a layer
// used on several paths (shared encoders) reads and updates one array.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    std::vector<int> shape;
    AlignedVector<T> values;
  };

  int add(std::string name, std::vector<int> shape, T fill = T{});
  int index_of(const std::string& name) const;

  Entry& operator[](int i) { return entries_[static_cast<std::size_t>(i)]; }
  const Entry& operator[](int i) const { return entries_[static_cast<std::size_t>(i)]; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  int size() const { return static_cast<int>(entries_.size()); }
  std::size_t scalar_count() const;

  // Copies values with a cast; entry names and shapes must match.
  template <typename U>
  void assign_from(const ParamStore<U>& other);

 private:
  std::vector<Entry> entries_;
};

// Gradient buffers laid out like a ParamStore.
template <typename T>
struct ParamGrads {
  std::vector<AlignedVector<T>> values;

  explicit ParamGrads(const ParamStore<T>& store);
  void zero();
  void scale(T factor);
  bool all_finite() const;
};

struct ConvLayer {
  int weight = -1;  // ParamStore index, shape {out, in, k, k}
  int bias = -1;    // shape {out}
  int in = 0;
  int out = 0;
  int kernel = 3;
};

// Registers "<name>.weight" and "<name>.bias"; weights He-normal, bias constant.
template <typename T>
ConvLayer add_conv(ParamStore<T>& store, std::mt19937_64& rng, const std::string& name, int in,
                   int out, int kernel, T bias_init = T{});

template <typename T>
class Adam {
 public:
  explicit Adam(const ParamStore<T>& store, double learning_rate = 1e-3, double beta1 = 0.9,
                double beta2 = 0.999, double epsilon = 1e-8);
  void step(ParamStore<T>& store, const ParamGrads<T>& grads);
  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Self-describing checkpoint container: magic, format version, model kind,
// string metadata, then named arrays with their shapes (float32 payload).
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::string kind;
  std::map<std::string, std::string> metadata;
  ParamStore<float> params;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

template <typename T>
template <typename U>
void ParamStore<T>::assign_from(const ParamStore<U>& other) {
  if (other.size() != size()) throw InputError("parameter count mismatch");
  for (int i = 0; i < size(); ++i) {
    auto& dst = (*this)[i];
    const auto& src = other[i];
    if (dst.name != src.name || dst.shape != src.shape)
      throw InputError("parameter mismatch at '" + dst.name + "'");
    for (std::size_t k = 0; k < dst.values.size(); ++k) dst.values[k] = static_cast<T>(src.values[k]);
  }
}

}  // namespace wsct::nn
