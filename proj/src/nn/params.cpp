#include "wsct/nn/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace wsct::nn {

template <typename T>
int ParamStore<T>::add(std::string name, std::vector<int> shape, T fill) {
  if (index_of(name) >= 0) throw InputError("duplicate parameter '" + name + "'");
  const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                        [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
  entries_.push_back({std::move(name), std::move(shape), AlignedVector<T>(n, fill)});
  return size() - 1;
}

template <typename T>
int ParamStore<T>::index_of(const std::string& name) const {
  for (int i = 0; i < size(); ++i)
    if (entries_[static_cast<std::size_t>(i)].name == name) return i;
  return -1;
}

template <typename T>
std::size_t ParamStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.values.size();
  return n;
}

template <typename T>
ParamGrads<T>::ParamGrads(const ParamStore<T>& store) {
  for (const auto& e : store.entries()) values.emplace_back(e.values.size(), T{});
}

template <typename T>
void ParamGrads<T>::zero() {
  for (auto& v : values) std::fill(v.begin(), v.end(), T{});
}

template <typename T>
void ParamGrads<T>::scale(T factor) {
  for (auto& v : values)
    for (T& g : v) g *= factor;
}

template <typename T>
bool ParamGrads<T>::all_finite() const {
  for (const auto& v : values)
    for (T g : v)
      if (!std::isfinite(g)) return false;
  return true;
}

template <typename T>
ConvLayer add_conv(ParamStore<T>& store, std::mt19937_64& rng, const std::string& name, int in,
                   int out, int kernel, T bias_init) {
  ConvLayer layer;
  layer.in = in;
  layer.out = out;
  layer.kernel = kernel;
  layer.weight = store.add(name + ".weight", {out, in, kernel, kernel});
  layer.bias = store.add(name + ".bias", {out}, bias_init);
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / (in * kernel * kernel)));
  for (T& w : store[layer.weight].values) w = static_cast<T>(dist(rng));
  return layer;
}

template <typename T>
Adam<T>::Adam(const ParamStore<T>& store, double learning_rate, double beta1, double beta2,
              double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  for (const auto& e : store.entries()) {
    m_.emplace_back(e.values.size(), 0.0);
    v_.emplace_back(e.values.size(), 0.0);
  }
}

template <typename T>
void Adam<T>::step(ParamStore<T>& store, const ParamGrads<T>& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < m_.size(); ++i) {
    auto& w = store[static_cast<int>(i)].values;
    const auto& g = grads.values[i];
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = g[k];
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * gk;
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * gk * gk;
      w[k] -= static_cast<T>(lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_));
    }
  }
}

namespace {

constexpr char kMagic[8] = {'W', 'S', 'C', 'T', 'C', 'K', 'P', 'T'};

void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_str(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) throw IoError("truncated checkpoint");
  return v;
}
std::string read_str(std::istream& is) {
  const std::uint32_t n = read_u32(is);
  if (n > (1u << 20)) throw IoError("corrupt checkpoint string");
  std::string s(n, '\0');
  if (!is.read(s.data(), n)) throw IoError("truncated checkpoint");
  return s;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint " + path);
  os.write(kMagic, sizeof kMagic);
  write_u32(os, Checkpoint::kFormatVersion);
  write_str(os, ckpt.kind);
  write_u32(os, static_cast<std::uint32_t>(ckpt.metadata.size()));
  for (const auto& [k, v] : ckpt.metadata) {
    write_str(os, k);
    write_str(os, v);
  }
  write_u32(os, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& e : ckpt.params.entries()) {
    write_str(os, e.name);
    write_u32(os, static_cast<std::uint32_t>(e.shape.size()));
    for (int d : e.shape) write_u32(os, static_cast<std::uint32_t>(d));
    os.write(reinterpret_cast<const char*>(e.values.data()),
             static_cast<std::streamsize>(e.values.size() * sizeof(float)));
  }
  if (!os) throw IoError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path);
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw IoError(path + " is not a checkpoint file");
  const std::uint32_t version = read_u32(is);
  if (version != Checkpoint::kFormatVersion)
    throw IoError("unsupported checkpoint format version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.kind = read_str(is);
  const std::uint32_t meta = read_u32(is);
  for (std::uint32_t i = 0; i < meta; ++i) {
    std::string k = read_str(is);
    ckpt.metadata[k] = read_str(is);
  }
  const std::uint32_t count = read_u32(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = read_str(is);
    const std::uint32_t ndim = read_u32(is);
    if (ndim > 8) throw IoError("corrupt checkpoint shape");
    std::vector<int> shape;
    for (std::uint32_t d = 0; d < ndim; ++d) shape.push_back(static_cast<int>(read_u32(is)));
    const int idx = ckpt.params.add(std::move(name), std::move(shape));
    auto& values = ckpt.params[idx].values;
    if (!is.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(float))))
      throw IoError("truncated checkpoint");
  }
  return ckpt;
}

template class ParamStore<float>;
template class ParamStore<double>;
template struct ParamGrads<float>;
template struct ParamGrads<double>;
template class Adam<float>;
template class Adam<double>;
template ConvLayer add_conv<float>(ParamStore<float>&, std::mt19937_64&, const std::string&, int,
                                   int, int, float);
template ConvLayer add_conv<double>(ParamStore<double>&, std::mt19937_64&, const std::string&, int,
                                    int, int, double);

}  // namespace wsct::nn
