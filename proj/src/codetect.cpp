#include "wsct/codetect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "wsct/augment.hpp"

namespace wsct {

template <typename T>
CoDetectNetT<T>::CoDetectNetT(const CoDetectArch& arch, std::uint64_t seed) : arch_(arch) {
  std::mt19937_64 rng(seed);
  const int b = arch.base;
  enc1_ = nn::add_conv<T>(params_, rng, "encoder.conv1", 1, arch.encoder1, 3);
  enc2_ = nn::add_conv<T>(params_, rng, "encoder.conv2", arch.encoder1, arch.encoder2, 3);
  com1_ = nn::add_conv<T>(params_, rng, "common.down1", 2 * arch.encoder2, b, 3);
  com2_ = nn::add_conv<T>(params_, rng, "common.down2", b, 2 * b, 3);
  com3_ = nn::add_conv<T>(params_, rng, "common.bottleneck", 2 * b, 4 * b, 3);
  com_up2_ = nn::add_conv<T>(params_, rng, "common.up2", 4 * b + 2 * b, 2 * b, 3);
  com_up1_ = nn::add_conv<T>(params_, rng, "common.up1", 2 * b + b, b, 3);
  for (auto [prefix, layers] : {std::pair{std::string("decoder_t"), &dec_t_},
                                std::pair{std::string("decoder_t1"), &dec_t1_}}) {
    (*layers)[0] = nn::add_conv<T>(params_, rng, prefix + ".up2", b + arch.encoder2, arch.decoder2, 3);
    (*layers)[1] =
        nn::add_conv<T>(params_, rng, prefix + ".up1", arch.decoder2 + arch.encoder1, arch.decoder1, 3);
    (*layers)[2] = nn::add_conv<T>(params_, rng, prefix + ".head", arch.decoder1, 1, 1, T(-2));
  }
}

template <typename T>
std::array<nn::NodeId, 3> CoDetectNetT<T>::encode(nn::Graph<T>& g, nn::NodeId image) const {
  const nn::NodeId a1 = g.relu(g.conv(image, enc1_));
  const nn::NodeId a2 = g.relu(g.conv(g.maxpool2(a1), enc2_));
  return {a1, a2, g.maxpool2(a2)};
}

template <typename T>
nn::NodeId CoDetectNetT<T>::decode(nn::Graph<T>& g, nn::NodeId common,
                                   const std::array<nn::NodeId, 3>& skips,
                                   const std::array<nn::ConvLayer, 3>& layers) const {
  const nn::NodeId d2 = g.relu(g.conv(g.concat(g.upsample2(common), skips[1]), layers[0]));
  const nn::NodeId d1 = g.relu(g.conv(g.concat(g.upsample2(d2), skips[0]), layers[1]));
  return g.sigmoid(g.conv(d1, layers[2]));
}

template <typename T>
typename CoDetectNetT<T>::Nodes CoDetectNetT<T>::build(nn::Graph<T>& g, nn::Tensor<T> image_t,
                                                       nn::Tensor<T> image_t1) const {
  if (!image_t.same_shape(image_t1)) throw InputError("co-detection inputs differ in shape");
  if (image_t.channels() != 1) throw InputError("co-detection expects grayscale inputs");
  if (image_t.height() % kDownsample != 0 || image_t.width() % kDownsample != 0)
    throw InputError("image size must be divisible by " + std::to_string(kDownsample));
  Nodes nodes;
  nodes.input_t = g.input(std::move(image_t));
  nodes.input_t1 = g.input(std::move(image_t1));
  const auto skips_t = encode(g, nodes.input_t);
  const auto skips_t1 = encode(g, nodes.input_t1);
  nodes.features_t = skips_t[2];
  nodes.features_t1 = skips_t1[2];

  const nn::NodeId c1 = g.relu(g.conv(g.concat(skips_t[2], skips_t1[2]), com1_));
  const nn::NodeId c2 = g.relu(g.conv(g.maxpool2(c1), com2_));
  const nn::NodeId c3 = g.relu(g.conv(g.maxpool2(c2), com3_));
  const nn::NodeId u2 = g.relu(g.conv(g.concat(g.upsample2(c3), c2), com_up2_));
  const nn::NodeId common = g.relu(g.conv(g.concat(g.upsample2(u2), c1), com_up1_));

  nodes.output_t = decode(g, common, skips_t, dec_t_);
  nodes.output_t1 = decode(g, common, skips_t1, dec_t1_);
  return nodes;
}

template class CoDetectNetT<float>;
template class CoDetectNetT<double>;

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(sigma > 0.0)) throw ConfigError("sigma must be > 0");
}

nn::Tensor<float> to_tensor(const Image& image) {
  nn::Tensor<float> t(1, image.height(), image.width());
  std::copy(image.values().begin(), image.values().end(), t.data());
  return t;
}

Image to_image(const nn::Tensor<float>& tensor, int channel) {
  Image out(tensor.height(), tensor.width());
  std::copy(tensor.channel(channel), tensor.channel(channel) + tensor.plane(), out.data());
  return out;
}

std::pair<LikelihoodMap, LikelihoodMap> codetect_forward(const CoDetectParams& params,
                                                         const Image& image_t,
                                                         const Image& image_t1) {
  if (!image_t.same_shape(image_t1)) throw InputError("co-detection inputs differ in shape");
  nn::Graph<float> g(params.params());
  const auto nodes = params.build(g, to_tensor(image_t), to_tensor(image_t1));
  return {LikelihoodMap{to_image(g.value(nodes.output_t)), 0},
          LikelihoodMap{to_image(g.value(nodes.output_t1)), 1}};
}

namespace {

double mse(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw InputError("likelihood maps differ in shape");
  if (a.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

// d MSE / d prediction.
nn::Tensor<float> mse_seed(const nn::Tensor<float>& pred, const Image& target) {
  nn::Tensor<float> seed(1, pred.height(), pred.width());
  const float scale = 2.0f / static_cast<float>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) seed.data()[i] = scale * (pred.data()[i] - target[i]);
  return seed;
}

struct PreparedSample {
  Image image_t, image_t1, target_t, target_t1;
};

double dataset_loss(const CoDetectParams& net, const std::vector<PreparedSample>& data) {
  double total = 0.0;
  for (const auto& s : data) {
    auto [lt, lt1] = codetect_forward(net, s.image_t, s.image_t1);
    total += codetect_loss(lt.values, lt1.values, s.target_t, s.target_t1);
  }
  return total / static_cast<double>(data.size());
}

}  // namespace

double codetect_loss(const Image& l_t, const Image& l_t1, const Image& lhat_t,
                     const Image& lhat_t1) {
  return mse(l_t, lhat_t) + mse(l_t1, lhat_t1);
}

CoDetectParams train_codetect(const std::vector<CoDetectSample>& dataset, const TrainConfig& cfg,
                              const CoDetectArch& arch, TrainReport* report) {
  cfg.validate();
  if (dataset.empty()) throw TrainingError("co-detection training set is empty");
  std::vector<PreparedSample> data;
  for (const auto& s : dataset) {
    if (!s.image_t.same_shape(s.image_t1) || !s.image_t.same_shape(dataset.front().image_t))
      throw InputError("co-detection training images differ in shape");
    const int h = s.image_t.height(), w = s.image_t.width();
    data.push_back({s.image_t, s.image_t1, render_likelihood(s.points_t, cfg.sigma, h, w),
                    render_likelihood(s.points_t1, cfg.sigma, h, w)});
  }

  CoDetectParams net(arch, cfg.seed);
  const double initial = dataset_loss(net, data);
  nn::Adam<float> adam(net.params(), cfg.learning_rate);
  nn::ParamGrads<float> grads(net.params());
  std::mt19937_64 rng(cfg.seed ^ 0x5bd1e995ULL);
  const bool square = data.front().image_t.height() == data.front().image_t.width();
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> epoch_losses;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      grads.zero();
      for (std::size_t k = start; k < stop; ++k) {
        const PreparedSample& s = data[order[k]];
        const Dihedral d{cfg.augment ? static_cast<int>(rng() % (square ? 8 : 4)) : 0};
        const Image it = d.apply(s.image_t), it1 = d.apply(s.image_t1);
        const Image tt = d.apply(s.target_t), tt1 = d.apply(s.target_t1);
        nn::Graph<float> g(net.params());
        const auto nodes = net.build(g, to_tensor(it), to_tensor(it1));
        const Image lt = to_image(g.value(nodes.output_t));
        const Image lt1 = to_image(g.value(nodes.output_t1));
        const double loss = codetect_loss(lt, lt1, tt, tt1);
        if (!std::isfinite(loss)) throw TrainingError("co-detection loss is not finite", epoch);
        epoch_loss += loss;
        g.backward({{nodes.output_t, mse_seed(g.value(nodes.output_t), tt)},
                    {nodes.output_t1, mse_seed(g.value(nodes.output_t1), tt1)}},
                   nn::BackwardMode::kGradient, &grads);
      }
      grads.scale(1.0f / static_cast<float>(stop - start));
      if (!grads.all_finite()) throw TrainingError("co-detection gradient is not finite", epoch);
      adam.step(net.params(), grads);
    }
    epoch_losses.push_back(epoch_loss / static_cast<double>(data.size()));
  }

  if (report) {
    report->initial_loss = initial;
    report->final_loss = dataset_loss(net, data);
    report->epoch_losses = std::move(epoch_losses);
    if (!std::isfinite(report->final_loss))
      throw TrainingError("co-detection loss is not finite", cfg.epochs - 1);
  }
  return net;
}

std::vector<Point2> detect_peaks(const Image& map, double peak_threshold, double min_distance) {
  struct Candidate {
    float value;
    int x, y;
  };
  std::vector<Candidate> candidates;
  const int h = map.height(), w = map.width();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float v = map.at(x, y);
      if (!(v > peak_threshold)) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dx == 0 && dy == 0) || !map.contains(x + dx, y + dy)) continue;
          if (map.at(x + dx, y + dy) > v) {
            is_max = false;
            break;
          }
        }
      if (is_max) candidates.push_back({v, x, y});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.value > b.value; });
  std::vector<Point2> peaks;
  const double min2 = min_distance * min_distance;
  for (const auto& c : candidates) {
    const Point2 p{double(c.x), double(c.y)};
    const bool clear = std::ranges::all_of(peaks, [&](const Point2& q) { return squared_distance(p, q) >= min2; });
    if (clear) peaks.push_back(p);
  }
  return peaks;
}

nn::Checkpoint codetect_checkpoint(const CoDetectParams& params) {
  nn::Checkpoint ckpt;
  ckpt.kind = "codetect";
  const auto& a = params.arch();
  ckpt.metadata = {{"encoder1", std::to_string(a.encoder1)}, {"encoder2", std::to_string(a.encoder2)},
                   {"base", std::to_string(a.base)},         {"decoder2", std::to_string(a.decoder2)},
                   {"decoder1", std::to_string(a.decoder1)}};
  ckpt.params = params.params();
  return ckpt;
}

CoDetectParams codetect_from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.kind != "codetect") throw IoError("checkpoint holds '" + ckpt.kind + "', not codetect");
  CoDetectArch a;
  try {
    a.encoder1 = std::stoi(ckpt.metadata.at("encoder1"));
    a.encoder2 = std::stoi(ckpt.metadata.at("encoder2"));
    a.base = std::stoi(ckpt.metadata.at("base"));
    a.decoder2 = std::stoi(ckpt.metadata.at("decoder2"));
    a.decoder1 = std::stoi(ckpt.metadata.at("decoder1"));
  } catch (const std::exception&) {
    throw IoError("codetect checkpoint metadata incomplete");
  }
  CoDetectParams net(a, 0);
  net.params().assign_from(ckpt.params);
  return net;
}

}  // namespace wsct
