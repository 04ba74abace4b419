#include "sharpnet/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "sharpnet/data.hpp"
#include "sharpnet/network.hpp"

namespace sharpnet {

double gini(std::span<const float> values) {
  const size_t n = values.size();
  if (n == 0) throw ValidationError("gini of an empty vector is undefined");
  double total = 0.0;
  for (float v : values) {
    if (v < 0.0f) throw ValidationError("gini requires non-negative values");
    total += v;
  }
  if (total <= 0.0)
    throw ValidationError("gini is undefined for an all-zero vector");

  // sorted-rank identity: sum_i (2i - n - 1) v_(i) / (n * sum v), i = 1..n
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i)
    acc += (2.0 * static_cast<double>(i + 1) - static_cast<double>(n) - 1.0) * sorted[i];
  return acc / (static_cast<double>(n) * total);
}

std::vector<float> ActivityProfile::pooled() const {
  std::vector<float> all;
  for (const auto& layer : layer_means) all.insert(all.end(), layer.begin(), layer.end());
  return all;
}

ActivityProfile activity_profile(const Network& net, const Dataset& data, int batch_size) {
  ActivityProfile profile;
  const auto& spiking = net.spiking_layers();
  std::vector<std::vector<double>> sums(spiking.size());
  for (size_t k = 0; k < spiking.size(); ++k) {
    int64_t width = 1;
    for (int d : net.layers()[static_cast<size_t>(spiking[k])].output_shape) width *= d;
    sums[k].assign(static_cast<size_t>(width), 0.0);
  }

  const int total = data.count();
  for (int start = 0; start < total; start += batch_size) {
    const int n = std::min(batch_size, total - start);
    ForwardResult fr = net.infer(data.batch_images(start, n));
    for (size_t k = 0; k < spiking.size(); ++k) {
      const Tensor& act = fr.activations[static_cast<size_t>(spiking[k])];
      const int64_t width = static_cast<int64_t>(sums[k].size());
      const float* a = act.data();
      for (int i = 0; i < n; ++i)
        for (int64_t j = 0; j < width; ++j) sums[k][static_cast<size_t>(j)] += a[i * width + j];
    }
  }

  for (auto& layer_sum : sums) {
    std::vector<float> means(layer_sum.size());
    for (size_t j = 0; j < layer_sum.size(); ++j)
      means[j] = static_cast<float>(layer_sum[j] / total);
    profile.layer_means.push_back(std::move(means));
  }
  return profile;
}

std::vector<int> dead_node_census(const ActivityProfile& profile) {
  std::vector<int> counts;
  counts.reserve(profile.layer_means.size());
  for (const auto& layer : profile.layer_means) {
    int dead = 0;
    for (float m : layer)
      if (m == 0.0f) ++dead;
    counts.push_back(dead);
  }
  return counts;
}

double network_gini(const ActivityProfile& profile) {
  const std::vector<float> all = profile.pooled();
  return gini(all);
}

} // namespace sharpnet
