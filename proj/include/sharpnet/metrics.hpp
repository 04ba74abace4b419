#pragma once

#include <span>
#include <vector>

#include "sharpnet/tensor.hpp"

namespace sharpnet {

class Network;
struct Dataset;

/// Gini coefficient of a non-negative vector: the mean absolute difference
/// between all pairs, normalized by twice the mean. 0 means perfectly even,
/// values approaching 1 mean a few entries hold everything. Computed with
/// the O(n log n) sorted-rank identity.
double gini(std::span<const float> values);

/// Mean post-activation value of every spiking neuron over a dataset,
/// grouped by spiking layer (bottom-up order).
struct ActivityProfile {
  std::vector<std::vector<float>> layer_means;
  int epoch_tag = -1;

  std::vector<float> pooled() const;
};

ActivityProfile activity_profile(const Network& net, const Dataset& data,
                                 int batch_size = 256);

/// Per-layer counts of neurons whose mean activation is exactly zero.
std::vector<int> dead_node_census(const ActivityProfile& profile);

/// Gini of all spiking neurons pooled across layers.
double network_gini(const ActivityProfile& profile);

} // namespace sharpnet
