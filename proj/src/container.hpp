#pragma once

// Shared on-disk container: ASCII magic line, JSON header, then raw
// little-endian float32 payloads in header-declared order.

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sharpnet/tensor.hpp"

namespace sharpnet::detail {

struct NamedTensor {
  std::string name;
  const Tensor* tensor;
};

void write_container(const std::string& path, const std::string& magic,
                     nlohmann::json header, const std::vector<NamedTensor>& tensors);

struct Container {
  nlohmann::json header;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& get(const std::string& name) const;
};

Container read_container(const std::string& path, const std::string& magic);

} // namespace sharpnet::detail
