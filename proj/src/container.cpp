#include "container.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "sharpnet/error.hpp"

namespace sharpnet::detail {

namespace {

void byteswap_floats(std::vector<float>& v) {
  for (float& f : v) {
    uint32_t u;
    std::memcpy(&u, &f, 4);
    u = __builtin_bswap32(u);
    std::memcpy(&f, &u, 4);
  }
}

constexpr bool kBigEndian = std::endian::native == std::endian::big;

} // namespace

void write_container(const std::string& path, const std::string& magic,
                     nlohmann::json header, const std::vector<NamedTensor>& tensors) {
  nlohmann::json tensor_index = nlohmann::json::array();
  for (const auto& nt : tensors)
    tensor_index.push_back({{"name", nt.name}, {"shape", nt.tensor->shape()}});
  header["tensors"] = std::move(tensor_index);

  const std::string body = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << magic << '\n' << body.size() << '\n' << body;
  for (const auto& nt : tensors) {
    if (kBigEndian) {
      std::vector<float> copy = nt.tensor->values();
      byteswap_floats(copy);
      out.write(reinterpret_cast<const char*>(copy.data()),
                static_cast<std::streamsize>(copy.size() * sizeof(float)));
    } else {
      out.write(reinterpret_cast<const char*>(nt.tensor->data()),
                static_cast<std::streamsize>(nt.tensor->size() * sizeof(float)));
    }
  }
  if (!out) throw FormatError("short write to " + path);
}

const Tensor& Container::get(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw FormatError("container is missing tensor '" + name + "'");
}

Container read_container(const std::string& path, const std::string& magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != magic)
    throw FormatError(path + ": bad magic '" + line + "', expected '" + magic + "'");
  if (!std::getline(in, line)) throw FormatError(path + ": missing header length");
  size_t header_len = 0;
  try {
    header_len = std::stoul(line);
  } catch (const std::exception&) {
    throw FormatError(path + ": bad header length '" + line + "'");
  }
  std::string body(header_len, '\0');
  in.read(body.data(), static_cast<std::streamsize>(header_len));
  if (static_cast<size_t>(in.gcount()) != header_len)
    throw FormatError(path + ": truncated header");

  Container c;
  try {
    c.header = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": header is not valid JSON: " + e.what());
  }
  if (!c.header.contains("tensors") || !c.header["tensors"].is_array())
    throw FormatError(path + ": header has no tensor index");

  for (const auto& entry : c.header["tensors"]) {
    const std::string name = entry.at("name").get<std::string>();
    const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
    Tensor t(shape);
    const auto bytes = static_cast<std::streamsize>(t.size() * sizeof(float));
    in.read(reinterpret_cast<char*>(t.data()), bytes);
    if (in.gcount() != bytes)
      throw FormatError(path + ": truncated payload for tensor '" + name + "'");
    if (kBigEndian) byteswap_floats(t.values());
    c.tensors.emplace_back(name, std::move(t));
  }
  return c;
}

} // namespace sharpnet::detail
