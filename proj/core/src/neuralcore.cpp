#include "ipursuit/neuralcore.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ipursuit/io_util.hpp"

namespace ipursuit {

namespace {

constexpr char kCheckpointMagic[] = "IPCK1";

void write_u32le(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointContent& content) {
  nlohmann::json header;
  nlohmann::json tensors = nlohmann::json::array();
  for (const TensorEntry& t : content.tensors) {
    std::size_t count = 1;
    for (std::size_t d : t.shape) count *= d;
    if (count != t.data.size()) {
      throw ValidationError("checkpoint tensor " + t.name + " shape does not match payload");
    }
    tensors.push_back({{"name", t.name}, {"shape", t.shape}, {"dtype", "f32"}});
  }
  header["tensors"] = std::move(tensors);
  header["meta"] = content.meta_json.empty()
                       ? nlohmann::json::object()
                       : nlohmann::json::parse(content.meta_json);
  const std::string header_str = header.dump();

  atomic_write(path, [&](std::ostream& out) {
    out.write(kCheckpointMagic, 5);
    write_u32le(out, static_cast<std::uint32_t>(header_str.size()));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const TensorEntry& t : content.tensors) {
      static_assert(sizeof(float) == 4);
      out.write(reinterpret_cast<const char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
  });
}

CheckpointContent load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  char magic[5];
  in.read(magic, 5);
  if (!in || std::memcmp(magic, kCheckpointMagic, 5) != 0) {
    throw ValidationError(path + ": not an IPCK1 checkpoint");
  }
  unsigned char lenb[4];
  in.read(reinterpret_cast<char*>(lenb), 4);
  if (!in) throw ValidationError(path + ": truncated header length");
  const std::uint32_t header_len = static_cast<std::uint32_t>(lenb[0]) |
                                   (static_cast<std::uint32_t>(lenb[1]) << 8) |
                                   (static_cast<std::uint32_t>(lenb[2]) << 16) |
                                   (static_cast<std::uint32_t>(lenb[3]) << 24);
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), header_len);
  if (!in) throw ValidationError(path + ": truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_str);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": bad checkpoint header: " + e.what());
  }

  CheckpointContent content;
  content.meta_json = header.value("meta", nlohmann::json::object()).dump();
  for (const auto& tj : header.at("tensors")) {
    TensorEntry t;
    t.name = tj.at("name").get<std::string>();
    t.shape = tj.at("shape").get<std::vector<std::size_t>>();
    const std::string dtype = tj.at("dtype").get<std::string>();
    if (dtype != "f32") throw ValidationError(path + ": unsupported dtype " + dtype);
    std::size_t count = 1;
    for (std::size_t d : t.shape) count *= d;
    t.data.resize(count);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != count * sizeof(float)) {
      throw ValidationError(path + ": truncated payload for tensor " + t.name);
    }
    content.tensors.push_back(std::move(t));
  }
  return content;
}

}  // namespace ipursuit
