#pragma once

// Binary checkpoint format (all integers little-endian):
//   "SRRU" | u16 version | u32 config length | config text (UTF-8 key = value)
//   then tensor records until EOF:
//   u32 name length | name bytes | u32 rank | rank x u32 dims | f32 values

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "srru/config.hpp"
#include "srru/image_io.hpp"
#include "srru/model.hpp"
#include "srru/train.hpp"

namespace srru {

inline constexpr char kCheckpointMagic[4] = {'S', 'R', 'R', 'U'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
  TrainingConfig config;
  NetworkParams<float> params;
  OptimizerState<float> optimizer;
  std::size_t epoch = 0;  // number of completed epochs
};

/// A named tensor as stored on disk.
struct TensorRecord {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

namespace detail {

inline void put_u16(std::ostream& os, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>(v >> 8)};
  os.write(b, 2);
}
inline void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                     static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(b, 4);
}
inline bool get_bytes(std::istream& is, void* dst, std::size_t n) {
  is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(is.gcount()) == n;
}
inline std::uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  if (!get_bytes(is, b, 2)) throw IoError("checkpoint truncated");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}
inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!get_bytes(is, b, 4)) throw IoError("checkpoint truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_record(std::ostream& os, const std::string& name,
                         const std::vector<std::uint32_t>& dims, std::span<const float> values) {
  put_u32(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u32(os, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) put_u32(os, d);
  for (float v : values) put_u32(os, std::bit_cast<std::uint32_t>(v));
}

template <typename Net, typename Fn>
void for_each_tensor(Net& net, const std::string& prefix, Fn&& fn) {
  for_each_conv(net, [&](const std::string& name, auto& c) {
    const auto& s = c.weights.shape();
    fn(prefix + name + ".weight",
       std::vector<std::uint32_t>{static_cast<std::uint32_t>(s.batch),
                                  static_cast<std::uint32_t>(s.channels),
                                  static_cast<std::uint32_t>(s.height),
                                  static_cast<std::uint32_t>(s.width)},
       c.weights.data());
    fn(prefix + name + ".bias",
       std::vector<std::uint32_t>{static_cast<std::uint32_t>(c.bias.size())},
       std::span(c.bias));
  });
}

}  // namespace detail

/// Config text stored in a checkpoint: the training config followed by
/// resume bookkeeping keys.
inline std::string checkpoint_header_text(const Checkpoint& ck) {
  std::ostringstream os;
  os << config_to_text(ck.config);
  os << "epoch = " << ck.epoch << "\n";
  os << "optimizer_step = " << ck.optimizer.step << "\n";
  os << "optimizer_lr = " << detail::format_double(ck.optimizer.learning_rate) << "\n";
  return os.str();
}

inline void save_checkpoint(std::ostream& os, const Checkpoint& ck) {
  os.write(kCheckpointMagic, 4);
  detail::put_u16(os, kCheckpointVersion);
  const std::string text = checkpoint_header_text(ck);
  detail::put_u32(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  auto emit = [&](const std::string& name, const std::vector<std::uint32_t>& dims, auto values) {
    detail::write_record(os, name, dims, values);
  };
  detail::for_each_tensor(ck.params, "", emit);
  detail::for_each_tensor(ck.optimizer.velocity, "optimizer.velocity.", emit);
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
    save_checkpoint(out, ck);
    if (!out) throw IoError("write failed for checkpoint '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::vector<TensorRecord> read_tensor_records(std::istream& is) {
  std::vector<TensorRecord> out;
  while (is.peek() != std::char_traits<char>::eof()) {
    TensorRecord r;
    const std::uint32_t name_len = detail::get_u32(is);
    r.name.resize(name_len);
    if (!detail::get_bytes(is, r.name.data(), name_len)) throw IoError("checkpoint truncated");
    const std::uint32_t rank = detail::get_u32(is);
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      r.dims.push_back(detail::get_u32(is));
      count *= r.dims.back();
    }
    r.values.resize(count);
    for (auto& v : r.values) v = std::bit_cast<float>(detail::get_u32(is));
    out.push_back(std::move(r));
  }
  return out;
}

inline Checkpoint load_checkpoint(std::istream& is) {
  char magic[4];
  if (!detail::get_bytes(is, magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw IoError("not a checkpoint (bad magic)");
  }
  const std::uint16_t version = detail::get_u16(is);
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t text_len = detail::get_u32(is);
  std::string text(text_len, '\0');
  if (!detail::get_bytes(is, text.data(), text_len)) throw IoError("checkpoint truncated");

  Checkpoint ck;
  std::istringstream ts(text);
  std::string line, config_text;
  while (std::getline(ts, line)) {
    const auto eq = line.find('=');
    const std::string key = eq == std::string::npos ? "" : detail::trim(line.substr(0, eq));
    const std::string val = eq == std::string::npos ? "" : detail::trim(line.substr(eq + 1));
    if (key == "epoch") {
      ck.epoch = detail::parse_number<std::size_t>(key, val);
    } else if (key == "optimizer_step") {
      ck.optimizer.step = detail::parse_number<std::size_t>(key, val);
    } else if (key == "optimizer_lr") {
      ck.optimizer.learning_rate = detail::parse_number<double>(key, val);
    } else {
      config_text += line + "\n";
    }
  }
  ck.config = parse_config_text(config_text);
  ck.params = make_network<float>(ck.config.arch(), 0);
  ck.optimizer.velocity = zeros_like(ck.params);

  std::map<std::string, TensorRecord> records;
  for (auto& r : read_tensor_records(is)) records.emplace(r.name, std::move(r));
  auto fill = [&](const std::string& name, const std::vector<std::uint32_t>& dims, auto values) {
    auto it = records.find(name);
    if (it == records.end()) throw IoError("checkpoint is missing tensor '" + name + "'");
    if (it->second.dims != dims) throw IoError("checkpoint tensor '" + name + "' has wrong dims");
    std::copy(it->second.values.begin(), it->second.values.end(), values.begin());
    records.erase(it);
  };
  detail::for_each_tensor(ck.params, "", fill);
  detail::for_each_tensor(ck.optimizer.velocity, "optimizer.velocity.", fill);
  if (!records.empty()) throw IoError("checkpoint has unexpected tensor '" + records.begin()->first + "'");
  return ck;
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  return load_checkpoint(in);
}

}  // namespace srru
