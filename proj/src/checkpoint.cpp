#include "lucie/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace lucie {

namespace {

constexpr char kMagic[4] = {'L', 'U', 'C', 'K'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put<uint16_t>(os, static_cast<uint16_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
  uint16_t len = get<uint16_t>(is);
  std::string s(len, '\0');
  is.read(s.data(), len);
  if (!is) throw std::runtime_error("checkpoint: truncated string");
  return s;
}

}  // namespace

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  os.write(kMagic, 4);
  put<uint32_t>(os, kCheckpointVersion);
  const auto& c = ckpt.params.config;
  for (int v : {c.num_blocks, c.latent_dim, c.encoder_layers, c.decoder_layers,
                c.truncation, c.in_channels, c.out_channels})
    put<int32_t>(os, v);
  put<int32_t>(os, ckpt.nlat);
  put<int32_t>(os, ckpt.nlon);
  put<uint32_t>(os, static_cast<uint32_t>(ckpt.sigma_levels.size()));
  for (double s : ckpt.sigma_levels) put<double>(os, s);

  put<int32_t>(os, ckpt.layout.nlevels);
  put<uint8_t>(os, ckpt.layout.with_sst ? 1 : 0);
  put<uint32_t>(os, static_cast<uint32_t>(ckpt.layout.inputs.size()));
  for (const auto& s : ckpt.layout.inputs) put_string(os, s);
  put<uint32_t>(os, static_cast<uint32_t>(ckpt.layout.outputs.size()));
  for (const auto& s : ckpt.layout.outputs) put_string(os, s);

  put<uint32_t>(os, static_cast<uint32_t>(ckpt.stats.channels.size()));
  for (const auto& [key, cs] : ckpt.stats.channels) {
    put_string(os, key);
    put<double>(os, cs.mean);
    put<double>(os, cs.std);
    put<double>(os, cs.tend_mean);
    put<double>(os, cs.tend_std);
    put<uint8_t>(os, cs.degenerate ? 1 : 0);
    put<uint8_t>(os, cs.tend_degenerate ? 1 : 0);
  }

  put<uint32_t>(os, static_cast<uint32_t>(ckpt.params.tensors.size()));
  for (const auto& t : ckpt.params.tensors) {
    put_string(os, t.name);
    put<uint32_t>(os, static_cast<uint32_t>(t.shape.size()));
    for (int d : t.shape) put<int32_t>(os, d);
    put<uint64_t>(os, t.values.size());
    os.write(reinterpret_cast<const char*>(t.values.data()),
             static_cast<std::streamsize>(t.values.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  uint32_t version = get<uint32_t>(is);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ckpt;
  auto& c = ckpt.params.config;
  c.num_blocks = get<int32_t>(is);
  c.latent_dim = get<int32_t>(is);
  c.encoder_layers = get<int32_t>(is);
  c.decoder_layers = get<int32_t>(is);
  c.truncation = get<int32_t>(is);
  c.in_channels = get<int32_t>(is);
  c.out_channels = get<int32_t>(is);
  ckpt.nlat = get<int32_t>(is);
  ckpt.nlon = get<int32_t>(is);
  uint32_t nsig = get<uint32_t>(is);
  ckpt.sigma_levels.resize(nsig);
  for (auto& s : ckpt.sigma_levels) s = get<double>(is);

  ckpt.layout.nlevels = get<int32_t>(is);
  ckpt.layout.with_sst = get<uint8_t>(is) != 0;
  uint32_t nin = get<uint32_t>(is);
  for (uint32_t i = 0; i < nin; ++i) ckpt.layout.inputs.push_back(get_string(is));
  uint32_t nout = get<uint32_t>(is);
  for (uint32_t i = 0; i < nout; ++i) ckpt.layout.outputs.push_back(get_string(is));

  uint32_t nstats = get<uint32_t>(is);
  for (uint32_t i = 0; i < nstats; ++i) {
    std::string key = get_string(is);
    ChannelStats cs;
    cs.mean = get<double>(is);
    cs.std = get<double>(is);
    cs.tend_mean = get<double>(is);
    cs.tend_std = get<double>(is);
    cs.degenerate = get<uint8_t>(is) != 0;
    cs.tend_degenerate = get<uint8_t>(is) != 0;
    ckpt.stats.channels[key] = cs;
  }

  uint32_t ntensors = get<uint32_t>(is);
  for (uint32_t i = 0; i < ntensors; ++i) {
    ParamTensor t;
    t.name = get_string(is);
    uint32_t nd = get<uint32_t>(is);
    t.shape.resize(nd);
    for (auto& d : t.shape) d = get<int32_t>(is);
    uint64_t n = get<uint64_t>(is);
    t.values.resize(n);
    is.read(reinterpret_cast<char*>(t.values.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated tensor " + t.name);
    ckpt.params.tensors.push_back(std::move(t));
  }
  return ckpt;
}

}  // namespace lucie
