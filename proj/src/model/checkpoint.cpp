#include "clot/model/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace clot::model {
namespace {

constexpr char kMagic[8] = {'C', 'L', 'O', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

void put_tensor(std::string& out, const std::string& name, const DenseMatrix& t) {
  if (name.size() > 0xFFFF) throw FormatError("checkpoint: tensor name too long");
  put_u16(out, static_cast<std::uint16_t>(name.size()));
  out.append(name);
  put_u32(out, static_cast<std::uint32_t>(t.rows));
  put_u32(out, static_cast<std::uint32_t>(t.cols));
  for (double v : t.data) put_f64(out, v);
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) {
    if (pos + n > buf.size())
      throw FormatError(std::string("checkpoint: truncated ") + what + " at byte offset " +
                        std::to_string(pos) + " (need " + std::to_string(n) + ", have " +
                        std::to_string(buf.size() - pos) + ")");
  }
  std::uint16_t u16() {
    need(2, "u16");
    const auto v = static_cast<std::uint16_t>(
        (static_cast<unsigned char>(buf[pos])) |
        (static_cast<unsigned char>(buf[pos + 1]) << 8));
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + b])) << (8 * b);
    pos += 4;
    return v;
  }
  double f64() {
    need(8, "f64");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + b])) << (8 * b);
    pos += 8;
    return std::bit_cast<double>(bits);
  }
};

}  // namespace

void write_checkpoint(const std::string& path, const ModelParams& params,
                      const std::map<std::string, DenseMatrix>& extras) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);

  const ModelConfig& cfg = params.cfg;
  DenseMatrix meta(1, 9);
  meta.data = {static_cast<double>(cfg.input_dim), static_cast<double>(cfg.hidden_dim),
               static_cast<double>(cfg.embed_dim), static_cast<double>(cfg.dec_dim),
               static_cast<double>(cfg.k_actions), static_cast<double>(cfg.k_queries),
               static_cast<double>(cfg.layers),    static_cast<double>(cfg.heads),
               cfg.tau};
  put_tensor(out, "__meta__", meta);
  params.for_each_tensor(
      [&](const std::string& name, const DenseMatrix& t) { put_tensor(out, name, t); });
  for (const auto& [name, t] : extras) put_tensor(out, name, t);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("checkpoint: cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw InputError("checkpoint: write failed: " + path);
}

LoadedCheckpoint read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("checkpoint: cannot open: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r{buf};
  r.need(sizeof(kMagic), "magic");
  if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw FormatError("checkpoint: bad magic at byte offset 0");
  r.pos = sizeof(kMagic);
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));

  std::map<std::string, DenseMatrix> tensors;
  while (r.pos < buf.size()) {
    const std::uint16_t len = r.u16();
    r.need(len, "tensor name");
    std::string name = buf.substr(r.pos, len);
    r.pos += len;
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    DenseMatrix t(rows, cols);
    for (std::size_t i = 0; i < t.size(); ++i) t.data[i] = r.f64();
    tensors.emplace(std::move(name), std::move(t));
  }

  const auto meta_it = tensors.find("__meta__");
  if (meta_it == tensors.end() || meta_it->second.size() != 9)
    throw FormatError("checkpoint: missing or malformed __meta__ tensor");
  const auto& meta = meta_it->second.data;
  ModelConfig cfg;
  cfg.input_dim = static_cast<std::size_t>(meta[0]);
  cfg.hidden_dim = static_cast<std::size_t>(meta[1]);
  cfg.embed_dim = static_cast<std::size_t>(meta[2]);
  cfg.dec_dim = static_cast<std::size_t>(meta[3]);
  cfg.k_actions = static_cast<std::size_t>(meta[4]);
  cfg.k_queries = static_cast<std::size_t>(meta[5]);
  cfg.layers = static_cast<std::size_t>(meta[6]);
  cfg.heads = static_cast<std::size_t>(meta[7]);
  cfg.tau = meta[8];
  tensors.erase(meta_it);

  LoadedCheckpoint loaded;
  Rng scratch_rng(0);
  loaded.params = ModelParams::init(cfg, scratch_rng);
  loaded.params.for_each_tensor([&](const std::string& name, DenseMatrix& t) {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("checkpoint: missing tensor " + name);
    if (it->second.rows != t.rows || it->second.cols != t.cols)
      throw FormatError("checkpoint: tensor " + name + " has unexpected shape");
    t = std::move(it->second);
    tensors.erase(it);
  });
  loaded.extras = std::move(tensors);
  return loaded;
}

}  // namespace clot::model
