#include <cstring>
#include <fstream>

#include "ssda/model.hpp"

namespace ssda {

namespace {

constexpr char kMagic[4] = {'S', 'S', 'C', 'K'};
constexpr uint8_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  os.write(buf, sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* what) {
  char buf[sizeof(T)];
  is.read(buf, sizeof(T));
  if (!is) throw std::runtime_error(std::string("checkpoint truncated while reading ") + what);
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

void put_str(std::ostream& os, const std::string& s) {
  put<uint32_t>(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_str(std::istream& is, const char* what) {
  uint32_t n = get<uint32_t>(is, what);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw std::runtime_error(std::string("checkpoint truncated while reading ") + what);
  return s;
}

}  // namespace

void save_checkpoint(const ParamStore<float>& ps, const RunConfig& cfg, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  f.write(kMagic, 4);
  put<uint8_t>(f, kVersion);
  put_str(f, config_to_text(cfg));
  put<uint32_t>(f, static_cast<uint32_t>(ps.names().size()));
  for (const auto& name : ps.names()) {
    const auto& t = ps.value(name);
    put_str(f, name);
    put<uint8_t>(f, ps.trainable(name) ? 1 : 0);
    put<uint32_t>(f, static_cast<uint32_t>(t.shape.size()));
    for (long d : t.shape) put<uint32_t>(f, static_cast<uint32_t>(d));
    for (float v : t.data) put<float>(f, v);
  }
  if (!f) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

std::pair<ParamStore<float>, RunConfig> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
  uint8_t version = get<uint8_t>(f, "version");
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  RunConfig cfg = parse_config_text(get_str(f, "config"));

  ParamStore<float> ps;
  uint32_t count = get<uint32_t>(f, "param count");
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = get_str(f, "param name");
    bool trainable = get<uint8_t>(f, "trainable flag") != 0;
    uint32_t nd = get<uint32_t>(f, "ndim");
    std::vector<long> shape;
    for (uint32_t d = 0; d < nd; ++d) shape.push_back(static_cast<long>(get<uint32_t>(f, "dim")));
    Tensor<float> t(shape);
    for (long j = 0; j < t.numel(); ++j) t[j] = get<float>(f, "param data");
    ps.add(name, std::move(t), trainable);
  }

  // Shape audit against the architecture the embedded config describes: a
  // checkpoint that cannot rebuild its own model must fail loudly.
  ParamStore<float> skeleton = init_params<float>(cfg.model, 0);
  if (skeleton.names() != ps.names())
    throw std::runtime_error("checkpoint: parameter set does not match the embedded config");
  for (const auto& name : ps.names()) {
    if (ps.value(name).shape != skeleton.value(name).shape)
      throw std::runtime_error("checkpoint: shape mismatch for '" + name + "' (got " +
                               ps.value(name).shape_str() + ", config implies " +
                               skeleton.value(name).shape_str() + ")");
    if (ps.trainable(name) != skeleton.trainable(name))
      throw std::runtime_error("checkpoint: trainable flag mismatch for '" + name + "'");
  }
  return {std::move(ps), std::move(cfg)};
}

}  // namespace ssda
