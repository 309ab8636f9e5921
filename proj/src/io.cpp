#include "edt/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace edt::io {

namespace {

constexpr std::array<char, 4> kDatasetMagic{'E', 'D', 'T', '1'};
constexpr std::array<char, 4> kCheckpointMagic{'E', 'D', 'T', 'W'};
constexpr std::uint32_t kTrunkTag = 0xffffffffu;
// Guards against absurd allocations when a header is corrupt.
constexpr std::uint32_t kMaxCount = 1u << 24;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) {
    unsigned char b[4];
    for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    u32(static_cast<std::uint32_t>(v));
    u32(static_cast<std::uint32_t>(v >> 32));
  }
  void f32(float f) { u32(std::bit_cast<std::uint32_t>(f)); }
  void floats(const float* p, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) f32(p[k]);
  }
  void magic(const std::array<char, 4>& m) { bytes(m.data(), 4); }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError("unexpected end of file");
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    return lo | (static_cast<std::uint64_t>(u32()) << 32);
  }
  float f32() { return std::bit_cast<float>(u32()); }
  void floats(float* p, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) p[k] = f32();
  }
  std::uint32_t count(const char* what) {
    const std::uint32_t n = u32();
    if (n > kMaxCount) throw FormatError(std::string("implausible ") + what + " count " + std::to_string(n));
    return n;
  }
  void expect_magic(const std::array<char, 4>& m, const char* what) {
    std::array<char, 4> got{};
    bytes(got.data(), 4);
    if (got != m) throw FormatError(std::string("not an ") + what + " file (bad magic)");
  }

 private:
  std::istream& in_;
};

using FMatrix = diff::Matrix<float>;
using FRow = diff::RowVector<float>;

void write_network(Writer& w, const diff::Network<float>& net) {
  w.u32(static_cast<std::uint32_t>(net.num_layers()));
  for (const auto& l : net.layers()) {
    w.u32(static_cast<std::uint32_t>(l.in_dim()));
    w.u32(static_cast<std::uint32_t>(l.out_dim()));
    w.u8(static_cast<std::uint8_t>(l.activation));
    w.floats(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    w.floats(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
}

diff::Network<float> read_network(Reader& r) {
  const std::uint32_t n = r.count("layer");
  std::vector<diff::Layer<float>> layers;
  for (std::uint32_t k = 0; k < n; ++k) {
    const std::uint32_t in = r.count("input width"), out = r.count("output width");
    const std::uint8_t act = r.u8();
    if (act > static_cast<std::uint8_t>(diff::Activation::Tanh)) throw FormatError("unknown activation code");
    diff::Layer<float> l;
    l.weight.resize(in, out);
    l.bias.resize(out);
    l.activation = static_cast<diff::Activation>(act);
    r.floats(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    r.floats(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    layers.push_back(std::move(l));
  }
  try {
    return diff::Network<float>(std::move(layers));
  } catch (const diff::ShapeError& e) {
    throw FormatError(std::string("bad network: ") + e.what());
  }
}

void write_moments(Writer& w, const diff::Gradients<float>& g, const diff::Network<float>& net) {
  if (g.weight.size() != net.num_layers()) {
    // No optimizer state recorded: write zeros of the right shape.
    const auto z = diff::Gradients<float>::zeros_like(net);
    write_moments(w, z, net);
    return;
  }
  for (std::size_t k = 0; k < g.weight.size(); ++k) {
    w.floats(g.weight[k].data(), static_cast<std::size_t>(g.weight[k].size()));
    w.floats(g.bias[k].data(), static_cast<std::size_t>(g.bias[k].size()));
  }
}

diff::Gradients<float> read_moments(Reader& r, const diff::Network<float>& net) {
  auto g = diff::Gradients<float>::zeros_like(net);
  for (std::size_t k = 0; k < g.weight.size(); ++k) {
    r.floats(g.weight[k].data(), static_cast<std::size_t>(g.weight[k].size()));
    r.floats(g.bias[k].data(), static_cast<std::size_t>(g.bias[k].size()));
  }
  return g;
}

void write_record(Writer& w, std::uint32_t a, std::uint32_t b, const diff::Network<float>& net,
                  const training::OptimizerState& opt) {
  w.u32(a);
  w.u32(b);
  write_network(w, net);
  w.u64(opt.steps);
  write_moments(w, opt.m, net);
  write_moments(w, opt.v, net);
}

struct Record {
  std::uint32_t a, b;
  diff::Network<float> net;
  training::OptimizerState opt;
};

Record read_record(Reader& r) {
  Record rec;
  rec.a = r.u32();
  rec.b = r.u32();
  rec.net = read_network(r);
  rec.opt.steps = r.u64();
  rec.opt.m = read_moments(r, rec.net);
  rec.opt.v = read_moments(r, rec.net);
  return rec;
}

void write_header(Writer& w, CheckpointKind kind, Provenance p, std::size_t records) {
  w.magic(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(kind));
  w.u64(p.seed);
  w.u64(p.config_digest);
  w.u32(static_cast<std::uint32_t>(records));
}

std::uint32_t read_header(Reader& r, CheckpointKind kind, Provenance* p) {
  r.expect_magic(kCheckpointMagic, "EDTW checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t k = r.u32();
  if (k != static_cast<std::uint32_t>(kind)) throw FormatError("checkpoint holds a different kind of model");
  Provenance prov{r.u64(), r.u64()};
  if (p) *p = prov;
  return r.count("record");
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::filesystem::filesystem_error("cannot write", path, std::make_error_code(std::errc::io_error));
  return f;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw std::filesystem::filesystem_error("cannot read", path,
                                            std::make_error_code(std::errc::no_such_file_or_directory));
  }
  return f;
}

void finish(std::ofstream& f, const std::filesystem::path& path) {
  f.flush();
  if (!f) throw std::filesystem::filesystem_error("write failed", path, std::make_error_code(std::errc::io_error));
}

}  // namespace

void write_dataset(std::ostream& out, const scenes::Dataset& data) {
  Writer w(out);
  const auto& space = data.space();
  w.magic(kDatasetMagic);
  w.u32(static_cast<std::uint32_t>(space.num_factors()));
  for (const auto& f : space.factors()) {
    w.u32(static_cast<std::uint32_t>(f.name.size()));
    w.bytes(f.name.data(), f.name.size());
    w.u8(static_cast<std::uint8_t>(f.kind));
    w.u32(f.cardinality);
  }
  w.u32(static_cast<std::uint32_t>(data.size()));
  for (std::size_t k = 0; k < data.size(); ++k) {
    for (std::uint32_t v : data.labels(k).values) w.u32(v);
    const auto img = data.image(k);
    w.floats(img.data(), img.size());
  }
}

scenes::Dataset read_dataset(std::istream& in) {
  Reader r(in);
  r.expect_magic(kDatasetMagic, "EDT1 dataset");
  const std::uint32_t nf = r.count("factor");
  std::vector<factors::FactorSpec> specs;
  for (std::uint32_t i = 0; i < nf; ++i) {
    std::string name(r.count("name length"), '\0');
    r.bytes(name.data(), name.size());
    const std::uint8_t kind = r.u8();
    if (kind > static_cast<std::uint8_t>(factors::FactorKind::Ordinal)) throw FormatError("unknown factor kind");
    const std::uint32_t card = r.count("cardinality");
    specs.push_back(factors::make_factor(std::move(name), static_cast<factors::FactorKind>(kind), card));
  }
  factors::ProductLabelSpace space(std::move(specs));
  const std::uint32_t n = r.count("instance");
  std::vector<factors::FactorTuple> labels(n);
  std::vector<float> pixels(static_cast<std::size_t>(n) * scenes::kImageSize);
  for (std::uint32_t k = 0; k < n; ++k) {
    labels[k].values.resize(nf);
    for (auto& v : labels[k].values) v = r.u32();
    if (!space.valid(labels[k])) throw FormatError("instance " + std::to_string(k) + " has an invalid label tuple");
    r.floats(pixels.data() + static_cast<std::size_t>(k) * scenes::kImageSize, scenes::kImageSize);
  }
  try {
    return scenes::Dataset(std::move(space), std::move(labels), std::move(pixels));
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
}

void write_augmenters(std::ostream& out, std::span<const training::Augmenter> augs, Provenance p) {
  Writer w(out);
  write_header(w, CheckpointKind::Augmenters, p, augs.size());
  for (const auto& a : augs) write_record(w, static_cast<std::uint32_t>(a.factor), a.element, a.net, a.opt);
}

std::vector<training::Augmenter> read_augmenters(std::istream& in, Provenance* p) {
  Reader r(in);
  const std::uint32_t n = read_header(r, CheckpointKind::Augmenters, p);
  std::vector<training::Augmenter> out;
  for (std::uint32_t k = 0; k < n; ++k) {
    Record rec = read_record(r);
    out.push_back({rec.a, rec.b, std::move(rec.net), std::move(rec.opt)});
  }
  return out;
}

void write_predictor(std::ostream& out, const training::TrainedPredictor& pred, Provenance p) {
  Writer w(out);
  const auto& m = pred.model;
  write_header(w, CheckpointKind::Predictor, p, 1 + m.heads.size());
  auto state = [&](std::size_t k) { return k < pred.opt.size() ? pred.opt[k] : training::OptimizerState{}; };
  write_record(w, kTrunkTag, 0, m.trunk, state(0));
  for (std::size_t h = 0; h < m.heads.size(); ++h)
    write_record(w, static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(m.heads[h].output_dim()), m.heads[h],
                 state(h + 1));
}

training::TrainedPredictor read_predictor(std::istream& in, Provenance* p) {
  Reader r(in);
  const std::uint32_t n = read_header(r, CheckpointKind::Predictor, p);
  if (n == 0) throw FormatError("predictor checkpoint has no trunk");
  training::TrainedPredictor out;
  Record trunk = read_record(r);
  if (trunk.a != kTrunkTag) throw FormatError("predictor checkpoint does not start with its trunk");
  out.model.trunk = std::move(trunk.net);
  out.opt.push_back(std::move(trunk.opt));
  for (std::uint32_t h = 1; h < n; ++h) {
    Record rec = read_record(r);
    if (rec.a != h - 1) throw FormatError("predictor heads are out of order");
    if (rec.net.input_dim() != out.model.trunk.output_dim()) throw FormatError("head does not fit the trunk");
    out.model.heads.push_back(std::move(rec.net));
    out.opt.push_back(std::move(rec.opt));
  }
  return out;
}

void save_dataset(const std::filesystem::path& path, const scenes::Dataset& data) {
  auto f = open_out(path);
  write_dataset(f, data);
  finish(f, path);
}

scenes::Dataset load_dataset(const std::filesystem::path& path) {
  auto f = open_in(path);
  return read_dataset(f);
}

void save_augmenters(const std::filesystem::path& path, std::span<const training::Augmenter> augs, Provenance p) {
  auto f = open_out(path);
  write_augmenters(f, augs, p);
  finish(f, path);
}

std::vector<training::Augmenter> load_augmenters(const std::filesystem::path& path, Provenance* p) {
  auto f = open_in(path);
  return read_augmenters(f, p);
}

void save_predictor(const std::filesystem::path& path, const training::TrainedPredictor& pred, Provenance p) {
  auto f = open_out(path);
  write_predictor(f, pred, p);
  finish(f, path);
}

training::TrainedPredictor load_predictor(const std::filesystem::path& path, Provenance* p) {
  auto f = open_in(path);
  return read_predictor(f, p);
}

}  // namespace edt::io
