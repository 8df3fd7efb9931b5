#include "repcap/checkpoint.hpp"

#include "repcap/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace repcap {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[] = {'R', 'E', 'P', 'C', 'A', 'P', '\x01'};
constexpr std::uint32_t kMaxDim = 1u << 24;

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    out_.write(kMagic, sizeof(kMagic));
  }
  template <class T>
  void put(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put(const Vector& v) {
    put(static_cast<std::uint64_t>(v.size()));
    out_.write(reinterpret_cast<const char*>(v.data()),
               static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  void finish() {
    out_.flush();
    if (!out_) throw Error(ErrorCode::Io, "write failed for " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw Error(ErrorCode::Io, "cannot open " + path.string());
    char magic[sizeof(kMagic)];
    in_.read(magic, sizeof(magic));
    if (!in_ || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
      throw Error(ErrorCode::Format, path.string() + " is not a repcap checkpoint");
    }
  }
  template <class T>
  T get() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) fail("truncated file");
    return v;
  }
  Vector get_vector() {
    const auto n = get<std::uint64_t>();
    if (n > (std::uint64_t{1} << 32)) fail("implausible blob size");
    Vector v(static_cast<Eigen::Index>(n));
    in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in_) fail("truncated blob");
    return v;
  }
  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) fail("trailing bytes");
  }
  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorCode::Format, path_.string() + ": " + why);
  }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

void write_header(Writer& w, CheckpointRole role) {
  w.put(kCheckpointVersion);
  w.put(static_cast<std::uint8_t>(role));
}

void read_header(Reader& r, CheckpointRole expected) {
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) r.fail("unsupported version " + std::to_string(version));
  const auto role = static_cast<CheckpointRole>(r.get<std::uint8_t>());
  if (role != expected) {
    r.fail("expected a " + std::string(to_string(expected)) + " checkpoint, found " +
           std::string(to_string(role)));
  }
}

void write_network(Writer& w, const MlpNetwork& net) {
  w.put(static_cast<std::uint32_t>(net.input_dim()));
  w.put(net.negative_slope());
  w.put(net.seed());
  w.put(static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& layer : net.layers()) {
    w.put(static_cast<std::uint32_t>(layer.weight.rows()));
    w.put(static_cast<std::uint8_t>(layer.activated));
    w.put(static_cast<std::uint8_t>(layer.residual));
    w.put(layer.dropout);
  }
  w.put(net.parameters());
}

MlpNetwork read_network(Reader& r) {
  const auto input_dim = r.get<std::uint32_t>();
  const auto slope = r.get<double>();
  const auto seed = r.get<std::uint64_t>();
  const auto n_layers = r.get<std::uint32_t>();
  if (input_dim == 0 || input_dim > kMaxDim || n_layers == 0 || n_layers > 1024) {
    r.fail("bad network header");
  }
  std::vector<DenseLayer> layers;
  std::uint32_t in = input_dim;
  for (std::uint32_t k = 0; k < n_layers; ++k) {
    DenseLayer layer;
    const auto out = r.get<std::uint32_t>();
    if (out == 0 || out > kMaxDim) r.fail("bad layer width");
    layer.activated = r.get<std::uint8_t>() != 0;
    layer.residual = r.get<std::uint8_t>() != 0;
    layer.dropout = r.get<double>();
    if (!(layer.dropout >= 0 && layer.dropout < 1)) r.fail("bad dropout rate");
    if (layer.residual && out != in) r.fail("residual layer with unequal widths");
    layer.weight = Matrix::Zero(out, in);
    layer.bias = Vector::Zero(out);
    layers.push_back(std::move(layer));
    in = out;
  }
  MlpNetwork net(std::move(layers), seed, slope);
  const Vector params = r.get_vector();
  if (params.size() != net.parameter_count()) r.fail("parameter count does not match layers");
  net.set_parameters(params);
  return net;
}

}  // namespace

std::string_view to_string(CheckpointRole r) noexcept {
  switch (r) {
    case CheckpointRole::Projector: return "projector";
    case CheckpointRole::Student: return "student";
    case CheckpointRole::Linear: return "linear";
  }
  return "unknown";
}

void save_projector(const std::filesystem::path& path, const MlpNetwork& net) {
  Writer w(path);
  write_header(w, CheckpointRole::Projector);
  write_network(w, net);
  w.finish();
}

MlpNetwork load_projector(const std::filesystem::path& path) {
  Reader r(path);
  read_header(r, CheckpointRole::Projector);
  MlpNetwork net = read_network(r);
  r.expect_end();
  return net;
}

void save_student(const std::filesystem::path& path, const StudentModel& model) {
  Writer w(path);
  write_header(w, CheckpointRole::Student);
  write_network(w, model.net.trunk);
  write_network(w, model.net.mu_head);
  write_network(w, model.net.logvar_head);
  w.put(model.mu_g);
  w.put(model.l_g);
  w.finish();
}

StudentModel load_student(const std::filesystem::path& path) {
  Reader r(path);
  read_header(r, CheckpointRole::Student);
  StudentModel model;
  model.net.trunk = read_network(r);
  model.net.mu_head = read_network(r);
  model.net.logvar_head = read_network(r);
  model.mu_g = r.get_vector();
  model.l_g = r.get_vector();
  r.expect_end();
  const auto& net = model.net;
  if (net.mu_head.input_dim() != net.trunk.output_dim() ||
      net.logvar_head.input_dim() != net.trunk.output_dim() ||
      net.mu_head.output_dim() != net.logvar_head.output_dim() ||
      model.mu_g.size() != net.mu_head.output_dim() || model.l_g.size() != model.mu_g.size()) {
    r.fail("student heads do not match the trunk");
  }
  return model;
}

void save_linear(const std::filesystem::path& path, const LinearProjector& pca) {
  Writer w(path);
  write_header(w, CheckpointRole::Linear);
  w.put(static_cast<std::uint32_t>(pca.input_dim()));
  w.put(static_cast<std::uint32_t>(pca.output_dim()));
  w.put(Vector(Eigen::Map<const Vector>(pca.components.data(), pca.components.size())));
  w.put(pca.mean);
  w.put(pca.variances);
  w.finish();
}

LinearProjector load_linear(const std::filesystem::path& path) {
  Reader r(path);
  read_header(r, CheckpointRole::Linear);
  const auto p = r.get<std::uint32_t>();
  const auto m = r.get<std::uint32_t>();
  LinearProjector pca;
  const Vector flat = r.get_vector();
  pca.mean = r.get_vector();
  pca.variances = r.get_vector();
  r.expect_end();
  if (flat.size() != static_cast<Eigen::Index>(p) * m || pca.mean.size() != p ||
      pca.variances.size() != m) {
    r.fail("linear projector blobs do not match header");
  }
  pca.components = Eigen::Map<const Matrix>(flat.data(), p, m);
  return pca;
}

CheckpointRole checkpoint_role(const std::filesystem::path& path) {
  Reader r(path);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) r.fail("unsupported version " + std::to_string(version));
  const auto role = r.get<std::uint8_t>();
  if (role < 1 || role > 3) r.fail("unknown role");
  return static_cast<CheckpointRole>(role);
}

}  // namespace repcap
