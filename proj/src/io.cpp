#include "tse/io.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace tse {

namespace {

class ByteWriter {
 public:
  void raw(const char* data, std::size_t n) { bytes_.insert(bytes_.end(), data, data + n); }

  template <typename T>
  void little(T value) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                    std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                                                       std::uint8_t>>>;
    auto bits = std::bit_cast<U>(value);
    for (std::size_t k = 0; k < sizeof(T); ++k) {
      bytes_.push_back(static_cast<std::uint8_t>(bits & 0xFFu));
      if constexpr (sizeof(T) > 1) bits = static_cast<U>(bits >> 8);
    }
  }

  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, std::string what)
      : bytes_(bytes), what_(std::move(what)) {}

  void expect_magic(const char (&magic)[5]) {
    need(5, "magic");
    if (std::memcmp(bytes_.data(), magic, 5) != 0) {
      throw FormatError(what_ + ": bad magic, expected \"" + std::string(magic, 5) + "\"");
    }
    at_ = 5;
  }

  template <typename T>
  T little(const char* field) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                    std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                                                       std::uint8_t>>>;
    need(sizeof(T), field);
    U bits = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k) {
      bits = static_cast<U>(bits | (static_cast<U>(bytes_[at_ + k]) << (8 * k)));
    }
    at_ += sizeof(T);
    return std::bit_cast<T>(bits);
  }

  std::size_t offset() const { return at_; }
  std::size_t size() const { return bytes_.size(); }

  void expect_end() const {
    if (at_ != bytes_.size()) {
      throw FormatError(what_ + ": " + std::to_string(bytes_.size() - at_) +
                        " trailing bytes after offset " + std::to_string(at_));
    }
  }

 private:
  void need(std::size_t n, const char* field) const {
    if (at_ + n > bytes_.size()) {
      std::ostringstream msg;
      msg << what_ << ": truncated while reading " << field << ", missing bytes ["
          << bytes_.size() << ", " << at_ + n << ") of " << bytes_.size() << "-byte input";
      throw FormatError(msg.str());
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::string what_;
  std::size_t at_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_dataset(const DensityField& field) {
  ByteWriter w;
  w.raw(kDatasetMagic, 5);
  w.little<std::uint16_t>(kDatasetVersion);
  w.little(field.env.free_flow_speed);
  w.little(field.env.jam_density);
  const Grid& g = field.grid;
  for (double v : {g.x_min(), g.x_max(), g.dx(), g.t_max(), g.dt()}) w.little(v);
  w.little(static_cast<std::uint32_t>(g.space_nodes()));
  w.little(static_cast<std::uint32_t>(g.time_nodes()));
  for (Eigen::Index i = 0; i < g.space_nodes(); ++i) {
    for (Eigen::Index n = 0; n < g.time_nodes(); ++n) w.little(field.rho(i, n));
  }
  return w.take();
}

DensityField decode_dataset(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes, "dataset");
  r.expect_magic(kDatasetMagic);
  const auto version = r.little<std::uint16_t>("version");
  if (version != kDatasetVersion) {
    throw FormatError("dataset: unsupported version " + std::to_string(version));
  }
  const double v_f = r.little<double>("v_f");
  const double rho_m = r.little<double>("rho_m");
  double g[5];
  const char* names[5] = {"x_min", "x_max", "dx", "t_max", "dt"};
  for (int k = 0; k < 5; ++k) g[k] = r.little<double>(names[k]);
  const auto nx = r.little<std::uint32_t>("X_m");
  const auto nt = r.little<std::uint32_t>("T_n");
  try {
    Environment env(v_f, rho_m);
    Grid grid(g[0], g[1], g[2], g[3], g[4]);
    if (grid.space_nodes() != nx || grid.time_nodes() != nt) {
      throw FormatError("dataset: node counts " + std::to_string(nx) + "x" + std::to_string(nt) +
                        " disagree with grid");
    }
    const std::size_t payload = std::size_t{nx} * nt * sizeof(double);
    if (r.size() - r.offset() < payload) {
      std::ostringstream msg;
      msg << "dataset: truncated density values, missing bytes [" << r.size() << ", "
          << r.offset() + payload << ")";
      throw FormatError(msg.str());
    }
    Eigen::MatrixXd rho(nx, nt);
    for (Eigen::Index i = 0; i < rho.rows(); ++i) {
      for (Eigen::Index n = 0; n < rho.cols(); ++n) rho(i, n) = r.little<double>("density values");
    }
    r.expect_end();
    return DensityField(grid, env, std::move(rho));
  } catch (const DomainError& e) {
    throw FormatError(std::string("dataset: invalid header: ") + e.what());
  }
}

std::vector<std::uint8_t> encode_model(const MlpParams<double>& p) {
  ByteWriter w;
  w.raw(kModelMagic, 5);
  w.little<std::uint16_t>(kModelVersion);
  w.little(static_cast<std::uint16_t>(p.layer_sizes.size()));
  for (int s : p.layer_sizes) w.little(static_cast<std::uint32_t>(s));
  w.little(static_cast<std::uint8_t>(p.activation));
  w.little(p.normalization.x_offset);
  w.little(p.normalization.x_scale);
  w.little(p.normalization.t_offset);
  w.little(p.normalization.t_scale);
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    const auto& m = p.weights[l];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) w.little(m(r, c));
    }
    for (Eigen::Index r = 0; r < p.biases[l].size(); ++r) w.little(p.biases[l](r));
  }
  return w.take();
}

MlpParams<double> decode_model(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes, "model");
  r.expect_magic(kModelMagic);
  const auto version = r.little<std::uint16_t>("version");
  if (version != kModelVersion) {
    throw FormatError("model: unsupported version " + std::to_string(version));
  }
  const auto count = r.little<std::uint16_t>("layer count");
  if (count < 2) throw FormatError("model: fewer than two layers");
  MlpParams<double> p;
  for (std::uint16_t k = 0; k < count; ++k) {
    const auto s = r.little<std::uint32_t>("layer sizes");
    if (s == 0 || s > (1u << 20)) throw FormatError("model: implausible layer width");
    p.layer_sizes.push_back(static_cast<int>(s));
  }
  if (p.layer_sizes.front() != 2 || p.layer_sizes.back() != 1) {
    throw FormatError("model: network must map 2 inputs to 1 output");
  }
  const auto tag = r.little<std::uint8_t>("activation");
  if (tag != static_cast<std::uint8_t>(Activation::kTanh)) {
    throw FormatError("model: unknown activation tag " + std::to_string(tag));
  }
  p.activation = Activation::kTanh;
  p.normalization.x_offset = r.little<double>("normalization");
  p.normalization.x_scale = r.little<double>("normalization");
  p.normalization.t_offset = r.little<double>("normalization");
  p.normalization.t_scale = r.little<double>("normalization");
  for (std::size_t l = 0; l + 1 < p.layer_sizes.size(); ++l) {
    MlpParams<double>::Matrix w(p.layer_sizes[l + 1], p.layer_sizes[l]);
    for (Eigen::Index row = 0; row < w.rows(); ++row) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(row, c) = r.little<double>("weights");
    }
    MlpParams<double>::Vector b(p.layer_sizes[l + 1]);
    for (Eigen::Index k = 0; k < b.size(); ++k) b(k) = r.little<double>("biases");
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  r.expect_end();
  if (!p.all_finite()) throw FormatError("model: non-finite parameter");
  return p;
}

void write_field_csv(std::ostream& out, const DensityField& field) {
  out << "x,t,rho\n" << std::setprecision(9);
  const Grid& g = field.grid;
  for (Eigen::Index i = 0; i < g.space_nodes(); ++i) {
    for (Eigen::Index n = 0; n < g.time_nodes(); ++n) {
      out << g.x(i) << ',' << g.t(n) << ',' << field.rho(i, n) << '\n';
    }
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

void save_dataset(const std::filesystem::path& path, const DensityField& field) {
  write_file(path, encode_dataset(field));
}

DensityField load_dataset(const std::filesystem::path& path) {
  try {
    return decode_dataset(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_model(const std::filesystem::path& path, const MlpParams<double>& params) {
  write_file(path, encode_model(params));
}

MlpParams<double> load_model(const std::filesystem::path& path) {
  try {
    return decode_model(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::ostringstream hex;
  hex << std::hex << std::setfill('0');
  for (unsigned int k = 0; k < length; ++k) hex << std::setw(2) << static_cast<int>(digest[k]);
  return hex.str();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

}  // namespace tse
