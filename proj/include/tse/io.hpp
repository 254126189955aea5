#ifndef TSE_IO_HPP
#define TSE_IO_HPP

#include "tse/lwr.hpp"
#include "tse/mlp.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace tse {

/// Malformed or truncated binary input.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kDatasetMagic[5] = {'T', 'S', 'E', 'D', '1'};
inline constexpr char kModelMagic[5] = {'T', 'S', 'E', 'M', '1'};
inline constexpr std::uint16_t kDatasetVersion = 1;
inline constexpr std::uint16_t kModelVersion = 1;

// Dataset layout (all little-endian):
//   "TSED1" | u16 version | f64 v_f, rho_m | f64 x_min, x_max, dx, t_max, dt
//   | u32 X_m, T_n | f64 rho[i][n] for i in space nodes, n in time nodes.
// Values are node samples: rho[i][n] = rho(x_min + i dx, n dt).
std::vector<std::uint8_t> encode_dataset(const DensityField& field);
DensityField decode_dataset(const std::vector<std::uint8_t>& bytes);

// Model layout (all little-endian):
//   "TSEM1" | u16 version | u16 L | u32 layer_sizes[L] | u8 activation
//   | f64 x_offset, x_scale, t_offset, t_scale
//   | per layer: f64 weights (row-major, out x in), then f64 biases.
std::vector<std::uint8_t> encode_model(const MlpParams<double>& params);
MlpParams<double> decode_model(const std::vector<std::uint8_t>& bytes);

/// `x,t,rho` header then one node per line, 9 significant digits.
void write_field_csv(std::ostream& out, const DensityField& field);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes through a temporary and renames, so readers never see a partial file.
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);

void save_dataset(const std::filesystem::path& path, const DensityField& field);
DensityField load_dataset(const std::filesystem::path& path);
void save_model(const std::filesystem::path& path, const MlpParams<double>& params);
MlpParams<double> load_model(const std::filesystem::path& path);

/// Lowercase hex SHA-256.
std::string sha256_hex(const std::vector<std::uint8_t>& bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace tse

#endif  // TSE_IO_HPP
