#include "tse/mlp.hpp"

namespace tse {

std::vector<int> hidden_architecture(int depth, int width) {
  if (depth < 0 || width <= 0) throw std::invalid_argument("invalid hidden architecture");
  std::vector<int> sizes{2};
  sizes.insert(sizes.end(), static_cast<std::size_t>(depth), width);
  sizes.push_back(1);
  return sizes;
}

template MlpParams<double> init_params<double>(const std::vector<int>&, std::uint64_t);

}  // namespace tse
