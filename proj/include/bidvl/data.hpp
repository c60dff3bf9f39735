#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bidvl/autodiff.hpp"
#include "bidvl/config.hpp"
#include "bidvl/rng.hpp"
#include "bidvl/tensor.hpp"

namespace bidvl {

struct DatasetSpec {
    std::string kind = "eight_gaussians";
    std::size_t n = 8192;
    std::uint64_t seed = 0;
    std::string path;  // idx_images only
};

// Samples confined to [-1,1]^{d_v}; 2-D synthetic families plus IDX rasters.
Tensor make_dataset(const DatasetSpec& spec);

// Centers of the eight_gaussians mixture, for mode-coverage scoring.
std::vector<std::pair<double, double>> eight_gaussian_centers();

// IDX raster file (magic 0x00000803), pixels mapped to x/127.5 - 1.
Tensor load_idx_images(const std::string& path);

// Epoch-wise shuffled minibatches; the final partial batch is dropped.
class BatchIterator {
public:
    BatchIterator(const Tensor& samples, std::size_t batch, std::uint64_t seed);

    Tensor next();
    std::size_t batches_per_epoch() const { return n_ / batch_; }

private:
    void reshuffle();

    const Tensor& samples_;
    std::size_t n_;
    std::size_t batch_;
    std::size_t cursor_ = 0;
    std::vector<std::size_t> order_;
    Rng rng_;
};

// Checkpoint container: "BDVL" magic, version, iteration, named parameter
// blobs, trailing CRC32. Round-trip is bitwise exact.
constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const std::vector<Param*>& params,
                     std::uint64_t iteration);
std::uint64_t load_checkpoint(const std::string& path, const std::vector<Param*>& params);

TrainConfig parse_config(const std::string& text);
TrainConfig load_config_file(const std::string& path);

// One `key = value` override, validated with the same rules as parse_config.
void apply_override(TrainConfig& cfg, const std::string& key_equals_value);

std::uint32_t crc32(const std::uint8_t* data, std::size_t len);

}  // namespace bidvl
