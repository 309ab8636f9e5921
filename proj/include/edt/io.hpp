#pragma once

// Binary artifacts. All integers and floats are little-endian.
//
// Dataset ("EDT1"): magic, u32 factor count, per factor {u32 name length,
// name bytes, u8 kind, u32 cardinality}, u32 instance count, per instance
// {u32 value per factor, 768 f32 pixels}.
//
// Checkpoint ("EDTW"): magic, u32 version, u32 kind, u64 seed, u64 config
// digest, u32 record count, per record {u32 tag a, u32 tag b, network, Adam
// state}. A network is u32 layer count then per layer {u32 in, u32 out,
// u8 activation, in*out f32 weights row-major, out f32 biases}; the Adam
// state is u64 step count followed by first and second moments laid out like
// the parameters.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "edt/scenes.hpp"
#include "edt/training.hpp"

namespace edt::io {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointKind : std::uint32_t { Augmenters = 1, Predictor = 2 };

void write_dataset(std::ostream& out, const scenes::Dataset& data);
scenes::Dataset read_dataset(std::istream& in);

struct Provenance {
  std::uint64_t seed = 0;
  std::uint64_t config_digest = 0;
};

void write_augmenters(std::ostream& out, std::span<const training::Augmenter> augs, Provenance p);
std::vector<training::Augmenter> read_augmenters(std::istream& in, Provenance* p = nullptr);

void write_predictor(std::ostream& out, const training::TrainedPredictor& pred, Provenance p);
training::TrainedPredictor read_predictor(std::istream& in, Provenance* p = nullptr);

/// File wrappers; opening failures throw std::filesystem::filesystem_error.
void save_dataset(const std::filesystem::path& path, const scenes::Dataset& data);
scenes::Dataset load_dataset(const std::filesystem::path& path);
void save_augmenters(const std::filesystem::path& path, std::span<const training::Augmenter> augs, Provenance p);
std::vector<training::Augmenter> load_augmenters(const std::filesystem::path& path, Provenance* p = nullptr);
void save_predictor(const std::filesystem::path& path, const training::TrainedPredictor& pred, Provenance p);
training::TrainedPredictor load_predictor(const std::filesystem::path& path, Provenance* p = nullptr);

}  // namespace edt::io
