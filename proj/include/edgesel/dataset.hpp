#pragma once

// Dataset archive: a one-line text header followed by little-endian float32
// sample blocks.
//
//   line 1  "EDGESEL-DATASET"
//   line 2  JSON header: version, K, C, sample_rate, window_duration,
//           n_windows, seed, world, profiles, labels, blocks[{name, device,
//           offset, count}]
//   rest    blocks, each channel-major: channel 0 for every window, then
//           channel 1, ...; offsets are relative to the start of this region

#include "edgesel/synthworld.hpp"

#include <filesystem>
#include <map>
#include <vector>

namespace edgesel {

inline constexpr int kDatasetVersion = 1;

struct Dataset {
  WorldConfig world;
  std::uint64_t seed = 0;
  std::vector<DeviceProfile> profiles;
  std::vector<int> labels;
  /// Clean latent signal, channel-major.
  std::vector<float> latent;
  /// Observed samples per device, channel-major.
  std::map<DeviceId, std::vector<float>> devices;

  std::size_t num_windows() const { return labels.size(); }
  std::size_t samples_per_window() const { return world.samples_per_window(); }
  bool operator==(const Dataset&) const = default;
};

Dataset make_dataset(const LatentTrace& trace,
                     std::span<const DeviceProfile> profiles);

void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

/// Materializes observations of every profile and writes the archive.
void export_dataset(const LatentTrace& trace,
                    std::span<const DeviceProfile> profiles,
                    const std::filesystem::path& path);
Dataset import_dataset(const std::filesystem::path& path);

/// Windows of one dataset block, rebuilt as SensorWindows.
class DatasetSource final : public SensorSource {
 public:
  explicit DatasetSource(Dataset dataset);

  SensorWindow window(DeviceId device, std::size_t index) const override;
  std::size_t num_windows() const override { return dataset_.num_windows(); }
  double window_duration() const override { return dataset_.world.window_duration; }
  int true_label(std::size_t index) const override { return dataset_.labels.at(index); }
  int num_classes() const override { return dataset_.world.num_classes; }

  const Dataset& dataset() const { return dataset_; }
  std::vector<SensorWindow> windows(DeviceId device, std::size_t first,
                                    std::size_t count) const;

 private:
  Dataset dataset_;
};

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace edgesel
