#include "edgesel/dataset.hpp"

#include "json_support.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace edgesel {
namespace {

constexpr std::string_view kMagic = "EDGESEL-DATASET";

void append_floats(std::string& out, const std::vector<float>& values) {
  const std::size_t start = out.size();
  out.resize(start + values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) {
      out[start + i * 4 + static_cast<std::size_t>(b)] =
          static_cast<char>((bits >> (8 * b)) & 0xffu);
    }
  }
}

std::vector<float> decode_floats(std::string_view bytes) {
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(
                  static_cast<unsigned char>(bytes[i * 4 + static_cast<std::size_t>(b)]))
              << (8 * b);
    }
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

// Channel-major flattening of a sequence of C x L blocks.
template <typename BlockFn>
std::vector<float> flatten(std::size_t n_windows, int channels, std::size_t length,
                           BlockFn block) {
  std::vector<float> out(static_cast<std::size_t>(channels) * n_windows * length);
  std::size_t pos = 0;
  for (int c = 0; c < channels; ++c) {
    for (std::size_t w = 0; w < n_windows; ++w) {
      const Eigen::MatrixXd& m = block(w);
      for (std::size_t i = 0; i < length; ++i) {
        out[pos++] = static_cast<float>(m(c, static_cast<Eigen::Index>(i)));
      }
    }
  }
  return out;
}

[[noreturn]] void parse_error(std::size_t offset, const std::string& what) {
  std::ostringstream msg;
  msg << "dataset parse error at byte offset " << offset << ": " << what;
  throw Error(ErrorCode::kParse, msg.str());
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIo, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot rename onto " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Dataset make_dataset(const LatentTrace& trace, std::span<const DeviceProfile> profiles) {
  Dataset ds;
  ds.world = trace.config;
  ds.seed = trace.seed;
  ds.profiles.assign(profiles.begin(), profiles.end());
  ds.labels = trace.labels;
  const auto n = trace.num_windows();
  const auto C = trace.config.channels;
  const auto L = trace.config.samples_per_window();
  ds.latent = flatten(n, C, L, [&](std::size_t w) -> const Eigen::MatrixXd& {
    return trace.base_features[w];
  });
  for (const auto& profile : profiles) {
    if (ds.devices.contains(profile.id)) {
      throw Error(ErrorCode::kDuplicate, "duplicate device profile in dataset");
    }
    Eigen::MatrixXd scratch;
    ds.devices[profile.id] = flatten(n, C, L, [&](std::size_t w) -> const Eigen::MatrixXd& {
      scratch = observe(trace, profile, w).samples;
      return scratch;
    });
  }
  return ds;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  using nlohmann::json;
  const std::size_t block_len =
      static_cast<std::size_t>(ds.world.channels) * ds.num_windows() * ds.samples_per_window();

  json header;
  header["version"] = kDatasetVersion;
  header["K"] = ds.world.num_classes;
  header["C"] = ds.world.channels;
  header["sample_rate"] = ds.world.sample_rate;
  header["window_duration"] = ds.world.window_duration;
  header["n_windows"] = ds.num_windows();
  header["seed"] = ds.seed;
  header["world"] = detail::to_json(ds.world);
  header["profiles"] = json::array();
  for (const auto& p : ds.profiles) header["profiles"].push_back(detail::to_json(p));
  header["labels"] = ds.labels;

  std::string body;
  json blocks = json::array();
  auto add_block = [&](const std::string& name, const std::vector<float>& values,
                       std::optional<DeviceId> device) {
    if (values.size() != block_len) {
      throw Error(ErrorCode::kDimensionMismatch, "dataset block '" + name + "' has wrong size");
    }
    json b{{"name", name}, {"offset", body.size()}, {"count", values.size()}};
    b["device"] = device ? json(device->value()) : json(nullptr);
    blocks.push_back(b);
    append_floats(body, values);
  };
  add_block("latent", ds.latent, std::nullopt);
  for (const auto& [id, values] : ds.devices) {
    add_block("device" + std::to_string(id.value()), values, id);
  }
  header["blocks"] = blocks;

  std::string out;
  out.append(kMagic);
  out.push_back('\n');
  out.append(header.dump());
  out.push_back('\n');
  out.append(body);
  write_file_atomic(path, out);
}

Dataset read_dataset(const std::filesystem::path& path) {
  using nlohmann::json;
  const std::string bytes = read_file(path);

  const auto magic_end = bytes.find('\n');
  if (magic_end == std::string::npos || std::string_view(bytes).substr(0, magic_end) != kMagic) {
    parse_error(0, "missing dataset magic line");
  }
  const auto header_start = magic_end + 1;
  const auto header_end = bytes.find('\n', header_start);
  if (header_end == std::string::npos) {
    parse_error(bytes.size(), "header line is not terminated (truncated file)");
  }
  json header;
  try {
    header = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(header_start),
                         bytes.begin() + static_cast<std::ptrdiff_t>(header_end));
  } catch (const json::parse_error& e) {
    parse_error(header_start + e.byte, e.what());
  }

  Dataset ds;
  try {
    const int version = header.at("version").get<int>();
    if (version != kDatasetVersion) {
      throw Error(ErrorCode::kVersion, "unsupported dataset version " +
                                           std::to_string(version) + " (expected " +
                                           std::to_string(kDatasetVersion) + ")");
    }
    ds.world = detail::world_from_json(header.at("world"));
    ds.seed = header.at("seed").get<std::uint64_t>();
    for (const auto& p : header.at("profiles")) ds.profiles.push_back(detail::profile_from_json(p));
    ds.labels = header.at("labels").get<std::vector<int>>();
    if (header.at("n_windows").get<std::size_t>() != ds.labels.size() ||
        header.at("K").get<int>() != ds.world.num_classes ||
        header.at("C").get<int>() != ds.world.channels) {
      parse_error(header_start, "header fields disagree with world description");
    }
  } catch (const json::exception& e) {
    parse_error(header_start, std::string("malformed header: ") + e.what());
  }

  const std::size_t body_start = header_end + 1;
  const std::size_t block_len = static_cast<std::size_t>(ds.world.channels) *
                                ds.num_windows() * ds.samples_per_window();
  bool have_latent = false;
  for (const auto& b : header.at("blocks")) {
    std::size_t offset = 0, count = 0;
    std::string name;
    try {
      offset = b.at("offset").get<std::size_t>();
      count = b.at("count").get<std::size_t>();
      name = b.at("name").get<std::string>();
    } catch (const json::exception& e) {
      parse_error(header_start, std::string("malformed block entry: ") + e.what());
    }
    if (count != block_len) {
      parse_error(header_start, "block '" + name + "' has wrong sample count");
    }
    const std::size_t begin = body_start + offset;
    const std::size_t end = begin + count * 4;
    if (end > bytes.size()) {
      parse_error(bytes.size(), "block '" + name + "' truncated; expected " +
                                    std::to_string(end) + " bytes");
    }
    auto values = decode_floats(std::string_view(bytes).substr(begin, count * 4));
    if (b.at("device").is_null()) {
      ds.latent = std::move(values);
      have_latent = true;
    } else {
      ds.devices[DeviceId(b.at("device").get<std::uint32_t>())] = std::move(values);
    }
  }
  if (!have_latent) parse_error(header_start, "missing latent block");
  for (const auto& p : ds.profiles) {
    if (!ds.devices.contains(p.id)) {
      parse_error(header_start, "missing block for device " + std::to_string(p.id.value()));
    }
  }
  return ds;
}

void export_dataset(const LatentTrace& trace, std::span<const DeviceProfile> profiles,
                    const std::filesystem::path& path) {
  write_dataset(make_dataset(trace, profiles), path);
}

Dataset import_dataset(const std::filesystem::path& path) { return read_dataset(path); }

DatasetSource::DatasetSource(Dataset dataset) : dataset_(std::move(dataset)) {}

SensorWindow DatasetSource::window(DeviceId device, std::size_t index) const {
  auto it = dataset_.devices.find(device);
  if (it == dataset_.devices.end()) {
    throw Error(ErrorCode::kUnknownId,
                "dataset has no block for device " + std::to_string(device.value()));
  }
  if (index >= num_windows()) {
    throw Error(ErrorCode::kInvalidArgument, "window index outside dataset horizon");
  }
  const auto C = dataset_.world.channels;
  const auto L = dataset_.samples_per_window();
  const auto n = num_windows();
  SensorWindow w;
  w.device = device;
  w.duration = dataset_.world.window_duration;
  w.sample_rate = dataset_.world.sample_rate;
  w.start_time = static_cast<double>(index) * w.duration;
  w.samples.resize(C, static_cast<Eigen::Index>(L));
  for (int c = 0; c < C; ++c) {
    const std::size_t base = (static_cast<std::size_t>(c) * n + index) * L;
    for (std::size_t i = 0; i < L; ++i) {
      w.samples(c, static_cast<Eigen::Index>(i)) = it->second[base + i];
    }
  }
  return w;
}

std::vector<SensorWindow> DatasetSource::windows(DeviceId device, std::size_t first,
                                                 std::size_t count) const {
  std::vector<SensorWindow> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(window(device, first + i));
  return out;
}

}  // namespace edgesel
