#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "hyperbrain/encoder.hpp"
#include "hyperbrain/error.hpp"

namespace hyperbrain::encoder {

namespace {

constexpr char kBlobMagic[4] = {'H', 'B', 'C', 'K'};
constexpr int kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint blobs are little-endian");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError(path.string() + ": truncated checkpoint blob");
  return v;
}

std::filesystem::path blob_path(const std::filesystem::path& manifest) {
  auto p = manifest;
  p.replace_extension(".bin");
  return p;
}

}  // namespace

void save_checkpoint(const ScorerModel& model, const std::filesystem::path& manifest_path) {
  const auto blob = blob_path(manifest_path);
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& [name, t] : model.params) tensors.push_back({{"name", name}, {"shape", t.shape()}});
  const nlohmann::json manifest = {
      {"format", "hyperbrain-checkpoint"},
      {"version", kFormatVersion},
      {"walk_length", model.dims.walk_length},
      {"d_pos", model.dims.d_pos},
      {"d_edge", model.dims.d_edge},
      {"d_time", model.dims.d_time},
      {"mixer_blocks", model.dims.mixer_blocks},
      {"seed", model.seed},
      {"parameter_count", model.parameter_count()},
      {"blob", blob.filename().string()},
      {"tensors", tensors},
  };
  std::ofstream out(manifest_path);
  if (!out) throw DataError("cannot write " + manifest_path.string());
  out << manifest.dump(2) << '\n';

  std::ofstream bin(blob, std::ios::binary);
  if (!bin) throw DataError("cannot write " + blob.string());
  bin.write(kBlobMagic, 4);
  put(bin, static_cast<std::uint32_t>(model.params.size()));
  for (const auto& [name, t] : model.params) {
    put(bin, static_cast<std::uint32_t>(name.size()));
    bin.write(name.data(), static_cast<std::streamsize>(name.size()));
    put(bin, static_cast<std::uint32_t>(t.rows()));
    put(bin, static_cast<std::uint32_t>(t.cols()));
    for (double v : t.data()) put(bin, v);
  }
}

ScorerModel load_checkpoint(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open checkpoint " + manifest_path.string());
  ScorerModel model;
  std::map<std::string, std::vector<std::size_t>> shapes;
  std::filesystem::path blob;
  try {
    const auto manifest = nlohmann::json::parse(in);
    if (manifest.at("format") != "hyperbrain-checkpoint" || manifest.at("version") != kFormatVersion)
      throw ParseError(manifest_path.string() + ": not a version-1 hyperbrain checkpoint");
    model.dims.walk_length = manifest.at("walk_length").get<int>();
    model.dims.d_pos = manifest.at("d_pos").get<int>();
    model.dims.d_edge = manifest.at("d_edge").get<int>();
    model.dims.d_time = manifest.at("d_time").get<int>();
    model.dims.mixer_blocks = manifest.at("mixer_blocks").get<int>();
    model.seed = manifest.at("seed").get<std::uint64_t>();
    for (const auto& t : manifest.at("tensors"))
      shapes[t.at("name").get<std::string>()] = t.at("shape").get<std::vector<std::size_t>>();
    blob = manifest_path.parent_path() / manifest.at("blob").get<std::string>();
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(manifest_path.string() + ": " + ex.what());
  }
  model.dims.validate();

  std::ifstream bin(blob, std::ios::binary);
  if (!bin) throw DataError("cannot open checkpoint blob " + blob.string());
  char magic[4];
  bin.read(magic, 4);
  if (!bin || std::memcmp(magic, kBlobMagic, 4) != 0) throw ParseError(blob.string() + ": bad magic");
  const auto count = get<std::uint32_t>(bin, blob);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(get<std::uint32_t>(bin, blob), '\0');
    bin.read(name.data(), static_cast<std::streamsize>(name.size()));
    const auto rows = get<std::uint32_t>(bin, blob);
    const auto cols = get<std::uint32_t>(bin, blob);
    const auto it = shapes.find(name);
    if (it == shapes.end() || it->second != std::vector<std::size_t>{rows, cols})
      throw DataError(blob.string() + ": tensor '" + name + "' disagrees with the manifest");
    Tensor t(rows, cols);
    for (double& v : t.data()) v = get<double>(bin, blob);
    model.params.emplace(std::move(name), std::move(t));
  }
  if (model.params.size() != shapes.size()) throw DataError(blob.string() + ": tensor count differs from manifest");
  const auto reference = ScorerModel::initialize(model.dims, 0);
  if (model.parameter_count() != ScorerModel::expected_parameter_count(model.dims) ||
      model.params.size() != reference.params.size()) {
    throw DataError(manifest_path.string() + ": parameter count does not match the declared widths");
  }
  for (const auto& [name, t] : reference.params) {
    const auto it = model.params.find(name);
    if (it == model.params.end() || it->second.shape() != t.shape())
      throw DataError(manifest_path.string() + ": missing or misshapen tensor '" + name + "'");
  }
  if (!model.all_finite()) throw DataError(manifest_path.string() + ": non-finite parameters");
  return model;
}

}  // namespace hyperbrain::encoder
