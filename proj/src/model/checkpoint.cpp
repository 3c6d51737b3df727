#include "avq/model/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "avq/errors.hpp"

namespace avq {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr std::array<char, 8> kMagic = {'A', 'V', 'Q', 'C', 'K', 'P', 'T', '1'};

void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw DataError("checkpoint truncated");
  return v;
}

}  // namespace

nlohmann::json stats_to_json(const FeatureStats& s) {
  return nlohmann::json{{"kind", s.kind == NormKind::standard ? "standard" : "minmax"},
                        {"center", s.center},
                        {"spread", s.spread},
                        {"degenerate", s.degenerate}};
}

FeatureStats stats_from_json(const nlohmann::json& j) {
  FeatureStats s;
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind != "standard" && kind != "minmax") throw DataError("unknown normalization kind '" + kind + "'");
    s.kind = kind == "standard" ? NormKind::standard : NormKind::minmax;
    s.center = j.at("center").get<std::vector<double>>();
    s.spread = j.at("spread").get<std::vector<double>>();
    s.degenerate = j.at("degenerate").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("normalization stats: ") + e.what());
  }
  return s;
}

void write_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
  nlohmann::json header;
  header["config"] = ckpt.params.config;
  header["seed"] = ckpt.seed;
  header["scale"] = std::string(to_string(ckpt.scale));
  header["feature_stats"] = ckpt.feature_stats ? stats_to_json(*ckpt.feature_stats) : nlohmann::json();
  auto& index = header["tensors"] = nlohmann::json::array();
  for (const auto& [name, tensor] : ckpt.params.tensors()) {
    index.push_back({{"name", name}, {"rows", tensor->rows()}, {"cols", tensor->cols()}});
  }
  const std::string text = header.dump();
  out.write(kMagic.data(), kMagic.size());
  write_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, tensor] : ckpt.params.tensors()) {
    out.write(reinterpret_cast<const char*>(tensor->data().data()),
              static_cast<std::streamsize>(tensor->size() * sizeof(double)));
  }
  if (!out) throw DataError("checkpoint write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw DataError("not a model checkpoint (bad magic)");
  const std::uint64_t len = read_u64(in);
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw DataError("checkpoint header truncated");

  Checkpoint ckpt;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.scale = parse_scale(header.at("scale").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint header: ") + e.what());
  }
  ModelConfig config;
  from_json(header.at("config"), config);
  if (!header["feature_stats"].is_null()) ckpt.feature_stats = stats_from_json(header["feature_stats"]);

  ckpt.params = init_params(config, 0);
  const auto tensors = ckpt.params.tensors();
  const auto& index = header.at("tensors");
  if (index.size() != tensors.size()) {
    throw DataError("checkpoint holds " + std::to_string(index.size()) + " tensors, config implies " +
                    std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& [name, tensor] = tensors[i];
    if (index[i].at("name").get<std::string>() != name ||
        index[i].at("rows").get<std::size_t>() != tensor->rows() ||
        index[i].at("cols").get<std::size_t>() != tensor->cols()) {
      throw DataError("checkpoint tensor " + std::to_string(i) + " does not match '" + name + "' " +
                      tensor->shape());
    }
    if (!in.read(reinterpret_cast<char*>(tensor->data().data()),
                 static_cast<std::streamsize>(tensor->size() * sizeof(double)))) {
      throw DataError("checkpoint data truncated in '" + name + "'");
    }
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
  write_checkpoint(ckpt, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in);
}

}  // namespace avq
