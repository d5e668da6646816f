#include "smoothcert/weights_io.hpp"

#include <zlib.h>

#include <fstream>
#include <nlohmann/json.hpp>

#include "smoothcert/errors.hpp"

namespace smoothcert {

namespace {

using json = nlohmann::ordered_json;

std::uint32_t crc_of(const std::string& bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()),
              static_cast<uInt>(bytes.size())));
}

void append_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t read_u32_le(const std::string& bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(
             static_cast<unsigned char>(bytes[offset + static_cast<std::size_t>(i)]))
         << (8 * i);
  return v;
}

}  // namespace

void write_container(const std::filesystem::path& path,
                     const std::string& magic, std::uint32_t version,
                     const std::string& payload) {
  if (magic.size() != 4)
    throw ParameterError("container magic must be 4 bytes");
  std::string bytes = magic;
  append_u32_le(bytes, version);
  bytes += payload;
  append_u32_le(bytes, crc_of(bytes));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw PersistenceError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw PersistenceError("short write to " + path.string());
}

std::string read_container(const std::filesystem::path& path,
                           const std::string& magic,
                           std::uint32_t max_version,
                           std::uint32_t* version_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PersistenceError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());

  if (bytes.size() < 12 || bytes.compare(0, 4, magic) != 0)
    throw PersistenceError(path.string() + ": not a " + magic + " file");
  const std::uint32_t version = read_u32_le(bytes, 4);
  if (version > max_version)
    throw PersistenceError(path.string() + ": format version " +
                           std::to_string(version) +
                           " is newer than supported version " +
                           std::to_string(max_version));
  const std::uint32_t stored_crc = read_u32_le(bytes, bytes.size() - 4);
  const std::string body = bytes.substr(0, bytes.size() - 4);
  if (crc_of(body) != stored_crc)
    throw PersistenceError(path.string() +
                           ": checksum mismatch (truncated or corrupt)");
  return bytes.substr(8, bytes.size() - 12);
}

void save_weights(const ToyModelWeights& w, const std::filesystem::path& path) {
  json j;
  j["vocab"] = w.vocab;
  j["embed_dim"] = w.embed_dim;
  j["hidden_dim"] = w.hidden_dim;
  j["n_classes"] = w.n_classes;
  j["embeddings"] = w.embeddings;
  j["hidden_w"] = w.hidden_w;
  j["hidden_b"] = w.hidden_b;
  j["out_w"] = w.out_w;
  j["out_b"] = w.out_b;
  write_container(path, "SCW1", kWeightsVersion, j.dump());
}

ToyModelWeights load_weights(const std::filesystem::path& path) {
  const std::string payload = read_container(path, "SCW1", kWeightsVersion);
  json j;
  try {
    j = json::parse(payload);
  } catch (const json::exception& e) {
    throw PersistenceError(path.string() + ": bad weights payload: " +
                           e.what());
  }
  try {
    ToyModelWeights w;
    w.vocab = j.at("vocab").get<std::vector<std::string>>();
    w.embed_dim = j.at("embed_dim").get<std::size_t>();
    w.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    w.n_classes = j.at("n_classes").get<int>();
    w.embeddings = j.at("embeddings").get<std::vector<double>>();
    w.hidden_w = j.at("hidden_w").get<std::vector<double>>();
    w.hidden_b = j.at("hidden_b").get<std::vector<double>>();
    w.out_w = j.at("out_w").get<std::vector<double>>();
    w.out_b = j.at("out_b").get<std::vector<double>>();

    const std::size_t v = w.vocab.size();
    if (w.embeddings.size() != v * w.embed_dim ||
        w.hidden_w.size() != w.hidden_dim * 2 * w.embed_dim ||
        w.hidden_b.size() != w.hidden_dim ||
        w.out_w.size() !=
            static_cast<std::size_t>(w.n_classes) * w.hidden_dim ||
        w.out_b.size() != static_cast<std::size_t>(w.n_classes))
      throw PersistenceError(path.string() + ": inconsistent weight shapes");
    return w;
  } catch (const json::exception& e) {
    throw PersistenceError(path.string() + ": bad weights payload: " +
                           e.what());
  }
}

}  // namespace smoothcert
