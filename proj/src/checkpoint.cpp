#include "bganlab/checkpoint.hpp"

#include <cstring>

#include "bganlab/error.hpp"
#include "bganlab/file_io.hpp"
#include "bganlab/json_reader.hpp"
#include "bganlab/sha256.hpp"

namespace bganlab {

namespace {

constexpr char kMagic[] = "BGANCKPT";
constexpr std::size_t kMagicLen = 8;
constexpr int kVersion = 1;

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

std::string payload_of(const TrainParams& p) {
  std::string out;
  p.visit([&](const std::string&, const bgan::Mat& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        std::uint64_t bits;
        const double v = m(i, j);
        std::memcpy(&bits, &v, sizeof bits);
        put_u64(out, bits);
      }
  });
  return out;
}

}  // namespace

std::string checkpoint_bytes(const TrainParams& p, const TrainConfig& c) {
  const std::string payload = payload_of(p);
  OrderedJson tensors = OrderedJson::array();
  p.visit([&](const std::string& name, const bgan::Mat& m) {
    tensors.push_back(OrderedJson{{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  });
  const OrderedJson header{{"format", "bganlab-checkpoint"},
                           {"version", kVersion},
                           {"seed", c.seed},
                           {"config", OrderedJson::parse(dump_canonical(to_json(c)))},
                           {"config_hash", config_hash(c)},
                           {"tensors", std::move(tensors)},
                           {"payload_sha256", sha256_hex(payload)}};
  const std::string h = dump_canonical(header);
  std::string out(kMagic, kMagicLen);
  put_u64(out, h.size());
  out += h;
  out += payload;
  return out;
}

Checkpoint read_checkpoint(const std::string& bytes) {
  if (bytes.size() < kMagicLen + 8 || bytes.compare(0, kMagicLen, kMagic) != 0)
    throw SchemaError("$", "not a checkpoint (bad magic)");
  const std::uint64_t hlen = get_u64(bytes, kMagicLen);
  if (hlen > bytes.size() - kMagicLen - 8) throw SchemaError("$", "truncated header");
  Json header;
  try {
    header = Json::parse(bytes.substr(kMagicLen + 8, hlen));
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("checkpoint header: ") + e.what(), 0, 0);
  }
  const Reader r(header, "$");
  r.only({"format", "version", "seed", "config", "config_hash", "tensors", "payload_sha256"});
  if (r.str("format") != "bganlab-checkpoint") throw SchemaError("$.format", "unexpected format");
  if (r.index("version") != kVersion) throw SchemaError("$.version", "unsupported version");
  Checkpoint ck;
  ck.config = train_config_from_json(r.at("config"));
  if (r.index("seed") != ck.config.seed) throw SchemaError("$.seed", "differs from config seed");
  if (r.str("config_hash") != config_hash(ck.config)) throw SchemaError("$.config_hash", "does not match config");
  try {
    ck.config.validate();
    ck.params = init_train_params(ck.config);
  } catch (const ParamError& e) {
    throw SchemaError("$.config", e.what());
  }

  const std::string payload = bytes.substr(kMagicLen + 8 + hlen);
  if (sha256_hex(payload) != r.str("payload_sha256")) throw SchemaError("$.payload_sha256", "payload hash mismatch");
  const Json& tensors = r.array("tensors");
  std::size_t t = 0, offset = 0;
  ck.params.visit([&](const std::string& name, bgan::Mat& m) {
    const std::string path = Reader::item("$.tensors", t);
    if (t >= tensors.size()) throw SchemaError(path, "missing tensor " + name);
    const Reader tr(tensors[t], path);
    tr.only({"name", "rows", "cols"});
    if (tr.str("name") != name) throw SchemaError(tr.sub("name"), "expected " + name);
    if (tr.index("rows") != static_cast<std::size_t>(m.rows()) || tr.index("cols") != static_cast<std::size_t>(m.cols()))
      throw SchemaError(path, "shape does not match the config");
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (offset + 8 > payload.size()) throw SchemaError("$", "payload shorter than the tensors");
        const std::uint64_t bits = get_u64(payload, offset);
        offset += 8;
        std::memcpy(&m(i, j), &bits, sizeof bits);
      }
    ++t;
  });
  if (t != tensors.size()) throw SchemaError("$.tensors", "unexpected extra tensors");
  if (offset != payload.size()) throw SchemaError("$", "payload longer than the tensors");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const TrainParams& p, const TrainConfig& c) {
  write_file(path, checkpoint_bytes(p, c));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return read_checkpoint(read_file(path)); }

}  // namespace bganlab
