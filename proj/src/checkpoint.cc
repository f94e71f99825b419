#include "scama/checkpoint.h"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace scama {

namespace {

constexpr char kMagic[] = "SCAMA1";
constexpr std::size_t kMagicLen = 6;

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

template <typename T>
void put(std::string* buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf->append(raw, sizeof(T));
}

template <typename T>
T get(const std::string& buf, std::size_t* pos) {
  if (*pos + sizeof(T) > buf.size()) throw IoError("truncated array file");
  T v;
  std::memcpy(&v, buf.data() + *pos, sizeof(T));
  *pos += sizeof(T);
  return v;
}

}  // namespace

void write_array_file(const std::string& path,
                      const std::vector<ArrayRecord>& records) {
  std::string payload;
  for (const ArrayRecord& r : records) {
    if (r.name.empty()) throw IoError("array record needs a name");
    put<std::uint32_t>(&payload, static_cast<std::uint32_t>(r.name.size()));
    payload.append(r.name);
    put<std::uint32_t>(&payload, static_cast<std::uint32_t>(r.shape.size()));
    std::size_t n = 1;
    for (std::size_t e : r.shape) {
      put<std::uint64_t>(&payload, e);
      n *= e;
    }
    if (r.data.size() != n) {
      throw IoError("record " + r.name + " data does not fill its shape");
    }
    for (float v : r.data) put<float>(&payload, v);
  }
  put<std::uint32_t>(&payload, 0);  // sentinel
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(kMagic, kMagicLen);
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  std::uint64_t sum = fnv1a(payload);
  out.write(reinterpret_cast<const char*>(&sum), sizeof(sum));
  if (!out) throw IoError("write failed for " + path);
}

std::vector<ArrayRecord> read_array_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string all((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  if (all.size() < kMagicLen + sizeof(std::uint64_t) ||
      std::memcmp(all.data(), kMagic, kMagicLen) != 0) {
    throw IoError(path + " is not a SCAMA1 array file");
  }
  std::string payload =
      all.substr(kMagicLen, all.size() - kMagicLen - sizeof(std::uint64_t));
  std::uint64_t stored;
  std::memcpy(&stored, all.data() + all.size() - sizeof(stored),
              sizeof(stored));
  if (fnv1a(payload) != stored) {
    throw IoError(path + " failed its integrity checksum");
  }
  std::vector<ArrayRecord> records;
  std::size_t pos = 0;
  while (true) {
    std::uint32_t name_len = get<std::uint32_t>(payload, &pos);
    if (name_len == 0) break;
    if (pos + name_len > payload.size()) throw IoError("truncated record name");
    ArrayRecord r;
    r.name = payload.substr(pos, name_len);
    pos += name_len;
    std::uint32_t rank = get<std::uint32_t>(payload, &pos);
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      std::uint64_t e = get<std::uint64_t>(payload, &pos);
      r.shape.push_back(static_cast<std::size_t>(e));
      n *= e;
    }
    r.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) r.data[i] = get<float>(payload, &pos);
    records.push_back(std::move(r));
  }
  return records;
}

namespace {

ArrayRecord scalar_record(const std::string& name, double v) {
  return {name, {1}, {static_cast<float>(v)}};
}

double find_scalar(const std::vector<ArrayRecord>& recs,
                   const std::string& name) {
  for (const ArrayRecord& r : recs) {
    if (r.name == name) {
      if (r.data.size() != 1) throw IoError(name + " is not a scalar");
      return static_cast<double>(r.data[0]);
    }
  }
  throw IoError("checkpoint is missing " + name);
}

}  // namespace

void save_checkpoint(const Model& m, const std::string& path) {
  std::vector<ArrayRecord> recs;
  const ModelConfig& c = m.cfg;
  recs.push_back(scalar_record("meta/version", 1));
  recs.push_back(scalar_record("meta/n_enc", static_cast<double>(c.n_enc)));
  recs.push_back(scalar_record("meta/m_dec", static_cast<double>(c.m_dec)));
  recs.push_back(scalar_record("meta/k_dec", static_cast<double>(c.k_dec)));
  recs.push_back(scalar_record("meta/d_model", static_cast<double>(c.d_model)));
  recs.push_back(scalar_record("meta/d_ff", static_cast<double>(c.d_ff)));
  recs.push_back(scalar_record("meta/heads", static_cast<double>(c.heads)));
  recs.push_back(scalar_record("meta/d_in", static_cast<double>(c.d_in)));
  recs.push_back(scalar_record("meta/vocab", static_cast<double>(c.vocab)));
  recs.push_back(scalar_record("meta/chunk", static_cast<double>(c.chunk)));
  recs.push_back(scalar_record("meta/l_enc", static_cast<double>(c.l_enc)));
  recs.push_back(
      scalar_record("meta/l_enc_ahead", static_cast<double>(c.l_enc_ahead)));
  recs.push_back(scalar_record("meta/l_dec", static_cast<double>(c.l_dec)));
  recs.push_back(scalar_record("meta/c_max", static_cast<double>(c.c_max)));
  recs.push_back(scalar_record("meta/dropout", c.dropout));
  recs.push_back(scalar_record("meta/sos", c.sos));
  recs.push_back(scalar_record("meta/eos", c.eos));
  for (const auto& [name, t] : m.named_params()) {
    ArrayRecord r;
    r.name = "param/" + name;
    r.shape = t.shape();
    if (r.shape.empty()) r.shape = {1};
    r.data.reserve(t.size());
    for (double v : t.value()) r.data.push_back(static_cast<float>(v));
    recs.push_back(std::move(r));
  }
  write_array_file(path, recs);
}

Model load_checkpoint(const std::string& path) {
  std::vector<ArrayRecord> recs = read_array_file(path);
  if (find_scalar(recs, "meta/version") != 1.0) {
    throw IoError("unsupported checkpoint version");
  }
  ModelConfig c;
  c.n_enc = static_cast<std::size_t>(find_scalar(recs, "meta/n_enc"));
  c.m_dec = static_cast<std::size_t>(find_scalar(recs, "meta/m_dec"));
  c.k_dec = static_cast<std::size_t>(find_scalar(recs, "meta/k_dec"));
  c.d_model = static_cast<std::size_t>(find_scalar(recs, "meta/d_model"));
  c.d_ff = static_cast<std::size_t>(find_scalar(recs, "meta/d_ff"));
  c.heads = static_cast<std::size_t>(find_scalar(recs, "meta/heads"));
  c.d_in = static_cast<std::size_t>(find_scalar(recs, "meta/d_in"));
  c.vocab = static_cast<std::size_t>(find_scalar(recs, "meta/vocab"));
  c.chunk = static_cast<std::size_t>(find_scalar(recs, "meta/chunk"));
  c.l_enc = static_cast<std::size_t>(find_scalar(recs, "meta/l_enc"));
  c.l_enc_ahead =
      static_cast<std::size_t>(find_scalar(recs, "meta/l_enc_ahead"));
  c.l_dec = static_cast<std::size_t>(find_scalar(recs, "meta/l_dec"));
  c.c_max = static_cast<std::size_t>(find_scalar(recs, "meta/c_max"));
  c.dropout = find_scalar(recs, "meta/dropout");
  c.sos = static_cast<int>(find_scalar(recs, "meta/sos"));
  c.eos = static_cast<int>(find_scalar(recs, "meta/eos"));

  Model m = Model::init(c, 0);
  for (auto& [name, t] : m.named_params()) {
    std::string key = "param/" + name;
    bool found = false;
    for (const ArrayRecord& r : recs) {
      if (r.name != key) continue;
      if (r.data.size() != t.size()) {
        throw IoError("checkpoint array " + key + " has " +
                      std::to_string(r.data.size()) + " values, expected " +
                      std::to_string(t.size()));
      }
      Tensor& dst = const_cast<Tensor&>(t);
      for (std::size_t i = 0; i < r.data.size(); ++i) {
        dst.value()[i] = static_cast<double>(r.data[i]);
      }
      found = true;
      break;
    }
    if (!found) throw IoError("checkpoint is missing " + key);
  }
  return m;
}

}  // namespace scama
