#include "pairrank/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

namespace pairrank {

namespace {

constexpr char kMagic[8] = {'P', 'R', 'N', 'K', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.append(c, n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  const std::string& data() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

  void need(std::size_t n, const char* what) {
    if (data_.size() - pos_ < n) {
      throw CheckpointError(path_ + ": truncated checkpoint while reading " + what);
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string raw(std::size_t n, const char* what) {
    need(n, what);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == data_.size(); }
  const std::string& path() const { return path_; }

 private:
  std::string data_;
  std::string path_;
  std::size_t pos_ = 0;
};

std::string hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

}  // namespace

std::string model_config_to_text(const ModelConfig& c) {
  std::ostringstream os;
  os << "embed_dim=" << c.embed_dim << '\n'
     << "hidden=" << c.hidden << '\n'
     << "lstm_layers=" << c.lstm_layers << '\n'
     << "dropout=" << hex_double(c.dropout) << '\n'
     << "max_query_len=" << c.max_query_len << '\n'
     << "max_doc_len=" << c.max_doc_len << '\n'
     << "feature_count=" << c.feature_count << '\n'
     << "init_range=" << hex_double(c.init_range) << '\n';
  return os.str();
}

ModelConfig model_config_from_text(const std::string& text) {
  ModelConfig c;
  std::istringstream in(text);
  std::string line;
  auto as_size = [](const std::string& key, const std::string& v) {
    std::size_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
      throw CheckpointError("config key " + key + ": bad integer '" + v + "'");
    }
    return out;
  };
  auto as_double = [](const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double out = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size()) {
      throw CheckpointError("config key " + key + ": bad number '" + v + "'");
    }
    return out;
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError("config line without '=': " + line);
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "embed_dim") c.embed_dim = as_size(key, value);
    else if (key == "hidden") c.hidden = as_size(key, value);
    else if (key == "lstm_layers") c.lstm_layers = as_size(key, value);
    else if (key == "dropout") c.dropout = as_double(key, value);
    else if (key == "max_query_len") c.max_query_len = as_size(key, value);
    else if (key == "max_doc_len") c.max_doc_len = as_size(key, value);
    else if (key == "feature_count") c.feature_count = as_size(key, value);
    else if (key == "init_range") c.init_range = as_double(key, value);
    else throw CheckpointError("unknown config key '" + key + "'");
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  w.str(model_config_to_text(ckpt.config()));
  w.u64(ckpt.vocab_fingerprint);
  w.u64(ckpt.epoch);
  for (double v : ckpt.norm.mean) w.f64(v);
  for (double v : ckpt.norm.stddev) w.f64(v);
  const ModelParams& p = ckpt.params;
  w.u32(static_cast<std::uint32_t>(p.count()));
  for (std::size_t i = 0; i < p.count(); ++i) {
    const Matrix& m = p.value(i);
    w.str(p.name(i));
    w.u32(2);
    w.u64(m.rows);
    w.u64(m.cols);
    for (double v : m.data) w.f64(v);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path);
  out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
  if (!out) throw CheckpointError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path, const ModelConfig* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  Reader r(std::string(std::istreambuf_iterator<char>(in), {}), path);

  if (r.raw(sizeof kMagic, "magic") != std::string(kMagic, sizeof kMagic)) {
    throw CheckpointError(path + ": not a checkpoint file");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(path + ": checkpoint version " + std::to_string(version) + ", expected " +
                          std::to_string(kCheckpointVersion));
  }
  const ModelConfig stored = model_config_from_text(r.str("config"));
  const ModelConfig& config = expected ? *expected : stored;
  Checkpoint ckpt{ModelParams::zeros(config), {}, 0, 0};
  ckpt.vocab_fingerprint = r.u64("vocabulary fingerprint");
  ckpt.epoch = r.u64("epoch");
  for (double& v : ckpt.norm.mean) v = r.f64("norm stats");
  for (double& v : ckpt.norm.stddev) v = r.f64("norm stats");

  const std::uint32_t count = r.u32("parameter count");
  if (count != ckpt.params.count()) {
    throw CheckpointError(path + ": " + std::to_string(count) + " parameters stored, config expects " +
                          std::to_string(ckpt.params.count()));
  }
  for (std::size_t i = 0; i < count; ++i) {
    const std::string name = r.str("parameter name");
    if (name != ckpt.params.name(i)) {
      throw CheckpointError(path + ": parameter " + std::to_string(i) + " is '" + name + "', expected '" +
                            ckpt.params.name(i) + "'");
    }
    const std::uint32_t rank = r.u32("rank");
    if (rank != 2) throw CheckpointError(path + ": parameter " + name + " has rank " + std::to_string(rank));
    const std::uint64_t rows = r.u64("dims"), cols = r.u64("dims");
    Matrix& m = ckpt.params.value(i);
    if (rows != m.rows || cols != m.cols) {
      throw CheckpointError(path + ": shape mismatch for parameter " + name + ": file has [" +
                            std::to_string(rows) + "x" + std::to_string(cols) + "], config expects " +
                            m.shape_string());
    }
    for (double& v : m.data) v = r.f64("parameter values");
  }
  if (!r.at_end()) throw CheckpointError(path + ": unexpected trailing bytes after last parameter");
  if (expected && !(stored == *expected)) {
    throw CheckpointError(path + ": stored config differs from the expected config");
  }
  return ckpt;
}

}  // namespace pairrank
