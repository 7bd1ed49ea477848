#include "actlab/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "actlab/error.hpp"

namespace actlab {

namespace {

constexpr char kMagic[8] = {'A', 'C', 'T', 'L', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    out_.append(s);
  }
  void vec(const Vec& v) {
    u64(v.size());
    for (double x : v) f64(x);
  }
  void raw(std::string_view s) { out_.append(s); }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t count(std::size_t elem_size) {
    const std::uint64_t n = u64();
    if (elem_size > 0 && n > remaining() / elem_size) throw CorruptFileError("checkpoint: length field out of range");
    return static_cast<std::size_t>(n);
  }
  std::string str() {
    const std::size_t n = count(1);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  Vec vec() {
    const std::size_t n = count(8);
    Vec v(n);
    for (double& x : v) x = f64();
    return v;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw TruncatedFileError("checkpoint: unexpected end of data");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

void write_params(Writer& w, const FlatParams& p) {
  w.u64(p.layout.blocks.size());
  for (const auto& b : p.layout.blocks) {
    w.str(b.name);
    w.u64(b.shape.size());
    for (std::size_t s : b.shape) w.u64(s);
    w.u64(b.offset);
  }
  w.u64(p.layout.total);
  w.vec(p.data);
}

FlatParams read_params(Reader& r) {
  FlatParams p;
  const std::size_t nb = r.count(1);
  for (std::size_t i = 0; i < nb; ++i) {
    ParamBlock b;
    b.name = r.str();
    const std::size_t ns = r.count(8);
    for (std::size_t k = 0; k < ns; ++k) b.shape.push_back(r.u64());
    b.offset = r.u64();
    p.layout.blocks.push_back(std::move(b));
  }
  p.layout.total = r.u64();
  p.data = r.vec();
  std::size_t expect = 0;
  for (const auto& b : p.layout.blocks) {
    if (b.offset != expect) throw CorruptFileError("checkpoint: parameter blocks are not contiguous");
    expect += b.size();
  }
  if (expect != p.layout.total || p.data.size() != p.layout.total)
    throw CorruptFileError("checkpoint: parameter layout does not match data");
  return p;
}

void write_batch(Writer& w, const Batch& b) {
  w.u64(b.obs_dim);
  w.u64(b.act_dim);
  w.vec(b.observations);
  w.vec(b.actions);
  w.vec(b.old_log_probs);
  w.vec(b.advantages);
  w.vec(b.returns);
  w.vec(b.old_values);
}

Batch read_batch(Reader& r) {
  Batch b;
  b.obs_dim = r.u64();
  b.act_dim = r.u64();
  b.observations = r.vec();
  b.actions = r.vec();
  b.old_log_probs = r.vec();
  b.advantages = r.vec();
  b.returns = r.vec();
  b.old_values = r.vec();
  try {
    b.validate();
  } catch (const ConfigError& e) {
    throw CorruptFileError(std::string("checkpoint: frozen batch: ") + e.what());
  }
  return b;
}

void write_loss(Writer& w, const LossTerms& l) {
  w.f64(l.total);
  w.f64(l.policy);
  w.f64(l.value);
  w.f64(l.entropy);
}

LossTerms read_loss(Reader& r) {
  LossTerms l;
  l.total = r.f64();
  l.policy = r.f64();
  l.value = r.f64();
  l.entropy = r.f64();
  return l;
}

}  // namespace

RunConfig Checkpoint::config() const {
  try {
    return run_config_from_json(nlohmann::json::parse(config_json));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint config: ") + e.what());
  }
}

std::string encode_checkpoint(const Checkpoint& c) {
  Writer p;
  p.str(c.config_json);
  p.u64(c.seed);
  p.i64(c.iteration);
  p.i64(c.env_step);
  p.i64(c.gradient_step);
  p.i64(c.episode_index);
  p.i64(c.episode_step);
  write_params(p, c.params);
  p.vec(c.adam.m);
  p.vec(c.adam.v);
  p.i64(c.adam.t);
  p.str(c.rng_action.serialize());
  p.str(c.rng_shuffle.serialize());
  p.vec(c.env.state.q);
  p.vec(c.env.state.qdot);
  p.vec(c.env.aux);
  p.vec(c.last_observation);
  p.u64(c.curve.size());
  for (const auto& pt : c.curve) {
    p.u64(pt.seed);
    p.i64(pt.env_step);
    p.i64(pt.gradient_step);
    p.f64(pt.mean_return);
    p.f64(pt.std_return);
    p.f64(pt.discounted_return);
  }
  write_batch(p, c.frozen);
  write_loss(p, c.stored_loss);

  Writer w;
  w.raw(std::string_view(kMagic, sizeof kMagic));
  w.u32(kCheckpointVersion);
  w.u64(p.bytes().size());
  w.raw(p.bytes());
  w.u64(fnv1a(p.bytes()));
  return std::move(w.bytes());
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader head(bytes);
  const auto magic = head.raw(sizeof kMagic);
  if (magic != std::string_view(kMagic, sizeof kMagic))
    throw CorruptFileError("checkpoint: bad magic");
  const std::uint32_t version = head.u32();
  if (version != kCheckpointVersion)
    throw VersionMismatchError("checkpoint: format version " + std::to_string(version) +
                               ", expected " + std::to_string(kCheckpointVersion));
  const std::uint64_t len = head.u64();
  if (head.remaining() < len || head.remaining() - len < 8)
    throw TruncatedFileError("checkpoint: file is truncated");
  const std::string_view payload = head.raw(len);
  if (head.u64() != fnv1a(payload)) throw CorruptFileError("checkpoint: checksum mismatch");
  if (head.remaining() != 0) throw CorruptFileError("checkpoint: trailing bytes");

  Reader r(payload);
  Checkpoint c;
  try {
    c.config_json = r.str();
    c.seed = r.u64();
    c.iteration = r.i64();
    c.env_step = r.i64();
    c.gradient_step = r.i64();
    c.episode_index = r.i64();
    c.episode_step = r.i64();
    c.params = read_params(r);
    c.adam.m = r.vec();
    c.adam.v = r.vec();
    c.adam.t = r.i64();
    c.rng_action = Rng::deserialize(r.str());
    c.rng_shuffle = Rng::deserialize(r.str());
    c.env.state.q = r.vec();
    c.env.state.qdot = r.vec();
    c.env.aux = r.vec();
    c.last_observation = r.vec();
    const std::size_t n = r.count(48);
    c.curve.resize(n);
    for (auto& pt : c.curve) {
      pt.seed = r.u64();
      pt.env_step = r.i64();
      pt.gradient_step = r.i64();
      pt.mean_return = r.f64();
      pt.std_return = r.f64();
      pt.discounted_return = r.f64();
    }
    c.frozen = read_batch(r);
    c.stored_loss = read_loss(r);
  } catch (const TruncatedFileError&) {
    // The checksum matched, so a short payload is a malformed file.
    throw CorruptFileError("checkpoint: payload ends early");
  }
  if (r.remaining() != 0) throw CorruptFileError("checkpoint: trailing payload bytes");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(ckpt);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

std::vector<std::filesystem::path> list_checkpoints(const std::filesystem::path& run_dir) {
  const auto dir = run_dir / "checkpoints";
  std::vector<std::pair<long long, std::filesystem::path>> found;
  if (!std::filesystem::is_directory(dir)) return {};
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (!name.starts_with("ckpt_") || !name.ends_with(".bin")) continue;
    try {
      found.emplace_back(std::stoll(name.substr(5, name.size() - 9)), entry.path());
    } catch (const std::exception&) {
    }
  }
  std::sort(found.begin(), found.end());
  std::vector<std::filesystem::path> out;
  for (auto& f : found) out.push_back(std::move(f.second));
  return out;
}

}  // namespace actlab
