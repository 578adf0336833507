#include "aligngan/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include "aligngan/error.hpp"
#include "aligngan/text.hpp"

namespace aligngan {

namespace {

constexpr std::string_view kMagic = "AGCK1";

class Writer {
 public:
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(std::string_view s) { out_.append(s); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  std::string& out() { return out_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::string_view bytes(std::size_t n) {
    need(n);
    const auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string str() { return std::string(bytes(u32())); }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n)
      throw FormatError("checkpoint truncated at byte " + std::to_string(pos_) + " (need " +
                        std::to_string(n) + " more)");
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

const Network& Checkpoint::network(NetworkRole role) const {
  for (const auto& n : networks)
    if (n.spec().role == role) return n;
  throw FormatError(std::string("checkpoint holds no ") + role_name(role));
}

std::string Checkpoint::meta(std::string_view key, std::string fallback) const {
  for (const auto& [k, v] : metadata)
    if (k == key) return v;
  return fallback;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic);
  w.u32(static_cast<std::uint32_t>(ckpt.metadata.size()));
  for (const auto& [k, v] : ckpt.metadata) {
    w.str(k);
    w.str(v);
  }
  w.u32(static_cast<std::uint32_t>(ckpt.networks.size()));
  for (const auto& net : ckpt.networks) {
    const std::string spec = serialize_spec(net.spec());
    w.str(spec);
    w.u64(text::fnv1a64(spec));
    w.u32(static_cast<std::uint32_t>(net.params().size()));
    for (const auto& p : net.params()) {
      w.str(p.name);
      w.u32(static_cast<std::uint32_t>(p.value.rank()));
      for (auto d : p.value.shape()) w.u64(d);
      for (double v : p.value.values()) w.f64(v);
    }
  }
  w.u64(text::fnv1a64(w.out()));
  return std::move(w.out());
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic)
    throw FormatError("not a checkpoint: bad magic");
  if (bytes.size() < kMagic.size() + 8) throw FormatError("checkpoint truncated");
  const std::string_view body = bytes.substr(0, bytes.size() - 8);
  Reader tail(bytes.substr(bytes.size() - 8));
  if (tail.u64() != text::fnv1a64(body)) throw FormatError("checkpoint checksum mismatch");

  Reader r(body);
  r.bytes(kMagic.size());
  Checkpoint ckpt;
  for (std::uint32_t n = r.u32(); n > 0; --n) {
    std::string k = r.str();
    ckpt.metadata.emplace_back(std::move(k), r.str());
  }
  for (std::uint32_t n = r.u32(); n > 0; --n) {
    const std::string spec_text = r.str();
    if (r.u64() != text::fnv1a64(spec_text)) throw FormatError("checkpoint spec digest mismatch");
    NetworkSpec spec;
    try {
      spec = parse_spec(spec_text);
    } catch (const Error& e) {
      throw FormatError(std::string("checkpoint spec unreadable: ") + e.what());
    }
    std::vector<Parameter> params;
    for (std::uint32_t m = r.u32(); m > 0; --m) {
      Parameter p;
      p.name = r.str();
      Shape shape(r.u32());
      std::size_t count = 1;
      for (auto& d : shape) {
        d = r.u64();
        if (d == 0 || d > r.remaining()) throw FormatError("checkpoint tensor extent out of range");
        count *= d;
      }
      if (shape.empty() || count > r.remaining() / 8)
        throw FormatError("checkpoint tensor '" + p.name + "' is truncated");
      std::vector<double> values(count);
      for (auto& v : values) v = r.f64();
      p.value = Tensor(std::move(shape), std::move(values));
      params.push_back(std::move(p));
    }
    try {
      ckpt.networks.emplace_back(std::move(spec), std::move(params));
    } catch (const SpecError& e) {
      throw FormatError(std::string("checkpoint network invalid: ") + e.what());
    }
  }
  if (r.remaining() != 0) throw FormatError("checkpoint has trailing bytes");
  return ckpt;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace aligngan
