// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfc/io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace dfc::io {

static_assert(std::endian::native == std::endian::little, "container code assumes little-endian");

namespace {

constexpr char kMagic[4] = {'D', 'F', 'C', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr int kGeometryFields = 14;
constexpr std::uint32_t kMaxLayers = 4096;
constexpr std::int64_t kMaxExtent = 1 << 20;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void i64(std::int64_t v) { bytes(&v, 8); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> b, std::size_t limit) : b_(b), limit_(limit) {}
  std::size_t pos() const { return pos_; }

  void need(std::size_t n, const char* what) const {
    if (n > limit_ - pos_) {
      throw FormatError("offset " + std::to_string(pos_) + ": truncated " + what + " (need " +
                        std::to_string(n) + " bytes, " + std::to_string(limit_ - pos_) +
                        " left)");
    }
  }
  template <typename T>
  T read(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  [[noreturn]] void fail(std::size_t at, const std::string& what) const {
    throw FormatError("offset " + std::to_string(at) + ": " + what);
  }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t limit_;
  std::size_t pos_ = 0;
};

struct TensorRef {
  Shape shape;
  std::uint64_t offset = 0;
  std::uint64_t bytes = 0;
};

template <typename L>
auto layer_tensors(L& l) {
  std::vector<decltype(&l.w)> out;
  if (l.is_weighted()) {
    if (l.factorized) {
      out = {&l.w1, &l.w2};
    } else {
      out = {&l.w};
    }
    if (l.has_bias) out.push_back(&l.bias);
  } else if (l.kind == model::LayerKind::kBatchNorm) {
    out = {&l.gamma, &l.beta, &l.running_mean, &l.running_var};
  }
  return out;
}

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong c = ::crc32(0L, Z_NULL, 0);
  // zlib takes a uInt length; feed large buffers in pieces.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
    c = ::crc32(c, bytes.data() + pos, n);
    pos += n;
  }
  return static_cast<std::uint32_t>(c);
}

std::vector<std::uint8_t> serialize_model(const model::ModelGraph& m) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.i64(m.input.channels);
  w.i64(m.input.height);
  w.i64(m.input.width);
  w.i64(m.input.classes);
  w.u32(static_cast<std::uint32_t>(m.layers.size()));
  std::uint64_t offset = 0;
  for (const auto& l : m.layers) {
    w.u32(static_cast<std::uint32_t>(l.kind));
    std::uint32_t eps_bits;
    std::memcpy(&eps_bits, &l.eps, 4);
    const std::int64_t geom[kGeometryFields] = {l.c_in,
                                                l.c_out,
                                                l.kh,
                                                l.kw,
                                                l.attrs.stride_h,
                                                l.attrs.stride_w,
                                                l.attrs.pad_h,
                                                l.attrs.pad_w,
                                                l.factorized ? 1 : 0,
                                                l.rank,
                                                static_cast<std::int64_t>(l.scheme),
                                                l.has_bias ? 1 : 0,
                                                l.pool,
                                                static_cast<std::int64_t>(eps_bits)};
    for (auto g : geom) w.i64(g);
    const auto tensors = layer_tensors(l);
    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const Tensor* t : tensors) {
      w.u32(static_cast<std::uint32_t>(t->rank()));
      for (auto d : t->shape()) w.i64(d);
      const std::uint64_t bytes = t->numel() * 4;
      w.u64(offset);
      w.u64(bytes);
      offset += bytes;
    }
  }
  w.u64(offset);
  for (const auto& l : m.layers)
    for (const Tensor* t : layer_tensors(l)) w.bytes(t->ptr(), t->numel() * 4);
  const std::uint32_t c = crc32(w.buffer());
  w.u32(c);
  return std::move(w.buffer());
}

model::ModelGraph parse_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    std::size_t at = 0;
    while (at < std::min<std::size_t>(4, bytes.size()) && bytes[at] == kMagic[at]) ++at;
    throw FormatError("offset " + std::to_string(at) + ": bad magic, expected \"DFC1\"");
  }
  if (bytes.size() < 8) throw FormatError("offset 4: truncated container");
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body, 4);
  if (crc32(bytes.first(body)) != stored) {
    throw FormatError("offset " + std::to_string(body) + ": checksum mismatch");
  }

  Reader r(bytes, body);
  r.read<std::uint32_t>("magic");
  const auto ver_at = r.pos();
  if (r.read<std::uint32_t>("version") != kVersion) r.fail(ver_at, "unsupported version");
  model::ModelGraph m;
  const auto in_at = r.pos();
  m.input.channels = r.read<std::int64_t>("input spec");
  m.input.height = r.read<std::int64_t>("input spec");
  m.input.width = r.read<std::int64_t>("input spec");
  m.input.classes = r.read<std::int64_t>("input spec");
  for (auto v : {m.input.channels, m.input.height, m.input.width, m.input.classes}) {
    if (v < 1 || v > kMaxExtent) r.fail(in_at, "input extent out of range");
  }
  const auto count_at = r.pos();
  const auto n_layers = r.read<std::uint32_t>("layer count");
  if (n_layers == 0 || n_layers > kMaxLayers) r.fail(count_at, "layer count out of range");

  std::vector<std::vector<TensorRef>> refs;
  for (std::uint32_t li = 0; li < n_layers; ++li) {
    const auto kind_at = r.pos();
    const auto kind = r.read<std::uint32_t>("layer kind");
    if (kind > static_cast<std::uint32_t>(model::LayerKind::kFlatten)) {
      r.fail(kind_at, "unknown layer kind " + std::to_string(kind));
    }
    const auto geom_at = r.pos();
    std::int64_t g[kGeometryFields];
    for (auto& v : g) v = r.read<std::int64_t>("layer geometry");
    for (int i = 0; i < 13; ++i) {
      if (g[i] < 0 || g[i] > kMaxExtent) r.fail(geom_at, "layer geometry out of range");
    }
    if (g[13] < 0 || g[13] > 0xffffffffLL) r.fail(geom_at, "bad batchnorm epsilon");
    model::Layer l;
    l.kind = static_cast<model::LayerKind>(kind);
    l.c_in = g[0];
    l.c_out = g[1];
    l.kh = static_cast<int>(g[2]);
    l.kw = static_cast<int>(g[3]);
    l.attrs = {static_cast<int>(g[4]), static_cast<int>(g[5]), static_cast<int>(g[6]),
               static_cast<int>(g[7])};
    if (g[8] > 1 || g[11] > 1 || (g[10] != 1 && g[10] != 2)) {
      r.fail(geom_at, "layer flags out of range");
    }
    l.factorized = g[8] == 1;
    l.rank = g[9];
    l.scheme = static_cast<linalg::Scheme>(g[10]);
    l.has_bias = g[11] == 1;
    l.pool = static_cast<int>(g[12]);
    const auto eps_bits = static_cast<std::uint32_t>(g[13]);
    std::memcpy(&l.eps, &eps_bits, 4);
    if (!(l.eps > 0.0f) || !std::isfinite(l.eps)) r.fail(geom_at, "bad batchnorm epsilon");
    if (l.is_weighted() && (l.kh < 1 || l.kw < 1 || l.attrs.stride_h < 1 || l.attrs.stride_w < 1)) {
      r.fail(geom_at, "kernel and stride must be positive");
    }

    const auto tc_at = r.pos();
    const auto n_tensors = r.read<std::uint32_t>("tensor count");
    if (n_tensors != layer_tensors(l).size()) {
      r.fail(tc_at, "layer " + std::to_string(li) + " lists " + std::to_string(n_tensors) +
                        " tensors, expected " + std::to_string(layer_tensors(l).size()));
    }
    std::vector<TensorRef> lr;
    for (std::uint32_t t = 0; t < n_tensors; ++t) {
      const auto nd_at = r.pos();
      const auto nd = r.read<std::uint32_t>("tensor rank");
      if (nd < 1 || nd > 4) r.fail(nd_at, "tensor rank out of range");
      TensorRef ref;
      for (std::uint32_t d = 0; d < nd; ++d) {
        const auto dim = r.read<std::int64_t>("tensor dims");
        if (dim < 1 || dim > kMaxExtent) r.fail(nd_at, "tensor dimension out of range");
        ref.shape.push_back(dim);
      }
      ref.offset = r.read<std::uint64_t>("tensor offset");
      ref.bytes = r.read<std::uint64_t>("tensor size");
      lr.push_back(std::move(ref));
    }
    refs.push_back(std::move(lr));
    m.layers.push_back(std::move(l));
  }
  const auto ps_at = r.pos();
  const auto payload = r.read<std::uint64_t>("payload size");
  if (payload != body - r.pos()) {
    r.fail(ps_at, "payload size " + std::to_string(payload) + " does not match the " +
                      std::to_string(body - r.pos()) + " bytes present");
  }
  const std::size_t base = r.pos();
  std::uint64_t expect = 0;
  for (std::size_t li = 0; li < refs.size(); ++li) {
    auto tensors = layer_tensors(m.layers[li]);  // mutable pointers
    for (std::size_t t = 0; t < refs[li].size(); ++t) {
      const auto& ref = refs[li][t];
      std::uint64_t numel = 1;
      for (auto d : ref.shape) {
        numel *= static_cast<std::uint64_t>(d);
        if (numel > payload) {
          throw FormatError("layer " + std::to_string(li) + ": tensor larger than payload");
        }
      }
      if (ref.offset != expect || ref.bytes != numel * 4 || ref.bytes > payload - ref.offset) {
        throw FormatError("offset " + std::to_string(base + std::min(ref.offset, payload)) +
                          ": layer " + std::to_string(li) + " tensor " + std::to_string(t) +
                          " has an inconsistent offset or size");
      }
      std::vector<float> data(numel);
      std::memcpy(data.data(), bytes.data() + base + ref.offset, ref.bytes);
      Tensor value(ref.shape, std::move(data));
      if (!value.all_finite()) {
        throw FormatError("offset " + std::to_string(base + ref.offset) + ": layer " +
                          std::to_string(li) + " holds non-finite values");
      }
      *tensors[t] = std::move(value);
      expect += ref.bytes;
    }
  }
  if (expect != payload) {
    throw FormatError("offset " + std::to_string(ps_at) + ": tensors cover " +
                      std::to_string(expect) + " of " + std::to_string(payload) +
                      " payload bytes");
  }
  try {
    m.infer_shapes();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("inconsistent model: ") + e.what());
  }
  return m;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  return data;
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

void save_model(const model::ModelGraph& m, const std::string& path) {
  write_file(path, serialize_model(m));
}

model::ModelGraph load_model(const std::string& path) {
  const auto bytes = read_file(path);
  try {
    return parse_model(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

std::uint64_t weight_hash(const model::ModelGraph& m) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& l : m.layers) {
    for (const Tensor* t : layer_tensors(l)) {
      const auto* p = reinterpret_cast<const std::uint8_t*>(t->ptr());
      for (std::size_t i = 0; i < t->numel() * 4; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
      }
    }
  }
  return h;
}

void Dataset::gather(std::span<const std::int64_t> idx, Tensor& x, std::vector<int>& y) const {
  const std::int64_t rec = channels * height * width;
  const auto n = static_cast<std::int64_t>(idx.size());
  x = Tensor({n, channels, height, width});
  y.resize(idx.size());
  for (std::int64_t i = 0; i < n; ++i) {
    const auto s = idx[i];
    if (s < 0 || s >= size()) throw std::out_of_range("dataset index out of range");
    std::copy_n(images.ptr() + s * rec, rec, x.ptr() + i * rec);
    y[i] = labels[s];
  }
}

Dataset decode(const RawDataset& raw) {
  Dataset d;
  d.channels = raw.channels;
  d.height = raw.height;
  d.width = raw.width;
  d.classes = raw.classes;
  const auto n = raw.count();
  std::vector<float> px(raw.pixels.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<float>(raw.pixels[i]) / 255.0f;
  d.images = n > 0 ? Tensor({n, raw.channels, raw.height, raw.width}, std::move(px)) : Tensor();
  d.labels.assign(raw.labels.begin(), raw.labels.end());
  return d;
}

DataFiles data_files(const std::string& path) {
  std::string stem = path;
  if (stem.size() > 4 && stem.compare(stem.size() - 4, 4, ".bin") == 0) {
    stem.resize(stem.size() - 4);
  }
  return {stem + ".bin", stem + ".meta"};
}

namespace {

std::string meta_body(const RawDataset& raw, std::uint32_t data_crc) {
  std::ostringstream os;
  os << "width=" << raw.width << "\n"
     << "height=" << raw.height << "\n"
     << "channels=" << raw.channels << "\n"
     << "classes=" << raw.classes << "\n"
     << "count=" << raw.count() << "\n"
     << "data_crc32=" << data_crc << "\n";
  return os.str();
}

std::vector<std::uint8_t> records(const RawDataset& raw) {
  const auto rec = raw.record_size();
  std::vector<std::uint8_t> bin;
  bin.reserve(static_cast<std::size_t>(raw.count() * (rec + 1)));
  for (std::int64_t i = 0; i < raw.count(); ++i) {
    bin.push_back(raw.labels[i]);
    bin.insert(bin.end(), raw.pixels.begin() + i * rec, raw.pixels.begin() + (i + 1) * rec);
  }
  return bin;
}

std::uint32_t text_crc(const std::string& s) {
  return crc32({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

std::int64_t parse_int(const std::string& key, const std::string& v, std::int64_t max) {
  if (v.empty() || v.size() > 18 || v.find_first_not_of("0123456789") != std::string::npos) {
    throw FormatError("meta: bad value for " + key + ": '" + v + "'");
  }
  const auto x = std::stoll(v);
  if (x > max) throw FormatError("meta: " + key + " out of range");
  return x;
}

}  // namespace

std::string serialize_meta(const RawDataset& raw) {
  const auto bin = records(raw);
  const auto body = meta_body(raw, crc32(bin));
  return body + "meta_crc32=" + std::to_string(text_crc(body)) + "\n";
}

RawDataset parse_dataset(const std::string& meta_text, std::span<const std::uint8_t> bin) {
  const std::string tag = "meta_crc32=";
  const auto at = meta_text.rfind(tag);
  if (at == std::string::npos || (at != 0 && meta_text[at - 1] != '\n')) {
    throw FormatError("meta: missing meta_crc32 line");
  }
  const std::string body = meta_text.substr(0, at);
  std::string crc_line = meta_text.substr(at + tag.size());
  if (crc_line.empty() || crc_line.back() != '\n') {
    throw FormatError("meta: offset " + std::to_string(meta_text.size()) +
                      ": missing final newline");
  }
  crc_line.pop_back();
  if (parse_int("meta_crc32", crc_line, 0xffffffffLL) != text_crc(body)) {
    throw FormatError("meta: checksum mismatch");
  }
  std::map<std::string, std::string> kv;
  std::istringstream in(body);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("meta: malformed line '" + line + "'");
    if (!kv.emplace(line.substr(0, eq), line.substr(eq + 1)).second) {
      throw FormatError("meta: duplicate key '" + line.substr(0, eq) + "'");
    }
  }
  for (const char* key : {"width", "height", "channels", "classes", "count", "data_crc32"}) {
    if (!kv.count(key)) throw FormatError(std::string("meta: missing key ") + key);
  }
  if (kv.size() != 6) throw FormatError("meta: unexpected keys");
  RawDataset raw;
  raw.width = parse_int("width", kv["width"], 4096);
  raw.height = parse_int("height", kv["height"], 4096);
  raw.channels = parse_int("channels", kv["channels"], 64);
  raw.classes = parse_int("classes", kv["classes"], 256);
  const auto count = parse_int("count", kv["count"], std::int64_t{1} << 40);
  const auto data_crc = parse_int("data_crc32", kv["data_crc32"], 0xffffffffLL);
  if (raw.width < 1 || raw.height < 1 || raw.channels < 1 || raw.classes < 1) {
    throw FormatError("meta: extents must be positive");
  }
  const auto rec = raw.record_size();
  if (static_cast<std::uint64_t>(count) * static_cast<std::uint64_t>(rec + 1) != bin.size()) {
    throw FormatError("data: " + std::to_string(bin.size()) + " bytes, meta implies " +
                      std::to_string(count) + " records of " + std::to_string(rec + 1));
  }
  if (crc32(bin) != static_cast<std::uint32_t>(data_crc)) {
    throw FormatError("data: checksum mismatch");
  }
  raw.labels.resize(static_cast<std::size_t>(count));
  raw.pixels.resize(static_cast<std::size_t>(count * rec));
  for (std::int64_t i = 0; i < count; ++i) {
    const std::uint8_t* p = bin.data() + i * (rec + 1);
    if (p[0] >= raw.classes) {
      throw FormatError("data: offset " + std::to_string(i * (rec + 1)) + ": label " +
                        std::to_string(p[0]) + " >= classes");
    }
    raw.labels[i] = p[0];
    std::copy_n(p + 1, rec, raw.pixels.begin() + i * rec);
  }
  return raw;
}

void save_dataset(const RawDataset& raw, const std::string& path) {
  const auto files = data_files(path);
  write_file(files.bin, records(raw));
  const auto meta = serialize_meta(raw);
  write_file(files.meta, {reinterpret_cast<const std::uint8_t*>(meta.data()), meta.size()});
}

RawDataset load_raw_dataset(const std::string& path) {
  const auto files = data_files(path);
  const auto meta = read_file(files.meta);
  const auto bin = read_file(files.bin);
  try {
    return parse_dataset(std::string(meta.begin(), meta.end()), bin);
  } catch (const FormatError& e) {
    throw FormatError(files.bin + ": " + e.what());
  }
}

Dataset load_dataset(const std::string& path) { return decode(load_raw_dataset(path)); }

SynthResult synth_dataset(std::uint64_t seed, const SynthSpec& spec) {
  if (spec.classes < 1 || spec.classes > 256 || spec.count < spec.classes) {
    throw std::invalid_argument("synth_dataset: need 1 <= classes <= 256 and count >= classes");
  }
  if (spec.channels < 1 || spec.height < 1 || spec.width < 1 || !(spec.noise > 0.0) ||
      spec.smoothing < 0) {
    throw std::invalid_argument("synth_dataset: extents and noise must be positive");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto dim = spec.channels * spec.height * spec.width;
  SynthResult res;
  std::vector<std::vector<double>> z(spec.classes, std::vector<double>(dim));
  for (auto& p : z)
    for (auto& v : p) v = normal(rng);
  // Box blur within each channel plane; border pixels average their in-bounds
  // neighbours.
  std::vector<double> tmp(dim);
  for (int pass = 0; pass < spec.smoothing; ++pass)
    for (auto& p : z) {
      for (std::int64_t c = 0; c < spec.channels; ++c)
        for (std::int64_t y = 0; y < spec.height; ++y)
          for (std::int64_t x = 0; x < spec.width; ++x) {
            double sum = 0.0;
            int cnt = 0;
            for (std::int64_t dy = -1; dy <= 1; ++dy)
              for (std::int64_t dx = -1; dx <= 1; ++dx) {
                const auto yy = y + dy, xx = x + dx;
                if (yy < 0 || yy >= spec.height || xx < 0 || xx >= spec.width) continue;
                sum += p[(c * spec.height + yy) * spec.width + xx];
                ++cnt;
              }
            tmp[(c * spec.height + y) * spec.width + x] = sum / cnt;
          }
      p = tmp;
    }
  double min_dist = spec.classes > 1 ? std::numeric_limits<double>::max() : 1.0;
  for (std::int64_t a = 0; a < spec.classes; ++a)
    for (std::int64_t b = a + 1; b < spec.classes; ++b) {
      double d = 0.0;
      for (std::int64_t i = 0; i < dim; ++i) d += (z[a][i] - z[b][i]) * (z[a][i] - z[b][i]);
      min_dist = std::min(min_dist, std::sqrt(d));
    }
  const double amp = spec.separation * spec.noise / min_dist;
  res.prototypes.assign(spec.classes, std::vector<double>(dim));
  for (std::int64_t c = 0; c < spec.classes; ++c)
    for (std::int64_t i = 0; i < dim; ++i) res.prototypes[c][i] = 128.0 + amp * z[c][i];

  std::vector<std::uint8_t> labels(spec.count);
  for (std::int64_t i = 0; i < spec.count; ++i) labels[i] = static_cast<std::uint8_t>(i % spec.classes);
  std::shuffle(labels.begin(), labels.end(), rng);
  RawDataset& raw = res.data;
  raw.channels = spec.channels;
  raw.height = spec.height;
  raw.width = spec.width;
  raw.classes = spec.classes;
  raw.labels = labels;
  raw.pixels.resize(static_cast<std::size_t>(spec.count * dim));
  for (std::int64_t s = 0; s < spec.count; ++s) {
    const auto& proto = res.prototypes[labels[s]];
    for (std::int64_t i = 0; i < dim; ++i) {
      const double v = std::round(proto[i] + spec.noise * normal(rng));
      raw.pixels[s * dim + i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
  }
  return res;
}

std::vector<RawDataset> split(const RawDataset& raw, const std::vector<std::int64_t>& sizes) {
  const auto total = std::accumulate(sizes.begin(), sizes.end(), std::int64_t{0});
  if (total > raw.count()) {
    throw std::invalid_argument("split: sizes sum to " + std::to_string(total) + " of " +
                                std::to_string(raw.count()) + " records");
  }
  std::vector<RawDataset> out;
  std::int64_t at = 0;
  const auto rec = raw.record_size();
  for (auto n : sizes) {
    if (n < 0) throw std::invalid_argument("split: negative size");
    RawDataset part;
    part.channels = raw.channels;
    part.height = raw.height;
    part.width = raw.width;
    part.classes = raw.classes;
    part.labels.assign(raw.labels.begin() + at, raw.labels.begin() + at + n);
    part.pixels.assign(raw.pixels.begin() + at * rec, raw.pixels.begin() + (at + n) * rec);
    out.push_back(std::move(part));
    at += n;
  }
  return out;
}

}  // namespace dfc::io
