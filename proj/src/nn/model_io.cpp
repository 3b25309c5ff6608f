#include "mbbn/nn/model_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "mbbn/core/serialize.hpp"
#include "mbbn/quant/encoder.hpp"

namespace mbbn::nn {
namespace {

constexpr std::uint64_t kMaxLayers = 1u << 16;
constexpr std::uint64_t kMaxRank = 8;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& key) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw IoError("bad number for " + key + ": '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s, const std::string& key) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw IoError("bad integer for " + key + ": '" + s + "'");
  return v;
}

bool parse_flag(const std::string& s, const std::string& key) {
  if (s == "1") return true;
  if (s == "0") return false;
  throw IoError("bad flag for " + key + ": '" + s + "'");
}

std::string layer_line(const LayerSpec& s) {
  std::ostringstream os;
  os << "layer kind=" << to_string(s.kind);
  switch (s.kind) {
    case LayerKind::dense:
    case LayerKind::conv2d:
      os << " in=" << s.in << " out=" << s.out;
      if (s.kind == LayerKind::conv2d) {
        os << " kh=" << s.kernel_h << " kw=" << s.kernel_w << " stride=" << s.stride << " pad=" << s.padding;
      }
      os << " M=" << s.act_bits << " K=" << s.weight_bits << " grid=" << to_string(s.grid) << " r=" << format_double(s.r)
         << " follows_bn=" << s.follows_bn << " full_precision=" << s.full_precision
         << " plane_weights=" << s.plane_weights << " bias=" << s.has_bias;
      break;
    case LayerKind::batchnorm:
      os << " channels=" << s.in << " eps=" << format_double(s.eps);
      break;
    case LayerKind::activation:
      os << " fn=" << to_string(s.activation);
      break;
  }
  return os.str();
}

LayerSpec parse_layer_line(const std::string& line) {
  std::istringstream ls(line);
  std::string word;
  ls >> word;
  if (word != "layer") throw IoError("expected a layer line, got '" + line + "'");
  std::map<std::string, std::string> kv;
  while (ls >> word) {
    const auto eq = word.find('=');
    if (eq == std::string::npos) throw IoError("malformed field '" + word + "'");
    kv[word.substr(0, eq)] = word.substr(eq + 1);
  }
  auto take = [&](const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw IoError("layer line missing '" + key + "': " + line);
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto bits = [&](const std::string& key) {
    const auto v = parse_u64(take(key), key);
    if (v < kMinBits || v > kMaxBits) throw IoError(key + " out of range");
    return static_cast<int>(v);
  };

  LayerSpec s;
  try {
    s.kind = parse_layer_kind(take("kind"));
  } catch (const ConfigError& e) {
    throw IoError(e.what());
  }
  switch (s.kind) {
    case LayerKind::dense:
    case LayerKind::conv2d:
      s.in = parse_u64(take("in"), "in");
      s.out = parse_u64(take("out"), "out");
      if (s.kind == LayerKind::conv2d) {
        s.kernel_h = parse_u64(take("kh"), "kh");
        s.kernel_w = parse_u64(take("kw"), "kw");
        s.stride = parse_u64(take("stride"), "stride");
        s.padding = parse_u64(take("pad"), "pad");
      }
      s.act_bits = bits("M");
      s.weight_bits = bits("K");
      try {
        s.grid = parse_grid(take("grid"));
      } catch (const ConfigError& e) {
        throw IoError(e.what());
      }
      s.r = parse_double(take("r"), "r");
      s.follows_bn = parse_flag(take("follows_bn"), "follows_bn");
      s.full_precision = parse_flag(take("full_precision"), "full_precision");
      s.plane_weights = parse_flag(take("plane_weights"), "plane_weights");
      s.has_bias = parse_flag(take("bias"), "bias");
      break;
    case LayerKind::batchnorm:
      s.in = s.out = parse_u64(take("channels"), "channels");
      s.eps = parse_double(take("eps"), "eps");
      break;
    case LayerKind::activation:
      try {
        s.activation = parse_activation(take("fn"));
      } catch (const ConfigError& e) {
        throw IoError(e.what());
      }
      break;
  }
  if (!kv.empty()) throw IoError("unknown field '" + kv.begin()->first + "' in: " + line);
  return s;
}

std::string read_line(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("model file truncated in header");
  return line;
}

std::string header_value(const std::string& line, const std::string& key) {
  const std::string prefix = key + "=";
  if (line.rfind(prefix, 0) != 0) throw IoError("expected '" + prefix + "...', got '" + line + "'");
  return line.substr(prefix.size());
}

void write_quantized(std::ostream& os, const QuantizedTensor& q) {
  io::write_u64(os, static_cast<std::uint64_t>(q.bits));
  io::write_u64(os, q.grid == GridKind::odd ? 1 : 0);
  io::write_f64(os, q.t);
  io::write_f64(os, q.d);
  io::write_u64(os, q.shape.size());
  for (auto d : q.shape) io::write_u64(os, d);
  for (auto c : q.codes) io::write_i16(os, static_cast<std::int16_t>(c));
}

QuantizedTensor read_quantized(std::istream& is) {
  QuantizedTensor q;
  const auto bits = io::read_u64(is);
  if (bits < kMinBits || bits > kMaxBits) throw IoError("quantized weight bit count out of range");
  q.bits = static_cast<int>(bits);
  const auto grid = io::read_u64(is);
  if (grid > 1) throw IoError("unknown grid tag");
  q.grid = grid == 1 ? GridKind::odd : GridKind::linear;
  q.t = io::read_f64(is);
  q.d = io::read_f64(is);
  const auto rank = io::read_u64(is);
  if (rank > kMaxRank) throw IoError("quantized weight rank too large");
  std::uint64_t n = 1;
  for (std::uint64_t i = 0; i < rank; ++i) {
    const auto d = io::read_u64(is);
    if (d != 0 && n > kMaxElements / d) throw IoError("quantized weight too large");
    n *= d;
    q.shape.push_back(d);
  }
  const std::int64_t limit = q.grid == GridKind::odd ? odd_levels(q.bits) : linear_levels(q.bits);
  q.codes.resize(n);
  for (auto& c : q.codes) {
    c = io::read_i16(is);
    if (c > limit || c < -limit || (q.grid == GridKind::odd && c % 2 == 0)) throw IoError("code off the grid");
  }
  return q;
}

void write_encoded(std::ostream& os, const EncodedMatrix& e) {
  io::write_u64(os, e.rows());
  io::write_u64(os, e.cols());
  io::write_u64(os, static_cast<std::uint64_t>(e.bits()));
  for (const auto& plane : e.to_encoded().planes) write_bitplane(os, plane);
}

EncodedMatrix read_encoded(std::istream& is) {
  const auto rows = io::read_u64(is);
  const auto cols = io::read_u64(is);
  const auto bits = io::read_u64(is);
  if (bits < kMinBits || bits > kMaxBits) throw IoError("encoded weight bit count out of range");
  if (cols != 0 && rows > kMaxElements / cols) throw IoError("encoded weight too large");
  EncodedTensor t{{rows, cols}, static_cast<int>(bits), {}};
  for (std::uint64_t m = 0; m < bits; ++m) {
    t.planes.push_back(read_bitplane(is));
    if (t.planes.back().n_valid != rows * cols) throw IoError("bit plane length does not match weight dims");
  }
  return EncodedMatrix::from_encoded(t);
}

void write_weight(std::ostream& os, const Weight& w) {
  if (const auto* t = std::get_if<Tensor>(&w)) {
    io::write_tensor(os, *t);
  } else if (const auto* q = std::get_if<QuantizedTensor>(&w)) {
    write_quantized(os, *q);
  } else if (const auto* e = std::get_if<EncodedMatrix>(&w)) {
    write_encoded(os, *e);
  } else {
    throw StageError("weight layer without weights");
  }
}

Weight read_weight(std::istream& is, const LayerSpec& spec, Stage stage) {
  const Stage effective = spec.full_precision ? Stage::full : stage;
  switch (effective) {
    case Stage::full:
      return io::read_tensor(is);
    case Stage::quantized:
      return read_quantized(is);
    case Stage::decomposed:
      return read_encoded(is);
  }
  throw IoError("unknown stage");
}

}  // namespace

std::string describe_layers(const ModelState& model) {
  std::string out;
  for (const auto& layer : model.layers) out += layer_line(layer.spec) + "\n";
  return out;
}

void write_model(std::ostream& os, const ModelState& model) {
  validate(model);
  os << kModelMagic << "\n"
     << "stage=" << to_string(model.stage) << "\n"
     << "algorithm=" << to_string(model.algorithm) << "\n"
     << "layers=" << model.layers.size() << "\n"
     << describe_layers(model) << "end\n";
  for (const auto& layer : model.layers) {
    switch (layer.spec.kind) {
      case LayerKind::dense:
      case LayerKind::conv2d:
        io::write_f64(os, layer.act_t);
        io::write_f64(os, layer.weight_t);
        write_weight(os, layer.weight);
        io::write_u64(os, layer.spec.has_bias ? 1 : 0);
        if (layer.spec.has_bias) io::write_tensor(os, layer.bias);
        break;
      case LayerKind::batchnorm:
        io::write_tensor(os, layer.bn.gamma);
        io::write_tensor(os, layer.bn.beta);
        io::write_tensor(os, layer.bn.mean);
        io::write_tensor(os, layer.bn.var);
        break;
      case LayerKind::activation:
        break;
    }
  }
  if (!os) throw IoError("failed writing model");
}

ModelState read_model(std::istream& is) {
  if (read_line(is) != kModelMagic) throw IoError("not a model file (bad magic)");
  ModelState model;
  try {
    model.stage = parse_stage(header_value(read_line(is), "stage"));
    model.algorithm = parse_algorithm(header_value(read_line(is), "algorithm"));
  } catch (const ConfigError& e) {
    throw IoError(e.what());
  }
  const auto n = parse_u64(header_value(read_line(is), "layers"), "layers");
  if (n > kMaxLayers) throw IoError("too many layers");
  for (std::uint64_t i = 0; i < n; ++i) {
    LayerState layer;
    layer.spec = parse_layer_line(read_line(is));
    model.layers.push_back(std::move(layer));
  }
  if (read_line(is) != "end") throw IoError("missing 'end' after layer lines");

  for (auto& layer : model.layers) {
    switch (layer.spec.kind) {
      case LayerKind::dense:
      case LayerKind::conv2d: {
        layer.act_t = io::read_f64(is);
        layer.weight_t = io::read_f64(is);
        layer.weight = read_weight(is, layer.spec, model.stage);
        const auto has_bias = io::read_u64(is);
        if (has_bias > 1 || (has_bias == 1) != layer.spec.has_bias) throw IoError("bias flag disagrees with header");
        if (has_bias) layer.bias = io::read_tensor(is);
        break;
      }
      case LayerKind::batchnorm:
        layer.bn.gamma = io::read_tensor(is);
        layer.bn.beta = io::read_tensor(is);
        layer.bn.mean = io::read_tensor(is);
        layer.bn.var = io::read_tensor(is);
        break;
      case LayerKind::activation:
        break;
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes after model payload");
  try {
    validate(model);
  } catch (const ShapeError& e) {
    throw IoError(std::string("inconsistent model file: ") + e.what());
  }
  return model;
}

void save_model(const std::filesystem::path& path, const ModelState& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_model(os, model);
}

ModelState load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_model(is);
}

std::size_t weight_payload_bytes(const ModelState& model) {
  std::size_t bytes = 0;
  for (const auto& layer : model.layers) {
    if (const auto* t = std::get_if<Tensor>(&layer.weight)) {
      bytes += io::tensor_payload_bytes(*t);
    } else if (const auto* q = std::get_if<QuantizedTensor>(&layer.weight)) {
      bytes += q->codes.size() * sizeof(std::int16_t);
    } else if (const auto* e = std::get_if<EncodedMatrix>(&layer.weight)) {
      bytes += static_cast<std::size_t>(e->bits()) * words_for(e->rows() * e->cols()) * sizeof(std::uint64_t);
    }
  }
  return bytes;
}

}  // namespace mbbn::nn
