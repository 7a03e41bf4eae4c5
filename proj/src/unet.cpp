#include "scenediff/unet.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "scenediff/errors.hpp"
#include "scenediff/rng.hpp"

namespace scenediff {

namespace {

Tensor4 concat_channels(const Tensor4& a, const Tensor4& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w)
    throw ShapeError("concat: shapes " + to_string(sa) + " and " + to_string(sb) +
                     " disagree outside the channel axis");
  Tensor4 out(sa.n, sa.c + sb.c, sa.h, sa.w);
  const int64_t plane = static_cast<int64_t>(sa.h) * sa.w;
  for (int n = 0; n < sa.n; ++n) {
    for (int c = 0; c < sa.c; ++c)
      std::memcpy(out.plane(n, c), a.plane(n, c), plane * sizeof(float));
    for (int c = 0; c < sb.c; ++c)
      std::memcpy(out.plane(n, sa.c + c), b.plane(n, c), plane * sizeof(float));
  }
  return out;
}

std::pair<Tensor4, Tensor4> split_channels(const Tensor4& x, int c_first) {
  const auto& s = x.shape();
  Tensor4 a(s.n, c_first, s.h, s.w);
  Tensor4 b(s.n, s.c - c_first, s.h, s.w);
  const int64_t plane = static_cast<int64_t>(s.h) * s.w;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < c_first; ++c)
      std::memcpy(a.plane(n, c), x.plane(n, c), plane * sizeof(float));
    for (int c = c_first; c < s.c; ++c)
      std::memcpy(b.plane(n, c - c_first), x.plane(n, c), plane * sizeof(float));
  }
  return {std::move(a), std::move(b)};
}

void add_into(Tensor4& dst, const Tensor4& src) {
  require_same_shape(dst, src, "gradient accumulation");
  auto d = dst.data();
  auto s = src.data();
  for (size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace

void UNetConfig::validate() const {
  if (encoder_widths.empty()) throw ValueError("unet config: encoder widths must be non-empty");
  for (size_t i = 0; i < encoder_widths.size(); ++i) {
    if (encoder_widths[i] < 1) throw ValueError("unet config: widths must be positive");
    if (i > 0 && encoder_widths[i] <= encoder_widths[i - 1])
      throw ValueError("unet config: encoder widths must be strictly increasing");
  }
  if (input_channels < 1 || output_channels < 1)
    throw ValueError("unet config: channel counts must be positive");
  const int div = 1 << depth();
  if (input_height < 1 || input_width < 1 || input_height % div != 0 || input_width % div != 0)
    throw ValueError("unet config: input size " + std::to_string(input_height) + "x" +
                     std::to_string(input_width) + " must be divisible by 2^depth = " +
                     std::to_string(div));
}

UNetConfig preset(std::string_view name) {
  UNetConfig cfg;
  if (name == "A") {
    cfg.encoder_widths = {16, 32, 64, 128, 256};
  } else if (name == "B") {
    cfg.encoder_widths = {16, 32, 64};
  } else if (name == "C") {
    cfg.encoder_widths = {16, 32, 64, 128};
  } else {
    throw ValueError("unknown preset \"" + std::string(name) + "\" (expected A, B or C)");
  }
  return cfg;
}

UNetModel UNetModel::build(const UNetConfig& config, uint64_t seed) {
  config.validate();
  UNetModel m;
  m.config_ = config;
  Rng rng(seed);

  int prev = config.input_channels;
  for (int width : config.encoder_widths) {
    EncoderBlock blk;
    blk.conv = ConvParams::make(width, prev, 3, 1, 1);
    blk.bn = BatchNormParams::make(width);
    blk.down = ConvParams::make(width, width, 3, 2, 1);
    init_conv(blk.conv, rng);
    init_conv(blk.down, rng);
    m.encoder_.push_back(std::move(blk));
    prev = width;
  }

  int cur = config.encoder_widths.back();
  for (int j = config.depth() - 1; j >= 0; --j) {
    const int width = config.encoder_widths[static_cast<size_t>(j)];
    DecoderBlock blk;
    blk.up = ConvParams::make(width, cur, 2, 2, 0);
    blk.conv = ConvParams::make(width, config.use_skip ? 2 * width : width, 3, 1, 1);
    blk.bn = BatchNormParams::make(width);
    init_conv(blk.up, rng);
    init_conv(blk.conv, rng);
    m.decoder_.push_back(std::move(blk));
    cur = width;
  }

  m.head_ = ConvParams::make(config.output_channels, config.encoder_widths.front(), 1, 1, 0);
  init_conv(m.head_, rng);
  return m;
}

Tensor4 UNetModel::forward(const Tensor4& input, bool training, Trace* trace) {
  const auto& s = input.shape();
  if (s.c != config_.input_channels || s.h != config_.input_height || s.w != config_.input_width)
    throw ShapeError("unet forward: input " + to_string(s) + " does not match configured (" +
                     std::to_string(config_.input_channels) + "," +
                     std::to_string(config_.input_height) + "," +
                     std::to_string(config_.input_width) + ")");

  Trace t;
  t.input = input;
  Tensor4 x = input;
  for (auto& blk : encoder_) {
    t.enc_conv_in.push_back(x);
    Tensor4 c = conv2d_forward(x, blk.conv);
    t.enc_bn_in.push_back(c);
    Tensor4 b = batchnorm_forward(c, blk.bn, training);
    t.enc_relu_in.push_back(b);
    Tensor4 skip = relu_forward(b);
    t.enc_skip.push_back(skip);
    x = conv2d_forward(skip, blk.down);
  }

  const int depth = config_.depth();
  for (int j = 0; j < depth; ++j) {
    auto& blk = decoder_[static_cast<size_t>(j)];
    t.dec_up_in.push_back(x);
    Tensor4 u = transposed_conv2d_forward(x, blk.up);
    Tensor4 z = config_.use_skip
                    ? concat_channels(u, t.enc_skip[static_cast<size_t>(depth - 1 - j)])
                    : std::move(u);
    t.dec_conv_in.push_back(z);
    Tensor4 c = conv2d_forward(t.dec_conv_in.back(), blk.conv);
    t.dec_bn_in.push_back(c);
    Tensor4 b = batchnorm_forward(c, blk.bn, training);
    t.dec_relu_in.push_back(b);
    x = relu_forward(b);
  }

  t.head_in = x;
  t.output = sigmoid_forward(conv2d_forward(x, head_));
  t.training = training;
  Tensor4 out = t.output;
  if (trace) *trace = std::move(t);
  return out;
}

Tensor4 UNetModel::backward(const Trace& t, const Tensor4& grad_output) {
  const int depth = config_.depth();
  Tensor4 g = sigmoid_backward(t.output, grad_output);
  g = conv2d_backward(t.head_in, head_, g);

  std::vector<Tensor4> skip_grads(static_cast<size_t>(depth));
  for (int j = depth - 1; j >= 0; --j) {
    auto& blk = decoder_[static_cast<size_t>(j)];
    g = relu_backward(t.dec_relu_in[static_cast<size_t>(j)], g);
    g = batchnorm_backward(t.dec_bn_in[static_cast<size_t>(j)], blk.bn, g, t.training);
    g = conv2d_backward(t.dec_conv_in[static_cast<size_t>(j)], blk.conv, g);
    if (config_.use_skip) {
      auto [g_up, g_skip] = split_channels(g, blk.up.out_channels());
      skip_grads[static_cast<size_t>(depth - 1 - j)] = std::move(g_skip);
      g = transposed_conv2d_backward(t.dec_up_in[static_cast<size_t>(j)], blk.up, g_up);
    } else {
      g = transposed_conv2d_backward(t.dec_up_in[static_cast<size_t>(j)], blk.up, g);
    }
  }

  for (int i = depth - 1; i >= 0; --i) {
    auto& blk = encoder_[static_cast<size_t>(i)];
    g = conv2d_backward(t.enc_skip[static_cast<size_t>(i)], blk.down, g);
    if (config_.use_skip) add_into(g, skip_grads[static_cast<size_t>(i)]);
    g = relu_backward(t.enc_relu_in[static_cast<size_t>(i)], g);
    g = batchnorm_backward(t.enc_bn_in[static_cast<size_t>(i)], blk.bn, g, t.training);
    g = conv2d_backward(t.enc_conv_in[static_cast<size_t>(i)], blk.conv, g);
  }
  return g;
}

std::vector<ParamView> UNetModel::params() {
  std::vector<ParamView> out;
  auto append = [&out](std::vector<ParamView> views) {
    for (auto& v : views) out.push_back(v);
  };
  for (auto& blk : encoder_) {
    append(collect_params(blk.conv));
    append(collect_params(blk.bn));
    append(collect_params(blk.down));
  }
  for (auto& blk : decoder_) {
    append(collect_params(blk.up));
    append(collect_params(blk.conv));
    append(collect_params(blk.bn));
  }
  append(collect_params(head_));
  return out;
}

void UNetModel::zero_grad() {
  for (auto& blk : encoder_) {
    blk.conv.zero_grad();
    blk.bn.zero_grad();
    blk.down.zero_grad();
  }
  for (auto& blk : decoder_) {
    blk.up.zero_grad();
    blk.conv.zero_grad();
    blk.bn.zero_grad();
  }
  head_.zero_grad();
}

int64_t UNetModel::param_count() const {
  int64_t total = 0;
  for (const auto& blk : encoder_)
    total += blk.conv.param_count() + blk.bn.param_count() + blk.down.param_count();
  for (const auto& blk : decoder_)
    total += blk.up.param_count() + blk.conv.param_count() + blk.bn.param_count();
  return total + head_.param_count();
}

Tensor4 forward_pair(UNetModel& m, const ImagePair& pair, bool training) {
  const auto& cfg = m.config();
  ImagePair resized = pair;
  if (pair.before.height != cfg.input_height || pair.before.width != cfg.input_width) {
    resized.before = resize_bilinear(pair.before, cfg.input_height, cfg.input_width);
    resized.after = resize_bilinear(pair.after, cfg.input_height, cfg.input_width);
  }
  const std::vector<ImagePair> batch{std::move(resized)};
  return m.forward(pairs_to_tensor(batch), training);
}

ChangeMaps scores_to_maps(const Tensor4& scores, int batch_index, float threshold) {
  const auto& s = scores.shape();
  if (s.c != 4) throw ShapeError("scores_to_maps: expected 4 channels, got " + to_string(s));
  if (batch_index < 0 || batch_index >= s.n)
    throw ShapeError("scores_to_maps: batch index " + std::to_string(batch_index) +
                     " out of range for " + to_string(s));
  ChangeMaps maps = ChangeMaps::make(s.h, s.w);
  for (int c = 0; c < 3; ++c) {
    const float* plane = scores.plane(batch_index, c);
    auto& dst = maps.maps[static_cast<size_t>(c)];
    for (int64_t i = 0; i < static_cast<int64_t>(s.h) * s.w; ++i)
      dst[static_cast<size_t>(i)] = plane[i] >= threshold ? 1 : 0;
  }
  maps.derive_notchanged();
  return maps;
}

ChangeMaps predict(UNetModel& m, const ImagePair& pair, float threshold) {
  if (threshold < 0.0f || threshold > 1.0f)
    throw ValueError("predict: threshold must lie in [0,1]");
  return scores_to_maps(forward_pair(m, pair, false), 0, threshold);
}

// ---- checkpoint ------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'S', 'D', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void append_u32le(std::string& buf, uint32_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
  buf.push_back(static_cast<char>((v >> 16) & 0xff));
  buf.push_back(static_cast<char>((v >> 24) & 0xff));
}

void append_floats_le(std::string& buf, std::span<const float> values) {
  for (float f : values) append_u32le(buf, std::bit_cast<uint32_t>(f));
}

// State blobs in the documented checkpoint order (includes running stats).
template <typename Model, typename Span>
void for_each_state_blob(Model& m, const std::function<void(Span)>& fn) {
  for (auto& blk : m.encoder()) {
    fn(blk.conv.weights.data());
    fn(Span(blk.conv.bias));
    fn(Span(blk.bn.gamma));
    fn(Span(blk.bn.beta));
    fn(Span(blk.bn.running_mean));
    fn(Span(blk.bn.running_var));
    fn(blk.down.weights.data());
    fn(Span(blk.down.bias));
  }
  for (auto& blk : m.decoder()) {
    fn(blk.up.weights.data());
    fn(Span(blk.up.bias));
    fn(blk.conv.weights.data());
    fn(Span(blk.conv.bias));
    fn(Span(blk.bn.gamma));
    fn(Span(blk.bn.beta));
    fn(Span(blk.bn.running_mean));
    fn(Span(blk.bn.running_var));
  }
  fn(m.head().weights.data());
  fn(Span(m.head().bias));
}

}  // namespace

void save_checkpoint(const UNetModel& m, const std::filesystem::path& path) {
  const auto& cfg = m.config();
  nlohmann::json cfg_json{{"input_channels", cfg.input_channels},
                          {"encoder_widths", cfg.encoder_widths},
                          {"output_channels", cfg.output_channels},
                          {"use_skip", cfg.use_skip},
                          {"input_size", {cfg.input_height, cfg.input_width}}};
  const std::string cfg_text = cfg_json.dump();

  std::string buf;
  buf.append(kMagic, 4);
  append_u32le(buf, kVersion);
  append_u32le(buf, static_cast<uint32_t>(cfg_text.size()));
  buf.append(cfg_text);
  for_each_state_blob<const UNetModel, std::span<const float>>(
      m, [&buf](std::span<const float> blob) { append_floats_le(buf, blob); });

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

UNetModel load_checkpoint(const std::filesystem::path& path,
                          const std::optional<UNetConfig>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  size_t pos = 0;
  auto need = [&](size_t bytes, const char* what) {
    if (pos + bytes > buf.size())
      throw FormatError("checkpoint " + path.string() + ": truncated while reading " + what);
  };
  need(4, "magic");
  if (std::memcmp(buf.data(), kMagic, 4) != 0)
    throw FormatError("checkpoint " + path.string() + ": bad magic bytes");
  pos = 4;

  auto read_u32 = [&](const char* what) {
    need(4, what);
    const auto b = reinterpret_cast<const unsigned char*>(buf.data() + pos);
    pos += 4;
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
  };
  const uint32_t version = read_u32("version");
  if (version != kVersion)
    throw FormatError("checkpoint " + path.string() + ": unsupported version " +
                      std::to_string(version));

  const uint32_t cfg_len = read_u32("config length");
  need(cfg_len, "config json");
  UNetConfig cfg;
  try {
    const auto doc = nlohmann::json::parse(buf.substr(pos, cfg_len));
    cfg.input_channels = doc.at("input_channels").get<int>();
    cfg.encoder_widths = doc.at("encoder_widths").get<std::vector<int>>();
    cfg.output_channels = doc.at("output_channels").get<int>();
    cfg.use_skip = doc.at("use_skip").get<bool>();
    cfg.input_height = doc.at("input_size").at(0).get<int>();
    cfg.input_width = doc.at("input_size").at(1).get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint " + path.string() + ": bad config block: " + e.what());
  }
  pos += cfg_len;

  if (expected && !(*expected == cfg))
    throw FormatError("checkpoint " + path.string() + ": config does not match the expected one");

  UNetModel m = UNetModel::build(cfg, 0);
  for_each_state_blob<UNetModel, std::span<float>>(m, [&](std::span<float> blob) {
    need(blob.size() * 4, "parameter blob");
    for (float& f : blob) {
      const auto b = reinterpret_cast<const unsigned char*>(buf.data() + pos);
      const uint32_t u = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
                         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
      f = std::bit_cast<float>(u);
      pos += 4;
    }
  });
  if (pos != buf.size())
    throw FormatError("checkpoint " + path.string() + ": trailing bytes after parameters");
  return m;
}

DifferentiableFn unet_fn(UNetModel& m) {
  DifferentiableFn fn;
  fn.forward = [&m](const Tensor4& x) {
    UNetModel scratch = m;  // probes must not drift the running stats
    return scratch.forward(x, true);
  };
  fn.backward = [&m](const Tensor4& x, const Tensor4& go) {
    UNetModel::Trace trace;
    (void)m.forward(x, true, &trace);
    return m.backward(trace, go);
  };
  fn.params = m.params();
  fn.zero_grad = [&m] { m.zero_grad(); };
  return fn;
}

}  // namespace scenediff
