#pragma once

#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "scenediff/adam.hpp"
#include "scenediff/changemaps.hpp"
#include "scenediff/dataset.hpp"
#include "scenediff/gradcheck.hpp"
#include "scenediff/layers.hpp"
#include "scenediff/tensor.hpp"

namespace scenediff {

struct UNetConfig {
  int input_channels = 6;
  std::vector<int> encoder_widths;
  int output_channels = 4;
  bool use_skip = true;
  int input_height = 256;
  int input_width = 512;

  int depth() const { return static_cast<int>(encoder_widths.size()); }
  // widths non-empty and strictly increasing; input dims divisible by 2^depth
  void validate() const;
  bool operator==(const UNetConfig&) const = default;
};

// The depth/width configurations compared in the experiments:
// A -> (16,32,64,128,256), B -> (16,32,64), C -> (16,32,64,128).
UNetConfig preset(std::string_view name);

// Encoder f and decoder g. Each encoder level: 3x3 conv + batchnorm + ReLU,
// then a stride-2 3x3 conv. Each decoder level: 2x2 stride-2 transposed conv,
// skip concatenation, 3x3 conv + batchnorm + ReLU. Head: 1x1 conv to the four
// map channels + sigmoid.
class UNetModel {
 public:
  struct EncoderBlock {
    ConvParams conv;
    BatchNormParams bn;
    ConvParams down;
  };
  struct DecoderBlock {
    ConvParams up;
    ConvParams conv;
    BatchNormParams bn;
  };

  // Activations recorded by a traced forward, consumed by backward.
  struct Trace {
    Tensor4 input;
    std::vector<Tensor4> enc_conv_in;   // input of each encoder conv
    std::vector<Tensor4> enc_bn_in;     // conv output
    std::vector<Tensor4> enc_relu_in;   // batchnorm output
    std::vector<Tensor4> enc_skip;      // relu output (skip feature / down input)
    std::vector<Tensor4> dec_up_in;     // decoder block input
    std::vector<Tensor4> dec_conv_in;   // after concat
    std::vector<Tensor4> dec_bn_in;     // conv output
    std::vector<Tensor4> dec_relu_in;   // batchnorm output
    Tensor4 head_in;
    Tensor4 output;  // after sigmoid
    bool training = false;
  };

  static UNetModel build(const UNetConfig& config, uint64_t seed);

  const UNetConfig& config() const { return config_; }

  // (n, 6, h, w) -> (n, 4, h, w), values strictly in (0, 1). Training mode
  // updates batch-norm running statistics.
  Tensor4 forward(const Tensor4& input, bool training = false, Trace* trace = nullptr);

  // Backpropagates grad wrt the traced output; accumulates parameter
  // gradients and returns grad wrt the input.
  Tensor4 backward(const Trace& trace, const Tensor4& grad_output);

  std::vector<ParamView> params();
  void zero_grad();
  int64_t param_count() const;

  std::vector<EncoderBlock>& encoder() { return encoder_; }
  std::vector<DecoderBlock>& decoder() { return decoder_; }
  ConvParams& head() { return head_; }
  const std::vector<EncoderBlock>& encoder() const { return encoder_; }
  const std::vector<DecoderBlock>& decoder() const { return decoder_; }
  const ConvParams& head() const { return head_; }

 private:
  UNetConfig config_;
  std::vector<EncoderBlock> encoder_;
  std::vector<DecoderBlock> decoder_;
  ConvParams head_;
};

// Resizes the pair to the model input size and concatenates the six channels
// (before RGB = 0-2, after RGB = 3-5).
Tensor4 forward_pair(UNetModel& m, const ImagePair& pair, bool training = false);

// Thresholds the forward scores (>= rule) per change channel; notchanged is
// recomputed as the complement so the ChangeMaps invariant holds.
ChangeMaps predict(UNetModel& m, const ImagePair& pair, float threshold);
ChangeMaps scores_to_maps(const Tensor4& scores, int batch_index, float threshold);

// Checkpoint: magic "SDCK", little-endian u32 version = 1, u32 JSON length,
// the UTF-8 JSON config, then float32 little-endian parameter blobs in block
// order (per encoder block: conv w/b, bn gamma/beta/running_mean/running_var,
// down w/b; per decoder block: up w/b, conv w/b, bn quartet; head w/b).
void save_checkpoint(const UNetModel& m, const std::filesystem::path& path);
UNetModel load_checkpoint(const std::filesystem::path& path,
                          const std::optional<UNetConfig>& expected = std::nullopt);

// mse_loss(forward(x)) wired up for gradient checks against the model.
DifferentiableFn unet_fn(UNetModel& m);

}  // namespace scenediff
