// Encoder-decoder assembly: N memory-equipped self-attention encoder blocks,
// a decoder of M cross-attention-equipped unidirectional memory blocks plus K
// pure memory blocks, the chunk token-count predictor head, and the losses.

#ifndef SCAMA_MODEL_H_
#define SCAMA_MODEL_H_

#include <cstddef>
#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "scama/attention.h"
#include "scama/tensor.h"

namespace scama {

struct ModelConfig {
  std::size_t n_enc = 4;    // encoder blocks
  std::size_t m_dec = 2;    // attention-equipped decoder blocks
  std::size_t k_dec = 1;    // pure memory decoder blocks
  std::size_t d_model = 64;
  std::size_t d_ff = 256;
  std::size_t heads = 4;
  std::size_t d_in = 56;    // stacked feature width
  std::size_t vocab = 32;   // includes <sos> and <eos>
  std::size_t chunk = 5;    // encoder chunk size c
  std::size_t l_enc = 8;    // encoder memory total order L (unidirectional)
  std::size_t l_enc_ahead = 0;  // look-ahead order (offline baseline only)
  std::size_t l_dec = 4;    // decoder memory order
  std::size_t c_max = 6;    // predictor classes are 0..c_max
  double dropout = 0.1;
  int sos = 0;
  int eos = 1;

  void validate() const;
};

// Decoder block: unidirectional memory sublayer, optional cross-attention
// over encoder context, feed-forward; post-norm residuals throughout.
struct DecoderBlock {
  Tensor mem_w;  // value projection feeding the memory filter
  MemoryConfig mem;
  Tensor ln0_g, ln0_b;
  bool has_attention = false;
  AttentionConfig att;  // queries from decoder, keys/values from context
  Tensor ln1_g, ln1_b;
  Tensor ff_w1, ff_b1, ff_w2, ff_b2;
  Tensor ln2_g, ln2_b;
  double dropout_p = 0.0;

  static DecoderBlock init(const ModelConfig& cfg, bool has_attention,
                           std::mt19937_64& rng);
  void collect_params(const std::string& prefix,
                      std::vector<std::pair<std::string, Tensor>>* out) const;
};

struct Predictor {
  Tensor w1, b1;  // c*d_model -> d_hid
  Tensor w2, b2;  // d_hid -> c_max+1

  static Predictor init(const ModelConfig& cfg, std::mt19937_64& rng);
  void collect_params(const std::string& prefix,
                      std::vector<std::pair<std::string, Tensor>>* out) const;
};

struct Model {
  ModelConfig cfg;
  // Encoder front end: affine projection to d_model plus layer norm.
  Tensor in_w, in_b, in_ln_g, in_ln_b;
  std::vector<SanmBlock> enc_blocks;
  // Decoder.
  Tensor embedding;  // vocab x d_model
  std::vector<DecoderBlock> dec_blocks;
  Tensor out_w, out_b;  // d_model -> vocab
  Predictor predictor;

  static Model init(const ModelConfig& cfg, std::uint64_t seed);
  std::vector<std::pair<std::string, Tensor>> named_params() const;
  std::size_t param_count() const;
  void zero_grads() const;
};

// Rolling per-block history of memory-filter inputs; owns nothing else.
struct DecoderState {
  // One entry per decoder block: newest rows last, at most l_dec-1 rows each.
  std::vector<std::deque<std::vector<double>>> mem_history;

  static DecoderState fresh(const Model& m);
};

// --- encoder -----------------------------------------------------------

// Full-sequence encoding. `mask` may be null (full attention) or a
// block-causal additive mask for latency-control training.
Tensor encode_offline(Graph& g, const Model& m, Tensor frames,
                      const std::vector<double>* mask = nullptr);

// Incremental encoding of one chunk through every encoder block; `caches`
// must hold one entry per block and is grown in place.
Tensor encode_chunk(Graph& g, const Model& m, Tensor frames_chunk,
                    std::vector<LayerKVCache>* caches, std::size_t chunk_index);

// --- decoder -----------------------------------------------------------

// Teacher-forced batch decoding: `tokens_in` are the shifted decoder inputs
// (<sos> first); `cross_mask`, when non-null, is additive [L x T_ctx].
// `attn_dump`, when non-null, receives per-block, per-head cross-attention
// weights.
Tensor decode_batch(Graph& g, const Model& m, const std::vector<int>& tokens_in,
                    Tensor context, const std::vector<double>* cross_mask,
                    std::vector<std::vector<std::vector<double>>>* attn_dump =
                        nullptr);

// Single autoregressive step; returns logits [1 x vocab] and extends state.
Tensor decoder_step(Graph& g, const Model& m, DecoderState* state,
                    int prev_token, Tensor context);

// --- losses --------------------------------------------------------------

// Teacher-forced smoothed CE, mean per target position (<eos> included).
// `targets` must end with <eos>; `gate` maps each target position to the
// highest visible chunk (see scama.h) and may be empty for full context.
Tensor e2e_loss(Graph& g, const Model& m, Tensor frames,
                const std::vector<int>& targets,
                const std::vector<std::size_t>& gate, double smoothing);

}  // namespace scama

#endif  // SCAMA_MODEL_H_
