// Multihead self-attention, the FSMN memory branch, the combined
// memory-equipped block, and its chunked latency-control variant with
// accumulated key/value caches.

#ifndef SCAMA_ATTENTION_H_
#define SCAMA_ATTENTION_H_

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "scama/tensor.h"

namespace scama {

// Per-head projections packed column-wise: head i owns columns
// [i*d_head, (i+1)*d_head) of wq/wk/wv.
struct AttentionConfig {
  std::size_t d_model = 0;
  std::size_t heads = 1;
  Tensor wq, wk, wv;  // [d_model x d_model]
  Tensor wo;          // [d_model x d_model], applied after head concat

  std::size_t head_dim() const { return d_model / heads; }
  static AttentionConfig init(std::size_t d_model, std::size_t heads,
                              std::mt19937_64& rng);
  void collect_params(const std::string& prefix,
                      std::vector<std::pair<std::string, Tensor>>* out) const;
};

// Tapped-delay memory filter; per-channel coefficient rows.
struct MemoryConfig {
  Tensor back_taps;   // [L_back x d_model], tap i multiplies v_{t-i}
  Tensor ahead_taps;  // [L_ahead x d_model] or undefined (unidirectional)

  std::size_t look_back() const {
    return back_taps.defined() ? back_taps.rows() : 0;
  }
  std::size_t look_ahead() const {
    return ahead_taps.defined() ? ahead_taps.rows() : 0;
  }
  static MemoryConfig init(std::size_t d_model, std::size_t l_back,
                           std::size_t l_ahead, std::mt19937_64& rng);
  void collect_params(const std::string& prefix,
                      std::vector<std::pair<std::string, Tensor>>* out) const;
};

// Which signal feeds the memory branch. The default taps the pre-attention
// value projections; the alternative taps the attention head outputs.
enum class MemorySource { kPreAttentionValues, kPostAttentionHeads };

// Per-layer accumulated keys/values (all heads packed along columns) plus the
// rolling value history that lets the memory look-back cross chunk
// boundaries. Append-only within an utterance.
struct LayerKVCache {
  std::vector<double> keys;    // rows x d_model
  std::vector<double> values;  // rows x d_model
  std::size_t rows = 0;
  std::vector<double> value_history;  // up to (L-1) x d_model, newest last
  std::size_t history_rows = 0;
  std::size_t chunks_seen = 0;
};

struct AttentionOutput {
  Tensor out;      // [T x d_model] after wo
  Tensor values;   // [T x d_model] pre-attention value projections
  Tensor heads;    // [T x d_model] concatenated head outputs before wo
  // Per-head attention weights, row-major [T x T_kv] each.
  std::vector<std::vector<double>> weights;
};

// Scaled dot-product attention, queries from q_in, keys/values from kv_in.
// `mask`, when non-null, is an additive [Tq x Tkv] matrix (0 = allow, large
// negative = forbid). Throws NumericError if a row has every key forbidden.
AttentionOutput multihead_attention(Graph& g, Tensor q_in, Tensor kv_in,
                                    const AttentionConfig& cfg,
                                    const std::vector<double>* mask = nullptr);

inline AttentionOutput multihead_self_attention(
    Graph& g, Tensor x, const AttentionConfig& cfg,
    const std::vector<double>* mask = nullptr) {
  return multihead_attention(g, x, x, cfg, mask);
}

// Additive value for forbidden mask positions.
constexpr double kMaskNegInf = -1e30;

// Block-causal additive mask: position t attends s iff chunk(s) <= chunk(t)
// with chunk(t) = floor(t/c) (0-based rows/cols).
std::vector<double> block_causal_mask(std::size_t t, std::size_t c);

// Full memory-equipped block: attention + memory branch, then post-norm
// residual and feed-forward per the standard transformer layout.
struct SanmBlock {
  AttentionConfig att;
  MemoryConfig mem;
  Tensor ff_w1, ff_b1;  // d_model -> d_ff
  Tensor ff_w2, ff_b2;  // d_ff -> d_model
  Tensor ln1_g, ln1_b;
  Tensor ln2_g, ln2_b;
  double dropout_p = 0.0;
  MemorySource mem_source = MemorySource::kPreAttentionValues;

  static SanmBlock init(std::size_t d_model, std::size_t heads,
                        std::size_t d_ff, std::size_t l_back,
                        std::size_t l_ahead, double dropout_p,
                        std::mt19937_64& rng);
  void collect_params(const std::string& prefix,
                      std::vector<std::pair<std::string, Tensor>>* out) const;

  // Full-sequence forward (optionally masked); look-ahead taps active.
  Tensor forward(Graph& g, Tensor x, const std::vector<double>* mask) const;

  // Incremental forward for one chunk; appends to `cache` and attends the
  // query rows over the accumulated keys/values. Memory runs unidirectionally
  // with look-back into the cached value history. Chunks must arrive in order.
  Tensor forward_chunk(Graph& g, Tensor x_chunk, LayerKVCache* cache,
                       std::size_t chunk_index) const;
};

}  // namespace scama

#endif  // SCAMA_ATTENTION_H_
