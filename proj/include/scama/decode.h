// Online inference: incremental encoding, predictor-gated beam search with
// the eos suppression policy, committed-prefix emission, and latency
// accounting.

#ifndef SCAMA_DECODE_H_
#define SCAMA_DECODE_H_

#include <cstddef>
#include <vector>

#include "scama/model.h"
#include "scama/scama.h"

namespace scama {

struct DecodeOptions {
  std::size_t beam = 4;
  // Divide hypothesis scores by token count when ranking final answers.
  bool length_norm = false;
};

struct BeamHypothesis {
  std::vector<int> tokens;
  std::vector<std::size_t> token_chunks;  // chunk index each token was decoded in
  double log_score = 0.0;
  std::size_t steps_in_current_chunk = 0;
  DecoderState state;
  bool finished = false;
};

// Log-probability vector for one decoder step. On non-final chunks the <eos>
// entry is forced to -inf before normalization, so selection falls to the
// remaining tokens.
std::vector<double> apply_eos_policy(const std::vector<double>& logits,
                                     bool is_last_chunk, int eos_id);

// Beam advance over pre-encoded chunks; shared by the streaming session and
// the offline gated re-decode path.
class ChunkBeamDecoder {
 public:
  ChunkBeamDecoder(const Model& m, DecodeOptions opts);

  // Runs `n_hat` decoder steps (plus 2 on the last chunk) against the given
  // visible context; returns tokens newly committed (shared by every
  // hypothesis prefix).
  std::vector<int> advance(Tensor context, std::size_t n_hat, bool is_last,
                           std::size_t chunk_index);

  const std::vector<int>& committed() const { return committed_; }
  std::size_t total_steps() const { return total_steps_; }
  const BeamHypothesis& best() const;
  bool done() const { return done_; }

 private:
  const Model& model_;
  DecodeOptions opts_;
  std::vector<BeamHypothesis> live_;
  std::vector<BeamHypothesis> finished_;
  std::vector<int> committed_;
  std::size_t total_steps_ = 0;
  bool done_ = false;
  mutable BeamHypothesis best_cache_;
};

// Streaming session over one utterance. Frames arrive as chunks of model-rate
// features (rows x d_in); the final chunk must be pushed with is_last=true.
class StreamSession {
 public:
  StreamSession(const Model& m, DecodeOptions opts);

  // Returns tokens newly committed by this chunk.
  std::vector<int> push_chunk(const std::vector<double>& frames,
                              std::size_t rows, bool is_last);

  bool finalized() const { return finalized_; }
  const std::vector<int>& committed() const { return decoder_.committed(); }
  const BeamHypothesis& best() const { return decoder_.best(); }
  const std::vector<std::size_t>& predicted_counts() const {
    return predicted_counts_;
  }
  std::size_t total_decoder_steps() const { return decoder_.total_steps(); }
  std::size_t chunks_seen() const { return chunks_seen_; }
  // Encoder outputs released so far, rows x d_model.
  const std::vector<double>& context() const { return context_; }
  std::size_t context_rows() const { return context_rows_; }

 private:
  const Model& model_;
  std::vector<LayerKVCache> caches_;
  std::vector<double> context_;
  std::size_t context_rows_ = 0;
  std::size_t chunks_seen_ = 0;
  std::vector<std::size_t> predicted_counts_;
  ChunkBeamDecoder decoder_;
  bool finalized_ = false;
};

struct GatedDecodeResult {
  std::vector<int> tokens;
  std::vector<std::size_t> token_chunks;
  std::vector<std::size_t> predicted_counts;
  double log_score = 0.0;
};

// Offline re-decode with the same gating: block-causal batch encoding, the
// predictor, and the identical beam routine over per-chunk context slices.
GatedDecodeResult decode_gated_offline(const Model& m, Tensor frames,
                                       DecodeOptions opts);

// Full-attention decode: encode without a mask, beam until <eos> with a step
// cap. Used for the non-streaming baseline evaluation.
std::vector<int> decode_offline_fsa(const Model& m, Tensor frames,
                                    DecodeOptions opts,
                                    std::size_t max_steps);

struct LatencyReport {
  std::size_t chunk_size = 0;
  double frame_ms = 0.0;
  double encoder_latency_ms = 0.0;  // chunk_size * frame_ms
  std::size_t tokens = 0;
  double mean_delay_frames = 0.0;
  double max_delay_frames = 0.0;
};

// `spans` are per-token alignments at the model frame rate; emission_chunks
// gives the chunk each token was decoded in. Delay is measured from a
// token's aligned end to the end of its emission chunk.
LatencyReport latency_report(std::size_t c, double frame_ms,
                             const std::vector<FrameSpan>& spans,
                             const std::vector<std::size_t>& emission_chunks);

}  // namespace scama

#endif  // SCAMA_DECODE_H_
