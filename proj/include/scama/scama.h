// Chunk splicing, the token-count predictor, its loss, the joint objective,
// and the gating rule that connects per-chunk counts to decoder
// cross-attention context.

#ifndef SCAMA_SCAMA_H_
#define SCAMA_SCAMA_H_

#include <cstddef>
#include <vector>

#include "scama/model.h"
#include "scama/tensor.h"

namespace scama {

// Concatenates a chunk's encoder output rows into one [1 x c*d_model] vector;
// a ragged final chunk is zero-padded on the right.
Tensor splice_chunk(Graph& g, Tensor chunk_out, std::size_t c);

// Eq-style two-layer relu MLP over a spliced chunk; returns logits
// [1 x c_max+1]. Softmax of this is the predictor distribution.
Tensor predictor_logits(Graph& g, Tensor spliced, const Predictor& p);
Tensor predictor_forward(Graph& g, Tensor spliced, const Predictor& p);

// Sum over chunks of -log p_k[label_k], computed from the softmax outputs.
Tensor predictor_loss(Graph& g, const std::vector<Tensor>& probs,
                      const std::vector<int>& labels);

// total = l_e2e + alpha * l_pred.
Tensor joint_loss(Graph& g, Tensor l_e2e, Tensor l_pred, double alpha);

// Decoder-step -> highest-visible-chunk schedule. Entry i covers the i-th
// predicted token; the final entry is the <eos> step and sees the last chunk.
// Chunks with count zero contribute no steps.
std::vector<std::size_t> counts_to_gate_schedule(
    const std::vector<int>& counts);

// Additive cross-attention mask [len(gate) x t_ctx]: step i may attend
// encoder rows of chunks <= gate[i].
std::vector<double> gate_cross_mask(const std::vector<std::size_t>& gate,
                                    std::size_t t_ctx, std::size_t c);

// Token spans at the model frame rate, 1-based inclusive.
struct FrameSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Assigns each token to the chunk holding its first aligned frame and counts
// per chunk; `t` is the utterance length in model frames.
std::vector<int> derive_chunk_counts(const std::vector<FrameSpan>& spans,
                                     std::size_t c, std::size_t t);

// Clamps counts to c_max; returns how many chunks were clipped.
std::size_t clip_counts(std::vector<int>* counts, std::size_t c_max);

// One joint training forward pass sharing a single encoder evaluation
// between the teacher-forced CE and the predictor CE.
struct JointForward {
  Tensor total;  // l_e2e + alpha * l_pred
  Tensor l_e2e;
  Tensor l_pred;
  std::size_t chunks_correct = 0;  // predictor argmax == label
  std::size_t chunks_total = 0;
};

JointForward joint_forward(Graph& g, const Model& m, Tensor frames,
                           const std::vector<int>& targets,
                           const std::vector<int>& chunk_counts, double alpha,
                           double smoothing);

}  // namespace scama

#endif  // SCAMA_SCAMA_H_
