#include "scama/scama.h"

#include <algorithm>
#include <cmath>

namespace scama {

Tensor splice_chunk(Graph& g, Tensor chunk_out, std::size_t c) {
  std::size_t ck = chunk_out.rows();
  std::size_t d = chunk_out.cols();
  if (ck > c) {
    throw UsageError("chunk has " + std::to_string(ck) +
                     " rows, more than chunk size " + std::to_string(c));
  }
  Tensor flat = g.reshape(chunk_out, {1, ck * d});
  if (ck == c) return flat;
  Tensor pad = Tensor::zeros({1, (c - ck) * d});
  return g.concat_lastdim({flat, pad});
}

Tensor predictor_logits(Graph& g, Tensor spliced, const Predictor& p) {
  Tensor h = g.relu(g.add_rowvec(g.matmul(spliced, p.w1), p.b1));
  return g.add_rowvec(g.matmul(h, p.w2), p.b2);
}

Tensor predictor_forward(Graph& g, Tensor spliced, const Predictor& p) {
  return g.softmax_lastdim(predictor_logits(g, spliced, p));
}

Tensor predictor_loss(Graph& g, const std::vector<Tensor>& probs,
                      const std::vector<int>& labels) {
  if (probs.size() != labels.size()) {
    throw UsageError("predictor_loss: " + std::to_string(probs.size()) +
                     " distributions vs " + std::to_string(labels.size()) +
                     " labels");
  }
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t k = 0; k < probs.size(); ++k) {
    std::size_t classes = probs[k].cols();
    if (labels[k] < 0 || static_cast<std::size_t>(labels[k]) >= classes) {
      throw UsageError("chunk label " + std::to_string(labels[k]) +
                       " outside class range");
    }
    Tensor pk = g.slice_cols(probs[k], labels[k], labels[k] + 1);
    Tensor nll = g.scale(g.sum(g.log(pk)), -1.0);
    total = g.lincomb(1.0, total, 1.0, nll);
  }
  return total;
}

Tensor joint_loss(Graph& g, Tensor l_e2e, Tensor l_pred, double alpha) {
  if (alpha < 0.0) throw ConfigError("alpha must be >= 0");
  return g.lincomb(1.0, l_e2e, alpha, l_pred);
}

std::vector<std::size_t> counts_to_gate_schedule(
    const std::vector<int>& counts) {
  if (counts.empty()) throw UsageError("gate schedule needs >= 1 chunk");
  std::vector<std::size_t> gate;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] < 0) throw UsageError("negative chunk count");
    for (int i = 0; i < counts[k]; ++i) gate.push_back(k);
  }
  // The <eos> step sees everything.
  gate.push_back(counts.size() - 1);
  return gate;
}

std::vector<double> gate_cross_mask(const std::vector<std::size_t>& gate,
                                    std::size_t t_ctx, std::size_t c) {
  std::vector<double> mask(gate.size() * t_ctx, 0.0);
  for (std::size_t i = 0; i < gate.size(); ++i) {
    std::size_t visible_end = std::min(t_ctx, (gate[i] + 1) * c);
    if (visible_end == 0) {
      throw UsageError("gate step " + std::to_string(i) +
                       " has no visible context");
    }
    for (std::size_t s = visible_end; s < t_ctx; ++s) {
      mask[i * t_ctx + s] = kMaskNegInf;
    }
  }
  return mask;
}

std::vector<int> derive_chunk_counts(const std::vector<FrameSpan>& spans,
                                     std::size_t c, std::size_t t) {
  if (t == 0 || c == 0) throw UsageError("derive_chunk_counts needs t,c >= 1");
  std::size_t n_chunks = (t + c - 1) / c;
  std::vector<int> counts(n_chunks, 0);
  std::size_t prev_begin = 0;
  for (const FrameSpan& s : spans) {
    if (s.begin < 1 || s.end < s.begin || s.end > t) {
      throw UsageError("malformed token span [" + std::to_string(s.begin) +
                       "," + std::to_string(s.end) + "] in utterance of " +
                       std::to_string(t) + " frames");
    }
    if (s.begin < prev_begin) {
      throw UsageError("token spans out of order");
    }
    prev_begin = s.begin;
    counts[(s.begin - 1) / c] += 1;
  }
  return counts;
}

std::size_t clip_counts(std::vector<int>* counts, std::size_t c_max) {
  std::size_t clipped = 0;
  for (int& c : *counts) {
    if (c > static_cast<int>(c_max)) {
      c = static_cast<int>(c_max);
      ++clipped;
    }
  }
  return clipped;
}

JointForward joint_forward(Graph& g, const Model& m, Tensor frames,
                           const std::vector<int>& targets,
                           const std::vector<int>& chunk_counts, double alpha,
                           double smoothing) {
  if (targets.empty() || targets.back() != m.cfg.eos) {
    throw UsageError("targets must be non-empty and end with <eos>");
  }
  std::size_t t = frames.rows();
  std::size_t c = m.cfg.chunk;
  std::size_t n_chunks = (t + c - 1) / c;
  if (chunk_counts.size() != n_chunks) {
    throw UsageError("chunk count labels (" +
                     std::to_string(chunk_counts.size()) +
                     ") do not match chunk count " +
                     std::to_string(n_chunks));
  }

  std::vector<double> enc_mask = block_causal_mask(t, c);
  Tensor context = encode_offline(g, m, frames, &enc_mask);

  // Predictor branch over spliced chunks of the shared encoder output.
  JointForward out;
  std::vector<Tensor> prob_list;
  for (std::size_t k = 0; k < n_chunks; ++k) {
    std::size_t begin = k * c;
    std::size_t end = std::min(t, begin + c);
    Tensor spliced = splice_chunk(g, g.slice_rows(context, begin, end), c);
    Tensor probs = predictor_forward(g, spliced, m.predictor);
    prob_list.push_back(probs);
    const std::vector<double>& pv = probs.value();
    std::size_t argmax = static_cast<std::size_t>(
        std::max_element(pv.begin(), pv.end()) - pv.begin());
    if (argmax == static_cast<std::size_t>(
                      std::min(chunk_counts[k],
                               static_cast<int>(m.cfg.c_max)))) {
      out.chunks_correct += 1;
    }
  }
  out.chunks_total = n_chunks;
  // Predictor labels clip at c_max; gating below keeps the true counts so the
  // schedule still covers every target token.
  std::vector<int> labels = chunk_counts;
  clip_counts(&labels, m.cfg.c_max);
  out.l_pred = predictor_loss(g, prob_list, labels);

  // Teacher-forced branch gated by the ground-truth counts.
  std::vector<std::size_t> gate = counts_to_gate_schedule(chunk_counts);
  if (gate.size() != targets.size()) {
    throw UsageError("gate schedule length " + std::to_string(gate.size()) +
                     " does not match target length " +
                     std::to_string(targets.size()));
  }
  std::vector<double> cross_mask = gate_cross_mask(gate, t, c);
  std::vector<int> tokens_in(targets.size());
  tokens_in[0] = m.cfg.sos;
  std::copy(targets.begin(), targets.end() - 1, tokens_in.begin() + 1);
  Tensor logits = decode_batch(g, m, tokens_in, context, &cross_mask);
  out.l_e2e =
      g.cross_entropy_smoothed(logits, targets, smoothing, Reduction::kMean);
  out.total = joint_loss(g, out.l_e2e, out.l_pred, alpha);
  return out;
}

}  // namespace scama
