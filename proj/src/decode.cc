#include "scama/decode.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace scama {

std::vector<double> apply_eos_policy(const std::vector<double>& logits,
                                     bool is_last_chunk, int eos_id) {
  std::vector<double> logp(logits);
  if (!is_last_chunk) {
    logp[static_cast<std::size_t>(eos_id)] =
        -std::numeric_limits<double>::infinity();
  }
  double mx = *std::max_element(logp.begin(), logp.end());
  double z = 0.0;
  for (double v : logp) z += std::exp(v - mx);
  double logz = std::log(z) + mx;
  for (double& v : logp) v -= logz;
  return logp;
}

ChunkBeamDecoder::ChunkBeamDecoder(const Model& m, DecodeOptions opts)
    : model_(m), opts_(opts) {
  if (opts_.beam == 0) throw ConfigError("beam width must be >= 1");
  BeamHypothesis root;
  root.state = DecoderState::fresh(m);
  live_.push_back(std::move(root));
}

namespace {

double rank_score(const BeamHypothesis& h, bool length_norm) {
  if (!length_norm || h.tokens.empty()) return h.log_score;
  return h.log_score / static_cast<double>(h.tokens.size());
}

}  // namespace

std::vector<int> ChunkBeamDecoder::advance(Tensor context, std::size_t n_hat,
                                           bool is_last,
                                           std::size_t chunk_index) {
  if (done_) throw UsageError("decoder already finished");
  std::size_t budget = n_hat + (is_last ? 2 : 0);
  for (auto& h : live_) h.steps_in_current_chunk = 0;

  int eos = model_.cfg.eos;
  for (std::size_t step = 0; step < budget && !live_.empty(); ++step) {
    struct Candidate {
      std::size_t parent;
      int token;
      double score;
    };
    std::vector<Candidate> cands;
    std::vector<DecoderState> next_states(live_.size());
    for (std::size_t i = 0; i < live_.size(); ++i) {
      BeamHypothesis& h = live_[i];
      int prev = h.tokens.empty() ? model_.cfg.sos : h.tokens.back();
      Graph g;  // eval mode
      next_states[i] = h.state;
      Tensor logits = decoder_step(g, model_, &next_states[i], prev, context);
      std::vector<double> logp =
          apply_eos_policy(logits.value(), is_last, eos);
      for (std::size_t t = 0; t < logp.size(); ++t) {
        if (std::isinf(logp[t]) && logp[t] < 0) continue;
        cands.push_back({i, static_cast<int>(t), h.log_score + logp[t]});
      }
      ++total_steps_;
    }
    std::size_t keep = std::min(opts_.beam, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + keep, cands.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        return a.token < b.token;  // deterministic ties
                      });
    std::vector<BeamHypothesis> next;
    next.reserve(keep);
    for (std::size_t j = 0; j < keep; ++j) {
      const Candidate& cd = cands[j];
      BeamHypothesis h = live_[cd.parent];
      h.state = next_states[cd.parent];
      h.log_score = cd.score;
      h.steps_in_current_chunk += 1;
      h.tokens.push_back(cd.token);
      h.token_chunks.push_back(chunk_index);
      if (cd.token == eos) {
        h.finished = true;
        h.tokens.pop_back();  // <eos> terminates but is not part of the answer
        h.token_chunks.pop_back();
        finished_.push_back(std::move(h));
      } else {
        next.push_back(std::move(h));
      }
    }
    live_ = std::move(next);
  }

  if (is_last) {
    for (BeamHypothesis& h : live_) {
      h.finished = true;
      finished_.push_back(std::move(h));
    }
    live_.clear();
    done_ = true;
  }

  // Commit the prefix every surviving hypothesis agrees on.
  const std::vector<BeamHypothesis>& pool = done_ ? finished_ : live_;
  std::vector<int> newly;
  if (!pool.empty()) {
    std::size_t common = pool[0].tokens.size();
    if (done_) {
      // Final answer: commit the best hypothesis in full.
      common = best().tokens.size();
      for (std::size_t i = committed_.size(); i < common; ++i) {
        newly.push_back(best().tokens[i]);
        committed_.push_back(best().tokens[i]);
      }
      return newly;
    }
    for (const BeamHypothesis& h : pool) {
      std::size_t c = 0;
      while (c < common && c < h.tokens.size() &&
             h.tokens[c] == pool[0].tokens[c]) {
        ++c;
      }
      common = std::min(common, c);
    }
    for (std::size_t i = committed_.size(); i < common; ++i) {
      newly.push_back(pool[0].tokens[i]);
      committed_.push_back(pool[0].tokens[i]);
    }
  }
  return newly;
}

const BeamHypothesis& ChunkBeamDecoder::best() const {
  const std::vector<BeamHypothesis>* pool =
      finished_.empty() ? &live_ : &finished_;
  if (pool->empty()) throw UsageError("no hypotheses");
  const BeamHypothesis* best = &(*pool)[0];
  for (const BeamHypothesis& h : *pool) {
    if (rank_score(h, opts_.length_norm) >
        rank_score(*best, opts_.length_norm)) {
      best = &h;
    }
  }
  best_cache_ = *best;
  return best_cache_;
}

StreamSession::StreamSession(const Model& m, DecodeOptions opts)
    : model_(m), caches_(m.enc_blocks.size()), decoder_(m, opts) {}

std::vector<int> StreamSession::push_chunk(const std::vector<double>& frames,
                                           std::size_t rows, bool is_last) {
  if (finalized_) throw UsageError("push_chunk after the final chunk");
  if (rows == 0 || rows > model_.cfg.chunk ||
      frames.size() != rows * model_.cfg.d_in) {
    throw UsageError("bad chunk: " + std::to_string(rows) + " rows, " +
                     std::to_string(frames.size()) + " values");
  }

  Graph g;  // eval mode
  Tensor x = Tensor::from({rows, model_.cfg.d_in}, frames);
  Tensor enc = encode_chunk(g, model_, x, &caches_, chunks_seen_);
  context_.insert(context_.end(), enc.value().begin(), enc.value().end());
  context_rows_ += rows;

  Tensor spliced = splice_chunk(g, enc, model_.cfg.chunk);
  Tensor probs = predictor_forward(g, spliced, model_.predictor);
  const std::vector<double>& pv = probs.value();
  std::size_t n_hat = static_cast<std::size_t>(
      std::max_element(pv.begin(), pv.end()) - pv.begin());
  predicted_counts_.push_back(n_hat);

  Tensor context = Tensor::from({context_rows_, model_.cfg.d_model}, context_);
  std::vector<int> newly =
      decoder_.advance(context, n_hat, is_last, chunks_seen_);
  ++chunks_seen_;
  if (is_last) finalized_ = true;
  return newly;
}

GatedDecodeResult decode_gated_offline(const Model& m, Tensor frames,
                                       DecodeOptions opts) {
  std::size_t t = frames.rows();
  std::size_t c = m.cfg.chunk;
  std::size_t n_chunks = (t + c - 1) / c;
  Graph g;
  std::vector<double> mask = block_causal_mask(t, c);
  Tensor enc = encode_offline(g, m, frames, &mask);

  GatedDecodeResult res;
  ChunkBeamDecoder decoder(m, opts);
  for (std::size_t k = 0; k < n_chunks; ++k) {
    std::size_t begin = k * c;
    std::size_t end = std::min(t, begin + c);
    Tensor chunk_rows = g.slice_rows(enc, begin, end);
    Tensor probs =
        predictor_forward(g, splice_chunk(g, chunk_rows, c), m.predictor);
    const std::vector<double>& pv = probs.value();
    std::size_t n_hat = static_cast<std::size_t>(
        std::max_element(pv.begin(), pv.end()) - pv.begin());
    res.predicted_counts.push_back(n_hat);
    Tensor visible = g.slice_rows(enc, 0, end);
    decoder.advance(visible, n_hat, k + 1 == n_chunks, k);
  }
  const BeamHypothesis& best = decoder.best();
  res.tokens = best.tokens;
  res.token_chunks = best.token_chunks;
  res.log_score = best.log_score;
  return res;
}

std::vector<int> decode_offline_fsa(const Model& m, Tensor frames,
                                    DecodeOptions opts,
                                    std::size_t max_steps) {
  Graph g;
  Tensor enc = encode_offline(g, m, frames, nullptr);
  // A single pseudo-chunk with the full budget; eos is allowed throughout.
  ChunkBeamDecoder decoder(m, opts);
  decoder.advance(enc, max_steps >= 2 ? max_steps - 2 : 0, true, 0);
  return decoder.best().tokens;
}

LatencyReport latency_report(std::size_t c, double frame_ms,
                             const std::vector<FrameSpan>& spans,
                             const std::vector<std::size_t>& emission_chunks) {
  LatencyReport r;
  r.chunk_size = c;
  r.frame_ms = frame_ms;
  r.encoder_latency_ms = static_cast<double>(c) * frame_ms;
  std::size_t n = std::min(spans.size(), emission_chunks.size());
  r.tokens = n;
  for (std::size_t i = 0; i < n; ++i) {
    double emit_end = static_cast<double>((emission_chunks[i] + 1) * c);
    double delay = emit_end - static_cast<double>(spans[i].end);
    r.mean_delay_frames += delay;
    r.max_delay_frames = std::max(r.max_delay_frames, delay);
  }
  if (n > 0) r.mean_delay_frames /= static_cast<double>(n);
  return r;
}

}  // namespace scama
