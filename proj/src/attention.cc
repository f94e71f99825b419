#include "scama/attention.h"

#include <algorithm>
#include <cmath>

namespace scama {

AttentionConfig AttentionConfig::init(std::size_t d_model, std::size_t heads,
                                      std::mt19937_64& rng) {
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) +
                      " not divisible by head count " + std::to_string(heads));
  }
  AttentionConfig cfg;
  cfg.d_model = d_model;
  cfg.heads = heads;
  cfg.wq = glorot({d_model, d_model}, d_model, d_model, rng);
  cfg.wk = glorot({d_model, d_model}, d_model, d_model, rng);
  cfg.wv = glorot({d_model, d_model}, d_model, d_model, rng);
  cfg.wo = glorot({d_model, d_model}, d_model, d_model, rng);
  return cfg;
}

void AttentionConfig::collect_params(
    const std::string& prefix,
    std::vector<std::pair<std::string, Tensor>>* out) const {
  out->emplace_back(prefix + ".wq", wq);
  out->emplace_back(prefix + ".wk", wk);
  out->emplace_back(prefix + ".wv", wv);
  out->emplace_back(prefix + ".wo", wo);
}

MemoryConfig MemoryConfig::init(std::size_t d_model, std::size_t l_back,
                                std::size_t l_ahead, std::mt19937_64& rng) {
  MemoryConfig mem;
  if (l_back > 0) {
    mem.back_taps = glorot({l_back, d_model}, l_back, 1, rng);
  } else {
    throw ConfigError("memory look-back order must be >= 1");
  }
  if (l_ahead > 0) {
    mem.ahead_taps = glorot({l_ahead, d_model}, l_ahead, 1, rng);
  }
  return mem;
}

void MemoryConfig::collect_params(
    const std::string& prefix,
    std::vector<std::pair<std::string, Tensor>>* out) const {
  out->emplace_back(prefix + ".back_taps", back_taps);
  if (ahead_taps.defined()) {
    out->emplace_back(prefix + ".ahead_taps", ahead_taps);
  }
}

AttentionOutput multihead_attention(Graph& g, Tensor q_in, Tensor kv_in,
                                    const AttentionConfig& cfg,
                                    const std::vector<double>* mask) {
  std::size_t tq = q_in.rows(), tkv = kv_in.rows();
  if (q_in.cols() != cfg.d_model || kv_in.cols() != cfg.d_model) {
    throw ShapeError("attention input width " + shape_str(q_in.shape()) +
                     " does not match d_model " + std::to_string(cfg.d_model));
  }
  if (mask != nullptr) {
    if (mask->size() != tq * tkv) {
      throw ShapeError("attention mask size " + std::to_string(mask->size()) +
                       " != " + std::to_string(tq * tkv));
    }
    for (std::size_t r = 0; r < tq; ++r) {
      bool any_allowed = false;
      for (std::size_t s = 0; s < tkv; ++s) {
        if ((*mask)[r * tkv + s] > 0.5 * kMaskNegInf) {
          any_allowed = true;
          break;
        }
      }
      if (!any_allowed) {
        throw NumericError("attention row " + std::to_string(r) +
                           " has every key forbidden");
      }
    }
  }
  std::size_t dh = cfg.head_dim();
  double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor q = g.matmul(q_in, cfg.wq);
  Tensor k = g.matmul(kv_in, cfg.wk);
  Tensor v = g.matmul(kv_in, cfg.wv);

  AttentionOutput res;
  res.values = v;
  std::vector<Tensor> head_outs;
  head_outs.reserve(cfg.heads);
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    Tensor qi = g.slice_cols(q, h * dh, (h + 1) * dh);
    Tensor ki = g.slice_cols(k, h * dh, (h + 1) * dh);
    Tensor vi = g.slice_cols(v, h * dh, (h + 1) * dh);
    Tensor scores = g.scale(g.matmul_nt(qi, ki), inv_sqrt_dk);
    if (mask != nullptr) scores = g.add_const(scores, *mask);
    Tensor weights = g.softmax_lastdim(scores);
    res.weights.push_back(weights.value());
    head_outs.push_back(g.matmul(weights, vi));
  }
  res.heads = g.concat_lastdim(head_outs);
  res.out = g.matmul(res.heads, cfg.wo);
  return res;
}

std::vector<double> block_causal_mask(std::size_t t, std::size_t c) {
  if (t == 0 || c == 0) throw ConfigError("block_causal_mask needs t,c >= 1");
  std::vector<double> mask(t * t, 0.0);
  for (std::size_t r = 0; r < t; ++r) {
    std::size_t visible_end = std::min(t, (r / c + 1) * c);
    for (std::size_t s = visible_end; s < t; ++s) {
      mask[r * t + s] = kMaskNegInf;
    }
  }
  return mask;
}

SanmBlock SanmBlock::init(std::size_t d_model, std::size_t heads,
                          std::size_t d_ff, std::size_t l_back,
                          std::size_t l_ahead, double dropout_p,
                          std::mt19937_64& rng) {
  SanmBlock b;
  b.att = AttentionConfig::init(d_model, heads, rng);
  b.mem = MemoryConfig::init(d_model, l_back, l_ahead, rng);
  b.ff_w1 = glorot({d_model, d_ff}, d_model, d_ff, rng);
  b.ff_b1 = Tensor::zeros({d_ff});
  b.ff_w2 = glorot({d_ff, d_model}, d_ff, d_model, rng);
  b.ff_b2 = Tensor::zeros({d_model});
  b.ln1_g = Tensor::from({d_model}, std::vector<double>(d_model, 1.0));
  b.ln1_b = Tensor::zeros({d_model});
  b.ln2_g = Tensor::from({d_model}, std::vector<double>(d_model, 1.0));
  b.ln2_b = Tensor::zeros({d_model});
  b.dropout_p = dropout_p;
  return b;
}

void SanmBlock::collect_params(
    const std::string& prefix,
    std::vector<std::pair<std::string, Tensor>>* out) const {
  att.collect_params(prefix + ".att", out);
  mem.collect_params(prefix + ".mem", out);
  out->emplace_back(prefix + ".ff_w1", ff_w1);
  out->emplace_back(prefix + ".ff_b1", ff_b1);
  out->emplace_back(prefix + ".ff_w2", ff_w2);
  out->emplace_back(prefix + ".ff_b2", ff_b2);
  out->emplace_back(prefix + ".ln1_g", ln1_g);
  out->emplace_back(prefix + ".ln1_b", ln1_b);
  out->emplace_back(prefix + ".ln2_g", ln2_g);
  out->emplace_back(prefix + ".ln2_b", ln2_b);
}

namespace {

Tensor feed_forward(Graph& g, Tensor x, const SanmBlock& b) {
  Tensor h = g.relu(g.add_rowvec(g.matmul(x, b.ff_w1), b.ff_b1));
  return g.add_rowvec(g.matmul(h, b.ff_w2), b.ff_b2);
}

}  // namespace

Tensor SanmBlock::forward(Graph& g, Tensor x,
                          const std::vector<double>* mask) const {
  AttentionOutput att_out = multihead_self_attention(g, x, att, mask);
  Tensor mem_in = mem_source == MemorySource::kPreAttentionValues
                      ? att_out.values
                      : att_out.heads;
  Tensor m = g.fsmn(mem_in, mem.back_taps, mem.ahead_taps);
  Tensor y = g.dropout(g.add(att_out.out, m), dropout_p);
  Tensor s1 = g.layer_norm(g.add(x, y), ln1_g, ln1_b);
  Tensor ff = g.dropout(feed_forward(g, s1, *this), dropout_p);
  return g.layer_norm(g.add(s1, ff), ln2_g, ln2_b);
}

Tensor SanmBlock::forward_chunk(Graph& g, Tensor x_chunk, LayerKVCache* cache,
                                std::size_t chunk_index) const {
  if (cache == nullptr) throw UsageError("forward_chunk needs a cache");
  if (cache->chunks_seen != chunk_index) {
    throw UsageError("chunk " + std::to_string(chunk_index) +
                     " presented out of order (expected " +
                     std::to_string(cache->chunks_seen) + ")");
  }
  std::size_t ck = x_chunk.rows();
  std::size_t d = att.d_model;
  std::size_t dh = att.head_dim();
  double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor q = g.matmul(x_chunk, att.wq);
  Tensor k = g.matmul(x_chunk, att.wk);
  Tensor v = g.matmul(x_chunk, att.wv);

  // Grow the accumulated caches, then attend over their full extent.
  cache->keys.insert(cache->keys.end(), k.value().begin(), k.value().end());
  cache->values.insert(cache->values.end(), v.value().begin(),
                       v.value().end());
  cache->rows += ck;

  Tensor k_all = Tensor::from({cache->rows, d}, cache->keys);
  Tensor v_all = Tensor::from({cache->rows, d}, cache->values);

  std::vector<Tensor> head_outs;
  head_outs.reserve(att.heads);
  for (std::size_t h = 0; h < att.heads; ++h) {
    Tensor qi = g.slice_cols(q, h * dh, (h + 1) * dh);
    Tensor ki = g.slice_cols(k_all, h * dh, (h + 1) * dh);
    Tensor vi = g.slice_cols(v_all, h * dh, (h + 1) * dh);
    Tensor weights =
        g.softmax_lastdim(g.scale(g.matmul_nt(qi, ki), inv_sqrt_dk));
    head_outs.push_back(g.matmul(weights, vi));
  }
  Tensor heads_cat = g.concat_lastdim(head_outs);
  Tensor attn = g.matmul(heads_cat, att.wo);

  Tensor mem_in =
      mem_source == MemorySource::kPreAttentionValues ? v : heads_cat;
  Tensor m = g.fsmn(mem_in, mem.back_taps, Tensor(), cache->value_history,
                    cache->history_rows);

  // Roll the value history forward for the next chunk's look-back.
  std::size_t keep = mem.look_back() > 0 ? mem.look_back() - 1 : 0;
  if (keep > 0) {
    std::vector<double> hist = std::move(cache->value_history);
    hist.insert(hist.end(), mem_in.value().begin(), mem_in.value().end());
    std::size_t total = cache->history_rows + ck;
    std::size_t drop = total > keep ? total - keep : 0;
    cache->value_history.assign(hist.begin() + drop * d, hist.end());
    cache->history_rows = total - drop;
  }
  cache->chunks_seen += 1;

  Tensor y = g.dropout(g.add(attn, m), dropout_p);
  Tensor s1 = g.layer_norm(g.add(x_chunk, y), ln1_g, ln1_b);
  Tensor ff = g.dropout(feed_forward(g, s1, *this), dropout_p);
  return g.layer_norm(g.add(s1, ff), ln2_g, ln2_b);
}

}  // namespace scama
