#include "scama/model.h"

#include <algorithm>
#include <cmath>

#include "scama/scama.h"

namespace scama {

void ModelConfig::validate() const {
  if (n_enc < 1 || m_dec < 1) {
    throw ConfigError("need at least one encoder and one attention-equipped "
                      "decoder block");
  }
  if (vocab < 3) throw ConfigError("vocab must hold <sos>, <eos> and tokens");
  if (d_model == 0 || heads == 0 || d_model % heads != 0) {
    throw ConfigError("d_model must be a positive multiple of heads");
  }
  if (chunk == 0) throw ConfigError("chunk size must be >= 1");
  if (l_enc == 0 || l_dec == 0) throw ConfigError("memory orders must be >= 1");
  if (sos == eos || sos < 0 || eos < 0 ||
      static_cast<std::size_t>(std::max(sos, eos)) >= vocab) {
    throw ConfigError("<sos>/<eos> ids must be distinct and inside vocab");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ConfigError("dropout must be in [0,1)");
  }
}

DecoderBlock DecoderBlock::init(const ModelConfig& cfg, bool has_attention,
                                std::mt19937_64& rng) {
  DecoderBlock b;
  std::size_t d = cfg.d_model;
  b.mem_w = glorot({d, d}, d, d, rng);
  b.mem = MemoryConfig::init(d, cfg.l_dec, 0, rng);
  b.ln0_g = Tensor::from({d}, std::vector<double>(d, 1.0));
  b.ln0_b = Tensor::zeros({d});
  b.has_attention = has_attention;
  if (has_attention) {
    b.att = AttentionConfig::init(d, cfg.heads, rng);
    b.ln1_g = Tensor::from({d}, std::vector<double>(d, 1.0));
    b.ln1_b = Tensor::zeros({d});
  }
  b.ff_w1 = glorot({d, cfg.d_ff}, d, cfg.d_ff, rng);
  b.ff_b1 = Tensor::zeros({cfg.d_ff});
  b.ff_w2 = glorot({cfg.d_ff, d}, cfg.d_ff, d, rng);
  b.ff_b2 = Tensor::zeros({d});
  b.ln2_g = Tensor::from({d}, std::vector<double>(d, 1.0));
  b.ln2_b = Tensor::zeros({d});
  b.dropout_p = cfg.dropout;
  return b;
}

void DecoderBlock::collect_params(
    const std::string& prefix,
    std::vector<std::pair<std::string, Tensor>>* out) const {
  out->emplace_back(prefix + ".mem_w", mem_w);
  mem.collect_params(prefix + ".mem", out);
  out->emplace_back(prefix + ".ln0_g", ln0_g);
  out->emplace_back(prefix + ".ln0_b", ln0_b);
  if (has_attention) {
    att.collect_params(prefix + ".att", out);
    out->emplace_back(prefix + ".ln1_g", ln1_g);
    out->emplace_back(prefix + ".ln1_b", ln1_b);
  }
  out->emplace_back(prefix + ".ff_w1", ff_w1);
  out->emplace_back(prefix + ".ff_b1", ff_b1);
  out->emplace_back(prefix + ".ff_w2", ff_w2);
  out->emplace_back(prefix + ".ff_b2", ff_b2);
  out->emplace_back(prefix + ".ln2_g", ln2_g);
  out->emplace_back(prefix + ".ln2_b", ln2_b);
}

Predictor Predictor::init(const ModelConfig& cfg, std::mt19937_64& rng) {
  Predictor p;
  std::size_t d_in = cfg.chunk * cfg.d_model;
  std::size_t d_hid = cfg.d_model;
  std::size_t classes = cfg.c_max + 1;
  p.w1 = glorot({d_in, d_hid}, d_in, d_hid, rng);
  p.b1 = Tensor::zeros({d_hid});
  p.w2 = glorot({d_hid, classes}, d_hid, classes, rng);
  p.b2 = Tensor::zeros({classes});
  return p;
}

void Predictor::collect_params(
    const std::string& prefix,
    std::vector<std::pair<std::string, Tensor>>* out) const {
  out->emplace_back(prefix + ".w1", w1);
  out->emplace_back(prefix + ".b1", b1);
  out->emplace_back(prefix + ".w2", w2);
  out->emplace_back(prefix + ".b2", b2);
}

Model Model::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  Model m;
  m.cfg = cfg;
  m.in_w = glorot({cfg.d_in, cfg.d_model}, cfg.d_in, cfg.d_model, rng);
  m.in_b = Tensor::zeros({cfg.d_model});
  m.in_ln_g = Tensor::from({cfg.d_model}, std::vector<double>(cfg.d_model, 1.0));
  m.in_ln_b = Tensor::zeros({cfg.d_model});
  for (std::size_t i = 0; i < cfg.n_enc; ++i) {
    m.enc_blocks.push_back(SanmBlock::init(cfg.d_model, cfg.heads, cfg.d_ff,
                                           cfg.l_enc, cfg.l_enc_ahead,
                                           cfg.dropout, rng));
  }
  m.embedding = glorot({cfg.vocab, cfg.d_model}, cfg.vocab, cfg.d_model, rng);
  for (std::size_t i = 0; i < cfg.m_dec; ++i) {
    m.dec_blocks.push_back(DecoderBlock::init(cfg, true, rng));
  }
  for (std::size_t i = 0; i < cfg.k_dec; ++i) {
    m.dec_blocks.push_back(DecoderBlock::init(cfg, false, rng));
  }
  m.out_w = glorot({cfg.d_model, cfg.vocab}, cfg.d_model, cfg.vocab, rng);
  m.out_b = Tensor::zeros({cfg.vocab});
  m.predictor = Predictor::init(cfg, rng);
  return m;
}

std::vector<std::pair<std::string, Tensor>> Model::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("in.w", in_w);
  out.emplace_back("in.b", in_b);
  out.emplace_back("in.ln_g", in_ln_g);
  out.emplace_back("in.ln_b", in_ln_b);
  for (std::size_t i = 0; i < enc_blocks.size(); ++i) {
    enc_blocks[i].collect_params("enc." + std::to_string(i), &out);
  }
  out.emplace_back("dec.embedding", embedding);
  for (std::size_t i = 0; i < dec_blocks.size(); ++i) {
    dec_blocks[i].collect_params("dec." + std::to_string(i), &out);
  }
  out.emplace_back("dec.out_w", out_w);
  out.emplace_back("dec.out_b", out_b);
  predictor.collect_params("pred", &out);
  return out;
}

std::size_t Model::param_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named_params()) n += t.size();
  return n;
}

void Model::zero_grads() const {
  for (auto& [name, t] : named_params()) {
    const_cast<Tensor&>(t).zero_grad();
  }
}

DecoderState DecoderState::fresh(const Model& m) {
  DecoderState s;
  s.mem_history.resize(m.dec_blocks.size());
  return s;
}

Tensor encode_offline(Graph& g, const Model& m, Tensor frames,
                      const std::vector<double>* mask) {
  if (frames.cols() != m.cfg.d_in) {
    throw ShapeError("encoder input width " + shape_str(frames.shape()) +
                     " != d_in " + std::to_string(m.cfg.d_in));
  }
  Tensor x = g.layer_norm(g.add_rowvec(g.matmul(frames, m.in_w), m.in_b),
                          m.in_ln_g, m.in_ln_b);
  for (const SanmBlock& b : m.enc_blocks) x = b.forward(g, x, mask);
  return x;
}

Tensor encode_chunk(Graph& g, const Model& m, Tensor frames_chunk,
                    std::vector<LayerKVCache>* caches,
                    std::size_t chunk_index) {
  if (caches == nullptr || caches->size() != m.enc_blocks.size()) {
    throw UsageError("encode_chunk needs one cache per encoder block");
  }
  Tensor x = g.layer_norm(g.add_rowvec(g.matmul(frames_chunk, m.in_w), m.in_b),
                          m.in_ln_g, m.in_ln_b);
  for (std::size_t i = 0; i < m.enc_blocks.size(); ++i) {
    x = m.enc_blocks[i].forward_chunk(g, x, &(*caches)[i], chunk_index);
  }
  return x;
}

namespace {

Tensor decoder_ff(Graph& g, Tensor x, const DecoderBlock& b) {
  Tensor h = g.relu(g.add_rowvec(g.matmul(x, b.ff_w1), b.ff_b1));
  return g.add_rowvec(g.matmul(h, b.ff_w2), b.ff_b2);
}

}  // namespace

Tensor decode_batch(Graph& g, const Model& m, const std::vector<int>& tokens_in,
                    Tensor context, const std::vector<double>* cross_mask,
                    std::vector<std::vector<std::vector<double>>>* attn_dump) {
  if (tokens_in.empty()) throw UsageError("decode_batch with no tokens");
  if (context.rows() < 1) throw UsageError("decoder context is empty");
  Tensor x = g.embed(m.embedding, tokens_in);
  for (const DecoderBlock& b : m.dec_blocks) {
    Tensor v = g.matmul(x, b.mem_w);
    Tensor mem = g.dropout(g.fsmn(v, b.mem.back_taps, Tensor()), b.dropout_p);
    Tensor s0 = g.layer_norm(g.add(x, mem), b.ln0_g, b.ln0_b);
    Tensor s1 = s0;
    if (b.has_attention) {
      AttentionOutput att =
          multihead_attention(g, s0, context, b.att, cross_mask);
      if (attn_dump != nullptr) attn_dump->push_back(att.weights);
      s1 = g.layer_norm(g.add(s0, g.dropout(att.out, b.dropout_p)), b.ln1_g,
                        b.ln1_b);
    }
    Tensor ff = g.dropout(decoder_ff(g, s1, b), b.dropout_p);
    x = g.layer_norm(g.add(s1, ff), b.ln2_g, b.ln2_b);
  }
  return g.add_rowvec(g.matmul(x, m.out_w), m.out_b);
}

Tensor decoder_step(Graph& g, const Model& m, DecoderState* state,
                    int prev_token, Tensor context) {
  if (state == nullptr || state->mem_history.size() != m.dec_blocks.size()) {
    throw UsageError("decoder_step needs a state sized to the decoder");
  }
  if (context.rows() < 1) throw UsageError("decoder context is empty");
  Tensor x = g.embed(m.embedding, {prev_token});
  for (std::size_t i = 0; i < m.dec_blocks.size(); ++i) {
    const DecoderBlock& b = m.dec_blocks[i];
    auto& hist = state->mem_history[i];
    Tensor v = g.matmul(x, b.mem_w);

    std::vector<double> hist_flat;
    hist_flat.reserve(hist.size() * m.cfg.d_model);
    for (const auto& row : hist) {
      hist_flat.insert(hist_flat.end(), row.begin(), row.end());
    }
    Tensor mem =
        g.fsmn(v, b.mem.back_taps, Tensor(), hist_flat, hist.size());

    hist.push_back(v.value());
    while (hist.size() > m.cfg.l_dec - 1) hist.pop_front();

    Tensor s0 = g.layer_norm(g.add(x, mem), b.ln0_g, b.ln0_b);
    Tensor s1 = s0;
    if (b.has_attention) {
      AttentionOutput att = multihead_attention(g, s0, context, b.att);
      s1 = g.layer_norm(g.add(s0, att.out), b.ln1_g, b.ln1_b);
    }
    Tensor ff = decoder_ff(g, s1, b);
    x = g.layer_norm(g.add(s1, ff), b.ln2_g, b.ln2_b);
  }
  return g.add_rowvec(g.matmul(x, m.out_w), m.out_b);
}

Tensor e2e_loss(Graph& g, const Model& m, Tensor frames,
                const std::vector<int>& targets,
                const std::vector<std::size_t>& gate, double smoothing) {
  if (targets.empty()) throw UsageError("e2e_loss with empty target");
  if (targets.back() != m.cfg.eos) {
    throw UsageError("targets must end with <eos>");
  }
  std::vector<double> enc_mask =
      block_causal_mask(frames.rows(), m.cfg.chunk);
  Tensor context = encode_offline(g, m, frames, &enc_mask);

  std::vector<int> tokens_in(targets.size());
  tokens_in[0] = m.cfg.sos;
  std::copy(targets.begin(), targets.end() - 1, tokens_in.begin() + 1);

  std::vector<double> cross_mask;
  const std::vector<double>* mask_ptr = nullptr;
  if (!gate.empty()) {
    cross_mask = gate_cross_mask(gate, context.rows(), m.cfg.chunk);
    mask_ptr = &cross_mask;
  }
  Tensor logits = decode_batch(g, m, tokens_in, context, mask_ptr);
  return g.cross_entropy_smoothed(logits, targets, smoothing,
                                  Reduction::kMean);
}

}  // namespace scama
