#include "scama/data.h"

#include <algorithm>
#include <cmath>

namespace scama {

std::vector<std::vector<double>> token_patterns(const GenConfig& cfg) {
  // Patterns depend only on the seed, so every split sees the same mapping.
  std::mt19937_64 rng(cfg.seed ^ 0x70617474656e6973ULL);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::vector<std::vector<double>> patterns(cfg.vocab_real);
  for (auto& p : patterns) {
    p.resize(cfg.d_raw);
    for (double& x : p) x = u(rng);
  }
  return patterns;
}

std::vector<Utterance> generate_dataset(const GenConfig& cfg) {
  if (cfg.vocab_real < 4) throw ConfigError("need >= 4 real tokens");
  if (cfg.min_span < 1 || cfg.max_span < cfg.min_span ||
      cfg.max_tokens < cfg.min_tokens || cfg.min_tokens < 1) {
    throw ConfigError("bad generator ranges");
  }
  auto patterns = token_patterns(cfg);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> n_tok(cfg.min_tokens,
                                                   cfg.max_tokens);
  std::uniform_int_distribution<std::size_t> span_len(cfg.min_span,
                                                      cfg.max_span);
  if (cfg.max_gap < cfg.min_gap) throw ConfigError("bad generator ranges");
  std::uniform_int_distribution<std::size_t> gap_len(cfg.min_gap, cfg.max_gap);
  std::uniform_int_distribution<std::size_t> pick(0, cfg.vocab_real - 1);
  std::normal_distribution<double> noise(0.0, cfg.noise);

  std::vector<Utterance> out;
  out.reserve(cfg.n_utts);
  for (std::size_t n = 0; n < cfg.n_utts; ++n) {
    Utterance u;
    u.d_raw = cfg.d_raw;
    std::size_t count = n_tok(rng);
    std::vector<double> rows;
    auto emit_silence = [&](std::size_t frames) {
      for (std::size_t i = 0; i < frames; ++i) {
        for (std::size_t d = 0; d < cfg.d_raw; ++d) rows.push_back(noise(rng));
      }
    };
    emit_silence(gap_len(rng));
    for (std::size_t k = 0; k < count; ++k) {
      std::size_t tok = pick(rng);
      std::size_t len = span_len(rng);
      std::size_t begin = rows.size() / cfg.d_raw + 1;  // 1-based
      for (std::size_t i = 0; i < len; ++i) {
        for (std::size_t d = 0; d < cfg.d_raw; ++d) {
          rows.push_back(patterns[tok][d] + noise(rng));
        }
      }
      u.tokens.push_back(cfg.first_token_id + static_cast<int>(tok));
      u.spans.push_back({begin, begin + len - 1});
      emit_silence(gap_len(rng));
    }
    u.t_raw = rows.size() / cfg.d_raw;
    u.frames = std::move(rows);
    out.push_back(std::move(u));
  }
  return out;
}

DatasetSplit split_dataset(std::vector<Utterance> all) {
  DatasetSplit s;
  for (std::size_t i = 0; i < all.size(); ++i) {
    switch (i % 10) {
      case 8:
        s.dev.push_back(std::move(all[i]));
        break;
      case 9:
        s.test.push_back(std::move(all[i]));
        break;
      default:
        s.train.push_back(std::move(all[i]));
    }
  }
  return s;
}

FrontEndOutput stack_and_downsample(const std::vector<double>& frames,
                                    std::size_t t_raw, std::size_t d_raw,
                                    const FrontEndConfig& cfg,
                                    const std::vector<FrameSpan>& spans) {
  if (t_raw < 1 || frames.size() != t_raw * d_raw) {
    throw UsageError("front end input shape mismatch");
  }
  if (cfg.factor < 1) throw ConfigError("downsample factor must be >= 1");
  FrontEndOutput out;
  out.d = cfg.stacked_dim(d_raw);
  // Keep raw frames 0, factor, 2*factor, ... (1-based: 1 mod factor).
  for (std::size_t t = 0; t < t_raw; t += cfg.factor) {
    for (std::ptrdiff_t off = -static_cast<std::ptrdiff_t>(cfg.left);
         off <= static_cast<std::ptrdiff_t>(cfg.right); ++off) {
      std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + off;
      src = std::clamp<std::ptrdiff_t>(src, 0,
                                       static_cast<std::ptrdiff_t>(t_raw) - 1);
      const double* row = frames.data() + static_cast<std::size_t>(src) * d_raw;
      out.frames.insert(out.frames.end(), row, row + d_raw);
    }
    ++out.t;
  }
  out.spans.reserve(spans.size());
  // A raw frame is assigned to the first model frame whose stacked context
  // window reaches it. Model frame f (1-based) is centred on raw frame
  // factor*(f-1)+1 and sees up to `right` frames ahead, so raw frames past
  // the window of f belong to f+1. Plain (x-1)/factor+1 would label a span
  // as starting up to `right` raw frames before any kept frame can see it,
  // which makes chunk count labels at chunk boundaries unpredictable for a
  // causal encoder.
  auto first_visible = [&cfg, &out](std::size_t raw) {
    std::size_t f =
        raw <= cfg.right + 1
            ? 1
            : (raw - cfg.right - 2) / cfg.factor + 2;  // ceil((raw-right-1)/factor)+1
    return std::min(f, out.t);
  };
  for (const FrameSpan& s : spans) {
    FrameSpan r;
    r.begin = first_visible(s.begin);
    r.end = std::max(first_visible(s.end), r.begin);
    out.spans.push_back(r);
  }
  return out;
}

void spec_augment_lite(std::vector<double>* frames, std::size_t t,
                       std::size_t d, std::size_t n_freq, std::size_t f,
                       std::size_t n_time, std::size_t t_mask,
                       std::mt19937_64& rng) {
  if (frames->size() != t * d) throw UsageError("spec_augment shape mismatch");
  if (f >= d || t_mask >= t) {
    throw ConfigError("mask widths must be smaller than the masked dims");
  }
  for (std::size_t m = 0; m < n_freq; ++m) {
    std::size_t width = std::uniform_int_distribution<std::size_t>(0, f)(rng);
    if (width == 0) continue;
    std::size_t start =
        std::uniform_int_distribution<std::size_t>(0, d - width)(rng);
    for (std::size_t r = 0; r < t; ++r) {
      std::fill_n(frames->data() + r * d + start, width, 0.0);
    }
  }
  for (std::size_t m = 0; m < n_time; ++m) {
    std::size_t width =
        std::uniform_int_distribution<std::size_t>(0, t_mask)(rng);
    if (width == 0) continue;
    std::size_t start =
        std::uniform_int_distribution<std::size_t>(0, t - width)(rng);
    std::fill_n(frames->data() + start * d, width * d, 0.0);
  }
}

double cer(const std::vector<int>& ref, const std::vector<int>& hyp) {
  if (ref.empty()) throw UsageError("cer with empty reference");
  std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      std::size_t sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[m]) / static_cast<double>(n);
}

}  // namespace scama
