// Acceptance suite: one line per criterion, non-zero exit on any failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <random>
#include <vector>

#include "scama/decode.h"
#include "scama/train.h"

using namespace scama;

namespace {

int g_failures = 0;

void report(int index, const std::string& name, bool pass,
            const std::string& detail) {
  std::printf("[%d] %s: %s (%s)\n", index, name.c_str(),
              pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

Tensor randt(std::vector<std::size_t> shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return Tensor::from(std::move(shape), std::move(v));
}

ModelConfig random_small_config(std::mt19937_64& rng) {
  ModelConfig c;
  c.d_model = (rng() % 2 == 0) ? 8 : 16;
  c.heads = (rng() % 2 == 0) ? 2 : 4;
  c.n_enc = 1 + rng() % 2;
  c.m_dec = 1;
  c.k_dec = rng() % 2;
  c.d_ff = 16;
  c.d_in = 5 + rng() % 4;
  c.vocab = 6;
  c.chunk = 1 + rng() % 8;
  c.l_enc = 1 + rng() % 6;
  c.l_dec = 2 + rng() % 3;
  c.c_max = 4;
  c.dropout = 0.0;
  return c;
}

// --- criterion 1: chunk-incremental encoding == block-causal batch ---------

void criterion_equivalence() {
  std::mt19937_64 rng(1001);
  double worst = 0.0;
  int trials = 50;
  for (int trial = 0; trial < trials; ++trial) {
    ModelConfig c = random_small_config(rng);
    Model m = Model::init(c, 2000 + trial);
    std::size_t t = 3 + rng() % 18;
    Tensor frames = randt({t, c.d_in}, rng);

    Graph gb;
    std::vector<double> mask = block_causal_mask(t, c.chunk);
    Tensor batch = encode_offline(gb, m, frames, &mask);

    Graph gs;
    std::vector<LayerKVCache> caches(m.enc_blocks.size());
    std::vector<double> streamed;
    std::size_t n_chunks = (t + c.chunk - 1) / c.chunk;
    for (std::size_t k = 0; k < n_chunks; ++k) {
      std::size_t begin = k * c.chunk, end = std::min(t, begin + c.chunk);
      Tensor xc = gs.slice_rows(frames, begin, end);
      Tensor yc = encode_chunk(gs, m, xc, &caches, k);
      streamed.insert(streamed.end(), yc.value().begin(), yc.value().end());
    }
    for (std::size_t i = 0; i < streamed.size(); ++i) {
      worst = std::max(worst, std::abs(streamed[i] - batch.value()[i]));
    }
  }
  char detail[128];
  std::snprintf(detail, sizeof(detail),
                "%d configs, max |streaming - batch| = %.3g, tol 1e-6", trials,
                worst);
  report(1, "streaming/batch encoder equivalence", worst < 1e-6, detail);
}

// --- criterion 2: strict chunk causality ------------------------------------

void criterion_causality() {
  std::mt19937_64 rng(1002);
  int trials = 100, clean = 0;
  for (int trial = 0; trial < trials; ++trial) {
    ModelConfig c = random_small_config(rng);
    Model m = Model::init(c, 3000 + trial);
    std::size_t n_chunks = 2 + rng() % 3;
    std::size_t t = n_chunks * c.chunk - rng() % c.chunk;
    Tensor frames = randt({t, c.d_in}, rng);
    std::vector<double> mask = block_causal_mask(t, c.chunk);

    Graph g1;
    Tensor base = encode_offline(g1, m, frames, &mask);

    // Perturb every frame at and after a random chunk boundary; the boundary
    // always lies strictly inside the utterance.
    std::size_t cut = (1 + rng() % (n_chunks - 1)) * c.chunk;
    Tensor pert = Tensor::from({t, c.d_in}, frames.value());
    for (std::size_t i = cut * c.d_in; i < t * c.d_in; ++i) {
      pert.value()[i] += 1.0 + (rng() % 5);
    }
    Graph g2;
    Tensor other = encode_offline(g2, m, pert, &mask);

    bool exact = true;
    for (std::size_t i = 0; i < cut * c.d_model; ++i) {
      if (base.value()[i] != other.value()[i]) exact = false;
    }
    if (exact) ++clean;
  }
  char detail[128];
  std::snprintf(detail, sizeof(detail),
                "%d/%d trials bit-identical before the perturbed chunk", clean,
                trials);
  report(2, "encoder chunk causality (exact zero leakage)", clean == trials,
         detail);
}

// --- criterion 3: joint-loss gradients vs central differences --------------

void criterion_gradients() {
  ModelConfig c;
  c.n_enc = 2;
  c.m_dec = 1;
  c.k_dec = 1;
  c.d_model = 8;
  c.d_ff = 16;
  c.heads = 2;
  c.d_in = 6;
  c.vocab = 7;
  c.chunk = 3;
  c.l_enc = 4;
  c.l_dec = 3;
  c.c_max = 4;
  c.dropout = 0.0;
  Model m = Model::init(c, 4001);
  std::mt19937_64 rng(4002);
  Tensor frames = randt({7, 6}, rng);
  std::vector<int> targets = {3, 4, 2, 1};
  std::vector<int> counts = {2, 0, 1};

  auto eval = [&]() {
    Graph g;
    return joint_forward(g, m, frames, targets, counts, 0.2, 0.1).total.item();
  };
  m.zero_grads();
  Graph g;
  g.backward(joint_forward(g, m, frames, targets, counts, 0.2, 0.1).total);

  double worst = 0.0;
  std::string worst_name;
  std::mt19937_64 pick(4003);
  for (auto& [name, t] : m.named_params()) {
    Tensor leaf = t;
    for (int rep = 0; rep < 2; ++rep) {
      std::size_t i = pick() % leaf.size();
      double saved = leaf.value()[i];
      const double h = 1e-5;
      leaf.value()[i] = saved + h;
      double fp = eval();
      leaf.value()[i] = saved - h;
      double fm = eval();
      leaf.value()[i] = saved;
      double num = (fp - fm) / (2.0 * h);
      double ana = leaf.grad()[i];
      double rel =
          std::abs(num - ana) / std::max({1.0, std::abs(num), std::abs(ana)});
      if (rel > worst) {
        worst = rel;
        worst_name = name;
      }
    }
  }
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "worst relative error %.3g at %s, tol 1e-4", worst,
                worst_name.c_str());
  report(3, "joint-loss gradient correctness", worst < 1e-4, detail);
}

// --- criterion 4: beam search vs exhaustive enumeration ---------------------

struct ChunkPlan {
  Tensor context;
  std::size_t n_hat;
  bool is_last;
};

void exhaustive(const Model& m, const std::vector<ChunkPlan>& plan,
                std::size_t chunk, std::size_t step, DecoderState state,
                std::vector<int> tokens, double score, double* best_score,
                std::vector<int>* best_tokens) {
  const ChunkPlan& p = plan[chunk];
  std::size_t budget = p.n_hat + (p.is_last ? 2 : 0);
  if (step == budget) {
    if (p.is_last) {
      if (score > *best_score) {
        *best_score = score;
        *best_tokens = tokens;
      }
    } else {
      exhaustive(m, plan, chunk + 1, 0, std::move(state), std::move(tokens),
                 score, best_score, best_tokens);
    }
    return;
  }
  int prev = tokens.empty() ? m.cfg.sos : tokens.back();
  Graph g;
  DecoderState next = state;
  Tensor logits = decoder_step(g, m, &next, prev, p.context);
  std::vector<double> logp = apply_eos_policy(logits.value(), p.is_last,
                                              m.cfg.eos);
  for (std::size_t t = 0; t < logp.size(); ++t) {
    if (std::isinf(logp[t]) && logp[t] < 0) continue;
    if (static_cast<int>(t) == m.cfg.eos) {
      if (score + logp[t] > *best_score) {
        *best_score = score + logp[t];
        *best_tokens = tokens;
      }
      continue;
    }
    std::vector<int> tk = tokens;
    tk.push_back(static_cast<int>(t));
    exhaustive(m, plan, chunk, step + 1, next, std::move(tk), score + logp[t],
               best_score, best_tokens);
  }
}

void criterion_beam_vs_exhaustive() {
  std::mt19937_64 rng(1004);
  int trials = 100, agree = 0;
  for (int trial = 0; trial < trials; ++trial) {
    ModelConfig c;
    c.n_enc = 1;
    c.m_dec = 1;
    c.k_dec = 0;
    c.d_model = 8;
    c.d_ff = 16;
    c.heads = 2;
    c.d_in = 6;
    c.vocab = 5;
    c.chunk = 3;
    c.l_enc = 4;
    c.l_dec = 3;
    c.c_max = 4;
    c.dropout = 0.0;
    Model m = Model::init(c, 5000 + trial);
    Tensor c1 = randt({3, 8}, rng);
    Tensor c2 = randt({6, 8}, rng);
    std::vector<ChunkPlan> plan = {{c1, 1, false}, {c2, 1, true}};

    DecodeOptions opts;
    opts.beam = 4096;  // exhaustive-width beam
    ChunkBeamDecoder beam(m, opts);
    for (std::size_t k = 0; k < plan.size(); ++k) {
      beam.advance(plan[k].context, plan[k].n_hat, plan[k].is_last, k);
    }
    double best_score = -1e300;
    std::vector<int> best_tokens;
    exhaustive(m, plan, 0, 0, DecoderState::fresh(m), {}, 0.0, &best_score,
               &best_tokens);
    if (beam.best().tokens == best_tokens &&
        std::abs(beam.best().log_score - best_score) < 1e-9) {
      ++agree;
    }
  }
  char detail[96];
  std::snprintf(detail, sizeof(detail), "%d/%d decodes agree", agree, trials);
  report(4, "beam search vs exhaustive enumeration", agree == trials, detail);
}

// --- criterion 5: toy task training -----------------------------------------

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  auto rank = [](const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> rk(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
      std::size_t j = i;
      while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
      double r = (static_cast<double>(i + j)) / 2.0 + 1.0;
      for (std::size_t t = i; t <= j; ++t) rk[order[t]] = r;
      i = j + 1;
    }
    return rk;
  };
  std::vector<double> rx = rank(xs), ry = rank(ys);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(rx.size());
  my /= static_cast<double>(ry.size());
  double num = 0, dx = 0, dy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    num += (rx[i] - mx) * (ry[i] - my);
    dx += (rx[i] - mx) * (rx[i] - mx);
    dy += (ry[i] - my) * (ry[i] - my);
  }
  double den = std::sqrt(dx * dy);
  return den == 0.0 ? 1.0 : num / den;
}

// Mean Spearman correlation between decode step and the dominant frame of the
// head-and-block-averaged cross-attention, over up to 10 dev utterances.
double attention_monotonic_trend(const Model& m,
                                 const std::vector<PreparedUtt>& dev) {
  double rho_sum = 0.0;
  int rho_n = 0;
  for (const PreparedUtt& u : dev) {
    if (rho_n == 10) break;
    if (u.targets.size() < 4) continue;
    Graph g;
    Tensor frames = Tensor::from({u.t, u.d}, u.frames);
    std::vector<double> enc_mask = block_causal_mask(u.t, m.cfg.chunk);
    Tensor context = encode_offline(g, m, frames, &enc_mask);
    std::vector<std::size_t> gate = counts_to_gate_schedule(u.chunk_counts);
    std::vector<double> cross_mask = gate_cross_mask(gate, u.t, m.cfg.chunk);
    std::vector<int> tokens_in(u.targets.size());
    tokens_in[0] = m.cfg.sos;
    std::copy(u.targets.begin(), u.targets.end() - 1, tokens_in.begin() + 1);
    std::vector<std::vector<std::vector<double>>> dump;
    decode_batch(g, m, tokens_in, context, &cross_mask, &dump);

    std::size_t steps = tokens_in.size();
    std::vector<double> avg(steps * u.t, 0.0);
    for (const auto& blk : dump) {
      for (const auto& w : blk) {
        for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += w[i];
      }
    }
    std::vector<double> step_idx(steps), dominant(steps);
    for (std::size_t s = 0; s < steps; ++s) {
      step_idx[s] = static_cast<double>(s);
      std::size_t arg = 0;
      for (std::size_t f = 1; f < u.t; ++f) {
        if (avg[s * u.t + f] > avg[s * u.t + arg]) arg = f;
      }
      dominant[s] = static_cast<double>(arg);
    }
    rho_sum += spearman(step_idx, dominant);
    ++rho_n;
  }
  return rho_n == 0 ? 1.0 : rho_sum / static_cast<double>(rho_n);
}

void criterion_training() {
  RunConfig cfg = default_run_config();
  DecodeOptions dopts;
  dopts.beam = cfg.decode.beam;

  std::vector<PreparedUtt> dev;
  {
    DatasetSplit split = split_dataset(generate_dataset(cfg.data));
    for (const Utterance& u : split.dev) {
      dev.push_back(prepare_utterance(u, cfg.frontend, cfg.model.chunk,
                                      cfg.model.eos));
    }
  }

  bool converged = false;
  auto stop_when_good = [&](std::size_t step, const Model& m) {
    if (step < 1000 || step % 500 != 0) return false;
    EvalSummary s = evaluate_streaming(m, dev, dopts, cfg.decode.frame_ms);
    std::printf("    step %zu: dev cer %.4f, pred acc %.4f\n", step, s.cer,
                s.pred_acc);
    std::fflush(stdout);
    if (s.cer < 0.04 && s.pred_acc > 0.96) {
      converged = true;
      return true;
    }
    return false;
  };

  TrainOutcome out = train_model(cfg, nullptr, stop_when_good);
  (void)converged;
  EvalSummary stream = evaluate_streaming(out.model, dev, dopts,
                                          cfg.decode.frame_ms);
  EvalSummary offline = evaluate_offline(out.model, dev, dopts,
                                         cfg.decode.fsa_max_steps);
  // Companion sanity checks on the trained model: widening the beam must not
  // hurt CER by more than half a point, and the head-averaged cross-attention
  // of the gated decoder should track the frame axis monotonically.
  DecodeOptions greedy = dopts;
  greedy.beam = 1;
  EvalSummary beam1 =
      evaluate_streaming(out.model, dev, greedy, cfg.decode.frame_ms);
  double rho = attention_monotonic_trend(out.model, dev);
  std::printf("    beam %zu dev cer %.4f vs beam 1 cer %.4f; "
              "attention trend Spearman rho %.3f\n",
              dopts.beam, stream.cer, beam1.cer, rho);

  bool pass = out.steps_run <= 5000 && stream.cer < 0.05 &&
              stream.pred_acc > 0.95 && stream.cer <= offline.cer + 0.02 &&
              stream.cer <= beam1.cer + 0.005 && rho > 0.8;
  char detail[224];
  std::snprintf(detail, sizeof(detail),
                "%zu steps; dev cer %.4f (tol <0.05), pred acc %.4f "
                "(tol >0.95), offline cer %.4f (streaming <= offline + 0.02)",
                out.steps_run, stream.cer, stream.pred_acc, offline.cer);
  report(5, "toy transduction training", pass, detail);
}

// --- criterion 6: latency arithmetic -----------------------------------------

void criterion_latency() {
  std::vector<FrameSpan> spans = {{1, 4}, {6, 9}};
  std::vector<std::size_t> emitted = {0, 1};
  bool pass = true;
  double got[3];
  std::size_t cs[3] = {5, 10, 15};
  double want[3] = {300.0, 600.0, 900.0};
  for (int i = 0; i < 3; ++i) {
    got[i] = latency_report(cs[i], 60.0, spans, emitted).encoder_latency_ms;
    if (got[i] != want[i]) pass = false;
  }
  LatencyReport r = latency_report(5, 60.0, spans, emitted);
  if (r.mean_delay_frames != 1.0 || r.max_delay_frames != 1.0) pass = false;
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "c=5/10/15 @60ms -> %.0f/%.0f/%.0f ms; hand delays mean %.1f "
                "max %.1f frames",
                got[0], got[1], got[2], r.mean_delay_frames,
                r.max_delay_frames);
  report(6, "latency accounting", pass, detail);
}

// --- criterion 7: eos emission policy ----------------------------------------

void criterion_eos_policy() {
  bool pass = true;
  std::string why = "suppressed off final chunk; budget n+2 honored";

  // (a) eos mass is exactly removed on non-final chunks.
  std::vector<double> lp = apply_eos_policy({0.3, 5.0, -0.2, 1.1}, false, 1);
  if (!(std::isinf(lp[1]) && lp[1] < 0)) pass = false;
  double z = 0.0;
  for (double v : lp) {
    if (!std::isinf(v)) z += std::exp(v);
  }
  if (std::abs(z - 1.0) > 1e-12) pass = false;

  // (b) behavioral check across many random models: no eos mid-stream, the
  // final chunk runs at most n_hat + 2 extra steps per hypothesis.
  std::mt19937_64 rng(1007);
  for (int trial = 0; trial < 20 && pass; ++trial) {
    ModelConfig c;
    c.n_enc = 1;
    c.m_dec = 1;
    c.k_dec = 0;
    c.d_model = 8;
    c.d_ff = 16;
    c.heads = 2;
    c.d_in = 6;
    c.vocab = 5;
    c.chunk = 3;
    c.l_enc = 4;
    c.l_dec = 3;
    c.c_max = 4;
    c.dropout = 0.0;
    Model m = Model::init(c, 7000 + trial);
    Tensor ctx = randt({6, 8}, rng);
    DecodeOptions opts;
    opts.beam = 1;
    ChunkBeamDecoder beam(m, opts);
    beam.advance(ctx, 2, false, 0);
    // eos suppressed: the sole hypothesis must have exactly 2 real tokens.
    if (beam.best().tokens.size() != 2) {
      pass = false;
      why = "a non-final chunk emitted or lost a token";
    }
    std::size_t before = beam.total_steps();
    beam.advance(ctx, 1, true, 1);
    if (beam.total_steps() - before > 3) {  // n_hat=1 plus 2
      pass = false;
      why = "final chunk exceeded the n+2 step budget";
    }
    for (int tok : beam.best().tokens) {
      if (tok == m.cfg.eos) {
        pass = false;
        why = "eos leaked into the hypothesis";
      }
    }
  }
  report(7, "eos emission policy", pass, why);
}

// --- criterion 8: front-end arithmetic ----------------------------------------

void criterion_frontend() {
  FrontEndConfig fe;
  bool pass = fe.stacked_dim(80) == 560 && fe.stacked_dim(8) == 56;
  std::size_t checked = 0;
  for (std::size_t t_raw = 1; t_raw <= 120; ++t_raw) {
    std::vector<double> frames(t_raw * 3, 0.5);
    FrontEndOutput out = stack_and_downsample(frames, t_raw, 3, fe, {});
    if (out.t != (t_raw + 5) / 6 || out.d != 21 ||
        out.frames.size() != out.t * out.d) {
      pass = false;
    }
    ++checked;
  }
  // Spans stay 1-based and inside the downsampled range.
  std::vector<double> frames(60 * 3, 0.0);
  FrontEndOutput out = stack_and_downsample(
      frames, 60, 3, fe, {{1, 7}, {13, 30}, {55, 60}});
  for (const FrameSpan& s : out.spans) {
    if (s.begin < 1 || s.end > out.t || s.begin > s.end) pass = false;
  }
  char detail[128];
  std::snprintf(detail, sizeof(detail),
                "80 -> 560 dims; ceil(T/6) verified for %zu lengths; spans in "
                "range",
                checked);
  report(8, "front-end stacking and downsampling arithmetic", pass, detail);
}

}  // namespace

int main() {
  criterion_equivalence();
  criterion_causality();
  criterion_gradients();
  criterion_beam_vs_exhaustive();
  criterion_latency();
  criterion_eos_policy();
  criterion_frontend();
  criterion_training();  // last: by far the slowest
  if (g_failures > 0) {
    std::printf("%d criterion(s) FAILED\n", g_failures);
    return 1;
  }
  std::printf("all acceptance criteria passed\n");
  return 0;
}
