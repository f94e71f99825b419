#include "scama/train.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace scama {

Adam::Adam(const std::vector<std::pair<std::string, Tensor>>& params,
           double lr_peak, std::size_t warmup_steps)
    : lr_peak_(lr_peak), warmup_(std::max<std::size_t>(1, warmup_steps)) {
  for (const auto& [name, t] : params) {
    params_.push_back(t);
    m_.emplace_back(t.size(), 0.0);
    v_.emplace_back(t.size(), 0.0);
  }
}

double Adam::learning_rate(std::size_t step) const {
  double s = static_cast<double>(step);
  double w = static_cast<double>(warmup_);
  return lr_peak_ * std::min(s / w, std::sqrt(w / s));
}

void Adam::step(std::size_t step) {
  double lr = learning_rate(step);
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step));
  for (std::size_t p = 0; p < params_.size(); ++p) {
    Tensor& t = params_[p];
    for (std::size_t i = 0; i < t.size(); ++i) {
      double g = t.grad()[i];
      m_[p][i] = beta1_ * m_[p][i] + (1.0 - beta1_) * g;
      v_[p][i] = beta2_ * v_[p][i] + (1.0 - beta2_) * g * g;
      double mhat = m_[p][i] / bc1;
      double vhat = v_[p][i] / bc2;
      t.value()[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

PreparedUtt prepare_utterance(const Utterance& u, const FrontEndConfig& fe,
                              std::size_t chunk, int eos) {
  FrontEndOutput out =
      stack_and_downsample(u.frames, u.t_raw, u.d_raw, fe, u.spans);
  PreparedUtt p;
  p.frames = std::move(out.frames);
  p.t = out.t;
  p.d = out.d;
  p.spans = std::move(out.spans);
  p.ref_tokens = u.tokens;
  p.targets = u.tokens;
  p.targets.push_back(eos);
  p.chunk_counts = derive_chunk_counts(p.spans, chunk, p.t);
  return p;
}

std::size_t max_chunk_count(const std::vector<PreparedUtt>& utts) {
  int mx = 1;
  for (const PreparedUtt& u : utts) {
    for (int c : u.chunk_counts) mx = std::max(mx, c);
  }
  return static_cast<std::size_t>(mx);
}

namespace {

double dev_joint_loss(const Model& m, const std::vector<PreparedUtt>& dev,
                      double alpha, double smoothing) {
  double total = 0.0;
  for (const PreparedUtt& u : dev) {
    Graph g;  // eval mode
    Tensor frames = Tensor::from({u.t, u.d}, u.frames);
    JointForward jf =
        joint_forward(g, m, frames, u.targets, u.chunk_counts, alpha,
                      smoothing);
    total += jf.total.item();
  }
  return dev.empty() ? 0.0 : total / static_cast<double>(dev.size());
}

std::vector<std::vector<double>> snapshot(const Model& m) {
  std::vector<std::vector<double>> vals;
  for (const auto& [name, t] : m.named_params()) vals.push_back(t.value());
  return vals;
}

void restore(const Model& m, const std::vector<std::vector<double>>& vals) {
  auto params = m.named_params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const_cast<Tensor&>(params[i].second).value() = vals[i];
  }
}

}  // namespace

TrainOutcome train_model(
    const RunConfig& cfg, std::ostream* metrics,
    const std::function<bool(std::size_t, const Model&)>& periodic) {
  cfg.validate();
  DatasetSplit split = split_dataset(generate_dataset(cfg.data));
  ModelConfig mc = cfg.model;

  std::vector<PreparedUtt> train, dev;
  for (const Utterance& u : split.train) {
    train.push_back(prepare_utterance(u, cfg.frontend, mc.chunk, mc.eos));
  }
  for (const Utterance& u : split.dev) {
    dev.push_back(prepare_utterance(u, cfg.frontend, mc.chunk, mc.eos));
  }
  if (mc.c_max == 0) mc.c_max = max_chunk_count(train);

  Model model = Model::init(mc, cfg.train.seed);
  Adam opt(model.named_params(), cfg.train.lr_peak, cfg.train.warmup_steps);

  std::mt19937_64 shuffle_rng(cfg.train.seed ^ 0x73687566666c65ULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), shuffle_rng);
  std::size_t cursor = 0;

  TrainOutcome out;
  double best_dev = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best_params = snapshot(model);
  std::size_t evals_since_best = 0;

  for (std::size_t step = 1; step <= cfg.train.max_steps; ++step) {
    model.zero_grads();
    double loss_sum = 0.0, e2e_sum = 0.0, pred_sum = 0.0;
    std::size_t correct = 0, chunks = 0;
    for (std::size_t b = 0; b < cfg.train.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        cursor = 0;
      }
      const PreparedUtt& u = train[order[cursor++]];

      std::vector<double> frames_aug = u.frames;
      std::uint64_t graph_seed =
          cfg.train.seed * 1000003ULL + step * 131ULL + b;
      Graph g(graph_seed, /*training=*/true);
      if (cfg.train.sa_freq_masks + cfg.train.sa_time_masks > 0 && u.t > 2 &&
          u.d > 2) {
        spec_augment_lite(&frames_aug, u.t, u.d, cfg.train.sa_freq_masks,
                          std::min(cfg.train.sa_freq_width, u.d - 1),
                          cfg.train.sa_time_masks,
                          std::min(cfg.train.sa_time_width, u.t - 1),
                          g.rng());
      }
      if (cfg.train.noise_aug > 0.0) {
        std::normal_distribution<double> jitter(0.0, cfg.train.noise_aug);
        for (double& x : frames_aug) x += jitter(g.rng());
      }
      Tensor frames = Tensor::from({u.t, u.d}, frames_aug);
      JointForward jf =
          joint_forward(g, model, frames, u.targets, u.chunk_counts,
                        cfg.train.alpha, cfg.train.label_smoothing);
      Tensor scaled =
          g.scale(jf.total, 1.0 / static_cast<double>(cfg.train.batch_size));
      g.backward(scaled);
      loss_sum += jf.total.item();
      e2e_sum += jf.l_e2e.item();
      pred_sum += jf.l_pred.item();
      correct += jf.chunks_correct;
      chunks += jf.chunks_total;
    }
    double n = static_cast<double>(cfg.train.batch_size);
    double loss = loss_sum / n;
    if (!std::isfinite(loss)) {
      throw NumericError("non-finite training loss at step " +
                         std::to_string(step));
    }
    opt.step(step);
    out.steps_run = step;
    out.last_pred_acc =
        chunks == 0 ? 0.0
                    : static_cast<double>(correct) / static_cast<double>(chunks);
    if (metrics != nullptr) {
      (*metrics) << step << '\t' << loss << '\t' << e2e_sum / n << '\t'
                 << pred_sum / n << '\t' << out.last_pred_acc << '\n';
    }

    if (step % cfg.train.eval_every == 0 || step == cfg.train.max_steps) {
      double dl = dev_joint_loss(model, dev, cfg.train.alpha,
                                 cfg.train.label_smoothing);
      if (dl < best_dev) {
        best_dev = dl;
        best_params = snapshot(model);
        evals_since_best = 0;
      } else {
        ++evals_since_best;
      }
      bool stop_requested = periodic && periodic(step, model);
      if (stop_requested || evals_since_best >= cfg.train.patience) break;
    }
  }

  restore(model, best_params);
  out.best_dev_loss = best_dev;
  out.model = std::move(model);
  return out;
}

namespace {

double edits(const std::vector<int>& ref, const std::vector<int>& hyp) {
  return cer(ref, hyp) * static_cast<double>(ref.size());
}

}  // namespace

EvalSummary evaluate_streaming(const Model& m,
                               const std::vector<PreparedUtt>& utts,
                               DecodeOptions opts, double frame_ms) {
  EvalSummary s;
  double total_edits = 0.0, total_ref = 0.0;
  std::size_t chunks_correct = 0, chunks_total = 0;
  double delay_sum = 0.0;
  std::size_t delay_tokens = 0;
  for (const PreparedUtt& u : utts) {
    StreamSession sess(m, opts);
    std::size_t c = m.cfg.chunk;
    std::size_t n_chunks = (u.t + c - 1) / c;
    for (std::size_t k = 0; k < n_chunks; ++k) {
      std::size_t begin = k * c;
      std::size_t rows = std::min(c, u.t - begin);
      std::vector<double> chunk(u.frames.begin() + begin * u.d,
                                u.frames.begin() + (begin + rows) * u.d);
      sess.push_chunk(chunk, rows, k + 1 == n_chunks);
    }
    const BeamHypothesis& best = sess.best();
    total_edits += edits(u.ref_tokens, best.tokens);
    total_ref += static_cast<double>(u.ref_tokens.size());
    for (std::size_t k = 0; k < n_chunks; ++k) {
      int label = std::min(u.chunk_counts[k], static_cast<int>(m.cfg.c_max));
      if (sess.predicted_counts()[k] == static_cast<std::size_t>(label)) {
        ++chunks_correct;
      }
    }
    chunks_total += n_chunks;
    LatencyReport lr =
        latency_report(c, frame_ms, u.spans, best.token_chunks);
    delay_sum += lr.mean_delay_frames * static_cast<double>(lr.tokens);
    delay_tokens += lr.tokens;
    s.latency.max_delay_frames =
        std::max(s.latency.max_delay_frames, lr.max_delay_frames);
    s.latency.chunk_size = lr.chunk_size;
    s.latency.frame_ms = lr.frame_ms;
    s.latency.encoder_latency_ms = lr.encoder_latency_ms;
  }
  s.utts = utts.size();
  s.cer = total_ref > 0.0 ? total_edits / total_ref : 0.0;
  s.pred_acc = chunks_total == 0 ? 0.0
                                 : static_cast<double>(chunks_correct) /
                                       static_cast<double>(chunks_total);
  s.latency.tokens = delay_tokens;
  s.latency.mean_delay_frames =
      delay_tokens == 0 ? 0.0 : delay_sum / static_cast<double>(delay_tokens);
  return s;
}

EvalSummary evaluate_offline(const Model& m,
                             const std::vector<PreparedUtt>& utts,
                             DecodeOptions opts, std::size_t fsa_max_steps) {
  EvalSummary s;
  double total_edits = 0.0, total_ref = 0.0;
  for (const PreparedUtt& u : utts) {
    Tensor frames = Tensor::from({u.t, u.d}, u.frames);
    std::vector<int> hyp = decode_offline_fsa(m, frames, opts, fsa_max_steps);
    total_edits += edits(u.ref_tokens, hyp);
    total_ref += static_cast<double>(u.ref_tokens.size());
  }
  s.utts = utts.size();
  s.cer = total_ref > 0.0 ? total_edits / total_ref : 0.0;
  return s;
}

}  // namespace scama
