// Joint training (adaptive moments, inverse-square-root warmup, dev-loss
// early stopping) and offline/streaming evaluation.

#ifndef SCAMA_TRAIN_H_
#define SCAMA_TRAIN_H_

#include <functional>
#include <ostream>

#include "scama/config.h"
#include "scama/decode.h"

namespace scama {

class Adam {
 public:
  Adam(const std::vector<std::pair<std::string, Tensor>>& params,
       double lr_peak, std::size_t warmup_steps);

  // Applies one update from the accumulated gradients; `step` is 1-based.
  void step(std::size_t step);
  double learning_rate(std::size_t step) const;

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_peak_;
  std::size_t warmup_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
};

// One utterance after the front end, ready for training or scoring.
struct PreparedUtt {
  std::vector<double> frames;  // t x d stacked features
  std::size_t t = 0, d = 0;
  std::vector<int> ref_tokens;      // without <eos>
  std::vector<int> targets;         // ref tokens + <eos>
  std::vector<int> chunk_counts;    // unclipped ground truth
  std::vector<FrameSpan> spans;     // model-rate alignments
};

PreparedUtt prepare_utterance(const Utterance& u, const FrontEndConfig& fe,
                              std::size_t chunk, int eos);

// Maximum per-chunk token count over a corpus (predictor class bound).
std::size_t max_chunk_count(const std::vector<PreparedUtt>& utts);

struct TrainOutcome {
  Model model;
  std::size_t steps_run = 0;
  double best_dev_loss = 0.0;
  double last_pred_acc = 0.0;
};

// Trains on the config's synthetic data. `metrics`, when non-null, receives
// one line per step: step<TAB>loss<TAB>l_e2e<TAB>l_pred<TAB>pred_acc.
// `periodic`, when set, runs every eval_every steps; returning true stops
// training early.
TrainOutcome train_model(
    const RunConfig& cfg, std::ostream* metrics = nullptr,
    const std::function<bool(std::size_t, const Model&)>& periodic = nullptr);

struct EvalSummary {
  double cer = 0.0;       // corpus-level: total edits / total ref tokens
  double pred_acc = 0.0;  // chunk-count accuracy (streaming mode only)
  LatencyReport latency;  // streaming mode only
  std::size_t utts = 0;
};

EvalSummary evaluate_streaming(const Model& m,
                               const std::vector<PreparedUtt>& utts,
                               DecodeOptions opts, double frame_ms);
EvalSummary evaluate_offline(const Model& m,
                             const std::vector<PreparedUtt>& utts,
                             DecodeOptions opts, std::size_t fsa_max_steps);

}  // namespace scama

#endif  // SCAMA_TRAIN_H_
