// Run configuration: flat key = value text with [section] headers. Unknown
// sections or keys are rejected; parse -> serialize -> parse round-trips.

#ifndef SCAMA_CONFIG_H_
#define SCAMA_CONFIG_H_

#include <string>

#include "scama/data.h"
#include "scama/model.h"

namespace scama {

struct TrainConfig {
  double lr_peak = 1e-3;
  std::size_t warmup_steps = 1000;
  std::size_t batch_size = 8;
  std::size_t max_steps = 5000;
  double alpha = 0.2;
  double label_smoothing = 0.1;
  std::uint64_t seed = 1;
  std::size_t eval_every = 250;
  std::size_t patience = 10;  // dev evaluations without improvement
  // Gaussian noise added to the stacked features each step (training only);
  // label-safe augmentation against memorizing per-utterance noise.
  double noise_aug = 0.0;
  // SpecAugment-style masking of the raw features (training only).
  std::size_t sa_freq_masks = 1;
  std::size_t sa_freq_width = 2;
  std::size_t sa_time_masks = 1;
  std::size_t sa_time_width = 4;
};

struct DecodeConfig {
  std::size_t beam = 4;
  bool length_norm = false;
  std::size_t fsa_max_steps = 40;  // offline full-attention step cap
  double frame_ms = 60.0;
};

struct RunConfig {
  ModelConfig model;   // model.c_max == 0 means derive from training data
  TrainConfig train;
  GenConfig data;
  FrontEndConfig frontend;
  DecodeConfig decode;

  void validate() const;
};

// Toy preset: everything a desk-scale run needs, training in minutes.
RunConfig default_run_config();

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);  // applies SCAMA_SEED
std::string serialize_run_config(const RunConfig& cfg);

}  // namespace scama

#endif  // SCAMA_CONFIG_H_
