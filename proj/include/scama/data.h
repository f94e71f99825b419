// Synthetic transduction task with exact alignments, the stacking/downsample
// front end, light time-frequency masking, and the character error rate.

#ifndef SCAMA_DATA_H_
#define SCAMA_DATA_H_

#include <cstdint>
#include <random>
#include <vector>

#include "scama/scama.h"

namespace scama {

struct Utterance {
  std::vector<double> frames;  // t_raw x d_raw, row-major
  std::size_t t_raw = 0;
  std::size_t d_raw = 0;
  std::vector<int> tokens;        // real token ids (no <sos>/<eos>)
  std::vector<FrameSpan> spans;   // per-token, 1-based inclusive, raw rate
};

struct GenConfig {
  std::uint64_t seed = 1;
  std::size_t n_utts = 100;
  std::size_t vocab_real = 30;   // ids 2..vocab_real+1; 0/1 are <sos>/<eos>
  std::size_t d_raw = 8;
  std::size_t min_tokens = 3, max_tokens = 8;
  std::size_t min_span = 6, max_span = 12;   // raw frames per token
  // Silence frames between tokens. A floor of 1 keeps utterances
  // unambiguous: with zero-length gaps a repeated token is
  // indistinguishable from one long span of the same token.
  std::size_t min_gap = 1, max_gap = 4;
  double noise = 0.25;
  int first_token_id = 2;
};

// Each token id maps to a fixed mean feature vector (a pure function of the
// seed), emitted over a random-length span plus noise, with silence gaps.
std::vector<Utterance> generate_dataset(const GenConfig& cfg);

// Token mean patterns used by the generator (one row per real token id,
// starting at first_token_id). Exposed for the separability check.
std::vector<std::vector<double>> token_patterns(const GenConfig& cfg);

// Deterministic split by utterance index: 8/10 train, 1/10 dev, 1/10 test.
struct DatasetSplit {
  std::vector<Utterance> train, dev, test;
};
DatasetSplit split_dataset(std::vector<Utterance> all);

struct FrontEndConfig {
  std::size_t left = 3, right = 3;
  std::size_t factor = 6;  // frame-rate downsample
  std::size_t stacked_dim(std::size_t d_raw) const {
    return (left + 1 + right) * d_raw;
  }
};

struct FrontEndOutput {
  std::vector<double> frames;  // t x d_stacked
  std::size_t t = 0;
  std::size_t d = 0;
  std::vector<FrameSpan> spans;  // remapped to the model rate
};

// Stacks each kept frame with its context window (edge frames replicate) and
// keeps every factor-th frame starting at the first.
FrontEndOutput stack_and_downsample(const std::vector<double>& frames,
                                    std::size_t t_raw, std::size_t d_raw,
                                    const FrontEndConfig& cfg,
                                    const std::vector<FrameSpan>& spans);

// Zeroes n_freq random channel bands of width <= f and n_time random frame
// bands of width <= t_mask, in place.
void spec_augment_lite(std::vector<double>* frames, std::size_t t,
                       std::size_t d, std::size_t n_freq, std::size_t f,
                       std::size_t n_time, std::size_t t_mask,
                       std::mt19937_64& rng);

// Levenshtein(sub+ins+del) / |ref|; may exceed 1. Throws on empty ref.
double cer(const std::vector<int>& ref, const std::vector<int>& hyp);

}  // namespace scama

#endif  // SCAMA_DATA_H_
