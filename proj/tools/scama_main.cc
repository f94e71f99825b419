// Train / eval / stream / dump-attention entry points.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "scama/checkpoint.h"
#include "scama/train.h"

namespace {

constexpr int kExitBadConfig = 2;
constexpr int kExitCheckpointMismatch = 3;
constexpr int kExitBadChunkRecord = 4;

struct Options {
  std::string config_path;
  std::string checkpoint_path = "scama.ckpt";
  std::string input_path = "-";
  std::string log_path;
  std::string mode = "streaming";
  std::size_t utt_index = 0;
  int chunk_override = -1;
  int beam_override = -1;
};

scama::RunConfig load_config_or_exit(const std::string& path) {
  try {
    return scama::load_run_config(path);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    std::exit(kExitBadConfig);
  }
}

scama::Model load_checkpoint_or_exit(const std::string& path) {
  try {
    return scama::load_checkpoint(path);
  } catch (const std::exception& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    std::exit(1);
  }
}

void check_compat(const scama::Model& m, const scama::RunConfig& cfg,
                  int chunk_override) {
  const scama::ModelConfig& c = m.cfg;
  std::ostringstream why;
  if (c.vocab != cfg.data.vocab_real + 2) {
    why << "vocab " << c.vocab << " vs config " << cfg.data.vocab_real + 2
        << "; ";
  }
  if (c.d_in != cfg.frontend.stacked_dim(cfg.data.d_raw)) {
    why << "d_in " << c.d_in << " vs config "
        << cfg.frontend.stacked_dim(cfg.data.d_raw) << "; ";
  }
  if (chunk_override > 0 &&
      static_cast<std::size_t>(chunk_override) != c.chunk) {
    why << "chunk " << chunk_override << " vs trained chunk " << c.chunk
        << " (predictor width is tied to the trained chunk); ";
  }
  std::string msg = why.str();
  if (!msg.empty()) {
    std::cerr << "checkpoint/config mismatch: " << msg << "\n";
    std::exit(kExitCheckpointMismatch);
  }
}

std::vector<scama::PreparedUtt> prepare_test_set(const scama::RunConfig& cfg,
                                                 const scama::Model& m) {
  scama::DatasetSplit split =
      scama::split_dataset(scama::generate_dataset(cfg.data));
  std::vector<scama::PreparedUtt> out;
  for (const scama::Utterance& u : split.test) {
    out.push_back(
        scama::prepare_utterance(u, cfg.frontend, m.cfg.chunk, m.cfg.eos));
  }
  return out;
}

int cmd_train(const Options& opt) {
  scama::RunConfig cfg = load_config_or_exit(opt.config_path);
  std::ofstream log_file;
  std::ostream* metrics = &std::cout;
  if (!opt.log_path.empty()) {
    log_file.open(opt.log_path);
    if (!log_file) {
      std::cerr << "cannot open metrics log " << opt.log_path << "\n";
      return 1;
    }
    metrics = &log_file;
  }
  try {
    scama::TrainOutcome outcome = scama::train_model(cfg, metrics);
    scama::save_checkpoint(outcome.model, opt.checkpoint_path);
    std::cerr << "trained " << outcome.steps_run << " steps, best dev loss "
              << outcome.best_dev_loss << ", parameters "
              << outcome.model.param_count() << ", checkpoint "
              << opt.checkpoint_path << "\n";
  } catch (const scama::NumericError& e) {
    std::cerr << "training aborted: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int cmd_eval(const Options& opt) {
  scama::RunConfig cfg = load_config_or_exit(opt.config_path);
  scama::Model model = load_checkpoint_or_exit(opt.checkpoint_path);
  check_compat(model, cfg, opt.chunk_override);
  scama::DecodeOptions dopts;
  dopts.beam = opt.beam_override > 0
                   ? static_cast<std::size_t>(opt.beam_override)
                   : cfg.decode.beam;
  dopts.length_norm = cfg.decode.length_norm;
  std::vector<scama::PreparedUtt> test = prepare_test_set(cfg, model);
  if (opt.mode == "offline") {
    scama::EvalSummary s =
        scama::evaluate_offline(model, test, dopts, cfg.decode.fsa_max_steps);
    std::cout << "mode\toffline\nutts\t" << s.utts << "\ncer\t" << s.cer
              << "\n";
  } else {
    scama::EvalSummary s =
        scama::evaluate_streaming(model, test, dopts, cfg.decode.frame_ms);
    std::cout << "mode\tstreaming\nutts\t" << s.utts << "\ncer\t" << s.cer
              << "\npred_acc\t" << s.pred_acc << "\nencoder_latency_ms\t"
              << s.latency.encoder_latency_ms << "\nmean_delay_frames\t"
              << s.latency.mean_delay_frames << "\nmax_delay_frames\t"
              << s.latency.max_delay_frames << "\n";
  }
  return 0;
}

int cmd_stream(const Options& opt) {
  scama::RunConfig cfg = load_config_or_exit(opt.config_path);
  scama::Model model = load_checkpoint_or_exit(opt.checkpoint_path);
  check_compat(model, cfg, opt.chunk_override);
  scama::DecodeOptions dopts;
  dopts.beam = opt.beam_override > 0
                   ? static_cast<std::size_t>(opt.beam_override)
                   : cfg.decode.beam;
  dopts.length_norm = cfg.decode.length_norm;

  std::ifstream file;
  std::istream* in = &std::cin;
  if (opt.input_path != "-") {
    file.open(opt.input_path);
    if (!file) {
      std::cerr << "cannot open " << opt.input_path << "\n";
      return 1;
    }
    in = &file;
  }

  // Records: "c_k d v1 ... v_{c_k*d}" per line, model-rate features. The
  // last chunk is only known at EOF, so one record is held back.
  scama::StreamSession sess(model, dopts);
  struct Record {
    std::vector<double> values;
    std::size_t rows = 0;
  };
  auto parse = [&](const std::string& line, std::size_t lineno) -> Record {
    std::istringstream ls(line);
    Record r;
    std::size_t d = 0;
    if (!(ls >> r.rows >> d) || r.rows == 0 || d != model.cfg.d_in) {
      std::cerr << "malformed chunk record at line " << lineno << "\n";
      std::exit(kExitBadChunkRecord);
    }
    r.values.resize(r.rows * d);
    for (double& v : r.values) {
      if (!(ls >> v)) {
        std::cerr << "malformed chunk record at line " << lineno << "\n";
        std::exit(kExitBadChunkRecord);
      }
    }
    return r;
  };

  auto emit = [](std::size_t chunk_index, const std::vector<int>& toks) {
    std::cout << chunk_index << '\t';
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (i) std::cout << ' ';
      std::cout << toks[i];
    }
    std::cout << '\n';
  };

  std::string line;
  std::size_t lineno = 0, chunk_index = 0;
  bool have_pending = false;
  Record pending;
  while (std::getline(*in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Record rec = parse(line, lineno);
    if (have_pending) {
      emit(chunk_index,
           sess.push_chunk(pending.values, pending.rows, /*is_last=*/false));
      ++chunk_index;
    }
    pending = std::move(rec);
    have_pending = true;
  }
  if (!have_pending) {
    std::cerr << "no chunk records on input\n";
    return 1;
  }
  emit(chunk_index,
       sess.push_chunk(pending.values, pending.rows, /*is_last=*/true));
  const scama::BeamHypothesis& best = sess.best();
  std::cout << "final\t";
  for (std::size_t i = 0; i < best.tokens.size(); ++i) {
    if (i) std::cout << ' ';
    std::cout << best.tokens[i];
  }
  std::cout << "\tencoder_latency_ms="
            << static_cast<double>(model.cfg.chunk) * cfg.decode.frame_ms
            << "\n";
  return 0;
}

int cmd_dump_attention(const Options& opt) {
  scama::RunConfig cfg = load_config_or_exit(opt.config_path);
  scama::Model model = load_checkpoint_or_exit(opt.checkpoint_path);
  check_compat(model, cfg, opt.chunk_override);
  std::vector<scama::PreparedUtt> test = prepare_test_set(cfg, model);
  if (opt.utt_index >= test.size()) {
    std::cerr << "utterance index " << opt.utt_index << " out of range ("
              << test.size() << " test utterances)\n";
    return 1;
  }
  const scama::PreparedUtt& u = test[opt.utt_index];

  scama::Graph g;
  scama::Tensor frames = scama::Tensor::from({u.t, u.d}, u.frames);
  std::vector<double> enc_mask = scama::block_causal_mask(u.t, model.cfg.chunk);
  scama::Tensor context = scama::encode_offline(g, model, frames, &enc_mask);
  std::vector<std::size_t> gate =
      scama::counts_to_gate_schedule(u.chunk_counts);
  std::vector<double> cross_mask =
      scama::gate_cross_mask(gate, u.t, model.cfg.chunk);
  std::vector<int> tokens_in(u.targets.size());
  tokens_in[0] = model.cfg.sos;
  std::copy(u.targets.begin(), u.targets.end() - 1, tokens_in.begin() + 1);
  std::vector<std::vector<std::vector<double>>> dump;
  scama::decode_batch(g, model, tokens_in, context, &cross_mask, &dump);

  std::cout << "block,head,step,frame,weight\n";
  for (std::size_t b = 0; b < dump.size(); ++b) {
    for (std::size_t h = 0; h < dump[b].size(); ++h) {
      const std::vector<double>& w = dump[b][h];
      std::size_t steps = tokens_in.size();
      std::size_t t = w.size() / steps;
      for (std::size_t s = 0; s < steps; ++s) {
        for (std::size_t f = 0; f < t; ++f) {
          std::cout << b << ',' << h << ',' << s << ',' << f << ','
                    << w[s * t + f] << '\n';
        }
      }
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SCAMA streaming encoder-decoder toolkit"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "run config path")
        ->required();
    sub->add_option("--checkpoint", opt.checkpoint_path, "checkpoint path");
    sub->add_option("--chunk", opt.chunk_override, "chunk size override");
    sub->add_option("--beam", opt.beam_override, "beam width override");
  };

  CLI::App* train = app.add_subcommand("train", "train on the synthetic task");
  add_common(train);
  train->add_option("--log", opt.log_path, "metrics log path (default stdout)");

  CLI::App* eval = app.add_subcommand("eval", "compute CER on the test split");
  add_common(eval);
  eval->add_option("--mode", opt.mode, "offline|streaming")
      ->check(CLI::IsMember({"offline", "streaming"}));

  CLI::App* stream =
      app.add_subcommand("stream", "decode chunk records from a file or pipe");
  add_common(stream);
  stream->add_option("--input", opt.input_path, "chunk record file or -");

  CLI::App* dump =
      app.add_subcommand("dump-attention", "CSV of cross-attention weights");
  add_common(dump);
  dump->add_option("--utt", opt.utt_index, "test utterance index");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(opt);
    if (eval->parsed()) return cmd_eval(opt);
    if (stream->parsed()) return cmd_stream(opt);
    if (dump->parsed()) return cmd_dump_attention(opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
