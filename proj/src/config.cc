#include "scama/config.h"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace scama {

void RunConfig::validate() const {
  ModelConfig m = model;
  if (m.c_max == 0) m.c_max = 1;  // derived later from data
  m.validate();
  if (model.d_in != frontend.stacked_dim(data.d_raw)) {
    throw ConfigError("model.d_in must equal (left+1+right)*data.d_raw = " +
                      std::to_string(frontend.stacked_dim(data.d_raw)));
  }
  if (model.vocab != data.vocab_real + 2) {
    throw ConfigError("model.vocab must equal data.vocab_real + 2 specials");
  }
  if (train.alpha < 0.0) throw ConfigError("train.alpha must be >= 0");
  if (train.noise_aug < 0.0) throw ConfigError("train.noise_aug must be >= 0");
  if (train.label_smoothing < 0.0 || train.label_smoothing >= 1.0) {
    throw ConfigError("train.label_smoothing must be in [0,1)");
  }
  if (train.batch_size == 0 || train.max_steps == 0) {
    throw ConfigError("train.batch_size and train.max_steps must be >= 1");
  }
  if (decode.beam == 0) throw ConfigError("decode.beam must be >= 1");
  if (decode.frame_ms <= 0.0) throw ConfigError("decode.frame_ms must be > 0");
}

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.model.n_enc = 4;
  cfg.model.m_dec = 2;
  cfg.model.k_dec = 1;
  cfg.model.d_model = 64;
  cfg.model.d_ff = 256;
  cfg.model.heads = 4;
  cfg.model.chunk = 5;
  cfg.model.l_enc = 8;
  cfg.model.l_dec = 4;
  cfg.model.c_max = 0;  // derive from training data
  cfg.model.dropout = 0.1;
  cfg.data = GenConfig{};
  cfg.data.n_utts = 4000;
  cfg.data.noise = 0.15;
  // Winning toy recipe: train-time feature jitter generalizes better here
  // than masking (time masks erase token onsets and poison the chunk-count
  // labels, and the generator's own noise is memorized without jitter).
  cfg.train.noise_aug = 0.1;
  cfg.train.sa_freq_masks = 0;
  cfg.train.sa_time_masks = 0;
  cfg.model.vocab = cfg.data.vocab_real + 2;
  cfg.model.d_in = cfg.frontend.stacked_dim(cfg.data.d_raw);
  return cfg;
}

namespace {

using Setter = std::function<void(const std::string&)>;

std::size_t to_size(const std::string& v) {
  return static_cast<std::size_t>(std::stoull(v));
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("expected boolean, got '" + v + "'");
}

std::map<std::string, Setter> make_setters(RunConfig* c) {
  std::map<std::string, Setter> s;
  auto& m = c->model;
  s["model.n_enc"] = [&m](const std::string& v) { m.n_enc = to_size(v); };
  s["model.m_dec"] = [&m](const std::string& v) { m.m_dec = to_size(v); };
  s["model.k_dec"] = [&m](const std::string& v) { m.k_dec = to_size(v); };
  s["model.d_model"] = [&m](const std::string& v) { m.d_model = to_size(v); };
  s["model.d_ff"] = [&m](const std::string& v) { m.d_ff = to_size(v); };
  s["model.heads"] = [&m](const std::string& v) { m.heads = to_size(v); };
  s["model.chunk"] = [&m](const std::string& v) { m.chunk = to_size(v); };
  s["model.l_enc"] = [&m](const std::string& v) { m.l_enc = to_size(v); };
  s["model.l_enc_ahead"] = [&m](const std::string& v) {
    m.l_enc_ahead = to_size(v);
  };
  s["model.l_dec"] = [&m](const std::string& v) { m.l_dec = to_size(v); };
  s["model.c_max"] = [&m](const std::string& v) { m.c_max = to_size(v); };
  s["model.dropout"] = [&m](const std::string& v) { m.dropout = std::stod(v); };
  auto& t = c->train;
  s["train.lr_peak"] = [&t](const std::string& v) { t.lr_peak = std::stod(v); };
  s["train.warmup_steps"] = [&t](const std::string& v) {
    t.warmup_steps = to_size(v);
  };
  s["train.batch_size"] = [&t](const std::string& v) {
    t.batch_size = to_size(v);
  };
  s["train.max_steps"] = [&t](const std::string& v) {
    t.max_steps = to_size(v);
  };
  s["train.alpha"] = [&t](const std::string& v) { t.alpha = std::stod(v); };
  s["train.label_smoothing"] = [&t](const std::string& v) {
    t.label_smoothing = std::stod(v);
  };
  s["train.noise_aug"] = [&t](const std::string& v) {
    t.noise_aug = std::stod(v);
  };
  s["train.seed"] = [&t](const std::string& v) { t.seed = std::stoull(v); };
  s["train.eval_every"] = [&t](const std::string& v) {
    t.eval_every = to_size(v);
  };
  s["train.patience"] = [&t](const std::string& v) { t.patience = to_size(v); };
  s["train.sa_freq_masks"] = [&t](const std::string& v) {
    t.sa_freq_masks = to_size(v);
  };
  s["train.sa_freq_width"] = [&t](const std::string& v) {
    t.sa_freq_width = to_size(v);
  };
  s["train.sa_time_masks"] = [&t](const std::string& v) {
    t.sa_time_masks = to_size(v);
  };
  s["train.sa_time_width"] = [&t](const std::string& v) {
    t.sa_time_width = to_size(v);
  };
  auto& d = c->data;
  s["data.seed"] = [&d](const std::string& v) { d.seed = std::stoull(v); };
  s["data.n_utts"] = [&d](const std::string& v) { d.n_utts = to_size(v); };
  s["data.vocab_real"] = [&d](const std::string& v) {
    d.vocab_real = to_size(v);
  };
  s["data.d_raw"] = [&d](const std::string& v) { d.d_raw = to_size(v); };
  s["data.min_tokens"] = [&d](const std::string& v) {
    d.min_tokens = to_size(v);
  };
  s["data.max_tokens"] = [&d](const std::string& v) {
    d.max_tokens = to_size(v);
  };
  s["data.min_span"] = [&d](const std::string& v) { d.min_span = to_size(v); };
  s["data.max_span"] = [&d](const std::string& v) { d.max_span = to_size(v); };
  s["data.min_gap"] = [&d](const std::string& v) { d.min_gap = to_size(v); };
  s["data.max_gap"] = [&d](const std::string& v) { d.max_gap = to_size(v); };
  s["data.noise"] = [&d](const std::string& v) { d.noise = std::stod(v); };
  auto& f = c->frontend;
  s["frontend.left"] = [&f](const std::string& v) { f.left = to_size(v); };
  s["frontend.right"] = [&f](const std::string& v) { f.right = to_size(v); };
  s["frontend.factor"] = [&f](const std::string& v) { f.factor = to_size(v); };
  auto& dc = c->decode;
  s["decode.beam"] = [&dc](const std::string& v) { dc.beam = to_size(v); };
  s["decode.length_norm"] = [&dc](const std::string& v) {
    dc.length_norm = to_bool(v);
  };
  s["decode.fsa_max_steps"] = [&dc](const std::string& v) {
    dc.fsa_max_steps = to_size(v);
  };
  s["decode.frame_ms"] = [&dc](const std::string& v) {
    dc.frame_ms = std::stod(v);
  };
  return s;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg = default_run_config();
  auto setters = make_setters(&cfg);
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      if (section != "model" && section != "train" && section != "data" &&
          section != "frontend" && section != "decode") {
        throw ConfigError("unknown section [" + section + "] at line " +
                          std::to_string(lineno));
      }
      continue;
    }
    std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("expected key = value at line " +
                        std::to_string(lineno));
    }
    std::string key = section + "." + trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigError("unknown key '" + key + "' at line " +
                        std::to_string(lineno));
    }
    try {
      it->second(value);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("bad value '" + value + "' for " + key);
    }
  }
  // Derived fields follow the data section.
  cfg.model.vocab = cfg.data.vocab_real + 2;
  cfg.model.d_in = cfg.frontend.stacked_dim(cfg.data.d_raw);
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  RunConfig cfg = parse_run_config(text);
  if (const char* env = std::getenv("SCAMA_SEED")) {
    cfg.train.seed = std::stoull(env);
  }
  return cfg;
}

std::string serialize_run_config(const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "[model]\n"
     << "n_enc = " << c.model.n_enc << "\n"
     << "m_dec = " << c.model.m_dec << "\n"
     << "k_dec = " << c.model.k_dec << "\n"
     << "d_model = " << c.model.d_model << "\n"
     << "d_ff = " << c.model.d_ff << "\n"
     << "heads = " << c.model.heads << "\n"
     << "chunk = " << c.model.chunk << "\n"
     << "l_enc = " << c.model.l_enc << "\n"
     << "l_enc_ahead = " << c.model.l_enc_ahead << "\n"
     << "l_dec = " << c.model.l_dec << "\n"
     << "c_max = " << c.model.c_max << "\n"
     << "dropout = " << c.model.dropout << "\n"
     << "[train]\n"
     << "lr_peak = " << c.train.lr_peak << "\n"
     << "warmup_steps = " << c.train.warmup_steps << "\n"
     << "batch_size = " << c.train.batch_size << "\n"
     << "max_steps = " << c.train.max_steps << "\n"
     << "alpha = " << c.train.alpha << "\n"
     << "label_smoothing = " << c.train.label_smoothing << "\n"
     << "noise_aug = " << c.train.noise_aug << "\n"
     << "seed = " << c.train.seed << "\n"
     << "eval_every = " << c.train.eval_every << "\n"
     << "patience = " << c.train.patience << "\n"
     << "sa_freq_masks = " << c.train.sa_freq_masks << "\n"
     << "sa_freq_width = " << c.train.sa_freq_width << "\n"
     << "sa_time_masks = " << c.train.sa_time_masks << "\n"
     << "sa_time_width = " << c.train.sa_time_width << "\n"
     << "[data]\n"
     << "seed = " << c.data.seed << "\n"
     << "n_utts = " << c.data.n_utts << "\n"
     << "vocab_real = " << c.data.vocab_real << "\n"
     << "d_raw = " << c.data.d_raw << "\n"
     << "min_tokens = " << c.data.min_tokens << "\n"
     << "max_tokens = " << c.data.max_tokens << "\n"
     << "min_span = " << c.data.min_span << "\n"
     << "max_span = " << c.data.max_span << "\n"
     << "min_gap = " << c.data.min_gap << "\n"
     << "max_gap = " << c.data.max_gap << "\n"
     << "noise = " << c.data.noise << "\n"
     << "[frontend]\n"
     << "left = " << c.frontend.left << "\n"
     << "right = " << c.frontend.right << "\n"
     << "factor = " << c.frontend.factor << "\n"
     << "[decode]\n"
     << "beam = " << c.decode.beam << "\n"
     << "length_norm = " << (c.decode.length_norm ? "true" : "false") << "\n"
     << "fsa_max_steps = " << c.decode.fsa_max_steps << "\n"
     << "frame_ms = " << c.decode.frame_ms << "\n";
  return os.str();
}

}  // namespace scama
