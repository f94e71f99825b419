#include "scama/tensor.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>

#include "scama/kernels.h"

namespace scama {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::atomic<std::int64_t> g_next_id{1};

const kernels::Ops& K() { return kernels::active(); }

}  // namespace

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

struct Tensor::Data {
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;
  std::int64_t id;
};

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  for (std::size_t e : shape) {
    if (e == 0) throw ShapeError("zero extent in shape " + shape_str(shape));
  }
  Tensor t;
  t.d_ = std::make_shared<Data>();
  t.d_->shape = std::move(shape);
  std::size_t n = product(t.d_->shape);
  t.d_->value.assign(n, 0.0);
  t.d_->grad.assign(n, 0.0);
  t.d_->id = g_next_id.fetch_add(1);
  return t;
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> data) {
  Tensor t = zeros(shape);
  if (data.size() != t.size()) {
    throw ShapeError("data length " + std::to_string(data.size()) +
                     " does not fill shape " + shape_str(shape));
  }
  t.d_->value = std::move(data);
  return t;
}

Tensor Tensor::scalar(double v) { return from({}, {v}); }

const std::vector<std::size_t>& Tensor::shape() const { return d_->shape; }
std::size_t Tensor::size() const { return d_->value.size(); }

std::size_t Tensor::rows() const {
  if (d_->shape.size() != 2) {
    throw ShapeError("rows() on tensor of shape " + shape_str(d_->shape));
  }
  return d_->shape[0];
}

std::size_t Tensor::cols() const {
  if (d_->shape.size() != 2) {
    throw ShapeError("cols() on tensor of shape " + shape_str(d_->shape));
  }
  return d_->shape[1];
}

std::vector<double>& Tensor::value() { return d_->value; }
const std::vector<double>& Tensor::value() const { return d_->value; }
std::vector<double>& Tensor::grad() { return d_->grad; }
const std::vector<double>& Tensor::grad() const { return d_->grad; }

double Tensor::item() const {
  if (d_->value.size() != 1) {
    throw UsageError("item() on non-scalar tensor " + shape_str(d_->shape));
  }
  return d_->value[0];
}

void Tensor::zero_grad() { std::fill(d_->grad.begin(), d_->grad.end(), 0.0); }
std::int64_t Tensor::id() const { return d_->id; }

Tensor Graph::make(std::vector<std::size_t> shape) {
  return Tensor::zeros(std::move(shape));
}

Tensor Graph::matmul(Tensor a, Tensor b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.rows()) {
    throw ShapeError("matmul shape mismatch: " + shape_str(a.shape()) + " * " +
                     shape_str(b.shape()));
  }
  std::size_t m = a.rows(), n = a.cols(), p = b.cols();
  Tensor out = make({m, p});
  K().gemm_nn(a.value().data(), b.value().data(), out.value().data(), m, n, p);
  record([a, b, out, m, n, p]() mutable {
    // dA += dC * B^T ; dB += A^T * dC
    K().gemm_nt(out.grad().data(), b.value().data(), a.grad().data(), m, p, n);
    K().gemm_tn(a.value().data(), out.grad().data(), b.grad().data(), n, m, p);
  });
  return out;
}

Tensor Graph::matmul_nt(Tensor a, Tensor b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.cols()) {
    throw ShapeError("matmul_nt shape mismatch: " + shape_str(a.shape()) +
                     " * " + shape_str(b.shape()) + "^T");
  }
  std::size_t m = a.rows(), n = a.cols(), p = b.rows();
  Tensor out = make({m, p});
  K().gemm_nt(a.value().data(), b.value().data(), out.value().data(), m, n, p);
  record([a, b, out, m, n, p]() mutable {
    // C = A B^T: dA += dC * B ; dB += dC^T * A
    K().gemm_nn(out.grad().data(), b.value().data(), a.grad().data(), m, p, n);
    K().gemm_tn(out.grad().data(), a.value().data(), b.grad().data(), p, m, n);
  });
  return out;
}

Tensor Graph::add(Tensor a, Tensor b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add shape mismatch: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  Tensor out = make(a.shape());
  K().vadd(a.value().data(), b.value().data(), out.value().data(), a.size());
  record([a, b, out]() mutable {
    K().axpy(1.0, out.grad().data(), a.grad().data(), a.size());
    K().axpy(1.0, out.grad().data(), b.grad().data(), b.size());
  });
  return out;
}

Tensor Graph::add_rowvec(Tensor a, Tensor row) {
  if (a.shape().size() != 2 || row.shape().size() != 1 ||
      a.cols() != row.shape()[0]) {
    throw ShapeError("add_rowvec shape mismatch: " + shape_str(a.shape()) +
                     " + " + shape_str(row.shape()));
  }
  std::size_t t = a.rows(), d = a.cols();
  Tensor out = make(a.shape());
  for (std::size_t i = 0; i < t; ++i) {
    K().vadd(a.value().data() + i * d, row.value().data(),
             out.value().data() + i * d, d);
  }
  record([a, row, out, t, d]() mutable {
    K().axpy(1.0, out.grad().data(), a.grad().data(), t * d);
    for (std::size_t i = 0; i < t; ++i) {
      K().axpy(1.0, out.grad().data() + i * d, row.grad().data(), d);
    }
  });
  return out;
}

Tensor Graph::mul(Tensor a, Tensor b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mul shape mismatch: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  Tensor out = make(a.shape());
  K().vmul(a.value().data(), b.value().data(), out.value().data(), a.size());
  record([a, b, out]() mutable {
    K().vfma(out.grad().data(), b.value().data(), a.grad().data(), a.size());
    K().vfma(out.grad().data(), a.value().data(), b.grad().data(), a.size());
  });
  return out;
}

Tensor Graph::scale(Tensor a, double s) {
  Tensor out = make(a.shape());
  K().axpy(s, a.value().data(), out.value().data(), a.size());
  record([a, out, s]() mutable {
    K().axpy(s, out.grad().data(), a.grad().data(), a.size());
  });
  return out;
}

Tensor Graph::relu(Tensor a) {
  Tensor out = make(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.value()[i] = a.value()[i] > 0.0 ? a.value()[i] : 0.0;
  }
  record([a, out]() mutable {
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a.value()[i] > 0.0) a.grad()[i] += out.grad()[i];
    }
  });
  return out;
}

Tensor Graph::log(Tensor a) {
  Tensor out = make(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a.value()[i] > 0.0)) {
      throw NumericError("log of non-positive value");
    }
    out.value()[i] = std::log(a.value()[i]);
  }
  record([a, out]() mutable {
    for (std::size_t i = 0; i < a.size(); ++i) {
      a.grad()[i] += out.grad()[i] / a.value()[i];
    }
  });
  return out;
}

Tensor Graph::softmax_lastdim(Tensor a) {
  if (a.shape().empty() || a.shape().back() < 1) {
    throw ShapeError("softmax_lastdim needs last dim >= 1, got " +
                     shape_str(a.shape()));
  }
  std::size_t d = a.shape().back();
  std::size_t rows = a.size() / d;
  Tensor out = make(a.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = a.value().data() + r * d;
    double* y = out.value().data() + r * d;
    double mx = x[0];
    for (std::size_t i = 1; i < d; ++i) mx = std::max(mx, x[i]);
    if (!std::isfinite(mx)) {
      throw NumericError("softmax over non-finite row");
    }
    double z = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      y[i] = std::exp(x[i] - mx);
      z += y[i];
    }
    for (std::size_t i = 0; i < d; ++i) y[i] /= z;
  }
  record([a, out, rows, d]() mutable {
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = out.value().data() + r * d;
      const double* dy = out.grad().data() + r * d;
      double* dx = a.grad().data() + r * d;
      double dot = K().dot(y, dy, d);
      for (std::size_t i = 0; i < d; ++i) dx[i] += y[i] * (dy[i] - dot);
    }
  });
  return out;
}

Tensor Graph::layer_norm(Tensor x, Tensor gain, Tensor bias) {
  constexpr double kEps = 1e-6;
  if (x.shape().empty()) throw ShapeError("layer_norm on scalar");
  std::size_t d = x.shape().back();
  if (gain.size() != d || bias.size() != d) {
    throw ShapeError("layer_norm gain/bias must match last dim " +
                     std::to_string(d));
  }
  std::size_t rows = x.size() / d;
  Tensor out = make(x.shape());
  // Keep normalized values for the backward pass.
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.value().data() + r * d;
    double mu = 0.0;
    for (std::size_t i = 0; i < d; ++i) mu += xr[i];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (xr[i] - mu) * (xr[i] - mu);
    var /= static_cast<double>(d);
    double inv = 1.0 / std::sqrt(var + kEps);
    (*inv_std)[r] = inv;
    for (std::size_t i = 0; i < d; ++i) {
      double xh = (xr[i] - mu) * inv;
      (*xhat)[r * d + i] = xh;
      out.value()[r * d + i] = gain.value()[i] * xh + bias.value()[i];
    }
  }
  record([x, gain, bias, out, xhat, inv_std, rows, d]() mutable {
    for (std::size_t r = 0; r < rows; ++r) {
      const double* dy = out.grad().data() + r * d;
      const double* xh = xhat->data() + r * d;
      double inv = (*inv_std)[r];
      double sum_dxh = 0.0, sum_dxh_xh = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        double dxh = dy[i] * gain.value()[i];
        sum_dxh += dxh;
        sum_dxh_xh += dxh * xh[i];
        gain.grad()[i] += dy[i] * xh[i];
        bias.grad()[i] += dy[i];
      }
      double* dx = x.grad().data() + r * d;
      double dn = static_cast<double>(d);
      for (std::size_t i = 0; i < d; ++i) {
        double dxh = dy[i] * gain.value()[i];
        dx[i] += inv * (dxh - sum_dxh / dn - xh[i] * sum_dxh_xh / dn);
      }
    }
  });
  return out;
}

Tensor Graph::concat_lastdim(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw UsageError("concat_lastdim of nothing");
  std::size_t t = parts[0].rows();
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.rows() != t) {
      throw ShapeError("concat_lastdim row mismatch: " +
                       shape_str(p.shape()));
    }
    total += p.cols();
  }
  Tensor out = make({t, total});
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    std::size_t d = p.cols();
    for (std::size_t r = 0; r < t; ++r) {
      std::copy_n(p.value().data() + r * d, d,
                  out.value().data() + r * total + off);
    }
    off += d;
  }
  std::vector<Tensor> captured = parts;
  record([captured, out, t, total]() mutable {
    std::size_t off = 0;
    for (Tensor& p : captured) {
      std::size_t d = p.cols();
      for (std::size_t r = 0; r < t; ++r) {
        K().axpy(1.0, out.grad().data() + r * total + off,
                 p.grad().data() + r * d, d);
      }
      off += d;
    }
  });
  return out;
}

Tensor Graph::concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw UsageError("concat_rows of nothing");
  std::size_t d = parts[0].cols();
  std::size_t t = 0;
  for (const Tensor& p : parts) {
    if (p.cols() != d) {
      throw ShapeError("concat_rows col mismatch: " + shape_str(p.shape()));
    }
    t += p.rows();
  }
  Tensor out = make({t, d});
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    std::copy_n(p.value().data(), p.size(), out.value().data() + off);
    off += p.size();
  }
  std::vector<Tensor> captured = parts;
  record([captured, out]() mutable {
    std::size_t off = 0;
    for (Tensor& p : captured) {
      K().axpy(1.0, out.grad().data() + off, p.grad().data(), p.size());
      off += p.size();
    }
  });
  return out;
}

Tensor Graph::slice_rows(Tensor a, std::size_t begin, std::size_t end) {
  if (end > a.rows() || begin >= end) {
    throw ShapeError("slice_rows [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") of " + shape_str(a.shape()));
  }
  std::size_t d = a.cols();
  Tensor out = make({end - begin, d});
  std::copy_n(a.value().data() + begin * d, (end - begin) * d,
              out.value().data());
  record([a, out, begin, d]() mutable {
    K().axpy(1.0, out.grad().data(), a.grad().data() + begin * d, out.size());
  });
  return out;
}

Tensor Graph::slice_cols(Tensor a, std::size_t begin, std::size_t end) {
  if (end > a.cols() || begin >= end) {
    throw ShapeError("slice_cols [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") of " + shape_str(a.shape()));
  }
  std::size_t t = a.rows(), d = a.cols(), w = end - begin;
  Tensor out = make({t, w});
  for (std::size_t r = 0; r < t; ++r) {
    std::copy_n(a.value().data() + r * d + begin, w,
                out.value().data() + r * w);
  }
  record([a, out, begin, t, d, w]() mutable {
    for (std::size_t r = 0; r < t; ++r) {
      K().axpy(1.0, out.grad().data() + r * w, a.grad().data() + r * d + begin,
               w);
    }
  });
  return out;
}

Tensor Graph::reshape(Tensor a, std::vector<std::size_t> shape) {
  if (product(shape) != a.size()) {
    throw ShapeError("reshape " + shape_str(a.shape()) + " -> " +
                     shape_str(shape));
  }
  Tensor out = make(std::move(shape));
  out.value() = a.value();
  record([a, out]() mutable {
    K().axpy(1.0, out.grad().data(), a.grad().data(), a.size());
  });
  return out;
}

Tensor Graph::dropout(Tensor a, double p) {
  if (p < 0.0 || p >= 1.0) {
    throw ConfigError("dropout p must be in [0,1), got " + std::to_string(p));
  }
  if (!training_ || p == 0.0) return scale(a, 1.0);
  auto mask = std::make_shared<std::vector<double>>(a.size());
  std::bernoulli_distribution keep(1.0 - p);
  double s = 1.0 / (1.0 - p);
  Tensor out = make(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    (*mask)[i] = keep(rng_) ? s : 0.0;
    out.value()[i] = a.value()[i] * (*mask)[i];
  }
  record([a, out, mask]() mutable {
    K().vfma(out.grad().data(), mask->data(), a.grad().data(), a.size());
  });
  return out;
}

Tensor Graph::embed(Tensor table, const std::vector<int>& ids) {
  if (table.shape().size() != 2) {
    throw ShapeError("embed table must be 2-D, got " +
                     shape_str(table.shape()));
  }
  std::size_t v = table.rows(), d = table.cols();
  Tensor out = make({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v) {
      throw UsageError("embed id " + std::to_string(ids[i]) +
                       " outside table of " + std::to_string(v));
    }
    std::copy_n(table.value().data() + static_cast<std::size_t>(ids[i]) * d, d,
                out.value().data() + i * d);
  }
  record([table, out, ids, d]() mutable {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      K().axpy(1.0, out.grad().data() + i * d,
               table.grad().data() + static_cast<std::size_t>(ids[i]) * d, d);
    }
  });
  return out;
}

Tensor Graph::add_const(Tensor a, const std::vector<double>& c) {
  if (c.size() != a.size()) {
    throw ShapeError("add_const length mismatch: " + std::to_string(c.size()) +
                     " vs " + std::to_string(a.size()));
  }
  Tensor out = make(a.shape());
  K().vadd(a.value().data(), c.data(), out.value().data(), a.size());
  record([a, out]() mutable {
    K().axpy(1.0, out.grad().data(), a.grad().data(), a.size());
  });
  return out;
}

Tensor Graph::sum(Tensor a) {
  Tensor out = make({});
  out.value()[0] = std::accumulate(a.value().begin(), a.value().end(), 0.0);
  record([a, out]() mutable {
    double g = out.grad()[0];
    for (std::size_t i = 0; i < a.size(); ++i) a.grad()[i] += g;
  });
  return out;
}

Tensor Graph::lincomb(double alpha, Tensor a, double beta, Tensor b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("lincomb shape mismatch: " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
  Tensor out = make(a.shape());
  K().axpy(alpha, a.value().data(), out.value().data(), a.size());
  K().axpy(beta, b.value().data(), out.value().data(), b.size());
  record([a, b, out, alpha, beta]() mutable {
    K().axpy(alpha, out.grad().data(), a.grad().data(), a.size());
    K().axpy(beta, out.grad().data(), b.grad().data(), b.size());
  });
  return out;
}

Tensor Graph::cross_entropy_smoothed(Tensor logits,
                                     const std::vector<int>& targets,
                                     double smoothing, Reduction reduction) {
  if (smoothing < 0.0 || smoothing >= 1.0) {
    throw ConfigError("smoothing must be in [0,1), got " +
                      std::to_string(smoothing));
  }
  if (logits.shape().size() != 2 || logits.rows() != targets.size()) {
    throw ShapeError("cross_entropy_smoothed: logits " +
                     shape_str(logits.shape()) + " vs " +
                     std::to_string(targets.size()) + " targets");
  }
  std::size_t l = logits.rows(), v = logits.cols();
  if (v < 2) throw ShapeError("cross_entropy_smoothed needs >= 2 classes");
  double off_mass = smoothing / static_cast<double>(v - 1);
  double norm = reduction == Reduction::kMean ? 1.0 / static_cast<double>(l)
                                              : 1.0;
  // probs cached for backward
  auto probs = std::make_shared<std::vector<double>>(l * v);
  double loss = 0.0;
  for (std::size_t r = 0; r < l; ++r) {
    int tgt = targets[r];
    if (tgt < 0 || static_cast<std::size_t>(tgt) >= v) {
      throw UsageError("target id " + std::to_string(tgt) + " outside vocab " +
                       std::to_string(v));
    }
    const double* x = logits.value().data() + r * v;
    double mx = *std::max_element(x, x + v);
    double z = 0.0;
    for (std::size_t i = 0; i < v; ++i) z += std::exp(x[i] - mx);
    double logz = std::log(z) + mx;
    for (std::size_t i = 0; i < v; ++i) {
      (*probs)[r * v + i] = std::exp(x[i] - logz);
      double q = (static_cast<std::size_t>(tgt) == i) ? 1.0 - smoothing
                                                      : off_mass;
      loss -= q * (x[i] - logz);
    }
  }
  Tensor out = make({});
  out.value()[0] = loss * norm;
  record([logits, out, probs, targets, smoothing, off_mass, norm, l,
          v]() mutable {
    double g = out.grad()[0] * norm;
    for (std::size_t r = 0; r < l; ++r) {
      int tgt = targets[r];
      double* dx = logits.grad().data() + r * v;
      for (std::size_t i = 0; i < v; ++i) {
        double q = (static_cast<std::size_t>(tgt) == i) ? 1.0 - smoothing
                                                        : off_mass;
        dx[i] += g * ((*probs)[r * v + i] - q);
      }
    }
  });
  return out;
}

Tensor Graph::fsmn(Tensor v, Tensor back_taps, Tensor ahead_taps,
                   const std::vector<double>& history,
                   std::size_t history_rows) {
  std::size_t t = v.rows(), d = v.cols();
  if (back_taps.shape().size() != 2 || back_taps.cols() != d) {
    throw ShapeError("fsmn back taps must be [L x " + std::to_string(d) +
                     "], got " + shape_str(back_taps.shape()));
  }
  if (ahead_taps.defined() &&
      (ahead_taps.shape().size() != 2 || ahead_taps.cols() != d)) {
    throw ShapeError("fsmn ahead taps must be [L x " + std::to_string(d) +
                     "], got " + shape_str(ahead_taps.shape()));
  }
  if (history.size() != history_rows * d) {
    throw ShapeError("fsmn history rows do not match width");
  }
  std::size_t lb = back_taps.rows();
  std::size_t la = ahead_taps.defined() ? ahead_taps.rows() : 0;
  std::size_t h = history_rows;
  Tensor out = make({t, d});
  // m_t = v_t + sum_i a_i (.) v_{t-i} + sum_j c_j (.) v_{t+j}; indices past
  // the ends are zero unless covered by history on the left.
  out.value() = v.value();
  for (std::size_t ti = 0; ti < t; ++ti) {
    double* m = out.value().data() + ti * d;
    for (std::size_t i = 0; i < lb; ++i) {
      const double* src = nullptr;
      std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(ti) -
                           static_cast<std::ptrdiff_t>(i);
      if (idx >= 0) {
        src = v.value().data() + idx * d;
      } else if (static_cast<std::size_t>(-idx) <= h) {
        src = history.data() + (h - static_cast<std::size_t>(-idx)) * d;
      } else {
        continue;
      }
      K().vfma(back_taps.value().data() + i * d, src, m, d);
    }
    for (std::size_t j = 1; j <= la; ++j) {
      if (ti + j >= t) break;
      K().vfma(ahead_taps.value().data() + (j - 1) * d,
               v.value().data() + (ti + j) * d, m, d);
    }
  }
  auto hist = std::make_shared<std::vector<double>>(history);
  record([v, back_taps, ahead_taps, out, hist, t, d, lb, la, h]() mutable {
    for (std::size_t ti = 0; ti < t; ++ti) {
      const double* dm = out.grad().data() + ti * d;
      // residual path
      K().axpy(1.0, dm, v.grad().data() + ti * d, d);
      for (std::size_t i = 0; i < lb; ++i) {
        std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(ti) -
                             static_cast<std::ptrdiff_t>(i);
        const double* src = nullptr;
        double* dsrc = nullptr;
        if (idx >= 0) {
          src = v.value().data() + idx * d;
          dsrc = v.grad().data() + idx * d;
        } else if (static_cast<std::size_t>(-idx) <= h) {
          src = hist->data() + (h - static_cast<std::size_t>(-idx)) * d;
        } else {
          continue;
        }
        K().vfma(dm, src, back_taps.grad().data() + i * d, d);
        if (dsrc != nullptr) {
          K().vfma(dm, back_taps.value().data() + i * d, dsrc, d);
        }
      }
      for (std::size_t j = 1; j <= la; ++j) {
        if (ti + j >= t) break;
        K().vfma(dm, v.value().data() + (ti + j) * d,
                 ahead_taps.grad().data() + (j - 1) * d, d);
        K().vfma(dm, ahead_taps.value().data() + (j - 1) * d,
                 v.grad().data() + (ti + j) * d, d);
      }
    }
  });
  return out;
}

void Graph::backward(Tensor loss) {
  if (loss.size() != 1 || !loss.shape().empty()) {
    throw UsageError("backward requires a scalar loss, got " +
                     shape_str(loss.shape()));
  }
  loss.grad()[0] += 1.0;
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
}

Tensor glorot(std::vector<std::size_t> shape, std::size_t fan_in,
              std::size_t fan_out, std::mt19937_64& rng) {
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& x : t.value()) x = u(rng);
  return t;
}

}  // namespace scama
