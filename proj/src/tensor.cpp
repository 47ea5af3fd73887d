#include "lucie/tensor.hpp"

#include <cmath>
#include <memory>
#include <numbers>

namespace lucie::ad {

namespace {
size_t shape_product(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) n *= static_cast<size_t>(d);
  return n;
}
}  // namespace

void Tape::check_finite(const std::vector<double>& v) const {
  for (double x : v)
    if (!std::isfinite(x)) throw std::runtime_error("tape: non-finite value admitted to graph");
}

Var Tape::make(std::vector<double> value, std::vector<int> shape, bool requires_grad,
               std::function<void()> backprop) {
  if (value.size() != shape_product(shape))
    throw std::invalid_argument("tape: value length does not match shape");
  check_finite(value);
  Node n;
  n.value = std::move(value);
  n.shape = std::move(shape);
  n.requires_grad = requires_grad && grad_enabled_;
  if (n.requires_grad) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(std::vector<double> value, std::vector<int> shape, bool requires_grad) {
  return make(std::move(value), std::move(shape), requires_grad, {});
}

Var Tape::constant(std::vector<double> value, std::vector<int> shape) {
  return make(std::move(value), std::move(shape), false, {});
}

Var Tape::scalar(double value) { return constant({value}, {1}); }

const std::vector<double>& Tape::grad(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("tape: node not on tape");
  return nodes_[v.id].grad;
}

std::vector<double>& Tape::grad_buf(int id) {
  auto& g = nodes_[id].grad;
  if (g.empty()) g.assign(nodes_[id].value.size(), 0.0);
  return g;
}

Var Tape::add(Var a, Var b) {
  if (nodes_[a.id].value.size() != nodes_[b.id].value.size())
    throw std::invalid_argument("add: shape mismatch");
  std::vector<double> out(nodes_[a.id].value.size());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = nodes_[a.id].value[i] + nodes_[b.id].value[i];
  bool rg = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
  Var r{static_cast<int>(nodes_.size())};
  return make(std::move(out), nodes_[a.id].shape, rg, [this, a, b, r] {
    const auto& go = nodes_[r.id].grad;
    if (nodes_[a.id].requires_grad) {
      auto& ga = grad_buf(a.id);
      for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    }
    if (nodes_[b.id].requires_grad) {
      auto& gb = grad_buf(b.id);
      for (size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
    }
  });
}

Var Tape::sub(Var a, Var b) {
  if (nodes_[a.id].value.size() != nodes_[b.id].value.size())
    throw std::invalid_argument("sub: shape mismatch");
  std::vector<double> out(nodes_[a.id].value.size());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = nodes_[a.id].value[i] - nodes_[b.id].value[i];
  bool rg = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
  Var r{static_cast<int>(nodes_.size())};
  return make(std::move(out), nodes_[a.id].shape, rg, [this, a, b, r] {
    const auto& go = nodes_[r.id].grad;
    if (nodes_[a.id].requires_grad) {
      auto& ga = grad_buf(a.id);
      for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    }
    if (nodes_[b.id].requires_grad) {
      auto& gb = grad_buf(b.id);
      for (size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
    }
  });
}

Var Tape::mul(Var a, Var b) {
  if (nodes_[a.id].value.size() != nodes_[b.id].value.size())
    throw std::invalid_argument("mul: shape mismatch");
  std::vector<double> out(nodes_[a.id].value.size());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = nodes_[a.id].value[i] * nodes_[b.id].value[i];
  bool rg = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
  Var r{static_cast<int>(nodes_.size())};
  return make(std::move(out), nodes_[a.id].shape, rg, [this, a, b, r] {
    const auto& go = nodes_[r.id].grad;
    if (nodes_[a.id].requires_grad) {
      auto& ga = grad_buf(a.id);
      for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * nodes_[b.id].value[i];
    }
    if (nodes_[b.id].requires_grad) {
      auto& gb = grad_buf(b.id);
      for (size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * nodes_[a.id].value[i];
    }
  });
}

Var Tape::scale(Var a, double c) {
  std::vector<double> out(nodes_[a.id].value.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = c * nodes_[a.id].value[i];
  bool rg = nodes_[a.id].requires_grad;
  Var r{static_cast<int>(nodes_.size())};
  return make(std::move(out), nodes_[a.id].shape, rg, [this, a, c, r] {
    const auto& go = nodes_[r.id].grad;
    auto& ga = grad_buf(a.id);
    for (size_t i = 0; i < go.size(); ++i) ga[i] += c * go[i];
  });
}

Var Tape::silu(Var a) {
  std::vector<double> out(nodes_[a.id].value.size());
  for (size_t i = 0; i < out.size(); ++i) {
    double x = nodes_[a.id].value[i];
    out[i] = x / (1.0 + std::exp(-x));
  }
  bool rg = nodes_[a.id].requires_grad;
  Var r{static_cast<int>(nodes_.size())};
  return make(std::move(out), nodes_[a.id].shape, rg, [this, a, r] {
    const auto& go = nodes_[r.id].grad;
    auto& ga = grad_buf(a.id);
    for (size_t i = 0; i < go.size(); ++i) {
      double x = nodes_[a.id].value[i];
      double s = 1.0 / (1.0 + std::exp(-x));
      ga[i] += go[i] * (s + x * s * (1.0 - s));
    }
  });
}

Var Tape::sum(Var a) {
  double acc = 0.0;
  for (double x : nodes_[a.id].value) acc += x;
  bool rg = nodes_[a.id].requires_grad;
  Var r{static_cast<int>(nodes_.size())};
  return make({acc}, {1}, rg, [this, a, r] {
    double go = nodes_[r.id].grad[0];
    auto& ga = grad_buf(a.id);
    for (size_t i = 0; i < ga.size(); ++i) ga[i] += go;
  });
}

Var Tape::dot_const(Var a, std::span<const double> c) {
  if (c.size() != nodes_[a.id].value.size())
    throw std::invalid_argument("dot_const: shape mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < c.size(); ++i) acc += c[i] * nodes_[a.id].value[i];
  bool rg = nodes_[a.id].requires_grad;
  std::vector<double> cc(c.begin(), c.end());
  Var r{static_cast<int>(nodes_.size())};
  return make({acc}, {1}, rg, [this, a, r, cc = std::move(cc)] {
    double go = nodes_[r.id].grad[0];
    auto& ga = grad_buf(a.id);
    for (size_t i = 0; i < ga.size(); ++i) ga[i] += go * cc[i];
  });
}

Var Tape::matmul(Var a, Var b) {
  const auto& sa = nodes_[a.id].shape;
  const auto& sb = nodes_[b.id].shape;
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0])
    throw std::invalid_argument("matmul: incompatible shapes");
  int m = sa[0], k = sa[1], n = sb[1];
  std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
  const auto& va = nodes_[a.id].value;
  const auto& vb = nodes_[b.id].value;
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      double aip = va[static_cast<size_t>(i) * k + p];
      if (aip == 0.0) continue;
      const double* brow = vb.data() + static_cast<size_t>(p) * n;
      double* orow = out.data() + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  bool rg = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
  Var r{static_cast<int>(nodes_.size())};
  return make(std::move(out), {m, n}, rg, [this, a, b, r, m, k, n] {
    const auto& go = nodes_[r.id].grad;
    const auto& va = nodes_[a.id].value;
    const auto& vb = nodes_[b.id].value;
    if (nodes_[a.id].requires_grad) {
      auto& ga = grad_buf(a.id);  // dA = dC * B^T
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* grow = go.data() + static_cast<size_t>(i) * n;
          const double* brow = vb.data() + static_cast<size_t>(p) * n;
          for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[static_cast<size_t>(i) * k + p] += acc;
        }
    }
    if (nodes_[b.id].requires_grad) {
      auto& gb = grad_buf(b.id);  // dB = A^T * dC
      for (int p = 0; p < k; ++p)
        for (int i = 0; i < m; ++i) {
          double aip = va[static_cast<size_t>(i) * k + p];
          if (aip == 0.0) continue;
          const double* grow = go.data() + static_cast<size_t>(i) * n;
          double* brow = gb.data() + static_cast<size_t>(p) * n;
          for (int j = 0; j < n; ++j) brow[j] += aip * grow[j];
        }
    }
  });
}

Var Tape::bias_rows(Var x, Var b) {
  const auto& sx = nodes_[x.id].shape;
  const auto& sb = nodes_[b.id].shape;
  if (sx.size() != 2 || sb.size() != 1 || sb[0] != sx[0])
    throw std::invalid_argument("bias_rows: incompatible shapes");
  int m = sx[0], n = sx[1];
  std::vector<double> out(nodes_[x.id].value.size());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<size_t>(i) * n + j] =
          nodes_[x.id].value[static_cast<size_t>(i) * n + j] + nodes_[b.id].value[i];
  bool rg = nodes_[x.id].requires_grad || nodes_[b.id].requires_grad;
  Var r{static_cast<int>(nodes_.size())};
  return make(std::move(out), {m, n}, rg, [this, x, b, r, m, n] {
    const auto& go = nodes_[r.id].grad;
    if (nodes_[x.id].requires_grad) {
      auto& gx = grad_buf(x.id);
      for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
    }
    if (nodes_[b.id].requires_grad) {
      auto& gb = grad_buf(b.id);
      for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += go[static_cast<size_t>(i) * n + j];
        gb[i] += acc;
      }
    }
  });
}

Var Tape::sht_forward(Var x, const SphtPlan& plan) {
  const auto& sx = nodes_[x.id].shape;
  if (sx.size() != 2 || sx[1] != plan.grid().npoints())
    throw std::invalid_argument("sht_forward op: shape mismatch");
  int C = sx[0], N = plan.grid().npoints(), M = 2 * plan.ncoef();
  std::vector<double> out(static_cast<size_t>(C) * M);
  for (int c = 0; c < C; ++c) {
    auto coeffs = plan.forward(std::span<const double>(
        nodes_[x.id].value.data() + static_cast<size_t>(c) * N, N));
    std::copy(coeffs.values.begin(), coeffs.values.end(),
              out.begin() + static_cast<size_t>(c) * M);
  }
  bool rg = nodes_[x.id].requires_grad;
  Var r{static_cast<int>(nodes_.size())};
  return make(std::move(out), {C, M}, rg, [this, x, r, &plan, C, N, M] {
    const auto& go = nodes_[r.id].grad;
    auto& gx = grad_buf(x.id);
    for (int c = 0; c < C; ++c) {
      auto g = plan.adjoint_forward(std::span<const double>(
          go.data() + static_cast<size_t>(c) * M, M));
      for (int i = 0; i < N; ++i) gx[static_cast<size_t>(c) * N + i] += g[i];
    }
  });
}

Var Tape::sht_inverse(Var x, const SphtPlan& plan) {
  const auto& sx = nodes_[x.id].shape;
  if (sx.size() != 2 || sx[1] != 2 * plan.ncoef())
    throw std::invalid_argument("sht_inverse op: shape mismatch");
  int C = sx[0], N = plan.grid().npoints(), M = 2 * plan.ncoef();
  std::vector<double> out(static_cast<size_t>(C) * N);
  for (int c = 0; c < C; ++c) {
    SpectralCoeffs coeffs;
    coeffs.truncation = plan.grid().truncation;
    coeffs.values.assign(nodes_[x.id].value.begin() + static_cast<size_t>(c) * M,
                         nodes_[x.id].value.begin() + static_cast<size_t>(c + 1) * M);
    auto f = plan.inverse(coeffs);
    std::copy(f.begin(), f.end(), out.begin() + static_cast<size_t>(c) * N);
  }
  bool rg = nodes_[x.id].requires_grad;
  Var r{static_cast<int>(nodes_.size())};
  return make(std::move(out), {C, N}, rg, [this, x, r, &plan, C, N, M] {
    const auto& go = nodes_[r.id].grad;
    auto& gx = grad_buf(x.id);
    for (int c = 0; c < C; ++c) {
      auto g = plan.adjoint_inverse(std::span<const double>(
          go.data() + static_cast<size_t>(c) * N, N));
      for (int i = 0; i < M; ++i) gx[static_cast<size_t>(c) * M + i] += g[i];
    }
  });
}

Var Tape::spectral_mix(Var coeffs, Var weights, int cout, int cin, const SphtPlan& plan) {
  const auto& sc = nodes_[coeffs.id].shape;
  const int L = plan.grid().truncation;
  const int M = 2 * plan.ncoef();
  if (sc.size() != 2 || sc[0] != cin || sc[1] != M)
    throw std::invalid_argument("spectral_mix: coeff shape mismatch");
  if (nodes_[weights.id].value.size() !=
      static_cast<size_t>(L + 1) * cout * cin * 2)
    throw std::invalid_argument("spectral_mix: weight shape mismatch");

  const auto& vin = nodes_[coeffs.id].value;
  const auto& vw = nodes_[weights.id].value;
  std::vector<double> out(static_cast<size_t>(cout) * M, 0.0);
  for (int m = 0; m <= L; ++m) {
    for (int l = m; l <= L; ++l) {
      int idx = coeff_index(l, m, L);
      for (int co = 0; co < cout; ++co) {
        double or_ = 0.0, oi = 0.0;
        const double* w = vw.data() + (static_cast<size_t>(l) * cout + co) * cin * 2;
        for (int ci = 0; ci < cin; ++ci) {
          double wr = w[2 * ci], wi = w[2 * ci + 1];
          double ir = vin[static_cast<size_t>(ci) * M + 2 * idx];
          double ii = vin[static_cast<size_t>(ci) * M + 2 * idx + 1];
          or_ += wr * ir - wi * ii;
          oi += wr * ii + wi * ir;
        }
        out[static_cast<size_t>(co) * M + 2 * idx] = or_;
        out[static_cast<size_t>(co) * M + 2 * idx + 1] = oi;
      }
    }
  }
  bool rg = nodes_[coeffs.id].requires_grad || nodes_[weights.id].requires_grad;
  Var r{static_cast<int>(nodes_.size())};
  return make(std::move(out), {cout, M}, rg,
              [this, coeffs, weights, r, cout, cin, L, M] {
    const auto& go = nodes_[r.id].grad;
    const auto& vin = nodes_[coeffs.id].value;
    const auto& vw = nodes_[weights.id].value;
    bool gin = nodes_[coeffs.id].requires_grad;
    bool gw = nodes_[weights.id].requires_grad;
    for (int m = 0; m <= L; ++m) {
      for (int l = m; l <= L; ++l) {
        int idx = coeff_index(l, m, L);
        for (int co = 0; co < cout; ++co) {
          double dor = go[static_cast<size_t>(co) * M + 2 * idx];
          double doi = go[static_cast<size_t>(co) * M + 2 * idx + 1];
          if (dor == 0.0 && doi == 0.0) continue;
          const double* w = vw.data() + (static_cast<size_t>(l) * cout + co) * cin * 2;
          for (int ci = 0; ci < cin; ++ci) {
            double wr = w[2 * ci], wi = w[2 * ci + 1];
            double ir = vin[static_cast<size_t>(ci) * M + 2 * idx];
            double ii = vin[static_cast<size_t>(ci) * M + 2 * idx + 1];
            if (gin) {
              auto& g = grad_buf(coeffs.id);
              g[static_cast<size_t>(ci) * M + 2 * idx] += wr * dor + wi * doi;
              g[static_cast<size_t>(ci) * M + 2 * idx + 1] += -wi * dor + wr * doi;
            }
            if (gw) {
              auto& g = grad_buf(weights.id);
              size_t wb = (static_cast<size_t>(l) * cout + co) * cin * 2;
              g[wb + 2 * ci] += ir * dor + ii * doi;
              g[wb + 2 * ci + 1] += -ii * dor + ir * doi;
            }
          }
        }
      }
    }
  });
}

Var Tape::zonal_log_amplitude(Var x, const GridSpec& grid, double eps) {
  const auto& sx = nodes_[x.id].shape;
  if (sx.size() != 2 || sx[1] != grid.npoints())
    throw std::invalid_argument("zonal_log_amplitude: shape mismatch");
  const int C = sx[0], nlat = grid.nlat, nlon = grid.nlon;
  const int nk = nlon / 2 + 1;
  const double pi = std::numbers::pi;

  // Save the per-latitude DFT for the backward pass.
  auto saved = std::make_shared<std::vector<double>>(
      static_cast<size_t>(C) * nlat * nk * 2);
  std::vector<double> wn(nlat);
  for (int i = 0; i < nlat; ++i) wn[i] = grid.gauss_weights[i] / 2.0;

  std::vector<double> out(static_cast<size_t>(C) * nk, 0.0);
  const auto& vx = nodes_[x.id].value;
  for (int c = 0; c < C; ++c) {
    for (int k = 0; k < nk; ++k) {
      double amp = 0.0;
      for (int i = 0; i < nlat; ++i) {
        double fr = 0.0, fi = 0.0;
        const double* row = vx.data() + (static_cast<size_t>(c) * nlat + i) * nlon;
        for (int j = 0; j < nlon; ++j) {
          double ang = 2.0 * pi * k * j / nlon;
          fr += row[j] * std::cos(ang);
          fi -= row[j] * std::sin(ang);
        }
        (*saved)[((static_cast<size_t>(c) * nlat + i) * nk + k) * 2] = fr;
        (*saved)[((static_cast<size_t>(c) * nlat + i) * nk + k) * 2 + 1] = fi;
        amp += wn[i] * std::sqrt(fr * fr + fi * fi);
      }
      out[static_cast<size_t>(c) * nk + k] = std::log(amp + eps);
    }
  }
  bool rg = nodes_[x.id].requires_grad;
  Var r{static_cast<int>(nodes_.size())};
  return make(std::move(out), {C, nk}, rg,
              [this, x, r, saved, wn = std::move(wn), C, nlat, nlon, nk, eps, pi] {
    const auto& go = nodes_[r.id].grad;
    const auto& vo = nodes_[r.id].value;
    auto& gx = grad_buf(x.id);
    for (int c = 0; c < C; ++c) {
      for (int k = 0; k < nk; ++k) {
        double g = go[static_cast<size_t>(c) * nk + k];
        if (g == 0.0) continue;
        double amp_plus_eps = std::exp(vo[static_cast<size_t>(c) * nk + k]);
        double s = g / amp_plus_eps;
        for (int i = 0; i < nlat; ++i) {
          double fr = (*saved)[((static_cast<size_t>(c) * nlat + i) * nk + k) * 2];
          double fi = (*saved)[((static_cast<size_t>(c) * nlat + i) * nk + k) * 2 + 1];
          double mag = std::sqrt(fr * fr + fi * fi);
          if (mag < 1e-300) continue;
          double coef = s * wn[i] / mag;
          double* grow = gx.data() + (static_cast<size_t>(c) * nlat + i) * nlon;
          for (int j = 0; j < nlon; ++j) {
            double ang = 2.0 * pi * k * j / nlon;
            grow[j] += coef * (fr * std::cos(ang) - fi * std::sin(ang));
          }
        }
      }
    }
  });
}

void Tape::backward(Var loss) {
  if (!grad_enabled_)
    throw std::logic_error("backward: gradients are disabled on this tape");
  if (loss.id < 0 || loss.id >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("backward: node not on tape");
  if (nodes_[loss.id].value.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar");
  grad_buf(loss.id)[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    if (nodes_[id].backprop && !nodes_[id].grad.empty()) nodes_[id].backprop();
  }
}

}  // namespace lucie::ad
