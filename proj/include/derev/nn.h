#pragma once

#include <cmath>
#include <vector>

#include "derev/common.h"

// Small dense-linear-algebra and LSTM kernels. Everything is templated on the
// scalar type: float for training/inference, double for finite-difference
// gradient checks. Sequences are stored step-major as (features x batch)
// blocks so the recurrent matmuls stay cache resident.

namespace derev::nn {

// C += A * B
template <class T>
void gemm_acc(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
  const int m = a.rows(), k = a.cols(), n = b.cols();
  for (int i = 0; i < m; ++i) {
    T* __restrict crow = c.row_ptr(i);
    const T* __restrict arow = a.row_ptr(i);
    for (int p = 0; p < k; ++p) {
      const T apv = arow[p];
      const T* __restrict brow = b.row_ptr(p);
      for (int j = 0; j < n; ++j) crow[j] += apv * brow[j];
    }
  }
}

// C += A^T * B   (A: K x M, B: K x N, C: M x N)
template <class T>
void gemm_tn_acc(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
  const int k = a.rows(), m = a.cols(), n = b.cols();
  for (int p = 0; p < k; ++p) {
    const T* __restrict arow = a.row_ptr(p);
    const T* __restrict brow = b.row_ptr(p);
    for (int i = 0; i < m; ++i) {
      const T apv = arow[i];
      T* __restrict crow = c.row_ptr(i);
      for (int j = 0; j < n; ++j) crow[j] += apv * brow[j];
    }
  }
}

// C += A * B^T   (A: M x K, B: N x K, C: M x N)
template <class T>
void gemm_nt_acc(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
  const int m = a.rows(), k = a.cols(), n = b.rows();
  for (int i = 0; i < m; ++i) {
    const T* __restrict arow = a.row_ptr(i);
    T* __restrict crow = c.row_ptr(i);
    for (int j = 0; j < n; ++j) {
      const T* __restrict brow = b.row_ptr(j);
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

template <class T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

// Weights for one LSTM direction: wx (4H x I), wh (4H x H), bias (4H x 1).
// Gate row blocks in order [input, forget, cell, output].
template <class T>
struct LstmCell {
  Matrix<T> wx, wh, b;
  int hidden() const { return wh.cols(); }
  int input() const { return wx.cols(); }
};

template <class T>
struct Linear {
  Matrix<T> w, b;  // w: O x I, b: O x 1
};

using Seq = int;  // step count alias for readability in signatures

// Per-step activations kept for backprop.
template <class T>
struct LstmCache {
  std::vector<Matrix<T>> gates;   // 4H x B, post-activation
  std::vector<Matrix<T>> cell;    // H x B
  std::vector<Matrix<T>> tanh_c;  // H x B
  std::vector<Matrix<T>> hidden;  // H x B
};

// One pass over the sequence; reversed=true runs the recurrence from the last
// step to the first (cache indices always follow the original step order).
template <class T>
void lstm_run(const LstmCell<T>& p, const std::vector<Matrix<T>>& x, bool reversed,
              LstmCache<T>& cache) {
  const int steps = static_cast<int>(x.size());
  const int h = p.hidden();
  const int batch = x.empty() ? 1 : x[0].cols();
  const int h4 = 4 * h;

  cache.gates.assign(static_cast<size_t>(steps), Matrix<T>(h4, batch));
  cache.cell.assign(static_cast<size_t>(steps), Matrix<T>(h, batch));
  cache.tanh_c.assign(static_cast<size_t>(steps), Matrix<T>(h, batch));
  cache.hidden.assign(static_cast<size_t>(steps), Matrix<T>(h, batch));

  Matrix<T> h_prev(h, batch, T(0));
  Matrix<T> c_prev(h, batch, T(0));

  for (int s = 0; s < steps; ++s) {
    const int t = reversed ? steps - 1 - s : s;
    Matrix<T>& g = cache.gates[static_cast<size_t>(t)];
    for (int r = 0; r < h4; ++r) {
      T* grow = g.row_ptr(r);
      const T bias = p.b.at(r, 0);
      for (int j = 0; j < batch; ++j) grow[j] = bias;
    }
    gemm_acc(p.wx, x[static_cast<size_t>(t)], g);
    gemm_acc(p.wh, h_prev, g);

    Matrix<T>& c = cache.cell[static_cast<size_t>(t)];
    Matrix<T>& tc = cache.tanh_c[static_cast<size_t>(t)];
    Matrix<T>& hh = cache.hidden[static_cast<size_t>(t)];
    for (int r = 0; r < h; ++r) {
      T* gi = g.row_ptr(r);
      T* gf = g.row_ptr(h + r);
      T* gg = g.row_ptr(2 * h + r);
      T* go = g.row_ptr(3 * h + r);
      const T* cp = c_prev.row_ptr(r);
      T* cr = c.row_ptr(r);
      T* tr = tc.row_ptr(r);
      T* hr = hh.row_ptr(r);
      for (int j = 0; j < batch; ++j) {
        const T iv = sigmoid(gi[j]);
        const T fv = sigmoid(gf[j]);
        const T gv = std::tanh(gg[j]);
        const T ov = sigmoid(go[j]);
        gi[j] = iv;
        gf[j] = fv;
        gg[j] = gv;
        go[j] = ov;
        const T cv = fv * cp[j] + iv * gv;
        cr[j] = cv;
        const T tv = std::tanh(cv);
        tr[j] = tv;
        hr[j] = ov * tv;
      }
    }
    h_prev = hh;
    c_prev = c;
  }
}

// Backprop through time. dh_out holds dLoss/dh per step; dx accumulates
// dLoss/dx (skipped when want_dx is false, e.g. for the bottom layer); grad
// accumulates parameter gradients (callers zero it first).
template <class T>
void lstm_backward(const LstmCell<T>& p, const std::vector<Matrix<T>>& x, bool reversed,
                   const LstmCache<T>& cache, const std::vector<Matrix<T>>& dh_out,
                   LstmCell<T>& grad, std::vector<Matrix<T>>& dx, bool want_dx = true) {
  const int steps = static_cast<int>(x.size());
  const int h = p.hidden();
  const int batch = x.empty() ? 1 : x[0].cols();
  const int h4 = 4 * h;

  Matrix<T> dh_rec(h, batch, T(0));
  Matrix<T> dc(h, batch, T(0));
  Matrix<T> dg(h4, batch, T(0));
  const Matrix<T> zero_hb(h, batch, T(0));

  for (int s = steps - 1; s >= 0; --s) {
    const int t = reversed ? steps - 1 - s : s;
    const int t_prev = reversed ? t + 1 : t - 1;
    const bool has_prev = t_prev >= 0 && t_prev < steps;
    const Matrix<T>& h_prev = has_prev ? cache.hidden[static_cast<size_t>(t_prev)] : zero_hb;
    const Matrix<T>& c_prev = has_prev ? cache.cell[static_cast<size_t>(t_prev)] : zero_hb;

    const Matrix<T>& g = cache.gates[static_cast<size_t>(t)];
    const Matrix<T>& tc = cache.tanh_c[static_cast<size_t>(t)];

    for (int r = 0; r < h; ++r) {
      const T* gi = g.row_ptr(r);
      const T* gf = g.row_ptr(h + r);
      const T* gg = g.row_ptr(2 * h + r);
      const T* go = g.row_ptr(3 * h + r);
      const T* tr = tc.row_ptr(r);
      const T* cp = c_prev.row_ptr(r);
      const T* dho = dh_out[static_cast<size_t>(t)].row_ptr(r);
      T* dhr = dh_rec.row_ptr(r);
      T* dcr = dc.row_ptr(r);
      T* dgi = dg.row_ptr(r);
      T* dgf = dg.row_ptr(h + r);
      T* dgg = dg.row_ptr(2 * h + r);
      T* dgo = dg.row_ptr(3 * h + r);
      for (int j = 0; j < batch; ++j) {
        const T dh = dho[j] + dhr[j];
        const T ov = go[j];
        const T tv = tr[j];
        const T dcv = dcr[j] + dh * ov * (T(1) - tv * tv);
        const T iv = gi[j];
        const T fv = gf[j];
        const T gv = gg[j];
        dgi[j] = dcv * gv * iv * (T(1) - iv);
        dgf[j] = dcv * cp[j] * fv * (T(1) - fv);
        dgg[j] = dcv * iv * (T(1) - gv * gv);
        dgo[j] = dh * tv * ov * (T(1) - ov);
        dcr[j] = dcv * fv;  // carried to the previous step
        dhr[j] = T(0);      // rebuilt below from wh^T * dg
      }
    }

    gemm_nt_acc(dg, x[static_cast<size_t>(t)], grad.wx);
    if (has_prev) gemm_nt_acc(dg, h_prev, grad.wh);
    for (int r = 0; r < h4; ++r) {
      const T* dgr = dg.row_ptr(r);
      T acc = T(0);
      for (int j = 0; j < batch; ++j) acc += dgr[j];
      grad.b.at(r, 0) += acc;
    }
    if (want_dx) gemm_tn_acc(p.wx, dg, dx[static_cast<size_t>(t)]);
    if (has_prev) gemm_tn_acc(p.wh, dg, dh_rec);
  }
}

template <class T>
LstmCell<T> make_cell(int input, int hidden) {
  LstmCell<T> c;
  c.wx = Matrix<T>(4 * hidden, input, T(0));
  c.wh = Matrix<T>(4 * hidden, hidden, T(0));
  c.b = Matrix<T>(4 * hidden, 1, T(0));
  return c;
}

template <class T>
Linear<T> make_linear(int output, int input) {
  Linear<T> l;
  l.w = Matrix<T>(output, input, T(0));
  l.b = Matrix<T>(output, 1, T(0));
  return l;
}

}  // namespace derev::nn
