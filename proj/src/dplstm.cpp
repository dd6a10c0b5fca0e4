#include "derev/dplstm.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "derev/container.h"
#include "derev/fdlp.h"
#include "derev/roomsim.h"
#include "derev/sigproc.h"
#include "derev/wav.h"

namespace derev::dplstm {

namespace {

using nn::LstmCache;
using nn::LstmCell;
using nn::Linear;

template <class T>
using Steps = std::vector<Matrix<T>>;  // step-major sequence of (features x batch)

// ---------- stack machinery ----------

template <class T>
struct StackCache {
  std::vector<LstmCache<T>> caches;  // layers * dirs
  std::vector<Steps<T>> layer_out;   // per layer: (dirs*H x B) per step
};

template <class T>
void stack_run(const StackParams<T>& sp, const Steps<T>& input, StackCache<T>& sc) {
  const int dirs = sp.bidirectional ? 2 : 1;
  const int layers = sp.layers();
  const int steps = static_cast<int>(input.size());
  const int batch = input[0].cols();
  const int h = sp.hidden;

  sc.caches.assign(static_cast<size_t>(layers * dirs), {});
  sc.layer_out.assign(static_cast<size_t>(layers), {});

  const Steps<T>* cur = &input;
  for (int l = 0; l < layers; ++l) {
    auto& fwd_cache = sc.caches[static_cast<size_t>(l * dirs)];
    nn::lstm_run(sp.cells[static_cast<size_t>(l * dirs)], *cur, false, fwd_cache);
    if (sp.bidirectional)
      nn::lstm_run(sp.cells[static_cast<size_t>(l * dirs + 1)], *cur, true,
                   sc.caches[static_cast<size_t>(l * dirs + 1)]);

    Steps<T>& out = sc.layer_out[static_cast<size_t>(l)];
    out.assign(static_cast<size_t>(steps), Matrix<T>(dirs * h, batch));
    for (int t = 0; t < steps; ++t) {
      Matrix<T>& o = out[static_cast<size_t>(t)];
      const Matrix<T>& hf = fwd_cache.hidden[static_cast<size_t>(t)];
      std::copy_n(hf.data().data(), static_cast<size_t>(h) * batch, o.data().data());
      if (sp.bidirectional) {
        const Matrix<T>& hb =
            sc.caches[static_cast<size_t>(l * dirs + 1)].hidden[static_cast<size_t>(t)];
        std::copy_n(hb.data().data(), static_cast<size_t>(h) * batch,
                    o.data().data() + static_cast<size_t>(h) * batch);
      }
    }
    cur = &out;
  }
}

template <class T>
void stack_backward(const StackParams<T>& sp, const Steps<T>& input, const StackCache<T>& sc,
                    const Steps<T>& dout, StackParams<T>& grad, Steps<T>* dinput) {
  const int dirs = sp.bidirectional ? 2 : 1;
  const int layers = sp.layers();
  const int steps = static_cast<int>(input.size());
  const int batch = input[0].cols();
  const int h = sp.hidden;

  Steps<T> dcur = dout;
  for (int l = layers - 1; l >= 0; --l) {
    const Steps<T>& x = (l == 0) ? input : sc.layer_out[static_cast<size_t>(l - 1)];
    const bool want_dx = (l > 0) || (dinput != nullptr);
    Steps<T> dx(static_cast<size_t>(steps), Matrix<T>(x[0].rows(), batch, T(0)));

    if (!sp.bidirectional) {
      nn::lstm_backward(sp.cells[static_cast<size_t>(l)], x, false,
                        sc.caches[static_cast<size_t>(l)], dcur,
                        grad.cells[static_cast<size_t>(l)], dx, want_dx);
    } else {
      Steps<T> dh_f(static_cast<size_t>(steps), Matrix<T>(h, batch));
      Steps<T> dh_b(static_cast<size_t>(steps), Matrix<T>(h, batch));
      for (int t = 0; t < steps; ++t) {
        const Matrix<T>& d = dcur[static_cast<size_t>(t)];
        std::copy_n(d.data().data(), static_cast<size_t>(h) * batch,
                    dh_f[static_cast<size_t>(t)].data().data());
        std::copy_n(d.data().data() + static_cast<size_t>(h) * batch,
                    static_cast<size_t>(h) * batch, dh_b[static_cast<size_t>(t)].data().data());
      }
      nn::lstm_backward(sp.cells[static_cast<size_t>(l * 2)], x, false,
                        sc.caches[static_cast<size_t>(l * 2)], dh_f,
                        grad.cells[static_cast<size_t>(l * 2)], dx, want_dx);
      nn::lstm_backward(sp.cells[static_cast<size_t>(l * 2 + 1)], x, true,
                        sc.caches[static_cast<size_t>(l * 2 + 1)], dh_b,
                        grad.cells[static_cast<size_t>(l * 2 + 1)], dx, want_dx);
    }
    dcur = std::move(dx);
  }
  if (dinput) *dinput = std::move(dcur);
}

// ---------- projection ----------

template <class T>
void proj_run(const Linear<T>& p, const Steps<T>& x, Steps<T>& y) {
  const int steps = static_cast<int>(x.size());
  const int batch = x[0].cols();
  const int out_dim = p.w.rows();
  y.assign(static_cast<size_t>(steps), Matrix<T>(out_dim, batch));
  for (int t = 0; t < steps; ++t) {
    Matrix<T>& o = y[static_cast<size_t>(t)];
    for (int r = 0; r < out_dim; ++r) {
      T* row = o.row_ptr(r);
      const T b = p.b.at(r, 0);
      for (int j = 0; j < batch; ++j) row[j] = b;
    }
    nn::gemm_acc(p.w, x[static_cast<size_t>(t)], o);
  }
}

template <class T>
void proj_backward(const Linear<T>& p, const Steps<T>& x, const Steps<T>& dy, Linear<T>& grad,
                   Steps<T>& dx) {
  const int steps = static_cast<int>(x.size());
  const int batch = x[0].cols();
  dx.assign(static_cast<size_t>(steps), Matrix<T>(p.w.cols(), batch, T(0)));
  for (int t = 0; t < steps; ++t) {
    const Matrix<T>& d = dy[static_cast<size_t>(t)];
    nn::gemm_nt_acc(d, x[static_cast<size_t>(t)], grad.w);
    for (int r = 0; r < d.rows(); ++r) {
      const T* row = d.row_ptr(r);
      T acc = T(0);
      for (int j = 0; j < batch; ++j) acc += row[j];
      grad.b.at(r, 0) += acc;
    }
    nn::gemm_tn_acc(p.w, d, dx[static_cast<size_t>(t)]);
  }
}

// ---------- full network ----------

template <class T>
struct NetCache {
  Steps<T> x_time;  // T steps of (F x B)
  Steps<T> x_freq;  // F steps of (T x B)
  StackCache<T> time_sc, freq_sc, fusion_sc;
  Steps<T> time_out;  // T of (F x B), after projection
  Steps<T> freq_out;  // F of (T x B), after projection
  Steps<T> cat;       // T of (2F x B)
  Steps<T> y;         // T of (F x B)
};

// samples: B matrices of (features x time_steps)
template <class T>
void net_forward(const Params<T>& p, const std::vector<const Matrix<T>*>& samples,
                 NetCache<T>& nc) {
  const int f = p.arch.features();
  const int steps = p.arch.time_steps;
  const int batch = static_cast<int>(samples.size());

  for (int b = 0; b < batch; ++b)
    if (samples[static_cast<size_t>(b)]->rows() != f ||
        samples[static_cast<size_t>(b)]->cols() != steps)
      throw std::invalid_argument("invalid-argument: dplstm input must be " + std::to_string(f) +
                                  "x" + std::to_string(steps));

  nc.x_time.assign(static_cast<size_t>(steps), Matrix<T>(f, batch));
  for (int t = 0; t < steps; ++t) {
    Matrix<T>& xt = nc.x_time[static_cast<size_t>(t)];
    for (int b = 0; b < batch; ++b) {
      const Matrix<T>& s = *samples[static_cast<size_t>(b)];
      for (int r = 0; r < f; ++r) xt.at(r, b) = s.at(r, t);
    }
  }
  nc.x_freq.assign(static_cast<size_t>(f), Matrix<T>(steps, batch));
  for (int r = 0; r < f; ++r) {
    Matrix<T>& xr = nc.x_freq[static_cast<size_t>(r)];
    for (int b = 0; b < batch; ++b) {
      const T* row = samples[static_cast<size_t>(b)]->row_ptr(r);
      for (int t = 0; t < steps; ++t) xr.at(t, b) = row[t];
    }
  }

  stack_run(p.time_stack, nc.x_time, nc.time_sc);
  proj_run(p.time_proj, nc.time_sc.layer_out.back(), nc.time_out);

  stack_run(p.freq_stack, nc.x_freq, nc.freq_sc);
  proj_run(p.freq_proj, nc.freq_sc.layer_out.back(), nc.freq_out);

  // concatenate along the feature axis: [time path output; freq path output]
  nc.cat.assign(static_cast<size_t>(steps), Matrix<T>(2 * f, batch));
  for (int t = 0; t < steps; ++t) {
    Matrix<T>& c = nc.cat[static_cast<size_t>(t)];
    const Matrix<T>& to = nc.time_out[static_cast<size_t>(t)];
    std::copy_n(to.data().data(), static_cast<size_t>(f) * batch, c.data().data());
    for (int r = 0; r < f; ++r) {
      const Matrix<T>& fo = nc.freq_out[static_cast<size_t>(r)];
      T* crow = c.row_ptr(f + r);
      const T* forow = fo.row_ptr(t);
      for (int b = 0; b < batch; ++b) crow[b] = forow[b];
    }
  }

  stack_run(p.fusion_stack, nc.cat, nc.fusion_sc);
  proj_run(p.fusion_proj, nc.fusion_sc.layer_out.back(), nc.y);
}

template <class T>
void net_backward(const Params<T>& p, const NetCache<T>& nc, const Steps<T>& dy,
                  Params<T>& grad) {
  const int f = p.arch.features();
  const int steps = p.arch.time_steps;
  const int batch = nc.x_time[0].cols();

  Steps<T> dfusion_hidden;
  proj_backward(p.fusion_proj, nc.fusion_sc.layer_out.back(), dy, grad.fusion_proj,
                dfusion_hidden);

  Steps<T> dcat;
  stack_backward(p.fusion_stack, nc.cat, nc.fusion_sc, dfusion_hidden, grad.fusion_stack, &dcat);

  Steps<T> dtime_out(static_cast<size_t>(steps), Matrix<T>(f, batch));
  Steps<T> dfreq_out(static_cast<size_t>(f), Matrix<T>(steps, batch));
  for (int t = 0; t < steps; ++t) {
    const Matrix<T>& dc = dcat[static_cast<size_t>(t)];
    std::copy_n(dc.data().data(), static_cast<size_t>(f) * batch,
                dtime_out[static_cast<size_t>(t)].data().data());
    for (int r = 0; r < f; ++r) {
      const T* drow = dc.row_ptr(f + r);
      T* orow = dfreq_out[static_cast<size_t>(r)].row_ptr(t);
      for (int b = 0; b < batch; ++b) orow[b] = drow[b];
    }
  }

  Steps<T> dtime_hidden;
  proj_backward(p.time_proj, nc.time_sc.layer_out.back(), dtime_out, grad.time_proj,
                dtime_hidden);
  stack_backward(p.time_stack, nc.x_time, nc.time_sc, dtime_hidden, grad.time_stack,
                 static_cast<Steps<T>*>(nullptr));

  Steps<T> dfreq_hidden;
  proj_backward(p.freq_proj, nc.freq_sc.layer_out.back(), dfreq_out, grad.freq_proj,
                dfreq_hidden);
  stack_backward(p.freq_stack, nc.x_freq, nc.freq_sc, dfreq_hidden, grad.freq_stack,
                 static_cast<Steps<T>*>(nullptr));
}

// loss over a batch plus dY; shapes all (F x T) per sample. Returns the mean
// per-sample loss.
template <class T>
double batch_loss_grad(const std::vector<const Matrix<T>*>& inputs,
                       const std::vector<const Matrix<T>*>& targets, const NetCache<T>& nc,
                       double lambda, int bands, Steps<T>* dy) {
  const int f = 2 * bands;
  const int steps = static_cast<int>(nc.y.size());
  const int batch = nc.y[0].cols();
  const double env_n = static_cast<double>(bands) * steps;
  const double carr_n = env_n;

  if (dy) dy->assign(static_cast<size_t>(steps), Matrix<T>(f, batch, T(0)));

  double env_sum = 0.0, carr_sum = 0.0;
  for (int t = 0; t < steps; ++t) {
    const Matrix<T>& y = nc.y[static_cast<size_t>(t)];
    Matrix<T>* d = dy ? &(*dy)[static_cast<size_t>(t)] : nullptr;
    for (int r = 0; r < f; ++r) {
      const bool env_row = r < bands;
      const T* yrow = y.row_ptr(r);
      T* drow = d ? d->row_ptr(r) : nullptr;
      for (int b = 0; b < batch; ++b) {
        const double xv = inputs[static_cast<size_t>(b)]->at(r, t);
        const double tv = targets[static_cast<size_t>(b)]->at(r, t);
        const double diff = xv + static_cast<double>(yrow[b]) - tv;
        if (env_row)
          env_sum += diff * diff;
        else
          carr_sum += diff * diff;
        if (drow) {
          const double w = env_row ? lambda / (env_n * batch) : (1.0 - lambda) / (carr_n * batch);
          drow[b] = static_cast<T>(2.0 * w * diff);
        }
      }
    }
  }
  return lambda * env_sum / (env_n * batch) + (1.0 - lambda) * carr_sum / (carr_n * batch);
}

// ---------- init / registry ----------

template <class T>
StackParams<T> make_stack(int layers, int input_dim, int hidden, bool bidirectional) {
  StackParams<T> sp;
  sp.bidirectional = bidirectional;
  sp.hidden = hidden;
  const int dirs = bidirectional ? 2 : 1;
  for (int l = 0; l < layers; ++l) {
    const int in = (l == 0) ? input_dim : dirs * hidden;
    for (int d = 0; d < dirs; ++d) sp.cells.push_back(nn::make_cell<T>(in, hidden));
  }
  return sp;
}

template <class T>
void seed_matrix(Matrix<T>& m, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> uni(-scale, scale);
  for (auto& v : m.data()) v = static_cast<T>(uni(rng));
}

template <class T>
void seed_cell(LstmCell<T>& c, std::mt19937_64& rng) {
  seed_matrix(c.wx, rng, 1.0 / std::sqrt(static_cast<double>(c.input())));
  seed_matrix(c.wh, rng, 1.0 / std::sqrt(static_cast<double>(c.hidden())));
  c.b.fill(T(0));
  // forget-gate bias starts open
  const int h = c.hidden();
  for (int r = h; r < 2 * h; ++r) c.b.at(r, 0) = T(1);
}

}  // namespace

template <class T>
std::vector<TensorRef<T>> tensor_refs(Params<T>& p) {
  std::vector<TensorRef<T>> refs;
  auto add_stack = [&refs](const std::string& prefix, StackParams<T>& sp) {
    const int dirs = sp.bidirectional ? 2 : 1;
    for (int l = 0; l < sp.layers(); ++l) {
      for (int d = 0; d < dirs; ++d) {
        const std::string base = prefix + ".l" + std::to_string(l) +
                                 (sp.bidirectional ? (d == 0 ? ".fwd" : ".bwd") : "");
        LstmCell<T>& c = sp.cells[static_cast<size_t>(l * dirs + d)];
        refs.push_back({base + ".wx", &c.wx});
        refs.push_back({base + ".wh", &c.wh});
        refs.push_back({base + ".b", &c.b});
      }
    }
  };
  add_stack("time", p.time_stack);
  refs.push_back({"time_proj.w", &p.time_proj.w});
  refs.push_back({"time_proj.b", &p.time_proj.b});
  add_stack("freq", p.freq_stack);
  refs.push_back({"freq_proj.w", &p.freq_proj.w});
  refs.push_back({"freq_proj.b", &p.freq_proj.b});
  add_stack("fusion", p.fusion_stack);
  refs.push_back({"fusion_proj.w", &p.fusion_proj.w});
  refs.push_back({"fusion_proj.b", &p.fusion_proj.b});
  return refs;
}

template <class T>
Params<T> init_params(const ArchConfig& arch, uint64_t seed) {
  if (arch.bands <= 0 || arch.time_steps <= 0 || arch.hidden <= 0 || arch.path_layers <= 0 ||
      arch.fusion_layers <= 0)
    throw std::invalid_argument("invalid-argument: bad architecture config");

  Params<T> p;
  p.arch = arch;
  const int f = arch.features();
  p.time_stack = make_stack<T>(arch.path_layers, f, arch.hidden, false);
  p.freq_stack = make_stack<T>(arch.path_layers, arch.time_steps, arch.hidden, false);
  p.fusion_stack = make_stack<T>(arch.fusion_layers, 2 * f, arch.hidden, true);
  p.time_proj = nn::make_linear<T>(f, arch.hidden);
  p.freq_proj = nn::make_linear<T>(arch.time_steps, arch.hidden);
  p.fusion_proj = nn::make_linear<T>(f, 2 * arch.hidden);

  std::mt19937_64 rng(seed);
  for (auto& c : p.time_stack.cells) seed_cell(c, rng);
  seed_matrix(p.time_proj.w, rng, 1.0 / std::sqrt(static_cast<double>(arch.hidden)));
  for (auto& c : p.freq_stack.cells) seed_cell(c, rng);
  seed_matrix(p.freq_proj.w, rng, 1.0 / std::sqrt(static_cast<double>(arch.hidden)));
  for (auto& c : p.fusion_stack.cells) seed_cell(c, rng);
  // zero output projection: a fresh model is an exact identity
  p.fusion_proj.w.fill(T(0));
  p.fusion_proj.b.fill(T(0));
  return p;
}

template <class T>
Matrix<T> lstm_forward(const StackParams<T>& stack, const Matrix<T>& seq) {
  if (stack.cells.empty()) throw std::invalid_argument("invalid-argument: empty LSTM stack");
  if (seq.rows() != stack.cells[0].input())
    throw std::invalid_argument("invalid-argument: lstm_forward feature dim mismatch");

  const int steps = seq.cols();
  Steps<T> x(static_cast<size_t>(steps), Matrix<T>(seq.rows(), 1));
  for (int t = 0; t < steps; ++t)
    for (int r = 0; r < seq.rows(); ++r) x[static_cast<size_t>(t)].at(r, 0) = seq.at(r, t);

  StackCache<T> sc;
  stack_run(stack, x, sc);
  const Steps<T>& out = sc.layer_out.back();
  Matrix<T> y(out[0].rows(), steps);
  for (int t = 0; t < steps; ++t)
    for (int r = 0; r < y.rows(); ++r) y.at(r, t) = out[static_cast<size_t>(t)].at(r, 0);
  return y;
}

template <class T>
Matrix<T> dplstm_forward(const Params<T>& params, const Matrix<T>& x) {
  NetCache<T> nc;
  net_forward(params, {&x}, nc);
  Matrix<T> y(params.arch.features(), params.arch.time_steps);
  for (int t = 0; t < params.arch.time_steps; ++t)
    for (int r = 0; r < y.rows(); ++r) y.at(r, t) = nc.y[static_cast<size_t>(t)].at(r, 0);
  return y;
}

template <class T>
double loss(const Matrix<T>& pred, const Matrix<T>& input, const Matrix<T>& target,
            double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw std::invalid_argument("invalid-argument: lambda must be in [0,1]");
  if (!pred.same_shape(input) || !pred.same_shape(target))
    throw std::invalid_argument("invalid-argument: loss shape mismatch");
  if (pred.rows() % 2 != 0)
    throw std::invalid_argument("invalid-argument: loss expects an even feature count");

  const int bands = pred.rows() / 2;
  double env_sum = 0.0, carr_sum = 0.0;
  for (int r = 0; r < pred.rows(); ++r)
    for (int t = 0; t < pred.cols(); ++t) {
      const double d = static_cast<double>(input.at(r, t)) + pred.at(r, t) - target.at(r, t);
      if (r < bands)
        env_sum += d * d;
      else
        carr_sum += d * d;
    }
  const double n = static_cast<double>(bands) * pred.cols();
  return lambda * env_sum / n + (1.0 - lambda) * carr_sum / n;
}

template <class T>
Params<T> compute_gradients(const Params<T>& p, const Matrix<T>& x, const Matrix<T>& target,
                            double lambda, double* loss_out) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw std::invalid_argument("invalid-argument: lambda must be in [0,1]");
  NetCache<T> nc;
  net_forward(p, {&x}, nc);
  Params<T> grad = init_params<T>(p.arch, 0);
  for (auto& ref : tensor_refs(grad)) ref.mat->fill(T(0));

  Steps<T> dy;
  const double l =
      batch_loss_grad<T>({&x}, {&target}, nc, lambda, p.arch.bands, &dy);
  if (loss_out) *loss_out = l;
  net_backward(p, nc, dy, grad);
  return grad;
}

// explicit instantiations
template std::vector<TensorRef<float>> tensor_refs(Params<float>&);
template std::vector<TensorRef<double>> tensor_refs(Params<double>&);
template Params<float> init_params(const ArchConfig&, uint64_t);
template Params<double> init_params(const ArchConfig&, uint64_t);
template Matrix<float> lstm_forward(const StackParams<float>&, const Matrix<float>&);
template Matrix<double> lstm_forward(const StackParams<double>&, const Matrix<double>&);
template Matrix<float> dplstm_forward(const Params<float>&, const Matrix<float>&);
template Matrix<double> dplstm_forward(const Params<double>&, const Matrix<double>&);
template double loss(const Matrix<float>&, const Matrix<float>&, const Matrix<float>&, double);
template double loss(const Matrix<double>&, const Matrix<double>&, const Matrix<double>&, double);
template Params<float> compute_gradients(const Params<float>&, const Matrix<float>&,
                                         const Matrix<float>&, double, double*);
template Params<double> compute_gradients(const Params<double>&, const Matrix<double>&,
                                          const Matrix<double>&, double, double*);

// ---------- checkpoints ----------

void save_checkpoint(const std::string& path, const ParamsF& params) {
  io::TensorContainer c;
  auto meta_num = [&c](const std::string& k, double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    c.meta.emplace_back(k, ss.str());
  };
  c.meta.emplace_back("kind", "dplstm-checkpoint");
  meta_num("arch.bands", params.arch.bands);
  meta_num("arch.time_steps", params.arch.time_steps);
  meta_num("arch.hidden", params.arch.hidden);
  meta_num("arch.path_layers", params.arch.path_layers);
  meta_num("arch.fusion_layers", params.arch.fusion_layers);
  meta_num("norm.mean", params.norm_mean);
  meta_num("norm.std", params.norm_std);
  meta_num("fdlp.lp_order", params.lp_order);

  ParamsF copy = params;
  for (const auto& ref : tensor_refs(copy)) {
    io::NamedTensor t;
    t.name = ref.name;
    t.dims = {ref.mat->rows(), ref.mat->cols()};
    t.data = ref.mat->data();
    c.tensors.push_back(std::move(t));
  }
  io::write_container(path, c);
}

ParamsF load_checkpoint(const std::string& path) {
  const io::TensorContainer c = io::read_container(path);
  const std::string* kind = c.find_meta("kind");
  if (!kind || *kind != "dplstm-checkpoint")
    throw std::runtime_error("bad-format: not a dplstm checkpoint: " + path);

  auto meta_num = [&c, &path](const std::string& k) {
    const std::string* v = c.find_meta(k);
    if (!v) throw std::runtime_error("bad-format: checkpoint missing meta " + k + ": " + path);
    return std::stod(*v);
  };
  ArchConfig arch;
  arch.bands = static_cast<int>(meta_num("arch.bands"));
  arch.time_steps = static_cast<int>(meta_num("arch.time_steps"));
  arch.hidden = static_cast<int>(meta_num("arch.hidden"));
  arch.path_layers = static_cast<int>(meta_num("arch.path_layers"));
  arch.fusion_layers = static_cast<int>(meta_num("arch.fusion_layers"));

  ParamsF p = init_params<float>(arch, 0);
  p.norm_mean = meta_num("norm.mean");
  p.norm_std = meta_num("norm.std");
  if (c.find_meta("fdlp.lp_order")) p.lp_order = static_cast<int>(meta_num("fdlp.lp_order"));
  for (auto& ref : tensor_refs(p)) {
    const io::NamedTensor* t = c.find_tensor(ref.name);
    if (!t) throw std::runtime_error("bad-format: checkpoint missing tensor " + ref.name);
    if (t->dims.size() != 2 || t->dims[0] != ref.mat->rows() || t->dims[1] != ref.mat->cols())
      throw std::runtime_error("shape-mismatch: checkpoint tensor " + ref.name);
    ref.mat->data() = t->data;
  }
  return p;
}

// ---------- training ----------

namespace {

struct AdamState {
  std::vector<std::vector<float>> m, v;
  int64_t t = 0;
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
};

void adam_step(ParamsF& params, ParamsF& grads, AdamState& st, double lr) {
  auto prefs = tensor_refs(params);
  auto grefs = tensor_refs(grads);
  if (st.m.empty()) {
    st.m.resize(prefs.size());
    st.v.resize(prefs.size());
    for (size_t i = 0; i < prefs.size(); ++i) {
      st.m[i].assign(prefs[i].mat->size(), 0.0f);
      st.v[i].assign(prefs[i].mat->size(), 0.0f);
    }
  }
  st.t += 1;
  const double bc1 = 1.0 - std::pow(AdamState::kBeta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(AdamState::kBeta2, static_cast<double>(st.t));
  for (size_t i = 0; i < prefs.size(); ++i) {
    auto& p = prefs[i].mat->data();
    const auto& g = grefs[i].mat->data();
    auto& m = st.m[i];
    auto& v = st.v[i];
    for (size_t j = 0; j < p.size(); ++j) {
      m[j] = static_cast<float>(AdamState::kBeta1 * m[j] + (1.0 - AdamState::kBeta1) * g[j]);
      v[j] = static_cast<float>(AdamState::kBeta2 * v[j] +
                                (1.0 - AdamState::kBeta2) * static_cast<double>(g[j]) * g[j]);
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] = static_cast<float>(p[j] - lr * mhat / (std::sqrt(vhat) + AdamState::kEps));
    }
  }
}

struct TrainSample {
  Matrix<float> input;   // standardized [log_env; carrier], F x T
  Matrix<float> target;  // same layout
};

Matrix<float> stack_ec(const fdlp::EnvelopeCarrier& ec) {
  const int bands = ec.log_env.rows();
  const int steps = ec.log_env.cols();
  Matrix<float> m(2 * bands, steps);
  for (int q = 0; q < bands; ++q)
    for (int t = 0; t < steps; ++t) {
      m.at(q, t) = static_cast<float>(ec.log_env.at(q, t));
      m.at(bands + q, t) = static_cast<float>(ec.carrier.at(q, t));
    }
  return m;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::string& manifest_path,
                  const std::optional<std::string>& checkpoint_path,
                  const std::optional<std::string>& history_path) {
  if (!(cfg.lambda >= 0.0 && cfg.lambda <= 1.0))
    throw std::invalid_argument("invalid-argument: lambda must be in [0,1]");
  if (cfg.epochs <= 0 || cfg.batch_size <= 0)
    throw std::invalid_argument("invalid-argument: epochs/batch_size must be positive");

  const auto entries = roomsim::read_manifest(manifest_path);
  if (entries.empty()) throw std::invalid_argument("invalid-argument: empty corpus manifest");

  const ArchConfig arch = cfg.arch;
  const int seg_len = arch.bands * arch.time_steps;
  const qmf::QmfPrototype proto = qmf::design_prototype();
  fdlp::FdlpConfig fcfg;
  fcfg.lp_order = cfg.lp_order;

  // decompose aligned 1-second pairs; zero-padded tail segments are dropped
  std::vector<TrainSample> data;
  for (const auto& e : entries) {
    const AudioSignal clean = io::read_wav(e.clean_path);
    const AudioSignal reverb = io::read_wav(e.reverb_path);
    const size_t full = std::min(clean.samples.size(), reverb.samples.size()) /
                        static_cast<size_t>(seg_len);
    for (size_t s = 0; s < full; ++s) {
      const std::span<const double> cs(clean.samples.data() + s * seg_len,
                                       static_cast<size_t>(seg_len));
      const std::span<const double> rs(reverb.samples.data() + s * seg_len,
                                       static_cast<size_t>(seg_len));
      TrainSample sample;
      sample.input = stack_ec(fdlp::decompose(rs, proto, fcfg));
      sample.target = stack_ec(fdlp::decompose(cs, proto, fcfg));
      data.push_back(std::move(sample));
    }
  }
  if (data.empty())
    throw std::invalid_argument("invalid-argument: corpus has no full training segments");

  // standardize the log-envelope rows by the input-corpus statistics
  double mean = 0.0, sq = 0.0;
  size_t n_env = 0;
  for (const auto& s : data)
    for (int q = 0; q < arch.bands; ++q)
      for (int t = 0; t < arch.time_steps; ++t) {
        const double v = s.input.at(q, t);
        mean += v;
        sq += v * v;
        ++n_env;
      }
  mean /= static_cast<double>(n_env);
  const double var = sq / static_cast<double>(n_env) - mean * mean;
  const double stdev = std::sqrt(std::max(var, 1e-12));
  for (auto& s : data)
    for (int q = 0; q < arch.bands; ++q)
      for (int t = 0; t < arch.time_steps; ++t) {
        s.input.at(q, t) = static_cast<float>((s.input.at(q, t) - mean) / stdev);
        s.target.at(q, t) = static_cast<float>((s.target.at(q, t) - mean) / stdev);
      }

  ParamsF params = init_params<float>(arch, cfg.seed);
  params.norm_mean = mean;
  params.norm_std = stdev;
  params.lp_order = cfg.lp_order;
  ParamsF grads = init_params<float>(arch, 0);
  AdamState adam;

  std::ofstream hist;
  if (history_path) {
    hist.open(*history_path, std::ios::trunc);
    if (!hist) throw std::runtime_error("missing-file: cannot create " + *history_path);
  }

  std::mt19937_64 shuffle_rng(cfg.seed);
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});

  TrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    size_t seen = 0;

    for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), begin + static_cast<size_t>(cfg.batch_size));
      std::vector<const Matrix<float>*> inputs, targets;
      for (size_t i = begin; i < end; ++i) {
        inputs.push_back(&data[order[i]].input);
        targets.push_back(&data[order[i]].target);
      }

      NetCache<float> nc;
      net_forward(params, inputs, nc);
      Steps<float> dy;
      const double batch_loss =
          batch_loss_grad<float>(inputs, targets, nc, cfg.lambda, arch.bands, &dy);
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch + 1));

      for (auto& ref : tensor_refs(grads)) ref.mat->fill(0.0f);
      net_backward(params, nc, dy, grads);
      adam_step(params, grads, adam, cfg.learning_rate);

      epoch_loss += batch_loss * static_cast<double>(end - begin);
      seen += end - begin;
    }
    epoch_loss /= static_cast<double>(seen);
    result.epoch_loss.push_back(epoch_loss);

    if (hist.is_open()) {
      hist.precision(9);
      hist << std::scientific << epoch + 1 << " " << epoch_loss << "\n";
      hist.flush();
    }
    if (checkpoint_path) save_checkpoint(*checkpoint_path, params);
  }

  result.params = std::move(params);
  return result;
}

// ---------- inference ----------

AudioSignal enhance(const ParamsF& params, const AudioSignal& noisy) {
  if (noisy.sample_rate != 16000)
    throw std::invalid_argument("invalid-argument: enhance expects 16 kHz input");
  if (noisy.samples.empty())
    throw std::invalid_argument("invalid-argument: enhance on empty signal");
  const ArchConfig& arch = params.arch;
  const int seg_len = arch.bands * arch.time_steps;

  const qmf::QmfPrototype proto = qmf::design_prototype();
  fdlp::FdlpConfig fcfg;
  fcfg.lp_order = params.lp_order;

  sigproc::SegmentGrid grid{seg_len};
  const auto segments = sigproc::segment(noisy, grid);

  std::vector<fdlp::EnvelopeCarrier> decomposed;
  std::vector<Matrix<float>> inputs;
  decomposed.reserve(segments.size());
  inputs.reserve(segments.size());
  for (const auto& seg : segments) {
    decomposed.push_back(fdlp::decompose(seg, proto, fcfg));
    Matrix<float> x = stack_ec(decomposed.back());
    for (int q = 0; q < arch.bands; ++q)
      for (int t = 0; t < arch.time_steps; ++t)
        x.at(q, t) = static_cast<float>((x.at(q, t) - params.norm_mean) / params.norm_std);
    inputs.push_back(std::move(x));
  }

  // bounded forward batches over the segments
  constexpr size_t kMaxBatch = 16;
  std::vector<std::vector<double>> out_segments(segments.size());
  for (size_t begin = 0; begin < inputs.size(); begin += kMaxBatch) {
    const size_t end = std::min(inputs.size(), begin + kMaxBatch);
    std::vector<const Matrix<float>*> batch;
    for (size_t i = begin; i < end; ++i) batch.push_back(&inputs[i]);
    NetCache<float> nc;
    net_forward(params, batch, nc);

    for (size_t i = begin; i < end; ++i) {
      const int b = static_cast<int>(i - begin);
      fdlp::EnvelopeCarrier& ec = decomposed[i];
      for (int t = 0; t < arch.time_steps; ++t) {
        const Matrix<float>& y = nc.y[static_cast<size_t>(t)];
        for (int q = 0; q < arch.bands; ++q) {
          // env head: additive gain in standardized log units
          double le = ec.log_env.at(q, t) +
                      params.norm_std * static_cast<double>(y.at(q, b));
          le = std::clamp(le, -500.0, 500.0);
          ec.log_env.at(q, t) = le;
          ec.carrier.at(q, t) += static_cast<double>(y.at(arch.bands + q, b));
        }
      }
      out_segments[i] = fdlp::reconstruct(ec, proto);
    }
  }

  AudioSignal out;
  out.sample_rate = noisy.sample_rate;
  out.samples = sigproc::desegment(out_segments, noisy.samples.size());
  return out;
}

// ---------- gradient check ----------

GradCheckReport gradient_check(double lambda, uint64_t seed) {
  ArchConfig arch;
  arch.bands = 6;
  arch.time_steps = 8;
  arch.hidden = 4;
  arch.path_layers = 3;
  arch.fusion_layers = 2;

  Params<double> p = init_params<double>(arch, seed);
  std::mt19937_64 rng(seed ^ 0xabcdef12ULL);
  std::uniform_real_distribution<double> uni(-0.5, 0.5);
  // the output projection must be non-zero or upstream gradients vanish
  for (auto& v : p.fusion_proj.w.data()) v = uni(rng);
  for (auto& v : p.fusion_proj.b.data()) v = uni(rng);

  Matrix<double> x(arch.features(), arch.time_steps);
  Matrix<double> target(arch.features(), arch.time_steps);
  for (auto& v : x.data()) v = uni(rng);
  for (auto& v : target.data()) v = uni(rng);

  Params<double> analytic = compute_gradients(p, x, target, lambda, nullptr);

  auto forward_loss = [&]() {
    const Matrix<double> y = dplstm_forward(p, x);
    return loss(y, x, target, lambda);
  };

  const double eps = 1e-5;
  GradCheckReport report;
  report.tolerance = 1e-4;

  auto group_of = [](const std::string& name) {
    if (name.rfind("time_proj", 0) == 0) return std::string("time_proj");
    if (name.rfind("freq_proj", 0) == 0) return std::string("freq_proj");
    if (name.rfind("fusion_proj", 0) == 0) return std::string("fusion_proj");
    if (name.rfind("time", 0) == 0) return std::string("time");
    if (name.rfind("freq", 0) == 0) return std::string("freq");
    return std::string("fusion");
  };

  std::vector<TensorRef<double>> prefs = tensor_refs(p);
  std::vector<TensorRef<double>> grefs = tensor_refs(analytic);
  std::map<std::string, double> worst;
  for (size_t i = 0; i < prefs.size(); ++i) {
    const std::string grp = group_of(prefs[i].name);
    auto& pdata = prefs[i].mat->data();
    const auto& gdata = grefs[i].mat->data();
    for (size_t j = 0; j < pdata.size(); ++j) {
      const double orig = pdata[j];
      pdata[j] = orig + eps;
      const double lp = forward_loss();
      pdata[j] = orig - eps;
      const double lm = forward_loss();
      pdata[j] = orig;
      const double fd = (lp - lm) / (2.0 * eps);
      const double an = gdata[j];
      const double denom = std::max(std::abs(fd) + std::abs(an), 1e-8);
      const double rel = std::abs(fd - an) / denom;
      auto it = worst.find(grp);
      if (it == worst.end() || rel > it->second) worst[grp] = rel;
    }
  }

  report.pass = true;
  for (const auto& [name, err] : worst) {
    report.groups.push_back({name, err});
    if (err > report.tolerance) report.pass = false;
  }
  return report;
}

}  // namespace derev::dplstm
