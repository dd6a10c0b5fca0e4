#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "derev/common.h"
#include "derev/nn.h"

namespace derev::dplstm {

// Architecture hyper-parameters. The input stack is [log-envelope bands;
// carrier bands], so the feature dimension is 2 * bands.
struct ArchConfig {
  int bands = 64;
  int time_steps = 250;
  int hidden = 64;
  int path_layers = 3;
  int fusion_layers = 2;

  int features() const { return 2 * bands; }
};

// A uni- or bidirectional LSTM stack. For bidirectional stacks, cells are
// stored [fwd0, bwd0, fwd1, bwd1, ...] and each layer outputs the
// concatenated forward/backward hidden sequences.
template <class T>
struct StackParams {
  std::vector<nn::LstmCell<T>> cells;
  bool bidirectional = false;
  int hidden = 0;
  int layers() const {
    return static_cast<int>(cells.size()) / (bidirectional ? 2 : 1);
  }
};

// Full parameter set. The two enhancement heads are the row halves of the
// fusion projection output: rows [0, bands) add a log-domain envelope gain,
// rows [bands, 2*bands) add a carrier residual.
template <class T>
struct Params {
  ArchConfig arch;
  StackParams<T> time_stack;
  StackParams<T> freq_stack;
  StackParams<T> fusion_stack;
  nn::Linear<T> time_proj;
  nn::Linear<T> freq_proj;
  nn::Linear<T> fusion_proj;
  // corpus standardization of the log-envelope rows, stored with the model
  double norm_mean = 0.0;
  double norm_std = 1.0;
  // decomposition order the model was trained with
  int lp_order = 30;
};

using ParamsF = Params<float>;

template <class T>
struct TensorRef {
  std::string name;
  Matrix<T>* mat;
};

// Canonical parameter order: checkpoint layout, optimizer state and the
// gradient-check groups all follow it.
template <class T>
std::vector<TensorRef<T>> tensor_refs(Params<T>& p);

// Builds a parameter set with seeded uniform init (+1 forget-gate bias). The
// fusion projection starts at zero, so a fresh model is an exact identity.
template <class T>
Params<T> init_params(const ArchConfig& arch, uint64_t seed);

// Standard LSTM stack pass over one sequence held as (features x steps).
// Output is (hidden x steps), or (2*hidden x steps) for bidirectional stacks.
template <class T>
Matrix<T> lstm_forward(const StackParams<T>& stack, const Matrix<T>& seq);

// Dual-path forward for one input: X and Y are (2*bands x time_steps).
template <class T>
Matrix<T> dplstm_forward(const Params<T>& params, const Matrix<T>& x);

// lambda * MSE(env rows of x+y vs target) + (1-lambda) * MSE(carrier rows).
template <class T>
double loss(const Matrix<T>& pred, const Matrix<T>& input, const Matrix<T>& target,
            double lambda);

// Analytic parameter gradients of loss() for one sample.
template <class T>
Params<T> compute_gradients(const Params<T>& p, const Matrix<T>& x, const Matrix<T>& target,
                            double lambda, double* loss_out = nullptr);

struct TrainConfig {
  double lambda = 0.6;
  double learning_rate = 1e-3;
  int epochs = 20;
  int batch_size = 16;
  uint64_t seed = 1234;
  int lp_order = 30;
  ArchConfig arch;
};

struct TrainResult {
  ParamsF params;
  std::vector<double> epoch_loss;
};

// Minibatch Adam training on decomposed 1-second pairs from a corpus
// manifest. Deterministic given the seed. Writes a checkpoint every epoch
// when checkpoint_path is set.
TrainResult train(const TrainConfig& cfg, const std::string& manifest_path,
                  const std::optional<std::string>& checkpoint_path = std::nullopt,
                  const std::optional<std::string>& history_path = std::nullopt);

// segment -> decompose -> forward -> apply heads -> remodulate -> synthesize
// -> desegment. Output length equals input length.
AudioSignal enhance(const ParamsF& params, const AudioSignal& noisy);

void save_checkpoint(const std::string& path, const ParamsF& params);
ParamsF load_checkpoint(const std::string& path);

// Central-difference gradient verification on a small double-precision model.
struct GradCheckGroup {
  std::string name;
  double max_rel_err = 0.0;
};
struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double tolerance = 1e-4;
  bool pass = false;
};
GradCheckReport gradient_check(double lambda = 0.6, uint64_t seed = 7);

}  // namespace derev::dplstm
