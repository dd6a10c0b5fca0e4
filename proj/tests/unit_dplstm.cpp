#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "derev/dplstm.h"
#include "derev/roomsim.h"
#include "derev/wav.h"
#include "testutil.h"

using namespace derev;
using namespace derev::dplstm;

namespace {

ArchConfig tiny_arch() {
  ArchConfig a;
  a.bands = 6;
  a.time_steps = 8;
  a.hidden = 4;
  return a;
}

Matrix<double> random_mat(int rows, int cols, uint64_t seed, double scale = 0.5) {
  Matrix<double> m(rows, cols);
  const auto v = testutil::random_vector(static_cast<size_t>(rows) * cols, seed, -scale, scale);
  for (size_t i = 0; i < v.size(); ++i) m.data()[i] = v[i];
  return m;
}

}  // namespace

TEST_CASE("lstm_forward with zero weights gives zero hidden values") {
  StackParams<double> stack;
  stack.hidden = 3;
  stack.cells.push_back(nn::make_cell<double>(5, 3));
  Matrix<double> seq = random_mat(5, 10, 1);
  const auto out = lstm_forward(stack, seq);
  CHECK(out.rows() == 3);
  CHECK(out.cols() == 10);
  for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("single-step one-unit lstm matches a hand-executed cell") {
  // one input, one hidden unit, one step: every gate is a scalar sigmoid/tanh
  StackParams<double> stack;
  stack.hidden = 1;
  auto cell = nn::make_cell<double>(1, 1);
  const double wi = 0.3, wf = -0.2, wg = 0.7, wo = 0.1;
  const double bi = 0.05, bf = 0.2, bg = -0.1, bo = 0.4;
  cell.wx.at(0, 0) = wi;
  cell.wx.at(1, 0) = wf;
  cell.wx.at(2, 0) = wg;
  cell.wx.at(3, 0) = wo;
  cell.b.at(0, 0) = bi;
  cell.b.at(1, 0) = bf;
  cell.b.at(2, 0) = bg;
  cell.b.at(3, 0) = bo;
  // recurrent weights do not matter for a single step from zero state
  cell.wh.at(0, 0) = 9.9;
  stack.cells.push_back(cell);

  const double x = 0.8;
  Matrix<double> seq(1, 1);
  seq.at(0, 0) = x;
  const auto out = lstm_forward(stack, seq);

  auto sigma = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const double i_g = sigma(wi * x + bi);
  const double g_g = std::tanh(wg * x + bg);
  const double o_g = sigma(wo * x + bo);
  const double c = i_g * g_g;
  const double expect = o_g * std::tanh(c);
  CHECK(out.at(0, 0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("lstm hidden values stay inside (-1,1)") {
  StackParams<double> stack;
  stack.hidden = 6;
  stack.cells.push_back(nn::make_cell<double>(4, 6));
  stack.cells.push_back(nn::make_cell<double>(6, 6));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uni(-2.0, 2.0);
  for (auto& c : stack.cells) {
    for (auto& v : c.wx.data()) v = uni(rng);
    for (auto& v : c.wh.data()) v = uni(rng);
    for (auto& v : c.b.data()) v = uni(rng);
  }
  const auto out = lstm_forward(stack, random_mat(4, 50, 9, 2.0));
  for (double v : out.data()) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("lstm_forward validates the feature dimension") {
  StackParams<double> stack;
  stack.hidden = 2;
  stack.cells.push_back(nn::make_cell<double>(3, 2));
  CHECK_THROWS_AS(lstm_forward(stack, random_mat(4, 5, 1)), std::invalid_argument);
}

TEST_CASE("fresh dplstm params are an exact identity") {
  const auto arch = tiny_arch();
  const auto p = init_params<double>(arch, 42);
  const auto x = random_mat(arch.features(), arch.time_steps, 7);
  const auto y = dplstm_forward(p, x);
  REQUIRE(y.rows() == arch.features());
  REQUIRE(y.cols() == arch.time_steps);
  for (double v : y.data()) CHECK(v == 0.0);
}

TEST_CASE("dplstm_forward keeps shape and stays finite across hidden sizes") {
  for (int hidden : {2, 4, 8, 64}) {
    ArchConfig a = tiny_arch();
    a.hidden = hidden;
    auto p = init_params<double>(a, 11);
    // non-trivial output head
    p.fusion_proj.w = random_mat(a.features(), 2 * hidden, 5);
    const auto x = random_mat(a.features(), a.time_steps, 13);
    const auto y = dplstm_forward(p, x);
    CHECK(y.rows() == a.features());
    CHECK(y.cols() == a.time_steps);
    for (double v : y.data()) CHECK(std::isfinite(v));
  }
}

TEST_CASE("dplstm_forward rejects wrong input shapes") {
  const auto p = init_params<double>(tiny_arch(), 1);
  CHECK_THROWS_AS(dplstm_forward(p, random_mat(5, 8, 1)), std::invalid_argument);
  CHECK_THROWS_AS(dplstm_forward(p, random_mat(12, 9, 1)), std::invalid_argument);
}

TEST_CASE("loss arithmetic and endpoints") {
  Matrix<double> zero(4, 3, 0.0);
  Matrix<double> pred(4, 3, 0.0);
  Matrix<double> target(4, 3, 0.0);
  CHECK(loss(pred, zero, target, 0.5) == 0.0);

  // env MSE 2, carrier MSE 4 -> lambda 0.5 gives 3
  Matrix<double> input(4, 3, 0.0);
  Matrix<double> t2(4, 3, 0.0);
  for (int c = 0; c < 3; ++c) {
    t2.at(0, c) = std::sqrt(2.0);
    t2.at(1, c) = std::sqrt(2.0);
    t2.at(2, c) = 2.0;
    t2.at(3, c) = 2.0;
  }
  CHECK(loss(pred, input, t2, 0.5) == doctest::Approx(3.0).epsilon(1e-12));

  CHECK_THROWS_AS(loss(pred, input, t2, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(loss(pred, input, Matrix<double>(3, 3, 0.0), 0.5), std::invalid_argument);
}

TEST_CASE("gradient check passes on every parameter group") {
  const auto report = gradient_check(0.6, 7);
  CHECK(report.groups.size() == 6);
  for (const auto& g : report.groups) {
    INFO(g.name);
    CHECK(g.max_rel_err <= report.tolerance);
  }
  CHECK(report.pass);
}

TEST_CASE("lambda endpoints cut gradient flow to the other head") {
  const auto arch = tiny_arch();
  auto p = init_params<double>(arch, 3);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> uni(-0.5, 0.5);
  for (auto& v : p.fusion_proj.w.data()) v = uni(rng);
  for (auto& v : p.fusion_proj.b.data()) v = uni(rng);

  const auto x = random_mat(arch.features(), arch.time_steps, 21);
  const auto target = random_mat(arch.features(), arch.time_steps, 22);

  // lambda = 1: rows of the fusion projection feeding the carrier head get
  // exactly zero gradient
  auto g1 = compute_gradients(p, x, target, 1.0);
  double env_mag = 0.0;
  for (int r = 0; r < arch.bands; ++r) {
    for (int c = 0; c < g1.fusion_proj.w.cols(); ++c)
      env_mag += std::abs(g1.fusion_proj.w.at(r, c));
  }
  CHECK(env_mag > 0.0);
  for (int r = arch.bands; r < 2 * arch.bands; ++r) {
    for (int c = 0; c < g1.fusion_proj.w.cols(); ++c)
      CHECK(g1.fusion_proj.w.at(r, c) == 0.0);
    CHECK(g1.fusion_proj.b.at(r, 0) == 0.0);
  }

  // lambda = 0: envelope-head rows get exactly zero gradient
  auto g0 = compute_gradients(p, x, target, 0.0);
  for (int r = 0; r < arch.bands; ++r) {
    for (int c = 0; c < g0.fusion_proj.w.cols(); ++c)
      CHECK(g0.fusion_proj.w.at(r, c) == 0.0);
    CHECK(g0.fusion_proj.b.at(r, 0) == 0.0);
  }
}

TEST_CASE("checkpoint save/load round trips bit-exactly") {
  testutil::TempDir tmp("ckpt");
  const std::string path = tmp.path() + "/model.ckpt";
  ArchConfig arch = tiny_arch();
  auto p = init_params<float>(arch, 99);
  p.norm_mean = -3.25;
  p.norm_std = 1.75;
  p.lp_order = 24;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> uni(-1.0f, 1.0f);
  for (auto& v : p.fusion_proj.w.data()) v = uni(rng);
  save_checkpoint(path, p);

  auto q = load_checkpoint(path);
  CHECK(q.arch.bands == arch.bands);
  CHECK(q.arch.hidden == arch.hidden);
  CHECK(q.norm_mean == p.norm_mean);
  CHECK(q.norm_std == p.norm_std);
  CHECK(q.lp_order == 24);
  auto rp = tensor_refs(p);
  auto rq = tensor_refs(q);
  REQUIRE(rp.size() == rq.size());
  for (size_t i = 0; i < rp.size(); ++i) {
    CHECK(rp[i].name == rq[i].name);
    CHECK(rp[i].mat->data() == rq[i].mat->data());
  }

  // byte-stable on re-save
  const std::string path2 = tmp.path() + "/model2.ckpt";
  save_checkpoint(path2, q);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), {});
  const std::string b2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(b1 == b2);
}

TEST_CASE("training on a tiny corpus is deterministic and learns") {
  testutil::TempDir tmp("train");
  const std::string clean_dir = tmp.path() + "/clean";
  std::filesystem::create_directories(clean_dir);
  for (int i = 0; i < 6; ++i)
    io::write_wav(clean_dir + "/u" + std::to_string(i) + ".wav",
                  testutil::speech_like(static_cast<uint64_t>(i), 1.0));

  std::vector<roomsim::ReverbSpec> specs;
  for (double t60 : {0.3, 0.6}) {
    roomsim::ReverbSpec s;
    s.t60 = t60;
    s.snr_db = 20.0;
    s.seed = 2;
    specs.push_back(s);
  }
  roomsim::build_corpus(clean_dir, specs, tmp.path() + "/corpus");

  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.seed = 321;
  cfg.arch.hidden = 8;

  const std::string manifest = tmp.path() + "/corpus/manifest.tsv";
  const auto r1 = train(cfg, manifest, tmp.path() + "/m1.ckpt", tmp.path() + "/h1.txt");
  const auto r2 = train(cfg, manifest, tmp.path() + "/m2.ckpt", tmp.path() + "/h2.txt");

  REQUIRE(r1.epoch_loss.size() == 3);
  CHECK(r1.epoch_loss == r2.epoch_loss);  // bit-identical histories
  CHECK(r1.epoch_loss.back() < r1.epoch_loss.front());

  std::ifstream h1(tmp.path() + "/h1.txt"), h2(tmp.path() + "/h2.txt");
  const std::string t1((std::istreambuf_iterator<char>(h1)), {});
  const std::string t2((std::istreambuf_iterator<char>(h2)), {});
  CHECK(t1 == t2);
  CHECK(!t1.empty());

  // zero learning rate freezes the loss
  TrainConfig frozen = cfg;
  frozen.learning_rate = 0.0;
  const auto r3 = train(frozen, manifest);
  for (double l : r3.epoch_loss) CHECK(l == doctest::Approx(r3.epoch_loss[0]).epsilon(1e-12));

  CHECK_THROWS_AS(train(cfg, tmp.path() + "/missing.tsv"), std::runtime_error);
}

TEST_CASE("enhance with identity params is a decompose/reconstruct round trip") {
  ArchConfig arch;  // full-size: 64 bands x 250 steps
  auto p = init_params<float>(arch, 3);
  const auto sig = testutil::speech_like(31, 1.3);
  const auto out = enhance(p, sig);
  REQUIRE(out.samples.size() == sig.samples.size());
  CHECK(testutil::snr_db(sig.samples, out.samples) >= 50.0);

  // deterministic for fixed params
  const auto out2 = enhance(p, sig);
  CHECK(out.samples == out2.samples);

  AudioSignal wrong_rate{std::vector<double>(16000, 0.1), 8000};
  CHECK_THROWS_AS(enhance(p, wrong_rate), std::invalid_argument);
}
