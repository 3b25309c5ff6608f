#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "mbbn/cli/cli.hpp"
#include "mbbn/core/rng.hpp"
#include "mbbn/nn/model.hpp"
#include "mbbn/nn/model_io.hpp"
#include "mbbn/train/arch.hpp"
#include "mbbn/train/dataset.hpp"

namespace fs = std::filesystem;
using namespace mbbn;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result mbbn_cmd(std::initializer_list<std::string> args) {
  std::vector<std::string> owned{"mbbn"};
  owned.insert(owned.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : owned) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() {
    Rng rng(static_cast<std::uint64_t>(std::hash<std::string>{}(fs::current_path().string())) ^ 0xC11);
    path = fs::temp_directory_path() / ("mbbn_cli_" + std::to_string(rng.next_u64()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

std::string line_with(const std::string& text, const std::string& key) {
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind(key, 0) == 0) return line.substr(key.size());
  }
  return {};
}

}  // namespace

TEST_CASE("quantize prints the compression ratio") {
  TempDir dir;
  REQUIRE(mbbn_cmd({"train", "--epochs", "0", "--out", dir / "f.bin"}).code == 0);
  const std::string before = slurp(dir / "f.bin");

  auto r = mbbn_cmd({"quantize", "--in", dir / "f.bin", "--out", dir / "q2.bin", "--M", "2", "--K", "2"});
  CHECK(r.code == 0);
  CHECK(line_with(r.out, "compression ratio: ") == "16x");
  r = mbbn_cmd({"quantize", "--in", dir / "f.bin", "--out", dir / "q8.bin", "--M", "8", "--K", "8"});
  CHECK(line_with(r.out, "compression ratio: ") == "4x");
  CHECK(nn::load_model(dir / "q8.bin").stage == nn::Stage::quantized);
  CHECK(slurp(dir / "f.bin") == before);

  CHECK(mbbn_cmd({"quantize", "--in", dir / "missing.bin", "--out", dir / "x.bin"}).code == cli::kIo);
  CHECK(mbbn_cmd({"quantize", "--in", dir / "f.bin", "--out", dir / "f.bin"}).code == cli::kUsage);
  CHECK(mbbn_cmd({"quantize", "--in", dir / "f.bin", "--out", dir / "x.bin", "--M", "2"}).code == cli::kUsage);
  CHECK(mbbn_cmd({"quantize", "--in", dir / "q2.bin", "--out", dir / "x.bin"}).code == cli::kStage);
  CHECK_FALSE(fs::exists(dir / "x.bin"));
}

TEST_CASE("flags are validated before any file is touched") {
  TempDir dir;
  CHECK(mbbn_cmd({"train", "--M", "9", "--out", dir / "t.bin"}).code == cli::kUsage);
  CHECK(mbbn_cmd({"train", "--alg", "sgd", "--out", dir / "t.bin"}).code == cli::kUsage);
  CHECK(mbbn_cmd({"train", "--epochs", "1"}).code == cli::kUsage);
  CHECK_FALSE(fs::exists(dir / "t.bin"));
  CHECK(mbbn_cmd({}).code == cli::kUsage);
  CHECK(mbbn_cmd({"frobnicate"}).code == cli::kUsage);
  CHECK(mbbn_cmd({"--help"}).code == cli::kOk);
  CHECK(mbbn_cmd({"inspect", "--model", dir / "none.bin"}).code == cli::kIo);
}

TEST_CASE("training is reproducible") {
  TempDir dir;
  const auto a = mbbn_cmd({"train", "--dataset", "moons", "--arch", "mlp:2-16-16-2", "--M", "2", "--K", "2", "--seed", "0",
                           "--out", dir / "a.bin", "--log", dir / "a.csv"});
  const auto b = mbbn_cmd({"train", "--dataset", "moons", "--arch", "mlp:2-16-16-2", "--M", "2", "--K", "2", "--seed", "0",
                           "--out", dir / "b.bin", "--log", dir / "b.csv"});
  REQUIRE(a.code == 0);
  CHECK(line_with(a.out, "val accuracy: ") == "0.9950");
  CHECK(line_with(a.out, "epochs: ") == "100");
  CHECK(slurp(dir / "a.bin") == slurp(dir / "b.bin"));
  CHECK(slurp(dir / "a.bin.opt") == slurp(dir / "b.bin.opt"));
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(dir / "a.csv").rfind("epoch,loss,train_acc,val_acc\n1,", 0) == 0);
  CHECK(a.out.substr(0, a.out.find("checkpoint:")) == b.out.substr(0, b.out.find("checkpoint:")));
}

TEST_CASE("resumed training matches an uninterrupted run") {
  TempDir dir;
  REQUIRE(mbbn_cmd({"train", "--epochs", "12", "--out", dir / "full.bin", "--log", dir / "full.csv"}).code == 0);
  REQUIRE(mbbn_cmd({"train", "--epochs", "5", "--out", dir / "part.bin", "--log", dir / "part.csv"}).code == 0);
  const auto r = mbbn_cmd({"train", "--epochs", "12", "--resume", "--out", dir / "part.bin", "--log", dir / "part.csv"});
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "full.bin") == slurp(dir / "part.bin"));
  CHECK(slurp(dir / "full.csv") == slurp(dir / "part.csv"));
  CHECK(mbbn_cmd({"train", "--epochs", "12", "--resume", "--K", "3", "--out", dir / "part.bin"}).code == cli::kUsage);
}

TEST_CASE("zero epochs writes the initial model") {
  TempDir dir;
  double sum = 0.0;
  for (int seed = 0; seed < 10; ++seed) {
    const auto r = mbbn_cmd({"train", "--epochs", "0", "--seed", std::to_string(seed), "--out", dir / "z.bin"});
    REQUIRE(r.code == 0);
    sum += std::stod(line_with(r.out, "val accuracy: "));
  }
  CHECK(sum / 10.0 == doctest::Approx(0.5).epsilon(0.3));

  train::ArchOptions o;
  o.float_first = true;
  nn::ModelState expected = train::build_arch("mlp:2-16-16-2", o);
  Rng rng(9 + 1000);
  nn::initialize(expected, rng);
  expected.algorithm = nn::Algorithm::qnn;
  CHECK(nn::load_model(dir / "z.bin") == expected);
}

TEST_CASE("algorithm dispatch") {
  TempDir dir;
  REQUIRE(mbbn_cmd({"train", "--alg", "mbbn", "--epochs", "3", "--verify-kernel", "--out", dir / "m.bin"}).code == 0);
  REQUIRE(mbbn_cmd({"train", "--alg", "qnn", "--epochs", "3", "--out", dir / "q.bin"}).code == 0);
  const auto m = nn::load_model(dir / "m.bin");
  const auto q = nn::load_model(dir / "q.bin");
  CHECK(m.algorithm == nn::Algorithm::mbbn);
  CHECK(q.algorithm == nn::Algorithm::qnn);
  CHECK(m.layers[2].spec.plane_weights);
  CHECK_FALSE(q.layers[2].spec.plane_weights);
  CHECK(std::get<Tensor>(m.layers[2].weight).rank() == 3);
}

TEST_CASE("stage equivalence through eval") {
  TempDir dir;
  for (const std::string alg : {"qnn", "mbbn"}) {
    REQUIRE(mbbn_cmd({"train", "--alg", alg, "--epochs", "20", "--out", dir / "f.bin"}).code == 0);
    REQUIRE(mbbn_cmd({"quantize", "--in", dir / "f.bin", "--out", dir / "q.bin"}).code == 0);
    REQUIRE(mbbn_cmd({"decompose", "--in", dir / "q.bin", "--out", dir / "d.bin"}).code == 0);
    auto r = mbbn_cmd({"eval", "--model", dir / "q.bin", "--model", dir / "d.bin", "--split", "all"});
    CHECK(r.code == 0);
    CHECK(line_with(r.out, "equivalent: ") == "true");
    CHECK(line_with(r.out, "matching classes: ") == "1000/1000");
    r = mbbn_cmd({"eval", "--model", dir / "f.bin", "--model", dir / "d.bin"});
    CHECK(line_with(r.out, "equivalent: ") == "true");
  }
  REQUIRE(mbbn_cmd({"train", "--arch", "mlp:2-8-2", "--epochs", "0", "--out", dir / "other.bin"}).code == 0);
  CHECK(mbbn_cmd({"eval", "--model", dir / "q.bin", "--model", dir / "other.bin"}).code == cli::kStage);
  CHECK(mbbn_cmd({"decompose", "--in", dir / "f.bin", "--out", dir / "x.bin"}).code == cli::kStage);
  const auto r = mbbn_cmd({"eval", "--model", dir / "d.bin"});
  CHECK(r.code == 0);
  CHECK(r.out.find("(decomposed): accuracy ") != std::string::npos);
}

TEST_CASE("stages that disagree fail the equivalence check") {
  TempDir dir;
  REQUIRE(mbbn_cmd({"train", "--epochs", "5", "--out", dir / "a.bin"}).code == 0);
  REQUIRE(mbbn_cmd({"train", "--epochs", "5", "--seed", "3", "--out", dir / "b.bin"}).code == 0);
  REQUIRE(mbbn_cmd({"quantize", "--in", dir / "b.bin", "--out", dir / "bq.bin"}).code == 0);
  const auto r = mbbn_cmd({"eval", "--model", dir / "a.bin", "--model", dir / "bq.bin"});
  CHECK(r.code == cli::kCheckFailed);
  CHECK(line_with(r.out, "equivalent: ") == "false");
}

TEST_CASE("linear-grid models cannot be decomposed") {
  TempDir dir;
  REQUIRE(mbbn_cmd({"train", "--grid", "linear", "--epochs", "2", "--out", dir / "f.bin"}).code == 0);
  REQUIRE(mbbn_cmd({"quantize", "--in", dir / "f.bin", "--out", dir / "q.bin"}).code == 0);
  CHECK(mbbn_cmd({"decompose", "--in", dir / "q.bin", "--out", dir / "d.bin"}).code == cli::kStage);
}

TEST_CASE("inspect echoes mixed per-layer precision") {
  TempDir dir;
  REQUIRE(mbbn_cmd({"train", "--first-layer", "quantized", "--epochs", "0", "--out", dir / "f.bin"}).code == 0);
  REQUIRE(mbbn_cmd({"quantize", "--in", dir / "f.bin", "--out", dir / "q.bin", "--layer-bits", "8x8,2x2,4x3"}).code == 0);
  CHECK(mbbn_cmd({"quantize", "--in", dir / "f.bin", "--out", dir / "x.bin", "--layer-bits", "2x2"}).code == cli::kUsage);
  const auto r = mbbn_cmd({"inspect", "--model", dir / "q.bin"});
  REQUIRE(r.code == 0);
  CHECK(line_with(r.out, "stage: ") == "quantized");
  CHECK(r.out.find("in=2 out=16 M=8 K=8") != std::string::npos);
  CHECK(r.out.find("in=16 out=16 M=2 K=2") != std::string::npos);
  CHECK(r.out.find("in=16 out=2 M=4 K=3") != std::string::npos);
  // 32 * 320 / (8*32 + 2*256 + 3*32)
  CHECK(line_with(r.out, "compression ratio: ") == "11.9x");
}

TEST_CASE("speedup table") {
  auto r = mbbn_cmd({"speedup-table"});
  REQUIRE(r.code == 0);
  std::istringstream is(r.out);
  std::string header, row1, row2;
  std::getline(is, header);
  std::getline(is, row1);
  std::getline(is, row2);
  std::istringstream cells(row2);
  int m = 0;
  double k1 = 0.0, k2 = 0.0;
  cells >> m >> k1 >> k2;
  CHECK(m == 2);
  CHECK(k2 == doctest::Approx(15.13).epsilon(0.01 / 15.13));
  r = mbbn_cmd({"speedup-table", "--L", "48"});
  CHECK(r.code == cli::kUsage);
  r = mbbn_cmd({"speedup-table", "--gamma", "2", "--beta", "1", "--N", "64"});
  CHECK(r.code == 0);
  CHECK(r.out.find("\n1     32.00") != std::string::npos);
}

TEST_CASE("bench writes CSV and plot data") {
  TempDir dir;
  const auto r = mbbn_cmd({"bench", "--sizes", "1x256x1", "--precisions", "1x1,2x2", "--repeats", "2", "--warmups", "1",
                           "--out", dir / "b.csv", "--plot", dir / "b.dat"});
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "b.csv").rfind("kernel,M,K,P,N,Q,median_ns,speedup_vs_scalar\nscalar_float,0,0,1,256,1,", 0) == 0);
  CHECK(slurp(dir / "b.dat").find("M2K2") != std::string::npos);
  CHECK(mbbn_cmd({"bench", "--sizes", "1x2"}).code == cli::kUsage);
}

TEST_CASE("config files mirror the flags") {
  TempDir dir;
  std::ofstream(dir / "run.cfg") << "# toy run\nM=3\nK = 3\nalg=mbbn\nepochs=2\nout=" << dir / "c.bin" << "\n";
  auto r = mbbn_cmd({"train", "--config", dir / "run.cfg", "--K", "2"});
  REQUIRE(r.code == 0);
  const auto m = nn::load_model(dir / "c.bin");
  CHECK(m.algorithm == nn::Algorithm::mbbn);
  CHECK(m.layers[2].spec.act_bits == 3);
  CHECK(m.layers[2].spec.weight_bits == 2);
  CHECK(line_with(r.out, "epochs: ") == "2");

  std::ofstream(dir / "bad.cfg") << "bogus=1\n";
  CHECK(mbbn_cmd({"train", "--config", dir / "bad.cfg", "--out", dir / "x.bin"}).code == cli::kUsage);
  CHECK(mbbn_cmd({"train", "--config", dir / "none.cfg", "--out", dir / "x.bin"}).code == cli::kIo);
  CHECK_FALSE(fs::exists(dir / "x.bin"));
}

TEST_CASE("image-grid datasets") {
  TempDir dir;
  train::Dataset data;
  Rng rng(4);
  data.x = Tensor({40, 1, 4, 4});
  data.classes = 2;
  for (std::size_t i = 0; i < 40; ++i) {
    const int label = static_cast<int>(i % 2);
    data.y.push_back(label);
    for (std::size_t p = 0; p < 16; ++p) {
      const bool left = p % 4 < 2;
      const double v = (left == (label == 0) ? 0.8 : -0.8) + rng.uniform(-0.2, 0.2);
      data.x.values()[i * 16 + p] = std::round((v + 1.0) * 127.5) / 127.5 - 1.0;
    }
  }
  train::save_image_grid(dir / "g.grid", data);
  const auto r = mbbn_cmd({"train", "--dataset", dir / "g.grid", "--arch", "cnn:1x4x4:c4k3s1p1:2", "--epochs", "20",
                           "--out", dir / "c.bin"});
  REQUIRE(r.code == 0);
  CHECK(std::stod(line_with(r.out, "val accuracy: ")) >= 0.75);
  CHECK(mbbn_cmd({"train", "--dataset", dir / "missing.grid", "--out", dir / "x.bin"}).code == cli::kIo);
}
