#include "mbbn/cli/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mbbn/bench/gemm_bench.hpp"
#include "mbbn/bench/speedup.hpp"
#include "mbbn/core/error.hpp"
#include "mbbn/core/rng.hpp"
#include "mbbn/nn/layers.hpp"
#include "mbbn/nn/model.hpp"
#include "mbbn/nn/model_io.hpp"
#include "mbbn/train/arch.hpp"
#include "mbbn/train/dataset.hpp"
#include "mbbn/train/optimizer.hpp"
#include "mbbn/train/trainer.hpp"

namespace mbbn::cli {
namespace {

namespace fs = std::filesystem;

const std::vector<std::string> kAlgorithms{"float", "qnn", "mbbn"};
const std::vector<std::string> kGrids{"odd", "linear"};
const std::vector<std::string> kOptimizers{"auto", "sgd", "adam"};

struct DataFlags {
  std::string dataset = "moons";
  std::size_t samples = 1000;
  double val = 0.2;
  std::uint64_t seed = 0;
};

struct QuantizeFlags {
  std::string in, out;
  int act_bits = 0, weight_bits = 0;
  std::string layer_bits;
  std::string grid;
};

struct DecomposeFlags {
  std::string in, out;
};

struct TrainFlags {
  DataFlags data;
  std::string arch = "mlp:2-16-16-2";
  int act_bits = 2, weight_bits = 2, input_bits = 0;
  std::string alg = "qnn";
  std::string grid = "odd";
  std::string first_layer = "float";
  std::string last_layer = "quantized";
  std::size_t epochs = 100;
  std::size_t batch = 32;
  double lr = 0.0;
  std::string optimizer = "auto";
  std::optional<double> target;
  bool verify_kernel = false;
  bool resume = false;
  bool verbose = false;
  std::string init;
  std::string out;
  std::string log;
};

struct EvalFlags {
  DataFlags data;
  std::vector<std::string> models;
  std::string split = "val";
  std::size_t threads = 1;
};

struct BenchFlags {
  std::string sizes = "1x8192x1";
  std::string precisions = "1x1,2x2,3x3";
  std::size_t repeats = 11, warmups = 3, threads = 1;
  std::uint64_t seed = 0;
  bool no_eigen = false;
  std::string out, plot;
};

struct InspectFlags {
  std::string model;
};

struct TableFlags {
  double gamma = 1.91;
  std::optional<double> beta;
  std::size_t register_bits = 64;
  std::size_t n = 8192;
  std::string out;
};

struct Flags {
  QuantizeFlags quantize;
  DecomposeFlags decompose;
  TrainFlags train;
  EvalFlags eval;
  BenchFlags bench;
  InspectFlags inspect;
  TableFlags table;
};

void add_data_flags(CLI::App* cmd, DataFlags& d) {
  cmd->add_option("--dataset", d.dataset, "moons, spirals, blobs, or an image-grid file")->capture_default_str();
  cmd->add_option("--samples", d.samples, "samples drawn from a built-in generator")
      ->check(CLI::Range(std::size_t{4}, std::size_t{10000000}))
      ->capture_default_str();
  cmd->add_option("--val", d.val, "held-out fraction")->check(CLI::Range(0.0, 0.9))->capture_default_str();
  cmd->add_option("--seed", d.seed)->capture_default_str();
}

void add_config(CLI::App* cmd) {
  // Read before parsing; see expand_config.
  cmd->add_option("--config", "key=value file mirroring the flags; the command line wins");
}

void build(CLI::App& app, Flags& f) {
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  const auto bits = CLI::Range(1, 8);

  auto* q = app.add_subcommand("quantize", "quantize a float-stage model");
  q->add_option("--in", f.quantize.in, "float-stage model")->required();
  q->add_option("--out", f.quantize.out, "quantized-stage model")->required();
  q->add_option("--M", f.quantize.act_bits, "activation bits for every quantized layer")->check(bits);
  q->add_option("--K", f.quantize.weight_bits, "weight bits for every quantized layer")->check(bits);
  q->add_option("--layer-bits", f.quantize.layer_bits, "per-layer MxK list, one entry per quantized layer");
  q->add_option("--grid", f.quantize.grid)->check(CLI::IsMember(kGrids));
  add_config(q);

  auto* d = app.add_subcommand("decompose", "split a quantized model into bit planes");
  d->add_option("--in", f.decompose.in, "quantized-stage model")->required();
  d->add_option("--out", f.decompose.out, "decomposed-stage model")->required();
  add_config(d);

  auto& t = f.train;
  auto* tr = app.add_subcommand("train", "train a toy network");
  add_data_flags(tr, t.data);
  tr->add_option("--arch", t.arch)->capture_default_str();
  tr->add_option("--M", t.act_bits)->check(bits)->capture_default_str();
  tr->add_option("--K", t.weight_bits)->check(bits)->capture_default_str();
  tr->add_option("--input-bits", t.input_bits, "bits of the data fed to a quantized first layer (0: M)")
      ->check(CLI::Range(0, 8));
  tr->add_option("--alg", t.alg)->check(CLI::IsMember(kAlgorithms))->capture_default_str();
  tr->add_option("--grid", t.grid)->check(CLI::IsMember(kGrids))->capture_default_str();
  tr->add_option("--first-layer", t.first_layer)->check(CLI::IsMember({"float", "quantized"}))->capture_default_str();
  tr->add_option("--last-layer", t.last_layer)->check(CLI::IsMember({"float", "quantized"}))->capture_default_str();
  tr->add_option("--epochs", t.epochs)->capture_default_str();
  tr->add_option("--batch", t.batch)->check(CLI::PositiveNumber)->capture_default_str();
  tr->add_option("--lr", t.lr, "0 picks the optimizer default")->check(CLI::NonNegativeNumber);
  tr->add_option("--optimizer", t.optimizer)->check(CLI::IsMember(kOptimizers))->capture_default_str();
  tr->add_option("--target", t.target, "stop once validation accuracy reaches this")->check(CLI::Range(0.0, 1.0));
  tr->add_flag("--verify-kernel", t.verify_kernel, "cross-check the branch sum against the packed kernel");
  tr->add_flag("--resume", t.resume, "continue from the checkpoint at --out");
  tr->add_flag("--verbose", t.verbose, "print every epoch");
  tr->add_option("--init", t.init, "float model of the same topology whose weights seed this run");
  tr->add_option("--out", t.out, "checkpoint, rewritten every epoch")->required();
  tr->add_option("--log", t.log, "per-epoch CSV");
  add_config(tr);

  auto* ev = app.add_subcommand("eval", "accuracy of one model, or equivalence of two stages of one model");
  add_data_flags(ev, f.eval.data);
  ev->add_option("--model", f.eval.models)->required()->expected(1, 2)->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  ev->add_option("--split", f.eval.split)->check(CLI::IsMember({"train", "val", "all"}))->capture_default_str();
  ev->add_option("--threads", f.eval.threads)->check(CLI::PositiveNumber);
  add_config(ev);

  auto& b = f.bench;
  auto* be = app.add_subcommand("bench", "time the packed GEMM against a scalar float loop");
  be->add_option("--sizes", b.sizes, "PxNxQ list")->capture_default_str();
  be->add_option("--precisions", b.precisions, "MxK list")->capture_default_str();
  be->add_option("--repeats", b.repeats)->capture_default_str();
  be->add_option("--warmups", b.warmups)->capture_default_str();
  be->add_option("--threads", b.threads)->check(CLI::PositiveNumber);
  be->add_option("--seed", b.seed);
  be->add_flag("--no-eigen", b.no_eigen, "skip the Eigen float row");
  be->add_option("--out", b.out, "CSV file");
  be->add_option("--plot", b.plot, "gnuplot data file");
  add_config(be);

  auto* in = app.add_subcommand("inspect", "print layer specs and compression");
  in->add_option("--model", f.inspect.model)->required();
  add_config(in);

  auto* st = app.add_subcommand("speedup-table", "analytic speedup over M, K in 1..8");
  st->add_option("--gamma", f.table.gamma)->check(CLI::PositiveNumber)->capture_default_str();
  st->add_option("--beta", f.table.beta, "default gamma / 2")->check(CLI::NonNegativeNumber);
  st->add_option("--L", f.table.register_bits, "register width")->capture_default_str();
  st->add_option("--N", f.table.n, "reduction length")->capture_default_str();
  st->add_option("--out", f.table.out);
  add_config(st);
}

/// Splices key=value lines of a --config file in front of the command-line
/// flags, so explicit flags override them.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::optional<std::string> path;
  std::size_t at = 0;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      at = i;
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      at = i;
    }
  }
  if (!path) return args;
  if (!fs::exists(*path)) throw IoError("cannot open config file: " + *path);
  std::vector<std::string> flags;
  for (const auto& item : CLI::ConfigBase{}.from_file(*path)) {
    if (item.name == "++" || item.name == "--") continue;
    if (!item.parents.empty()) throw ConfigError("config sections are not supported: " + item.fullname());
    std::string value;
    for (std::size_t i = 0; i < item.inputs.size(); ++i) value += (i ? "," : "") + item.inputs[i];
    flags.push_back("--" + item.name + "=" + value);
  }
  // Keep the verb first.
  std::vector<std::string> out(args.begin(), args.begin() + 2);
  out.insert(out.end(), flags.begin(), flags.end());
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (i == at || (i == at + 1 && args[at] == "--config")) continue;
    out.push_back(args[i]);
  }
  return out;
}

void check_distinct(const std::string& in, const std::string& out) {
  std::error_code ec;
  if (fs::weakly_canonical(in, ec) == fs::weakly_canonical(out, ec)) {
    throw ConfigError("refusing to overwrite the input file " + in);
  }
}

train::Dataset load_dataset(const std::string& name, std::size_t samples, Rng& rng) {
  if (name == "moons" || name == "spirals" || name == "blobs") return train::make_dataset(name, samples, rng);
  return train::load_image_grid(name);
}

train::Split load_split(const DataFlags& d) {
  Rng rng(d.seed);
  const train::Dataset data = load_dataset(d.dataset, d.samples, rng);
  return train::split(data, d.val, rng);
}

train::TrainAlgorithm train_algorithm(nn::Algorithm a) {
  switch (a) {
    case nn::Algorithm::none:
      return train::TrainAlgorithm::full;
    case nn::Algorithm::qnn:
      return train::TrainAlgorithm::qnn;
    case nn::Algorithm::mbbn:
      return train::TrainAlgorithm::mbbn;
  }
  return train::TrainAlgorithm::full;
}

/// Float-stage models run the forward pass they were trained with.
Tensor logits(const nn::ModelState& model, const Tensor& x, std::size_t threads) {
  if (model.stage == nn::Stage::full) return train::training_forward(model, train_algorithm(model.algorithm), x);
  return nn::model_forward(model, x, threads);
}

double hit_rate(const std::vector<int>& predicted, const std::vector<int>& labels) {
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream os(path, mode);
  if (!os) throw IoError("cannot write " + path);
  return os;
}

void print_ratio(std::ostream& out, const nn::ModelState& model) {
  const double ratio = nn::compression_ratio(model);
  out << "compression ratio: " << (ratio > 0.0 ? nn::format_ratio(ratio) : "none") << "\n";
}

int cmd_quantize(const QuantizeFlags& f, std::ostream& out) {
  if ((f.act_bits == 0) != (f.weight_bits == 0)) throw ConfigError("--M and --K go together");
  if (f.act_bits != 0 && !f.layer_bits.empty()) throw ConfigError("--layer-bits replaces --M/--K");
  const auto per_layer = f.layer_bits.empty() ? std::vector<std::pair<int, int>>{} : bench::parse_precisions(f.layer_bits);
  check_distinct(f.in, f.out);

  nn::ModelState model = nn::load_model(f.in);
  if (model.stage != nn::Stage::full) throw StageError(f.in + " is not a float-stage model");
  if (f.act_bits != 0) model = train::with_precision(model, f.act_bits, f.weight_bits);
  if (!per_layer.empty()) {
    std::size_t q = 0;
    for (const auto& layer : model.layers) q += layer.spec.is_quantized();
    if (q != per_layer.size()) {
      throw ConfigError("--layer-bits has " + std::to_string(per_layer.size()) + " entries for " + std::to_string(q) +
                        " quantized layers");
    }
    if (std::any_of(model.layers.begin(), model.layers.end(), [](const auto& l) { return l.spec.plane_weights; })) {
      throw ConfigError("--layer-bits does not apply to plane-weight models");
    }
    std::size_t i = 0;
    for (auto& layer : model.layers) {
      if (!layer.spec.is_quantized()) continue;
      layer.spec.act_bits = per_layer[i].first;
      layer.spec.weight_bits = per_layer[i].second;
      ++i;
    }
  }
  if (!f.grid.empty()) {
    for (auto& layer : model.layers) {
      if (layer.spec.is_quantized()) layer.spec.grid = parse_grid(f.grid);
    }
  }
  const nn::ModelState quantized = nn::quantize_model(model);
  nn::save_model(f.out, quantized);
  out << "wrote " << f.out << "\n";
  print_ratio(out, quantized);
  return kOk;
}

int cmd_decompose(const DecomposeFlags& f, std::ostream& out) {
  check_distinct(f.in, f.out);
  const nn::ModelState model = nn::load_model(f.in);
  if (model.stage != nn::Stage::quantized) throw StageError(f.in + " is not a quantized-stage model");
  const nn::ModelState decomposed = nn::decompose_model(model);
  nn::save_model(f.out, decomposed);
  out << "wrote " << f.out << "\n";
  print_ratio(out, decomposed);
  return kOk;
}

int cmd_train(const TrainFlags& f, std::ostream& out) {
  if (!f.init.empty() && f.resume) throw ConfigError("--init and --resume exclude each other");
  if (!f.init.empty()) check_distinct(f.init, f.out);

  train::TrainConfig cfg;
  cfg.algorithm = train::parse_train_algorithm(f.alg);
  cfg.optimizer = train::parse_optimizer(f.optimizer);
  cfg.learning_rate = f.lr;
  cfg.epochs = f.epochs;
  cfg.batch_size = f.batch;
  cfg.seed = f.data.seed;
  cfg.target_accuracy = f.target;
  cfg.verify_kernel = f.verify_kernel;

  train::ArchOptions arch;
  arch.act_bits = f.act_bits;
  arch.weight_bits = f.weight_bits;
  arch.input_bits = f.input_bits;
  arch.algorithm = cfg.algorithm;
  arch.grid = parse_grid(f.grid);
  arch.float_first = f.first_layer == "float";
  arch.float_last = f.last_layer == "float";
  nn::ModelState model = train::build_arch(f.arch, arch);

  const train::Split data = load_split(f.data);
  const std::size_t steps_per_epoch = (data.train.size() + f.batch - 1) / f.batch;
  const std::string sidecar = f.out + ".opt";

  train::GradState gs;
  std::size_t first_epoch = 1;
  if (f.resume) {
    nn::ModelState saved = nn::load_model(f.out);
    if (saved.stage != nn::Stage::full) throw StageError(f.out + " is not a float-stage checkpoint");
    for (std::size_t i = 0; i < saved.layers.size() && i < model.layers.size(); ++i) {
      if (!(saved.layers[i].spec == model.layers[i].spec)) throw ConfigError("checkpoint does not match --arch and precision flags");
    }
    if (saved.layers.size() != model.layers.size()) throw ConfigError("checkpoint does not match --arch");
    model = std::move(saved);
    gs = train::load_optimizer(sidecar);
    if (gs.layers.size() != model.layers.size() || steps_per_epoch == 0 || gs.step % steps_per_epoch != 0) {
      throw ConfigError("optimizer state does not match the checkpoint");
    }
    first_epoch = static_cast<std::size_t>(gs.step / steps_per_epoch) + 1;
  } else {
    Rng init_rng(f.data.seed + 1000);
    nn::initialize(model, init_rng);
    if (!f.init.empty()) {
      model = train::progressive_init(nn::load_model(f.init), model);
    }
    gs = train::make_grad_state(model);
    nn::save_model(f.out, model);
    train::save_optimizer(sidecar, gs);
  }
  model.algorithm = train::model_algorithm(cfg.algorithm);

  std::ofstream log;
  if (!f.log.empty()) {
    log = open_out(f.log, f.resume ? std::ios::app : std::ios::out);
    if (!f.resume) log << "epoch,loss,train_acc,val_acc\n";
  }
  const auto on_epoch = [&](const nn::ModelState& m, const train::GradState& g, const train::EpochLog& e) {
    nn::save_model(f.out, m);
    train::save_optimizer(sidecar, g);
    if (log.is_open()) {
      log << e.epoch << "," << fixed(e.loss, 6) << "," << fixed(e.train_acc) << "," << fixed(e.val_acc) << "\n";
      log.flush();
    }
    if (f.verbose) {
      out << "epoch " << e.epoch << " loss " << fixed(e.loss, 6) << " train " << fixed(e.train_acc) << " val "
          << fixed(e.val_acc) << "\n";
    }
  };
  const train::TrainResult result = train::fit(model, data.train, data.val, cfg, gs, first_epoch, on_epoch);

  const std::size_t last = result.log.empty() ? first_epoch - 1 : result.log.back().epoch;
  out << "algorithm: " << train::to_string(cfg.algorithm) << "\n";
  out << "optimizer: " << train::to_string(train::resolve_optimizer(cfg, model)) << "\n";
  out << "epochs: " << last << "\n";
  if (!result.log.empty()) out << "loss: " << fixed(result.log.back().loss, 6) << "\n";
  out << "train accuracy: " << fixed(train::accuracy(model, cfg.algorithm, data.train)) << "\n";
  out << "val accuracy: " << fixed(train::accuracy(model, cfg.algorithm, data.val)) << "\n";
  if (f.target) out << "target reached: " << (result.epoch_reached ? std::to_string(*result.epoch_reached) : "no") << "\n";
  out << "checkpoint: " << f.out << "\n";
  return kOk;
}

bool same_network(const nn::ModelState& a, const nn::ModelState& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (!(a.layers[i].spec == b.layers[i].spec)) return false;
  }
  return true;
}

int cmd_eval(const EvalFlags& f, std::ostream& out) {
  const train::Split split = load_split(f.data);
  train::Dataset data;
  if (f.split == "train") {
    data = split.train;
  } else if (f.split == "val") {
    data = split.val;
  } else {
    Rng rng(f.data.seed);
    data = load_dataset(f.data.dataset, f.data.samples, rng);
  }

  std::vector<nn::ModelState> models;
  for (const auto& path : f.models) models.push_back(nn::load_model(path));
  if (models.size() == 2 && !same_network(models[0], models[1])) {
    throw StageError("the two models are not stages of one network");
  }

  std::vector<Tensor> outputs;
  for (std::size_t i = 0; i < models.size(); ++i) {
    outputs.push_back(logits(models[i], data.x, f.threads));
    const double acc = hit_rate(nn::argmax_rows(outputs.back()), data.y);
    out << f.models[i] << " (" << nn::to_string(models[i].stage) << "): accuracy " << fixed(acc) << " on "
        << data.size() << " samples\n";
  }
  if (models.size() < 2) return kOk;

  double max_diff = 0.0;
  const auto a = outputs[0].values(), b = outputs[1].values();
  for (std::size_t i = 0; i < a.size(); ++i) max_diff = std::max(max_diff, std::abs(a[i] - b[i]));
  const auto ca = nn::argmax_rows(outputs[0]), cb = nn::argmax_rows(outputs[1]);
  std::size_t same = 0;
  for (std::size_t i = 0; i < ca.size(); ++i) same += ca[i] == cb[i];
  const bool equivalent = max_diff <= 1e-6 && same == ca.size();
  char diff[32];
  std::snprintf(diff, sizeof diff, "%.3g", max_diff);
  out << "max logit difference: " << diff << "\n";
  out << "matching classes: " << same << "/" << ca.size() << "\n";
  out << "equivalent: " << (equivalent ? "true" : "false") << "\n";
  return equivalent ? kOk : kCheckFailed;
}

int cmd_bench(const BenchFlags& f, std::ostream& out) {
  bench::BenchConfig cfg;
  cfg.sizes = bench::parse_sizes(f.sizes);
  cfg.precisions = bench::parse_precisions(f.precisions);
  cfg.repeats = f.repeats;
  cfg.warmups = f.warmups;
  cfg.threads = f.threads;
  cfg.seed = f.seed;
  cfg.eigen_baseline = !f.no_eigen;
  const auto rows = bench::bench_gemm(cfg);
  bench::write_csv(out, rows);
  if (!f.out.empty()) {
    auto os = open_out(f.out);
    bench::write_csv(os, rows);
  }
  if (!f.plot.empty()) {
    auto os = open_out(f.plot);
    bench::write_gnuplot(os, rows);
  }
  return kOk;
}

int cmd_inspect(const InspectFlags& f, std::ostream& out) {
  const nn::ModelState model = nn::load_model(f.model);
  out << "stage: " << nn::to_string(model.stage) << "\n";
  out << "algorithm: " << nn::to_string(model.algorithm) << "\n";
  out << "layers: " << model.layers.size() << "\n";
  out << nn::describe_layers(model);
  out << "weight bytes: " << nn::weight_payload_bytes(model) << "\n";
  print_ratio(out, model);
  return kOk;
}

int cmd_speedup_table(const TableFlags& f, std::ostream& out) {
  bench::SpeedModelParams p;
  p.gamma = f.gamma;
  p.beta = f.beta.value_or(f.gamma / 2.0);
  p.register_bits = f.register_bits;
  p.n = f.n;
  bench::validate(p);
  const std::string table = bench::speedup_table(p);
  out << table;
  if (!f.out.empty()) open_out(f.out) << table;
  return kOk;
}

int dispatch(const CLI::App& app, const Flags& f, std::ostream& out) {
  const auto* cmd = app.get_subcommands().front();
  const std::string verb = cmd->get_name();
  if (verb == "quantize") return cmd_quantize(f.quantize, out);
  if (verb == "decompose") return cmd_decompose(f.decompose, out);
  if (verb == "train") return cmd_train(f.train, out);
  if (verb == "eval") return cmd_eval(f.eval, out);
  if (verb == "bench") return cmd_bench(f.bench, out);
  if (verb == "inspect") return cmd_inspect(f.inspect, out);
  return cmd_speedup_table(f.table, out);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Flags flags;
  CLI::App app{"Multi-bit binary decomposition of quantized networks", "mbbn"};
  build(app, flags);
  try {
    std::vector<std::string> args(argv, argv + argc);
    args = expand_config(args);
    // CLI11 takes arguments in reverse order.
    std::vector<std::string> rest(args.rbegin(), args.rend() - 1);
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    return dispatch(app, flags, out);
  } catch (const CheckError& e) {
    err << "check failed: " << e.what() << "\n";
    return kCheckFailed;
  } catch (const DivergenceError& e) {
    err << "diverged: " << e.what() << "\n";
    return kDiverged;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const StageError& e) {
    err << "error: " << e.what() << "\n";
    return kStage;
  } catch (const DecompositionError& e) {
    err << "error: " << e.what() << "\n";
    return kStage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace mbbn::cli
