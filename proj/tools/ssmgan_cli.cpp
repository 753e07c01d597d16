// Command-line driver for the full pipeline.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "ssmgan/ssmgan.hpp"

namespace fs = std::filesystem;
using namespace ssmgan;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

int parse_class(const std::string& s) {
  const auto l = s.size() == 1 ? class_from_symbol(s[0]) : std::nullopt;
  if (!l) throw CLI::ValidationError("--class", "expected N, V or F");
  return *l;
}

std::string sibling(const std::string& path, const std::string& ext) { return fs::path(path).replace_extension(ext).string(); }

void write_dataset(const std::string& path, const BeatDataset& d, const NormStats* stats) {
  io::write_json(path, dataset_to_json(d, stats));
}

BeatDataset read_dataset(const std::string& path) { return dataset_from_json(io::read_json(path)); }

nn::NetworkConfig network_preset(const std::string& name) {
  if (name == "table2") return nn::NetworkConfig::table2();
  if (name == "compact") return nn::NetworkConfig::compact();
  throw CLI::ValidationError("--network", "expected table2 or compact");
}

std::optional<experiment::Counts> parse_counts(const std::string& s) {
  if (s.empty() || s == "balance") return std::nullopt;
  experiment::Counts c{};
  std::stringstream in(s);
  std::string tok;
  std::size_t i = 0;
  while (std::getline(in, tok, ',')) {
    if (i >= c.size()) throw CLI::ValidationError("--counts", "expected three comma-separated counts (N,V,F) or 'balance'");
    try {
      c[i++] = std::stoul(tok);
    } catch (const std::exception&) {
      throw CLI::ValidationError("--counts", "'" + tok + "' is not a count");
    }
  }
  if (i != c.size()) throw CLI::ValidationError("--counts", "expected three comma-separated counts (N,V,F) or 'balance'");
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Shape-prior conditional WGAN-GP for ECG heartbeats"};
  app.require_subcommand(1);

  // ingest
  std::string header_path, signal_path, ann_path, record_out;
  int channel = 0;
  auto* ingest = app.add_subcommand("ingest", "Read a WFDB header, format-212 signal and CSV annotations");
  ingest->add_option("--header", header_path, "WFDB header (.hea)")->required();
  ingest->add_option("--signal", signal_path, "format-212 signal file (.dat)")->required();
  ingest->add_option("--annotations", ann_path, "CSV annotations: sample_index,symbol")->required();
  ingest->add_option("--channel", channel, "channel to keep")->capture_default_str();
  ingest->add_option("--out", record_out, "record JSON")->required();

  // preprocess
  std::string pre_in, out_train, out_test;
  PreprocessOptions pre;
  auto* preprocess = app.add_subcommand("preprocess", "Filter, segment, split and normalize a record");
  preprocess->add_option("--in", pre_in, "record JSON from ingest")->required();
  preprocess->add_option("--cutoff-hz", pre.cutoff_hz, "low-pass cutoff")->capture_default_str();
  preprocess->add_option("--split-ratio", pre.split_ratio, "training fraction per class")->capture_default_str();
  preprocess->add_option("--seed", pre.seed)->capture_default_str();
  preprocess->add_option("--out-train", out_train)->required();
  preprocess->add_option("--out-test", out_test)->required();

  // fit-shape
  std::string fit_train, out_model;
  BuildOptions build;
  auto* fit = app.add_subcommand("fit-shape", "Cluster, align and fit per-cluster PCA shape models");
  fit->add_option("--train", fit_train)->required();
  fit->add_option("--k", build.K, "clusters per class")->capture_default_str();
  fit->add_option("--variance", build.variance_fraction, "explained variance to keep")->capture_default_str();
  fit->add_option("--seed", build.seed)->capture_default_str();
  fit->add_option("--out-model", out_model)->required();

  // train
  std::string tr_train, tr_model, out_ckpt, log_path, network = "table2";
  gan::TrainConfig tc;
  auto* train = app.add_subcommand("train", "Train the conditional WGAN-GP");
  train->add_option("--train", tr_train)->required();
  train->add_option("--model", tr_model)->required();
  train->add_option("--steps", tc.total_steps, "generator updates")->capture_default_str();
  train->add_option("--batch", tc.batch_size)->capture_default_str();
  train->add_option("--lr", tc.learning_rate)->capture_default_str();
  train->add_option("--lambda", tc.lambda, "gradient penalty weight")->capture_default_str();
  train->add_option("--n-critic", tc.n_critic)->capture_default_str();
  train->add_option("--z-dim", tc.z_dim)->capture_default_str();
  train->add_option("--seed", tc.seed)->capture_default_str();
  train->add_option("--network", network, "table2 or compact")->capture_default_str();
  train->add_option("--checkpoint-every", tc.checkpoint_interval, "steps between checkpoints, 0 = end only")->capture_default_str();
  train->add_option("--out-checkpoint", out_ckpt)->required();
  train->add_option("--log", log_path, "CSV training log");

  // generate
  std::string gen_ckpt, gen_model, gen_class, gen_out;
  std::size_t gen_count = 0;
  std::uint64_t gen_seed = 0;
  auto* generate = app.add_subcommand("generate", "Sample synthetic beats of one class");
  generate->add_option("--checkpoint", gen_ckpt)->required();
  generate->add_option("--model", gen_model)->required();
  generate->add_option("--class", gen_class, "N, V or F")->required();
  generate->add_option("--count", gen_count)->required();
  generate->add_option("--seed", gen_seed)->capture_default_str();
  generate->add_option("--out", gen_out)->required();

  // evaluate
  std::string ev_real, ev_fake, ev_out, pairing = "nearest";
  auto* evaluate = app.add_subcommand("evaluate", "RMSE/MAE/MSE/EMD/DTW between real and synthetic beats");
  evaluate->add_option("--real", ev_real)->required();
  evaluate->add_option("--fake", ev_fake)->required();
  evaluate->add_option("--pairing", pairing, "nearest or mean")->capture_default_str();
  evaluate->add_option("--out-report", ev_out, "CSV report; a .json twin is written alongside")->required();

  // augment-experiment
  std::string ax_train, ax_test, ax_ckpt, ax_model, ax_counts = "balance", ax_out;
  std::uint64_t ax_seed = 0;
  clf::ClassifierConfig ccfg;
  auto* augment = app.add_subcommand("augment-experiment", "Classifier on real vs real + generated beats");
  augment->add_option("--train", ax_train)->required();
  augment->add_option("--test", ax_test)->required();
  augment->add_option("--checkpoint", ax_ckpt)->required();
  augment->add_option("--model", ax_model)->required();
  augment->add_option("--counts", ax_counts, "N,V,F synthetic counts or 'balance'")->capture_default_str();
  augment->add_option("--seed", ax_seed)->capture_default_str();
  augment->add_option("--epochs", ccfg.epochs)->capture_default_str();
  augment->add_option("--out-report", ax_out, "CSV report; a .json twin is written alongside")->required();

  // plot
  std::string pl_beats, pl_model, pl_svg;
  auto* plot_cmd = app.add_subcommand("plot", "SVG overlay of generated beats on cluster bands, with a CSV twin");
  plot_cmd->add_option("--beats", pl_beats, "output of generate")->required();
  plot_cmd->add_option("--model", pl_model)->required();
  plot_cmd->add_option("--out-svg", pl_svg)->required();

  // fixture
  std::string fx_dir, fx_name = "fixture";
  fixture::RecordOptions fx;
  auto* fixture_cmd = app.add_subcommand("fixture", "Write a synthetic record (header, signal, annotations)");
  fixture_cmd->add_option("--out-dir", fx_dir)->required();
  fixture_cmd->add_option("--name", fx.name)->capture_default_str();
  fixture_cmd->add_option("--n", fx.beats_per_class[0], "N beats")->capture_default_str();
  fixture_cmd->add_option("--v", fx.beats_per_class[1], "V beats")->capture_default_str();
  fixture_cmd->add_option("--f", fx.beats_per_class[2], "F beats")->capture_default_str();
  fixture_cmd->add_option("--seed", fx.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*ingest) {
      const auto rec = load_record(header_path, signal_path, ann_path);
      io::write_json(record_out, record_to_json(rec, channel));
      std::cout << rec.header.record_name << ": " << rec.header.samples_per_signal << " samples x " << rec.header.num_signals
                << " channels, " << rec.annotations.size() << " annotations\n";
    } else if (*preprocess) {
      const auto r = preprocess_record(record_from_json(io::read_json(pre_in)), pre);
      write_dataset(out_train, r.train, &r.stats);
      write_dataset(out_test, r.test, &r.stats);
      const auto ct = r.train.class_counts(), cs = r.test.class_counts();
      std::cout << "beats kept " << r.segmentation.kept << ", dropped at boundary " << r.segmentation.dropped_at_boundary
                << ", other symbols " << r.segmentation.skipped_symbols << "\ntrain N/V/F " << ct[0] << '/' << ct[1] << '/' << ct[2]
                << ", test " << cs[0] << '/' << cs[1] << '/' << cs[2] << '\n';
    } else if (*fit) {
      BuildReport rep;
      const auto set = build_shape_models(read_dataset(fit_train), build, &rep);
      io::write_json(out_model, shape_models_to_json(set));
      for (int l = 0; l < kNumClasses; ++l) {
        if (!set.has_class(l)) continue;
        std::cout << class_symbol(l) << ": K=" << set.clusters_in(l) << " ranks";
        for (int k = 0; k < set.clusters_in(l); ++k) std::cout << ' ' << set.model(l, k).rank();
        std::cout << '\n';
      }
      std::cout << "maxB " << set.max_rank() << '\n';
    } else if (*train) {
      tc.network = network_preset(network);
      tc.network.z_dim = tc.z_dim;
      const auto data = read_dataset(tr_train);
      const auto set = shape_models_from_json(io::read_json(tr_model));
      const auto state = gan::train(tc, data, set, [&](gan::TrainState& s, const gan::HistoryEntry& h, bool due) {
        if (due) io::write_json(out_ckpt, gan::checkpoint_to_json(s));
        if (h.step % 100 == 0 || h.step == tc.total_steps) {
          std::cout << "step " << h.step << " critic " << h.critic_loss << " gen " << h.gen_loss << " gp " << h.gp_term << '\n';
        }
      });
      auto final_state = state;
      io::write_json(out_ckpt, gan::checkpoint_to_json(final_state));
      if (!log_path.empty()) io::write_text(log_path, gan::history_csv(final_state.history));
    } else if (*generate) {
      auto state = gan::checkpoint_from_json(io::read_json(gen_ckpt));
      const auto set = shape_models_from_json(io::read_json(gen_model));
      const auto g = gan::generate(state, set, parse_class(gen_class), gen_count, gen_seed);
      io::write_json(gen_out, gan::generated_to_json(g));
    } else if (*evaluate) {
      if (pairing != "nearest" && pairing != "mean") throw CLI::ValidationError("--pairing", "expected nearest or mean");
      const auto report = metrics::evaluate_sets(read_dataset(ev_real), read_dataset(ev_fake),
                                                 pairing == "nearest" ? metrics::Pairing::NearestReal : metrics::Pairing::MeanVsMean);
      io::write_text(ev_out, metrics::report_csv(report));
      io::write_json(sibling(ev_out, ".json"), metrics::report_json(report));
      std::cout << metrics::report_csv(report);
    } else if (*augment) {
      auto state = gan::checkpoint_from_json(io::read_json(ax_ckpt));
      const auto set = shape_models_from_json(io::read_json(ax_model));
      const auto report = experiment::run_experiment(read_dataset(ax_train), read_dataset(ax_test), set, state,
                                                     parse_counts(ax_counts), ax_seed, ccfg);
      io::write_text(ax_out, experiment::report_csv(report));
      io::write_json(sibling(ax_out, ".json"), experiment::report_json(report));
      std::cout << experiment::report_csv(report);
    } else if (*plot_cmd) {
      const auto beats = gan::generated_from_json(io::read_json(pl_beats));
      const auto set = shape_models_from_json(io::read_json(pl_model));
      const auto data = plot::make_plot(set, beats);
      io::write_text(pl_svg, plot::to_svg(data));
      io::write_text(sibling(pl_svg, ".csv"), plot::to_csv(data));
    } else if (*fixture_cmd) {
      fs::create_directories(fx_dir);
      const auto files = fixture::make_record(fx);
      const auto base = (fs::path(fx_dir) / fx.name).string();
      io::write_text(base + ".hea", files.header);
      io::write_text(base + ".dat", std::string(files.signal.begin(), files.signal.end()));
      io::write_text(base + ".csv", files.annotations);
      std::cout << base << ".{hea,dat,csv}\n";
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_numeric(e.code()) ? kExitNumeric : kExitData;
  } catch (const io::json::exception& e) {
    std::cerr << "error: malformed JSON input: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
