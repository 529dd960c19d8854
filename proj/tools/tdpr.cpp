// tdpr: degrade, repair, score and audition bandwidth-limited audio.

#include <csignal>
#include <iostream>
#include <memory>
#include <random>

#include <CLI11.hpp>

#include "tdpr/cli.hpp"
#include "tdpr/listening_server.hpp"

namespace {

using namespace tdpr;
using namespace tdpr::cli;

listening::ListeningServer* g_server = nullptr;

void on_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

void add_stft_flags(CLI::App* cmd, StftParams& p) {
  cmd->add_option("--fft", p.fft_size, "FFT size")->check(CLI::PositiveNumber);
  cmd->add_option("--hop", p.hop, "hop size")->check(CLI::PositiveNumber);
  cmd->add_option("--win", p.win_length, "window length")->check(CLI::PositiveNumber);
}

std::vector<FilterFamily> parse_families(const std::vector<std::string>& names) {
  std::vector<FilterFamily> out;
  for (const auto& n : names) {
    if (n == "all") return {kAllFilterFamilies.begin(), kAllFilterFamilies.end()};
    out.push_back(parse_filter_family(n));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bandwidth-limited audio toolkit: degradation, phase repair, metrics and listening tests"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "tdpr 0.1.0");

  // degrade
  DegradeOptions deg;
  std::vector<std::string> deg_families{"all"};
  std::string deg_format = "int16";
  auto* c_deg = app.add_subcommand("degrade", "low-pass inputs with seeded random filters");
  c_deg->add_option("inputs", deg.inputs, "WAV files, directories or globs")->required();
  c_deg->add_option("-o,--out", deg.out_dir, std::string("output directory (default $") + kOutputRootEnv + " or ./out)");
  c_deg->add_option("--seed", deg.config.seed, "sampler seed");
  c_deg->add_option("--bw-lo", deg.config.bandwidth_lo_hz, "lowest cutoff in Hz")->capture_default_str();
  c_deg->add_option("--bw-hi", deg.config.bandwidth_hi_hz, "highest cutoff in Hz")->capture_default_str();
  c_deg->add_option("--families", deg_families, "filter families (comma separated, or 'all')")->delimiter(',');
  c_deg->add_option("--order-lo", deg.config.order_lo, "lowest IIR order")->capture_default_str();
  c_deg->add_option("--order-hi", deg.config.order_hi, "highest IIR order")->capture_default_str();
  c_deg->add_option("--workers", deg.workers, "parallel workers")->check(CLI::PositiveNumber);
  c_deg->add_option("--wav-format", deg_format, "int16 or float32")->capture_default_str();

  // repair
  RepairOptions rep;
  std::string rep_format = "float32";
  auto* c_rep = app.add_subcommand("repair", "replace the phase of magnitude donors");
  c_rep->add_option("inputs", rep.inputs, "magnitude donor WAV files, directories or globs")->required();
  c_rep->add_option("-o,--out", rep.out_dir, "output directory");
  c_rep->add_option("--phase-from", rep.phase_from, "PATH | gt:PATH | gt:self | griffinlim[:N] (PATH may be a directory)")
      ->capture_default_str();
  c_rep->add_option("--iters", rep.iterations, "Griffin-Lim iterations")->capture_default_str();
  add_stft_flags(c_rep, rep.stft);
  c_rep->add_option("--workers", rep.workers, "parallel workers")->check(CLI::PositiveNumber);
  c_rep->add_option("--wav-format", rep_format, "int16 or float32")->capture_default_str();

  // metrics
  MetricsOptions met;
  std::string met_format = "csv";
  std::string met_out;
  auto* c_met = app.add_subcommand("metrics", "LSD and training losses of estimates against references");
  c_met->add_option("--ref", met.ref, "reference file or directory (matched by file name)")->required();
  c_met->add_option("--est", met.est, "estimate files, directories or globs")->required();
  c_met->add_option("--format", met_format, "csv or json")->capture_default_str();
  c_met->add_option("--lambda", met.loss.lambda, "wave-loss weight")->capture_default_str();
  add_stft_flags(c_met, met.lsd_stft);
  c_met->add_flag("--table", met.table, "mean LSD pivoted by family and cutoff");
  c_met->add_option("--workers", met.workers, "parallel workers")->check(CLI::PositiveNumber);
  c_met->add_option("--report", met_out, "write the report here instead of stdout");

  // spectro
  SpectroOptions spec;
  std::size_t spec_bin = 0;
  std::string spec_out;
  auto* c_spec = app.add_subcommand("spectro", "dump a magnitude spectrogram or one bin's phase track as CSV");
  c_spec->add_option("input", spec.input, "WAV file")->required();
  c_spec->add_option("--kind", spec.kind, "mag or phase")->capture_default_str();
  auto* bin_opt = c_spec->add_option("--bin", spec_bin, "single frequency bin");
  add_stft_flags(c_spec, spec.stft);
  c_spec->add_option("--report", spec_out, "write CSV here instead of stdout");

  // slice
  SliceOptions sl;
  std::string sl_format = "int16";
  double sl_norm = 0.0;
  auto* c_sl = app.add_subcommand("slice", "cut fixed-length evaluation clips");
  c_sl->add_option("inputs", sl.inputs, "WAV files, directories or globs")->required();
  c_sl->add_option("-o,--out", sl.out_dir, "output directory");
  c_sl->add_option("--duration", sl.duration_s, "clip length in seconds")->capture_default_str();
  c_sl->add_option("--offsets", sl.offsets_s, "start offsets in seconds")->delimiter(',');
  auto* norm_opt = c_sl->add_option("--normalize", sl_norm, "peak-normalize each clip to this dBFS");
  c_sl->add_option("--wav-format", sl_format, "int16 or float32")->capture_default_str();

  // serve
  std::vector<std::string> sessions;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string results;
  std::string ui_dir;
  std::uint64_t key = 0;
  auto* c_srv = app.add_subcommand("serve", "HTTP backend for the listening-test UI");
  c_srv->add_option("--session", sessions, "session manifest JSON (repeatable)")->required();
  c_srv->add_option("--host", host)->capture_default_str();
  c_srv->add_option("--port", port)->capture_default_str();
  c_srv->add_option("--results", results, "JSON-lines results file (default <output root>/results.jsonl)");
  c_srv->add_option("--ui", ui_dir, "directory holding the built UI");
  auto* key_opt = c_srv->add_option("--key", key, "blinding key (default: random per run)");

  // aggregate
  std::string agg_in;
  auto* c_agg = app.add_subcommand("aggregate", "summarize a listening-test results file");
  c_agg->add_option("results", agg_in, "JSON-lines results file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_deg) {
      deg.config.families = parse_families(deg_families);
      deg.format = parse_sample_format(deg_format);
      return cmd_degrade(deg, std::cout, std::cerr);
    }
    if (*c_rep) {
      rep.format = parse_sample_format(rep_format);
      return cmd_repair(rep, std::cout, std::cerr);
    }
    if (*c_met) {
      met.format = parse_report_format(met_format);
      if (met_out.empty()) return cmd_metrics(met, std::cout, std::cerr);
      std::ofstream f(met_out, std::ios::binary | std::ios::trunc);
      if (!f) throw Error("cannot write '" + met_out + "'");
      return cmd_metrics(met, f, std::cerr);
    }
    if (*c_spec) {
      if (*bin_opt) spec.bin = spec_bin;
      if (spec_out.empty()) return cmd_spectro(spec, std::cout);
      std::ofstream f(spec_out, std::ios::binary | std::ios::trunc);
      if (!f) throw Error("cannot write '" + spec_out + "'");
      return cmd_spectro(spec, f);
    }
    if (*c_sl) {
      sl.format = parse_sample_format(sl_format);
      if (*norm_opt) sl.normalize_dbfs = sl_norm;
      return cmd_slice(sl, std::cout, std::cerr);
    }
    if (*c_srv) {
      if (!*key_opt) key = (static_cast<std::uint64_t>(std::random_device{}()) << 32) | std::random_device{}();
      auto registry = std::make_shared<listening::Registry>(key);
      for (const auto& s : sessions) registry->add(listening::load_session(s));
      listening::ServerConfig cfg;
      cfg.results_path = results.empty() ? output_root("") / "results.jsonl" : fs::path(results);
      cfg.ui_dir = ui_dir;
      listening::ListeningServer server(registry, cfg);
      const int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "serving " << sessions.size() << " session(s) on http://" << host << ":" << bound
                << "  results -> " << cfg.results_path.string() << "\n";
      server.run();
      g_server = nullptr;
      return 0;
    }
    if (*c_agg) {
      std::cout << listening::aggregate_file(agg_in).dump(2) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
