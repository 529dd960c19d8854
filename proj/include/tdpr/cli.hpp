#pragma once

// Batch commands behind the `tdpr` executable. Each returns a process exit
// code; per-file failures are reported on `err` and do not stop the batch.

#include <glob.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tdpr/degrade.hpp"
#include "tdpr/error.hpp"
#include "tdpr/metrics.hpp"
#include "tdpr/phase_repair.hpp"
#include "tdpr/stft.hpp"
#include "tdpr/wav.hpp"
#include "tdpr/waveform.hpp"

namespace tdpr::cli {

namespace fs = std::filesystem;

inline constexpr const char* kOutputRootEnv = "TDPR_OUTPUT_ROOT";

/// Output directory: explicit flag, else $TDPR_OUTPUT_ROOT, else ./out.
inline fs::path output_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutputRootEnv); env != nullptr && *env != '\0') return env;
  return "out";
}

inline unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

inline SampleFormat parse_sample_format(const std::string& s) {
  if (s == "int16") return SampleFormat::kInt16;
  if (s == "float32") return SampleFormat::kFloat32;
  throw Error("unknown sample format '" + s + "' (expected int16 or float32)");
}

inline bool has_glob_chars(const std::string& s) { return s.find_first_of("*?[") != std::string::npos; }

inline bool is_wav(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".wav";
}

/// Expands files, directories (every .wav below them) and shell globs into a
/// sorted, de-duplicated list. Plain paths are kept even if missing so the
/// failure is reported against that file.
inline std::vector<fs::path> expand_inputs(const std::vector<std::string>& specs) {
  std::set<fs::path> found;
  for (const auto& spec : specs) {
    if (has_glob_chars(spec) && !fs::exists(spec)) {
      glob_t g{};
      if (::glob(spec.c_str(), 0, nullptr, &g) == 0) {
        for (std::size_t i = 0; i < g.gl_pathc; ++i) found.insert(fs::path(g.gl_pathv[i]).lexically_normal());
      }
      globfree(&g);
    } else if (fs::is_directory(spec)) {
      for (const auto& e : fs::recursive_directory_iterator(spec)) {
        if (e.is_regular_file() && is_wav(e.path())) found.insert(e.path().lexically_normal());
      }
    } else {
      found.insert(fs::path(spec).lexically_normal());
    }
  }
  if (found.empty()) throw Error("no inputs");
  return {found.begin(), found.end()};
}

/// Runs `job(i)` for i in [0, n) on `workers` threads. Jobs write into
/// pre-sized slots, so results never depend on scheduling.
inline void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& job) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) job(i);
    });
  }
  for (auto& t : pool) t.join();
}

struct FileOutcome {
  std::string message;  // stdout line on success
  std::string error;    // non-empty on failure
};

inline int report(const std::vector<fs::path>& inputs, const std::vector<FileOutcome>& outcomes, std::ostream& out,
                  std::ostream& err) {
  int failed = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (!outcomes[i].error.empty()) {
      err << "error: " << inputs[i].string() << ": " << outcomes[i].error << "\n";
      ++failed;
    } else if (!outcomes[i].message.empty()) {
      out << outcomes[i].message << "\n";
    }
  }
  if (failed > 0) err << failed << " of " << outcomes.size() << " file(s) failed\n";
  return failed > 0 ? 1 : 0;
}

// Output stems must be unique because every output lands in one directory.
inline std::vector<std::string> duplicate_stems(const std::vector<fs::path>& inputs) {
  std::map<std::string, int> count;
  for (const auto& p : inputs) ++count[p.stem().string()];
  std::vector<std::string> dup;
  for (const auto& p : inputs) dup.push_back(count[p.stem().string()] > 1 ? p.stem().string() : "");
  return dup;
}

inline std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// ---------------------------------------------------------------- degrade

struct DegradeOptions {
  std::vector<std::string> inputs;
  std::string out_dir;
  DegradeConfig config;
  unsigned workers = default_workers();
  SampleFormat format = SampleFormat::kInt16;
};

/// Degrades each input with the draw_index-th sampled spec (index = position
/// in the sorted input list) and writes <stem>.wav plus <stem>.json.
inline int cmd_degrade(const DegradeOptions& opt, std::ostream& out, std::ostream& err) {
  validate(opt.config);
  const auto inputs = expand_inputs(opt.inputs);
  const auto dir = output_root(opt.out_dir);
  fs::create_directories(dir);
  const auto dup = duplicate_stems(inputs);
  std::vector<FileOutcome> outcomes(inputs.size());
  parallel_for(inputs.size(), opt.workers, [&](std::size_t i) {
    try {
      if (!dup[i].empty()) throw Error("output name '" + dup[i] + "' is not unique");
      const auto spec = sample_spec(opt.config, i);
      const auto y = degrade(read_wav(inputs[i]), spec);
      const auto stem = inputs[i].stem().string();
      write_wav(dir / (stem + ".wav"), y, opt.format);
      std::ofstream js(dir / (stem + ".json"), std::ios::binary | std::ios::trunc);
      js << to_json(spec, opt.config.seed, i).dump(2) << "\n";
      if (!js) throw Error("cannot write provenance JSON");
      outcomes[i].message = inputs[i].string() + " -> " + (dir / (stem + ".wav")).string() + " " +
                            std::string(to_string(spec.family)) + " order=" + std::to_string(spec.order) +
                            " cutoff_hz=" + fmt_num(spec.cutoff_hz);
    } catch (const std::exception& e) {
      outcomes[i].error = e.what();
    }
  });
  return report(inputs, outcomes, out, err);
}

// ----------------------------------------------------------------- repair

struct PhaseFrom {
  enum class Kind { kExternal, kGroundTruth, kGroundTruthSelf, kGriffinLim } kind = Kind::kGriffinLim;
  fs::path path;       // file or directory of <stem>.wav
  int iterations = 0;  // 0: use --iters
};

/// PATH | gt:PATH | gt:self | griffinlim[:N]
inline PhaseFrom parse_phase_from(const std::string& s) {
  PhaseFrom p;
  if (s == "griffinlim" || s.rfind("griffinlim:", 0) == 0) {
    p.kind = PhaseFrom::Kind::kGriffinLim;
    if (s.size() > 11) {
      try {
        std::size_t used = 0;
        p.iterations = std::stoi(s.substr(11), &used);
        if (used != s.size() - 11) throw Error("");
      } catch (...) {
        throw Error("--phase-from: bad iteration count in '" + s + "'");
      }
      if (p.iterations < 1) throw Error("--phase-from: griffinlim needs at least 1 iteration");
    }
  } else if (s == "gt:self") {
    p.kind = PhaseFrom::Kind::kGroundTruthSelf;
  } else if (s.rfind("gt:", 0) == 0) {
    p.kind = PhaseFrom::Kind::kGroundTruth;
    p.path = s.substr(3);
  } else if (!s.empty()) {
    p.kind = PhaseFrom::Kind::kExternal;
    p.path = s;
  } else {
    throw Error("--phase-from is empty");
  }
  return p;
}

struct RepairOptions {
  std::vector<std::string> inputs;
  std::string out_dir;
  std::string phase_from = "griffinlim";
  int iterations = 64;
  StftParams stft{};
  unsigned workers = default_workers();
  SampleFormat format = SampleFormat::kFloat32;
};

inline fs::path phase_file_for(const fs::path& source, const fs::path& donor) {
  if (fs::is_directory(source)) return source / donor.filename();
  return source;
}

inline int cmd_repair(const RepairOptions& opt, std::ostream& out, std::ostream& err) {
  validate(opt.stft);
  const auto how = parse_phase_from(opt.phase_from);
  if (how.kind == PhaseFrom::Kind::kGriffinLim && how.iterations == 0 && opt.iterations < 1) {
    throw Error("--iters must be >= 1");
  }
  const auto inputs = expand_inputs(opt.inputs);
  const auto dir = output_root(opt.out_dir);
  fs::create_directories(dir);
  const auto dup = duplicate_stems(inputs);
  std::vector<FileOutcome> outcomes(inputs.size());
  parallel_for(inputs.size(), opt.workers, [&](std::size_t i) {
    try {
      if (!dup[i].empty()) throw Error("output name '" + dup[i] + "' is not unique");
      const auto donor = read_wav(inputs[i]);
      PhaseSource source;
      std::string from;
      switch (how.kind) {
        case PhaseFrom::Kind::kGriffinLim: {
          const int n = how.iterations > 0 ? how.iterations : opt.iterations;
          source = GriffinLimPhase{n, ZeroPhaseInit{}};
          from = "griffinlim:" + std::to_string(n);
          break;
        }
        case PhaseFrom::Kind::kGroundTruthSelf:
          source = GroundTruthPhase{donor};
          from = "gt:self";
          break;
        case PhaseFrom::Kind::kGroundTruth: {
          const auto f = phase_file_for(how.path, inputs[i]);
          if (!fs::exists(f)) throw Error("phase file '" + f.string() + "' not found");
          source = GroundTruthPhase{read_wav(f)};
          from = "gt:" + f.string();
          break;
        }
        case PhaseFrom::Kind::kExternal: {
          const auto f = phase_file_for(how.path, inputs[i]);
          if (!fs::exists(f)) throw Error("phase file '" + f.string() + "' not found");
          source = ExternalPhase{read_wav(f)};
          from = f.string();
          break;
        }
      }
      const auto y = repair(donor, source, opt.stft);
      const auto dst = dir / (inputs[i].stem().string() + ".wav");
      write_wav(dst, y, opt.format);
      outcomes[i].message = inputs[i].string() + " -> " + dst.string() + " phase=" + from;
    } catch (const std::exception& e) {
      outcomes[i].error = e.what();
    }
  });
  return report(inputs, outcomes, out, err);
}

// ---------------------------------------------------------------- metrics

enum class ReportFormat { kCsv, kJson };

inline ReportFormat parse_report_format(const std::string& s) {
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "json") return ReportFormat::kJson;
  throw Error("unknown report format '" + s + "' (expected csv or json)");
}

struct MetricsOptions {
  std::string ref;                   // file or directory of <stem>.wav
  std::vector<std::string> est;      // files, dirs or globs
  ReportFormat format = ReportFormat::kCsv;
  LossConfig loss{};
  StftParams lsd_stft{};
  bool table = false;                // pivot mean LSD by family x cutoff
  unsigned workers = default_workers();
};

struct MetricsRow {
  std::string file;
  std::optional<double> cutoff_hz;
  std::string family;
  double lsd = 0.0;
  LossReport loss;
};

inline std::vector<MetricsRow> compute_metrics(const MetricsOptions& opt, std::ostream& err, int& failed) {
  validate(opt.loss);
  validate(opt.lsd_stft);
  const auto est = expand_inputs(opt.est);
  const fs::path ref(opt.ref);
  if (!fs::exists(ref)) throw Error("reference '" + ref.string() + "' not found");
  std::vector<MetricsRow> rows(est.size());
  std::vector<FileOutcome> outcomes(est.size());
  parallel_for(est.size(), opt.workers, [&](std::size_t i) {
    try {
      const auto ref_file = fs::is_directory(ref) ? ref / est[i].filename() : ref;
      if (!fs::exists(ref_file)) throw Error("reference '" + ref_file.string() + "' not found");
      const auto y = read_wav(ref_file);
      const auto y_hat = read_wav(est[i]);
      MetricsRow& r = rows[i];
      r.file = est[i].string();
      const auto sidecar = fs::path(est[i]).replace_extension(".json");
      if (fs::exists(sidecar)) {
        std::ifstream in(sidecar);
        const auto j = nlohmann::json::parse(in);
        r.family = j.value("family", "");
        if (j.contains("cutoff_hz")) r.cutoff_hz = j["cutoff_hz"].get<double>();
      }
      r.lsd = lsd(y, y_hat, opt.lsd_stft);
      r.loss = loss_report(y, y_hat, opt.loss);
    } catch (const std::exception& e) {
      outcomes[i].error = e.what();
    }
  });
  std::ostringstream sink;
  failed = report(est, outcomes, sink, err);
  std::vector<MetricsRow> ok;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (outcomes[i].error.empty()) ok.push_back(rows[i]);
  }
  return ok;
}

inline void write_rows(const std::vector<MetricsRow>& rows, ReportFormat fmt, std::ostream& out) {
  if (fmt == ReportFormat::kCsv) {
    out << "file,cutoff_hz,family,lsd,mrstft,mrwave,total\n";
    for (const auto& r : rows) {
      out << r.file << "," << (r.cutoff_hz ? fmt_num(*r.cutoff_hz) : "") << "," << r.family << "," << fmt_num(r.lsd)
          << "," << fmt_num(r.loss.mrstft) << "," << fmt_num(r.loss.mrwave) << "," << fmt_num(r.loss.total) << "\n";
    }
    return;
  }
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    arr.push_back({{"file", r.file},
                   {"cutoff_hz", r.cutoff_hz ? nlohmann::ordered_json(*r.cutoff_hz) : nlohmann::ordered_json()},
                   {"family", r.family},
                   {"lsd", r.lsd},
                   {"mrstft", r.loss.mrstft},
                   {"mrwave", r.loss.mrwave},
                   {"total", r.loss.total}});
  }
  out << arr.dump(2) << "\n";
}

/// Mean LSD per (family, cutoff rounded to 10 Hz): one row per family, one
/// column per cutoff, ascending.
inline void write_table(const std::vector<MetricsRow>& rows, ReportFormat fmt, std::ostream& out) {
  std::map<std::string, std::map<long, std::pair<double, int>>> cells;
  std::set<long> cutoffs;
  for (const auto& r : rows) {
    const long c = r.cutoff_hz ? std::lround(*r.cutoff_hz / 10.0) * 10 : -1;
    cutoffs.insert(c);
    auto& cell = cells[r.family.empty() ? "unknown" : r.family][c];
    cell.first += r.lsd;
    cell.second += 1;
  }
  auto label = [](long c) { return c < 0 ? std::string("unknown") : std::to_string(c); };
  if (fmt == ReportFormat::kCsv) {
    out << "family";
    for (long c : cutoffs) out << "," << label(c);
    out << "\n";
    for (const auto& [family, row] : cells) {
      out << family;
      for (long c : cutoffs) {
        out << ",";
        if (auto it = row.find(c); it != row.end()) out << fmt_num(it->second.first / it->second.second);
      }
      out << "\n";
    }
    return;
  }
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [family, row] : cells) {
    nlohmann::ordered_json cols = nlohmann::ordered_json::object();
    for (long c : cutoffs) {
      auto it = row.find(c);
      cols[label(c)] = it == row.end() ? nlohmann::ordered_json() : nlohmann::ordered_json(it->second.first / it->second.second);
    }
    j[family] = cols;
  }
  out << j.dump(2) << "\n";
}

inline int cmd_metrics(const MetricsOptions& opt, std::ostream& out, std::ostream& err) {
  int failed = 0;
  const auto rows = compute_metrics(opt, err, failed);
  if (opt.table) {
    write_table(rows, opt.format, out);
  } else {
    write_rows(rows, opt.format, out);
  }
  return failed;
}

// ---------------------------------------------------------------- spectro

struct SpectroOptions {
  std::string input;
  std::string kind = "mag";  // mag | phase
  std::optional<std::size_t> bin;
  StftParams stft{};
};

/// CSV: frame, time_s, then either one column per bin (magnitude in dB,
/// floored at -200 dB) or the single requested bin.
inline int cmd_spectro(const SpectroOptions& opt, std::ostream& out) {
  if (opt.kind != "mag" && opt.kind != "phase") throw Error("--kind must be mag or phase");
  if (opt.kind == "phase" && !opt.bin) throw Error("--kind phase needs --bin K");
  const auto w = read_wav(opt.input);
  const auto s = stft(w, opt.stft);
  if (opt.bin && *opt.bin >= s.bins()) {
    throw Error("--bin " + std::to_string(*opt.bin) + " out of range (bins: " + std::to_string(s.bins()) + ")");
  }
  const double bin_hz = static_cast<double>(w.sample_rate_hz) / static_cast<double>(opt.stft.fft_size);
  std::vector<std::size_t> cols;
  if (opt.bin) {
    cols.push_back(*opt.bin);
  } else {
    for (std::size_t k = 0; k < s.bins(); ++k) cols.push_back(k);
  }
  out << "frame,time_s";
  for (auto k : cols) out << "," << (opt.kind == "mag" ? "mag_db_" : "phase_rad_") << fmt_num(static_cast<double>(k) * bin_hz);
  out << "\n";
  const auto ph = phase(s);
  for (std::size_t l = 0; l < s.frames(); ++l) {
    out << l << "," << fmt_num(static_cast<double>(l * opt.stft.hop) / w.sample_rate_hz);
    for (auto k : cols) {
      const double v = opt.kind == "mag" ? 20.0 * std::log10(std::max(std::abs(s.data(l, k)), 1e-10)) : ph(l, k);
      out << "," << fmt_num(v);
    }
    out << "\n";
  }
  return 0;
}

// ------------------------------------------------------------------ slice

struct SliceOptions {
  std::vector<std::string> inputs;
  std::string out_dir;
  double duration_s = 5.0;
  std::vector<double> offsets_s{0.0};
  std::optional<double> normalize_dbfs;
  SampleFormat format = SampleFormat::kInt16;
};

/// Writes <stem>_<offset ms>.wav per offset. Offsets past the end are skipped
/// with a warning; short tails are kept.
inline int cmd_slice(const SliceOptions& opt, std::ostream& out, std::ostream& err) {
  if (!(opt.duration_s > 0.0)) throw Error("--duration must be positive");
  if (opt.offsets_s.empty()) throw Error("no offsets");
  const auto inputs = expand_inputs(opt.inputs);
  const auto dir = output_root(opt.out_dir);
  fs::create_directories(dir);
  std::vector<FileOutcome> outcomes(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    try {
      const auto w = read_wav(inputs[i]);
      std::string msg;
      for (double off : opt.offsets_s) {
        auto piece = slice(w, off, opt.duration_s);
        if (piece.empty()) {
          warn(inputs[i].string() + ": offset " + fmt_num(off) + " s is past the end");
          continue;
        }
        if (opt.normalize_dbfs) piece = peak_normalize(piece, *opt.normalize_dbfs);
        const auto dst =
            dir / (inputs[i].stem().string() + "_" + std::to_string(std::llround(off * 1000.0)) + ".wav");
        write_wav(dst, piece, opt.format);
        msg += (msg.empty() ? "" : "\n") + inputs[i].string() + " -> " + dst.string();
      }
      outcomes[i].message = msg;
    } catch (const std::exception& e) {
      outcomes[i].error = e.what();
    }
  }
  return report(inputs, outcomes, out, err);
}

}  // namespace tdpr::cli
