#pragma once

#include "drspec/compressed.hpp"
#include "drspec/noise.hpp"
#include "drspec/observables.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace drspec {

inline constexpr const char* kVersion = "1.0.0";

/// Unit in which the ramp constant and the decoherence time are given. With n_over_j0 a
/// value x means x * n_part / j0; with inverse_j0 it means x / j0.
enum class TimeUnit { inverse_j0, n_over_j0 };

/// How the peak floor is chosen.
struct PeakFloor {
  enum class Mode { median3, none, absolute } mode = Mode::median3;
  double value = 0.0;  // used by absolute

  double resolve(const SpectrumEstimate& spec) const;
};

struct ProtocolConfig {
  ModelParams model;
  TimeUnit time_unit = TimeUnit::n_over_j0;
  IntegratorConfig integrator;  // dt in units of 1/j0
  int n_step = 2048;
  double dt_meas = 0.5;         // units of 1/j0
  bool noise_enabled = true;    // false: exact samples, no decoherence, one realization
  NoiseConfig noise;            // tau_d in time_unit
  RecoveryConfig recovery;      // n_step is kept equal to the field above
  PeakFloor peak_floor;
  std::vector<double> b_stops = {0.5004, 0.4482, 0.3976, 0.3561, 0.3065,
                                 0.2560, 0.2055, 0.1545, 0.1046, 0.0625};
  int n_realizations = 100;
  int n_lines = 4;              // adiabatic reference lines per field
  double match_tol = 0.05;      // units of j0
  double high_margin = 0.2;     // units of j0
  std::uint64_t seed = 20160601;
  int threads = 1;
  std::filesystem::path output_dir = "out";

  void validate() const;
  /// Ramp constant and decoherence time in absolute simulation time.
  double tau_ramp_abs() const;
  double tau_d_abs() const;
  /// Model parameters with tau_ramp converted to absolute time.
  ModelParams effective_model() const;
  FrequencyGrid grid() const { return FrequencyGrid{n_step, dt_meas / model.j0}; }

  /// Canonical key = value text of every setting; the manifest hash is taken over it.
  std::string canonical() const;
};

/// Thrown for malformed configuration text or unknown keys.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Parses flat "key = value" text with optional [section] headers; '#' starts a comment.
/// Keys are addressed as section.key. Unknown keys are rejected.
void apply_config_text(ProtocolConfig& cfg, const std::string& text);
void apply_config_file(ProtocolConfig& cfg, const std::filesystem::path& path);
/// Sets one dotted key (e.g. "noise.tau_d") from its text value.
void set_config_value(ProtocolConfig& cfg, const std::string& key, const std::string& value);

/// Deterministic 64-bit seed derived from a master seed and a tag path.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t a = 0,
                          std::uint64_t b = 0);

/// FNV-1a over the text.
std::uint64_t fnv1a(const std::string& text);

struct LineStat {
  double adiabatic = 0.0;
  int found = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 when found < 2
};

struct ClassifiedPeak {
  Peak peak;
  PeakFlag flag = PeakFlag::accepted;
  int line = -1;       // matched line for accepted peaks
  bool counted = false;  // strongest accepted peak of its line in this realization
};

struct RealizationResult {
  SimulatedSeries samples;
  CrossValidation cv;
  int iterations = 0;
  bool converged = false;
  SpectrumEstimate spectrum;
  std::vector<ClassifiedPeak> peaks;
  bool failed = false;
  std::string error;
};

struct FieldResult {
  double b_stop = 0.0;
  double t_stop = 0.0;
  int m_star = 0;  // basis index
  std::vector<double> lines;  // E_n - E_0 for the lowest coupled levels
  TimeSeries exact;
  TimeSeries signal;
  std::vector<int> sample_indices;
  std::vector<RealizationResult> realizations;
  std::vector<LineStat> stats;
  int failed = 0;
};

struct RunResult {
  std::vector<FieldResult> fields;
};

/// Extracts peaks from a recovered spectrum, classifies them against `lines` and marks the
/// strongest accepted peak per line as the counted one.
std::vector<ClassifiedPeak> classify_peaks(const RecoveredPeaks& peaks,
                                           std::span<const double> lines, double match_tol,
                                           double high_margin);

/// Mean and sample std of the counted peaks per line.
std::vector<LineStat> line_statistics(std::span<const double> lines,
                                      const std::vector<std::vector<ClassifiedPeak>>& runs);

/// Protocol steps 1-6 for every stopping field; results only, no files.
RunResult run_protocol(const ProtocolConfig& cfg);

/// Writes lines.csv, series.csv, spectra.csv, peaks.csv, stats.csv and manifest.txt.
void write_protocol_outputs(const ProtocolConfig& cfg, const RunResult& result);

struct SpectrumRow {
  double b = 0.0;
  int level = 0;
  double energy = 0.0;
  int parity = 0;
};

/// Lowest n_levels energies and parities at every field of b_grid.
std::vector<SpectrumRow> run_spectrum_sweep(const ModelParams& params,
                                            std::span<const double> b_grid, int n_levels);
void write_spectrum_csv(std::ostream& os, const std::vector<SpectrumRow>& rows);

/// Sparse-recovery replacement for the baseline: the adjoint of the partial inverse DFT
/// applied to the centered samples (the zero-filled transform).
SpectrumEstimate dft_baseline(const SensingOperator& op, const Eigen::VectorXd& y);

struct BaselineResult {
  double b_stop = 0.0;
  std::vector<double> lines;
  SpectrumEstimate partial;   // from the sampled realization-0 data
  SpectrumEstimate full;      // noiseless full-grid DFT of the exact series
};

/// Baseline spectra for every stopping field of cfg.
std::vector<BaselineResult> run_dft_baseline(const ProtocolConfig& cfg);

/// Columns: b_over_j0, source, omega, re, im, magnitude (positive bins).
void write_baseline_csv(std::ostream& os, const std::vector<BaselineResult>& rows, double j0 = 1.0);

/// Fixed-precision number text shared by all CSV writers.
std::string fmt_num(double v);

/// Runs fn(i) for i in [0, count) on `threads` workers; fn must only touch slot i.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

}  // namespace drspec
