#include "drspec/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace drspec {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " expects a number, got '" + v + "'");
  }
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long d = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " expects an integer, got '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    const unsigned long long d = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " expects an unsigned integer, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config: " + key + " expects true/false, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(key, item));
  }
  return out;
}

std::string exact_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* unit_name(TimeUnit u) { return u == TimeUnit::n_over_j0 ? "n_over_j0" : "inverse_j0"; }

}  // namespace

std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

double PeakFloor::resolve(const SpectrumEstimate& spec) const {
  switch (mode) {
    case Mode::median3: return default_peak_floor(spec);
    case Mode::none: return 0.0;
    case Mode::absolute: return value;
  }
  return 0.0;
}

void ProtocolConfig::validate() const {
  model.validate();
  integrator.validate();
  if (n_step < 4) throw InvalidArgument("protocol: n_step must be >= 4");
  if (!(dt_meas > 0.0)) throw InvalidArgument("protocol: dt_meas must be positive");
  noise.validate();
  RecoveryConfig rc = recovery;
  rc.n_step = n_step;
  rc.validate();
  for (double b : b_stops)
    if (!(b > 0.0 && b * model.j0 < model.b0))
      throw InvalidArgument("protocol: stopping field " + fmt_num(b) + " outside (0, b0)");
  if (n_realizations < 1) throw InvalidArgument("protocol: n_realizations must be >= 1");
  if (n_lines < 1) throw InvalidArgument("protocol: n_lines must be >= 1");
  if (!(match_tol > 0.0) || !(high_margin >= 0.0))
    throw InvalidArgument("protocol: match_tol > 0 and high_margin >= 0 required");
  if (threads < 1) throw InvalidArgument("protocol: threads must be >= 1");
  if (peak_floor.mode == PeakFloor::Mode::absolute && !(peak_floor.value >= 0.0))
    throw InvalidArgument("protocol: peak floor must be >= 0");
}

double ProtocolConfig::tau_ramp_abs() const {
  const double unit = time_unit == TimeUnit::n_over_j0 ? model.n_part : 1.0;
  return model.tau_ramp * unit / model.j0;
}

double ProtocolConfig::tau_d_abs() const {
  const double unit = time_unit == TimeUnit::n_over_j0 ? model.n_part : 1.0;
  return noise.tau_d * unit / model.j0;
}

ModelParams ProtocolConfig::effective_model() const {
  ModelParams m = model;
  m.tau_ramp = tau_ramp_abs();
  return m;
}

std::string ProtocolConfig::canonical() const {
  std::ostringstream os;
  os << "model.n_part = " << model.n_part << "\n"
     << "model.j0 = " << exact_num(model.j0) << "\n"
     << "model.b0 = " << exact_num(model.b0) << "\n"
     << "model.tau_ramp = " << exact_num(model.tau_ramp) << "\n"
     << "model.time_unit = " << unit_name(time_unit) << "\n"
     << "integrator.dt = " << exact_num(integrator.dt) << "\n"
     << "integrator.method = "
     << (integrator.method == Integrator::cfet4 ? "cfet4" : "trotter_midpoint") << "\n"
     << "measurement.n_step = " << n_step << "\n"
     << "measurement.dt_meas = " << exact_num(dt_meas) << "\n"
     << "noise.enabled = " << (noise_enabled ? "true" : "false") << "\n"
     << "noise.tau_d = " << exact_num(noise.tau_d) << "\n"
     << "noise.n_meas = " << noise.n_meas << "\n"
     << "recovery.m_step = " << recovery.m_step << "\n"
     << "recovery.tau_grid = ";
  for (std::size_t i = 0; i < recovery.tau_grid.size(); ++i)
    os << (i ? "," : "") << exact_num(recovery.tau_grid[i]);
  os << "\n"
     << "recovery.epsilon = " << exact_num(recovery.epsilon) << "\n"
     << "recovery.max_iter = " << recovery.max_iter << "\n"
     << "recovery.pattern = "
     << (recovery.pattern == SamplingPattern::random ? "random" : "window") << "\n"
     << "recovery.subtract_mean = " << (recovery.subtract_mean ? "true" : "false") << "\n"
     << "recovery.debias = " << (recovery.debias ? "true" : "false") << "\n"
     << "recovery.expected_sparsity = " << recovery.expected_sparsity << "\n"
     << "recovery.peak_floor = "
     << (peak_floor.mode == PeakFloor::Mode::median3 ? std::string("median3")
         : peak_floor.mode == PeakFloor::Mode::none  ? std::string("none")
                                                     : exact_num(peak_floor.value))
     << "\n"
     << "protocol.b_stops = ";
  for (std::size_t i = 0; i < b_stops.size(); ++i) os << (i ? "," : "") << exact_num(b_stops[i]);
  os << "\n"
     << "protocol.n_realizations = " << n_realizations << "\n"
     << "protocol.n_lines = " << n_lines << "\n"
     << "protocol.match_tol = " << exact_num(match_tol) << "\n"
     << "protocol.high_margin = " << exact_num(high_margin) << "\n"
     << "protocol.seed = " << seed << "\n";
  return os.str();
}

void set_config_value(ProtocolConfig& cfg, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  auto regrid = [&](double lo, double hi, int count) {
    cfg.recovery.tau_grid = log_tau_grid(lo, hi, count);
  };
  const auto& g = cfg.recovery.tau_grid;
  const double lo = g.empty() ? 0.05 : *std::min_element(g.begin(), g.end());
  const double hi = g.empty() ? 1.0 : *std::max_element(g.begin(), g.end());
  if (key == "model.n_part") cfg.model.n_part = static_cast<int>(parse_int(key, v));
  else if (key == "model.j0") cfg.model.j0 = parse_double(key, v);
  else if (key == "model.b0") cfg.model.b0 = parse_double(key, v);
  else if (key == "model.tau_ramp") cfg.model.tau_ramp = parse_double(key, v);
  else if (key == "model.time_unit") {
    if (v == "n_over_j0") cfg.time_unit = TimeUnit::n_over_j0;
    else if (v == "inverse_j0") cfg.time_unit = TimeUnit::inverse_j0;
    else throw ConfigError("config: model.time_unit must be n_over_j0 or inverse_j0");
  } else if (key == "integrator.dt") cfg.integrator.dt = parse_double(key, v);
  else if (key == "integrator.method") {
    if (v == "cfet4") cfg.integrator.method = Integrator::cfet4;
    else if (v == "trotter_midpoint") cfg.integrator.method = Integrator::trotter_midpoint;
    else throw ConfigError("config: integrator.method must be cfet4 or trotter_midpoint");
  } else if (key == "measurement.n_step") cfg.n_step = static_cast<int>(parse_int(key, v));
  else if (key == "measurement.dt_meas") cfg.dt_meas = parse_double(key, v);
  else if (key == "noise.enabled") cfg.noise_enabled = parse_bool(key, v);
  else if (key == "noise.tau_d") {
    cfg.noise.tau_d = (v == "inf" || v == "infinity") ? std::numeric_limits<double>::infinity()
                                                      : parse_double(key, v);
  } else if (key == "noise.n_meas") cfg.noise.n_meas = parse_int(key, v);
  else if (key == "recovery.m_step") cfg.recovery.m_step = static_cast<int>(parse_int(key, v));
  else if (key == "recovery.tau_grid") cfg.recovery.tau_grid = parse_list(key, v);
  else if (key == "recovery.tau_min") regrid(parse_double(key, v), hi, static_cast<int>(g.size()));
  else if (key == "recovery.tau_max") regrid(lo, parse_double(key, v), static_cast<int>(g.size()));
  else if (key == "recovery.tau_count") regrid(lo, hi, static_cast<int>(parse_int(key, v)));
  else if (key == "recovery.epsilon") cfg.recovery.epsilon = parse_double(key, v);
  else if (key == "recovery.max_iter") cfg.recovery.max_iter = static_cast<int>(parse_int(key, v));
  else if (key == "recovery.pattern") {
    if (v == "random") cfg.recovery.pattern = SamplingPattern::random;
    else if (v == "window") cfg.recovery.pattern = SamplingPattern::window;
    else throw ConfigError("config: recovery.pattern must be random or window");
  } else if (key == "recovery.subtract_mean") cfg.recovery.subtract_mean = parse_bool(key, v);
  else if (key == "recovery.debias") cfg.recovery.debias = parse_bool(key, v);
  else if (key == "recovery.expected_sparsity")
    cfg.recovery.expected_sparsity = static_cast<int>(parse_int(key, v));
  else if (key == "recovery.peak_floor") {
    if (v == "median3") cfg.peak_floor = {PeakFloor::Mode::median3, 0.0};
    else if (v == "none") cfg.peak_floor = {PeakFloor::Mode::none, 0.0};
    else cfg.peak_floor = {PeakFloor::Mode::absolute, parse_double(key, v)};
  } else if (key == "protocol.b_stops") cfg.b_stops = parse_list(key, v);
  else if (key == "protocol.n_realizations") cfg.n_realizations = static_cast<int>(parse_int(key, v));
  else if (key == "protocol.n_lines") cfg.n_lines = static_cast<int>(parse_int(key, v));
  else if (key == "protocol.match_tol") cfg.match_tol = parse_double(key, v);
  else if (key == "protocol.high_margin") cfg.high_margin = parse_double(key, v);
  else if (key == "protocol.seed") cfg.seed = parse_u64(key, v);
  else if (key == "protocol.threads") cfg.threads = static_cast<int>(parse_int(key, v));
  else if (key == "protocol.output_dir") cfg.output_dir = v;
  else throw ConfigError("config: unknown key '" + key + "'");
}

void apply_config_text(ProtocolConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config line " + std::to_string(lineno) + ": bad section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
    set_config_value(cfg, key, line.substr(eq + 1));
  }
}

void apply_config_file(ProtocolConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str());
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t a,
                          std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(a),
                    static_cast<std::uint32_t>(a >> 32), static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  const int workers = std::max(1, std::min(threads, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex err_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<ClassifiedPeak> classify_peaks(const RecoveredPeaks& peaks,
                                           std::span<const double> lines, double match_tol,
                                           double high_margin) {
  std::vector<ClassifiedPeak> out;
  std::vector<int> best(lines.size(), -1);
  for (const Peak& p : peaks.peaks) {
    const PeakClass pc = classify_peak(p.omega, lines, match_tol, high_margin);
    out.push_back(ClassifiedPeak{p, pc.flag, pc.line, false});
    if (pc.flag == PeakFlag::accepted) {
      int& b = best[pc.line];
      if (b < 0 || p.magnitude > out[b].peak.magnitude) b = static_cast<int>(out.size()) - 1;
    }
  }
  for (int b : best)
    if (b >= 0) out[b].counted = true;
  return out;
}

std::vector<LineStat> line_statistics(std::span<const double> lines,
                                      const std::vector<std::vector<ClassifiedPeak>>& runs) {
  std::vector<LineStat> stats(lines.size());
  std::vector<std::vector<double>> hits(lines.size());
  for (std::size_t l = 0; l < lines.size(); ++l) stats[l].adiabatic = lines[l];
  for (const auto& run : runs)
    for (const ClassifiedPeak& p : run)
      if (p.counted && p.line >= 0 && p.line < static_cast<int>(lines.size()))
        hits[p.line].push_back(p.peak.omega);
  for (std::size_t l = 0; l < lines.size(); ++l) {
    const auto& h = hits[l];
    stats[l].found = static_cast<int>(h.size());
    if (h.empty()) continue;
    double mean = 0.0;
    for (double x : h) mean += x;
    mean /= static_cast<double>(h.size());
    double var = 0.0;
    for (double x : h) var += (x - mean) * (x - mean);
    stats[l].mean = mean;
    stats[l].stddev = h.size() > 1 ? std::sqrt(var / static_cast<double>(h.size() - 1)) : 0.0;
  }
  return stats;
}

namespace {

constexpr std::uint64_t kTagSampling = 1, kTagNoise = 2, kTagSplit = 3;

RecoveryConfig recovery_for(const ProtocolConfig& cfg) {
  RecoveryConfig rc = cfg.recovery;
  rc.n_step = cfg.n_step;
  rc.seed = derive_seed(cfg.seed, kTagSampling);
  return rc;
}

NoiseConfig noise_for(const ProtocolConfig& cfg, std::size_t field) {
  NoiseConfig nc = cfg.noise;
  nc.tau_d = cfg.tau_d_abs();
  nc.seed = derive_seed(cfg.seed, kTagNoise, field);
  return nc;
}

std::vector<double> absolute_stops(const ProtocolConfig& cfg) {
  std::vector<double> out = cfg.b_stops;
  for (double& b : out) b *= cfg.model.j0;
  return out;
}

IntegratorConfig integrator_for(const ProtocolConfig& cfg) {
  IntegratorConfig ic = cfg.integrator;
  ic.dt = cfg.integrator.dt / cfg.model.j0;
  return ic;
}

Eigen::VectorXd centered(const Eigen::VectorXd& v, bool subtract) {
  Eigen::VectorXd y = v;
  if (subtract && y.size() > 0) y.array() -= y.mean();
  return y;
}

}  // namespace

RunResult run_protocol(const ProtocolConfig& cfg) {
  cfg.validate();
  RunResult out;
  if (cfg.b_stops.empty()) return out;
  if (const std::string w = recovery_for(cfg).sparsity_warning(); !w.empty())
    std::cerr << "warning: " << w << "\n";

  const ModelParams model = cfg.effective_model();
  const std::vector<double> stops = absolute_stops(cfg);
  const std::vector<SpinState> states = evolve_ramp_to_fields(model, stops, integrator_for(cfg));
  const RecoveryConfig rc = recovery_for(cfg);
  const FrequencyGrid grid = cfg.grid();
  const std::vector<int> idx = select_sample_indices(cfg.n_step, rc.m_step, rc.seed, rc.pattern);
  const SensingOperator op(grid, idx);
  const int n_real = cfg.noise_enabled ? cfg.n_realizations : 1;

  out.fields.resize(cfg.b_stops.size());
  for (std::size_t f = 0; f < cfg.b_stops.size(); ++f) {
    FieldResult& fr = out.fields[f];
    fr.b_stop = stops[f];
    fr.t_stop = ramp_stop_time(model.b0, model.tau_ramp, fr.b_stop);
    const EigenSystem eig = diagonalize(build_hamiltonian(model, fr.b_stop));
    const std::vector<double> exc = eig.coupled_excitations();
    fr.lines.assign(exc.begin(), exc.begin() + std::min<std::size_t>(exc.size(), cfg.n_lines));
    fr.m_star = highest_probable_index(states[f]);
    fr.exact = occupancy_timeseries(states[f], eig, fr.m_star, cfg.n_step, grid.dt_meas);
    fr.exact.b_stop = fr.b_stop;
    const NoiseConfig nc = noise_for(cfg, f);
    fr.signal = cfg.noise_enabled ? apply_decoherence(fr.exact, nc.tau_d) : fr.exact;
    fr.sample_indices = idx;
    if (cfg.noise_enabled && snr_estimate(fr.signal.values[0], nc.n_meas) <= 1.0)
      std::cerr << "warning: SNR rule violated at b = " << fmt_num(fr.b_stop) << "\n";

    fr.realizations.resize(n_real);
    parallel_for(n_real, cfg.threads, [&](int r) {
      RealizationResult& rr = fr.realizations[r];
      try {
        if (cfg.noise_enabled) {
          rr.samples = simulate_counts(fr.signal, nc, static_cast<std::uint64_t>(r), idx);
        } else {
          rr.samples.indices = idx;
          rr.samples.normalized.b_stop = fr.b_stop;
          rr.samples.normalized.m_star = fr.m_star;
          rr.samples.normalized.dt_meas = grid.dt_meas;
          rr.samples.normalized.t.resize(static_cast<Eigen::Index>(idx.size()));
          rr.samples.normalized.values.resize(static_cast<Eigen::Index>(idx.size()));
          for (std::size_t j = 0; j < idx.size(); ++j) {
            rr.samples.normalized.t[j] = fr.exact.t[idx[j]];
            rr.samples.normalized.values[j] = fr.exact.values[idx[j]];
          }
        }
        const Eigen::VectorXd y = centered(rr.samples.normalized.values, rc.subtract_mean);
        rr.cv = cross_validate_tau(op, y, rc, derive_seed(cfg.seed, kTagSplit, f, r));
        const SparsaResult sr = sparsa_recover(op, y, rc, rr.cv.tau_abs);
        rr.iterations = sr.iterations;
        rr.converged = sr.converged;
        rr.spectrum = to_spectrum(op, rc.debias ? debias(op, y, sr.coeffs) : sr.coeffs);
        rr.peaks = classify_peaks(extract_peaks(rr.spectrum, cfg.peak_floor.resolve(rr.spectrum)),
                                  fr.lines, cfg.match_tol * cfg.model.j0,
                                  cfg.high_margin * cfg.model.j0);
      } catch (const NumericalFailure& e) {
        rr.failed = true;
        rr.error = e.what();
      }
    });
    std::vector<std::vector<ClassifiedPeak>> runs;
    for (const RealizationResult& rr : fr.realizations) {
      if (rr.failed) {
        ++fr.failed;
        std::cerr << "warning: realization failed at b = " << fmt_num(fr.b_stop) << ": "
                  << rr.error << "\n";
        continue;
      }
      runs.push_back(rr.peaks);
    }
    fr.stats = line_statistics(fr.lines, runs);
  }
  return out;
}

void write_protocol_outputs(const ProtocolConfig& cfg, const RunResult& result) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  auto open = [&](const char* name) {
    std::ofstream os(cfg.output_dir / name);
    if (!os) throw InvalidArgument("cannot write " + (cfg.output_dir / name).string());
    return os;
  };
  const double j0 = cfg.model.j0;
  const int half = cfg.model.n_part / 2;
  const bool odd = cfg.model.n_part % 2 != 0;
  auto m_text = [&](int index) {
    return odd ? fmt_num(index - 0.5 * cfg.model.n_part) : std::to_string(index - half);
  };

  {
    std::ofstream os = open("lines.csv");
    os << "b_over_j0,m_star,t_stop,line,omega_over_j0\n";
    for (const FieldResult& fr : result.fields)
      for (std::size_t l = 0; l < fr.lines.size(); ++l)
        os << fmt_num(fr.b_stop / j0) << "," << m_text(fr.m_star) << "," << fmt_num(fr.t_stop)
           << "," << l + 1 << "," << fmt_num(fr.lines[l] / j0) << "\n";
  }
  {
    std::ofstream os = open("series.csv");
    os << "b_over_j0,t,p_exact,p_signal,counts,p_simulated,sampled\n";
    for (std::size_t f = 0; f < result.fields.size(); ++f) {
      const FieldResult& fr = result.fields[f];
      std::vector<char> sampled(fr.exact.size(), 0);
      for (int i : fr.sample_indices) sampled[i] = 1;
      SimulatedSeries full;
      if (cfg.noise_enabled) full = simulate_counts(fr.signal, noise_for(cfg, f), 0);
      for (int k = 0; k < fr.exact.size(); ++k) {
        os << fmt_num(fr.b_stop / j0) << "," << fmt_num(fr.exact.t[k]) << ","
           << fmt_num(fr.exact.values[k]) << "," << fmt_num(fr.signal.values[k]) << ",";
        if (cfg.noise_enabled)
          os << full.counts[k] << "," << fmt_num(full.normalized.values[k]);
        else
          os << "," << fmt_num(fr.exact.values[k]);
        os << "," << int(sampled[k]) << "\n";
      }
    }
  }
  {
    std::ofstream os = open("spectra.csv");
    os << "b_over_j0,realization,omega,re,im,magnitude\n";
    for (const FieldResult& fr : result.fields)
      for (std::size_t r = 0; r < fr.realizations.size(); ++r)
        for (const auto& [k, c] : fr.realizations[r].spectrum.coeffs) {
          if (k <= 0) continue;
          os << fmt_num(fr.b_stop / j0) << "," << r << ","
             << fmt_num(fr.realizations[r].spectrum.grid.omega(k)) << "," << fmt_num(c.real())
             << "," << fmt_num(c.imag()) << "," << fmt_num(std::abs(c)) << "\n";
        }
  }
  {
    std::ofstream os = open("peaks.csv");
    os << "b_over_j0,omega_over_j0,magnitude,flag,realization,line,counted\n";
    for (const FieldResult& fr : result.fields)
      for (std::size_t r = 0; r < fr.realizations.size(); ++r)
        for (const ClassifiedPeak& p : fr.realizations[r].peaks)
          os << fmt_num(fr.b_stop / j0) << "," << fmt_num(p.peak.omega / j0) << ","
             << fmt_num(p.peak.magnitude) << "," << to_string(p.flag) << "," << r << ","
             << (p.line >= 0 ? p.line + 1 : 0) << "," << (p.counted ? 1 : 0) << "\n";
  }
  {
    std::ofstream os = open("stats.csv");
    os << "b_over_j0,line,adiabatic,found,mean,std,realizations,failed\n";
    for (const FieldResult& fr : result.fields)
      for (std::size_t l = 0; l < fr.stats.size(); ++l) {
        const LineStat& s = fr.stats[l];
        os << fmt_num(fr.b_stop / j0) << "," << l + 1 << "," << fmt_num(s.adiabatic / j0) << ","
           << s.found << "," << (s.found ? fmt_num(s.mean / j0) : "") << ","
           << (s.found > 1 ? fmt_num(s.stddev / j0) : "") << "," << fr.realizations.size()
           << "," << fr.failed << "\n";
      }
  }
  {
    std::ofstream os = open("manifest.txt");
    const std::string canon = cfg.canonical();
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(canon)));
    os << "# run record\n"
       << "version = " << kVersion << "\n"
       << "config_hash = " << hash << "\n"
       << "seed = " << cfg.seed << "\n"
       << "eigen = " << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "."
       << EIGEN_MINOR_VERSION << "\n"
       << "compiler = " << __VERSION__ << "\n"
       << "tau_ramp_abs = " << exact_num(cfg.tau_ramp_abs()) << "\n"
       << "tau_d_abs = " << exact_num(cfg.tau_d_abs()) << "\n"
       << canon;
  }
}

std::vector<SpectrumRow> run_spectrum_sweep(const ModelParams& params,
                                            std::span<const double> b_grid, int n_levels) {
  params.validate();
  if (n_levels < 1) throw InvalidArgument("spectrum sweep: n_levels must be >= 1");
  std::vector<SpectrumRow> rows;
  for (double b : b_grid) {
    if (!(b >= 0.0)) throw InvalidArgument("spectrum sweep: fields must be >= 0");
    const EigenSystem eig = diagonalize(build_hamiltonian(params, b));
    for (int k = 0; k < std::min(n_levels, eig.dim()); ++k)
      rows.push_back(SpectrumRow{b, k, eig.energies[k], eig.parities[k]});
  }
  return rows;
}

void write_spectrum_csv(std::ostream& os, const std::vector<SpectrumRow>& rows) {
  os << "b_over_j0,level,energy,parity\n";
  for (const SpectrumRow& r : rows)
    os << fmt_num(r.b) << "," << r.level << "," << fmt_num(r.energy) << "," << r.parity << "\n";
}

SpectrumEstimate dft_baseline(const SensingOperator& op, const Eigen::VectorXd& y) {
  if (y.size() != op.rows()) throw InvalidArgument("dft baseline: sample count mismatch");
  return to_spectrum(op, 0.5 * op.adjoint(y));
}

std::vector<BaselineResult> run_dft_baseline(const ProtocolConfig& cfg) {
  cfg.validate();
  std::vector<BaselineResult> out;
  if (cfg.b_stops.empty()) return out;
  const ModelParams model = cfg.effective_model();
  const std::vector<double> stops = absolute_stops(cfg);
  const std::vector<SpinState> states = evolve_ramp_to_fields(model, stops, integrator_for(cfg));
  const RecoveryConfig rc = recovery_for(cfg);
  const FrequencyGrid grid = cfg.grid();
  const std::vector<int> idx = select_sample_indices(cfg.n_step, rc.m_step, rc.seed, rc.pattern);
  const SensingOperator op(grid, idx);
  for (std::size_t f = 0; f < cfg.b_stops.size(); ++f) {
    BaselineResult br;
    br.b_stop = stops[f];
    const EigenSystem eig = diagonalize(build_hamiltonian(model, br.b_stop));
    const std::vector<double> exc = eig.coupled_excitations();
    br.lines.assign(exc.begin(), exc.begin() + std::min<std::size_t>(exc.size(), cfg.n_lines));
    const TimeSeries exact = occupancy_timeseries(states[f], eig, highest_probable_index(states[f]),
                                                  cfg.n_step, grid.dt_meas);
    Eigen::VectorXd y(static_cast<Eigen::Index>(idx.size()));
    if (cfg.noise_enabled) {
      const NoiseConfig nc = noise_for(cfg, f);
      y = simulate_counts(apply_decoherence(exact, nc.tau_d), nc, 0, idx).normalized.values;
    } else {
      for (std::size_t j = 0; j < idx.size(); ++j) y[j] = exact.values[idx[j]];
    }
    br.partial = dft_baseline(op, centered(y, rc.subtract_mean));
    br.full = dft(exact);
    out.push_back(std::move(br));
  }
  return out;
}

void write_baseline_csv(std::ostream& os, const std::vector<BaselineResult>& rows, double j0) {
  os << "b_over_j0,source,omega,re,im,magnitude\n";
  auto emit = [&](double b, const char* src, const SpectrumEstimate& s) {
    for (const auto& [k, c] : s.coeffs) {
      if (k <= 0) continue;
      os << fmt_num(b) << "," << src << "," << fmt_num(s.grid.omega(k)) << "," << fmt_num(c.real())
         << "," << fmt_num(c.imag()) << "," << fmt_num(std::abs(c)) << "\n";
    }
  };
  for (const BaselineResult& r : rows) {
    emit(r.b_stop / j0, "partial_adjoint", r.partial);
    emit(r.b_stop / j0, "full_dft", r.full);
  }
}

}  // namespace drspec
