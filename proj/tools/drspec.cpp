#include "drspec/pipeline.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

using namespace drspec;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
  int require(const std::string& name) const {
    const int c = column(name);
    if (c < 0) throw UsageError("missing column '" + name + "'");
    return c;
  }
};

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Csv read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path.string());
  Csv csv;
  std::string line;
  if (!std::getline(in, line)) throw UsageError(path.string() + " is empty");
  csv.header = split_row(line);
  while (std::getline(in, line))
    if (!line.empty()) csv.rows.push_back(split_row(line));
  return csv;
}

double to_double(const std::string& s) {
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw UsageError("bad number '" + s + "' in CSV");
  }
}

std::ofstream open_out(const std::filesystem::path& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  std::ofstream os(dir / name);
  if (!os) throw UsageError("cannot write " + (dir / name).string());
  return os;
}

std::vector<double> field_lines(const ProtocolConfig& cfg, double b) {
  const EigenSystem eig = diagonalize(build_hamiltonian(cfg.effective_model(), b * cfg.model.j0));
  std::vector<double> exc = eig.coupled_excitations();
  exc.resize(std::min<std::size_t>(exc.size(), cfg.n_lines));
  return exc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diabatic-ramp spectroscopy of the infinite-range transverse-field Ising model"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed (protocol.seed)");
  app.add_option("--out", out_dir, "output directory (protocol.output_dir)");
  app.add_option("--threads", threads, "worker threads (protocol.threads)")->check(CLI::PositiveNumber);
  app.add_option("--set", overrides, "override a config key: section.key=value")->take_all();

  auto* spectrum = app.add_subcommand("spectrum", "exact diagonalization sweep");
  double s_min = 0.0, s_max = 2.0, s_step = 0.01;
  int s_levels = 10;
  bool s_critical = false;
  spectrum->add_option("--b-min", s_min, "first field / j0");
  spectrum->add_option("--b-max", s_max, "last field / j0");
  spectrum->add_option("--b-step", s_step, "field spacing / j0")->check(CLI::PositiveNumber);
  spectrum->add_option("--levels", s_levels, "lowest levels per field")->check(CLI::PositiveNumber);
  spectrum->add_flag("--critical", s_critical, "also report the critical field");

  auto* ramp = app.add_subcommand("ramp", "ramp trajectory and instantaneous populations");
  double r_stop = 0.0;
  int r_samples = 200, r_levels = 4;
  ramp->add_option("--b-stop", r_stop, "stopping field / j0")->required();
  ramp->add_option("--samples", r_samples, "recorded points along the ramp")->check(CLI::PositiveNumber);
  ramp->add_option("--levels", r_levels, "coupled levels to track")->check(CLI::PositiveNumber);

  auto* measure = app.add_subcommand("measure", "exact, decohered and noisy occupancy series");
  double m_stop = 0.0;
  std::uint64_t m_real = 0;
  measure->add_option("--b-stop", m_stop, "stopping field / j0")->required();
  measure->add_option("--realization", m_real, "noise realization index");

  auto* recover = app.add_subcommand("recover", "spectrum of a series file (cs or dft)");
  std::string v_input, v_method = "cs", v_column = "p_simulated";
  double v_stop = -1.0;
  std::uint64_t v_cv_seed = 0;
  recover->add_option("--input", v_input, "series CSV with t and value columns")->required()->check(CLI::ExistingFile);
  recover->add_option("--method", v_method, "cs or dft")->check(CLI::IsMember({"cs", "dft"}));
  recover->add_option("--column", v_column, "value column");
  recover->add_option("--b-stop", v_stop, "field / j0 selecting rows and reference lines");
  recover->add_option("--cv-seed", v_cv_seed, "cross-validation split seed");

  auto* protocol = app.add_subcommand("protocol", "end-to-end protocol over all stopping fields");
  bool p_baseline = false;
  protocol->add_flag("--dft-baseline", p_baseline, "also write the partial-DFT baseline spectra");

  auto* stats = app.add_subcommand("stats", "aggregate peaks.csv into per-line statistics");
  std::string t_input;
  stats->add_option("--input", t_input, "directory holding lines.csv and peaks.csv")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    ProtocolConfig cfg;
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    for (const std::string& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
      set_config_value(cfg, o.substr(0, eq), o.substr(eq + 1));
    }
    if (app.count("--seed")) cfg.seed = seed;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (threads > 0) cfg.threads = threads;
    const double j0 = cfg.model.j0;

    if (*spectrum) {
      if (s_max < s_min) throw UsageError("--b-max must not be below --b-min");
      std::vector<double> grid;
      const int n = static_cast<int>(std::floor((s_max - s_min) / s_step + 1e-9));
      for (int i = 0; i <= n; ++i) grid.push_back((s_min + i * s_step) * j0);
      auto os = open_out(cfg.output_dir, "spectrum.csv");
      write_spectrum_csv(os, run_spectrum_sweep(cfg.model, grid, s_levels));
      if (s_critical) {
        const GapMinimum g = critical_field(cfg.model);
        std::cout << "b_crit_over_j0 = " << fmt_num(g.b_crit / j0)
                  << "\ngap_over_j0 = " << fmt_num(g.gap / j0) << "\n";
      }
    } else if (*ramp) {
      cfg.validate();
      const ModelParams model = cfg.effective_model();
      const RampSchedule sched = RampSchedule::to_field(model.b0, model.tau_ramp, r_stop * j0);
      IntegratorConfig ic = cfg.integrator;
      ic.dt /= j0;
      const double every = sched.t_stop / r_samples;
      double next = 0.0;
      auto os = open_out(cfg.output_dir, "ramp.csv");
      os << "t,b_over_j0";
      for (int k = 0; k < r_levels; ++k) os << ",pop_" << k;
      os << ",pop_rest\n";
      auto record = [&](double t, const SpinState& s) {
        const double b = sched.field(t);
        const EigenSystem eig = diagonalize(build_hamiltonian(model, b));
        std::vector<int> ks = eig.coupled_indices();
        ks.resize(std::min<std::size_t>(ks.size(), r_levels));
        const std::vector<double> pops = instantaneous_populations(s, eig, ks);
        double sum = 0.0;
        os << fmt_num(t) << "," << fmt_num(b / j0);
        for (double p : pops) {
          os << "," << fmt_num(p);
          sum += p;
        }
        os << "," << fmt_num(std::max(0.0, 1.0 - sum)) << "\n";
      };
      const SpinState initial = initial_ground_state(model);
      record(0.0, initial);
      next = every;
      const SpinState final_state = evolve_ramp(model, initial, sched, ic, [&](double t, const SpinState& s) {
        if (t + 1e-12 >= next || t >= sched.t_stop - 1e-12) {
          record(t, s);
          while (next <= t + 1e-12) next += every;
        }
      });
      auto ps = open_out(cfg.output_dir, "product_probs.csv");
      ps << "m,probability\n";
      const Eigen::VectorXd probs = product_state_probs(final_state);
      for (int i = 0; i < probs.size(); ++i)
        ps << fmt_num(i - 0.5 * cfg.model.n_part) << "," << fmt_num(probs[i]) << "\n";
      std::cout << "m_star = " << fmt_num(highest_probable_index(final_state) - 0.5 * cfg.model.n_part)
                << "\n";
    } else if (*measure) {
      ProtocolConfig one = cfg;
      one.b_stops = {m_stop};
      one.validate();
      const ModelParams model = one.effective_model();
      IntegratorConfig ic = one.integrator;
      ic.dt /= j0;
      const SpinState state = evolve_ramp_to_fields(model, one.b_stops, ic).front();
      const EigenSystem eig = diagonalize(build_hamiltonian(model, m_stop * j0));
      const TimeSeries exact =
          occupancy_timeseries(state, eig, highest_probable_index(state), one.n_step, one.grid().dt_meas);
      const TimeSeries signal =
          one.noise_enabled ? apply_decoherence(exact, one.tau_d_abs()) : exact;
      NoiseConfig nc = one.noise;
      nc.tau_d = one.tau_d_abs();
      nc.seed = derive_seed(one.seed, 2, 0);
      const SimulatedSeries sim = simulate_counts(signal, nc, m_real);
      auto os = open_out(one.output_dir, "series.csv");
      os << "t,p_exact,p_signal,counts,p_simulated\n";
      for (int k = 0; k < exact.size(); ++k)
        os << fmt_num(exact.t[k]) << "," << fmt_num(exact.values[k]) << "," << fmt_num(signal.values[k])
           << "," << sim.counts[k] << "," << fmt_num(sim.normalized.values[k]) << "\n";
    } else if (*recover) {
      const Csv csv = read_csv(v_input);
      const int ct = csv.require("t"), cv = csv.require(v_column);
      const int cb = csv.column("b_over_j0"), cs = csv.column("sampled");
      std::vector<double> t, v;
      std::vector<char> sampled;
      for (const auto& row : csv.rows) {
        if (cb >= 0 && v_stop >= 0.0 && std::abs(to_double(row.at(cb)) - v_stop) > 1e-9) continue;
        t.push_back(to_double(row.at(ct)));
        v.push_back(row.at(cv).empty() ? 0.0 : to_double(row.at(cv)));
        sampled.push_back(cs >= 0 ? row.at(cs) == "1" : 1);
      }
      if (t.size() < 4) throw UsageError("series needs at least 4 rows for the selected field");
      FrequencyGrid grid{static_cast<int>(t.size()), t[1] - t[0]};
      grid.validate();
      std::vector<int> idx;
      if (cs >= 0) {
        for (std::size_t k = 0; k < sampled.size(); ++k)
          if (sampled[k]) idx.push_back(static_cast<int>(k));
      } else {
        RecoveryConfig rc = cfg.recovery;
        rc.n_step = grid.n_step;
        idx = select_sample_indices(grid.n_step, rc.m_step, derive_seed(cfg.seed, 1), rc.pattern);
      }
      Eigen::VectorXd y(static_cast<Eigen::Index>(idx.size()));
      for (std::size_t j = 0; j < idx.size(); ++j) y[j] = v[idx[j]];
      if (cfg.recovery.subtract_mean) y.array() -= y.mean();
      const SensingOperator op(grid, idx);
      SpectrumEstimate est;
      if (v_method == "dft") {
        est = dft_baseline(op, y);
      } else {
        RecoveryConfig rc = cfg.recovery;
        rc.n_step = grid.n_step;
        rc.m_step = static_cast<int>(idx.size());
        const CrossValidation cvr = cross_validate_tau(op, y, rc, v_cv_seed);
        const SparsaResult sr = sparsa_recover(op, y, rc, cvr.tau_abs);
        est = to_spectrum(op, rc.debias ? debias(op, y, sr.coeffs) : sr.coeffs);
        std::cout << "tau_rel = " << fmt_num(cvr.tau_rel) << "\niterations = " << sr.iterations
                  << "\nconverged = " << (sr.converged ? "true" : "false") << "\n";
      }
      auto os = open_out(cfg.output_dir, "recovered.csv");
      os << "omega,re,im,magnitude\n";
      for (const auto& [k, c] : est.coeffs)
        if (k > 0)
          os << fmt_num(grid.omega(k)) << "," << fmt_num(c.real()) << "," << fmt_num(c.imag()) << ","
             << fmt_num(std::abs(c)) << "\n";
      if (v_method == "cs") {
        const std::vector<double> lines =
            v_stop > 0.0 ? field_lines(cfg, v_stop) : std::vector<double>{};
        const auto peaks = classify_peaks(extract_peaks(est, cfg.peak_floor.resolve(est)), lines,
                                          cfg.match_tol * j0, cfg.high_margin * j0);
        auto ps = open_out(cfg.output_dir, "recovered_peaks.csv");
        ps << "b_over_j0,omega_over_j0,magnitude,flag\n";
        for (const ClassifiedPeak& p : peaks)
          ps << (v_stop >= 0.0 ? fmt_num(v_stop) : "") << "," << fmt_num(p.peak.omega / j0) << ","
             << fmt_num(p.peak.magnitude) << "," << (lines.empty() ? "unclassified" : to_string(p.flag))
             << "\n";
      }
    } else if (*protocol) {
      const RunResult result = run_protocol(cfg);
      write_protocol_outputs(cfg, result);
      if (p_baseline) {
        auto os = open_out(cfg.output_dir, "baseline.csv");
        write_baseline_csv(os, run_dft_baseline(cfg), j0);
      }
      for (const FieldResult& fr : result.fields) {
        std::cout << "b/j0 = " << fmt_num(fr.b_stop / j0) << "  m* = "
                  << fmt_num(fr.m_star - 0.5 * cfg.model.n_part) << "  failed = " << fr.failed << "\n";
        for (const LineStat& s : fr.stats)
          std::cout << "  line " << fmt_num(s.adiabatic / j0) << "  found " << s.found << "  mean "
                    << (s.found ? fmt_num(s.mean / j0) : "-") << "  std "
                    << (s.found > 1 ? fmt_num(s.stddev / j0) : "-") << "\n";
      }
    } else if (*stats) {
      const std::filesystem::path dir = t_input;
      const Csv lines_csv = read_csv(dir / "lines.csv");
      const Csv peaks_csv = read_csv(dir / "peaks.csv");
      std::map<std::string, std::vector<double>> lines;
      const int lb = lines_csv.require("b_over_j0"), lo = lines_csv.require("omega_over_j0");
      for (const auto& row : lines_csv.rows) lines[row.at(lb)].push_back(to_double(row.at(lo)));
      const int pb = peaks_csv.require("b_over_j0"), po = peaks_csv.require("omega_over_j0"),
                pr = peaks_csv.require("realization"), pl = peaks_csv.require("line"),
                pc = peaks_csv.require("counted");
      std::map<std::string, std::map<int, std::vector<ClassifiedPeak>>> runs;
      for (const auto& row : peaks_csv.rows) {
        ClassifiedPeak p;
        p.peak.omega = to_double(row.at(po));
        p.line = std::stoi(row.at(pl)) - 1;
        p.counted = row.at(pc) == "1";
        runs[row.at(pb)][std::stoi(row.at(pr))].push_back(p);
      }
      auto os = open_out(cfg.output_dir, "stats.csv");
      os << "b_over_j0,line,adiabatic,found,mean,std\n";
      for (const auto& [b, ls] : lines) {
        std::vector<std::vector<ClassifiedPeak>> all;
        for (auto& [r, ps] : runs[b]) all.push_back(ps);
        const std::vector<LineStat> st = line_statistics(ls, all);
        for (std::size_t l = 0; l < st.size(); ++l) {
          os << b << "," << l + 1 << "," << fmt_num(st[l].adiabatic) << "," << st[l].found << ","
             << (st[l].found ? fmt_num(st[l].mean) : "") << ","
             << (st[l].found > 1 ? fmt_num(st[l].stddev) : "") << "\n";
          std::cout << b << "  " << fmt_num(st[l].adiabatic) << "  found " << st[l].found << "  "
                    << (st[l].found ? fmt_num(st[l].mean) : "-") << " +- "
                    << (st[l].found > 1 ? fmt_num(st[l].stddev) : "-") << "\n";
        }
      }
    }
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
