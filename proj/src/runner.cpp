#include "fewatom/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fewatom/analysis.hpp"
#include "fewatom/kinetics.hpp"

namespace fewatom {

using json = nlohmann::ordered_json;

const Table& Dataset::table(std::string_view name) const {
  for (const auto& t : tables) {
    if (t.name == name) return t;
  }
  throw std::out_of_range("no table '" + std::string(name) + "'");
}

const FitResult& Dataset::fit(std::string_view name) const {
  for (const auto& f : fits) {
    if (f.name == name) return f.fit;
  }
  throw std::out_of_range("no fit '" + std::string(name) + "'");
}

const PhotonTrace& Dataset::trace(std::string_view name) const {
  for (const auto& t : traces) {
    if (t.name == name) return t.trace;
  }
  throw std::out_of_range("no trace '" + std::string(name) + "'");
}

std::uint64_t run_seed(std::uint64_t master, std::uint64_t point, std::uint64_t run) {
  return derive_seed(master, (point << 32) | run);
}

SimulationPhysics physics_from_config(const ExperimentConfig& cfg) {
  const AtomParams atom = AtomParams::cesium();
  SimulationPhysics ph;
  ph.trap = make_trap(cfg.beam, atom, cfg.raman_suppression, cfg.averaging_factor);
  ph.trap.peak_scattering_rate = cfg.peak_scattering_rate;
  ph.dipole_lifetime = cfg.dipole_lifetime;
  ph.mot = cfg.mot;
  ph.hyperfine = HyperfineRates::from(effective_relaxation_rates(ph.trap));
  ph.detector = cfg.detector;
  ph.burst = cfg.burst;
  ph.burst.window = cfg.protocol.detection_window;
  ph.loading = cfg.loading;
  const double e_kin = constants::boltzmann * cfg.mot_temperature;
  ph.geometric_efficiency =
      geometric_loading_efficiency(e_kin, ph.trap.depth_u0, cfg.beam.waist, cfg.mot_radius);
  ph.contamination = cfg.contamination;
  return ph;
}

std::vector<int> atoms_per_run_cycle(const ExperimentConfig& cfg) {
  std::vector<int> out;
  int total = 0;
  int n = cfg.min_atoms_per_run;
  while (total < cfg.atoms_per_point) {
    const int take = std::min(n, cfg.atoms_per_point - total);
    out.push_back(take);
    total += take;
    n = n >= cfg.max_atoms_per_run ? cfg.min_atoms_per_run : n + 1;
  }
  return out;
}

namespace {

Sequence monitor_block(const ProtocolParams& p) { return build_protocol(ProtocolKind::MotMonitor, p); }

} // namespace

Sequence lifetime_sequence(const ProtocolParams& p, double hold) {
  Sequence seq = concatenate(monitor_block(p), build_protocol(ProtocolKind::Transfer, p));
  seq = concatenate(seq, build_protocol(ProtocolKind::Recapture, p), hold);
  seq.label = "lifetime";
  seq.parameters["hold_s"] = hold;
  return seq;
}

Sequence relaxation_sequence(const ProtocolParams& p, Hyperfine prepared, double hold) {
  Sequence load;
  load.label = "dipole_on";
  load.events = {{0.0, Channel::Dipole, true}};
  load.duration = p.overlap;
  Sequence seq = concatenate(monitor_block(p), load);
  seq = concatenate(seq, build_protocol(prepared == Hyperfine::F3 ? ProtocolKind::PrepareF3
                                                                  : ProtocolKind::PrepareF4,
                                        p));
  seq = concatenate(seq, build_protocol(ProtocolKind::Detect, p), hold);
  seq.label = prepared == Hyperfine::F3 ? "relaxation_f3" : "relaxation_f4";
  seq.parameters["hold_s"] = hold;
  return seq;
}

namespace {

struct Job {
  std::uint64_t point = 0;
  std::uint64_t run = 0;
  int atoms = 0;
  double hold = 0.0;
  int arm = 0;
};

/// Runs f(job, rng) for every job, results stored by job index; the worker
/// count changes only the wall time.
template <class R, class F>
std::vector<R> run_jobs(const std::vector<Job>& jobs, std::uint64_t master, int workers, F f) {
  std::vector<R> out(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        Rng rng(run_seed(master, jobs[i].point, jobs[i].run));
        out[i] = f(jobs[i], rng);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(jobs.size());
        return;
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(workers, static_cast<int>(jobs.size())));
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_threads; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::vector<RunSeed> seeds_of(const std::vector<Job>& jobs, std::uint64_t master) {
  std::vector<RunSeed> out;
  out.reserve(jobs.size());
  for (const auto& j : jobs) out.push_back({j.point, j.run, run_seed(master, j.point, j.run)});
  return out;
}

struct Survival {
  std::int64_t survived = 0;
  std::int64_t total = 0;
};

Table survival_table(const std::vector<double>& schedule, const std::vector<Job>& jobs,
                     const std::vector<Survival>& results, std::vector<SurvivalPoint>& points) {
  Table t{"lifetime", {"t_hold_s", "survived", "total", "fraction"}, {}};
  points.assign(schedule.size(), {});
  for (std::size_t p = 0; p < schedule.size(); ++p) points[p].t_hold = schedule[p];
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    points[jobs[i].point].survived += results[i].survived;
    points[jobs[i].point].total += results[i].total;
  }
  for (const auto& pt : points) {
    const double frac = pt.total > 0 ? static_cast<double>(pt.survived) / static_cast<double>(pt.total) : 0.0;
    t.rows.push_back({pt.t_hold, static_cast<double>(pt.survived), static_cast<double>(pt.total), frac});
  }
  return t;
}

void run_lifetime(const ExperimentConfig& cfg, Dataset& ds, bool magnetic) {
  const SimulationPhysics physics = physics_from_config(cfg);
  const auto cycle = atoms_per_run_cycle(cfg);
  std::vector<Job> jobs;
  for (std::size_t p = 0; p < cfg.schedule.size(); ++p) {
    for (std::size_t r = 0; r < cycle.size(); ++r) jobs.push_back({p, r, cycle[r], cfg.schedule[p], 0});
  }
  std::vector<Survival> results;
  if (magnetic) {
    results = run_jobs<Survival>(jobs, cfg.master_seed, cfg.workers, [&](const Job& j, Rng& rng) {
      return Survival{magnetic_trap_survival(j.atoms, cfg.dipole_lifetime, j.hold, rng), j.atoms};
    });
  } else {
    results = run_jobs<Survival>(jobs, cfg.master_seed, cfg.workers, [&](const Job& j, Rng& rng) {
      const RunRecord rec = simulate_sequence(lifetime_sequence(cfg.protocol, j.hold), j.atoms, physics, rng);
      return Survival{rec.recaptured_n, rec.prepared_n};
    });
  }
  std::vector<SurvivalPoint> points;
  Table t = survival_table(cfg.schedule, jobs, results, points);
  if (magnetic) t.name = "magnetic_lifetime";
  ds.tables.push_back(std::move(t));
  ds.fits.push_back({magnetic ? "magnetic_survival" : "survival",
                     fit_exponential_survival(points, magnetic)});
  ds.seeds = seeds_of(jobs, cfg.master_seed);
}

void run_transfer(const ExperimentConfig& cfg, Dataset& ds) {
  const SimulationPhysics physics = physics_from_config(cfg);
  std::vector<Job> jobs;
  std::uint64_t p = 0;
  for (int n = cfg.min_atoms_per_run; n <= cfg.max_atoms_per_run; ++n, ++p) {
    for (int r = 0; r < cfg.repetitions; ++r) {
      jobs.push_back({p, static_cast<std::uint64_t>(r), n, cfg.hold_s, 0});
    }
  }
  const Sequence seq = lifetime_sequence(cfg.protocol, cfg.hold_s);
  const auto results = run_jobs<Survival>(jobs, cfg.master_seed, cfg.workers, [&](const Job& j, Rng& rng) {
    const RunRecord rec = simulate_sequence(seq, j.atoms, physics, rng);
    return Survival{rec.recaptured_n, rec.prepared_n};
  });
  Table t{"transfer_efficiency", {"n_atoms", "prepared", "recaptured", "fraction"}, {}};
  const std::size_t n_points = static_cast<std::size_t>(cfg.max_atoms_per_run - cfg.min_atoms_per_run + 1);
  std::vector<Survival> sums(n_points);
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    sums[jobs[i].point].survived += results[i].survived;
    sums[jobs[i].point].total += results[i].total;
  }
  Survival all;
  for (std::size_t k = 0; k < n_points; ++k) {
    const auto& s = sums[k];
    all.survived += s.survived;
    all.total += s.total;
    t.rows.push_back({static_cast<double>(cfg.min_atoms_per_run + static_cast<int>(k)),
                      static_cast<double>(s.total), static_cast<double>(s.survived),
                      s.total ? static_cast<double>(s.survived) / static_cast<double>(s.total) : 0.0});
  }
  ds.tables.push_back(std::move(t));
  ds.tables.push_back({"transfer_summary",
                       {"hold_s", "prepared", "recaptured", "fraction"},
                       {{cfg.hold_s, static_cast<double>(all.total), static_cast<double>(all.survived),
                         all.total ? static_cast<double>(all.survived) / static_cast<double>(all.total) : 0.0}}});
  ds.seeds = seeds_of(jobs, cfg.master_seed);
}

struct Detection {
  int atoms = 0;
  int f4 = 0;
  std::int64_t counts = 0;
  int map_k = 0;
  std::optional<PhotonTrace> trace;
};

void run_relaxation(const ExperimentConfig& cfg, Dataset& ds) {
  const SimulationPhysics physics = physics_from_config(cfg);
  const std::size_t n_t = cfg.schedule.size();
  std::vector<Job> jobs;
  for (int arm = 0; arm < 2; ++arm) {
    for (std::size_t p = 0; p < n_t; ++p) {
      for (int r = 0; r < cfg.runs_per_point; ++r) {
        jobs.push_back({arm * n_t + p, static_cast<std::uint64_t>(r), cfg.atoms_per_run,
                        cfg.schedule[p], arm});
      }
    }
  }
  const auto results = run_jobs<Detection>(jobs, cfg.master_seed, cfg.workers, [&](const Job& j, Rng& rng) {
    const Hyperfine prep = j.arm == 0 ? Hyperfine::F3 : Hyperfine::F4;
    const RunRecord rec = simulate_sequence(relaxation_sequence(cfg.protocol, prep, j.hold), j.atoms, physics, rng);
    return Detection{rec.detected_atoms, rec.detected_f4, rec.detection_counts,
                     rec.classification ? rec.classification->map_k : 0, std::nullopt};
  });

  for (int arm = 0; arm < 2; ++arm) {
    std::vector<std::int64_t> counts(n_t, 0), atoms(n_t, 0), runs(n_t, 0), map_sum(n_t, 0);
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (jobs[i].arm != arm) continue;
      const std::size_t p = jobs[i].point - static_cast<std::size_t>(arm) * n_t;
      counts[p] += results[i].counts;
      atoms[p] += results[i].atoms;
      runs[p] += 1;
      map_sum[p] += results[i].map_k;
    }
    Table t{arm == 0 ? "relaxation_f3" : "relaxation_f4", {"t_s", "p4", "n", "map_p4"}, {}};
    std::vector<RelaxationPoint> points;
    for (std::size_t p = 0; p < n_t; ++p) {
      double p4 = 0.0;
      double map_p4 = 0.0;
      if (atoms[p] > 0) {
        // Photon-number estimator: background-subtracted counts per atom
        // over the mean burst size, clipped to a probability.
        const double signal = static_cast<double>(counts[p]) -
                              static_cast<double>(runs[p]) * physics.burst.background_photons_per_window;
        p4 = std::clamp(signal / (physics.burst.mean_photons_per_atom * static_cast<double>(atoms[p])), 0.0, 1.0);
        map_p4 = static_cast<double>(map_sum[p]) / static_cast<double>(atoms[p]);
        points.push_back({cfg.schedule[p], p4, atoms[p]});
      }
      t.rows.push_back({cfg.schedule[p], p4, static_cast<double>(atoms[p]), map_p4});
    }
    ds.tables.push_back(std::move(t));
    const Hyperfine prep = arm == 0 ? Hyperfine::F3 : Hyperfine::F4;
    ds.fits.push_back({arm == 0 ? "relaxation_f3" : "relaxation_f4", fit_relaxation(points, prep)});
  }
  const RelaxationRates model = effective_relaxation_rates(physics.trap);
  ds.tables.push_back({"relaxation_model",
                       {"lambda_per_s", "r_4to3_per_s", "r_3to4_per_s", "p4_eq", "tau_s"},
                       {{model.lambda_total, model.r_4to3, model.r_3to4, model.p4_equilibrium,
                         1.0 / model.lambda_total}}});
  ds.seeds = seeds_of(jobs, cfg.master_seed);
}

void run_detection_demo(const ExperimentConfig& cfg, Dataset& ds) {
  const SimulationPhysics physics = physics_from_config(cfg);
  std::vector<Job> jobs;
  for (int arm = 0; arm < 2; ++arm) {
    for (int r = 0; r < cfg.runs_per_point; ++r) {
      jobs.push_back({static_cast<std::uint64_t>(arm), static_cast<std::uint64_t>(r), cfg.atoms_per_run,
                      cfg.hold_s, arm});
    }
  }
  const auto results = run_jobs<Detection>(jobs, cfg.master_seed, cfg.workers, [&](const Job& j, Rng& rng) {
    const Hyperfine prep = j.arm == 0 ? Hyperfine::F3 : Hyperfine::F4;
    const RunRecord rec = simulate_sequence(relaxation_sequence(cfg.protocol, prep, j.hold), j.atoms,
                                            physics, rng, {j.run == 0});
    Detection d{rec.detected_atoms, rec.detected_f4, rec.detection_counts,
                rec.classification ? rec.classification->map_k : 0, std::nullopt};
    for (const auto& pt : rec.traces) {
      if (pt.phase == "detection") d.trace = pt.trace;
    }
    return d;
  });
  Table t{"detection_demo", {"prepared_f", "run", "atoms", "true_f4", "window_counts", "map_k"}, {}};
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& d = results[i];
    t.rows.push_back({jobs[i].arm == 0 ? 3.0 : 4.0, static_cast<double>(jobs[i].run),
                      static_cast<double>(d.atoms), static_cast<double>(d.f4),
                      static_cast<double>(d.counts), static_cast<double>(d.map_k)});
    if (d.trace) {
      PhotonTrace trace = *d.trace;
      trace.t0 = 0.0; // relative to detection onset
      ds.traces.push_back({jobs[i].arm == 0 ? "detection_f3" : "detection_f4", std::move(trace)});
    }
  }
  ds.tables.push_back(std::move(t));
  ds.seeds = seeds_of(jobs, cfg.master_seed);
}

void run_mot_monitor(const ExperimentConfig& cfg, Dataset& ds) {
  const SimulationPhysics physics = physics_from_config(cfg);
  ProtocolParams p = cfg.protocol;
  // MOT, one transfer/hold/recapture cycle, then MOT again until the end.
  const double hold = std::min(cfg.hold_s, cfg.monitor_total_s / 4.0);
  p.monitor_duration = cfg.monitor_total_s / 3.0;
  Sequence seq = lifetime_sequence(p, hold);
  seq.duration = std::max(seq.duration, cfg.monitor_total_s);
  seq.label = "mot_monitor";

  const Job job{0, 0, cfg.atoms_per_run, hold, 0};
  const auto results = run_jobs<RunRecord>({job}, cfg.master_seed, 1, [&](const Job& j, Rng& rng) {
    return simulate_sequence(seq, j.atoms, physics, rng, {true});
  });
  const RunRecord& rec = results.front();
  const PhotonTrace& trace = rec.traces.front().trace;
  ds.traces.push_back({"mot_fluorescence", trace});

  Table truth{"mot_atom_number", {"time_s", "n_atoms"}, {}};
  for (const auto& e : rec.atom_number.events) truth.rows.push_back({e.time, static_cast<double>(e.value)});
  ds.tables.push_back(std::move(truth));

  std::optional<double> penalty;
  if (cfg.step_penalty > 0.0) penalty = cfg.step_penalty;
  const Segmentation seg = infer_atom_numbers(detect_steps(trace, penalty), cfg.detector);
  Table segs{"mot_segments", {"begin_s", "end_s", "level_per_s", "n_atoms", "ambiguous"}, {}};
  for (std::size_t s = 0; s < seg.segment_count(); ++s) {
    segs.rows.push_back({trace.bin_start(seg.begin(s)), trace.bin_start(seg.end(s)), seg.levels[s],
                         static_cast<double>(seg.inferred_n[s]), seg.ambiguous[s] ? 1.0 : 0.0});
  }
  ds.tables.push_back(std::move(segs));
  ds.seeds = seeds_of({job}, cfg.master_seed);
}

} // namespace

Dataset run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.kind = cfg.kind;
  ds.master_seed = cfg.master_seed;
  ds.config_echo = serialize_config(cfg, false);
  switch (cfg.kind) {
    case ExperimentKind::Lifetime: run_lifetime(cfg, ds, false); break;
    case ExperimentKind::MagneticLifetime: run_lifetime(cfg, ds, true); break;
    case ExperimentKind::TransferEfficiency: run_transfer(cfg, ds); break;
    case ExperimentKind::Relaxation: run_relaxation(cfg, ds); break;
    case ExperimentKind::DetectionDemo: run_detection_demo(cfg, ds); break;
    case ExperimentKind::MotMonitor: run_mot_monitor(cfg, ds); break;
  }
  return ds;
}

namespace {

json fit_to_json(const FitResult& f) {
  json j;
  j["model"] = f.model;
  j["names"] = f.names;
  j["values"] = std::vector<double>(f.values.data(), f.values.data() + f.values.size());
  j["errors"] = std::vector<double>(f.errors.data(), f.errors.data() + f.errors.size());
  std::vector<double> cov;
  for (Eigen::Index r = 0; r < f.covariance.rows(); ++r) {
    for (Eigen::Index c = 0; c < f.covariance.cols(); ++c) cov.push_back(f.covariance(r, c));
  }
  j["covariance"] = cov;
  j["log_likelihood"] = f.log_likelihood;
  j["n_points"] = f.n_points;
  return j;
}

FitResult fit_from_json(const json& j) {
  FitResult f;
  f.model = j.at("model").get<std::string>();
  f.names = j.at("names").get<std::vector<std::string>>();
  const auto n = static_cast<Eigen::Index>(f.names.size());
  const auto values = j.at("values").get<std::vector<double>>();
  const auto errors = j.at("errors").get<std::vector<double>>();
  const auto cov = j.at("covariance").get<std::vector<double>>();
  if (values.size() != f.names.size() || errors.size() != f.names.size() ||
      cov.size() != f.names.size() * f.names.size()) {
    throw DataError("fit record has inconsistent sizes");
  }
  f.values = Eigen::Map<const Eigen::VectorXd>(values.data(), n);
  f.errors = Eigen::Map<const Eigen::VectorXd>(errors.data(), n);
  f.covariance = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      cov.data(), n, n);
  f.log_likelihood = j.at("log_likelihood").get<double>();
  f.n_points = j.at("n_points").get<std::size_t>();
  return f;
}

std::string fits_csv(const Dataset& ds) {
  std::string out = "fit,parameter,value,error\n";
  for (const auto& nf : ds.fits) {
    for (std::size_t i = 0; i < nf.fit.names.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      out += nf.name + ',' + nf.fit.names[i] + ',' + format_shortest(nf.fit.values[k]) + ',' +
             format_shortest(nf.fit.errors[k]) + '\n';
    }
  }
  return out;
}

std::string seeds_csv(const Dataset& ds) {
  std::string out = "point,run,seed\n";
  for (const auto& s : ds.seeds) {
    out += std::to_string(s.point) + ',' + std::to_string(s.run) + ',' + std::to_string(s.seed) + '\n';
  }
  return out;
}

} // namespace

std::string dataset_to_json(const Dataset& ds) {
  json j;
  j["experiment"] = std::string(experiment_name(ds.kind));
  j["master_seed"] = ds.master_seed;
  j["config"] = ds.config_echo;
  json tables = json::object();
  for (const auto& t : ds.tables) tables[t.name] = {{"header", t.header}, {"rows", t.rows}};
  j["tables"] = tables;
  json fits = json::object();
  for (const auto& f : ds.fits) fits[f.name] = fit_to_json(f.fit);
  j["fits"] = fits;
  json traces = json::object();
  for (const auto& t : ds.traces) {
    traces[t.name] = {{"t0", t.trace.t0}, {"bin_width", t.trace.bin_width}, {"counts", t.trace.counts}};
  }
  j["traces"] = traces;
  json seeds = json::array();
  for (const auto& s : ds.seeds) seeds.push_back({s.point, s.run, s.seed});
  j["seeds"] = seeds;
  return j.dump(2) + '\n';
}

Dataset dataset_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    Dataset ds;
    ds.kind = parse_experiment_kind(j.at("experiment").get<std::string>());
    ds.master_seed = j.at("master_seed").get<std::uint64_t>();
    ds.config_echo = j.at("config").get<std::string>();
    for (const auto& [name, t] : j.at("tables").items()) {
      ds.tables.push_back({name, t.at("header").get<std::vector<std::string>>(),
                           t.at("rows").get<std::vector<std::vector<double>>>()});
    }
    for (const auto& [name, f] : j.at("fits").items()) ds.fits.push_back({name, fit_from_json(f)});
    for (const auto& [name, t] : j.at("traces").items()) {
      ds.traces.push_back({name, PhotonTrace{t.at("t0").get<double>(), t.at("bin_width").get<double>(),
                                             t.at("counts").get<std::vector<std::int64_t>>()}});
    }
    for (const auto& s : j.at("seeds")) {
      ds.seeds.push_back({s.at(0).get<std::uint64_t>(), s.at(1).get<std::uint64_t>(),
                          s.at(2).get<std::uint64_t>()});
    }
    return ds;
  } catch (const json::exception& e) {
    throw DataError(std::string("dataset JSON: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("dataset JSON: ") + e.what());
  }
}

std::vector<std::filesystem::path> export_dataset(const Dataset& ds, const std::filesystem::path& dir,
                                                  OutputFormat format) {
  std::vector<std::pair<std::filesystem::path, std::string>> files;
  if (format != OutputFormat::Json) {
    for (const auto& t : ds.tables) files.emplace_back(dir / (t.name + ".csv"), table_to_csv(t));
    if (!ds.fits.empty()) files.emplace_back(dir / "fits.csv", fits_csv(ds));
    for (const auto& t : ds.traces) {
      std::ostringstream s;
      write_trace_csv(s, t.trace);
      files.emplace_back(dir / ("trace_" + t.name + ".csv"), s.str());
    }
    files.emplace_back(dir / "seeds.csv", seeds_csv(ds));
    files.emplace_back(dir / "config.ini", ds.config_echo);
  }
  if (format != OutputFormat::Csv) files.emplace_back(dir / "dataset.json", dataset_to_json(ds));

  std::vector<std::filesystem::path> written;
  for (const auto& [path, content] : files) {
    write_file_atomic(path, content);
    written.push_back(path);
  }
  return written;
}

} // namespace fewatom
