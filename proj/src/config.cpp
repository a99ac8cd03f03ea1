#include "fewatom/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <set>
#include <sstream>

#include "fewatom/io.hpp"

namespace fewatom {

std::string_view experiment_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::MotMonitor: return "mot_monitor";
    case ExperimentKind::Lifetime: return "lifetime";
    case ExperimentKind::MagneticLifetime: return "magnetic_lifetime";
    case ExperimentKind::TransferEfficiency: return "transfer_efficiency";
    case ExperimentKind::DetectionDemo: return "detection_demo";
    case ExperimentKind::Relaxation: return "relaxation";
  }
  return "?";
}

ExperimentKind parse_experiment_kind(std::string_view name) {
  for (auto k : {ExperimentKind::MotMonitor, ExperimentKind::Lifetime,
                 ExperimentKind::MagneticLifetime, ExperimentKind::TransferEfficiency,
                 ExperimentKind::DetectionDemo, ExperimentKind::Relaxation}) {
    if (experiment_name(k) == name) return k;
  }
  throw ConfigError("unknown experiment kind '" + std::string(name) + "'");
}

std::vector<double> default_schedule(ExperimentKind kind) {
  if (kind == ExperimentKind::Relaxation) return {0.05, 1, 2, 3, 4.5, 6, 9, 12};
  return {1, 5, 10, 20, 40, 60, 80};
}

namespace {

struct Field {
  std::string section;
  std::string key;
  std::function<void(std::string_view)> set;
  std::function<std::string()> get;
};

Field real(std::string section, std::string key, double& ref) {
  return {std::move(section), key,
          [&ref, key](std::string_view v) { ref = parse_double(v, key); },
          [&ref] { return format_shortest(ref); }};
}

Field integer(std::string section, std::string key, int& ref) {
  return {std::move(section), key,
          [&ref, key](std::string_view v) { ref = static_cast<int>(parse_integer(v, key)); },
          [&ref] { return std::to_string(ref); }};
}

std::vector<Field> fields(ExperimentConfig& c) {
  std::vector<Field> f;
  f.push_back({"experiment", "kind",
               [&c](std::string_view v) { c.kind = parse_experiment_kind(v); },
               [&c] { return std::string(experiment_name(c.kind)); }});
  f.push_back({"experiment", "master_seed",
               [&c](std::string_view v) {
                 std::uint64_t seed = 0;
                 const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), seed);
                 if (ec != std::errc() || end != v.data() + v.size()) {
                   throw DataError("master_seed must be an unsigned 64-bit integer, got '" +
                                   std::string(v) + "'");
                 }
                 c.master_seed = seed;
               },
               [&c] { return std::to_string(c.master_seed); }});
  f.push_back({"experiment", "schedule_s",
               [&c](std::string_view v) {
                 c.schedule.clear();
                 for (const auto& item : split(v, ',')) c.schedule.push_back(parse_double(item, "schedule_s"));
               },
               [&c] {
                 std::string out;
                 for (std::size_t i = 0; i < c.schedule.size(); ++i) {
                   if (i) out += ", ";
                   out += format_shortest(c.schedule[i]);
                 }
                 return out;
               }});
  f.push_back(integer("experiment", "atoms_per_point", c.atoms_per_point));
  f.push_back(integer("experiment", "min_atoms_per_run", c.min_atoms_per_run));
  f.push_back(integer("experiment", "max_atoms_per_run", c.max_atoms_per_run));
  f.push_back(integer("experiment", "runs_per_point", c.runs_per_point));
  f.push_back(integer("experiment", "atoms_per_run", c.atoms_per_run));
  f.push_back(integer("experiment", "repetitions", c.repetitions));
  f.push_back(real("experiment", "hold_s", c.hold_s));
  f.push_back(real("experiment", "monitor_total_s", c.monitor_total_s));
  f.push_back(real("experiment", "step_penalty", c.step_penalty));
  f.push_back(integer("experiment", "workers", c.workers));
  f.push_back({"experiment", "output_dir", [&c](std::string_view v) { c.output_dir = std::string(v); },
               [&c] { return c.output_dir; }});
  f.push_back({"experiment", "format",
               [&c](std::string_view v) {
                 if (v == "csv") c.format = OutputFormat::Csv;
                 else if (v == "json") c.format = OutputFormat::Json;
                 else if (v == "both") c.format = OutputFormat::Both;
                 else throw DataError("format must be csv, json or both");
               },
               [&c] {
                 switch (c.format) {
                   case OutputFormat::Csv: return std::string("csv");
                   case OutputFormat::Json: return std::string("json");
                   case OutputFormat::Both: break;
                 }
                 return std::string("both");
               }});

  f.push_back(real("beam", "power_w", c.beam.power));
  f.push_back(real("beam", "waist_m", c.beam.waist));
  f.push_back(real("beam", "wavelength_m", c.beam.wavelength));

  f.push_back(real("trap", "raman_suppression", c.raman_suppression));
  f.push_back(real("trap", "averaging_factor", c.averaging_factor));
  f.push_back(real("trap", "peak_scattering_rate_per_s", c.peak_scattering_rate));
  f.push_back(real("trap", "lifetime_s", c.dipole_lifetime));
  f.push_back({"trap", "loading_mode",
               [&c](std::string_view v) {
                 if (v == "deterministic") c.loading = LoadingMode::Deterministic;
                 else if (v == "geometric") c.loading = LoadingMode::Geometric;
                 else throw DataError("loading_mode must be deterministic or geometric");
               },
               [&c] {
                 return std::string(c.loading == LoadingMode::Geometric ? "geometric" : "deterministic");
               }});
  f.push_back(real("trap", "mot_radius_m", c.mot_radius));
  f.push_back(real("trap", "mot_temperature_k", c.mot_temperature));
  f.push_back(real("trap", "field_gradient_g_per_cm", c.field_gradient));
  f.push_back(real("trap", "contamination", c.contamination));

  f.push_back(real("mot", "loading_rate_per_s", c.mot.loading_rate));
  f.push_back(real("mot", "one_body_loss_per_s", c.mot.one_body_loss));
  f.push_back(real("mot", "two_body_pair_rate_per_s", c.mot.two_body_pair_rate));
  f.push_back(integer("mot", "two_body_multiplicity", c.mot.two_body_loss_multiplicity));

  f.push_back(real("detector", "per_atom_rate_per_s", c.detector.per_atom_rate));
  f.push_back(real("detector", "background_rate_per_s", c.detector.background_rate));
  f.push_back(real("detector", "dipole_stray_rate_per_s", c.detector.dipole_stray_rate));
  f.push_back(real("detector", "bin_width_s", c.detector.bin_width));
  f.push_back(real("detector", "overlap_suppression", c.detector.overlap_suppression));

  f.push_back(real("burst", "mean_photons_per_atom", c.burst.mean_photons_per_atom));
  f.push_back(real("burst", "background_photons", c.burst.background_photons_per_window));
  f.push_back(real("burst", "burst_duration_s", c.burst.burst_duration_mean));
  f.push_back(real("burst", "detection_bin_s", c.burst.detection_bin));

  f.push_back(real("sequence", "overlap_s", c.protocol.overlap));
  f.push_back(real("sequence", "prep_delay_s", c.protocol.prep_delay));
  f.push_back(real("sequence", "pockels_gap_s", c.protocol.pockels_gap));
  f.push_back(real("sequence", "detection_window_s", c.protocol.detection_window));
  f.push_back(real("sequence", "monitor_s", c.protocol.monitor_duration));
  return f;
}

void check(bool ok, const std::string& key, const std::string& rule) {
  if (!ok) throw ConfigError("value out of range for '" + key + "': " + rule);
}

} // namespace

void ExperimentConfig::validate() const {
  check(!schedule.empty(), "schedule_s", "must not be empty");
  for (double t : schedule) check(t >= 0.0, "schedule_s", "times must be non-negative");
  if (kind == ExperimentKind::Relaxation || kind == ExperimentKind::DetectionDemo) {
    // detection releases the atoms, so a zero hold would fire before the trap is loaded
    for (double t : schedule) check(t > 0.0, "schedule_s", "relaxation times must be positive");
    check(hold_s > 0.0, "hold_s", "must be > 0 for detection");
  }
  check(atoms_per_point >= 1, "atoms_per_point", "must be >= 1");
  check(min_atoms_per_run >= 1, "min_atoms_per_run", "must be >= 1");
  check(max_atoms_per_run >= min_atoms_per_run, "max_atoms_per_run", "must be >= min_atoms_per_run");
  check(runs_per_point >= 1, "runs_per_point", "must be >= 1");
  check(atoms_per_run >= 1, "atoms_per_run", "must be >= 1");
  check(repetitions >= 1, "repetitions", "must be >= 1");
  check(hold_s >= 0.0, "hold_s", "must be >= 0");
  check(monitor_total_s > 0.0, "monitor_total_s", "must be > 0");
  check(step_penalty >= 0.0, "step_penalty", "must be >= 0");
  check(workers >= 1 && workers <= 256, "workers", "must lie in [1, 256]");
  check(beam.power > 0.0, "power_w", "must be > 0");
  check(beam.waist > 0.0 && beam.waist < 1e-3, "waist_m", "must lie in (0, 1 mm)");
  check(beam.wavelength > 894.6e-9, "wavelength_m", "must be red of the D1 line (> 894.6 nm)");
  check(raman_suppression >= 1.0, "raman_suppression", "must be >= 1");
  check(averaging_factor > 0.0 && averaging_factor <= 1.0, "averaging_factor", "must lie in (0, 1]");
  check(peak_scattering_rate >= 0.0, "peak_scattering_rate_per_s", "must be >= 0");
  check(dipole_lifetime > 0.0, "lifetime_s", "must be > 0");
  check(mot_radius >= 1e-6 && mot_radius <= 100e-6, "mot_radius_m", "must lie in [1e-6, 1e-4]");
  check(mot_temperature >= 0.0, "mot_temperature_k", "must be >= 0");
  check(contamination >= 0.0 && contamination <= 1.0, "contamination", "must lie in [0, 1]");
  check(mot.loading_rate >= 0.0, "loading_rate_per_s", "must be >= 0");
  check(mot.one_body_loss >= 0.0, "one_body_loss_per_s", "must be >= 0");
  check(mot.two_body_pair_rate >= 0.0, "two_body_pair_rate_per_s", "must be >= 0");
  check(mot.two_body_loss_multiplicity == 1 || mot.two_body_loss_multiplicity == 2,
        "two_body_multiplicity", "must be 1 or 2");
  check(detector.per_atom_rate > 0.0, "per_atom_rate_per_s", "must be > 0");
  check(detector.background_rate >= 0.0, "background_rate_per_s", "must be >= 0");
  check(detector.dipole_stray_rate >= 0.0, "dipole_stray_rate_per_s", "must be >= 0");
  check(detector.bin_width > 0.0, "bin_width_s", "must be > 0");
  check(detector.overlap_suppression >= 0.0 && detector.overlap_suppression <= 1.0,
        "overlap_suppression", "must lie in [0, 1]");
  check(burst.mean_photons_per_atom >= 0.0, "mean_photons_per_atom", "must be >= 0");
  check(burst.background_photons_per_window >= 0.0, "background_photons", "must be >= 0");
  check(burst.burst_duration_mean >= 0.0, "burst_duration_s", "must be >= 0");
  check(burst.detection_bin > 0.0, "detection_bin_s", "must be > 0");
  check(protocol.overlap > 0.0, "overlap_s", "must be > 0");
  check(protocol.prep_delay > 0.0, "prep_delay_s", "must be > 0");
  check(protocol.pockels_gap >= 50e-6, "pockels_gap_s", "must be >= 5e-5");
  check(protocol.detection_window > 0.0, "detection_window_s", "must be > 0");
  check(protocol.monitor_duration > 0.0, "monitor_s", "must be > 0");
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  auto registry = fields(cfg);
  std::set<std::pair<std::string, std::string>> seen;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto next = text.find('\n', pos);
    if (next == std::string_view::npos) next = text.size();
    std::string_view line = text.substr(pos, next - pos);
    pos = next + 1;
    ++line_no;
    if (const auto hash = line.find_first_of("#;"); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
      section = std::string(trim(line.substr(1, line.size() - 2)));
      const bool known = std::any_of(registry.begin(), registry.end(),
                                     [&](const Field& f) { return f.section == section; });
      if (!known) throw ConfigError("unknown section [" + section + "]", line_no);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line_no);
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (section.empty()) throw ConfigError("key '" + key + "' outside any section", line_no);
    auto it = std::find_if(registry.begin(), registry.end(),
                           [&](const Field& f) { return f.section == section && f.key == key; });
    if (it == registry.end()) throw ConfigError("unknown key '" + key + "' in [" + section + "]", line_no);
    if (!seen.insert({section, key}).second) throw ConfigError("duplicate key '" + key + "'", line_no);
    try {
      it->set(value);
    } catch (const std::exception& e) {
      throw ConfigError(std::string(e.what()), line_no);
    }
  }
  if (!seen.count({"experiment", "schedule_s"})) cfg.schedule = default_schedule(cfg.kind);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

std::string serialize_config(const ExperimentConfig& cfg, bool execution_keys) {
  ExperimentConfig copy = cfg;
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields(copy)) {
    if (!execution_keys && f.section == "experiment" &&
        (f.key == "workers" || f.key == "output_dir" || f.key == "format")) {
      continue;
    }
    if (f.section != section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get() << '\n';
  }
  return out.str();
}

} // namespace fewatom
