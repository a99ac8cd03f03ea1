#include "fewatom/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fewatom/analysis.hpp"
#include "fewatom/config.hpp"
#include "fewatom/fitting.hpp"
#include "fewatom/io.hpp"
#include "fewatom/runner.hpp"
#include "fewatom/sequencer.hpp"

namespace fewatom {

namespace {

using json = nlohmann::ordered_json;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> format;
};

OutputFormat parse_format(const std::string& s) {
  if (s == "csv") return OutputFormat::Csv;
  if (s == "json") return OutputFormat::Json;
  return OutputFormat::Both;
}

/// Prints a result as CSV (or JSON with --format json) and mirrors it into
/// --out when given.
void emit(const Globals& g, const std::string& stem, const std::string& csv, const json& j,
          std::ostream& out) {
  const bool as_json = g.format && *g.format == "json";
  const std::string text = as_json ? j.dump(2) + '\n' : csv;
  out << text;
  if (g.out_dir) {
    write_file_atomic(std::filesystem::path(*g.out_dir) / (stem + (as_json ? ".json" : ".csv")), text);
  }
}

int cmd_simulate(const Globals& g, const std::string& config_path, std::optional<int> workers,
                 std::ostream& out) {
  ExperimentConfig cfg = load_config(config_path);
  if (g.seed) cfg.master_seed = *g.seed;
  if (workers) cfg.workers = *workers;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) cfg.output_dir = env;
  if (g.out_dir) cfg.output_dir = *g.out_dir;
  if (g.format) cfg.format = parse_format(*g.format);
  cfg.validate();

  const Dataset ds = run_experiment(cfg);
  const auto written = export_dataset(ds, cfg.output_dir, cfg.format);
  out << "experiment " << experiment_name(ds.kind) << ", master_seed " << ds.master_seed << ", "
      << ds.seeds.size() << " runs\n";
  for (const auto& nf : ds.fits) {
    for (std::size_t i = 0; i < nf.fit.names.size(); ++i) {
      out << "  " << nf.name << '.' << nf.fit.names[i] << " = "
          << format_shortest(nf.fit.values[static_cast<Eigen::Index>(i)]) << " +/- "
          << format_shortest(nf.fit.errors[static_cast<Eigen::Index>(i)]) << '\n';
    }
  }
  for (const auto& p : written) out << "wrote " << p.string() << '\n';
  return kExitOk;
}

int cmd_analyze(const Globals& g, const std::string& path, std::optional<double> penalty,
                const DetectorModel& det, std::ostream& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  const PhotonTrace trace = read_trace_csv(in);
  const Segmentation seg = infer_atom_numbers(detect_steps(trace, penalty), det);
  Table t{"segments", {"begin_s", "end_s", "level_per_s", "n_atoms", "ambiguous"}, {}};
  json rows = json::array();
  for (std::size_t s = 0; s < seg.segment_count(); ++s) {
    const double b = trace.bin_start(seg.begin(s));
    const double e = trace.bin_start(seg.end(s));
    t.rows.push_back({b, e, seg.levels[s], static_cast<double>(seg.inferred_n[s]),
                      seg.ambiguous[s] ? 1.0 : 0.0});
    rows.push_back({{"begin_s", b}, {"end_s", e}, {"level_per_s", seg.levels[s]},
                    {"n_atoms", seg.inferred_n[s]}, {"ambiguous", static_cast<bool>(seg.ambiguous[s])}});
  }
  emit(g, "segments", table_to_csv(t), json{{"segments", rows}}, out);
  return kExitOk;
}

int cmd_classify(const Globals& g, std::int64_t counts, int atoms, const BurstModel& model,
                 std::ostream& out) {
  if (counts < 0) throw DataError("counts must be non-negative");
  if (atoms < 0) throw DataError("--atoms must be non-negative");
  const BurstPosterior post = classify_burst(counts, atoms, model);
  std::string csv = "k,posterior,map\n";
  for (std::size_t k = 0; k < post.posterior.size(); ++k) {
    csv += std::to_string(k) + ',' + format_shortest(post.posterior[k]) + ',' +
           (static_cast<int>(k) == post.map_k ? "1" : "0") + '\n';
  }
  emit(g, "classification", csv,
       json{{"counts", counts}, {"atoms", atoms}, {"map_k", post.map_k}, {"posterior", post.posterior}},
       out);
  return kExitOk;
}

int cmd_fit(const Globals& g, const std::string& path, const std::string& model, bool offset_free,
            const std::string& initial, std::ostream& out) {
  const Table table = table_from_csv(read_file(path), "data");
  auto col = [&](std::string_view name) {
    try {
      return table.column(name);
    } catch (const std::exception&) {
      throw DataError("column '" + std::string(name) + "' missing from " + path);
    }
  };
  FitResult fit;
  if (model == "survival") {
    const auto ct = col("t_hold_s");
    const auto cs = col("survived");
    const auto cn = col("total");
    std::vector<SurvivalPoint> pts;
    for (const auto& r : table.rows) {
      pts.push_back({r[ct], static_cast<std::int64_t>(r[cs]), static_cast<std::int64_t>(r[cn])});
    }
    fit = fit_exponential_survival(pts, offset_free);
  } else {
    const auto ct = col("t_s");
    const auto cp = col("p4");
    const auto cn = col("n");
    std::vector<RelaxationPoint> pts;
    for (const auto& r : table.rows) pts.push_back({r[ct], r[cp], static_cast<std::int64_t>(r[cn])});
    fit = fit_relaxation(pts, initial == "f3" ? Hyperfine::F3 : Hyperfine::F4);
  }
  std::string csv = "parameter,value,error\n";
  json params = json::object();
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    csv += fit.names[i] + ',' + format_shortest(fit.values[k]) + ',' + format_shortest(fit.errors[k]) + '\n';
    params[fit.names[i]] = {{"value", fit.values[k]}, {"error", fit.errors[k]}};
  }
  emit(g, "fit", csv,
       json{{"model", fit.model}, {"parameters", params}, {"log_likelihood", fit.log_likelihood},
            {"n_points", fit.n_points}},
       out);
  return kExitOk;
}

int cmd_validate(const Globals& g, const std::string& path, double min_gap, std::ostream& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  const Sequence seq = read_sequence_csv(in);
  const auto violations = validate_sequence(seq, min_gap);
  std::string csv = "violation,start_s,end_s,message\n";
  json list = json::array();
  for (const auto& v : violations) {
    csv += std::string(violation_code(v.kind)) + ',' + format_shortest(v.time) + ',' +
           format_shortest(v.end) + ',' + v.message + '\n';
    list.push_back({{"violation", violation_code(v.kind)}, {"start_s", v.time}, {"end_s", v.end},
                    {"message", v.message}});
  }
  emit(g, "violations", csv, json{{"events", seq.events.size()}, {"violations", list}}, out);
  return violations.empty() ? kExitOk : kExitData;
}

} // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-atom trap simulator and analysis chain", "fewatom"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string format;
  auto* seed_opt = app.add_option("--seed", seed, "Master seed (overrides the config)");
  auto* out_opt = app.add_option("--out", out_dir, "Output directory");
  auto* fmt_opt = app.add_option("--format", format, "csv, json or both")
                      ->check(CLI::IsMember({"csv", "json", "both"}));

  auto* sim = app.add_subcommand("simulate", "Run an experiment from an INI config");
  std::string config_path;
  std::optional<int> workers;
  sim->add_option("config", config_path, "Config file")->required();
  sim->add_option("--workers", workers, "Worker threads")->check(CLI::Range(1, 256));

  auto* ana = app.add_subcommand("analyze", "Step detection and atom counting on a trace CSV");
  std::string trace_path;
  std::optional<double> penalty;
  DetectorModel det;
  ana->add_option("trace", trace_path, "Trace CSV (bin_start_s,counts)")->required();
  ana->add_option("--penalty", penalty, "Per-change-point penalty (default 1.5 ln n)")
      ->check(CLI::NonNegativeNumber);
  ana->add_option("--per-atom-rate", det.per_atom_rate, "Counts/s per atom")->check(CLI::PositiveNumber);
  ana->add_option("--background-rate", det.background_rate, "Background counts/s")
      ->check(CLI::NonNegativeNumber);

  auto* cls = app.add_subcommand("classify", "Posterior over F=4 atoms for one detection window");
  std::int64_t counts = 0;
  int atoms = 1;
  BurstModel burst;
  cls->add_option("counts", counts, "Photon counts in the window")->required();
  cls->add_option("--atoms", atoms, "Atoms in the trap")->required();
  cls->add_option("--mean-photons", burst.mean_photons_per_atom, "Mean photons per F=4 atom")
      ->check(CLI::NonNegativeNumber);
  cls->add_option("--background", burst.background_photons_per_window, "Background photons per window")
      ->check(CLI::NonNegativeNumber);

  auto* fit = app.add_subcommand("fit", "Maximum-likelihood fit of a per-point CSV");
  std::string data_path;
  std::string model;
  bool offset_free = false;
  std::string initial = "f4";
  fit->add_option("data", data_path, "CSV with t_hold_s,survived,total or t_s,p4,n")->required();
  fit->add_option("--model", model, "survival or relaxation")
      ->required()
      ->check(CLI::IsMember({"survival", "relaxation"}));
  fit->add_flag("--offset-free", offset_free, "Fit the survival amplitude too");
  fit->add_option("--initial", initial, "Prepared state for relaxation (f3 or f4)")
      ->check(CLI::IsMember({"f3", "f4"}));

  auto* val = app.add_subcommand("validate-seq", "Check a switching sequence CSV");
  std::string seq_path;
  double min_gap = 50e-6;
  val->add_option("sequence", seq_path, "Sequence CSV (time_s,channel,state)")->required();
  val->add_option("--min-gap", min_gap, "Minimum Pockels-cell gap in s")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (*seed_opt) g.seed = seed;
  if (*out_opt) g.out_dir = out_dir;
  if (*fmt_opt) g.format = format;

  try {
    if (*sim) return cmd_simulate(g, config_path, workers, out);
    if (*ana) return cmd_analyze(g, trace_path, penalty, det, out);
    if (*cls) return cmd_classify(g, counts, atoms, burst, out);
    if (*fit) return cmd_fit(g, data_path, model, offset_free, initial, out);
    if (*val) return cmd_validate(g, seq_path, min_gap, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (...) {
    err << "error: unknown failure\n";
    return kExitData;
  }
  return kExitUsage;
}

} // namespace fewatom
