#include <doctest.h>

#include <filesystem>
#include <numeric>

#include "fewatom/io.hpp"
#include "fewatom/runner.hpp"

using namespace fewatom;

namespace {

ExperimentConfig small(ExperimentKind kind) {
  ExperimentConfig cfg;
  cfg.kind = kind;
  cfg.schedule = default_schedule(kind);
  cfg.atoms_per_point = 60;
  cfg.repetitions = 50;
  cfg.runs_per_point = 10;
  cfg.monitor_total_s = 10.0;
  cfg.master_seed = 2024;
  return cfg;
}

const ExperimentKind kKinds[] = {ExperimentKind::MotMonitor, ExperimentKind::Lifetime,
                                 ExperimentKind::MagneticLifetime, ExperimentKind::TransferEfficiency,
                                 ExperimentKind::DetectionDemo, ExperimentKind::Relaxation};

} // namespace

TEST_CASE("run seeds and atom cycles") {
  CHECK(run_seed(1, 0, 0) != run_seed(1, 0, 1));
  CHECK(run_seed(1, 1, 0) != run_seed(1, 0, 1));
  CHECK(run_seed(1, 3, 4) == derive_seed(1, (3ULL << 32) | 4));
  ExperimentConfig cfg;
  const auto cycle = atoms_per_run_cycle(cfg);
  CHECK(std::accumulate(cycle.begin(), cycle.end(), 0) == 400);
  CHECK(cycle.front() == 1);
  CHECK(cycle[6] == 7);
  CHECK(cycle[7] == 1);
  cfg.atoms_per_point = 10;
  CHECK(atoms_per_run_cycle(cfg) == std::vector<int>{1, 2, 3, 4});
}

TEST_CASE("every experiment is deterministic and independent of worker count") {
  for (auto kind : kKinds) {
    CAPTURE(experiment_name(kind));
    ExperimentConfig cfg = small(kind);
    const Dataset one = run_experiment(cfg);
    cfg.workers = 4;
    const Dataset four = run_experiment(cfg);
    CHECK(dataset_to_json(one) == dataset_to_json(four));
    CHECK_FALSE(one.seeds.empty());
    cfg.master_seed += 1;
    CHECK(dataset_to_json(run_experiment(cfg)) != dataset_to_json(one));
  }
}

TEST_CASE("lifetime dataset") {
  const Dataset ds = run_experiment(small(ExperimentKind::Lifetime));
  const Table& t = ds.table("lifetime");
  CHECK(t.header == std::vector<std::string>{"t_hold_s", "survived", "total", "fraction"});
  CHECK(t.rows.size() == 7);
  for (const auto& r : t.rows) {
    CHECK(r[1] >= 0);
    CHECK(r[1] <= r[2]);
    CHECK(r[3] == doctest::Approx(r[1] / r[2]));
  }
  CHECK(ds.fit("survival").value("tau") > 0.0);
  CHECK(ds.seeds.size() == 7 * atoms_per_run_cycle(small(ExperimentKind::Lifetime)).size());
  CHECK(parse_config(ds.config_echo).master_seed == 2024);
  // the echo alone reproduces the dataset
  CHECK(dataset_to_json(run_experiment(parse_config(ds.config_echo))) == dataset_to_json(ds));
  CHECK_THROWS_AS(ds.table("nope"), std::out_of_range);
}

TEST_CASE("export, re-import and byte-identical reruns") {
  const auto root = std::filesystem::temp_directory_path() / "fewatom_runner_test";
  std::filesystem::remove_all(root);
  for (auto kind : kKinds) {
    CAPTURE(experiment_name(kind));
    const Dataset ds = run_experiment(small(kind));
    const auto a = export_dataset(ds, root / "a", OutputFormat::Both);
    const auto b = export_dataset(run_experiment(small(kind)), root / "b", OutputFormat::Both);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(read_file(a[i]) == read_file(b[i]));
      const std::string text = read_file(a[i]);
      CHECK(text.find('\r') == std::string::npos);
    }
    for (const auto& t : ds.tables) {
      CHECK(table_from_csv(read_file(root / "a" / (t.name + ".csv")), t.name) == t);
    }
    const Dataset back = dataset_from_json(read_file(root / "a" / "dataset.json"));
    CHECK(dataset_to_json(back) == dataset_to_json(ds));
    CHECK(back.seeds == ds.seeds);
    std::filesystem::remove_all(root);
  }
  const Dataset ds = run_experiment(small(ExperimentKind::Lifetime));
  const auto only_json = export_dataset(ds, root / "j", OutputFormat::Json);
  CHECK(only_json.size() == 1);
  const auto only_csv = export_dataset(ds, root / "c", OutputFormat::Csv);
  CHECK(std::none_of(only_csv.begin(), only_csv.end(), [](const auto& p) { return p.extension() == ".json"; }));
  std::filesystem::remove_all(root);
  CHECK_THROWS_AS(dataset_from_json("{\"experiment\": 3}"), DataError);
}

TEST_CASE("relaxation dataset holds both arms") {
  const Dataset ds = run_experiment(small(ExperimentKind::Relaxation));
  const Table& f3 = ds.table("relaxation_f3");
  const Table& f4 = ds.table("relaxation_f4");
  CHECK(f3.header == std::vector<std::string>{"t_s", "p4", "n", "map_p4"});
  CHECK(f3.rows.size() == 8);
  CHECK(f4.rows.front()[1] > f3.rows.front()[1]);
  CHECK(ds.table("relaxation_model").rows[0][0] == doctest::Approx(190.0 / 8.0 / 90.0));
  CHECK(ds.fits.size() == 2);
}
