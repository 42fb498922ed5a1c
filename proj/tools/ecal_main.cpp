#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "ecal/config.hpp"
#include "ecal/pipeline.hpp"
#include "ecal/report_io.hpp"
#include "ecal/simulator.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadArgs = 2;
constexpr int kExitIo = 3;
constexpr int kExitInfeasible = 4;
constexpr int kExitInternal = 5;

struct CommonOptions {
  std::string events_path;
  std::string config_path;
  std::vector<std::string> overrides;
};

ecal::PipelineConfig resolve_config(const CommonOptions& opts) {
  ecal::ConfigMap map;
  if (!opts.config_path.empty()) {
    if (!std::filesystem::exists(opts.config_path)) {
      throw std::ios_base::failure("config file not found: " + opts.config_path);
    }
    map = ecal::load_config_file(opts.config_path);
  }
  for (const auto& entry : opts.overrides) ecal::apply_override(map, entry);
  return ecal::pipeline_config_from(map);
}

std::vector<ecal::Event> load_events(const CommonOptions& opts, const ecal::SensorGeometry& geometry) {
  if (!std::filesystem::exists(opts.events_path)) {
    throw std::ios_base::failure("event file not found: " + opts.events_path);
  }
  return ecal::ingest_events_file(opts.events_path, geometry);
}

// Per-window debug dumps behind --dump-clusters / --dump-candidates.
ecal::WindowObserver make_observer(const std::string& clusters_dir, const std::string& candidates_dir) {
  if (clusters_dir.empty() && candidates_dir.empty()) return {};
  if (!clusters_dir.empty()) std::filesystem::create_directories(clusters_dir);
  if (!candidates_dir.empty()) std::filesystem::create_directories(candidates_dir);
  return [clusters_dir, candidates_dir](const ecal::WindowDebugInfo& info) {
    char name[32];
    std::snprintf(name, sizeof(name), "window_%04d.csv", info.index);
    if (!clusters_dir.empty() && info.clusters) {
      std::ofstream out(std::filesystem::path(clusters_dir) / name);
      out << "event_index,label\n";
      for (std::size_t i = 0; i < info.clusters->labels.size(); ++i) out << i << ',' << info.clusters->labels[i] << '\n';
    }
    if (!candidates_dir.empty() && info.candidates) {
      std::ofstream out(std::filesystem::path(candidates_dir) / name);
      out << "u_px,v_px,radius_px,cluster_id,selected\n";
      for (std::size_t i = 0; i < info.candidates->size(); ++i) {
        const ecal::Candidate& c = (*info.candidates)[i];
        bool selected = false;
        if (info.selection && info.selection->status == ecal::SelectStatus::Ok) {
          selected = std::find(info.selection->indices.begin(), info.selection->indices.end(), i) !=
                     info.selection->indices.end();
        }
        out << c.center.x() << ',' << c.center.y() << ',' << c.radius << ',' << c.cluster_id << ',' << (selected ? 1 : 0)
            << '\n';
      }
    }
  };
}

int cmd_calibrate(const CommonOptions& common, const std::string& out_path, const std::string& residuals_csv,
                  const std::string& clusters_dir, const std::string& candidates_dir) {
  const ecal::PipelineConfig config = resolve_config(common);
  const auto events = load_events(common, config.geometry);
  const auto observer = make_observer(clusters_dir, candidates_dir);

  ecal::CalibrationRun run;
  try {
    run = ecal::run_calibration(events, config, observer);
  } catch (const ecal::InfeasibleError& err) {
    std::cerr << "ecal: " << err.what() << '\n';
    std::cerr << "  windows built: " << err.stats().windows_built << ", detections: " << err.stats().successes << " / "
              << err.stats().possible << '\n';
    return kExitInfeasible;
  }

  ecal::write_report_file(out_path, run.report, run.stats, ecal::config_echo(config));
  if (!residuals_csv.empty()) ecal::write_residuals_csv(residuals_csv, run.report);

  std::cout << std::fixed << std::setprecision(4);
  std::cout << "reprojection RMS: " << run.report.zeta_r << " px\n";
  std::cout << "success rate:     " << 100.0 * run.stats.success_rate() << " % (" << run.stats.successes << "/"
            << run.stats.possible << ")\n";
  std::cout << "fx fy u0 v0:      " << run.report.intrinsics.fx << "  " << run.report.intrinsics.fy << "  "
            << run.report.intrinsics.u0 << "  " << run.report.intrinsics.v0 << '\n';
  std::cout << "report written:   " << out_path << '\n';
  for (const auto& w : run.report.warnings) std::cerr << "warning: " << w << '\n';
  return kExitOk;
}

int cmd_detect(const CommonOptions& common, const std::string& out_path, const std::string& clusters_dir,
               const std::string& candidates_dir) {
  const ecal::PipelineConfig config = resolve_config(common);
  const auto events = load_events(common, config.geometry);
  const auto run = ecal::run_detection_only(events, config, make_observer(clusters_dir, candidates_dir));

  std::ofstream out(out_path);
  if (!out) throw std::ios_base::failure("cannot write detections: " + out_path);
  out << "t_ref_us,point,u_px,v_px\n";
  out << std::setprecision(12);
  for (const auto& d : run.detections) {
    for (std::size_t i = 0; i < d.points.size(); ++i) {
      out << d.t_ref_us << ',' << i << ',' << d.points[i].x() << ',' << d.points[i].y() << '\n';
    }
  }
  std::cout << "detections: " << run.detections.size() << " / " << run.stats.possible << " ("
            << 100.0 * run.stats.success_rate() << " %)\n";
  std::cout << "failures:   no clusters " << run.stats.failed_no_clusters << ", too few candidates "
            << run.stats.failed_too_few_candidates << ", selection " << run.stats.failed_selection << ", ordering "
            << run.stats.failed_ordering << '\n';
  return kExitOk;
}

struct SimulateArgs {
  std::string out_path;
  std::string gt_path;
  std::uint64_t seed = 1;
  int windows = 60;
  double jitter = 0.0;
  double outlier_fraction = 0.0;
  double clutter_rate = 0.0;
  double event_rate = 9.0;
  double distance_mm = 380.0;
  int rows = 4, cols = 11;
  double spacing = 24.0;
  int width = 346, height = 260;
  double fx = 350.0, fy = 352.0, u0 = 160.0, v0 = 120.0;
  double k1 = 0.0, k2 = 0.0, k3 = 0.0, p1 = 0.0, p2 = 0.0;
};

int cmd_simulate(const SimulateArgs& args) {
  const ecal::PatternSpec spec{args.rows, args.cols, args.spacing};
  const ecal::Intrinsics k{args.fx, args.fy, args.u0, args.v0};
  const ecal::Distortion psi{args.k1, args.k2, args.k3, args.p1, args.p2};
  const ecal::SensorGeometry geometry{args.width, args.height};
  ecal::NoiseModel noise;
  noise.center_jitter_sigma = args.jitter;
  noise.outlier_fraction = args.outlier_fraction;
  noise.background_clutter_rate = args.clutter_rate;
  noise.event_rate_per_edge = args.event_rate;
  noise.seed = args.seed;
  ecal::SimOptions options;
  options.num_windows = args.windows;

  const auto traj = ecal::default_sweep_trajectory(spec, args.windows * options.window_step_us, args.seed, args.distance_mm);
  const auto sim = ecal::simulate(k, psi, spec, traj, noise, geometry, options);

  ecal::write_events_file(args.out_path, sim.events);
  if (!args.gt_path.empty()) ecal::write_ground_truth_file(args.gt_path, sim);

  int invisible = 0;
  for (const auto& w : sim.windows) invisible += w.visible ? 0 : 1;
  std::cout << "events:  " << sim.events.size() << " -> " << args.out_path << '\n';
  std::cout << "windows: " << sim.windows.size() << " (" << invisible << " invisible)\n";
  if (invisible > 0) std::cerr << "warning: " << invisible << " windows have the pattern out of frame\n";
  return kExitOk;
}

int cmd_report(const std::string& report_path, const std::string& out_path, const std::string& residuals_csv,
               const std::string& gt_path, const std::string& pose_csv) {
  if (!std::filesystem::exists(report_path)) throw std::ios_base::failure("report file not found: " + report_path);
  const ecal::LoadedReport loaded = ecal::read_report_file(report_path);

  std::string text = ecal::render_report_text(loaded);
  std::int64_t step = 33000;
  if (auto it = loaded.config.find("window.step_us"); it != loaded.config.end()) step = std::stoll(it->second);
  if (!gt_path.empty()) {
    const auto truth = ecal::read_ground_truth_file(gt_path);
    const auto rows = ecal::pose_errors(loaded.report, truth, step);
    text += "\n" + ecal::render_pose_errors(rows);
    if (!pose_csv.empty()) ecal::write_pose_errors_csv(pose_csv, rows);
  }
  if (!residuals_csv.empty()) ecal::write_residuals_csv(residuals_csv, loaded.report);

  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::ios_base::failure("cannot write text report: " + out_path);
    out << text;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-camera intrinsic calibration from asymmetric circle grids"};
  app.require_subcommand(1);
  app.footer("Configuration keys (defaults):\n" + ecal::config_reference());

  CommonOptions common;
  std::string out_path, residuals_csv, clusters_dir, candidates_dir;

  CLI::App* calibrate = app.add_subcommand("calibrate", "Run the full pipeline and write a calibration report");
  calibrate->add_option("--events", common.events_path, "event file (.csv text or .bin)")->required();
  calibrate->add_option("--config", common.config_path, "key=value config file");
  calibrate->add_option("--override", common.overrides, "config override key=value (repeatable)");
  calibrate->add_option("--out", out_path, "output report (JSON)")->required();
  calibrate->add_option("--residuals-csv", residuals_csv, "per-point residual dump");
  calibrate->add_option("--dump-clusters", clusters_dir, "per-window cluster label CSVs into this directory");
  calibrate->add_option("--dump-candidates", candidates_dir, "per-window candidate CSVs into this directory");

  CLI::App* detect = app.add_subcommand("detect", "Run the pipeline through grid detection only");
  detect->add_option("--events", common.events_path, "event file")->required();
  detect->add_option("--config", common.config_path, "key=value config file");
  detect->add_option("--override", common.overrides, "config override key=value (repeatable)");
  detect->add_option("--out", out_path, "output detections (CSV)")->required();
  detect->add_option("--dump-clusters", clusters_dir, "per-window cluster label CSVs into this directory");
  detect->add_option("--dump-candidates", candidates_dir, "per-window candidate CSVs into this directory");

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand("simulate", "Generate a synthetic event stream with ground truth");
  simulate->add_option("--out", sim.out_path, "output event file (.csv or .bin)")->required();
  simulate->add_option("--gt", sim.gt_path, "ground-truth sidecar (JSON)");
  simulate->add_option("--seed", sim.seed, "RNG seed");
  simulate->add_option("--windows", sim.windows, "number of 33 ms windows");
  simulate->add_option("--jitter", sim.jitter, "event position jitter sigma, px");
  simulate->add_option("--outlier-fraction", sim.outlier_fraction, "share of grossly displaced events");
  simulate->add_option("--clutter", sim.clutter_rate, "background clutter clumps per window");
  simulate->add_option("--rate", sim.event_rate, "events per px of rim circumference per window");
  simulate->add_option("--distance", sim.distance_mm, "nominal camera-pattern distance, mm");
  simulate->add_option("--rows", sim.rows, "pattern rows");
  simulate->add_option("--cols", sim.cols, "pattern columns");
  simulate->add_option("--spacing", sim.spacing, "diagonal spacing, mm");
  simulate->add_option("--width", sim.width, "sensor width");
  simulate->add_option("--height", sim.height, "sensor height");
  simulate->add_option("--fx", sim.fx, "true focal length x");
  simulate->add_option("--fy", sim.fy, "true focal length y");
  simulate->add_option("--u0", sim.u0, "true principal point x");
  simulate->add_option("--v0", sim.v0, "true principal point y");
  simulate->add_option("--k1", sim.k1, "true radial k1");
  simulate->add_option("--k2", sim.k2, "true radial k2");
  simulate->add_option("--k3", sim.k3, "true radial k3");
  simulate->add_option("--p1", sim.p1, "true tangential p1");
  simulate->add_option("--p2", sim.p2, "true tangential p2");

  std::string report_path, gt_path, pose_csv;
  CLI::App* report = app.add_subcommand("report", "Render a report file to text and plot-ready CSVs");
  report->add_option("--report", report_path, "report JSON from calibrate")->required();
  report->add_option("--out", out_path, "text output path (default: stdout)");
  report->add_option("--residuals-csv", residuals_csv, "per-point residual dump");
  report->add_option("--gt", gt_path, "ground-truth sidecar for pose comparison");
  report->add_option("--pose-csv", pose_csv, "pose error CSV (needs --gt)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadArgs;
  }

  try {
    if (calibrate->parsed()) return cmd_calibrate(common, out_path, residuals_csv, clusters_dir, candidates_dir);
    if (detect->parsed()) return cmd_detect(common, out_path, clusters_dir, candidates_dir);
    if (simulate->parsed()) return cmd_simulate(sim);
    if (report->parsed()) return cmd_report(report_path, out_path, residuals_csv, gt_path, pose_csv);
  } catch (const std::ios_base::failure& e) {
    std::cerr << "ecal: " << e.what() << '\n';
    return kExitIo;
  } catch (const ecal::IngestError& e) {
    std::cerr << "ecal: " << e.what() << '\n';
    return kExitIo;
  } catch (const ecal::CalibError& e) {
    std::cerr << "ecal: " << e.what() << '\n';
    return kExitInternal;
  } catch (const std::runtime_error& e) {
    std::cerr << "ecal: " << e.what() << '\n';
    return kExitBadArgs;
  }
  return kExitBadArgs;
}
