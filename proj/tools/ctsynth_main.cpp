#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "ctsynth/assembly.hpp"
#include "ctsynth/config.hpp"
#include "ctsynth/error.hpp"
#include "ctsynth/fusion.hpp"
#include "ctsynth/mesh.hpp"
#include "ctsynth/metrics.hpp"
#include "ctsynth/prior.hpp"
#include "ctsynth/rng.hpp"
#include "ctsynth/volume.hpp"

namespace fs = std::filesystem;
using namespace ctsynth;

namespace {

// ---------------------------------------------------------------- configuration

const char* kDefaultConfig = R"(# ctsynth defaults
[mesh]
n_points = 10
lambda_low = 1.5
lambda_high = 1.5
delta = 0.6
base_radius = 8
subdivisions = 3
smoothing_iters = 2
random_rot90 = false

[voxelize]
spacing_x = 0.75
spacing_y = 0.75
spacing_z = 1
padding = 2

[fusion]
beta = 0.7
alpha = 1.0
alpha_cutoff = -200
window_level = -600
window_width = 1500
overlap = 9
patch_x = 384
patch_y = 384
patch_z = 18
working_spacing_x = 0.75
working_spacing_y = 0.75
working_spacing_z = 1
ramp_width = 3
style = ggo
generator_cmd =

[prior]
grid_x = 64
grid_y = 64
grid_z = 64
splat_full_masks = false

[metrics]
pho_threshold = -200

[inpaint]
lesions = 3
repeat = 1
)";

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k;
    for (const auto& key : Config::parse_string(kDefaultConfig).keys()) k.insert(key);
    return k;
  }();
  return keys;
}

void reject_unknown_keys(const Config& cfg) {
  for (const auto& key : cfg.keys()) {
    if (!known_keys().count(key)) {
      throw ParamError("unknown config key '" + key + "'");
    }
  }
}

LesionShapeParams shape_from_config(const Config& cfg, bool require_core) {
  LesionShapeParams p;
  if (require_core) {
    p.n_points = cfg.require_int("mesh.n_points");
    p.lambda_range[0] = cfg.require_double("mesh.lambda_low");
    p.lambda_range[1] = cfg.require_double("mesh.lambda_high");
  } else {
    p.n_points = cfg.get_int("mesh.n_points", p.n_points);
    p.lambda_range[0] = cfg.get_double("mesh.lambda_low", p.lambda_range[0]);
    p.lambda_range[1] = cfg.get_double("mesh.lambda_high", p.lambda_range[1]);
  }
  p.delta = cfg.get_double("mesh.delta", p.delta);
  p.base_radius = cfg.get_double("mesh.base_radius", p.base_radius);
  p.sphere_subdivisions = cfg.get_int("mesh.subdivisions", p.sphere_subdivisions);
  p.smoothing_iters = cfg.get_int("mesh.smoothing_iters", p.smoothing_iters);
  p.random_rot90 = cfg.get_bool("mesh.random_rot90", p.random_rot90);
  return p;
}

FusionParams fusion_from_config(const Config& cfg) {
  FusionParams p;
  p.beta = cfg.get_double("fusion.beta", p.beta);
  p.alpha = cfg.get_double("fusion.alpha", p.alpha);
  p.alpha_cutoff_hu = cfg.get_double("fusion.alpha_cutoff", p.alpha_cutoff_hu);
  p.window.level = cfg.get_double("fusion.window_level", p.window.level);
  p.window.width = cfg.get_double("fusion.window_width", p.window.width);
  p.overlap_slices = cfg.get_int("fusion.overlap", p.overlap_slices);
  p.patch_dims[0] = cfg.get_int("fusion.patch_x", p.patch_dims[0]);
  p.patch_dims[1] = cfg.get_int("fusion.patch_y", p.patch_dims[1]);
  p.patch_dims[2] = cfg.get_int("fusion.patch_z", p.patch_dims[2]);
  p.working_spacing[0] = cfg.get_double("fusion.working_spacing_x", p.working_spacing[0]);
  p.working_spacing[1] = cfg.get_double("fusion.working_spacing_y", p.working_spacing[1]);
  p.working_spacing[2] = cfg.get_double("fusion.working_spacing_z", p.working_spacing[2]);
  p.ramp_width_mm = cfg.get_double("fusion.ramp_width", p.ramp_width_mm);
  return p;
}

std::array<double, 3> voxelize_spacing_from_config(const Config& cfg) {
  return {cfg.get_double("voxelize.spacing_x", 0.75),
          cfg.get_double("voxelize.spacing_y", 0.75),
          cfg.get_double("voxelize.spacing_z", 1.0)};
}

PatternStyle style_from_string(const std::string& s) {
  if (s == "ggo") return PatternStyle::GGO;
  if (s == "consolidation") return PatternStyle::CONSOLIDATION;
  throw ParamError("unknown style '" + s + "' (expected ggo or consolidation)");
}

// ---------------------------------------------------------------- parallel helper

void parallel_for(int jobs, std::size_t n, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  const int workers = std::min<std::size_t>(jobs, n);
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------- subcommands

int cmd_synth_mask(const std::string& config_path, const std::string& out_path,
                   const std::string& stl_path, std::uint64_t seed) {
  Config cfg = config_path.empty() ? Config::parse_string("")
                                   : Config::parse_file(config_path);
  reject_unknown_keys(cfg);
  LesionShapeParams shape = shape_from_config(cfg, true);
  shape.rng_seed = seed;
  const auto spacing = voxelize_spacing_from_config(cfg);
  const double padding = cfg.get_double("voxelize.padding", 2.0);

  const TriMesh mesh = synthesize_lesion_mesh(shape);
  const Mask3 mask = voxelize(mesh, spacing, padding);
  save_mhd(mask, out_path);
  if (!stl_path.empty()) write_stl_ascii(mesh, stl_path);
  std::cout << "synth-mask: " << mask.foreground_count() << " foreground voxels -> "
            << out_path << "\n";
  return 0;
}

int cmd_build_prior(const std::string& manifest_path, const std::string& out_path,
                    const Config& cfg) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest: " + manifest_path);

  std::vector<PriorCase> cases;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("manifest line " + std::to_string(lineno) +
                      ": expected <lesion>\\t<lung>");
    }
    const std::string lesion_path = line.substr(0, tab);
    const std::string lung_path = line.substr(tab + 1);
    try {
      cases.push_back({load_mask_mhd(lesion_path), load_mask_mhd(lung_path)});
    } catch (const Error& e) {
      throw DataError("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (cases.empty()) throw ParamError("manifest is empty: " + manifest_path);

  const std::array<int, 3> grid{cfg.get_int("prior.grid_x", 64),
                                cfg.get_int("prior.grid_y", 64),
                                cfg.get_int("prior.grid_z", 64)};
  const SpatialPrior prior =
      build_prior(cases, grid, cfg.get_bool("prior.splat_full_masks", false));
  save_prior(prior, out_path);
  std::cout << "build-prior: " << cases.size() << " cases -> " << out_path << "\n";
  return 0;
}

std::string derived_path(const std::string& path, int index, int repeat) {
  if (repeat <= 1) return path;
  const fs::path p(path);
  fs::path out = p.parent_path() / p.stem();
  out += "_r" + std::to_string(index);
  out += p.extension();
  return out.string();
}

int cmd_inpaint(const std::string& control_path, const std::string& lung_path,
                const std::string& prior_path, const std::string& config_path,
                const std::string& out_volume, const std::string& out_mask, int lesions,
                int repeat, const std::string& style_str, const std::string& generator_cmd,
                std::uint64_t seed, int jobs) {
  Config cfg = config_path.empty() ? Config::parse_string("")
                                   : Config::parse_file(config_path);
  reject_unknown_keys(cfg);

  const HuVolume control = load_hu_mhd(control_path);
  const Mask3 lung = load_mask_mhd(lung_path);
  const SpatialPrior prior = load_prior(prior_path);

  const LesionShapeParams shape = shape_from_config(cfg, false);
  const FusionParams fusion = fusion_from_config(cfg);
  const int k = lesions >= 0 ? lesions : cfg.get_int("inpaint.lesions", 3);
  const int n_repeat = repeat > 0 ? repeat : cfg.get_int("inpaint.repeat", 1);
  const std::string style_name =
      style_str.empty() ? cfg.get_string("fusion.style", "ggo") : style_str;
  const PatternStyle style = style_from_string(style_name);
  const std::string gen_cmd =
      generator_cmd.empty() ? cfg.get_string("fusion.generator_cmd", "") : generator_cmd;

  parallel_for(jobs, static_cast<std::size_t>(n_repeat), [&](std::size_t i) {
    const std::uint64_t case_seed = derive_seed(seed, i);
    std::unique_ptr<PatternGenerator> gen;
    if (!gen_cmd.empty()) {
      gen = std::make_unique<SubprocessGenerator>(gen_cmd);
    } else {
      gen = std::make_unique<ProceduralGenerator>(style, derive_seed(case_seed, 7));
    }
    const SynthesisResult result =
        synthesize_case(control, lung, prior, shape, fusion, k, case_seed, *gen);
    save_mhd(result.volume, derived_path(out_volume, static_cast<int>(i), n_repeat));
    save_mhd(result.lesion_mask, derived_path(out_mask, static_cast<int>(i), n_repeat));
  });
  std::cout << "inpaint: wrote " << n_repeat << " case(s) -> " << out_volume << "\n";
  return 0;
}

int cmd_metrics(const std::string& pred_dir, const std::string& gt_dir,
                const std::string& lung_dir, const std::string& volume_dir,
                const std::string& out_csv, const std::string& out_json,
                double pho_threshold, int jobs) {
  if (!fs::is_directory(pred_dir)) throw DataError("not a directory: " + pred_dir);

  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(pred_dir)) {
    if (entry.path().extension() == ".mhd") ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());

  std::vector<std::string> valid;
  for (const auto& id : ids) {
    bool ok = true;
    for (const auto& dir : {gt_dir, lung_dir, volume_dir}) {
      if (!fs::exists(fs::path(dir) / (id + ".mhd"))) {
        std::cerr << "metrics: skipping '" << id << "' (missing in " << dir << ")\n";
        ok = false;
      }
    }
    if (ok) valid.push_back(id);
  }
  if (valid.empty()) throw DataError("metrics: no case ids shared by all directories");

  std::vector<CaseMetricsRow> rows(valid.size());
  parallel_for(jobs, valid.size(), [&](std::size_t i) {
    const std::string& id = valid[i];
    const Mask3 pred = load_mask_mhd((fs::path(pred_dir) / (id + ".mhd")).string());
    const Mask3 gt = load_mask_mhd((fs::path(gt_dir) / (id + ".mhd")).string());
    const Mask3 lung = load_mask_mhd((fs::path(lung_dir) / (id + ".mhd")).string());
    const HuVolume vol = load_hu_mhd((fs::path(volume_dir) / (id + ".mhd")).string());

    CaseMetricsRow row;
    row.id = id;
    row.dsc = dice(pred, gt);
    row.po_pred = po(pred, lung);
    row.po_gt = po(gt, lung);
    row.pho_pred = pho(pred, vol, lung, pho_threshold);
    row.pho_gt = pho(gt, vol, lung, pho_threshold);
    try {
      row.lir = lir(gt, lung);
    } catch (const MetricError&) {
      row.lir = std::nullopt;
    }
    rows[i] = std::move(row);
  });

  write_cohort_csv(rows, out_csv);
  if (!out_json.empty()) write_cohort_json(rows, out_json);
  std::cout << "metrics: " << rows.size() << " case(s) -> " << out_csv << "\n";
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"ctsynth: synthetic lesion masks and tomographic pattern inpainting"};
  app.require_subcommand(0, 1);

  std::uint64_t seed = 0;
  int jobs = 1;
  bool dump_defaults = false;
  app.add_option("--seed", seed, "Master seed; all randomness derives from it");
  app.add_option("--jobs", jobs, "Parallel workers for batch commands")
      ->check(CLI::PositiveNumber);
  app.add_flag("--dump-defaults", dump_defaults,
               "Print the full default configuration and exit");

  // synth-mask
  auto* synth = app.add_subcommand("synth-mask", "Synthesize one random lesion mask");
  std::string synth_config, synth_out, synth_stl;
  synth->add_option("--config", synth_config, "Config file (requires mesh.n_points, "
                                              "mesh.lambda_low, mesh.lambda_high)")
      ->required();
  synth->add_option("--out", synth_out, "Output mask .mhd path")->required();
  synth->add_option("--stl", synth_stl, "Optional ASCII STL debug dump of the mesh");

  // build-prior
  auto* bprior = app.add_subcommand("build-prior", "Build the spatial probability map");
  std::string prior_manifest, prior_out, prior_config;
  bprior->add_option("--manifest", prior_manifest,
                     "Manifest: one '<lesion.mhd>\\t<lung.mhd>' pair per line")
      ->required();
  bprior->add_option("--out", prior_out, "Output prior .mhd path")->required();
  bprior->add_option("--config", prior_config, "Config file ([prior] section)");

  // inpaint
  auto* inpaint = app.add_subcommand("inpaint", "Inpaint lesion patterns into a control CT");
  std::string in_control, in_lung, in_prior, in_config, in_out_volume, in_out_mask;
  std::string in_style, in_gen_cmd;
  int in_lesions = -1, in_repeat = 0;
  inpaint->add_option("--control", in_control, "Control CT volume (.mhd, MET_SHORT)")
      ->required();
  inpaint->add_option("--lung", in_lung, "Lung mask (.mhd, MET_UCHAR)")->required();
  inpaint->add_option("--prior", in_prior, "Spatial prior (.mhd, MET_FLOAT)")->required();
  inpaint->add_option("--out-volume", in_out_volume, "Output volume .mhd path")->required();
  inpaint->add_option("--out-mask", in_out_mask, "Output lesion mask .mhd path")->required();
  inpaint->add_option("--config", in_config, "Config file");
  inpaint->add_option("--lesions", in_lesions, "Number of lesion components");
  inpaint->add_option("--repeat", in_repeat, "Synthesize this many variants with derived seeds");
  inpaint->add_option("--style", in_style, "Pattern style: ggo | consolidation");
  inpaint->add_option("--generator-cmd", in_gen_cmd,
                      "External generator command (stdin/stdout wire protocol)");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Per-case metrics and cohort report");
  std::string m_pred, m_gt, m_lung, m_volume, m_csv, m_json;
  double m_pho_threshold = kHighOpacityHu;
  metrics->add_option("--pred", m_pred, "Directory of predicted masks")->required();
  metrics->add_option("--gt", m_gt, "Directory of ground-truth masks")->required();
  metrics->add_option("--lung", m_lung, "Directory of lung masks")->required();
  metrics->add_option("--volume", m_volume, "Directory of HU volumes")->required();
  metrics->add_option("--out-csv", m_csv, "Output CSV path")->required();
  metrics->add_option("--out-json", m_json, "Output JSON summary path");
  metrics->add_option("--pho-threshold", m_pho_threshold, "High-opacity threshold (HU)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  if (dump_defaults) {
    std::cout << kDefaultConfig;
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << "error: a subcommand is required (see --help)\n";
    return 2;
  }

  if (synth->parsed()) return cmd_synth_mask(synth_config, synth_out, synth_stl, seed);
  if (bprior->parsed()) {
    Config cfg = prior_config.empty() ? Config::parse_string("")
                                      : Config::parse_file(prior_config);
    reject_unknown_keys(cfg);
    return cmd_build_prior(prior_manifest, prior_out, cfg);
  }
  if (inpaint->parsed()) {
    return cmd_inpaint(in_control, in_lung, in_prior, in_config, in_out_volume, in_out_mask,
                       in_lesions, in_repeat, in_style, in_gen_cmd, seed, jobs);
  }
  if (metrics->parsed()) {
    return cmd_metrics(m_pred, m_gt, m_lung, m_volume, m_csv, m_json, m_pho_threshold, jobs);
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ParamError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
