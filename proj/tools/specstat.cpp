// specstat - speckle-statistics segmentation toolkit CLI
//
// Subcommands cover the full pipeline: phantom generation, per-patch
// distribution fitting, goodness-of-fit / variance reports, random-forest weak
// labels, refinement network training/inference, and mask evaluation. Every
// run writes a manifest; `specstat rerun <manifest>` reproduces the outputs
// byte for byte.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "specstat/core/io.hpp"
#include "specstat/core/overlay.hpp"
#include "specstat/dist/dist.hpp"
#include "specstat/error.hpp"
#include "specstat/evalmetrics/metrics.hpp"
#include "specstat/fitgrid/fitgrid.hpp"
#include "specstat/phantom/phantom.hpp"
#include "specstat/refine/net.hpp"
#include "specstat/rng.hpp"
#include "specstat/stats/stats.hpp"
#include "specstat/weaklabel/forest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace specstat;

namespace {

constexpr const char* kVersion = "0.1.0";

std::uint64_t resolve_seed(std::int64_t cli_seed) {
    if (cli_seed >= 0)
        return static_cast<std::uint64_t>(cli_seed);
    if (const char* env = std::getenv("SPECSTAT_SEED"))
        return std::strtoull(env, nullptr, 10);
    return 0;
}

// scan stems in an input directory: *.pgm without a class/prob suffix
std::vector<std::string> scan_stems(const fs::path& dir) {
    require(fs::is_directory(dir), "IoFailure", "not a directory: " + dir.string());
    std::vector<std::string> stems;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".pgm")
            continue;
        const std::string stem = entry.path().stem().string();
        if (stem.ends_with(".ilm") || stem.ends_with(".rpe") || stem.ends_with(".tool") ||
            stem.ends_with(".prob"))
            continue;
        stems.push_back(stem);
    }
    std::sort(stems.begin(), stems.end()); // deterministic processing order
    require(!stems.empty(), "IoFailure", "no scan PGMs found in " + dir.string());
    return stems;
}

std::vector<std::string> mask_stems(const fs::path& dir) {
    require(fs::is_directory(dir), "IoFailure", "not a directory: " + dir.string());
    std::vector<std::string> stems;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".pgm")
            continue;
        std::string stem = entry.path().stem().string();
        if (stem.ends_with(".ilm")) {
            stem.resize(stem.size() - 4);
            stems.push_back(stem);
        }
    }
    std::sort(stems.begin(), stems.end());
    require(!stems.empty(), "IoFailure", "no class masks found in " + dir.string());
    return stems;
}

std::vector<core::LabelMap> load_class_maps(const fs::path& dir, const std::string& stem) {
    std::vector<core::LabelMap> maps;
    for (auto cls : core::kForegroundClasses) {
        fs::path p = dir / (stem + "." + core::to_string(cls) + ".pgm");
        require(fs::exists(p), "IoFailure", "missing label map " + p.string());
        maps.push_back(core::load_label_pgm(p, cls));
    }
    return maps;
}

void write_text_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        require(out.good(), "IoFailure", "cannot open " + tmp.string() + " for writing");
        out << content;
        require(out.good(), "IoFailure", "write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

struct ManifestWriter {
    json doc;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    ManifestWriter(const std::string& subcommand, std::uint64_t seed) {
        doc["toolkit_version"] = kVersion;
        doc["subcommand"] = subcommand;
        doc["seed"] = seed;
        doc["args"] = json::object();
    }

    void write(const fs::path& path) {
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        doc["duration_seconds"] = seconds;
        write_text_atomic(path, doc.dump(2) + "\n");
    }
};

std::vector<dist::Family> parse_families(const std::string& arg) {
    if (arg == "all")
        return {dist::kAllFamilies.begin(), dist::kAllFamilies.end()};
    std::vector<dist::Family> out;
    std::stringstream ss(arg);
    std::string tok;
    while (std::getline(ss, tok, ','))
        out.push_back(dist::family_from_string(tok));
    require(!out.empty(), "InvalidParams", "no family given");
    return out;
}

// ---------------------------------------------------------------------------
// phantom
// ---------------------------------------------------------------------------

int cmd_phantom(const std::string& config_path, const std::string& preset, std::uint64_t seed,
                int count, double jitter_override, const fs::path& out_dir) {
    phantom::PhantomConfig config;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        require(in.good(), "IoFailure", "cannot open " + config_path);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            fail("InvalidConfig", std::string("bad config JSON: ") + e.what());
        }
        config = phantom::config_from_json(j);
    } else {
        config = phantom::default_config(preset == "shifted_geometry"
                                             ? phantom::Preset::ShiftedGeometry
                                             : phantom::Preset::TrainGeometry);
    }
    if (jitter_override >= 0.0)
        config.geometry_jitter = jitter_override;

    fs::create_directories(out_dir);
    ManifestWriter manifest("phantom", seed);
    manifest.doc["args"] = {{"config", config_path},
                            {"preset", preset},
                            {"count", count},
                            {"jitter", config.geometry_jitter},
                            {"out", out_dir.string()}};
    manifest.doc["config_snapshot"] = phantom::to_json(config);

    for (int i = 0; i < count; ++i) {
        phantom::PhantomConfig scan_config =
            config.geometry_jitter > 0.0
                ? phantom::perturb(config, derive_seed(seed, 0x7000u + static_cast<unsigned>(i)))
                : config;
        auto [scan, maps] = phantom::generate(scan_config, derive_seed(seed, static_cast<unsigned>(i)));
        char stem[32];
        std::snprintf(stem, sizeof(stem), "scan_%03d", i);
        core::save_pgm(scan, out_dir / (std::string(stem) + ".pgm"));
        for (const auto& m : maps)
            core::save_label_pgm(m, out_dir / (std::string(stem) + "." + core::to_string(m.cls) + ".pgm"));
    }
    manifest.doc["outputs"] = {{"count", count}};
    manifest.write(out_dir / "manifest.json");
    return 0;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

int cmd_fit(const fs::path& input, const std::string& family_arg, int patch,
            const fs::path& out_dir, std::uint64_t seed) {
    auto families = parse_families(family_arg);
    std::vector<std::pair<std::string, fs::path>> scans;
    if (fs::is_directory(input)) {
        for (const auto& stem : scan_stems(input))
            scans.emplace_back(stem, input / (stem + ".pgm"));
    } else {
        scans.emplace_back(input.stem().string(), input);
    }

    fs::create_directories(out_dir);
    ManifestWriter manifest("fit", seed);
    manifest.doc["args"] = {{"in", input.string()},
                            {"family", family_arg},
                            {"patch", patch},
                            {"out", out_dir.string()}};

    json failures = json::object();
    for (const auto& [stem, path] : scans) {
        core::BScan scan = core::load_pgm(path);
        auto grid = fitgrid::tile(scan, patch);
        std::size_t scan_failures = 0;
        for (auto family : families) {
            auto maps = fitgrid::fit_patches(grid, family);
            for (const auto& map : maps) {
                core::save_param_csv(map, out_dir / (stem + "." + map.family + "." +
                                                     map.param_name + ".csv"));
                for (auto v : map.valid)
                    scan_failures += v == 0;
            }
        }
        failures[stem] = scan_failures;
    }
    manifest.doc["fit_failures"] = failures;
    manifest.write(out_dir / "manifest.json");
    return 0;
}

// ---------------------------------------------------------------------------
// gof / varstats
// ---------------------------------------------------------------------------

std::vector<stats::GroupSamples> collect_class_samples(const fs::path& scans_dir,
                                                       const fs::path& labels_dir) {
    auto stems = scan_stems(scans_dir);
    std::vector<stats::GroupSamples> groups;
    for (auto cls : core::kForegroundClasses) {
        stats::GroupSamples g;
        g.cls = cls;
        groups.push_back(std::move(g));
    }
    for (const auto& stem : stems) {
        core::BScan scan = core::load_pgm(scans_dir / (stem + ".pgm"));
        auto maps = load_class_maps(labels_dir, stem);
        for (std::size_t k = 0; k < maps.size(); ++k) {
            require(maps[k].height == scan.height && maps[k].width == scan.width,
                    "DimensionMismatch", "label map does not match scan " + stem);
            std::vector<double> samples;
            for (std::size_t i = 0; i < scan.pixels.size(); ++i)
                if (maps[k].mask[i])
                    samples.push_back(scan.pixels[i]);
            if (!samples.empty())
                groups[k].per_scan.push_back(std::move(samples));
        }
    }
    return groups;
}

int cmd_gof(const fs::path& scans_dir, const fs::path& labels_dir, const std::string& family_arg,
            std::uint64_t seed, const fs::path& out) {
    auto families = parse_families(family_arg);
    auto groups = collect_class_samples(scans_dir, labels_dir);
    auto report = stats::gof_report(groups, families, seed);

    ManifestWriter manifest("gof", seed);
    manifest.doc["args"] = {{"scans", scans_dir.string()},
                            {"labels", labels_dir.string()},
                            {"families", family_arg},
                            {"out", out.string()}};
    write_text_atomic(out, stats::to_json(report).dump(2) + "\n");
    manifest.write(out.string() + ".manifest.json");
    return 0;
}

int cmd_varstats(const fs::path& scans_dir, const fs::path& labels_dir, double trim,
                 const fs::path& out, std::uint64_t seed) {
    auto groups = collect_class_samples(scans_dir, labels_dir);
    // Levene first, then ANOVA, mirroring the evaluation order of the method
    auto report = stats::var_report(groups, trim);

    ManifestWriter manifest("varstats", seed);
    manifest.doc["args"] = {{"scans", scans_dir.string()},
                            {"labels", labels_dir.string()},
                            {"trim", trim},
                            {"out", out.string()}};
    write_text_atomic(out, stats::to_json(report).dump(2) + "\n");
    manifest.write(out.string() + ".manifest.json");
    return 0;
}

// ---------------------------------------------------------------------------
// weak
// ---------------------------------------------------------------------------

std::vector<std::string> param_stems(const fs::path& params_dir, const std::string& family) {
    require(fs::is_directory(params_dir), "IoFailure", "not a directory: " + params_dir.string());
    std::vector<std::string> stems;
    const std::string suffix = "." + family + ".";
    for (const auto& entry : fs::directory_iterator(params_dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".csv")
            continue;
        const std::string name = entry.path().filename().string();
        auto pos = name.find(suffix);
        if (pos == std::string::npos)
            continue;
        const std::string stem = name.substr(0, pos);
        if (std::find(stems.begin(), stems.end(), stem) == stems.end())
            stems.push_back(stem);
    }
    std::sort(stems.begin(), stems.end());
    require(!stems.empty(), "IoFailure",
            "no parameter CSVs for family " + family + " in " + params_dir.string());
    return stems;
}

std::vector<core::ParameterMap> load_family_maps(const fs::path& params_dir,
                                                 const std::string& stem,
                                                 const std::vector<dist::Family>& families) {
    std::vector<core::ParameterMap> maps;
    for (auto family : families) {
        for (const auto& param : dist::reported_param_names(family)) {
            fs::path p = params_dir / (stem + "." + dist::to_string(family) + "." + param + ".csv");
            require(fs::exists(p), "IoFailure", "missing parameter CSV " + p.string());
            maps.push_back(core::load_param_csv(p));
        }
    }
    return maps;
}

int cmd_weak_train(const fs::path& params_dir, const fs::path& labels_dir,
                   const std::string& family_arg, int patch, std::uint64_t seed,
                   const weaklabel::ForestHyper& hyper, const fs::path& out) {
    auto families = parse_families(family_arg);
    auto stems = param_stems(params_dir, dist::to_string(families.front()));

    weaklabel::PatchDataset dataset;
    for (const auto& stem : stems) {
        auto maps = load_family_maps(params_dir, stem, families);
        auto gt = load_class_maps(labels_dir, stem);
        auto part = weaklabel::build_dataset(maps, gt, patch);
        if (dataset.feature_names.empty())
            dataset.feature_names = part.feature_names;
        for (std::size_t i = 0; i < part.size(); ++i) {
            dataset.features.push_back(std::move(part.features[i]));
            dataset.labels.push_back(part.labels[i]);
            dataset.cells.push_back(part.cells[i]);
        }
    }

    auto forest = weaklabel::train_forest(dataset, hyper, seed);
    ManifestWriter manifest("weak-train", seed);
    manifest.doc["args"] = {{"params", params_dir.string()},
                            {"labels", labels_dir.string()},
                            {"families", family_arg},
                            {"patch", patch},
                            {"out", out.string()}};
    manifest.doc["oob_accuracy"] = forest.oob_accuracy;
    manifest.doc["n_rows"] = dataset.size();
    write_text_atomic(out, weaklabel::to_json(forest).dump(2) + "\n");
    manifest.write(out.string() + ".manifest.json");
    return 0;
}

int cmd_weak_apply(const fs::path& params_dir, const fs::path& model_path,
                   const std::string& family_arg, int patch, const fs::path& scans_dir,
                   const fs::path& out_dir, std::uint64_t seed) {
    auto families = parse_families(family_arg);
    std::ifstream in(model_path);
    require(in.good(), "IoFailure", "cannot open " + model_path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail("InvalidConfig", std::string("bad forest JSON: ") + e.what());
    }
    auto forest = weaklabel::forest_from_json(j);

    auto stems = param_stems(params_dir, dist::to_string(families.front()));
    fs::create_directories(out_dir);
    ManifestWriter manifest("weak-apply", seed);
    manifest.doc["args"] = {{"params", params_dir.string()},
                            {"model", model_path.string()},
                            {"families", family_arg},
                            {"patch", patch},
                            {"scans", scans_dir.string()},
                            {"out", out_dir.string()}};

    for (const auto& stem : stems) {
        auto maps = load_family_maps(params_dir, stem, families);
        int height = maps[0].rows * patch;
        int width = maps[0].cols * patch;
        if (!scans_dir.empty()) {
            core::BScan scan = core::load_pgm(scans_dir / (stem + ".pgm"));
            height = scan.height;
            width = scan.width;
        }
        auto weak = weaklabel::weak_maps(forest, maps, height, width, patch);
        for (const auto& m : weak)
            core::save_label_pgm(m, out_dir / (stem + "." + core::to_string(m.cls) + ".pgm"));
    }
    manifest.write(out_dir / "manifest.json");
    return 0;
}

// ---------------------------------------------------------------------------
// refine
// ---------------------------------------------------------------------------

refine::Tensor<float> assemble_for_stem(refine::InputConfig config, const fs::path& scans_dir,
                                        const fs::path& params_dir, const fs::path& weak_dir,
                                        const std::string& stem, int patch) {
    std::optional<core::BScan> scan;
    std::optional<core::ParameterMap> k_map, theta_map;
    std::optional<std::vector<core::LabelMap>> weak;

    const bool needs_scan = config == refine::InputConfig::A || config == refine::InputConfig::C;
    const bool needs_params = config == refine::InputConfig::C || config == refine::InputConfig::D;
    const bool needs_weak = config == refine::InputConfig::B;

    if (needs_scan || !scans_dir.empty()) {
        fs::path p = scans_dir / (stem + ".pgm");
        require(!needs_scan || fs::exists(p), "MissingSource",
                "config " + refine::to_string(config) + " needs scan " + p.string());
        if (fs::exists(p))
            scan = core::load_pgm(p);
    }
    if (needs_params) {
        require(!params_dir.empty(), "MissingSource", "config needs --params");
        fs::path kp = params_dir / (stem + ".gamma.k.csv");
        fs::path tp = params_dir / (stem + ".gamma.theta.csv");
        require(fs::exists(kp) && fs::exists(tp), "MissingSource",
                "config " + refine::to_string(config) + " needs Gamma CSVs for " + stem);
        k_map = core::load_param_csv(kp);
        theta_map = core::load_param_csv(tp);
    }
    if (needs_weak) {
        require(!weak_dir.empty(), "MissingSource", "config B needs --weak");
        weak = load_class_maps(weak_dir, stem);
    }

    int height = 0, width = 0;
    if (scan) {
        height = scan->height;
        width = scan->width;
    } else if (weak) {
        height = (*weak)[0].height;
        width = (*weak)[0].width;
    } else {
        height = k_map->rows * patch;
        width = k_map->cols * patch;
    }

    refine::InputSources sources;
    sources.scan = scan ? &*scan : nullptr;
    sources.k_map = k_map ? &*k_map : nullptr;
    sources.theta_map = theta_map ? &*theta_map : nullptr;
    sources.weak = weak ? &*weak : nullptr;
    sources.patch_size = patch;
    return refine::assemble_input(config, sources, height, width);
}

int cmd_refine_train(const std::string& config_arg, const std::string& targets_arg,
                     const fs::path& scans_dir, const fs::path& params_dir,
                     const fs::path& weak_dir, const fs::path& labels_dir, int patch,
                     const refine::TrainSpec& spec, const fs::path& model_path) {
    auto config = refine::input_config_from_string(config_arg);
    require(targets_arg == "gt" || targets_arg == "weak", "InvalidParams",
            "--targets must be gt or weak");
    const fs::path target_dir = targets_arg == "gt" ? labels_dir : weak_dir;
    require(!target_dir.empty(), "MissingSource",
            "targets " + targets_arg + " need the corresponding label directory");

    std::vector<std::string> stems;
    if (!scans_dir.empty())
        stems = scan_stems(scans_dir);
    else
        stems = mask_stems(target_dir);

    std::vector<refine::TrainSample> dataset;
    for (const auto& stem : stems) {
        refine::TrainSample sample;
        sample.input = assemble_for_stem(config, scans_dir, params_dir, weak_dir, stem, patch);
        sample.target = refine::targets_from_maps(load_class_maps(target_dir, stem));
        dataset.push_back(std::move(sample));
    }

    ManifestWriter manifest("refine-train", spec.seed);
    manifest.doc["args"] = {{"config", config_arg}, {"targets", targets_arg},
                            {"scans", scans_dir.string()}, {"params", params_dir.string()},
                            {"weak", weak_dir.string()},   {"labels", labels_dir.string()},
                            {"patch", patch},              {"epochs", spec.epochs},
                            {"batch", spec.batch},         {"lr", spec.learning_rate},
                            {"model", model_path.string()}};

    auto result = refine::train(config, spec, std::move(dataset));
    std::cerr << "refine: parameter count " << result.model.parameter_count() << "\n";
    refine::save_model(result.model, model_path);

    std::string loss_csv = "epoch,loss\n";
    for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
        char line[64];
        std::snprintf(line, sizeof(line), "%zu,%.17g\n", e, result.loss_history[e]);
        loss_csv += line;
    }
    write_text_atomic(model_path.string() + ".loss.csv", loss_csv);

    manifest.doc["parameter_count"] = result.model.parameter_count();
    if (!result.loss_history.empty()) {
        manifest.doc["initial_loss"] = result.loss_history.front();
        manifest.doc["final_loss"] = result.loss_history.back();
    }
    manifest.write(model_path.string() + ".manifest.json");
    return 0;
}

int cmd_refine_infer(const std::string& config_arg, const fs::path& model_path,
                     const fs::path& scans_dir, const fs::path& params_dir,
                     const fs::path& weak_dir, int patch, double threshold,
                     const fs::path& out_dir, std::uint64_t seed) {
    refine::Model model = refine::load_model(model_path);
    if (!config_arg.empty())
        require(refine::input_config_from_string(config_arg) == model.config, "InvalidConfig",
                "--config disagrees with the model file");

    std::vector<std::string> stems;
    if (!scans_dir.empty())
        stems = scan_stems(scans_dir);
    else if (model.config == refine::InputConfig::B)
        stems = mask_stems(weak_dir);
    else
        stems = param_stems(params_dir, "gamma");

    fs::create_directories(out_dir);
    ManifestWriter manifest("refine-infer", seed);
    manifest.doc["args"] = {{"config", refine::to_string(model.config)},
                            {"model", model_path.string()},
                            {"scans", scans_dir.string()},
                            {"params", params_dir.string()},
                            {"weak", weak_dir.string()},
                            {"patch", patch},
                            {"threshold", threshold},
                            {"out", out_dir.string()}};

    for (const auto& stem : stems) {
        auto input = assemble_for_stem(model.config, scans_dir, params_dir, weak_dir, stem, patch);
        auto probs = refine::infer(model, input);
        auto masks = refine::binarize(probs, threshold);
        for (int c = 0; c < 3; ++c) {
            const auto cls = core::kForegroundClasses[c];
            std::vector<double> plane(probs.plane_size());
            const float* p = probs.plane(c);
            for (std::size_t i = 0; i < plane.size(); ++i)
                plane[i] = p[i];
            core::save_prob_pgm(plane, probs.h, probs.w,
                                out_dir / (stem + "." + core::to_string(cls) + ".prob.pgm"));
            core::save_label_pgm(masks[static_cast<std::size_t>(c)],
                                 out_dir / (stem + "." + core::to_string(cls) + ".pgm"));
        }
    }
    manifest.write(out_dir / "manifest.json");
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int cmd_eval(const fs::path& pred_dir, const fs::path& gt_dir, double hd_percentile,
             const fs::path& out, std::uint64_t seed) {
    auto stems = mask_stems(gt_dir);
    std::vector<evalmetrics::ScanClassMetric> rows;
    std::string per_scan_csv = "scan,class,dice,hausdorff\n";
    for (const auto& stem : stems) {
        auto gt = load_class_maps(gt_dir, stem);
        auto pred = load_class_maps(pred_dir, stem);
        for (std::size_t k = 0; k < gt.size(); ++k) {
            evalmetrics::ScanClassMetric row;
            row.scan = stem;
            row.cls = gt[k].cls;
            row.dice = evalmetrics::dice(pred[k], gt[k]);
            row.hausdorff = evalmetrics::hausdorff(pred[k], gt[k], hd_percentile);
            char line[160];
            std::snprintf(line, sizeof(line), "%s,%s,%.17g,%.17g\n", stem.c_str(),
                          core::to_string(row.cls).c_str(), row.dice, row.hausdorff);
            per_scan_csv += line;
            rows.push_back(std::move(row));
        }
    }
    auto summary = evalmetrics::summarize(rows);

    ManifestWriter manifest("eval", seed);
    manifest.doc["args"] = {{"pred", pred_dir.string()},
                            {"gt", gt_dir.string()},
                            {"hausdorff_percentile", hd_percentile},
                            {"out", out.string()}};
    write_text_atomic(out, evalmetrics::to_json(summary).dump(2) + "\n");
    fs::path csv_path = out;
    csv_path.replace_extension(".per_scan.csv");
    write_text_atomic(csv_path, per_scan_csv);
    manifest.write(out.string() + ".manifest.json");
    return 0;
}

// ---------------------------------------------------------------------------
// overlay
// ---------------------------------------------------------------------------

int cmd_overlay(const fs::path& scan_path, const fs::path& labels_dir, const fs::path& out) {
    core::BScan scan = core::load_pgm(scan_path);
    auto maps = load_class_maps(labels_dir, scan_path.stem().string());
    core::save_ppm(core::overlay(scan, maps), out);
    return 0;
}

// ---------------------------------------------------------------------------
// rerun
// ---------------------------------------------------------------------------

int dispatch(const json& manifest, const std::string& out_override);

int cmd_rerun(const fs::path& manifest_path, const std::string& out_override) {
    std::ifstream in(manifest_path);
    require(in.good(), "IoFailure", "cannot open " + manifest_path.string());
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        fail("InvalidConfig", std::string("bad manifest JSON: ") + e.what());
    }
    return dispatch(manifest, out_override);
}

int dispatch(const json& manifest, const std::string& out_override) {
    const std::string sub = manifest.at("subcommand").get<std::string>();
    const auto seed = manifest.at("seed").get<std::uint64_t>();
    const json& a = manifest.at("args");
    auto out = [&](const char* key) {
        return out_override.empty() ? a.at(key).get<std::string>() : out_override;
    };
    if (sub == "phantom")
        return cmd_phantom(a.at("config").get<std::string>(), a.at("preset").get<std::string>(),
                           seed, a.at("count").get<int>(), a.at("jitter").get<double>(),
                           out("out"));
    if (sub == "fit")
        return cmd_fit(a.at("in").get<std::string>(), a.at("family").get<std::string>(),
                       a.at("patch").get<int>(), out("out"), seed);
    if (sub == "gof")
        return cmd_gof(a.at("scans").get<std::string>(), a.at("labels").get<std::string>(),
                       a.at("families").get<std::string>(), seed, out("out"));
    if (sub == "varstats")
        return cmd_varstats(a.at("scans").get<std::string>(), a.at("labels").get<std::string>(),
                            a.at("trim").get<double>(), out("out"), seed);
    if (sub == "weak-train") {
        weaklabel::ForestHyper hyper;
        return cmd_weak_train(a.at("params").get<std::string>(), a.at("labels").get<std::string>(),
                              a.at("families").get<std::string>(), a.at("patch").get<int>(), seed,
                              hyper, out("out"));
    }
    if (sub == "weak-apply")
        return cmd_weak_apply(a.at("params").get<std::string>(), a.at("model").get<std::string>(),
                              a.at("families").get<std::string>(), a.at("patch").get<int>(),
                              a.at("scans").get<std::string>(), out("out"), seed);
    if (sub == "refine-train") {
        refine::TrainSpec spec;
        spec.seed = seed;
        spec.epochs = a.at("epochs").get<int>();
        spec.batch = a.at("batch").get<int>();
        spec.learning_rate = a.at("lr").get<double>();
        return cmd_refine_train(a.at("config").get<std::string>(),
                                a.at("targets").get<std::string>(), a.at("scans").get<std::string>(),
                                a.at("params").get<std::string>(), a.at("weak").get<std::string>(),
                                a.at("labels").get<std::string>(), a.at("patch").get<int>(), spec,
                                out_override.empty() ? a.at("model").get<std::string>()
                                                     : out_override);
    }
    if (sub == "refine-infer")
        return cmd_refine_infer(a.at("config").get<std::string>(), a.at("model").get<std::string>(),
                                a.at("scans").get<std::string>(), a.at("params").get<std::string>(),
                                a.at("weak").get<std::string>(), a.at("patch").get<int>(),
                                a.at("threshold").get<double>(), out("out"), seed);
    if (sub == "eval")
        return cmd_eval(a.at("pred").get<std::string>(), a.at("gt").get<std::string>(),
                        a.at("hausdorff_percentile").get<double>(), out("out"), seed);
    fail("InvalidConfig", "manifest subcommand not rerunnable: " + sub);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"speckle-statistics segmentation toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::int64_t seed_arg = -1;
    app.add_option("--seed", seed_arg, "global seed (fallback: SPECSTAT_SEED env, then 0)")
        ->capture_default_str();

    // phantom
    auto* sc_phantom = app.add_subcommand("phantom", "generate synthetic speckle B-scans");
    std::string ph_config, ph_preset = "train_geometry", ph_out;
    int ph_count = 1;
    double ph_jitter = -1.0;
    sc_phantom->add_option("--config", ph_config, "phantom config JSON (overrides --preset)");
    sc_phantom->add_option("--preset", ph_preset, "train_geometry | shifted_geometry")
        ->check(CLI::IsMember({"train_geometry", "shifted_geometry"}));
    sc_phantom->add_option("--count", ph_count, "number of scans")->capture_default_str();
    sc_phantom->add_option("--jitter", ph_jitter, "override geometry jitter amplitude (px)");
    sc_phantom->add_option("--out", ph_out, "output directory")->required();

    // fit
    auto* sc_fit = app.add_subcommand("fit", "per-patch maximum-likelihood distribution fitting");
    std::string fit_in, fit_family = "gamma", fit_out;
    int fit_patch = 7;
    sc_fit->add_option("--in", fit_in, "scan PGM or directory of scans")->required();
    sc_fit->add_option("--family", fit_family,
                       "gamma|rayleigh|normal|burr|lognorm|nakagami|all or a comma list")
        ->capture_default_str();
    sc_fit->add_option("--patch", fit_patch, "patch size")->capture_default_str();
    sc_fit->add_option("--out", fit_out, "output directory")->required();

    // gof
    auto* sc_gof = app.add_subcommand("gof", "goodness-of-fit report (KS + CVM) per class/family");
    std::string gof_scans, gof_labels, gof_families = "all", gof_out;
    sc_gof->add_option("--scans", gof_scans, "scan directory")->required();
    sc_gof->add_option("--labels", gof_labels, "label directory")->required();
    sc_gof->add_option("--families", gof_families, "family list or all")->capture_default_str();
    sc_gof->add_option("--out", gof_out, "report JSON path")->required();

    // varstats
    auto* sc_var = app.add_subcommand("varstats", "Levene + ANOVA variance report");
    std::string var_scans, var_labels, var_out;
    double var_trim = 0.05;
    sc_var->add_option("--scans", var_scans, "scan directory")->required();
    sc_var->add_option("--labels", var_labels, "label directory")->required();
    sc_var->add_option("--trim", var_trim, "Levene trim fraction")->capture_default_str();
    sc_var->add_option("--out", var_out, "report JSON path")->required();

    // weak
    auto* sc_weak = app.add_subcommand("weak", "random-forest weak labels");
    sc_weak->require_subcommand(1);
    auto* sc_weak_train = sc_weak->add_subcommand("train", "train the forest on parameter maps");
    std::string wt_params, wt_labels, wt_family = "gamma", wt_out;
    int wt_patch = 7;
    weaklabel::ForestHyper wt_hyper;
    sc_weak_train->add_option("--params", wt_params, "parameter CSV directory")->required();
    sc_weak_train->add_option("--labels", wt_labels, "ground-truth label directory")->required();
    sc_weak_train->add_option("--families", wt_family, "families to use as features")
        ->capture_default_str();
    sc_weak_train->add_option("--patch", wt_patch, "patch size")->capture_default_str();
    sc_weak_train->add_option("--trees", wt_hyper.n_trees, "number of trees")->capture_default_str();
    sc_weak_train->add_option("--max-depth", wt_hyper.max_depth, "maximum depth")
        ->capture_default_str();
    sc_weak_train->add_option("--min-leaf", wt_hyper.min_leaf, "minimum samples per leaf")
        ->capture_default_str();
    sc_weak_train->add_option("--out", wt_out, "forest JSON path")->required();

    auto* sc_weak_apply = sc_weak->add_subcommand("apply", "emit weak maps for parameter maps");
    std::string wa_params, wa_model, wa_family = "gamma", wa_scans, wa_out;
    int wa_patch = 7;
    sc_weak_apply->add_option("--params", wa_params, "parameter CSV directory")->required();
    sc_weak_apply->add_option("--model", wa_model, "forest JSON path")->required();
    sc_weak_apply->add_option("--families", wa_family, "families used as features")
        ->capture_default_str();
    sc_weak_apply->add_option("--patch", wa_patch, "patch size")->capture_default_str();
    sc_weak_apply->add_option("--scans", wa_scans, "scan directory (for output dimensions)");
    sc_weak_apply->add_option("--out", wa_out, "output directory")->required();

    // refine
    auto* sc_refine = app.add_subcommand("refine", "residual encoder-decoder refinement");
    sc_refine->require_subcommand(1);
    auto* sc_ref_train = sc_refine->add_subcommand("train", "train the refinement network");
    std::string rt_config = "D", rt_targets = "gt", rt_scans, rt_params, rt_weak, rt_labels,
                rt_model;
    int rt_patch = 7;
    refine::TrainSpec rt_spec;
    sc_ref_train->add_option("--config", rt_config, "input configuration A|B|C|D")
        ->capture_default_str();
    sc_ref_train->add_option("--targets", rt_targets, "gt | weak")->capture_default_str();
    sc_ref_train->add_option("--scans", rt_scans, "scan directory");
    sc_ref_train->add_option("--params", rt_params, "parameter CSV directory");
    sc_ref_train->add_option("--weak", rt_weak, "weak map directory");
    sc_ref_train->add_option("--labels", rt_labels, "ground-truth label directory");
    sc_ref_train->add_option("--patch", rt_patch, "patch size")->capture_default_str();
    sc_ref_train->add_option("--epochs", rt_spec.epochs, "training epochs")->capture_default_str();
    sc_ref_train->add_option("--batch", rt_spec.batch, "batch size")->capture_default_str();
    sc_ref_train->add_option("--lr", rt_spec.learning_rate, "step size")->capture_default_str();
    sc_ref_train->add_option("--model", rt_model, "output model path")->required();

    auto* sc_ref_infer = sc_refine->add_subcommand("infer", "run the refinement network");
    std::string ri_config, ri_model, ri_scans, ri_params, ri_weak, ri_out;
    int ri_patch = 7;
    double ri_threshold = 0.5;
    sc_ref_infer->add_option("--config", ri_config, "input configuration (checked vs model)");
    sc_ref_infer->add_option("--model", ri_model, "model path")->required();
    sc_ref_infer->add_option("--scans", ri_scans, "scan directory");
    sc_ref_infer->add_option("--params", ri_params, "parameter CSV directory");
    sc_ref_infer->add_option("--weak", ri_weak, "weak map directory");
    sc_ref_infer->add_option("--patch", ri_patch, "patch size")->capture_default_str();
    sc_ref_infer->add_option("--threshold", ri_threshold, "binarization threshold")
        ->capture_default_str();
    sc_ref_infer->add_option("--out", ri_out, "output directory")->required();

    // eval
    auto* sc_eval = app.add_subcommand("eval", "Dice/Hausdorff evaluation of predicted masks");
    std::string ev_pred, ev_gt, ev_out;
    double ev_percentile = 100.0;
    sc_eval->add_option("--pred", ev_pred, "predicted mask directory")->required();
    sc_eval->add_option("--gt", ev_gt, "ground-truth mask directory")->required();
    sc_eval->add_option("--hausdorff-percentile", ev_percentile,
                        "100 = exact max, 95 = HD95 variant")
        ->capture_default_str();
    sc_eval->add_option("--out", ev_out, "metrics JSON path")->required();

    // overlay
    auto* sc_overlay = app.add_subcommand("overlay", "render class overlays as PPM");
    std::string ov_scan, ov_labels, ov_out;
    sc_overlay->add_option("--scan", ov_scan, "scan PGM")->required();
    sc_overlay->add_option("--labels", ov_labels, "label directory")->required();
    sc_overlay->add_option("--out", ov_out, "output PPM path")->required();

    // rerun
    auto* sc_rerun = app.add_subcommand("rerun", "re-execute a recorded manifest");
    std::string rr_manifest, rr_out;
    sc_rerun->add_option("manifest", rr_manifest, "manifest JSON path")->required();
    sc_rerun->add_option("--out", rr_out, "redirect outputs to this path");

    // let the global --seed appear after the subcommand name
    for (auto* sub : app.get_subcommands({})) {
        sub->fallthrough();
        for (auto* nested : sub->get_subcommands({}))
            nested->fallthrough();
    }

    CLI11_PARSE(app, argc, argv);

    try {
        const std::uint64_t seed = resolve_seed(seed_arg);
        if (sc_phantom->parsed())
            return cmd_phantom(ph_config, ph_preset, seed, ph_count, ph_jitter, ph_out);
        if (sc_fit->parsed())
            return cmd_fit(fit_in, fit_family, fit_patch, fit_out, seed);
        if (sc_gof->parsed())
            return cmd_gof(gof_scans, gof_labels, gof_families, seed, gof_out);
        if (sc_var->parsed())
            return cmd_varstats(var_scans, var_labels, var_trim, var_out, seed);
        if (sc_weak->parsed() && sc_weak_train->parsed())
            return cmd_weak_train(wt_params, wt_labels, wt_family, wt_patch, seed, wt_hyper, wt_out);
        if (sc_weak->parsed() && sc_weak_apply->parsed())
            return cmd_weak_apply(wa_params, wa_model, wa_family, wa_patch, wa_scans, wa_out, seed);
        if (sc_refine->parsed() && sc_ref_train->parsed()) {
            rt_spec.seed = seed;
            return cmd_refine_train(rt_config, rt_targets, rt_scans, rt_params, rt_weak, rt_labels,
                                    rt_patch, rt_spec, rt_model);
        }
        if (sc_refine->parsed() && sc_ref_infer->parsed())
            return cmd_refine_infer(ri_config, ri_model, ri_scans, ri_params, ri_weak, ri_patch,
                                    ri_threshold, ri_out, seed);
        if (sc_eval->parsed())
            return cmd_eval(ev_pred, ev_gt, ev_percentile, ev_out, seed);
        if (sc_overlay->parsed())
            return cmd_overlay(ov_scan, ov_labels, ov_out);
        if (sc_rerun->parsed())
            return cmd_rerun(rr_manifest, rr_out);
    } catch (const Error& e) {
        json err = {{"error", e.code()}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return e.is_numerical() ? 3 : 2;
    } catch (const std::exception& e) {
        json err = {{"error", "Internal"}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return 2;
    }
    return 0;
}
