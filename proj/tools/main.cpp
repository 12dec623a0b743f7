#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "endoclass/config.hpp"
#include "endoclass/data_io.hpp"
#include "endoclass/ensemble.hpp"
#include "endoclass/sampling.hpp"
#include "endoclass/train.hpp"

namespace fs = std::filesystem;
using namespace endoclass;

namespace {

// Image ids in a manifest are relative to the manifest's directory unless an
// explicit root is given.
std::string default_root(const std::string& manifest_path, const std::string& explicit_root) {
    if (!explicit_root.empty()) return explicit_root;
    return fs::path(manifest_path).parent_path().string();
}

config::RunConfig resolve_config(const std::string& config_path) {
    if (config_path.empty()) return config::RunConfig{};
    return config::load_config_file(config_path);
}

void print_resolved(const config::RunConfig& cfg) {
    std::cerr << "resolved config:\n" << config::resolved_config_json(cfg);
}

void epoch_printer(const train::EpochRecord& rec, void*) {
    std::fprintf(stderr, "epoch %d  train_loss %.6f  val_combined %.6f%s  (%.1fs)\n", rec.epoch,
                 rec.train_loss, rec.val_combined_score, rec.improved ? "  *" : "",
                 rec.wall_time_sec);
}

void check_eval_alignment(const std::vector<std::string>& csv_ids, const LabeledManifest& manifest) {
    if (csv_ids.size() != manifest.size())
        throw std::runtime_error("eval: predictions cover " + std::to_string(csv_ids.size()) +
                                 " images but the manifest has " + std::to_string(manifest.size()));
    for (std::size_t i = 0; i < csv_ids.size(); ++i) {
        const std::string& want = manifest.records[i].image_id;
        if (csv_ids[i] != want && csv_ids[i] != data_io::basename_of(want))
            throw std::runtime_error("eval: row " + std::to_string(i + 1) + " is '" + csv_ids[i] +
                                     "' but the manifest row is '" + want + "'");
    }
}

int run_train(const std::string& train_manifest_path, const std::string& val_manifest_path,
              const std::string& train_root, const std::string& val_root,
              const std::string& config_path, const std::string& arch_flag, const std::string& out_dir,
              bool seed_set, std::uint64_t seed, int threads_flag) {
    config::RunConfig cfg = resolve_config(config_path);
    if (!arch_flag.empty()) cfg.arch = arch_flag;
    if (seed_set) cfg.train.seed = seed;
    if (threads_flag > 0) cfg.train.threads = threads_flag;
    print_resolved(cfg);

    auto train_manifest = data_io::load_manifest(train_manifest_path, cfg.catalog);
    auto val_manifest = data_io::load_manifest(val_manifest_path, cfg.catalog);
    const std::string troot = default_root(train_manifest_path, train_root);
    const std::string vroot = default_root(val_manifest_path, val_root);
    nn::Arch arch = nn::Arch::parse(cfg.arch);

    fs::create_directories(out_dir);
    train::TrainResult result = train::train(train_manifest, troot, val_manifest, vroot, arch,
                                             cfg.catalog, cfg.train, epoch_printer, nullptr);

    const std::string ckpt_path = (fs::path(out_dir) / "best.ckpt").string();
    data_io::save_checkpoint(ckpt_path, result.best);
    {
        std::ofstream hist((fs::path(out_dir) / "history.jsonl").string());
        if (!hist) throw std::runtime_error("train: cannot write history.jsonl");
        hist << train::history_to_jsonl(result.history);
    }

    // Final metrics go through the predictions CSV so that a later
    // predict+eval on the same checkpoint reproduces metrics.json byte for
    // byte (both paths see the same 6-decimal rounding).
    ProbMatrix val_probs = train::predict_probs(result.best.params, val_manifest, vroot,
                                                cfg.train.augment, cfg.train.threads);
    std::vector<std::string> ids;
    for (const auto& rec : val_manifest.records) ids.push_back(rec.image_id);
    const std::string preds_path = (fs::path(out_dir) / "val_predictions.csv").string();
    data_io::write_predictions_csv(preds_path, ids, val_probs, cfg.catalog);
    data_io::Predictions rounded = data_io::read_predictions_csv(preds_path);
    metrics::MetricsReport report =
        metrics::evaluate(rounded.probs, val_manifest.labels(), cfg.catalog);
    data_io::write_metrics_json((fs::path(out_dir) / "metrics.json").string(), report);

    std::cerr << "best epoch " << result.best.epoch << "  combined "
              << result.best.best_combined_score << "\n";
    return 0;
}

int run_predict(const std::string& ckpt_path, const std::string& manifest_path,
                const std::string& root, const std::string& config_path, const std::string& out_path,
                int threads_flag) {
    config::RunConfig cfg = resolve_config(config_path);
    if (threads_flag > 0) cfg.train.threads = threads_flag;
    data_io::Checkpoint ckpt = data_io::load_checkpoint(ckpt_path);
    cfg.catalog = ckpt.catalog;  // the checkpoint's catalog is authoritative
    print_resolved(cfg);

    auto manifest = data_io::load_manifest(manifest_path, ckpt.catalog);
    ProbMatrix probs = train::predict_probs(ckpt.params, manifest, default_root(manifest_path, root),
                                            cfg.train.augment, cfg.train.threads);
    std::vector<std::string> ids;
    for (const auto& rec : manifest.records) ids.push_back(rec.image_id);
    data_io::write_predictions_csv(out_path, ids, probs, ckpt.catalog);
    return 0;
}

int run_ensemble(const std::vector<std::string>& pred_paths, const std::string& out_path) {
    if (pred_paths.empty()) throw std::runtime_error("ensemble: no prediction files given");
    std::vector<ensemble::ModelOutputs> members;
    ClassCatalog catalog;
    for (const auto& path : pred_paths) {
        data_io::Predictions preds = data_io::read_predictions_csv(path);
        if (members.empty())
            catalog = preds.catalog;
        else if (!(preds.catalog == catalog))
            throw std::runtime_error("ensemble: '" + path + "' has different class columns than '" +
                                     pred_paths.front() + "'");
        ensemble::ModelOutputs m;
        m.model_id = path;
        m.image_ids = std::move(preds.image_ids);
        m.values = std::move(preds.probs);
        m.values_are_probs = true;
        members.push_back(std::move(m));
    }
    auto aligned = ensemble::align(std::move(members));
    ProbMatrix mean = ensemble::ensemble_average(aligned);
    data_io::write_predictions_csv(out_path, aligned.front().image_ids, mean, catalog);
    return 0;
}

int run_eval(const std::string& preds_path, const std::string& manifest_path,
             const std::string& out_path) {
    data_io::Predictions preds = data_io::read_predictions_csv(preds_path);
    auto manifest = data_io::load_manifest(manifest_path, preds.catalog);
    check_eval_alignment(preds.image_ids, manifest);
    metrics::MetricsReport report =
        metrics::evaluate(preds.probs, manifest.labels(), preds.catalog);
    if (out_path.empty())
        std::cout << data_io::metrics_report_to_json(report);
    else
        data_io::write_metrics_json(out_path, report);
    return 0;
}

int run_augment_preview(const std::string& in_path, const std::string& out_path,
                        const std::string& config_path, std::uint64_t seed, std::uint64_t index) {
    config::RunConfig cfg = resolve_config(config_path);
    cfg.train.seed = seed;
    print_resolved(cfg);

    ImageBuffer img = data_io::decode_image(in_path);
    augment::SampledParams sp;
    ImageBuffer out = augment::apply_pipeline(img, cfg.train.augment, seed, index, &sp);

    // write a viewable image: undo the normalization, clamp to [0,1]
    ImageBuffer raw(out.width, out.height);
    for (std::size_t p = 0; p < out.pixel_count(); ++p)
        for (int c = 0; c < 3; ++c)
            raw.data[p * 3 + c] = out.data[p * 3 + c] * cfg.train.augment.norm_std[static_cast<std::size_t>(c)] +
                                  cfg.train.augment.norm_mean[static_cast<std::size_t>(c)];
    data_io::write_image(out_path, raw);

    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["sample_index"] = index;
    j["hflip"] = sp.hflip;
    j["vflip"] = sp.vflip;
    j["angle_deg"] = sp.angle_deg;
    j["translate"] = {sp.translate_x, sp.translate_y};
    j["scale"] = sp.scale;
    j["perspective"] = sp.perspective;
    j["corner_disp"] = {{sp.corner_disp[0][0], sp.corner_disp[0][1]},
                        {sp.corner_disp[1][0], sp.corner_disp[1][1]},
                        {sp.corner_disp[2][0], sp.corner_disp[2][1]},
                        {sp.corner_disp[3][0], sp.corner_disp[3][1]}};
    j["brightness"] = sp.brightness;
    j["contrast"] = sp.contrast;
    j["saturation"] = sp.saturation;
    j["hue"] = sp.hue;
    j["erase"] = sp.erase;
    j["erase_rect"] = {sp.erase_x, sp.erase_y, sp.erase_w, sp.erase_h};
    j["blur"] = sp.blur;
    j["blur_sigma"] = sp.blur_sigma;
    std::ofstream sidecar(out_path + ".json");
    if (!sidecar) throw std::runtime_error("augment-preview: cannot write sidecar JSON");
    sidecar << j.dump(2) << "\n";
    return 0;
}

int run_sample_check(const std::string& manifest_path, const std::string& config_path,
                     std::uint64_t seed, std::uint64_t draws) {
    config::RunConfig cfg = resolve_config(config_path);
    cfg.train.seed = seed;
    print_resolved(cfg);
    if (draws == 0) throw std::runtime_error("sample-check: --draws must be positive");

    auto manifest = data_io::load_manifest(manifest_path, cfg.catalog);
    if (manifest.empty()) throw std::runtime_error("sample-check: empty manifest");
    const std::size_t k = cfg.catalog.size();
    auto counts = sampling::class_counts(manifest, k);
    auto class_weights = sampling::inverse_frequency_weights(counts);
    std::vector<double> weights(manifest.size());
    for (std::size_t i = 0; i < manifest.size(); ++i)
        weights[i] = class_weights[static_cast<std::size_t>(manifest.records[i].label)];

    sampling::SamplerSpec spec{std::move(weights), true, seed};
    auto indices = sampling::draw_epoch_indices(spec, draws);
    std::vector<std::int64_t> drawn(k, 0);
    for (auto idx : indices) ++drawn[static_cast<std::size_t>(manifest.records[idx].label)];

    std::size_t nonempty = 0;
    for (auto c : counts)
        if (c > 0) ++nonempty;
    const double expected = 1.0 / static_cast<double>(nonempty);

    double stat = 0.0;
    std::printf("class,count,frequency,expected\n");
    for (std::size_t i = 0; i < k; ++i) {
        double freq = static_cast<double>(drawn[i]) / static_cast<double>(draws);
        double exp_freq = counts[i] > 0 ? expected : 0.0;
        std::printf("%s,%lld,%.6f,%.6f\n", cfg.catalog.names[i].c_str(),
                    static_cast<long long>(drawn[i]), freq, exp_freq);
        if (counts[i] > 0) {
            double exp_count = expected * static_cast<double>(draws);
            double d = static_cast<double>(drawn[i]) - exp_count;
            stat += d * d / exp_count;
        }
    }
    double p = sampling::chi_square_pvalue(stat, static_cast<int>(nonempty) - 1);
    std::printf("chi_square_statistic,%.6f\n", stat);
    std::printf("chi_square_pvalue,%.6f\n", p);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"capsule-endoscopy abnormality classifier pipeline"};
    app.require_subcommand(1);

    std::string train_manifest, val_manifest, train_root, val_root, config_path, arch, out_dir;
    std::string preds_path_opt;
    std::uint64_t seed = 0;
    int threads = 0;

    auto* t = app.add_subcommand("train", "train a model and keep the best checkpoint");
    t->add_option("--train-manifest", train_manifest, "training manifest CSV")->required();
    t->add_option("--val-manifest", val_manifest, "validation manifest CSV")->required();
    t->add_option("--train-root", train_root, "image root for the training manifest");
    t->add_option("--val-root", val_root, "image root for the validation manifest");
    t->add_option("--config", config_path, "JSON config file");
    t->add_option("--arch", arch, "model architecture, e.g. linear:192x10 or mlp:192x64x10");
    t->add_option("--out-dir", out_dir, "output directory")->required();
    t->add_option("--seed", seed, "RNG seed (overrides config)");
    t->add_option("--threads", threads, "worker threads (results are thread-count independent)");

    std::string ckpt_path, manifest_path, root, out_path;
    auto* p = app.add_subcommand("predict", "write per-image class probabilities for a manifest");
    p->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    p->add_option("--manifest", manifest_path, "manifest CSV")->required();
    p->add_option("--root", root, "image root for the manifest");
    p->add_option("--config", config_path, "JSON config file");
    p->add_option("--out", out_path, "output predictions CSV")->required();
    p->add_option("--threads", threads, "worker threads");

    std::vector<std::string> pred_paths;
    auto* e = app.add_subcommand("ensemble", "average several models' prediction CSVs");
    e->add_option("--preds", pred_paths, "input predictions CSVs")->required()->expected(-1);
    e->add_option("--out", out_path, "output predictions CSV")->required();

    auto* v = app.add_subcommand("eval", "score a predictions CSV against a labeled manifest");
    v->add_option("--preds", preds_path_opt, "predictions CSV")->required();
    v->add_option("--manifest", manifest_path, "labeled manifest CSV")->required();
    v->add_option("--out", out_path, "metrics JSON path (stdout when omitted)");

    std::string in_path;
    std::uint64_t sample_index = 0;
    auto* a = app.add_subcommand("augment-preview", "run the augmentation pipeline on one image");
    a->add_option("--in", in_path, "input image")->required();
    a->add_option("--out", out_path, "output image (sidecar JSON written next to it)")->required();
    a->add_option("--seed", seed, "RNG seed");
    a->add_option("--index", sample_index, "sample index within the seed's stream");
    a->add_option("--config", config_path, "JSON config file");

    std::uint64_t draws = 100000;
    auto* s = app.add_subcommand("sample-check", "empirical class frequencies under weighted sampling");
    s->add_option("--manifest", manifest_path, "labeled manifest CSV")->required();
    s->add_option("--draws", draws, "number of draws");
    s->add_option("--seed", seed, "RNG seed");
    s->add_option("--config", config_path, "JSON config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        int code = app.exit(err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (t->parsed())
            return run_train(train_manifest, val_manifest, train_root, val_root, config_path, arch,
                             out_dir, t->count("--seed") > 0, seed, threads);
        if (p->parsed())
            return run_predict(ckpt_path, manifest_path, root, config_path, out_path, threads);
        if (e->parsed()) return run_ensemble(pred_paths, out_path);
        if (v->parsed()) return run_eval(preds_path_opt, manifest_path, out_path);
        if (a->parsed())
            return run_augment_preview(in_path, out_path, config_path, seed, sample_index);
        if (s->parsed()) return run_sample_check(manifest_path, config_path, seed, draws);
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 2;
}
