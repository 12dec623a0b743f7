#include <doctest.h>

#include <cmath>
#include <json.hpp>

#include "endoclass/config.hpp"
#include "endoclass/train.hpp"
#include "testutil.hpp"

using namespace endoclass;
using namespace endoclass::train;
using testutil::catch_message;
using testutil::contains;
using testutil::TempDir;

TEST_CASE("early stopper: the scripted plateau stops on the seventh score") {
    EarlyStopper st;
    st.patience = 5;
    st.tolerance = 1e-4;

    auto first = stopper_update(st, 0.5);
    CHECK(first.improved);
    CHECK(!first.stop);
    auto second = stopper_update(st, 0.6);
    CHECK(second.improved);
    CHECK(!second.stop);
    for (int i = 0; i < 4; ++i) {
        auto d = stopper_update(st, 0.6);  // plateau: within tolerance of best
        CHECK(!d.improved);
        CHECK(!d.stop);
    }
    auto last = stopper_update(st, 0.6);  // fifth non-improvement
    CHECK(!last.improved);
    CHECK(last.stop);
}

TEST_CASE("early stopper: improvement must clear the tolerance") {
    EarlyStopper st;
    st.patience = 2;
    st.tolerance = 1e-4;
    CHECK(stopper_update(st, 0.5).improved);
    CHECK(!stopper_update(st, 0.50005).improved);  // within tolerance: no
    CHECK(stopper_update(st, 0.50011).improved);   // clears it: yes
    CHECK(st.best_score == 0.50011);
    CHECK(st.epochs_since_improvement == 0);

    CHECK(catch_message([&] { stopper_update(st, std::nan("")); }) == "early stopper: NaN score");
}

TEST_CASE("early stopper: random sequences stop within patience of the last improvement") {
    Rng rng(606);
    for (int trial = 0; trial < 100; ++trial) {
        EarlyStopper st;
        st.patience = 1 + static_cast<int>(rng.uniform_index(6));
        st.tolerance = 1e-4;

        int last_improvement = 0;
        int epoch = 0;
        while (epoch < 200) {
            ++epoch;
            auto d = stopper_update(st, rng.uniform());
            if (d.improved) {
                last_improvement = epoch;
                CHECK(!d.stop);
            }
            if (d.stop) break;
        }
        if (epoch < 200) CHECK(epoch == last_improvement + st.patience);
        CHECK(epoch - last_improvement <= st.patience);
    }
}

TEST_CASE("loss spec: uniform and explicit alphas resolve directly") {
    LossSpec spec;
    spec.gamma = 1.5;
    spec.alpha_scalar = 0.25;
    auto cfg = spec.resolve({10, 20, 30});
    CHECK(cfg.gamma == 1.5);
    CHECK(cfg.alpha == std::vector<double>{0.25, 0.25, 0.25});

    spec.alpha_mode = AlphaMode::explicit_list;
    spec.alpha_list = {0.1, 0.2, 0.7};
    CHECK(spec.resolve({10, 20, 30}).alpha == spec.alpha_list);
}

TEST_CASE("loss spec: inverse-frequency alphas have mean 1 over non-empty classes") {
    LossSpec spec;
    spec.alpha_mode = AlphaMode::inverse_frequency;

    auto cfg = spec.resolve({4, 1});
    REQUIRE(cfg.alpha.size() == 2);
    CHECK(cfg.alpha[0] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(cfg.alpha[1] == doctest::Approx(1.6).epsilon(1e-12));

    auto with_empty = spec.resolve({4, 1, 0});
    CHECK(with_empty.alpha[0] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(with_empty.alpha[1] == doctest::Approx(1.6).epsilon(1e-12));
    CHECK(with_empty.alpha[2] == doctest::Approx(1.0).epsilon(1e-12));

    // rarer class gets the larger weight, mean stays 1
    auto skew = spec.resolve({900, 100});
    CHECK(skew.alpha[1] / skew.alpha[0] == doctest::Approx(9.0).epsilon(1e-12));
    CHECK((skew.alpha[0] + skew.alpha[1]) / 2 == doctest::Approx(1.0).epsilon(1e-12));

    CHECK(contains(catch_message([&] { spec.resolve({0, 0}); }), "non-empty dataset"));
}

TEST_CASE("pool_side_for_arch inverts 3*s^2") {
    CHECK(pool_side_for_arch(nn::Arch::parse("linear:192x10")) == 8);
    CHECK(pool_side_for_arch(nn::Arch::parse("linear:12x3")) == 2);
    CHECK(pool_side_for_arch(nn::Arch::parse("mlp:27x8x3")) == 3);
    CHECK(catch_message([] { pool_side_for_arch(nn::Arch::parse("linear:200x10")); }) ==
          "arch input dim must be 3*s^2 for pooled image features, got 200");
}

TEST_CASE("train config validation names the offending field") {
    TrainConfig cfg;
    cfg.batch_size = 0;
    CHECK(contains(catch_message([&] { cfg.validate(); }), "batch_size"));
    cfg = TrainConfig{};
    cfg.patience = 0;
    CHECK(contains(catch_message([&] { cfg.validate(); }), "patience"));
    cfg = TrainConfig{};
    cfg.loss.gamma = -1.0;
    CHECK(contains(catch_message([&] { cfg.validate(); }), "gamma"));
    cfg = TrainConfig{};
    cfg.improvement_tolerance = -1e-9;
    CHECK(contains(catch_message([&] { cfg.validate(); }), "improvement_tolerance"));
    cfg = TrainConfig{};
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("history serializes one json object per epoch without wall time") {
    std::vector<EpochRecord> history(2);
    history[0] = {1, 2.31, 0.4, 0.55, 0.475, true, 12.5};
    history[1] = {2, 1.9, 0.5, 0.6, 0.55, false, 11.0};
    auto text = history_to_jsonl(history);
    REQUIRE(!text.empty());
    CHECK(text.back() == '\n');

    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    REQUIRE(lines.size() == 2);
    auto first = nlohmann::json::parse(lines[0]);
    CHECK(first["epoch"] == 1);
    CHECK(first["train_loss"].get<double>() == doctest::Approx(2.31));
    CHECK(first["val_combined_score"].get<double>() == doctest::Approx(0.475));
    CHECK(first["improved"] == true);
    CHECK(!first.contains("wall_time_sec"));
    auto second = nlohmann::json::parse(lines[1]);
    CHECK(second["epoch"] == 2);
    CHECK(second["improved"] == false);
}

namespace {

struct BlobFixture {
    TempDir dir{"train"};
    ClassCatalog catalog{std::vector<std::string>{"red", "green", "blue"}};
    testutil::SyntheticDataset train_set;
    testutil::SyntheticDataset val_set;
    LabeledManifest train_manifest;
    LabeledManifest val_manifest;

    BlobFixture() {
        train_set = testutil::make_blob_dataset(dir, "train", catalog.names, {40, 40, 40}, 16, 1);
        val_set = testutil::make_blob_dataset(dir, "val", catalog.names, {15, 15, 15}, 16, 2);
        train_manifest = data_io::load_manifest(train_set.manifest, catalog);
        val_manifest = data_io::load_manifest(val_set.manifest, catalog);
    }

    TrainConfig config() const {
        TrainConfig cfg;
        cfg.batch_size = 16;
        cfg.max_epochs = 4;
        cfg.seed = 7;
        cfg.optimizer.lr = 1e-2;
        cfg.augment.target_w = 16;
        cfg.augment.target_h = 16;
        return cfg;
    }
};

}  // namespace

TEST_CASE("train: a full run is reproducible bit for bit and threads do not matter") {
    BlobFixture fx;
    auto arch = nn::Arch::parse("linear:12x3");
    auto cfg = fx.config();

    auto a = train::train(fx.train_manifest, fx.train_set.root, fx.val_manifest, fx.val_set.root,
                          arch, fx.catalog, cfg);
    auto b = train::train(fx.train_manifest, fx.train_set.root, fx.val_manifest, fx.val_set.root,
                          arch, fx.catalog, cfg);
    CHECK(history_to_jsonl(a.history) == history_to_jsonl(b.history));
    CHECK(a.best.params.flat == b.best.params.flat);
    CHECK(a.best.epoch == b.best.epoch);

    auto threaded_cfg = cfg;
    threaded_cfg.threads = 3;
    auto c = train::train(fx.train_manifest, fx.train_set.root, fx.val_manifest, fx.val_set.root,
                          arch, fx.catalog, threaded_cfg);
    CHECK(history_to_jsonl(a.history) == history_to_jsonl(c.history));
    CHECK(a.best.params.flat == c.best.params.flat);

    auto reseeded_cfg = cfg;
    reseeded_cfg.seed = 8;
    auto d = train::train(fx.train_manifest, fx.train_set.root, fx.val_manifest, fx.val_set.root,
                          arch, fx.catalog, reseeded_cfg);
    CHECK(history_to_jsonl(a.history) != history_to_jsonl(d.history));
}

TEST_CASE("train: history fields are internally consistent and checkpoints improve") {
    BlobFixture fx;
    auto arch = nn::Arch::parse("linear:12x3");
    auto cfg = fx.config();

    int sink_calls = 0;
    auto result = train::train(fx.train_manifest, fx.train_set.root, fx.val_manifest,
                               fx.val_set.root, arch, fx.catalog, cfg,
                               [](const EpochRecord&, void* ctx) { ++*static_cast<int*>(ctx); },
                               &sink_calls);

    REQUIRE(!result.history.empty());
    CHECK(sink_calls == static_cast<int>(result.history.size()));
    CHECK(result.history.front().epoch == 1);
    CHECK(result.history.front().improved);  // first epoch always beats -inf

    double last_best = -1.0;
    int last_improved_epoch = 0;
    for (std::size_t i = 0; i < result.history.size(); ++i) {
        const auto& rec = result.history[i];
        CHECK(rec.epoch == static_cast<int>(i) + 1);
        CHECK(rec.val_combined_score ==
              doctest::Approx((rec.val_balanced_accuracy + rec.val_mean_auc) / 2.0).epsilon(1e-12));
        CHECK(rec.train_loss >= 0.0);
        CHECK(rec.wall_time_sec >= 0.0);
        if (rec.improved) {
            if (last_best >= 0.0) CHECK(rec.val_combined_score > last_best + 1e-4);
            last_best = rec.val_combined_score;
            last_improved_epoch = rec.epoch;
        }
    }
    CHECK(result.best.epoch == last_improved_epoch);
    CHECK(result.best.best_combined_score == doctest::Approx(last_best).epsilon(1e-15));
    CHECK(result.best.rng_seed == cfg.seed);
    CHECK(result.best.catalog == fx.catalog);
    CHECK(result.best.params.flat.size() == arch.param_count());
}

TEST_CASE("train: a single epoch run checkpoints that epoch") {
    BlobFixture fx;
    auto cfg = fx.config();
    cfg.max_epochs = 1;
    auto result = train::train(fx.train_manifest, fx.train_set.root, fx.val_manifest,
                               fx.val_set.root, nn::Arch::parse("linear:12x3"), fx.catalog, cfg);
    REQUIRE(result.history.size() == 1);
    CHECK(result.history[0].improved);
    CHECK(result.best.epoch == 1);
}

TEST_CASE("train: first-epoch cross-entropy sits near log(k) for an untrained net") {
    TempDir dir("ce");
    auto catalog = default_catalog();  // ten classes
    std::vector<int> counts(10, 6);
    auto train_set = testutil::make_blob_dataset(dir, "train", catalog.names, counts, 8, 5);
    std::vector<int> val_counts(10, 2);
    auto val_set = testutil::make_blob_dataset(dir, "val", catalog.names, val_counts, 8, 6);
    auto train_manifest = data_io::load_manifest(train_set.manifest, catalog);
    auto val_manifest = data_io::load_manifest(val_set.manifest, catalog);

    TrainConfig cfg;
    cfg.max_epochs = 1;
    cfg.seed = 3;
    cfg.loss.gamma = 0.0;  // plain cross-entropy
    cfg.augment.target_w = 8;
    cfg.augment.target_h = 8;
    auto result = train::train(train_manifest, train_set.root, val_manifest, val_set.root,
                               nn::Arch::parse("linear:12x10"), catalog, cfg);
    REQUIRE(result.history.size() == 1);
    CHECK(std::abs(result.history[0].train_loss - std::log(10.0)) < 0.46);
}

TEST_CASE("train: learning actually separates the blob classes") {
    BlobFixture fx;
    auto cfg = fx.config();
    cfg.max_epochs = 12;
    auto result = train::train(fx.train_manifest, fx.train_set.root, fx.val_manifest,
                               fx.val_set.root, nn::Arch::parse("linear:12x3"), fx.catalog, cfg);
    CHECK(result.best.best_combined_score > 0.9);
    CHECK(result.history.back().train_loss < result.history.front().train_loss);
}

TEST_CASE("predict_probs: deterministic row-stochastic rows in manifest order") {
    BlobFixture fx;
    auto arch = nn::Arch::parse("linear:12x3");
    auto params = nn::init_params(arch, 99);
    auto cfg = fx.config();

    auto probs = predict_probs(params, fx.val_manifest, fx.val_set.root, cfg.augment);
    REQUIRE(probs.rows == fx.val_manifest.size());
    REQUIRE(probs.cols == 3);
    for (std::size_t r = 0; r < probs.rows; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < 3; ++c) sum += probs(r, c);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }

    auto again = predict_probs(params, fx.val_manifest, fx.val_set.root, cfg.augment, 4);
    CHECK(probs.data == again.data);  // thread count must not matter

    auto report = train::validate(params, fx.val_manifest, fx.val_set.root, fx.catalog,
                                  cfg.augment);
    CHECK(report.combined_score >= 0.0);
    CHECK(report.combined_score <= 1.0);
}

TEST_CASE("train: input validation") {
    BlobFixture fx;
    auto cfg = fx.config();
    LabeledManifest empty;
    CHECK(contains(catch_message([&] {
                       train::train(empty, fx.train_set.root, fx.val_manifest, fx.val_set.root,
                                    nn::Arch::parse("linear:12x3"), fx.catalog, cfg);
                   }),
                   "empty manifest"));
    CHECK(contains(catch_message([&] {
                       train::train(fx.train_manifest, fx.train_set.root, fx.val_manifest,
                                    fx.val_set.root, nn::Arch::parse("linear:12x5"), fx.catalog,
                                    cfg);
                   }),
                   "arch output dim"));
    auto bad = cfg;
    bad.loss.alpha_mode = AlphaMode::explicit_list;
    bad.loss.alpha_list = {1.0, 1.0};
    CHECK(contains(catch_message([&] {
                       train::train(fx.train_manifest, fx.train_set.root, fx.val_manifest,
                                    fx.val_set.root, nn::Arch::parse("linear:12x3"), fx.catalog,
                                    bad);
                   }),
                   "alpha list length"));
}

TEST_CASE("config: file round trip applies every group and rejects unknown keys") {
    TempDir dir("config");
    auto path = dir.file("run.json");
    std::ofstream out(path);
    out << R"({
  "seed": 11,
  "threads": 2,
  "arch": "mlp:27x16x3",
  "classes": ["x", "y", "z"],
  "train": {"batch_size": 8, "max_epochs": 3, "patience": 2, "improvement_tolerance": 0.001},
  "optim": {"lr": 0.005, "weight_decay": 0.01, "betas": [0.8, 0.99], "eps": 1e-7},
  "loss": {"gamma": 1.0, "alpha": "inverse_frequency", "reduction": "mean"},
  "augment": {"target_size": [12, 12], "p_hflip": 0.25, "scale_range": [0.95, 1.05],
              "jitter": {"brightness": 0.1, "contrast": 0.1, "saturation": 0.1, "hue": 0.02},
              "norm_mean": [0.4, 0.4, 0.4], "norm_std": [0.3, 0.3, 0.3]}
})";
    out.close();

    auto cfg = config::load_config_file(path);
    CHECK(cfg.train.seed == 11);
    CHECK(cfg.train.threads == 2);
    CHECK(cfg.arch == "mlp:27x16x3");
    CHECK(cfg.catalog.names == std::vector<std::string>{"x", "y", "z"});
    CHECK(cfg.train.batch_size == 8);
    CHECK(cfg.train.max_epochs == 3);
    CHECK(cfg.train.patience == 2);
    CHECK(cfg.train.improvement_tolerance == 0.001);
    CHECK(cfg.train.optimizer.lr == 0.005);
    CHECK(cfg.train.optimizer.beta1 == 0.8);
    CHECK(cfg.train.optimizer.beta2 == 0.99);
    CHECK(cfg.train.loss.gamma == 1.0);
    CHECK(cfg.train.loss.alpha_mode == AlphaMode::inverse_frequency);
    CHECK(cfg.train.augment.target_w == 12);
    CHECK(cfg.train.augment.p_hflip == 0.25);
    CHECK(cfg.train.augment.jitter_hue == 0.02);
    CHECK(cfg.train.augment.norm_mean[0] == 0.4);

    // resolved json reproduces the same config when re-applied
    auto resolved = config::resolved_config_json(cfg);
    config::RunConfig cfg2;
    config::apply_config_json(cfg2, resolved);
    CHECK(config::resolved_config_json(cfg2) == resolved);

    config::RunConfig fresh;
    CHECK(contains(catch_message([&] { config::apply_config_json(fresh, R"({"sead": 1})"); }),
                   "unknown key 'sead'"));
    CHECK(contains(
        catch_message([&] { config::apply_config_json(fresh, R"({"optim": {"lr2": 1}})"); }),
        "unknown key 'optim.lr2'"));
    CHECK(contains(
        catch_message([&] { config::apply_config_json(fresh, R"({"loss": {"alpha": true}})"); }),
        "alpha"));
}

TEST_CASE("config: explicit alpha list and scalar forms parse") {
    config::RunConfig cfg;
    config::apply_config_json(cfg, R"({"loss": {"alpha": 0.5}})");
    CHECK(cfg.train.loss.alpha_mode == AlphaMode::uniform);
    CHECK(cfg.train.loss.alpha_scalar == 0.5);

    config::apply_config_json(cfg, R"({"loss": {"alpha": [0.2, 0.3, 0.5]}})");
    CHECK(cfg.train.loss.alpha_mode == AlphaMode::explicit_list);
    CHECK(cfg.train.loss.alpha_list == std::vector<double>{0.2, 0.3, 0.5});
}
