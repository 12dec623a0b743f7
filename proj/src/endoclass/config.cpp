#include "endoclass/config.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "endoclass/nn.hpp"

namespace endoclass {
namespace config {

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void bad(const std::string& what) {
    throw std::invalid_argument("config: " + what);
}

double as_double(const ordered_json& j, const std::string& key) {
    if (!j.is_number()) bad("'" + key + "' must be a number");
    return j.get<double>();
}

int as_int(const ordered_json& j, const std::string& key) {
    if (!j.is_number_integer()) bad("'" + key + "' must be an integer");
    return j.get<int>();
}

std::array<double, 2> as_pair(const ordered_json& j, const std::string& key) {
    if (!j.is_array() || j.size() != 2) bad("'" + key + "' must be a 2-element array");
    return {as_double(j[0], key), as_double(j[1], key)};
}

std::array<double, 3> as_triple(const ordered_json& j, const std::string& key) {
    if (!j.is_array() || j.size() != 3) bad("'" + key + "' must be a 3-element array");
    return {as_double(j[0], key), as_double(j[1], key), as_double(j[2], key)};
}

void reject_unknown(const ordered_json& obj, const std::vector<std::string>& known,
                    const std::string& prefix) {
    for (auto& [key, value] : obj.items()) {
        (void)value;
        bool ok = false;
        for (const auto& k : known)
            if (key == k) {
                ok = true;
                break;
            }
        if (!ok) bad("unknown key '" + prefix + key + "'");
    }
}

void apply_train(train::TrainConfig& t, const ordered_json& j) {
    reject_unknown(j, {"batch_size", "max_epochs", "patience", "improvement_tolerance"}, "train.");
    if (j.contains("batch_size")) t.batch_size = as_int(j["batch_size"], "train.batch_size");
    if (j.contains("max_epochs")) t.max_epochs = as_int(j["max_epochs"], "train.max_epochs");
    if (j.contains("patience")) t.patience = as_int(j["patience"], "train.patience");
    if (j.contains("improvement_tolerance"))
        t.improvement_tolerance = as_double(j["improvement_tolerance"], "train.improvement_tolerance");
}

void apply_optim(optim::AdamWConfig& o, const ordered_json& j) {
    reject_unknown(j, {"lr", "weight_decay", "betas", "eps"}, "optim.");
    if (j.contains("lr")) o.lr = as_double(j["lr"], "optim.lr");
    if (j.contains("weight_decay")) o.weight_decay = as_double(j["weight_decay"], "optim.weight_decay");
    if (j.contains("betas")) {
        auto b = as_pair(j["betas"], "optim.betas");
        o.beta1 = b[0];
        o.beta2 = b[1];
    }
    if (j.contains("eps")) o.eps = as_double(j["eps"], "optim.eps");
}

void apply_loss(train::LossSpec& l, const ordered_json& j) {
    reject_unknown(j, {"gamma", "alpha", "reduction"}, "loss.");
    if (j.contains("gamma")) l.gamma = as_double(j["gamma"], "loss.gamma");
    if (j.contains("alpha")) {
        const auto& a = j["alpha"];
        if (a.is_number()) {
            l.alpha_mode = train::AlphaMode::uniform;
            l.alpha_scalar = a.get<double>();
        } else if (a.is_string()) {
            if (a.get<std::string>() != "inverse_frequency")
                bad("'loss.alpha' string form must be \"inverse_frequency\"");
            l.alpha_mode = train::AlphaMode::inverse_frequency;
        } else if (a.is_array()) {
            l.alpha_mode = train::AlphaMode::explicit_list;
            l.alpha_list.clear();
            for (const auto& v : a) l.alpha_list.push_back(as_double(v, "loss.alpha"));
        } else {
            bad("'loss.alpha' must be a number, \"inverse_frequency\", or a list");
        }
    }
    if (j.contains("reduction")) {
        if (!j["reduction"].is_string()) bad("'loss.reduction' must be a string");
        std::string r = j["reduction"].get<std::string>();
        if (r == "mean")
            l.reduction = loss::Reduction::mean;
        else if (r == "sum")
            l.reduction = loss::Reduction::sum;
        else
            bad("'loss.reduction' must be \"mean\" or \"sum\"");
    }
}

void apply_augment(augment::AugmentConfig& a, const ordered_json& j) {
    reject_unknown(j,
                   {"target_size", "p_hflip", "p_vflip", "max_rotation_deg", "max_translate_frac",
                    "scale_range", "p_perspective", "perspective_distortion", "jitter", "norm_mean",
                    "norm_std", "p_erase", "erase_area_frac", "p_blur", "blur_sigma_range"},
                   "augment.");
    if (j.contains("target_size")) {
        const auto& t = j["target_size"];
        if (!t.is_array() || t.size() != 2) bad("'augment.target_size' must be [w,h]");
        a.target_w = as_int(t[0], "augment.target_size");
        a.target_h = as_int(t[1], "augment.target_size");
    }
    if (j.contains("p_hflip")) a.p_hflip = as_double(j["p_hflip"], "augment.p_hflip");
    if (j.contains("p_vflip")) a.p_vflip = as_double(j["p_vflip"], "augment.p_vflip");
    if (j.contains("max_rotation_deg"))
        a.max_rotation_deg = as_double(j["max_rotation_deg"], "augment.max_rotation_deg");
    if (j.contains("max_translate_frac"))
        a.max_translate_frac = as_double(j["max_translate_frac"], "augment.max_translate_frac");
    if (j.contains("scale_range")) {
        auto r = as_pair(j["scale_range"], "augment.scale_range");
        a.scale_lo = r[0];
        a.scale_hi = r[1];
    }
    if (j.contains("p_perspective"))
        a.p_perspective = as_double(j["p_perspective"], "augment.p_perspective");
    if (j.contains("perspective_distortion"))
        a.perspective_distortion =
            as_double(j["perspective_distortion"], "augment.perspective_distortion");
    if (j.contains("jitter")) {
        const auto& jj = j["jitter"];
        if (!jj.is_object()) bad("'augment.jitter' must be an object");
        reject_unknown(jj, {"brightness", "contrast", "saturation", "hue"}, "augment.jitter.");
        if (jj.contains("brightness"))
            a.jitter_brightness = as_double(jj["brightness"], "augment.jitter.brightness");
        if (jj.contains("contrast"))
            a.jitter_contrast = as_double(jj["contrast"], "augment.jitter.contrast");
        if (jj.contains("saturation"))
            a.jitter_saturation = as_double(jj["saturation"], "augment.jitter.saturation");
        if (jj.contains("hue")) a.jitter_hue = as_double(jj["hue"], "augment.jitter.hue");
    }
    if (j.contains("norm_mean")) a.norm_mean = as_triple(j["norm_mean"], "augment.norm_mean");
    if (j.contains("norm_std")) a.norm_std = as_triple(j["norm_std"], "augment.norm_std");
    if (j.contains("p_erase")) a.p_erase = as_double(j["p_erase"], "augment.p_erase");
    if (j.contains("erase_area_frac")) {
        auto r = as_pair(j["erase_area_frac"], "augment.erase_area_frac");
        a.erase_area_lo = r[0];
        a.erase_area_hi = r[1];
    }
    if (j.contains("p_blur")) a.p_blur = as_double(j["p_blur"], "augment.p_blur");
    if (j.contains("blur_sigma_range")) {
        auto r = as_pair(j["blur_sigma_range"], "augment.blur_sigma_range");
        a.blur_sigma_lo = r[0];
        a.blur_sigma_hi = r[1];
    }
}

}  // namespace

void apply_config_json(RunConfig& cfg, const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const std::exception& e) {
        bad(std::string("parse error: ") + e.what());
    }
    if (!j.is_object()) bad("top level must be a JSON object");
    reject_unknown(j, {"seed", "threads", "arch", "classes", "train", "optim", "loss", "augment"},
                   "");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
            bad("'seed' must be a non-negative integer");
        auto s = j["seed"].get<std::int64_t>();
        if (s < 0) bad("'seed' must be a non-negative integer");
        cfg.train.seed = static_cast<std::uint64_t>(s);
    }
    if (j.contains("threads")) cfg.train.threads = as_int(j["threads"], "threads");
    if (j.contains("arch")) {
        if (!j["arch"].is_string()) bad("'arch' must be a string");
        cfg.arch = j["arch"].get<std::string>();
        nn::Arch::parse(cfg.arch);  // fail early on bad descriptors
    }
    if (j.contains("classes")) {
        if (!j["classes"].is_array()) bad("'classes' must be a list of names");
        std::vector<std::string> names;
        for (const auto& n : j["classes"]) {
            if (!n.is_string()) bad("'classes' must be a list of names");
            names.push_back(n.get<std::string>());
        }
        cfg.catalog = ClassCatalog(std::move(names));
    }
    if (j.contains("train")) apply_train(cfg.train, j["train"]);
    if (j.contains("optim")) apply_optim(cfg.train.optimizer, j["optim"]);
    if (j.contains("loss")) apply_loss(cfg.train.loss, j["loss"]);
    if (j.contains("augment")) apply_augment(cfg.train.augment, j["augment"]);
    cfg.train.validate();
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    RunConfig cfg;
    apply_config_json(cfg, text);
    return cfg;
}

std::string resolved_config_json(const RunConfig& cfg) {
    const auto& t = cfg.train;
    ordered_json j;
    j["seed"] = t.seed;
    j["threads"] = t.threads;
    j["arch"] = cfg.arch;
    j["classes"] = cfg.catalog.names;
    j["train"] = {{"batch_size", t.batch_size},
                  {"max_epochs", t.max_epochs},
                  {"patience", t.patience},
                  {"improvement_tolerance", t.improvement_tolerance}};
    j["optim"] = {{"lr", t.optimizer.lr},
                  {"weight_decay", t.optimizer.weight_decay},
                  {"betas", {t.optimizer.beta1, t.optimizer.beta2}},
                  {"eps", t.optimizer.eps}};
    ordered_json alpha;
    switch (t.loss.alpha_mode) {
        case train::AlphaMode::uniform: alpha = t.loss.alpha_scalar; break;
        case train::AlphaMode::inverse_frequency: alpha = "inverse_frequency"; break;
        case train::AlphaMode::explicit_list: alpha = t.loss.alpha_list; break;
    }
    j["loss"] = {{"gamma", t.loss.gamma},
                 {"alpha", alpha},
                 {"reduction", t.loss.reduction == loss::Reduction::mean ? "mean" : "sum"}};
    const auto& a = t.augment;
    j["augment"] = {{"target_size", {a.target_w, a.target_h}},
                    {"p_hflip", a.p_hflip},
                    {"p_vflip", a.p_vflip},
                    {"max_rotation_deg", a.max_rotation_deg},
                    {"max_translate_frac", a.max_translate_frac},
                    {"scale_range", {a.scale_lo, a.scale_hi}},
                    {"p_perspective", a.p_perspective},
                    {"perspective_distortion", a.perspective_distortion},
                    {"jitter",
                     {{"brightness", a.jitter_brightness},
                      {"contrast", a.jitter_contrast},
                      {"saturation", a.jitter_saturation},
                      {"hue", a.jitter_hue}}},
                    {"norm_mean", a.norm_mean},
                    {"norm_std", a.norm_std},
                    {"p_erase", a.p_erase},
                    {"erase_area_frac", {a.erase_area_lo, a.erase_area_hi}},
                    {"p_blur", a.p_blur},
                    {"blur_sigma_range", {a.blur_sigma_lo, a.blur_sigma_hi}}};
    return j.dump(2) + "\n";
}

}  // namespace config
}  // namespace endoclass
