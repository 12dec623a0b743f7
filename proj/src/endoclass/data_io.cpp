#include "endoclass/data_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <jpeglib.h>
#include <json.hpp>
#include <png.h>

namespace endoclass {
namespace data_io {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

void put_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    put_bytes(os, b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    put_bytes(os, b, 8);
}

void put_i64(std::ostream& os, std::int64_t v) { put_u64(os, static_cast<std::uint64_t>(v)); }
void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

void put_string(std::ostream& os, const std::string& s) {
    put_u32(os, static_cast<std::uint32_t>(s.size()));
    put_bytes(os, s.data(), s.size());
}

void get_bytes(std::istream& is, void* p, std::size_t n, const std::string& path) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
        throw std::runtime_error("checkpoint '" + path + "' is truncated");
}

std::uint32_t get_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    get_bytes(is, b, 4, path);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& is, const std::string& path) {
    unsigned char b[8];
    get_bytes(is, b, 8, path);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

std::int64_t get_i64(std::istream& is, const std::string& path) {
    return static_cast<std::int64_t>(get_u64(is, path));
}
double get_f64(std::istream& is, const std::string& path) {
    return std::bit_cast<double>(get_u64(is, path));
}

std::string get_string(std::istream& is, const std::string& path) {
    std::uint32_t n = get_u32(is, path);
    if (n > (1u << 20)) throw std::runtime_error("checkpoint '" + path + "' has an oversized string");
    std::string s(n, '\0');
    if (n) get_bytes(is, s.data(), n, path);
    return s;
}

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

void jpeg_silence(j_common_ptr, int) {}

ImageBuffer decode_jpeg(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("decode_image: cannot open '" + path + "'");

    jpeg_decompress_struct cinfo{};
    JpegErrorMgr err{};
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_error_exit;
    err.pub.emit_message = jpeg_silence;
    std::vector<unsigned char> row;
    ImageBuffer out;

    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        std::fclose(f);
        throw std::runtime_error("decode_image: JPEG decode failed for '" + path + "': " +
                                 err.message);
    }

    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);

    out = ImageBuffer(static_cast<int>(cinfo.output_width), static_cast<int>(cinfo.output_height));
    row.resize(static_cast<std::size_t>(cinfo.output_width) * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        unsigned char* rows[1] = {row.data()};
        jpeg_read_scanlines(&cinfo, rows, 1);
        int y = static_cast<int>(cinfo.output_scanline) - 1;
        for (std::size_t i = 0; i < row.size(); ++i)
            out.data[(static_cast<std::size_t>(y) * cinfo.output_width) * 3 + i] = row[i] / 255.0;
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    std::fclose(f);
    return out;
}

ImageBuffer decode_png(const std::string& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str()))
        throw std::runtime_error("decode_image: PNG decode failed for '" + path + "': " +
                                 image.message);
    image.format = PNG_FORMAT_RGB;
    std::vector<unsigned char> buf(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw std::runtime_error("decode_image: PNG decode failed for '" + path + "': " + msg);
    }
    ImageBuffer out(static_cast<int>(image.width), static_cast<int>(image.height));
    for (std::size_t i = 0; i < buf.size(); ++i) out.data[i] = buf[i] / 255.0;
    return out;
}

void write_png(const std::string& path, const std::vector<unsigned char>& rgb, int w, int h) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(w);
    image.height = static_cast<png_uint_32>(h);
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.c_str(), 0, rgb.data(), 0, nullptr))
        throw std::runtime_error("write_image: PNG write failed for '" + path + "': " +
                                 image.message);
}

void write_jpeg(const std::string& path, const std::vector<unsigned char>& rgb, int w, int h) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("write_image: cannot open '" + path + "'");

    jpeg_compress_struct cinfo{};
    JpegErrorMgr err{};
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_error_exit;
    err.pub.emit_message = jpeg_silence;

    if (setjmp(err.jump)) {
        jpeg_destroy_compress(&cinfo);
        std::fclose(f);
        throw std::runtime_error("write_image: JPEG write failed for '" + path + "': " +
                                 err.message);
    }

    jpeg_create_compress(&cinfo);
    jpeg_stdio_dest(&cinfo, f);
    cinfo.image_width = static_cast<JDIMENSION>(w);
    cinfo.image_height = static_cast<JDIMENSION>(h);
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, 95, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        const unsigned char* row = rgb.data() + static_cast<std::size_t>(cinfo.next_scanline) * w * 3;
        JSAMPROW rows[1] = {const_cast<JSAMPROW>(row)};
        jpeg_write_scanlines(&cinfo, rows, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    std::fclose(f);
}

bool has_suffix_ci(const std::string& s, const std::string& suffix) {
    if (s.size() < suffix.size()) return false;
    for (std::size_t i = 0; i < suffix.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(s[s.size() - suffix.size() + i])) != suffix[i])
            return false;
    return true;
}

ordered_json class_metrics_to_json(const metrics::ClassMetrics& m) {
    ordered_json j;
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
    j["specificity"] = m.specificity;
    if (m.auc)
        j["auc"] = *m.auc;
    else
        j["auc"] = nullptr;
    return j;
}

}  // namespace

LabeledManifest load_manifest(const std::string& path, const ClassCatalog& catalog) {
    catalog.validate();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_manifest: cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("load_manifest: '" + path + "' is empty");
    if (strip_cr(line) != "image_path,label")
        throw std::runtime_error("load_manifest: '" + path +
                                 "' must start with header 'image_path,label'");

    LabeledManifest manifest;
    std::unordered_set<std::string> seen;
    std::size_t row = 1;  // header line
    while (std::getline(in, line)) {
        ++row;
        line = strip_cr(line);
        if (line.empty()) continue;
        auto fields = split_csv(line);
        if (fields.size() != 2)
            throw std::runtime_error("load_manifest: expected 2 fields at row " +
                                     std::to_string(row));
        const std::string& id = fields[0];
        const std::string& label = fields[1];
        if (id.empty())
            throw std::runtime_error("load_manifest: empty image_path at row " +
                                     std::to_string(row));
        int idx = catalog.index_of(label);
        if (idx < 0)
            throw std::runtime_error("unknown class '" + label + "' at row " + std::to_string(row));
        if (!seen.insert(id).second)
            throw std::runtime_error("load_manifest: duplicate image_path '" + id + "' at row " +
                                     std::to_string(row));
        manifest.records.push_back({id, idx});
    }
    return manifest;
}

ImageBuffer decode_image(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw std::runtime_error("decode_image: cannot open '" + path + "'");
    unsigned char magic[4] = {};
    probe.read(reinterpret_cast<char*>(magic), 4);
    if (probe.gcount() >= 4 && magic[0] == 0x89 && magic[1] == 'P' && magic[2] == 'N' &&
        magic[3] == 'G') {
        probe.close();
        return decode_png(path);
    }
    if (probe.gcount() >= 2 && magic[0] == 0xFF && magic[1] == 0xD8) {
        probe.close();
        return decode_jpeg(path);
    }
    throw std::runtime_error("decode_image: '" + path + "' is neither PNG nor JPEG");
}

void write_image(const std::string& path, const ImageBuffer& img) {
    if (img.normalized)
        throw std::invalid_argument("write_image expects a raw image; denormalize first");
    std::vector<unsigned char> rgb(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        double v = std::clamp(img.data[i], 0.0, 1.0);
        rgb[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    if (has_suffix_ci(path, ".jpg") || has_suffix_ci(path, ".jpeg"))
        write_jpeg(path, rgb, img.width, img.height);
    else
        write_png(path, rgb, img.width, img.height);
}

void write_predictions_csv(const std::string& path, const std::vector<std::string>& image_ids,
                           const ProbMatrix& probs, const ClassCatalog& catalog) {
    catalog.validate();
    if (probs.rows != image_ids.size())
        throw std::invalid_argument("write_predictions_csv: ids/probs length mismatch");
    if (probs.cols != catalog.size())
        throw std::invalid_argument("write_predictions_csv: probs width does not match catalog");
    for (std::size_t r = 0; r < probs.rows; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < probs.cols; ++c) {
            double v = probs(r, c);
            if (!(v >= -1e-9 && v <= 1.0 + 1e-9))
                throw std::invalid_argument("row " + std::to_string(r) +
                                            " not a probability vector");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-6)
            throw std::invalid_argument("row " + std::to_string(r) + " not a probability vector");
    }

    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_predictions_csv: cannot open '" + path + "'");
    out << "image_path";
    for (const auto& name : catalog.names) out << ',' << name;
    out << '\n';
    char buf[32];
    for (std::size_t r = 0; r < probs.rows; ++r) {
        out << basename_of(image_ids[r]);
        for (std::size_t c = 0; c < probs.cols; ++c) {
            std::snprintf(buf, sizeof buf, "%.6f", probs(r, c));
            out << ',' << buf;
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write_predictions_csv: write failed for '" + path + "'");
}

Predictions read_predictions_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_predictions_csv: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("read_predictions_csv: '" + path + "' is empty");
    auto header = split_csv(strip_cr(line));
    if (header.size() < 3 || header[0] != "image_path")
        throw std::runtime_error("read_predictions_csv: bad header in '" + path + "'");
    ClassCatalog catalog(std::vector<std::string>(header.begin() + 1, header.end()));

    std::vector<std::string> ids;
    std::vector<double> values;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        line = strip_cr(line);
        if (line.empty()) continue;
        auto fields = split_csv(line);
        if (fields.size() != header.size())
            throw std::runtime_error("read_predictions_csv: wrong field count at row " +
                                     std::to_string(row));
        ids.push_back(fields[0]);
        double sum = 0.0;
        std::size_t first = values.size();
        for (std::size_t c = 1; c < fields.size(); ++c) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(fields[c], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != fields[c].size() || !(v >= -1e-9 && v <= 1.0 + 1e-9))
                throw std::runtime_error("read_predictions_csv: bad probability at row " +
                                         std::to_string(row));
            values.push_back(v);
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-3)
            throw std::runtime_error("read_predictions_csv: row " + std::to_string(row) +
                                     " does not sum to 1");
        if (std::abs(sum - 1.0) > 1e-12)
            for (std::size_t i = first; i < values.size(); ++i) values[i] /= sum;
    }

    ProbMatrix probs(ids.size(), header.size() - 1);
    probs.data = std::move(values);
    return Predictions{std::move(catalog), std::move(ids), std::move(probs)};
}

std::string metrics_report_to_json(const metrics::MetricsReport& report) {
    if (report.per_class.empty() || report.per_class.size() != report.class_names.size())
        throw std::invalid_argument("report must cover all catalog classes");
    ordered_json j;
    ordered_json per_class;
    for (std::size_t i = 0; i < report.class_names.size(); ++i)
        per_class[report.class_names[i]] = class_metrics_to_json(report.per_class[i]);
    j["per_class"] = std::move(per_class);
    ordered_json agg;
    agg["balanced_accuracy"] = report.balanced_accuracy;
    agg["mean_auc"] = report.mean_auc;
    agg["combined_score"] = report.combined_score;
    agg["macro_precision"] = report.macro_precision;
    agg["macro_f1"] = report.macro_f1;
    agg["macro_specificity"] = report.macro_specificity;
    j["aggregate"] = std::move(agg);
    return j.dump(2) + "\n";
}

void write_metrics_json(const std::string& path, const metrics::MetricsReport& report) {
    std::string text = metrics_report_to_json(report);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_metrics_json: cannot open '" + path + "'");
    out << text;
    if (!out) throw std::runtime_error("write_metrics_json: write failed for '" + path + "'");
}

metrics::MetricsReport read_metrics_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_metrics_json: cannot open '" + path + "'");
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("read_metrics_json: parse error in '" + path + "': " + e.what());
    }
    if (!j.contains("per_class") || !j.contains("aggregate"))
        throw std::runtime_error("read_metrics_json: missing per_class/aggregate in '" + path +
                                 "'");
    metrics::MetricsReport report;
    for (auto& [name, m] : j["per_class"].items()) {
        report.class_names.push_back(name);
        metrics::ClassMetrics cm;
        cm.precision = m.at("precision").get<double>();
        cm.recall = m.at("recall").get<double>();
        cm.f1 = m.at("f1").get<double>();
        cm.specificity = m.at("specificity").get<double>();
        if (!m.at("auc").is_null()) cm.auc = m.at("auc").get<double>();
        report.per_class.push_back(cm);
    }
    if (report.per_class.empty())
        throw std::runtime_error("report must cover all catalog classes");
    const auto& agg = j["aggregate"];
    report.balanced_accuracy = agg.at("balanced_accuracy").get<double>();
    report.mean_auc = agg.at("mean_auc").get<double>();
    report.combined_score = agg.at("combined_score").get<double>();
    report.macro_precision = agg.at("macro_precision").get<double>();
    report.macro_f1 = agg.at("macro_f1").get<double>();
    report.macro_specificity = agg.at("macro_specificity").get<double>();
    return report;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    ckpt.catalog.validate();
    ckpt.params.arch.validate();
    if (ckpt.params.flat.size() != ckpt.params.arch.param_count())
        throw std::invalid_argument("save_checkpoint: param vector does not match arch");
    if (!(ckpt.best_combined_score >= 0.0 && ckpt.best_combined_score <= 1.0))
        throw std::invalid_argument("save_checkpoint: best_combined_score must lie in [0,1]");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open '" + path + "'");
    out.write("ECKP", 4);
    put_u32(out, ckpt.format_version);
    put_u32(out, static_cast<std::uint32_t>(ckpt.catalog.size()));
    for (const auto& name : ckpt.catalog.names) put_string(out, name);
    put_string(out, ckpt.params.arch.to_string());
    put_i64(out, ckpt.epoch);
    put_f64(out, ckpt.best_combined_score);
    put_u64(out, ckpt.rng_seed);
    put_u64(out, ckpt.params.flat.size());
    for (double v : ckpt.params.flat) put_f64(out, v);
    if (!out) throw std::runtime_error("save_checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open '" + path + "'");
    char magic[4] = {};
    get_bytes(in, magic, 4, path);
    if (std::memcmp(magic, "ECKP", 4) != 0)
        throw std::runtime_error("load_checkpoint: '" + path + "' is not a checkpoint file");
    std::uint32_t version = get_u32(in, path);
    if (version != kCheckpointFormatVersion)
        throw std::runtime_error("load_checkpoint: unsupported format version " +
                                 std::to_string(version) + " in '" + path + "'");
    std::uint32_t n_classes = get_u32(in, path);
    if (n_classes < 2 || n_classes > 4096)
        throw std::runtime_error("load_checkpoint: implausible class count in '" + path + "'");
    std::vector<std::string> names;
    names.reserve(n_classes);
    for (std::uint32_t i = 0; i < n_classes; ++i) names.push_back(get_string(in, path));

    Checkpoint ckpt;
    ckpt.format_version = version;
    ckpt.catalog = ClassCatalog(std::move(names));
    nn::Arch arch = nn::Arch::parse(get_string(in, path));
    ckpt.epoch = get_i64(in, path);
    ckpt.best_combined_score = get_f64(in, path);
    if (!(ckpt.best_combined_score >= 0.0 && ckpt.best_combined_score <= 1.0))
        throw std::runtime_error("load_checkpoint: best_combined_score out of range in '" + path +
                                 "'");
    ckpt.rng_seed = get_u64(in, path);
    std::uint64_t count = get_u64(in, path);
    if (count != arch.param_count())
        throw std::runtime_error("load_checkpoint: parameter count does not match arch in '" +
                                 path + "'");
    std::vector<double> flat(count);
    for (std::uint64_t i = 0; i < count; ++i) flat[i] = get_f64(in, path);
    char extra;
    if (in.read(&extra, 1) && in.gcount() == 1)
        throw std::runtime_error("load_checkpoint: trailing bytes in '" + path + "'");
    ckpt.params = nn::ModelParams(std::move(arch), std::move(flat));
    return ckpt;
}

std::string basename_of(const std::string& path) {
    auto pos = path.find_last_of('/');
    return pos == std::string::npos ? path : path.substr(pos + 1);
}

}  // namespace data_io
}  // namespace endoclass
