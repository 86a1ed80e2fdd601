#include "ptlab/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "ptlab/errors.hpp"
#include "ptlab/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ptlab {

json image_to_json(const Image& image) {
    json j;
    j["height"] = image.height;
    j["width"] = image.width;
    j["channels"] = image.channels;
    j["pixels"] = image.pixels;
    return j;
}

Image image_from_json(const json& j) {
    Image img;
    img.height = j.at("height").get<int>();
    img.width = j.at("width").get<int>();
    img.channels = j.at("channels").get<int>();
    img.pixels = j.at("pixels").get<std::vector<float>>();
    if (img.height <= 0 || img.width <= 0 || img.channels <= 0 ||
        img.pixels.size() != img.size()) {
        throw std::runtime_error("image JSON has inconsistent shape");
    }
    return img;
}

json trigger_to_json(const TriggerSpec& trigger) {
    json j;
    std::visit(
        [&](const auto& t) {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, PatchTrigger>) {
                j["kind"] = "patch";
                j["anchor_row"] = t.anchor_row;
                j["anchor_col"] = t.anchor_col;
                j["pattern"] = image_to_json(t.pattern);
            } else if constexpr (std::is_same_v<T, BlendTrigger>) {
                j["kind"] = "blend";
                j["alpha"] = t.alpha;
                j["trigger_image"] = image_to_json(t.trigger_image);
            } else {
                j["kind"] = "sig";
                j["amplitude"] = t.amplitude;
                j["frequency"] = t.frequency;
            }
        },
        trigger);
    return j;
}

TriggerSpec trigger_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "patch") {
        PatchTrigger t;
        t.anchor_row = j.at("anchor_row").get<int>();
        t.anchor_col = j.at("anchor_col").get<int>();
        t.pattern = image_from_json(j.at("pattern"));
        return t;
    }
    if (kind == "blend") {
        BlendTrigger t;
        t.alpha = j.at("alpha").get<float>();
        t.trigger_image = image_from_json(j.at("trigger_image"));
        return t;
    }
    if (kind == "sig") {
        SinusoidalTrigger t;
        t.amplitude = j.at("amplitude").get<float>();
        t.frequency = j.at("frequency").get<int>();
        return t;
    }
    throw std::runtime_error("unknown trigger kind '" + kind + "'");
}

namespace {

constexpr const char* kDatasetFormat = "ptlab-dataset-v1";

void write_f32_le(std::ofstream& out, float v) {
    const auto bits = std::bit_cast<uint32_t>(v);
    const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                           static_cast<char>((bits >> 16) & 0xff),
                           static_cast<char>((bits >> 24) & 0xff)};
    out.write(bytes, 4);
}

float read_f32_le(const unsigned char* p) {
    const uint32_t bits = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                          (static_cast<uint32_t>(p[2]) << 16) |
                          (static_cast<uint32_t>(p[3]) << 24);
    return std::bit_cast<float>(bits);
}

}  // namespace

void save_dataset(const PoisonedDataset& dataset, const std::string& prefix) {
    dataset.data.validate();
    std::set<int32_t> mask(dataset.poison_mask.begin(), dataset.poison_mask.end());

    json index;
    index["format"] = kDatasetFormat;
    index["num_classes"] = dataset.data.num_classes;
    index["height"] = dataset.data.height();
    index["width"] = dataset.data.width();
    index["channels"] = dataset.data.channels();
    index["pixel_file"] = fs::path(prefix + ".pix").filename().string();

    json examples = json::array();
    for (const auto& ex : dataset.data.examples) {
        json e;
        e["id"] = ex.id;
        e["label"] = ex.label;
        e["poisoned"] = mask.count(ex.id) != 0;
        if (!ex.path.empty()) e["path"] = ex.path;
        examples.push_back(std::move(e));
    }
    index["examples"] = std::move(examples);

    if (!dataset.poison_mask.empty()) {
        json plan;
        plan["mode"] = poison_mode_name(dataset.plan.mode);
        plan["target_class"] = dataset.plan.target_class;
        plan["rate"] = dataset.plan.rate;
        plan["seed"] = dataset.plan.seed;
        plan["trigger"] = trigger_to_json(dataset.plan.trigger);
        index["plan"] = std::move(plan);
    }

    {
        std::ofstream out(prefix + ".json", std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + prefix + ".json");
        out << index.dump(2) << "\n";
        if (!out) throw std::runtime_error("write failed for " + prefix + ".json");
    }
    {
        std::ofstream out(prefix + ".pix", std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + prefix + ".pix");
        for (const auto& ex : dataset.data.examples) {
            for (float v : ex.image.pixels) write_f32_le(out, v);
        }
        if (!out) throw std::runtime_error("write failed for " + prefix + ".pix");
    }
}

PoisonedDataset load_dataset(const std::string& prefix) {
    std::ifstream in(prefix + ".json", std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + prefix + ".json");
    json index;
    try {
        in >> index;
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed dataset index " + prefix + ".json: " + e.what());
    }

    if (index.value("format", "") != kDatasetFormat) {
        throw std::runtime_error(prefix + ".json is not a " + std::string(kDatasetFormat) +
                                 " index");
    }

    PoisonedDataset ds;
    ds.data.num_classes = index.at("num_classes").get<int>();
    const int height = index.at("height").get<int>();
    const int width = index.at("width").get<int>();
    const int channels = index.at("channels").get<int>();
    if (height <= 0 || width <= 0 || channels <= 0) {
        throw std::runtime_error(prefix + ".json declares a non-positive image shape");
    }
    const size_t per_image = static_cast<size_t>(height) * width * channels;

    std::ifstream pix(prefix + ".pix", std::ios::binary);
    if (!pix) throw std::runtime_error("cannot open " + prefix + ".pix");
    std::vector<unsigned char> blob((std::istreambuf_iterator<char>(pix)),
                                    std::istreambuf_iterator<char>());

    const auto& examples = index.at("examples");
    if (blob.size() != examples.size() * per_image * 4) {
        throw std::runtime_error(prefix + ".pix holds " + std::to_string(blob.size()) +
                                 " bytes, expected " +
                                 std::to_string(examples.size() * per_image * 4));
    }

    size_t offset = 0;
    for (const auto& e : examples) {
        LabeledExample ex;
        ex.id = e.at("id").get<int32_t>();
        ex.label = e.at("label").get<int>();
        if (e.contains("path")) ex.path = e.at("path").get<std::string>();
        ex.image.height = height;
        ex.image.width = width;
        ex.image.channels = channels;
        ex.image.pixels.resize(per_image);
        for (size_t i = 0; i < per_image; ++i, offset += 4) {
            ex.image.pixels[i] = read_f32_le(blob.data() + offset);
        }
        if (e.at("poisoned").get<bool>()) ds.poison_mask.push_back(ex.id);
        ds.data.examples.push_back(std::move(ex));
    }
    std::sort(ds.poison_mask.begin(), ds.poison_mask.end());

    if (index.contains("plan")) {
        const auto& plan = index.at("plan");
        ds.plan.mode = poison_mode_from_name(plan.at("mode").get<std::string>());
        ds.plan.target_class = plan.at("target_class").get<int>();
        ds.plan.rate = plan.at("rate").get<double>();
        ds.plan.seed = plan.at("seed").get<uint64_t>();
        ds.plan.trigger = trigger_from_json(plan.at("trigger"));
    }

    ds.data.validate();
    return ds;
}

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string pnm_token(std::istream& in, const std::string& path) {
    std::string tok;
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    while (c != EOF && !std::isspace(c)) {
        tok.push_back(static_cast<char>(c));
        c = in.get();
    }
    if (tok.empty()) throw std::runtime_error("truncated PNM header in " + path);
    return tok;
}

int pnm_int(std::istream& in, const std::string& path, const char* what) {
    const std::string tok = pnm_token(in, path);
    try {
        size_t pos = 0;
        const int v = std::stoi(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(std::string("bad PNM ") + what + " '" + tok + "' in " + path);
    }
}

}  // namespace

Image load_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open image " + path);

    const std::string magic = pnm_token(in, path);
    int channels = 0;
    bool ascii = false;
    if (magic == "P2") {
        channels = 1;
        ascii = true;
    } else if (magic == "P3") {
        channels = 3;
        ascii = true;
    } else if (magic == "P5") {
        channels = 1;
    } else if (magic == "P6") {
        channels = 3;
    } else {
        throw std::runtime_error("unsupported image format '" + magic + "' in " + path +
                                 " (want P2/P3/P5/P6)");
    }

    const int width = pnm_int(in, path, "width");
    const int height = pnm_int(in, path, "height");
    const int maxval = pnm_int(in, path, "maxval");
    if (width <= 0 || height <= 0) {
        throw std::runtime_error("non-positive PNM dimensions in " + path);
    }
    if (maxval <= 0 || maxval > 65535) {
        throw std::runtime_error("PNM maxval " + std::to_string(maxval) + " out of range in " +
                                 path);
    }

    Image img(height, width, channels);
    const size_t count = img.size();
    const float scale = 1.0f / static_cast<float>(maxval);

    if (ascii) {
        for (size_t i = 0; i < count; ++i) {
            const int v = pnm_int(in, path, "sample");
            if (v < 0 || v > maxval) {
                throw std::runtime_error("PNM sample " + std::to_string(v) +
                                         " exceeds maxval in " + path);
            }
            img.pixels[i] = static_cast<float>(v) * scale;
        }
    } else {
        // Binary samples: one byte when maxval < 256, else two bytes big-endian.
        const int bytes_per = maxval < 256 ? 1 : 2;
        std::vector<unsigned char> raw(count * bytes_per);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (static_cast<size_t>(in.gcount()) != raw.size()) {
            throw std::runtime_error("truncated PNM pixel data in " + path);
        }
        for (size_t i = 0; i < count; ++i) {
            int v;
            if (bytes_per == 1) {
                v = raw[i];
            } else {
                v = (static_cast<int>(raw[2 * i]) << 8) | raw[2 * i + 1];
            }
            if (v > maxval) {
                throw std::runtime_error("PNM sample " + std::to_string(v) +
                                         " exceeds maxval in " + path);
            }
            img.pixels[i] = static_cast<float>(v) * scale;
        }
    }
    return img;
}

Dataset load_image_folder(const std::string& root) {
    if (!fs::is_directory(root)) {
        throw ConfigError("image folder '" + root + "' is not a directory");
    }

    std::vector<std::string> class_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) class_dirs.push_back(entry.path().filename().string());
    }
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.size() < 2) {
        throw ConfigError("image folder '" + root + "' needs at least 2 class directories, found " +
                          std::to_string(class_dirs.size()));
    }

    static const std::set<std::string> kExtensions = {".pgm", ".ppm", ".pnm"};

    Dataset ds;
    ds.num_classes = static_cast<int>(class_dirs.size());
    int32_t next_id = 0;
    for (size_t label = 0; label < class_dirs.size(); ++label) {
        const fs::path dir = fs::path(root) / class_dirs[label];
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (!entry.is_regular_file()) continue;
            std::string ext = entry.path().extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            if (kExtensions.count(ext) != 0) files.push_back(entry.path().filename().string());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) {
            throw ConfigError("class directory '" + dir.string() + "' has no PNM images");
        }
        for (const auto& name : files) {
            LabeledExample ex;
            ex.id = next_id++;
            ex.label = static_cast<int>(label);
            ex.path = class_dirs[label] + "/" + name;
            ex.image = load_pnm((dir / name).string());
            ds.examples.push_back(std::move(ex));
        }
    }
    ds.validate();
    return ds;
}

}  // namespace ptlab
