#include "gdk/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "gdk/error.hpp"

namespace gdk {
namespace fs = std::filesystem;

namespace {

std::optional<fs::path> find_mask(const fs::path& root, const std::string& stem) {
    for (const char* ext : {".ppm", ".pgm"}) {
        fs::path p = root / "masks" / (stem + ext);
        if (fs::exists(p)) return p;
    }
    return std::nullopt;
}

std::vector<fs::path> list_images(const fs::path& root) {
    const fs::path dir = root / "images";
    if (!fs::is_directory(dir)) throw UsageError("dataset has no images/ directory: " + root.string());
    std::vector<fs::path> images;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".ppm") images.push_back(entry.path());
    std::sort(images.begin(), images.end());
    return images;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace

std::string_view split_tag_name(SplitTag tag) { return tag == SplitTag::Train ? "train" : "test"; }

std::vector<Sample> DatasetManifest::subset(SplitTag tag) const {
    if (split.empty()) throw UsageError("dataset has no split assignment");
    std::vector<Sample> out;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (split[i] == tag) out.push_back(samples[i]);
    return out;
}

std::uint64_t stable_hash(std::string_view text, std::uint64_t seed) {
    std::uint64_t h = 14695981039346656037ull ^ (seed * 0x9E3779B97F4A7C15ull);
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::vector<BBox> parse_labels(std::string_view text, const std::string& source) {
    std::vector<BBox> boxes;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream fields(line);
        long long class_id = 0;
        double cx = 0, cy = 0, w = 0, h = 0;
        std::string extra;
        if (!(fields >> class_id >> cx >> cy >> w >> h) || (fields >> extra))
            throw ParseError(source, line_no, "expected 'class_id cx cy w h'");
        if (class_id < 0 || class_id > 1000000) throw ParseError(source, line_no, "class id out of range");
        for (double v : {cx, cy, w, h})
            if (!std::isfinite(v) || v < 0.0 || v > 1.0)
                throw ValidationError(source + ":" + std::to_string(line_no) + ": coordinate outside [0, 1]");
        boxes.push_back(BBox{cx, cy, w, h, 1.0, static_cast<int>(class_id)});
    }
    return boxes;
}

std::vector<BBox> parse_label_file(const fs::path& path) { return parse_labels(read_text(path), path.string()); }

std::string format_labels(const std::vector<BBox>& boxes) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(6);
    for (const BBox& b : boxes) out << b.class_id << ' ' << b.cx << ' ' << b.cy << ' ' << b.w << ' ' << b.h << '\n';
    return out.str();
}

void write_label_file(const fs::path& path, const std::vector<BBox>& boxes) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write labels: " + path.string());
    out << format_labels(boxes);
}

DatasetManifest load_dataset(const fs::path& root, std::vector<std::string>* warnings) {
    DatasetManifest manifest;
    manifest.root = root;
    for (const fs::path& image : list_images(root)) {
        const std::string stem = image.stem().string();
        fs::path label = root / "labels" / (stem + ".txt");
        if (!fs::exists(label)) {
            if (warnings) warnings->push_back("skipping " + image.string() + ": no label file");
            continue;
        }
        Sample s;
        s.image = image;
        s.label = label;
        s.mask = find_mask(root, stem);
        s.boxes = parse_label_file(label);
        manifest.samples.push_back(std::move(s));
    }
    if (fs::exists(root / "split.txt")) apply_split_manifest(root / "split.txt", manifest);
    return manifest;
}

DatasetManifest split_dataset(DatasetManifest manifest, double train_fraction, std::uint64_t seed) {
    const std::size_t n = manifest.samples.size();
    if (n < 2) throw UsageError("need at least two samples to split");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw UsageError("train fraction must lie in (0, 1)");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    // The epsilon absorbs representation error such as 0.8 * 2156 = 1724.8000000000002.
    auto train_count = static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(n) - 1e-9));
    train_count = std::clamp<std::size_t>(train_count, 1, n - 1);
    manifest.split.assign(n, SplitTag::Test);
    for (std::size_t i = 0; i < train_count; ++i) manifest.split[order[i]] = SplitTag::Train;
    return manifest;
}

void write_split_manifest(const fs::path& path, const DatasetManifest& manifest) {
    if (manifest.split.size() != manifest.samples.size()) throw UsageError("manifest has no split assignment");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write split manifest: " + path.string());
    for (std::size_t i = 0; i < manifest.samples.size(); ++i)
        out << manifest.samples[i].image.filename().string() << ' ' << split_tag_name(manifest.split[i]) << '\n';
}

void apply_split_manifest(const fs::path& path, DatasetManifest& manifest) {
    std::map<std::string, SplitTag> tags;
    std::istringstream in(read_text(path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream fields(line);
        std::string name, tag, extra;
        if (!(fields >> name)) continue;
        if (!(fields >> tag) || (fields >> extra)) throw ParseError(path.string(), line_no, "expected '<file> train|test'");
        if (tag == "train") tags[name] = SplitTag::Train;
        else if (tag == "test") tags[name] = SplitTag::Test;
        else throw ParseError(path.string(), line_no, "unknown split tag '" + tag + "'");
    }
    std::vector<SplitTag> split;
    for (const Sample& s : manifest.samples) {
        auto it = tags.find(s.image.filename().string());
        if (it == tags.end()) throw ValidationError(path.string() + ": no split entry for " + s.image.filename().string());
        split.push_back(it->second);
    }
    manifest.split = std::move(split);
}

std::vector<Component> connected_components(const GrayImage& mask, std::size_t min_pixels) {
    const std::size_t w = mask.width, h = mask.height;
    std::vector<std::uint8_t> seen(w * h, 0);
    std::vector<Component> components;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < w * h; ++start) {
        if (seen[start] || mask.pixels[start] < 128) continue;
        Component comp;
        comp.x0 = comp.x1 = start % w;
        comp.y0 = comp.y1 = start / w;
        seen[start] = 1;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            comp.pixels.push_back(p);
            const std::size_t px = p % w, py = p / w;
            comp.x0 = std::min(comp.x0, px);
            comp.x1 = std::max(comp.x1, px);
            comp.y0 = std::min(comp.y0, py);
            comp.y1 = std::max(comp.y1, py);
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const auto nx = static_cast<std::ptrdiff_t>(px) + dx;
                    const auto ny = static_cast<std::ptrdiff_t>(py) + dy;
                    if (nx < 0 || ny < 0 || nx >= static_cast<std::ptrdiff_t>(w) || ny >= static_cast<std::ptrdiff_t>(h))
                        continue;
                    const std::size_t q = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
                    if (!seen[q] && mask.pixels[q] >= 128) {
                        seen[q] = 1;
                        stack.push_back(q);
                    }
                }
            }
        }
        if (comp.pixels.size() < min_pixels) continue;
        std::sort(comp.pixels.begin(), comp.pixels.end());
        components.push_back(std::move(comp));
    }
    return components;
}

BBox component_box(const Component& c, std::size_t width, std::size_t height) {
    const double W = static_cast<double>(width), H = static_cast<double>(height);
    return BBox::from_corners(static_cast<double>(c.x0) / W, static_cast<double>(c.y0) / H,
                              static_cast<double>(c.x1 + 1) / W, static_cast<double>(c.y1 + 1) / H);
}

DatasetManifest generate_synthetic(const fs::path& out_dir, const SyntheticOptions& options) {
    if (options.count == 0) throw UsageError("synthetic dataset size must be positive");
    if (options.image_size < 32) throw UsageError("synthetic image size must be at least 32");
    if (!(options.margin >= 0.0 && options.margin <= 0.25)) throw UsageError("synthetic margin must lie in [0, 0.25]");
    fs::create_directories(out_dir / "images");
    fs::create_directories(out_dir / "labels");
    fs::create_directories(out_dir / "masks");

    const std::size_t size = options.image_size;
    const double sz = static_cast<double>(size);
    DatasetManifest manifest;
    manifest.root = out_dir;

    for (std::size_t index = 0; index < options.count; ++index) {
        std::ostringstream name;
        name << "img_" << std::setw(4) << std::setfill('0') << index;
        const std::string stem = name.str();
        std::mt19937_64 rng(stable_hash(stem, options.seed));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

        // Mucosa-like background: base tint, two low-frequency waves, pixel noise.
        Image image(size, size);
        const double base[3] = {uniform(150, 200), uniform(60, 100), uniform(60, 100)};
        const double fx = uniform(1.0, 3.0), fy = uniform(1.0, 3.0), phase = uniform(0.0, 6.283);
        for (std::size_t y = 0; y < size; ++y) {
            for (std::size_t x = 0; x < size; ++x) {
                const double u = static_cast<double>(x) / sz, v = static_cast<double>(y) / sz;
                const double shade = 18.0 * std::sin(6.283 * fx * u + phase) * std::cos(6.283 * fy * v);
                for (std::size_t c = 0; c < 3; ++c) {
                    const double value = base[c] + shade + uniform(-8.0, 8.0);
                    image.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
                }
            }
        }

        // Distractors: dark vessel-like strokes, never labeled.
        const int strokes = static_cast<int>(uniform(0.0, 3.0));
        for (int s = 0; s < strokes; ++s) {
            const double x0 = uniform(0, sz), y0 = uniform(0, sz), x1 = uniform(0, sz), y1 = uniform(0, sz);
            const double thickness = uniform(1.0, 2.5);
            for (int step = 0; step <= 400; ++step) {
                const double t = step / 400.0;
                const double px = x0 + t * (x1 - x0), py = y0 + t * (y1 - y0);
                for (double dy = -thickness; dy <= thickness; dy += 1.0) {
                    for (double dx = -thickness; dx <= thickness; dx += 1.0) {
                        const long qx = std::lround(px + dx), qy = std::lround(py + dy);
                        if (qx < 0 || qy < 0 || qx >= static_cast<long>(size) || qy >= static_cast<long>(size)) continue;
                        image.at(static_cast<std::size_t>(qx), static_cast<std::size_t>(qy), 0) = 90;
                        image.at(static_cast<std::size_t>(qx), static_cast<std::size_t>(qy), 1) = 30;
                        image.at(static_cast<std::size_t>(qx), static_cast<std::size_t>(qy), 2) = 40;
                    }
                }
            }
        }

        // Polyps: non-overlapping ellipses drawn last.
        GrayImage mask(size, size);
        std::vector<BBox> boxes;
        struct Extent {
            double x0, y0, x1, y1;
        };
        std::vector<Extent> placed;
        const int wanted = 1 + static_cast<int>(uniform(0.0, 3.0));
        const double min_axis = std::max(3.0, 0.07 * sz), max_axis = 0.17 * sz;
        const double edge = options.margin * sz;
        for (int attempt = 0; attempt < 200 && static_cast<int>(placed.size()) < wanted; ++attempt) {
            const double a = uniform(min_axis, max_axis), b = uniform(min_axis, max_axis);
            const double cx = uniform(a + 1.0 + edge, sz - a - 1.0 - edge);
            const double cy = uniform(b + 1.0 + edge, sz - b - 1.0 - edge);
            const Extent e{cx - a - 2, cy - b - 2, cx + a + 2, cy + b + 2};
            bool clash = false;
            for (const Extent& p : placed)
                clash = clash || !(e.x1 < p.x0 || p.x1 < e.x0 || e.y1 < p.y0 || p.y1 < e.y0);
            if (clash) continue;
            placed.push_back(e);

            const double color[3] = {uniform(220, 255), uniform(150, 200), uniform(110, 160)};
            GrayImage own(size, size);
            for (std::size_t y = 0; y < size; ++y) {
                for (std::size_t x = 0; x < size; ++x) {
                    const double dx = (static_cast<double>(x) + 0.5 - cx) / a;
                    const double dy = (static_cast<double>(y) + 0.5 - cy) / b;
                    const double r2 = dx * dx + dy * dy;
                    if (r2 > 1.0) continue;
                    const double light = 1.0 - 0.25 * r2;
                    for (std::size_t c = 0; c < 3; ++c)
                        image.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(color[c] * light), 0L, 255L));
                    own.at(x, y) = 255;
                    mask.at(x, y) = 255;
                }
            }
            const auto comps = connected_components(own, 1);
            if (comps.empty()) continue;
            boxes.push_back(component_box(comps.front(), size, size));
        }

        Sample sample;
        sample.image = out_dir / "images" / (stem + ".ppm");
        sample.label = out_dir / "labels" / (stem + ".txt");
        sample.mask = out_dir / "masks" / (stem + ".ppm");
        save_image(sample.image, image);
        save_mask(*sample.mask, mask);
        write_label_file(sample.label, boxes);
        sample.boxes = parse_label_file(sample.label);
        manifest.samples.push_back(std::move(sample));
    }
    return manifest;
}

DatasetManifest import_etis(const fs::path& root, std::vector<std::string>* warnings) {
    DatasetManifest manifest;
    manifest.root = root;
    fs::create_directories(root / "labels");
    for (const fs::path& image_path : list_images(root)) {
        const std::string stem = image_path.stem().string();
        const auto mask_path = find_mask(root, stem);
        if (!mask_path) {
            if (warnings) warnings->push_back("skipping " + image_path.string() + ": no mask");
            continue;
        }
        const GrayImage mask = load_mask(*mask_path);
        std::vector<BBox> boxes;
        for (const Component& c : connected_components(mask)) boxes.push_back(component_box(c, mask.width, mask.height));
        Sample s;
        s.image = image_path;
        s.label = root / "labels" / (stem + ".txt");
        s.mask = mask_path;
        write_label_file(s.label, boxes);
        s.boxes = parse_label_file(s.label);
        manifest.samples.push_back(std::move(s));
    }
    return manifest;
}

}  // namespace gdk
