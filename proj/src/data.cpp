#include "scam/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "scam/errors.hpp"
#include "scam/image_io.hpp"

namespace scam {

namespace fs = std::filesystem;

DatasetManifest DatasetManifest::open(const std::string& root, const std::string& split,
                                      int64_t num_labels) {
  DatasetManifest m;
  m.root = root;
  m.split = split;
  m.num_labels = num_labels;
  const fs::path base = fs::path(root) / split;
  if (!fs::is_directory(base)) throw DataError("missing split directory " + base.string());

  const auto index = base / "index.txt";
  if (fs::exists(index)) {
    std::ifstream in(index);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      std::string img, msk;
      if (!(ls >> img >> msk)) throw DataError("malformed index line: " + line);
      m.items.push_back({fs::path(img).stem().string(), (base / img).string(),
                         (base / msk).string()});
    }
    return m;
  }

  const auto images = base / "images";
  const auto masks = base / "masks";
  if (!fs::is_directory(images) || !fs::is_directory(masks)) {
    throw DataError(base.string() + " needs images/ and masks/ directories");
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(images)) {
    if (e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const auto mask = masks / (f.stem().string() + ".png");
    if (!fs::exists(mask)) throw DataError("no mask for image " + f.string());
    m.items.push_back({f.stem().string(), f.string(), mask.string()});
  }
  return m;
}

void DatasetManifest::load_remap(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read remap file " + path);
  label_remap.clear();
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    int64_t from = 0, to = 0;
    if (!(ls >> from)) continue;
    if (!(ls >> to)) throw DataError("remap line needs two columns: " + line);
    label_remap[from] = to;
  }
}

void DatasetManifest::write_index(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  const fs::path base = fs::path(root) / split;
  for (const auto& item : items) {
    out << fs::relative(item.image_path, base).string() << ' '
        << fs::relative(item.mask_path, base).string() << '\n';
  }
}

LoadedItem load_item(const DatasetManifest& manifest, size_t index) {
  if (index >= manifest.items.size()) throw DataError("item index out of range");
  const auto& item = manifest.items[index];
  auto rgb = read_rgb_png(item.image_path);
  auto labels = read_label_png(item.mask_path);
  if (rgb.size(0) != labels.size(0) || rgb.size(1) != labels.size(1)) {
    throw DataError(item.stem + ": image and mask dimensions differ");
  }

  if (!manifest.label_remap.empty()) {
    auto mapped = labels.clone();
    auto* src = labels.data_ptr<int64_t>();
    auto* dst = mapped.data_ptr<int64_t>();
    std::set<int64_t> unmapped;
    for (int64_t i = 0; i < labels.numel(); ++i) {
      auto it = manifest.label_remap.find(src[i]);
      if (it == manifest.label_remap.end()) {
        unmapped.insert(src[i]);
      } else {
        dst[i] = it->second;
      }
    }
    if (!unmapped.empty()) {
      std::string list;
      for (auto l : unmapped) list += (list.empty() ? "" : ",") + std::to_string(l);
      throw DataError(item.stem + ": unmapped label(s) " + list);
    }
    labels = mapped;
  }

  const auto hi = labels.max().item<int64_t>();
  if (hi >= manifest.num_labels) {
    throw DataError(item.stem + ": label " + std::to_string(hi) + " outside [0, " +
                    std::to_string(manifest.num_labels) + ")");
  }
  if (!manifest.allow_missing_labels) {
    for (auto required : manifest.required_labels) {
      if (!labels.eq(required).any().item<bool>()) {
        throw DataError(item.stem + ": required label " + std::to_string(required) +
                        " is missing");
      }
    }
  }
  return LoadedItem{to_signed_unit(rgb), SemanticMask::from_labels(labels, manifest.num_labels)};
}

Batch InMemoryDataset::batch(const torch::Tensor& indices) const {
  return Batch{images.index_select(0, indices),
               SemanticMask{labels.index_select(0, indices), num_labels}};
}

Batch InMemoryDataset::range(int64_t begin, int64_t end) const {
  return Batch{images.slice(0, begin, end), SemanticMask{labels.slice(0, begin, end), num_labels}};
}

InMemoryDataset load_dataset(const DatasetManifest& manifest) {
  InMemoryDataset ds;
  ds.num_labels = manifest.num_labels;
  std::vector<torch::Tensor> images, labels;
  for (size_t i = 0; i < manifest.size(); ++i) {
    auto item = load_item(manifest, i);
    if (!images.empty() && item.image.sizes() != images.front().sizes()) {
      throw DataError(manifest.items[i].stem + ": image size differs from the rest of the split");
    }
    images.push_back(item.image);
    labels.push_back(item.mask.labels[0]);
    ds.stems.push_back(manifest.items[i].stem);
  }
  if (images.empty()) throw DataError("split " + manifest.split + " is empty");
  ds.images = torch::stack(images);
  ds.labels = torch::stack(labels);
  return ds;
}

void SyntheticSpec::validate() const {
  if (image_size < 4) throw ConfigError("synthetic image size must be at least 4");
  if (num_labels < 2) throw ConfigError("synthetic data needs a background and one shape label");
  if (shapes_per_label < 1) throw ConfigError("shapes_per_label must be positive");
  if (train_count < 0 || test_count < 0) throw ConfigError("sample counts must be non-negative");
}

namespace {

struct Point {
  double x, y;
};

bool inside_convex(const std::vector<Point>& poly, double x, double y) {
  bool pos = false, neg = false;
  for (size_t i = 0; i < poly.size(); ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % poly.size()];
    const double cross = (b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x);
    pos |= cross > 0;
    neg |= cross < 0;
  }
  return !(pos && neg);
}

}  // namespace

SyntheticSample synthesize_sample(const SyntheticSpec& spec, uint64_t stream, int64_t index) {
  std::seed_seq seq{static_cast<uint32_t>(spec.seed), static_cast<uint32_t>(spec.seed >> 32),
                    static_cast<uint32_t>(stream), static_cast<uint32_t>(index)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto jitter = [&](double v) {
    return std::clamp(v + spec.color_jitter * (2.0 * unit(rng) - 1.0), 0.05, 0.95);
  };
  auto base_color = [&](int64_t label) {
    if (label < static_cast<int64_t>(spec.palette.size())) return spec.palette[label];
    std::mt19937_64 pal(spec.seed * 7919 + label);
    return std::array<double, 3>{unit(pal), unit(pal), unit(pal)};
  };

  const int64_t n = spec.image_size;
  auto canvas = torch::empty({n, n, 3}, torch::kFloat64);
  auto labels = torch::zeros({n, n}, torch::kInt64);
  auto* px = canvas.data_ptr<double>();
  auto* lab = labels.data_ptr<int64_t>();

  // background: per-image colour jitter plus a linear gradient between two colours
  auto bg = base_color(0);
  std::array<double, 3> c0{jitter(bg[0]), jitter(bg[1]), jitter(bg[2])};
  std::array<double, 3> delta;
  for (auto& v : delta) v = spec.gradient_strength * (2.0 * unit(rng) - 1.0);
  const double theta = 2.0 * std::numbers::pi * unit(rng);
  const double dx = std::cos(theta), dy = std::sin(theta);
  for (int64_t y = 0; y < n; ++y) {
    for (int64_t x = 0; x < n; ++x) {
      const double u = (x + 0.5) / n * 2.0 - 1.0;
      const double v = (y + 0.5) / n * 2.0 - 1.0;
      const double t = (u * dx + v * dy) / std::numbers::sqrt2;  // in [-1, 1]
      for (int c = 0; c < 3; ++c) {
        px[(y * n + x) * 3 + c] = std::clamp(c0[c] + 0.5 * t * delta[c], 0.0, 1.0);
      }
    }
  }

  for (int64_t label = 1; label < spec.num_labels; ++label) {
    auto base = base_color(label);
    const std::array<double, 3> color{jitter(base[0]), jitter(base[1]), jitter(base[2])};
    for (int64_t s = 0; s < spec.shapes_per_label; ++s) {
      const double cx = (0.2 + 0.6 * unit(rng)) * n;
      const double cy = (0.2 + 0.6 * unit(rng)) * n;
      std::function<bool(double, double)> covers;
      if (label % 2 == 1) {
        const double rx = (0.12 + 0.18 * unit(rng)) * n;
        const double ry = (0.12 + 0.18 * unit(rng)) * n;
        const double rot = std::numbers::pi * unit(rng);
        const double cr = std::cos(rot), sr = std::sin(rot);
        covers = [=](double x, double y) {
          const double ex = ((x - cx) * cr + (y - cy) * sr) / rx;
          const double ey = (-(x - cx) * sr + (y - cy) * cr) / ry;
          return ex * ex + ey * ey <= 1.0;
        };
      } else {
        const int vertices = 3 + static_cast<int>(unit(rng) * 3.0);  // 3..5
        std::vector<double> angles(vertices);
        for (auto& a : angles) a = 2.0 * std::numbers::pi * unit(rng);
        std::sort(angles.begin(), angles.end());
        std::vector<Point> poly;
        for (auto a : angles) {
          const double r = (0.15 + 0.17 * unit(rng)) * n;
          poly.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
        }
        covers = [poly](double x, double y) { return inside_convex(poly, x, y); };
      }
      for (int64_t y = 0; y < n; ++y) {
        for (int64_t x = 0; x < n; ++x) {
          if (!covers(x + 0.5, y + 0.5)) continue;
          lab[y * n + x] = label;
          for (int c = 0; c < 3; ++c) px[(y * n + x) * 3 + c] = color[c];
        }
      }
    }
  }
  auto rgb = canvas.mul(255.0).round().clamp(0, 255).to(torch::kUInt8).contiguous();
  return SyntheticSample{rgb, labels};
}

void generate_synthetic(const SyntheticSpec& spec, const std::string& root) {
  spec.validate();
  const std::pair<const char*, int64_t> splits[] = {{"train", spec.train_count},
                                                    {"test", spec.test_count}};
  uint64_t stream = 0;
  for (const auto& [split, count] : splits) {
    const fs::path base = fs::path(root) / split;
    fs::create_directories(base / "images");
    fs::create_directories(base / "masks");
    std::ofstream index(base / "index.txt");
    for (int64_t i = 0; i < count; ++i) {
      char stem[32];
      std::snprintf(stem, sizeof(stem), "%06lld", static_cast<long long>(i));
      auto sample = synthesize_sample(spec, stream, i);
      write_rgb_png((base / "images" / (std::string(stem) + ".png")).string(), sample.rgb);
      write_label_png((base / "masks" / (std::string(stem) + ".png")).string(), sample.labels);
      index << "images/" << stem << ".png masks/" << stem << ".png\n";
    }
    ++stream;
  }
}

}  // namespace scam
