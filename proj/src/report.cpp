#include "lowfield/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <tuple>
#include <stdexcept>

#include <json.hpp>

#include "lowfield/errors.hpp"
#include "lowfield/raster.hpp"

namespace lowfield {

using nlohmann::json;

Volume difference_map(const Volume& truth, const Volume& synthetic, bool signed_difference) {
  require_same_grid(truth, synthetic, "difference_map");
  std::vector<float> out(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const float d = truth[i] - synthetic[i];
    out[i] = signed_difference ? d : std::abs(d);
  }
  return truth.with_data(std::move(out));
}

std::string to_string(SlicePlane plane) {
  switch (plane) {
    case SlicePlane::axial: return "axial";
    case SlicePlane::coronal: return "coronal";
    case SlicePlane::sagittal: return "sagittal";
  }
  return "unknown";
}

SlicePlane slice_plane_from_string(const std::string& name) {
  for (auto p : {SlicePlane::axial, SlicePlane::coronal, SlicePlane::sagittal})
    if (to_string(p) == name) return p;
  throw std::invalid_argument("unknown slice plane '" + name + "'");
}

std::filesystem::path sidecar_path(const std::filesystem::path& figure_path) {
  auto p = figure_path;
  return p.replace_extension(".json");
}

namespace {

void write_json(const json& doc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw IoError(path.string() + ": write failed");
}

void require_writable_parent(const std::filesystem::path& path) {
  const auto parent = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  if (!std::filesystem::is_directory(parent))
    throw IoError(path.string() + ": parent directory does not exist");
}

// In-plane axes (horizontal, vertical) and the fixed axis of each plane.
struct PlaneAxes {
  int u, v, fixed;
};

PlaneAxes axes_of(SlicePlane plane) {
  switch (plane) {
    case SlicePlane::axial: return {0, 1, 2};
    case SlicePlane::coronal: return {0, 2, 1};
    case SlicePlane::sagittal: return {1, 2, 0};
  }
  return {0, 1, 2};
}

double quantile(std::vector<double> sorted, double q) {
  if (sorted.empty()) return std::nan("");
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

json histogram_json(const Histogram& h) { return {{"edges", h.edges}, {"counts", h.counts}}; }

void draw_histogram(Raster& img, const Histogram& h, std::size_t x0, std::size_t y0,
                    std::size_t w, std::size_t hgt) {
  img.fill_rect(x0, y0, w, hgt, 255);
  img.fill_rect(x0, y0 + hgt - 1, w, 1, 0);
  img.fill_rect(x0, y0, 1, hgt, 0);
  if (h.counts.empty()) return;
  const std::size_t peak = *std::max_element(h.counts.begin(), h.counts.end());
  if (peak == 0) return;
  const std::size_t bins = h.counts.size();
  const std::size_t plot_w = w - 4, plot_h = hgt - 4;
  for (std::size_t b = 0; b < bins; ++b) {
    const std::size_t bx0 = x0 + 2 + b * plot_w / bins;
    const std::size_t bx1 = x0 + 2 + (b + 1) * plot_w / bins;
    const std::size_t bh = h.counts[b] * plot_h / peak;
    img.fill_rect(bx0, y0 + hgt - 1 - bh, std::max<std::size_t>(1, bx1 - bx0 - 1), bh, 64);
  }
}

}  // namespace

PanelLayout panel_figure(const std::vector<std::pair<std::string, Volume>>& columns,
                         const std::filesystem::path& out_path, const PanelOptions& options) {
  if (columns.empty()) throw std::invalid_argument("panel_figure needs at least one column");
  if (options.planes.empty()) throw std::invalid_argument("panel_figure needs at least one plane");
  if (options.scale < 1 || options.gap < 0) throw std::invalid_argument("invalid panel scale/gap");
  const Volume& first = columns.front().second;
  for (const auto& [label, vol] : columns) require_same_grid(first, vol, "panel column '" + label + "'");
  require_writable_parent(out_path);

  PanelLayout layout;
  layout.window_low = first.min();
  layout.window_high = first.max();
  for (const auto& [label, vol] : columns) {
    layout.labels.push_back(label);
    layout.window_low = std::min<double>(layout.window_low, vol.min());
    layout.window_high = std::max<double>(layout.window_high, vol.max());
  }
  if (!(layout.window_high > layout.window_low)) layout.window_high = layout.window_low + 1.0;

  const Dims& d = first.dims();
  const auto scale = static_cast<std::size_t>(options.scale);
  const auto gap = static_cast<std::size_t>(options.gap);
  std::size_t tile_w = 0;
  std::vector<std::size_t> row_heights;
  for (auto plane : options.planes) {
    const auto ax = axes_of(plane);
    layout.rows.emplace_back(plane, d[ax.fixed] / 2);
    tile_w = std::max(tile_w, d[ax.u] * scale);
    row_heights.push_back(d[ax.v] * scale);
  }
  const std::size_t width = columns.size() * tile_w + (columns.size() + 1) * gap;
  std::size_t height = gap;
  for (auto h : row_heights) height += h + gap;

  Raster img(width, height, 0);
  const double span = layout.window_high - layout.window_low;
  std::size_t y_off = gap;
  for (std::size_t r = 0; r < layout.rows.size(); ++r) {
    const auto [plane, fixed_index] = layout.rows[r];
    const auto ax = axes_of(plane);
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const Volume& vol = columns[c].second;
      const std::size_t x_off = gap + c * (tile_w + gap);
      for (std::size_t v = 0; v < d[ax.v]; ++v)
        for (std::size_t u = 0; u < d[ax.u]; ++u) {
          std::array<std::size_t, 3> p{};
          p[ax.u] = u;
          p[ax.v] = d[ax.v] - 1 - v;  // superior / anterior up
          p[ax.fixed] = fixed_index;
          const double t = (vol.at(p[0], p[1], p[2]) - layout.window_low) / span;
          const auto g = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(t, 0.0, 1.0)));
          img.fill_rect(x_off + u * scale, y_off + v * scale, scale, scale, g);
        }
    }
    y_off += row_heights[r] + gap;
  }
  write_png(img, out_path);

  json rows = json::array();
  for (const auto& [plane, index] : layout.rows)
    rows.push_back({{"plane", to_string(plane)}, {"slice_index", index}});
  write_json({{"figure", out_path.filename().string()},
              {"kind", "panel"},
              {"columns", layout.labels},
              {"rows", rows},
              {"window", {layout.window_low, layout.window_high}},
              {"scale", options.scale},
              {"tile_width", tile_w},
              {"image_size", {width, height}}},
             sidecar_path(out_path));
  return layout;
}

Histogram make_histogram(const std::vector<double>& values) {
  Histogram h;
  if (values.empty()) return h;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) {
    h.edges = {lo - 0.5, lo + 0.5};
    h.counts = {values.size()};
    return h;
  }
  const double iqr = quantile(values, 0.75) - quantile(values, 0.25);
  std::size_t bins = 5;
  if (iqr > 0.0) {
    const double width = 2.0 * iqr / std::cbrt(static_cast<double>(values.size()));
    bins = std::max<std::size_t>(5, static_cast<std::size_t>(std::ceil((hi - lo) / width)));
  }
  bins = std::min<std::size_t>(bins, 100);
  h.counts.assign(bins, 0);
  h.edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = lo + (hi - lo) * b / bins;
  for (double v : values) {
    auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * bins);
    h.counts[std::min(b, bins - 1)]++;
  }
  return h;
}

std::vector<ModelStats> histogram_report(const std::vector<MetricsRecord>& records,
                                         const std::filesystem::path& out_path) {
  if (records.empty()) throw std::invalid_argument("histogram_report: no records");
  require_writable_parent(out_path);

  std::vector<ModelKind> order;
  for (const auto& r : records)
    if (std::find(order.begin(), order.end(), r.model) == order.end()) order.push_back(r.model);

  std::vector<ModelStats> stats;
  for (auto kind : order) {
    std::vector<double> s, p;
    ModelStats m;
    m.model = kind;
    for (const auto& r : records) {
      if (r.model != kind) continue;
      ++m.n_records;
      s.push_back(r.ssim);
      if (std::isinf(r.psnr_db)) {
        ++m.n_sentinels;
      } else {
        p.push_back(r.psnr_db);
      }
    }
    m.mean_ssim = mean_of(s);
    m.median_ssim = quantile(s, 0.5);
    m.mean_psnr_db = mean_of(p);
    m.median_psnr_db = quantile(p, 0.5);
    m.ssim_hist = make_histogram(s);
    m.psnr_hist = make_histogram(p);
    stats.push_back(std::move(m));
  }

  constexpr std::size_t kCellW = 240, kCellH = 140, kGap = 8;
  Raster img(2 * kCellW + 3 * kGap, stats.size() * (kCellH + kGap) + kGap, 200);
  for (std::size_t r = 0; r < stats.size(); ++r) {
    const std::size_t y0 = kGap + r * (kCellH + kGap);
    draw_histogram(img, stats[r].ssim_hist, kGap, y0, kCellW, kCellH);
    draw_histogram(img, stats[r].psnr_hist, 2 * kGap + kCellW, y0, kCellW, kCellH);
  }
  write_png(img, out_path);

  json rows = json::array();
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  for (const auto& m : stats)
    rows.push_back({{"model", to_string(m.model)},
                    {"n_records", m.n_records},
                    {"mean_ssim", num(m.mean_ssim)},
                    {"median_ssim", num(m.median_ssim)},
                    {"mean_psnr_db", num(m.mean_psnr_db)},
                    {"median_psnr_db", num(m.median_psnr_db)},
                    {"n_sentinels", m.n_sentinels},
                    {"ssim_histogram", histogram_json(m.ssim_hist)},
                    {"psnr_histogram", histogram_json(m.psnr_hist)}});
  write_json({{"figure", out_path.filename().string()},
              {"kind", "histogram"},
              {"columns", {"ssim", "psnr_db"}},
              {"rows", rows}},
             sidecar_path(out_path));
  return stats;
}

double percent_difference(double a, double b) { return 100.0 * (a - b) / b; }

ComparisonSummary compare_models(const std::vector<MetricsRecord>& records_a,
                                 const std::vector<MetricsRecord>& records_b,
                                 const std::vector<MetricsRecord>& baseline) {
  if (records_a.empty() || records_b.empty())
    throw std::invalid_argument("compare_models: both record lists must be nonempty");

  auto means = [](const std::vector<MetricsRecord>& recs, const char* side, int& excluded) {
    double s = 0.0, p = 0.0;
    int finite = 0;
    for (const auto& r : recs) {
      s += r.ssim;
      if (std::isinf(r.psnr_db)) {
        ++excluded;
      } else {
        p += r.psnr_db;
        ++finite;
      }
    }
    if (finite == 0)
      throw std::invalid_argument(std::string("compare_models: every PSNR in list ") + side +
                                  " is infinite; mean undefined");
    return std::pair{s / static_cast<double>(recs.size()), p / finite};
  };

  ComparisonSummary out;
  int excluded = 0;
  std::tie(out.mean_ssim_cyclegan, out.mean_psnr_db_cyclegan) = means(records_a, "A", excluded);
  std::tie(out.mean_ssim_dae, out.mean_psnr_db_dae) = means(records_b, "B", excluded);
  out.psnr_pct_diff = percent_difference(out.mean_psnr_db_cyclegan, out.mean_psnr_db_dae);
  out.ssim_pct_diff = percent_difference(out.mean_ssim_cyclegan, out.mean_ssim_dae);
  out.n_excluded_sentinels = excluded;

  std::set<std::string> subjects;
  for (const auto& r : records_a) subjects.insert(r.subject_id);
  for (const auto& r : records_b) subjects.insert(r.subject_id);
  out.n_subjects = static_cast<int>(subjects.size());

  if (!baseline.empty()) {
    int baseline_excluded = 0;
    auto [s, p] = means(baseline, "baseline", baseline_excluded);
    out.mean_ssim_noisy_baseline = s;
    out.mean_psnr_db_noisy_baseline = p;
  }
  return out;
}

void write_comparison_summary(const ComparisonSummary& s, const std::filesystem::path& path) {
  json doc = {{"mean_ssim_cyclegan", s.mean_ssim_cyclegan},
              {"mean_ssim_dae", s.mean_ssim_dae},
              {"mean_psnr_db_cyclegan", s.mean_psnr_db_cyclegan},
              {"mean_psnr_db_dae", s.mean_psnr_db_dae},
              {"psnr_pct_diff", s.psnr_pct_diff},
              {"ssim_pct_diff", s.ssim_pct_diff},
              {"n_subjects", s.n_subjects},
              {"n_excluded_sentinels", s.n_excluded_sentinels}};
  if (s.mean_ssim_noisy_baseline) doc["mean_ssim_noisy_baseline"] = *s.mean_ssim_noisy_baseline;
  if (s.mean_psnr_db_noisy_baseline)
    doc["mean_psnr_db_noisy_baseline"] = *s.mean_psnr_db_noisy_baseline;
  write_json(doc, path);
}

ComparisonSummary read_comparison_summary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  ComparisonSummary s;
  try {
    s.mean_ssim_cyclegan = doc.at("mean_ssim_cyclegan");
    s.mean_ssim_dae = doc.at("mean_ssim_dae");
    s.mean_psnr_db_cyclegan = doc.at("mean_psnr_db_cyclegan");
    s.mean_psnr_db_dae = doc.at("mean_psnr_db_dae");
    s.psnr_pct_diff = doc.at("psnr_pct_diff");
    s.ssim_pct_diff = doc.at("ssim_pct_diff");
    s.n_subjects = doc.at("n_subjects");
    s.n_excluded_sentinels = doc.at("n_excluded_sentinels");
    if (doc.contains("mean_ssim_noisy_baseline"))
      s.mean_ssim_noisy_baseline = doc["mean_ssim_noisy_baseline"].get<double>();
    if (doc.contains("mean_psnr_db_noisy_baseline"))
      s.mean_psnr_db_noisy_baseline = doc["mean_psnr_db_noisy_baseline"].get<double>();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return s;
}

}  // namespace lowfield
