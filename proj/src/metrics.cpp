#include "lowfield/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lowfield/errors.hpp"

namespace lowfield {

void SSIMParams::validate() const {
  if (window != 0 && (window < 3 || window % 2 == 0))
    throw std::invalid_argument("SSIM window must be odd and >= 3");
  if (!(gaussian_sigma > 0.0)) throw std::invalid_argument("SSIM gaussian_sigma must be > 0");
  if (!(k1 > 0.0) || !(k2 > 0.0)) throw std::invalid_argument("SSIM k1, k2 must be > 0");
  if (!(dynamic_range > 0.0)) throw std::invalid_argument("SSIM dynamic range must be > 0");
}

int SSIMParams::window_for(const Dims& dims) const {
  if (window != 0) return window;
  const bool slice = dims[0] == 1 || dims[1] == 1 || dims[2] == 1;
  return slice ? 11 : 7;
}

namespace {

double masked_mse(const Volume& a, const Volume& b, const std::optional<ForegroundMask>& mask) {
  require_same_grid(a, b, "mse");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (mask && !(b[i] > mask->threshold)) continue;
    const double d = static_cast<double>(a[i]) - b[i];
    sum += d * d;
    ++count;
  }
  if (count == 0) throw std::invalid_argument("mse: foreground mask selects no voxels");
  return sum / static_cast<double>(count);
}

double psnr_from_mse(double error, double max_value) {
  if (!(max_value > 0.0)) throw std::invalid_argument("psnr max_value must be > 0");
  if (error == 0.0) return kPsnrInfinite;
  return 10.0 * std::log10(max_value * max_value / error);
}

// Valid-mode separable filter along one axis; `taps` has odd length.
std::vector<double> filter_axis(const std::vector<double>& in, Dims& dims, int axis,
                                const std::vector<double>& taps) {
  const std::size_t w = taps.size();
  Dims out_dims = dims;
  out_dims[axis] = dims[axis] - w + 1;
  std::vector<double> out(voxel_count(out_dims), 0.0);
  const std::size_t stride_in = axis == 0 ? 1 : axis == 1 ? dims[0] : dims[0] * dims[1];
  std::size_t o = 0;
  for (std::size_t z = 0; z < out_dims[2]; ++z)
    for (std::size_t y = 0; y < out_dims[1]; ++y)
      for (std::size_t x = 0; x < out_dims[0]; ++x, ++o) {
        const std::size_t base = x + dims[0] * (y + dims[1] * z);
        double acc = 0.0;
        for (std::size_t k = 0; k < w; ++k) acc += taps[k] * in[base + k * stride_in];
        out[o] = acc;
      }
  dims = out_dims;
  return out;
}

double ssim_impl(const Volume& a, const Volume& b, const SSIMParams& params,
                 const std::optional<ForegroundMask>& mask) {
  params.validate();
  require_same_grid(a, b, "ssim");
  const Dims dims = a.dims();
  const int window = params.window_for(dims);
  const int radius = window / 2;

  std::array<bool, 3> active{};
  for (int ax = 0; ax < 3; ++ax) {
    active[ax] = dims[ax] > 1;
    if (active[ax] && dims[ax] < static_cast<std::size_t>(window)) {
      std::ostringstream msg;
      msg << "ssim: axis " << ax << " has " << dims[ax] << " voxels, smaller than the "
          << window << "-voxel window";
      throw ShapeError(msg.str());
    }
  }

  std::vector<double> taps(window);
  double norm = 0.0;
  for (int k = 0; k < window; ++k) {
    const double d = k - radius;
    taps[k] = std::exp(-d * d / (2.0 * params.gaussian_sigma * params.gaussian_sigma));
    norm += taps[k];
  }
  for (auto& t : taps) t /= norm;

  const std::size_t n = a.size();
  std::array<std::vector<double>, 5> fields;
  for (auto& f : fields) f.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a[i], y = b[i];
    fields[0][i] = x;
    fields[1][i] = y;
    fields[2][i] = x * x;
    fields[3][i] = y * y;
    fields[4][i] = x * y;
  }
  Dims out_dims = dims;
  for (auto& f : fields) {
    Dims d = dims;
    for (int ax = 0; ax < 3; ++ax)
      if (active[ax]) f = filter_axis(f, d, ax, taps);
    out_dims = d;
  }

  const double c1 = std::pow(params.k1 * params.dynamic_range, 2);
  const double c2 = std::pow(params.k2 * params.dynamic_range, 2);
  const std::array<std::size_t, 3> offset{active[0] ? std::size_t(radius) : 0,
                                          active[1] ? std::size_t(radius) : 0,
                                          active[2] ? std::size_t(radius) : 0};
  double sum = 0.0;
  std::size_t count = 0;
  std::size_t o = 0;
  for (std::size_t z = 0; z < out_dims[2]; ++z)
    for (std::size_t y = 0; y < out_dims[1]; ++y)
      for (std::size_t x = 0; x < out_dims[0]; ++x, ++o) {
        if (mask && !(b.at(x + offset[0], y + offset[1], z + offset[2]) > mask->threshold))
          continue;
        const double mu_a = fields[0][o], mu_b = fields[1][o];
        const double var_a = fields[2][o] - mu_a * mu_a;
        const double var_b = fields[3][o] - mu_b * mu_b;
        const double cov = fields[4][o] - mu_a * mu_b;
        sum += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
               ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        ++count;
      }
  if (count == 0) throw std::invalid_argument("ssim: foreground mask selects no windows");
  return std::clamp(sum / static_cast<double>(count), -1.0, 1.0);
}

}  // namespace

double mse(const Volume& a, const Volume& b) { return masked_mse(a, b, std::nullopt); }

double mse(const Volume& a, const Volume& reference, const ForegroundMask& mask) {
  return masked_mse(a, reference, mask);
}

double psnr(const Volume& a, const Volume& b, double max_value) {
  return psnr_from_mse(mse(a, b), max_value);
}

double psnr(const Volume& a, const Volume& reference, double max_value, const ForegroundMask& mask) {
  return psnr_from_mse(mse(a, reference, mask), max_value);
}

double ssim(const Volume& a, const Volume& b, const SSIMParams& params) {
  return ssim_impl(a, b, params, std::nullopt);
}

double ssim(const Volume& a, const Volume& reference, const SSIMParams& params,
            const ForegroundMask& mask) {
  return ssim_impl(a, reference, params, mask);
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::cyclegan: return "cyclegan";
    case ModelKind::dae: return "dae";
    case ModelKind::noisy_baseline: return "noisy_baseline";
    case ModelKind::identity: return "identity";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& name) {
  for (auto k : {ModelKind::cyclegan, ModelKind::dae, ModelKind::noisy_baseline, ModelKind::identity})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown model kind '" + name + "'");
}

std::vector<MetricsRecord> evaluate_cohort(
    const std::vector<std::pair<ModelKind, Restorer>>& models,
    const std::vector<Volume>& low_set, const std::vector<Volume>& reference_set,
    const EvaluationOptions& options) {
  if (low_set.size() != reference_set.size())
    throw std::invalid_argument("evaluate_cohort: low and reference sets differ in size");

  auto score = [&](const std::string& subject, ModelKind kind, const Volume& estimate,
                   const Volume& reference) {
    require_same_grid(estimate, reference, "subject '" + subject + "'");
    MetricsRecord r{subject, kind, 0.0, 0.0};
    if (options.mask) {
      r.ssim = ssim(estimate, reference, options.ssim, *options.mask);
      r.psnr_db = psnr(estimate, reference, options.max_value, *options.mask);
    } else {
      r.ssim = ssim(estimate, reference, options.ssim);
      r.psnr_db = psnr(estimate, reference, options.max_value);
    }
    return r;
  };

  std::vector<MetricsRecord> records;
  records.reserve(low_set.size() * (models.size() + 1));
  for (std::size_t i = 0; i < low_set.size(); ++i) {
    const Volume& low = low_set[i];
    const Volume& ref = reference_set[i];
    const std::string subject =
        !ref.subject_id().empty() ? ref.subject_id()
        : !low.subject_id().empty() ? low.subject_id() : "subject_" + std::to_string(i);
    records.push_back(score(subject, ModelKind::noisy_baseline, low, ref));
    for (const auto& [kind, restore] : models)
      records.push_back(score(subject, kind, restore(low), ref));
  }
  return records;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_double(const std::string& text) {
  if (text == "inf" || text == "+inf") return kPsnrInfinite;
  if (text == "-inf") return -kPsnrInfinite;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw FormatError("not a number: '" + text + "'");
  return v;
}

void write_metrics_csv(const std::vector<MetricsRecord>& records,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << "subject_id,model,ssim,psnr_db\n";
  for (const auto& r : records)
    out << r.subject_id << ',' << to_string(r.model) << ',' << format_double(r.ssim) << ','
        << format_double(r.psnr_db) << '\n';
  if (!out) throw IoError(path.string() + ": write failed");
}

std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  std::string line;
  if (!std::getline(in, line) || line != "subject_id,model,ssim,psnr_db")
    throw FormatError(path.string() + ": expected header 'subject_id,model,ssim,psnr_db'");
  std::vector<MetricsRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 4)
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 4 columns");
    records.push_back({cells[0], model_kind_from_string(cells[1]), parse_double(cells[2]),
                       parse_double(cells[3])});
  }
  return records;
}

}  // namespace lowfield
