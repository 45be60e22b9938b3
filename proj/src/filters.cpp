#include "revfilt/filters.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace revfilt {

BlackBoxFilter::BlackBoxFilter(std::string label, Fn fn)
    : label_(std::move(label)), fn_(std::move(fn)) {
  if (!fn_) throw Error("BlackBoxFilter requires a callable");
}

Image BlackBoxFilter::apply(const Image& x) {
  ++calls_;
  Image y = fn_(x);
  if (!y.same_shape(x)) {
    throw FilterError("filter '" + label_ + "' changed dimensions from " +
                      std::to_string(x.width()) + "x" + std::to_string(x.height()) + " to " +
                      std::to_string(y.width()) + "x" + std::to_string(y.height()));
  }
  if (!y.all_finite()) throw NonFiniteError("filter '" + label_ + "' produced non-finite output");
  return y;
}

double Kernel::sum() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

namespace {

struct Tap {
  int dx;
  int dy;
  double w;
};

std::vector<Tap> taps_of(const Kernel& k) {
  std::vector<Tap> taps;
  const int cx = k.width / 2, cy = k.height / 2;
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x)
      if (k.at(x, y) != 0.0) taps.push_back({x - cx, y - cy, k.at(x, y)});
  return taps;
}

// Weighted sums are accumulated as centre + Σ w·(neighbour − centre); with
// Σw = 1 this equals Σ w·neighbour and maps constant regions to themselves
// without rounding error.
Image correlate_taps(const Image& img, const std::vector<Tap>& taps) {
  const auto w = static_cast<std::ptrdiff_t>(img.width());
  const auto h = static_cast<std::ptrdiff_t>(img.height());
  Image out(img.width(), img.height());
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      const double c = img(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
      double acc = 0.0;
      for (const Tap& t : taps) acc += t.w * (img.at_clamped(x + t.dx, y + t.dy) - c);
      out(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = c + acc;
    }
  }
  return out;
}

Image correlate_rows(const Image& img, std::span<const double> k) {
  const int r = static_cast<int>(k.size() / 2);
  std::vector<Tap> taps;
  for (int i = 0; i < static_cast<int>(k.size()); ++i) taps.push_back({i - r, 0, k[i]});
  return correlate_taps(img, taps);
}

Image correlate_cols(const Image& img, std::span<const double> k) {
  const int r = static_cast<int>(k.size() / 2);
  std::vector<Tap> taps;
  for (int i = 0; i < static_cast<int>(k.size()); ++i) taps.push_back({0, i - r, k[i]});
  return correlate_taps(img, taps);
}

void require_odd_window(int window, const char* who) {
  if (window < 3 || window % 2 == 0) {
    throw Error(std::string(who) + ": window must be odd and >= 3, got " +
                std::to_string(window));
  }
}

}  // namespace

Image correlate(const Image& img, const Kernel& k) {
  if (k.width % 2 == 0 || k.height % 2 == 0) throw Error("correlate: kernel must be odd-sized");
  return correlate_taps(img, taps_of(k));
}

Image box_mean(const Image& img, int radius) {
  if (radius < 0) throw Error("box_mean: negative radius");
  const int n = 2 * radius + 1;
  const double w = 1.0 / n;
  std::vector<double> k(static_cast<std::size_t>(n), w);
  return correlate_cols(correlate_rows(img, k), k);
}

Kernel gaussian_kernel_1d(double sigma) {
  if (!(sigma > 0.0)) throw Error("gaussian: sigma must be positive");
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  Kernel k;
  k.width = 2 * r + 1;
  k.height = 1;
  k.weights.resize(static_cast<std::size_t>(k.width));
  for (int i = -r; i <= r; ++i)
    k.weights[static_cast<std::size_t>(i + r)] = std::exp(-(i * i) / (2.0 * sigma * sigma));
  const double s = k.sum();
  for (double& v : k.weights) v /= s;
  return k;
}

Image gaussian_filter(const Image& img, double sigma) {
  const Kernel k = gaussian_kernel_1d(sigma);
  return correlate_cols(correlate_rows(img, k.weights), k.weights);
}

// Line kernel with the anti-aliased rasterisation of the common
// toolbox "motion" kernel: distance-to-line weights with linear fall-off over
// one pixel, extended symmetrically about the origin.
Kernel motion_kernel(double length, double theta_deg) {
  if (!(length >= 1.0)) throw Error("motion: length must be >= 1");
  constexpr double eps = std::numeric_limits<double>::epsilon();
  const double half = (length - 1.0) / 2.0;
  const double phi = std::fmod(std::fmod(theta_deg, 180.0) + 180.0, 180.0) / 180.0 * std::numbers::pi;
  const double cosphi = std::cos(phi);
  const double sinphi = std::sin(phi);
  const int xsign = cosphi > 0.0 ? 1 : (cosphi < 0.0 ? -1 : 0);
  constexpr double linewdt = 1.0;

  const int sx = static_cast<int>(std::trunc(half * cosphi + linewdt * xsign - length * eps));
  const int sy = static_cast<int>(std::trunc(half * sinphi + linewdt - length * eps));
  const int nx = xsign == 0 ? 1 : std::abs(sx) + 1;
  const int ny = sy + 1;

  std::vector<double> dist(static_cast<std::size_t>(nx * ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double x = static_cast<double>(i * (xsign == 0 ? 1 : xsign));
      const double y = static_cast<double>(j);
      double d = y * cosphi - x * sinphi;
      const double rad = std::sqrt(x * x + y * y);
      if (rad >= half && std::abs(d) <= linewdt) {
        const double x2last = half - std::abs((x + d * sinphi) / cosphi);
        d = std::sqrt(d * d + x2last * x2last);
      }
      d = linewdt + eps - std::abs(d);
      dist[static_cast<std::size_t>(j * nx + i)] = std::max(d, 0.0);
    }
  }

  Kernel k;
  k.width = 2 * nx - 1;
  k.height = 2 * ny - 1;
  k.weights.assign(static_cast<std::size_t>(k.width * k.height), 0.0);
  auto cell = [&](int c, int r) -> double& {
    return k.weights[static_cast<std::size_t>(r * k.width + c)];
  };
  for (int r = 0; r < ny; ++r)
    for (int c = 0; c < nx; ++c)
      cell(c, r) = dist[static_cast<std::size_t>((ny - 1 - r) * nx + (nx - 1 - c))];
  for (int r = 0; r < ny; ++r)
    for (int c = 0; c < nx; ++c)
      cell(c + nx - 1, r + ny - 1) = dist[static_cast<std::size_t>(r * nx + c)];

  const double s = k.sum();
  for (double& v : k.weights) v /= s;
  if (cosphi > 0.0) {
    for (int r = 0; r < k.height / 2; ++r)
      for (int c = 0; c < k.width; ++c) std::swap(cell(c, r), cell(c, k.height - 1 - r));
  }
  return k;
}

Image motion_blur(const Image& img, double length, double theta_deg) {
  return correlate(img, motion_kernel(length, theta_deg));
}

Kernel disk_kernel(double radius) {
  if (!(radius >= 1.0)) throw Error("disk: radius must be >= 1");
  const int r = static_cast<int>(std::floor(radius));
  Kernel k;
  k.width = k.height = 2 * r + 1;
  k.weights.assign(static_cast<std::size_t>(k.width * k.height), 0.0);
  std::size_t count = 0;
  for (int y = -r; y <= r; ++y) {
    for (int x = -r; x <= r; ++x) {
      if (x * x + y * y <= radius * radius) {
        k.weights[static_cast<std::size_t>((y + r) * k.width + (x + r))] = 1.0;
        ++count;
      }
    }
  }
  for (double& v : k.weights) v /= static_cast<double>(count);
  return k;
}

Image disk_blur(const Image& img, double radius) { return correlate(img, disk_kernel(radius)); }

namespace {

// Per-pixel window mean and variance; both computed relative to the centre
// pixel so flat windows give exactly (c, 0).
void window_stats(const Image& img, int radius, Image& mean, Image& var) {
  const auto w = static_cast<std::ptrdiff_t>(img.width());
  const auto h = static_cast<std::ptrdiff_t>(img.height());
  const double n = static_cast<double>((2 * radius + 1) * (2 * radius + 1));
  mean = Image(img.width(), img.height());
  var = Image(img.width(), img.height());
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      const auto ux = static_cast<std::size_t>(x), uy = static_cast<std::size_t>(y);
      const double c = img(ux, uy);
      double s1 = 0.0, s2 = 0.0;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          const double d = img.at_clamped(x + dx, y + dy) - c;
          s1 += d;
          s2 += d * d;
        }
      }
      const double m = s1 / n;
      mean(ux, uy) = c + m;
      var(ux, uy) = std::max(s2 / n - m * m, 0.0);
    }
  }
}

}  // namespace

Image adaptive_wiener(const Image& img, int window, double noise) {
  require_odd_window(window, "wiener");
  if (!(noise >= 0.0)) throw Error("wiener: noise must be >= 0");
  Image mean, var;
  window_stats(img, window / 2, mean, var);
  Image out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double denom = std::max(var[i], noise);
    if (denom == 0.0) {
      out[i] = mean[i];
      continue;
    }
    const double gain = std::max(var[i] - noise, 0.0) / denom;
    out[i] = gain == 1.0 ? img[i] : mean[i] + gain * (img[i] - mean[i]);
  }
  return out;
}

Image guided_filter_self(const Image& img, int window, double eps) {
  require_odd_window(window, "guided_self");
  if (!(eps > 0.0)) throw Error("guided_self: eps must be positive");
  const int r = window / 2;
  Image mean, var;
  window_stats(img, r, mean, var);
  Image a(img.width(), img.height()), b(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) {
    a[i] = var[i] / (var[i] + eps);
    b[i] = mean[i] * (1.0 - a[i]);
  }
  const Image mean_a = box_mean(a, r);
  const Image mean_b = box_mean(b, r);
  Image out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = mean_a[i] * img[i] + mean_b[i];
  return out;
}

Image bilateral_filter(const Image& img, double sigma_s, double sigma_r) {
  if (!(sigma_s > 0.0) || !(sigma_r > 0.0)) {
    throw Error("bilateral: sigma_s and sigma_r must be positive");
  }
  const int r = static_cast<int>(std::ceil(3.0 * sigma_s));
  std::vector<Tap> spatial;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      spatial.push_back({dx, dy, std::exp(-(dx * dx + dy * dy) / (2.0 * sigma_s * sigma_s))});
  const double inv_2sr2 = 1.0 / (2.0 * sigma_r * sigma_r);

  const auto w = static_cast<std::ptrdiff_t>(img.width());
  const auto h = static_cast<std::ptrdiff_t>(img.height());
  Image out(img.width(), img.height());
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      const auto ux = static_cast<std::size_t>(x), uy = static_cast<std::size_t>(y);
      const double c = img(ux, uy);
      double num = 0.0, den = 0.0;
      for (const Tap& t : spatial) {
        const double d = img.at_clamped(x + t.dx, y + t.dy) - c;
        const double wt = t.w * std::exp(-d * d * inv_2sr2);
        num += wt * d;
        den += wt;
      }
      out(ux, uy) = c + num / den;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::gaussian: return "gaussian";
    case FilterKind::motion: return "motion";
    case FilterKind::disk: return "disk";
    case FilterKind::wiener: return "wiener";
    case FilterKind::guided_self: return "guided_self";
    case FilterKind::bilateral: return "bilateral";
    case FilterKind::extern_cmd: return "extern";
  }
  return "?";
}

namespace {

struct KindInfo {
  FilterKind kind;
  std::vector<std::pair<std::string, ParamValue>> defaults;
};

const std::vector<KindInfo>& kind_table() {
  static const std::vector<KindInfo> table = {
      {FilterKind::gaussian, {{"sigma", 5.0}}},
      {FilterKind::motion, {{"length", 20.0}, {"theta", 45.0}}},
      {FilterKind::disk, {{"radius", 3.0}}},
      {FilterKind::wiener, {{"window", 5.0}, {"noise", 0.1}}},
      {FilterKind::guided_self, {{"window", 5.0}, {"eps", 0.1}}},
      {FilterKind::bilateral, {{"sigma_s", 3.0}, {"sigma_r", 0.05}}},
      {FilterKind::extern_cmd, {{"cmd", std::string()}, {"timeout", 60.0}}},
  };
  return table;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

// Splits on commas outside double quotes; quotes are stripped.
std::vector<std::string> split_params(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  bool quoted = false;
  for (char c : s) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw ConfigError("unterminated quote in filter spec '" + s + "'");
  parts.push_back(cur);
  return parts;
}

double parse_number(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v)) {
    throw ConfigError("parameter '" + key + "' expects a number, got '" + text + "'");
  }
  return v;
}

// Shortest form that round-trips, so labels stay readable and unique.
std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

int as_window(double v, const char* who) {
  if (v != std::floor(v)) throw Error(std::string(who) + ": window must be an integer");
  return static_cast<int>(v);
}

}  // namespace

double FilterSpec::number(const std::string& key) const {
  const auto it = params.find(key);
  if (it == params.end()) throw ConfigError("filter spec has no parameter '" + key + "'");
  if (const auto* d = std::get_if<double>(&it->second)) return *d;
  throw ConfigError("filter parameter '" + key + "' is not numeric");
}

const std::string& FilterSpec::text(const std::string& key) const {
  const auto it = params.find(key);
  if (it == params.end()) throw ConfigError("filter spec has no parameter '" + key + "'");
  if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
  throw ConfigError("filter parameter '" + key + "' is not text");
}

std::string FilterSpec::label() const {
  std::string out = to_string(kind);
  char sep = ':';
  for (const auto& [k, v] : params) {
    out += sep;
    sep = ',';
    out += k + "=";
    if (const auto* d = std::get_if<double>(&v)) {
      out += format_number(*d);
    } else {
      out += "\"" + std::get<std::string>(v) + "\"";
    }
  }
  return out;
}

FilterSpec parse_filter_spec(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind_name = trim(text.substr(0, colon));
  const auto& table = kind_table();
  const auto info = std::find_if(table.begin(), table.end(), [&](const KindInfo& k) {
    return to_string(k.kind) == kind_name;
  });
  if (info == table.end()) {
    throw ConfigError("unknown filter kind '" + kind_name +
                      "' (expected gaussian, motion, disk, wiener, guided_self, bilateral "
                      "or extern)");
  }
  FilterSpec spec;
  spec.kind = info->kind;
  for (const auto& [k, v] : info->defaults) spec.params[k] = v;

  if (colon != std::string::npos) {
    for (const std::string& raw : split_params(text.substr(colon + 1))) {
      const std::string part = trim(raw);
      if (part.empty()) continue;
      const auto eq = part.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("filter parameter '" + part + "' must be key=value");
      }
      const std::string key = trim(part.substr(0, eq));
      const std::string val = trim(part.substr(eq + 1));
      const auto slot = spec.params.find(key);
      if (slot == spec.params.end()) {
        throw ConfigError("unknown parameter '" + key + "' for filter kind '" + kind_name + "'");
      }
      if (std::holds_alternative<std::string>(slot->second)) {
        slot->second = val;
      } else {
        slot->second = parse_number(key, val);
      }
    }
  }
  if (spec.kind == FilterKind::extern_cmd && spec.text("cmd").empty()) {
    throw ConfigError("extern filter requires cmd=\"...\"");
  }
  return spec;
}

BlackBoxFilter make_filter(const FilterSpec& spec) {
  const std::string label = spec.label();
  switch (spec.kind) {
    case FilterKind::gaussian: {
      const double sigma = spec.number("sigma");
      gaussian_kernel_1d(sigma);  // validates
      return {label, [sigma](const Image& x) { return gaussian_filter(x, sigma); }};
    }
    case FilterKind::motion: {
      const auto k = motion_kernel(spec.number("length"), spec.number("theta"));
      return {label, [k](const Image& x) { return correlate(x, k); }};
    }
    case FilterKind::disk: {
      const auto k = disk_kernel(spec.number("radius"));
      return {label, [k](const Image& x) { return correlate(x, k); }};
    }
    case FilterKind::wiener: {
      const int window = as_window(spec.number("window"), "wiener");
      const double noise = spec.number("noise");
      require_odd_window(window, "wiener");
      if (!(noise >= 0.0)) throw Error("wiener: noise must be >= 0");
      return {label, [=](const Image& x) { return adaptive_wiener(x, window, noise); }};
    }
    case FilterKind::guided_self: {
      const int window = as_window(spec.number("window"), "guided_self");
      const double eps = spec.number("eps");
      require_odd_window(window, "guided_self");
      if (!(eps > 0.0)) throw Error("guided_self: eps must be positive");
      return {label, [=](const Image& x) { return guided_filter_self(x, window, eps); }};
    }
    case FilterKind::bilateral: {
      const double ss = spec.number("sigma_s"), sr = spec.number("sigma_r");
      if (!(ss > 0.0) || !(sr > 0.0)) throw Error("bilateral: sigmas must be positive");
      return {label, [=](const Image& x) { return bilateral_filter(x, ss, sr); }};
    }
    case FilterKind::extern_cmd: {
      const double timeout_s = spec.number("timeout");
      if (!(timeout_s > 0.0)) throw Error("extern: timeout must be positive");
      ExternOptions opts;
      opts.timeout = std::chrono::milliseconds(static_cast<long long>(timeout_s * 1000.0));
      BlackBoxFilter f = extern_filter(spec.text("cmd"), opts);
      return {label, [f](const Image& x) mutable { return f.apply(x); }};
    }
  }
  throw Error("unreachable filter kind");
}

}  // namespace revfilt
