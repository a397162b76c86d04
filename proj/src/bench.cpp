#include "lac/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "lac/attention.hpp"

namespace lac {

void BenchOptions::validate() const {
  for (const auto& v : variants)
    if (v != "mhsa" && v != "mhlsa")
      throw std::invalid_argument("bench: unknown variant '" + v +
                                  "' (use mhsa and/or mhlsa)");
  if (variants.empty()) throw std::invalid_argument("bench: no variants selected");
  if (lengths.size() < 6)
    throw std::invalid_argument("bench: need at least 6 grid points, have " +
                                std::to_string(lengths.size()));
  for (std::size_t i = 1; i < lengths.size(); ++i)
    if (lengths[i] <= lengths[i - 1])
      throw std::invalid_argument("bench: grid lengths must be strictly ascending");
  if (lengths.front() < 1) throw std::invalid_argument("bench: lengths must be positive");
  if (d_model < 1 || heads < 1 || d_model % heads != 0)
    throw std::invalid_argument("bench: d_model must be a positive multiple of heads");
  if (repeats < 5) throw std::invalid_argument("bench: need at least 5 timed repeats");
  if (warmup < 0) throw std::invalid_argument("bench: negative warmup");
}

std::int64_t mhsa_flops(std::int64_t t, int d_model, int heads) {
  const std::int64_t dk = d_model / heads;
  const std::int64_t proj = 3 * t * d_model * dk;     // q, k, v projections
  const std::int64_t logits = t * t * dk;             // q k^T
  const std::int64_t softmax = 4 * t * t;             // scale, exp, sum, divide
  const std::int64_t mix = t * t * dk;                // weights * v
  const std::int64_t out = t * static_cast<std::int64_t>(d_model) * d_model;
  return heads * (proj + logits + softmax + mix) + out;
}

std::int64_t mhlsa_flops(std::int64_t t, int d_model, int heads) {
  const std::int64_t dk = d_model / heads;
  const std::int64_t proj = 3 * t * d_model * dk;
  const std::int64_t scaling = 2 * t * dk;            // q and k scaling
  const std::int64_t softmax = 2 * 3 * t * dk;        // row and column softmax
  const std::int64_t kv = t * dk * dk;                // k^T v
  const std::int64_t mix = t * dk * dk;               // a (k^T v)
  const std::int64_t out = t * static_cast<std::int64_t>(d_model) * d_model;
  return heads * (proj + scaling + softmax + kv + mix) + out;
}

namespace {

SlopeFit fit_slope(const std::string& variant, const std::vector<BenchRecord>& records) {
  std::vector<std::pair<double, double>> pts;  // (ln T, ln ns)
  for (const auto& r : records)
    if (r.variant == variant)
      pts.emplace_back(std::log(static_cast<double>(r.t)),
                       std::log(static_cast<double>(std::max<std::int64_t>(r.wall_ns, 1))));
  std::sort(pts.begin(), pts.end());
  // Largest half of the grid, but never fewer than 4 points.
  const std::size_t want = std::max<std::size_t>((pts.size() + 1) / 2, 4);
  const std::size_t use = std::min(want, pts.size());
  pts.erase(pts.begin(), pts.end() - static_cast<std::ptrdiff_t>(use));

  const double n = static_cast<double>(pts.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (auto [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  SlopeFit f;
  f.variant = variant;
  f.points_used = static_cast<int>(pts.size());
  const double denom = n * sxx - sx * sx;
  f.slope = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
  const double ss_tot = syy - sy * sy / n;
  if (ss_tot > 0.0) {
    const double intercept = (sy - f.slope * sx) / n;
    double ss_res = 0.0;
    for (auto [x, y] : pts) {
      const double e = y - (intercept + f.slope * x);
      ss_res += e * e;
    }
    f.r2 = 1.0 - ss_res / ss_tot;
  } else {
    f.r2 = 1.0;
  }
  return f;
}

}  // namespace

BenchResult bench_attention(const BenchOptions& opt) {
  opt.validate();
  BenchResult result;
  Rng rng(opt.seed);
  for (const std::string& variant : opt.variants) {
    AttentionParams params = AttentionParams::init(opt.d_model, opt.heads, rng);
    for (int t : opt.lengths) {
      Tensor x = Tensor::uniform({t, opt.d_model}, rng, -1.0, 1.0);
      auto run = [&] {
        return variant == "mhsa" ? mhsa(x, params) : mhlsa(x, params);
      };
      for (int w = 0; w < opt.warmup; ++w) (void)run();
      std::vector<std::int64_t> times;
      std::int64_t peak = 0;
      times.reserve(opt.repeats);
      for (int rep = 0; rep < opt.repeats; ++rep) {
        workspace::reset_peak();
        const std::int64_t baseline = workspace::live_scalars();
        const auto t0 = std::chrono::steady_clock::now();
        Tensor y = run();
        const auto t1 = std::chrono::steady_clock::now();
        // Peak additional scalars live at any point inside the forward.
        peak = workspace::peak_scalars() - baseline;
        times.push_back(
            std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
        (void)y;
      }
      std::sort(times.begin(), times.end());
      BenchRecord rec;
      rec.variant = variant;
      rec.t = t;
      rec.wall_ns = times[times.size() / 2];
      rec.peak_workspace_scalars = peak;
      rec.flops = variant == "mhsa" ? mhsa_flops(t, opt.d_model, opt.heads)
                                    : mhlsa_flops(t, opt.d_model, opt.heads);
      result.records.push_back(rec);
    }
    result.fits.push_back(fit_slope(variant, result.records));
  }
  return result;
}

std::string bench_csv(const BenchResult& r) {
  std::ostringstream os;
  os << "variant,T,wall_ns,peak_workspace,flops\n";
  for (const auto& rec : r.records)
    os << rec.variant << ',' << rec.t << ',' << rec.wall_ns << ','
       << rec.peak_workspace_scalars << ',' << rec.flops << '\n';
  return os.str();
}

std::string bench_json(const BenchResult& r) {
  nlohmann::json j;
  j["records"] = nlohmann::json::array();
  for (const auto& rec : r.records)
    j["records"].push_back({{"variant", rec.variant},
                            {"T", rec.t},
                            {"wall_ns", rec.wall_ns},
                            {"peak_workspace", rec.peak_workspace_scalars},
                            {"flops", rec.flops}});
  j["fits"] = nlohmann::json::array();
  for (const auto& f : r.fits)
    j["fits"].push_back({{"variant", f.variant},
                         {"slope", f.slope},
                         {"r2", f.r2},
                         {"points_used", f.points_used}});
  return j.dump(2);
}

// ---- parameter reporting ---------------------------------------------------

namespace {
ParamReportRow count_row(const ModelConfig& cfg) {
  Model m = Model::build(cfg, 0);
  const auto counts = m.count_params();
  ParamReportRow row;
  row.variant = variant_display(cfg.variant);
  row.d_bn = cfg.d_bn;
  row.total = counts.total;
  row.sections = counts.by_section;
  return row;
}
}  // namespace

ParamReport report_params(const ModelConfig& base, bool sweep_dbn) {
  base.validate();
  ParamReport report;
  if (sweep_dbn) {
    ModelConfig cfg = base;
    cfg.variant = Variant::LAC;
    for (int d_bn : {50, 75, 100, 125}) {
      cfg.d_bn = d_bn;
      cfg.validate();
      report.rows.push_back(count_row(cfg));
    }
    report.dbn_slope =
        (report.rows[1].total - report.rows[0].total) / (report.rows[1].d_bn - report.rows[0].d_bn);
  } else {
    for (Variant v :
         {Variant::LAC, Variant::Conformer, Variant::LacFfn, Variant::LacMhsa}) {
      ModelConfig cfg = base;
      cfg.variant = v;
      cfg.validate();
      report.rows.push_back(count_row(cfg));
    }
    report.lac_over_conformer =
        static_cast<double>(report.rows[0].total) / static_cast<double>(report.rows[1].total);
  }
  return report;
}

std::string params_text(const ParamReport& r) {
  std::ostringstream os;
  os << "variant        d_bn      total";
  if (!r.rows.empty())
    for (const auto& [name, n] : r.rows.front().sections) os << "  " << name;
  os << '\n';
  for (const auto& row : r.rows) {
    os << row.variant;
    for (std::size_t i = row.variant.size(); i < 15; ++i) os << ' ';
    os << row.d_bn << "  " << row.total;
    for (const auto& [name, n] : row.sections) os << "  " << n;
    os << '\n';
  }
  if (r.lac_over_conformer > 0.0)
    os << "LAC / Conformer parameter ratio: " << r.lac_over_conformer << '\n';
  if (r.dbn_slope > 0) os << "params per unit d_bn: " << r.dbn_slope << '\n';
  return os.str();
}

std::string params_json(const ParamReport& r) {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json sections;
    for (const auto& [name, n] : row.sections) sections[name] = n;
    j["rows"].push_back({{"variant", row.variant},
                         {"d_bn", row.d_bn},
                         {"total", row.total},
                         {"sections", sections}});
  }
  if (r.lac_over_conformer > 0.0) j["lac_over_conformer"] = r.lac_over_conformer;
  if (r.dbn_slope > 0) j["params_per_unit_dbn"] = r.dbn_slope;
  return j.dump(2);
}

}  // namespace lac
