#include "ctsynth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace ctsynth {

namespace {

void require_same_grid(const Geometry& a, const Geometry& b, const char* who) {
  if (!a.same_grid(b)) throw GeometryError(std::string(who) + ": geometry mismatch");
}

}  // namespace

double dice(const Mask3& a, const Mask3& b) {
  require_same_grid(a.geo, b.geo, "dice");
  std::size_t na = 0, nb = 0, ni = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    na += a.values[i] != 0;
    nb += b.values[i] != 0;
    ni += (a.values[i] && b.values[i]);
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(ni) / static_cast<double>(na + nb);
}

double lir(const Mask3& lesion, const Mask3& lung) {
  require_same_grid(lesion.geo, lung.geo, "lir");
  std::size_t nl = 0, ni = 0;
  for (std::size_t i = 0; i < lesion.values.size(); ++i) {
    nl += lesion.values[i] != 0;
    ni += (lesion.values[i] && lung.values[i]);
  }
  if (nl == 0) throw MetricError("lir: undefined for an empty lesion mask");
  return static_cast<double>(ni) / static_cast<double>(nl);
}

double po(const Mask3& lesion, const Mask3& lung) {
  require_same_grid(lesion.geo, lung.geo, "po");
  std::size_t nlung = 0, ni = 0;
  for (std::size_t i = 0; i < lesion.values.size(); ++i) {
    nlung += lung.values[i] != 0;
    ni += (lesion.values[i] && lung.values[i]);
  }
  if (nlung == 0) throw MetricError("po: empty lung mask");
  return 100.0 * static_cast<double>(ni) / static_cast<double>(nlung);
}

double pho(const Mask3& lesion, const HuVolume& volume, const Mask3& lung,
           double threshold_hu) {
  require_same_grid(lesion.geo, lung.geo, "pho");
  require_same_grid(lesion.geo, volume.geo, "pho");
  std::size_t nlung = 0, nhigh = 0;
  for (std::size_t i = 0; i < lesion.values.size(); ++i) {
    nlung += lung.values[i] != 0;
    if (lesion.values[i] && lung.values[i] && volume.values[i] >= threshold_hu) ++nhigh;
  }
  if (nlung == 0) throw MetricError("pho: empty lung mask");
  return 100.0 * static_cast<double>(nhigh) / static_cast<double>(nlung);
}

// --- Pearson ---------------------------------------------------------------------

namespace {

double log_gamma(double x) { return std::lgamma(x); }

// Continued fraction for the incomplete beta function (modified Lentz).
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-15;
  constexpr double kFpMin = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw Error("incomplete_beta: continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x < 0.0 || x > 1.0) throw ParamError("incomplete_beta: x outside [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_bt = log_gamma(a + b) - log_gamma(a) - log_gamma(b) + a * std::log(x) +
                       b * std::log1p(-x);
  const double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return bt * beta_cf(a, b, x) / a;
  }
  return 1.0 - bt * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double dof) {
  if (!std::isfinite(t)) return 0.0;
  return incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t));
}

PearsonResult pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ParamError("pearson: series length mismatch");
  const std::size_t n = x.size();
  if (n < 3) throw MetricError("pearson: needs at least 3 samples");

  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw MetricError("pearson: undefined for a zero-variance series");
  }
  double r = sxy / std::sqrt(sxx * syy);
  r = std::clamp(r, -1.0, 1.0);

  const double dof = static_cast<double>(n - 2);
  const double denom = 1.0 - r * r;
  double p;
  if (denom <= 0.0) {
    p = 0.0;
  } else {
    const double t = r * std::sqrt(dof / denom);
    p = student_t_two_sided_p(t, dof);
  }
  return {r, p};
}

// --- Weighted BCE -----------------------------------------------------------------

double weighted_bce(const SoftMask3& p, const Mask3& y, const NormVolume& x, double gamma1,
                    double gamma2) {
  require_same_grid(p.geo, y.geo, "weighted_bce");
  require_same_grid(p.geo, x.geo, "weighted_bce");
  constexpr double kEps = 1e-7;
  double total = 0;
  const std::size_t n = p.values.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double pi = std::clamp(static_cast<double>(p.values[i]), kEps, 1.0 - kEps);
    const double yi = y.values[i] ? 1.0 : 0.0;
    const double xi = x.values[i];
    const double w = 1.0 + gamma1 * yi / (1.0 + std::exp(-gamma2 * xi));
    total += -w * (yi * std::log(pi) + (1.0 - yi) * std::log(1.0 - pi));
  }
  return total / static_cast<double>(n);
}

// --- Cohort reporting ----------------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

struct SeriesStats {
  double mean = 0;
  double sd = 0;
  std::size_t n = 0;
};

SeriesStats stats_of(const std::vector<double>& v) {
  SeriesStats s;
  s.n = v.size();
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= v.size();
  if (v.size() > 1) {
    double acc = 0;
    for (double x : v) acc += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(acc / (v.size() - 1));
  }
  return s;
}

}  // namespace

void write_cohort_csv(const std::vector<CaseMetricsRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write CSV report: " + path);
  out << "id,dsc,po_pred,po_gt,pho_pred,pho_gt,lir\n";
  for (const auto& r : rows) {
    out << r.id << "," << fmt(r.dsc) << "," << fmt(r.po_pred) << "," << fmt(r.po_gt) << ","
        << fmt(r.pho_pred) << "," << fmt(r.pho_gt) << ","
        << (r.lir ? fmt(*r.lir) : std::string()) << "\n";
  }
  if (!out) throw IoError("failed writing CSV report: " + path);
}

void write_cohort_json(const std::vector<CaseMetricsRow>& rows, const std::string& path) {
  using nlohmann::json;
  json j;
  j["cases"] = rows.size();

  auto add_stats = [&](const char* name, const std::vector<double>& v) {
    const auto s = stats_of(v);
    j[name] = {{"mean", s.mean}, {"sd", s.sd}, {"n", s.n}};
  };
  std::vector<double> dscs, po_pred, po_gt, pho_pred, pho_gt, lirs;
  for (const auto& r : rows) {
    dscs.push_back(r.dsc);
    po_pred.push_back(r.po_pred);
    po_gt.push_back(r.po_gt);
    pho_pred.push_back(r.pho_pred);
    pho_gt.push_back(r.pho_gt);
    if (r.lir) lirs.push_back(*r.lir);
  }
  add_stats("dsc", dscs);
  add_stats("po_pred", po_pred);
  add_stats("po_gt", po_gt);
  add_stats("pho_pred", pho_pred);
  add_stats("pho_gt", pho_gt);
  add_stats("lir", lirs);

  auto add_pearson = [&](const char* name, const std::vector<double>& a,
                         const std::vector<double>& b) {
    try {
      const auto pr = pearson(a, b);
      j[name] = {{"r", pr.r}, {"p", pr.p}};
    } catch (const MetricError&) {
      j[name] = nullptr;  // undefined (constant series or too few cases)
    }
  };
  add_pearson("pearson_po", po_pred, po_gt);
  add_pearson("pearson_pho", pho_pred, pho_gt);

  std::ofstream out(path);
  if (!out) throw IoError("cannot write JSON report: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing JSON report: " + path);
}

}  // namespace ctsynth
