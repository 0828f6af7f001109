#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "ctsynth/metrics.hpp"
#include "ctsynth/rng.hpp"
#include "test_support.hpp"

using namespace ctsynth;

namespace {

Geometry geo_of(int x, int y, int z) {
  Geometry g;
  g.dims = {x, y, z};
  return g;
}

struct BruteCounts {
  std::size_t a = 0, b = 0, inter = 0;
};

BruteCounts count(const Mask3& a, const Mask3& b) {
  BruteCounts c;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    c.a += a.values[i] != 0;
    c.b += b.values[i] != 0;
    c.inter += (a.values[i] && b.values[i]);
  }
  return c;
}

}  // namespace

TEST_CASE("dice fixed points and fixture") {
  const Geometry g = geo_of(6, 6, 6);
  const Mask3 a = testsup::random_blob(g, 1);
  CHECK(dice(a, a) == doctest::Approx(1.0));

  Mask3 b = make_mask(g);
  Mask3 c = make_mask(g);
  b.at(0, 0, 0) = 1;
  c.at(5, 5, 5) = 1;
  CHECK(dice(b, c) == doctest::Approx(0.0));

  CHECK(dice(make_mask(g), make_mask(g)) == doctest::Approx(1.0));

  // |a|=8, |b|=8, |a∩b|=4 -> 0.5
  Mask3 m1 = make_mask(g), m2 = make_mask(g);
  for (int i = 0; i < 8; ++i) m1.values[i] = 1;
  for (int i = 4; i < 12; ++i) m2.values[i] = 1;
  CHECK(dice(m1, m2) == doctest::Approx(0.5));
}

TEST_CASE("dice is symmetric") {
  const Geometry g = geo_of(8, 8, 8);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Mask3 a = testsup::random_mask(g, 0.3, s * 2);
    const Mask3 b = testsup::random_mask(g, 0.3, s * 2 + 1);
    CHECK(dice(a, b) == doctest::Approx(dice(b, a)).epsilon(1e-15));
  }
}

TEST_CASE("lir fixed points") {
  const Geometry g = geo_of(6, 6, 6);
  const Mask3 lesion = testsup::random_blob(g, 2);
  const Mask3 full = make_mask(g, 1);
  CHECK(lir(lesion, full) == doctest::Approx(1.0));
  CHECK(lir(lesion, make_mask(g)) == doctest::Approx(0.0));
  CHECK_THROWS_AS(lir(make_mask(g), full), MetricError);

  // Half in, half out.
  Mask3 l = make_mask(g), lung = make_mask(g);
  for (int i = 0; i < 10; ++i) l.values[i] = 1;
  for (int i = 0; i < 5; ++i) lung.values[i] = 1;
  CHECK(lir(l, lung) == doctest::Approx(0.5));
}

TEST_CASE("po fixed points") {
  const Geometry g = geo_of(10, 10, 10);
  Mask3 lung = make_mask(g);
  for (int i = 0; i < 1000; ++i) lung.values[i] = 1;
  CHECK(po(lung, lung) == doctest::Approx(100.0));
  CHECK(po(make_mask(g), lung) == doctest::Approx(0.0));

  Mask3 lesion = make_mask(g);
  for (int i = 0; i < 150; ++i) lesion.values[i] = 1;
  CHECK(po(lesion, lung) == doctest::Approx(15.0));
  CHECK_THROWS_AS(po(lesion, make_mask(g)), MetricError);
}

TEST_CASE("pho fixed points and half split") {
  const Geometry g = geo_of(10, 10, 10);
  const Mask3 lung = make_mask(g, 1);
  Mask3 lesion = make_mask(g);
  for (int i = 0; i < 200; ++i) lesion.values[i] = 1;

  HuVolume low = make_hu_volume(g, -600);
  CHECK(pho(lesion, low, lung) == doctest::Approx(0.0));

  HuVolume high = make_hu_volume(g, -100);
  CHECK(pho(lesion, high, lung) == doctest::Approx(po(lesion, lung)));

  // Half the lesion at -100 HU, half at -600 HU.
  HuVolume split = make_hu_volume(g, -600);
  for (int i = 0; i < 100; ++i) split.values[i] = -100;
  CHECK(pho(lesion, split, lung) == doctest::Approx(po(lesion, lung) / 2.0));
}

TEST_CASE("metrics equal brute-force counting on random fixtures") {
  const Geometry g = geo_of(12, 12, 12);
  SplitMix64 rng(17);
  for (int rep = 0; rep < 30; ++rep) {
    const Mask3 lesion = testsup::random_mask(g, 0.3, rng.next_u64());
    const Mask3 lung = testsup::random_mask(g, 0.6, rng.next_u64());
    HuVolume vol = make_hu_volume(g);
    for (auto& s : vol.values) {
      s = static_cast<std::int16_t>(static_cast<std::int64_t>(rng.next_index(2000)) - 1000);
    }
    const auto c = count(lesion, lung);
    if (c.a + c.b > 0) {
      CHECK(dice(lesion, lung) ==
            doctest::Approx(2.0 * c.inter / static_cast<double>(c.a + c.b)).epsilon(1e-12));
    }
    if (c.a > 0) {
      CHECK(lir(lesion, lung) ==
            doctest::Approx(c.inter / static_cast<double>(c.a)).epsilon(1e-12));
    }
    if (c.b > 0) {
      CHECK(po(lesion, lung) ==
            doctest::Approx(100.0 * c.inter / static_cast<double>(c.b)).epsilon(1e-12));
      std::size_t nhigh = 0;
      for (std::size_t i = 0; i < lesion.values.size(); ++i) {
        if (lesion.values[i] && lung.values[i] && vol.values[i] >= -200) ++nhigh;
      }
      CHECK(pho(lesion, vol, lung) ==
            doctest::Approx(100.0 * nhigh / static_cast<double>(c.b)).epsilon(1e-12));
      CHECK(pho(lesion, vol, lung) <= po(lesion, lung) + 1e-12);
    }
  }
}

TEST_CASE("pearson on exact linear relations") {
  const std::vector<double> x{1, 2, 3, 4, 5, 6};
  std::vector<double> y;
  for (double v : x) y.push_back(2 * v + 1);
  const auto up = pearson(x, y);
  CHECK(up.r == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(up.p <= 1e-12);

  y.clear();
  for (double v : x) y.push_back(-v);
  const auto down = pearson(x, y);
  CHECK(down.r == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("pearson matches the independent oracle on fixtures") {
  SplitMix64 rng(29);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t n = 10 + rng.next_index(20);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.uniform(-50, 50);
      y[i] = 0.6 * x[i] + rng.uniform(-30, 30);
    }
    const auto got = pearson(x, y);
    const double r_oracle = testsup::oracle_pearson_r(x, y);
    CHECK(std::abs(got.r - r_oracle) <= 1e-9);

    const double dof = static_cast<double>(n - 2);
    const double t = r_oracle * std::sqrt(dof / (1 - r_oracle * r_oracle));
    const double p_oracle = testsup::oracle_t_two_sided_p(t, dof);
    CHECK(std::abs(got.p - p_oracle) <= 1e-6);
  }
}

TEST_CASE("pearson is invariant under positive affine transforms") {
  SplitMix64 rng(31);
  std::vector<double> x(15), y(15);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = rng.uniform(0, 10);
    y[i] = rng.uniform(0, 10);
  }
  const auto base = pearson(x, y);
  std::vector<double> xs;
  for (double v : x) xs.push_back(3.5 * v + 11.0);
  CHECK(std::abs(pearson(xs, y).r - base.r) <= 1e-12);

  std::vector<double> yn;
  for (double v : y) yn.push_back(-v);
  CHECK(pearson(x, yn).r == doctest::Approx(-base.r).epsilon(1e-12));
}

TEST_CASE("pearson error paths") {
  CHECK_THROWS_AS(pearson({1, 2}, {1, 2}), MetricError);
  CHECK_THROWS_AS(pearson({1, 1, 1, 1}, {1, 2, 3, 4}), MetricError);
  CHECK_THROWS_AS(pearson({1, 2, 3}, {1, 2}), ParamError);
}

TEST_CASE("incomplete beta sanity against symmetry") {
  // I_x(a,b) = 1 - I_{1-x}(b,a)
  for (double x : {0.1, 0.3, 0.5, 0.8}) {
    CHECK(incomplete_beta(2.5, 1.5, x) ==
          doctest::Approx(1.0 - incomplete_beta(1.5, 2.5, 1.0 - x)).epsilon(1e-12));
  }
  CHECK(incomplete_beta(1.0, 1.0, 0.25) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("weighted_bce reduces to plain BCE when gamma1 is zero") {
  const Geometry g = geo_of(6, 6, 4);
  SplitMix64 rng(37);
  SoftMask3 p = make_soft_mask(g);
  for (auto& f : p.values) f = static_cast<float>(rng.uniform(0.05, 0.95));
  const Mask3 y = testsup::random_mask(g, 0.4, 38);
  NormVolume x{g, std::vector<float>(g.voxel_count()), RangeTag::SYM, Window{-624, 1500}};
  for (auto& f : x.values) f = static_cast<float>(rng.uniform(-1, 1));

  const double got = weighted_bce(p, y, x, 0.0, 4.0);
  double expected = 0;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const double pi = std::clamp(static_cast<double>(p.values[i]), 1e-7, 1 - 1e-7);
    const double yi = y.values[i] ? 1.0 : 0.0;
    expected += -(yi * std::log(pi) + (1 - yi) * std::log(1 - pi));
  }
  expected /= static_cast<double>(p.values.size());
  CHECK(std::abs(got - expected) <= 1e-12);
}

TEST_CASE("weighted_bce weight substitutions") {
  const Geometry g = geo_of(1, 1, 1);
  SoftMask3 p = make_soft_mask(g, 0.5f);
  NormVolume x{g, {0.0f}, RangeTag::SYM, Window{-624, 1500}};

  // y = 1, x = 0, g1 = 2, g2 = 1: w = 1 + 2 * (1/2) = 2 -> loss = 2 * -log(0.5)
  Mask3 y1 = make_mask(g, 1);
  CHECK(weighted_bce(p, y1, x, 2.0, 1.0) ==
        doctest::Approx(2.0 * -std::log(0.5)).epsilon(1e-12));

  // y = 0 everywhere: w = 1 regardless of gamma.
  Mask3 y0 = make_mask(g, 0);
  CHECK(weighted_bce(p, y0, x, 5.0, 3.0) ==
        doctest::Approx(-std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("cohort reports: CSV layout and JSON summary") {
  testsup::TempDir tmp("report");
  std::vector<CaseMetricsRow> rows;
  for (int i = 0; i < 5; ++i) {
    CaseMetricsRow r;
    r.id = "case" + std::to_string(i);
    r.dsc = 0.5 + 0.05 * i;
    r.po_pred = 10.0 + i;
    r.po_gt = 11.0 + i;
    r.pho_pred = 4.0 + 0.5 * i;
    r.pho_gt = 4.2 + 0.5 * i;
    if (i != 2) r.lir = 0.9 + 0.01 * i;
    rows.push_back(r);
  }
  write_cohort_csv(rows, tmp.file("r.csv"));
  write_cohort_json(rows, tmp.file("r.json"));

  std::ifstream csv(tmp.file("r.csv"));
  std::string header;
  std::getline(csv, header);
  CHECK(header == "id,dsc,po_pred,po_gt,pho_pred,pho_gt,lir");
  std::string line;
  int count = 0;
  while (std::getline(csv, line)) {
    if (!line.empty()) ++count;
  }
  CHECK(count == 5);

  std::ifstream jf(tmp.file("r.json"));
  const auto j = nlohmann::json::parse(jf);
  CHECK(j["cases"] == 5);
  CHECK(j["lir"]["n"] == 4);  // one absent
  CHECK(j["pearson_po"]["r"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(j["dsc"]["mean"].get<double>() == doctest::Approx(0.6).epsilon(1e-9));
}
