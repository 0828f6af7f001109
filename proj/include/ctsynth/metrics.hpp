#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ctsynth/volume.hpp"

namespace ctsynth {

inline constexpr double kHighOpacityHu = -200.0;  // default PHO threshold

// Dice similarity coefficient 2|a∩b| / (|a|+|b|); 1.0 when both are empty.
double dice(const Mask3& a, const Mask3& b);

// Lesion inclusion rate |lesion ∩ lung| / |lesion|. Throws MetricError on an
// empty lesion (the metric is undefined, not zero).
double lir(const Mask3& lesion, const Mask3& lung);

// Percentage of opacity: 100 * |lesion ∩ lung| / |lung|.
double po(const Mask3& lesion, const Mask3& lung);

// Percentage of high opacity: 100 * |{v in lesion ∩ lung : HU(v) >= threshold}| / |lung|.
double pho(const Mask3& lesion, const HuVolume& volume, const Mask3& lung,
           double threshold_hu = kHighOpacityHu);

struct PearsonResult {
  double r;
  double p;  // two-sided, from the t statistic with n-2 dof
};

PearsonResult pearson(const std::vector<double>& x, const std::vector<double>& y);

// Regularized incomplete beta function I_x(a, b), relative tolerance ~1e-10.
double incomplete_beta(double a, double b, double x);

// Survival function of the t distribution used for the Pearson p-value.
double student_t_two_sided_p(double t, double dof);

// Mean weighted binary cross entropy with w = 1 + g1 * y / (1 + exp(-g2 * x)).
// Probabilities are clamped into [1e-7, 1 - 1e-7].
double weighted_bce(const SoftMask3& p, const Mask3& y, const NormVolume& x, double gamma1,
                    double gamma2);

// --- Cohort reporting -----------------------------------------------------------

struct CaseMetricsRow {
  std::string id;
  double dsc = 0;
  double po_pred = 0;
  double po_gt = 0;
  double pho_pred = 0;
  double pho_gt = 0;
  std::optional<double> lir;  // absent when the ground-truth lesion is empty
};

// CSV: one row per case (id, dsc, po_pred, po_gt, pho_pred, pho_gt, lir);
// JSON: per-metric mean/sd plus Pearson r and p for PO and PHO (pred vs gt).
void write_cohort_csv(const std::vector<CaseMetricsRow>& rows, const std::string& path);
void write_cohort_json(const std::vector<CaseMetricsRow>& rows, const std::string& path);

}  // namespace ctsynth
