#pragma once

// Capacity as a hyper-ellipsoid volume ratio. Per-class statistics come
// from per-sample uncertainty estimates; the enclosing population ellipsoid
// pairs the between-class scatter with a canonical class covariance. The
// unit-ball volume cancels, so only log-determinants and radii appear.

#include "repcap/stats.hpp"
#include "repcap/student.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace repcap {

struct ClassStatistics {
  std::string class_id;
  int n_samples = 0;
  Vector mu_c;         // mean of member mu_hat
  Matrix sigma_c_avg;  // mean of member Sigma_hat (plus member scatter, by mode)
  Matrix sigma_z;      // class-specific covariance (equal to sigma_c_avg)
  double log_det_z = 0;
};

struct ClassFilterResult {
  std::vector<ClassStatistics> classes;  // sorted by class_id
  std::vector<std::string> dropped;      // classes below min_samples
};

inline constexpr int kDefaultMinSamples = 5;

/// What the class covariance is built from.
enum class ClassCovariance {
  Uncertainty,       // mean of member Sigma_hat only
  WithMemberScatter, // plus the scatter of member mu_hat about the class mean
};

std::string_view to_string(ClassCovariance c) noexcept;
ClassCovariance parse_class_covariance(std::string_view text);

ClassFilterResult class_statistics(std::span<const std::string> labels,
                                   std::span<const UncertaintyEstimate> estimates,
                                   int min_samples = kDefaultMinSamples,
                                   ClassCovariance mode = ClassCovariance::WithMemberScatter);

/// Builds a class record directly from a mean and covariance.
ClassStatistics make_class_statistics(std::string id, int n_samples, Vector mean,
                                      const Matrix& covariance);

struct PopulationStatistics {
  Vector mu_y;
  Matrix scatter_b;  // (1/C) sum (mu_c - mu_y)(mu_c - mu_y)^T
  Matrix sigma_y;    // enclosing - canonical sigma_z
  Matrix enclosing;  // scatter_b + canonical sigma_c_avg
  int n_classes = 0;
};

PopulationStatistics population_statistics(std::span<const ClassStatistics> classes,
                                           const ClassStatistics& canonical);

/// Between-class scatter of a set of means.
Matrix between_class_scatter(std::span<const Vector> means);

enum class Selector { Min, Mean, Median, Max };

std::string_view to_string(Selector s) noexcept;
Selector parse_selector(std::string_view text);

/// Ranks by log_det_z; ties go to the smallest class_id.
const ClassStatistics& select_canonical_class(std::span<const ClassStatistics> classes,
                                              Selector selector);

inline constexpr double kDefaultPopulationFraction = 0.99;

/// Class radius: r_z^2 = chi2 quantile at 1 - far.
double far_to_radius(double far, int d);
/// Population radius: r_y^2 = chi2 quantile at frac.
double fraction_to_radius(double fraction, int d);

struct CapacityReport {
  double far = 0;
  double population_fraction = 0;
  double r_y = 0;
  double r_z = 0;
  int d = 0;
  double log_capacity = 0;    // natural log
  double log10_capacity = 0;
  double capacity = 0;        // +inf when exp overflows
  bool saturated = false;
  Parameterization parameterization = Parameterization::FullEllipsoid;
  Selector selector = Selector::Max;
  std::string canonical_class_id;
};

/// 0.5 log|enclosing| - 0.5 log|class| + d (log r_y - log r_z), both
/// covariances reduced to `param` first.
double log_capacity(const Matrix& enclosing, const Matrix& class_cov, double r_y, double r_z,
                    Parameterization param);

CapacityReport capacity(const PopulationStatistics& pop, const ClassStatistics& canonical,
                        double r_y, double r_z,
                        Parameterization param = Parameterization::FullEllipsoid);

struct CapacityQuery {
  double far = 0.01;
  double population_fraction = kDefaultPopulationFraction;
  bool shannon_pairing = false;  // forces population_fraction = 1 - far
  Parameterization parameterization = Parameterization::FullEllipsoid;
  Selector selector = Selector::Max;
};

/// Full query over class statistics: selection, population, radii, ratio.
CapacityReport estimate_capacity(std::span<const ClassStatistics> classes,
                                 const CapacityQuery& query);

/// One report per FAR; `fars` must be strictly ascending in (0, 1).
std::vector<CapacityReport> capacity_sweep(const PopulationStatistics& pop,
                                           const ClassStatistics& canonical,
                                           std::span<const double> fars, double fraction,
                                           Parameterization param, bool shannon_pairing = false,
                                           Selector selector = Selector::Max);

inline constexpr std::string_view kSweepCsvHeader =
    "far,r_y,r_z,log10_capacity,parameterization,selector";
std::string to_csv_row(const CapacityReport& r);

}  // namespace repcap
