#include "repcap/capacity.hpp"

#include "repcap/error.hpp"
#include "repcap/format.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

namespace repcap {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

ClassStatistics make_class_statistics(std::string id, int n_samples, Vector mean,
                                      const Matrix& covariance) {
  ClassStatistics c;
  c.class_id = std::move(id);
  c.n_samples = n_samples;
  c.mu_c = std::move(mean);
  c.sigma_c_avg = 0.5 * (covariance + covariance.transpose());
  c.sigma_z = c.sigma_c_avg;
  c.log_det_z = cholesky_logdet(c.sigma_z).log_det;
  return c;
}

std::string_view to_string(ClassCovariance c) noexcept {
  return c == ClassCovariance::Uncertainty ? "uncertainty" : "with-scatter";
}

ClassCovariance parse_class_covariance(std::string_view text) {
  if (text == "uncertainty") return ClassCovariance::Uncertainty;
  if (text == "with-scatter") return ClassCovariance::WithMemberScatter;
  throw Error(ErrorCode::InvalidArgument, "unknown class covariance '" + std::string(text) + "'");
}

ClassFilterResult class_statistics(std::span<const std::string> labels,
                                   std::span<const UncertaintyEstimate> estimates,
                                   int min_samples, ClassCovariance mode) {
  if (labels.size() != estimates.size()) {
    throw Error(ErrorCode::DimensionMismatch, "one label per estimate required");
  }
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);

  ClassFilterResult out;
  for (const auto& [id, members] : groups) {
    if (static_cast<int>(members.size()) < std::max(1, min_samples)) {
      out.dropped.push_back(id);
      continue;
    }
    const auto m = estimates[members.front()].mu_hat.size();
    Vector mean = Vector::Zero(m);
    Matrix cov = Matrix::Zero(m, m);
    for (std::size_t i : members) {
      if (estimates[i].mu_hat.size() != m) {
        throw Error(ErrorCode::DimensionMismatch, "estimates of class " + id + " differ in size");
      }
      mean += estimates[i].mu_hat;
      cov += estimates[i].sigma_hat;
    }
    const double n = static_cast<double>(members.size());
    mean /= n;
    cov /= n;
    if (mode == ClassCovariance::WithMemberScatter) {
      Matrix scatter = Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
      for (std::size_t i : members) {
        const Vector c = estimates[i].mu_hat - mean;
        scatter.noalias() += c * c.transpose();
      }
      cov += scatter / n;
    }
    out.classes.push_back(make_class_statistics(id, static_cast<int>(members.size()), mean, cov));
  }
  if (out.classes.empty()) {
    throw Error(ErrorCode::NoUsableClasses, "no class has at least " +
                                                std::to_string(min_samples) + " samples");
  }
  return out;
}

Matrix between_class_scatter(std::span<const Vector> means) {
  const Eigen::Index m = means.front().size();
  Vector mu = Vector::Zero(m);
  for (const auto& v : means) mu += v;
  mu /= static_cast<double>(means.size());
  Matrix s = Matrix::Zero(m, m);
  for (const auto& v : means) {
    const Vector c = v - mu;
    s.noalias() += c * c.transpose();
  }
  return s / static_cast<double>(means.size());
}

PopulationStatistics population_statistics(std::span<const ClassStatistics> classes,
                                           const ClassStatistics& canonical) {
  if (classes.size() < 2) {
    throw Error(ErrorCode::InsufficientClasses,
                "need at least 2 classes, got " + std::to_string(classes.size()));
  }
  std::vector<Vector> means;
  means.reserve(classes.size());
  for (const auto& c : classes) {
    if (c.mu_c.size() != canonical.mu_c.size()) {
      throw Error(ErrorCode::DimensionMismatch, "class means differ in dimension");
    }
    means.push_back(c.mu_c);
  }
  PopulationStatistics pop;
  pop.n_classes = static_cast<int>(classes.size());
  pop.mu_y = Vector::Zero(canonical.mu_c.size());
  for (const auto& v : means) pop.mu_y += v;
  pop.mu_y /= static_cast<double>(means.size());
  pop.scatter_b = between_class_scatter(means);
  pop.enclosing = pop.scatter_b + canonical.sigma_c_avg;
  pop.sigma_y = pop.enclosing - canonical.sigma_z;
  return pop;
}

std::string_view to_string(Selector s) noexcept {
  switch (s) {
    case Selector::Min: return "min";
    case Selector::Mean: return "mean";
    case Selector::Median: return "median";
    case Selector::Max: return "max";
  }
  return "max";
}

Selector parse_selector(std::string_view text) {
  if (text == "min") return Selector::Min;
  if (text == "mean") return Selector::Mean;
  if (text == "median") return Selector::Median;
  if (text == "max") return Selector::Max;
  throw Error(ErrorCode::InvalidArgument, "unknown selector '" + std::string(text) + "'");
}

const ClassStatistics& select_canonical_class(std::span<const ClassStatistics> classes,
                                              Selector selector) {
  if (classes.empty()) throw Error(ErrorCode::NoUsableClasses, "no classes to select from");

  std::vector<const ClassStatistics*> ranked;
  for (const auto& c : classes) ranked.push_back(&c);
  std::sort(ranked.begin(), ranked.end(), [](const auto* a, const auto* b) {
    if (a->log_det_z != b->log_det_z) return a->log_det_z < b->log_det_z;
    return a->class_id < b->class_id;
  });

  switch (selector) {
    case Selector::Min:
      return *ranked.front();
    case Selector::Max: {
      const double top = ranked.back()->log_det_z;
      auto first = std::find_if(ranked.begin(), ranked.end(),
                                [top](const auto* c) { return c->log_det_z == top; });
      return **first;
    }
    case Selector::Median:
      return *ranked[(ranked.size() - 1) / 2];
    case Selector::Mean: {
      double mean = 0;
      for (const auto* c : ranked) mean += c->log_det_z;
      mean /= static_cast<double>(ranked.size());
      const ClassStatistics* best = nullptr;
      double best_gap = std::numeric_limits<double>::infinity();
      for (const auto* c : ranked) {
        const double gap = std::abs(c->log_det_z - mean);
        if (gap < best_gap || (gap == best_gap && c->class_id < best->class_id)) {
          best = c;
          best_gap = gap;
        }
      }
      return *best;
    }
  }
  return *ranked.back();
}

double far_to_radius(double far, int d) { return std::sqrt(chi2_inverse_sf(far, d)); }

double fraction_to_radius(double fraction, int d) {
  return std::sqrt(chi2_inverse_cdf(fraction, d));
}

double log_capacity(const Matrix& enclosing, const Matrix& class_cov, double r_y, double r_z,
                    Parameterization param) {
  if (enclosing.rows() != class_cov.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "population and class covariances differ in size");
  }
  if (!(r_y > 0) || !(r_z >= 0)) throw Error(ErrorCode::InvalidArgument, "radii must be positive");
  const double d = static_cast<double>(enclosing.rows());
  const double half_ratio = 0.5 * (log_det(enclosing, param) - log_det(class_cov, param));
  if (r_z == 0) return std::numeric_limits<double>::infinity();
  if (r_y == r_z) return half_ratio;
  return half_ratio + d * (std::log(r_y) - std::log(r_z));
}

namespace {

void finish_report(CapacityReport& r) {
  r.log10_capacity = r.log_capacity / std::numbers::ln10;
  r.saturated = !(r.log_capacity < std::log(std::numeric_limits<double>::max()));
  r.capacity = r.saturated ? std::numeric_limits<double>::infinity() : std::exp(r.log_capacity);
}

}  // namespace

CapacityReport capacity(const PopulationStatistics& pop, const ClassStatistics& canonical,
                        double r_y, double r_z, Parameterization param) {
  CapacityReport r;
  r.far = std::numeric_limits<double>::quiet_NaN();
  r.population_fraction = std::numeric_limits<double>::quiet_NaN();
  r.r_y = r_y;
  r.r_z = r_z;
  r.d = static_cast<int>(canonical.sigma_z.rows());
  r.parameterization = param;
  r.canonical_class_id = canonical.class_id;
  r.log_capacity = log_capacity(pop.enclosing, canonical.sigma_z, r_y, r_z, param);
  finish_report(r);
  return r;
}

std::vector<CapacityReport> capacity_sweep(const PopulationStatistics& pop,
                                           const ClassStatistics& canonical,
                                           std::span<const double> fars, double fraction,
                                           Parameterization param, bool shannon_pairing,
                                           Selector selector) {
  if (fars.empty()) throw Error(ErrorCode::InvalidArgument, "empty FAR list");
  for (std::size_t i = 0; i < fars.size(); ++i) {
    if (!(fars[i] > 0 && fars[i] < 1)) {
      throw Error(ErrorCode::InvalidProbability, "FAR " + format_number(fars[i]) +
                                                     " outside (0, 1)");
    }
    if (i > 0 && !(fars[i] > fars[i - 1])) {
      throw Error(ErrorCode::InvalidArgument, "FAR list must be strictly ascending");
    }
  }
  const int d = static_cast<int>(canonical.sigma_z.rows());
  std::vector<CapacityReport> rows;
  for (double q : fars) {
    const double frac = shannon_pairing ? 1.0 - q : fraction;
    const double r_z = far_to_radius(q, d);
    const double r_y = shannon_pairing ? r_z : fraction_to_radius(frac, d);
    CapacityReport r = capacity(pop, canonical, r_y, r_z, param);
    r.far = q;
    r.population_fraction = frac;
    r.selector = selector;
    rows.push_back(std::move(r));
  }
  return rows;
}

CapacityReport estimate_capacity(std::span<const ClassStatistics> classes,
                                 const CapacityQuery& query) {
  const ClassStatistics& canonical = select_canonical_class(classes, query.selector);
  const PopulationStatistics pop = population_statistics(classes, canonical);
  const double far[] = {query.far};
  return capacity_sweep(pop, canonical, far, query.population_fraction, query.parameterization,
                        query.shannon_pairing, query.selector)
      .front();
}

std::string to_csv_row(const CapacityReport& r) {
  return format_number(r.far) + "," + format_number(r.r_y) + "," + format_number(r.r_z) + "," +
         format_number(r.log10_capacity) + "," + std::string(to_string(r.parameterization)) +
         "," + std::string(to_string(r.selector));
}

}  // namespace repcap
