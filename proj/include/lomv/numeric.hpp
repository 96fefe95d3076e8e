#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace lomv {

/// Neumaier (improved Kahan) compensated summation.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      compensation_ += (sum_ - t) + x;
    } else {
      compensation_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  CompensatedSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }

  double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

inline double compensated_sum(const Eigen::Ref<const Eigen::VectorXd>& v) {
  CompensatedSum s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += v[i];
  return s.value();
}

/// Median of a copy of the values (mean of the two middle entries for even n).
inline double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  const double upper = *mid;
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

inline double median(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return median(std::vector<double>(v.data(), v.data() + v.size()));
}

}  // namespace lomv
