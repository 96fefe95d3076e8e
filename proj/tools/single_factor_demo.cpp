// Walks through the closed-form single-factor solution on a small universe
// and checks it against the general active-set solver.

#include <cstdio>
#include <string>

#include "lomv/lomv.hpp"

int main() {
  lomv::SingleFactorInputs in;
  in.sigma_sq = 0.04;
  in.beta.resize(6);
  in.beta << 0.4, 1.3, 0.7, 1.0, 1.8, 0.9;
  in.delta_sq.resize(6);
  in.delta_sq << 0.05, 0.02, 0.09, 0.03, 0.04, 0.06;
  const std::vector<std::string> ids = {"UTIL", "TECH", "STAP", "INDU", "SEMI", "HLTH"};

  const lomv::ExplicitSolution ex = lomv::solve_explicit(in);
  std::printf("sorted by beta:\n");
  for (std::size_t r = 0; r < ex.r_sequence.order.size(); ++r) {
    const lomv::Index i = ex.r_sequence.order[r];
    std::printf("  %-5s beta=%5.2f  R=%+10.4f  w=%.6f\n", ids[static_cast<std::size_t>(i)].c_str(), in.beta[i],
                ex.r_sequence.values[static_cast<lomv::Index>(r)], ex.solution.weights[i]);
  }
  std::printf("k = %ld active, beta threshold = %.6f, variance = %.6g\n", static_cast<long>(ex.r_sequence.k),
              ex.threshold, ex.solution.objective);

  const lomv::LomvSolution general = lomv::solve_active_set(in.to_model());
  const double gap = (general.weights - ex.solution.weights).lpNorm<Eigen::Infinity>();
  std::printf("active-set solver: k = %ld, max weight gap = %.2e, KKT %s\n",
              static_cast<long>(general.active.size()), gap, general.kkt.passed ? "pass" : "FAIL");
  return general.kkt.passed && ex.solution.kkt.passed && gap < 1e-8 ? 0 : 1;
}
