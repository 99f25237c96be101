#pragma once

#include "dbctl/poleplace.hpp"
#include "test_support.hpp"

namespace dbctl::fixtures {

/// Self-conjugate spectrum with real parts in [-4, -0.5].
inline CVec random_stable_poles(std::mt19937_64& rng, Index n) {
  std::uniform_real_distribution<double> re(0.5, 4.0);
  std::uniform_real_distribution<double> im(0.3, 3.0);
  const Index pairs = std::uniform_int_distribution<Index>(0, n / 2)(rng);
  CVec out(n);
  for (Index p = 0; p < pairs; ++p) {
    const Complex l(-re(rng), im(rng));
    out(2 * p) = l;
    out(2 * p + 1) = std::conj(l);
  }
  for (Index k = 2 * pairs; k < n; ++k) out(k) = -re(rng);
  return out;
}

/// Classical eigenvector assignment on the model: one column (v; w) with
/// (A - l I) v + B w = 0 per eigenvalue, random coefficients in the kernel.
inline Mat eigenvector_assignment_gain(const LtiSystem& sys, const CVec& poles,
                                       std::mt19937_64& rng) {
  const Index n = sys.n();
  const Index m = sys.m();
  CMat Vc(n, n);
  CMat Wc(m, n);
  for (Index k = 0; k < n; ++k) {
    if (k > 0 && poles(k).imag() != 0.0 && poles(k) == std::conj(poles(k - 1))) {
      Vc.col(k) = Vc.col(k - 1).conjugate();
      Wc.col(k) = Wc.col(k - 1).conjugate();
      continue;
    }
    CMat pencil(n, n + m);
    pencil << sys.A.cast<Complex>() - poles(k) * CMat::Identity(n, n), sys.B.cast<Complex>();
    Eigen::JacobiSVD<CMat> svd(pencil, Eigen::ComputeFullV);
    const CMat kernel = svd.matrixV().rightCols(m);
    CVec coeff = uniform(rng, m, 1).cast<Complex>();
    if (poles(k).imag() != 0.0) coeff += Complex(0.0, 1.0) * uniform(rng, m, 1);
    const CVec col = kernel * coeff;
    Vc.col(k) = col.head(n);
    Wc.col(k) = col.tail(m);
  }
  return -(Wc * Vc.inverse()).real();
}

inline double data_condition(const HankelTriple& h, Index j) {
  Mat D(h.n() + h.m(), h.N);
  D << h.Hx[static_cast<std::size_t>(j)], h.Hu;
  Eigen::JacobiSVD<Mat> svd(D);
  const auto& sv = svd.singularValues();
  return sv(0) / sv(sv.size() - 1);
}

struct PlacementInstance {
  Experiment e;
  PoleSpec spec;
  Mat model_gain;
};

/// Random controllable (A, B) and spectrum, redrawn while the model-based
/// gain itself misses the spectrum by more than 1e-8 in double precision.
/// Noise-free data (T = 0.2, N = 8(n+1)) are redrawn while [Hx; Hu] at the
/// midpoint has condition number above 1e6.
inline PlacementInstance placement_instance(std::mt19937_64& rng, Index n, Index m,
                                            std::uint64_t data_seed) {
  PlacementInstance inst;
  for (;;) {
    const auto sys = random_controllable_system(rng, n, m);
    inst.spec = PoleSpec::from_values(random_stable_poles(rng, n));
    inst.model_gain = eigenvector_assignment_gain(sys, inst.spec.values(), rng);
    if (placement_error(inst.model_gain, sys, inst.spec) <= 1e-8) {
      inst.e.sys = sys;
      break;
    }
  }
  for (std::uint64_t k = 0;; ++k) {
    inst.e = run_experiment(inst.e.sys, 8 * (n + 1), 0.2, data_seed + 7919 * k);
    if (data_condition(inst.e.h, inst.e.h.default_index()) <= 1e6) break;
  }
  return inst;
}

}  // namespace dbctl::fixtures
