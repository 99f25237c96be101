#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dbctl/datamat.hpp"

namespace dbctl {

using linalg::CMat;
using linalg::CVec;
using Complex = std::complex<double>;

struct PoleEntry {
  Complex value;
  Index multiplicity = 1;
};

/// Distinct closed-loop eigenvalues with multiplicities. Normalized order:
/// complex pairs first (positive imaginary part, then its conjugate), reals
/// after.
class PoleSpec {
 public:
  PoleSpec() = default;
  /// Merges repeated values, snaps imaginary parts below tol to zero and
  /// orders the entries. Throws ValidationError unless the set is
  /// self-conjugate with matching multiplicities.
  static PoleSpec from_entries(std::vector<PoleEntry> entries, double tol = 1e-10);
  static PoleSpec from_values(const CVec& values, double tol = 1e-10);

  const std::vector<PoleEntry>& entries() const { return entries_; }
  Index size() const { return static_cast<Index>(entries_.size()); }
  Index n() const;
  /// Number of conjugate pairs (s); entries 0..2s-1 are complex.
  Index complex_pairs() const;
  bool is_real(Index i) const { return entries_[static_cast<std::size_t>(i)].value.imag() == 0.0; }
  /// All n eigenvalues, repeated by multiplicity.
  CVec values() const;
  /// Throws DimensionError unless the multiplicities add up to n and
  /// ValidationError if some multiplicity exceeds m.
  void validate(Index n, Index m) const;

 private:
  std::vector<PoleEntry> entries_;
};

/// Null-space data per distinct eigenvalue. N[i] is (n+m) x s_i with state
/// rows first; for a conjugate pair the second block is the conjugate of the
/// first.
struct NullFamily {
  PoleSpec spec;
  Index n = 0;
  Index m = 0;
  std::vector<CMat> S;
  std::vector<CMat> Nbar;
  std::vector<CMat> N;

  Index s(Index i) const { return N[static_cast<std::size_t>(i)].cols(); }
  /// [N_1 ... N_nu].
  CMat assembled() const;
  /// Real parameters of a structured G.
  Index parameter_count() const;
};

/// S(l) = Hxd(t_j) - l Hx(t_j), Nbar = null(S(l)) and N = dominant basis of
/// [Hx(t_j); Hu] Nbar of dimension at most m. Throws RankError when a block
/// is too small for its multiplicity.
NullFamily build_null_family(const HankelTriple& h, Index j, const PoleSpec& spec,
                             double rank_tol = linalg::kDefaultRankTol);

/// Block-diagonal parameter G = diag{G_i}, G_i of size s_i x eta_i.
/// Conjugate partners always hold the conjugate of the preceding block and
/// real eigenvalues have real blocks.
struct ParamG {
  std::vector<CMat> blocks;

  CMat matrix() const;
};

ParamG param_from_vector(const NullFamily& fam, const Vec& theta);
Vec param_to_vector(const NullFamily& fam, const ParamG& g);
/// Entries (real and imaginary parts) uniform on [-1, 1].
ParamG random_param(const NullFamily& fam, std::mt19937_64& rng);
/// Throws DimensionError/ValidationError when G breaks the block structure.
void validate_param(const NullFamily& fam, const ParamG& g);

struct PlacedGain {
  Mat K;   // closed loop A - BK
  Mat V;   // n x n
  Mat W;   // m x n
  CMat X;  // state rows of N G
  double objective = 0.0;  // ||V||_F + ||V^-1||_F
};

/// K = -W V^{-1} from the real form of M = N G. Throws RankError when V is
/// numerically singular (draw another G).
PlacedGain gain_from_G(const NullFamily& fam, const ParamG& g);

/// ||V||_F + ||V^-1||_F and its gradient in the parameter vector; infinity
/// when V is numerically singular.
double condition_objective(const NullFamily& fam, const Vec& theta, Vec* grad = nullptr);

struct PolePlacementOptions {
  int restarts = 10;
  int max_iterations = 300;
  std::uint64_t seed = 0;
  double rank_tol = linalg::kDefaultRankTol;
  /// Redraws allowed when a random G gives a singular V.
  int max_redraws = 100;
};

struct PolePlacementResult {
  Mat K;
  Mat V;
  Mat W;
  ParamG G;
  double objective = 0.0;
  double initial_objective = 0.0;  // at the start of the winning restart
  int restarts_completed = 0;
  std::string method;
};

/// Minimizes ||V(G)||_F + ||V(G)^-1||_F with BFGS from `restarts` random starts.
PolePlacementResult place_poles_robust(const HankelTriple& h, Index j, const PoleSpec& spec,
                                       const PolePlacementOptions& options = PolePlacementOptions{});

/// One random admissible G, no optimization.
PolePlacementResult place_poles_baseline(const HankelTriple& h, Index j, const PoleSpec& spec,
                                         std::uint64_t seed,
                                         double rank_tol = linalg::kDefaultRankTol);

/// Sum of |l_i - l_i*| with both spectra sorted by magnitude (ties by real,
/// then imaginary part).
double placement_error(const Mat& K, const LtiSystem& sys, const PoleSpec& spec);

}  // namespace dbctl
