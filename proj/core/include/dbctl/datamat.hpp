#pragma once

#include <string>
#include <vector>

#include "dbctl/system.hpp"

namespace dbctl {

/// Hankel rows of depth one: Hu is constant, Hx[j] and Hxd[j] hold the
/// samples x(t_j + iT) and xdot(t_j + iT) in column i.
struct HankelTriple {
  Mat Hu;
  std::vector<Mat> Hx;
  std::vector<Mat> Hxd;
  Vec grid;
  double T = 1.0;
  Index N = 0;

  Index n() const { return Hx.empty() ? 0 : Hx.front().rows(); }
  Index m() const { return Hu.rows(); }
  Index q() const { return static_cast<Index>(Hx.size()); }
  /// Midpoint of the grid.
  Index default_index() const { return q() / 2; }
  void require_index(Index j) const;
};

HankelTriple build_hankel(const TrajectoryData& data);

struct PeReport {
  bool pass = false;
  double min_singular_value = 0.0;           // over all grid times
  std::vector<double> singular_values;       // smallest one per grid time
  std::vector<Index> ranks;
  std::string diagnostic;
};

/// rank [Hu; Hx(t_j)] = m + n at every grid time.
PeReport check_pe(const HankelTriple& h, double tol = linalg::kDefaultRankTol);
/// Throws RankError unless the PE rank condition holds at grid index j.
void require_pe(const HankelTriple& h, Index j, double tol = linalg::kDefaultRankTol);

struct RepresentationCoefficients {
  Mat alpha;              // N x k
  double residual = 0.0;  // relative
};

/// Minimal-norm alpha with [Hu; Hx(t_j)] alpha = [ubar; xbar].
RepresentationCoefficients represent_state(const HankelTriple& h, Index j, const Mat& ubar,
                                           const Mat& xbar);

/// Copy of h with Hxd(t_j) replaced by its orthogonal projection onto the row
/// space of [Hu; Hx(t_j)]: the least-squares part of the derivative data that
/// some (A, B) explains exactly. Noise-free data are unchanged up to rounding.
/// Throws RankError unless the stacked matrix has full row rank.
HankelTriple project_consistent(const HankelTriple& h, Index j);

/// H_A(t_j) = Hxd(t_j) Gbar with [Hu; Hx(t_j)] Gbar = [0; Hx(t_j)].
Mat compute_HA(const HankelTriple& h, Index j);

}  // namespace dbctl
