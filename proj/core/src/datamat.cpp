#include "dbctl/datamat.hpp"

#include <algorithm>
#include <cmath>

#include "dbctl/errors.hpp"

namespace dbctl {
namespace {

Mat stacked(const HankelTriple& h, Index j) {
  Mat s(h.m() + h.n(), h.N);
  s << h.Hu, h.Hx[static_cast<std::size_t>(j)];
  return s;
}

}  // namespace

void HankelTriple::require_index(Index j) const {
  if (j < 0 || j >= q()) {
    throw ValidationError("grid index " + std::to_string(j) + " outside 0.." +
                          std::to_string(q() - 1));
  }
}

HankelTriple build_hankel(const TrajectoryData& data) {
  data.validate();
  HankelTriple h;
  h.T = data.T;
  h.N = data.N;
  h.grid = data.grid;
  const Index q = data.q();
  h.Hu.resize(data.m(), data.N);
  for (Index i = 0; i < data.N; ++i) {
    h.Hu.col(i) = data.u.col(data.column(i, 0));
    const double scale = 1.0 + h.Hu.col(i).cwiseAbs().maxCoeff();
    for (Index j = 1; j < q; ++j) {
      const double dev = (data.u.col(data.column(i, j)) - h.Hu.col(i)).cwiseAbs().maxCoeff();
      if (dev > 1e-12 * scale) {
        throw ValidationError("input is not constant within segment " + std::to_string(i) +
                              " (deviation " + std::to_string(dev) + ")");
      }
    }
  }
  h.Hx.assign(static_cast<std::size_t>(q), Mat(data.n(), data.N));
  h.Hxd.assign(static_cast<std::size_t>(q), Mat(data.n(), data.N));
  for (Index j = 0; j < q; ++j) {
    for (Index i = 0; i < data.N; ++i) {
      h.Hx[static_cast<std::size_t>(j)].col(i) = data.x.col(data.column(i, j));
      h.Hxd[static_cast<std::size_t>(j)].col(i) = data.xdot.col(data.column(i, j));
    }
  }
  return h;
}

PeReport check_pe(const HankelTriple& h, double tol) {
  PeReport r;
  const Index need = h.m() + h.n();
  if (h.N < need) {
    r.diagnostic = "N = " + std::to_string(h.N) + " columns cannot reach rank m + n = " +
                   std::to_string(need);
    r.ranks.assign(static_cast<std::size_t>(h.q()), 0);
    r.singular_values.assign(static_cast<std::size_t>(h.q()), 0.0);
    return r;
  }
  r.pass = true;
  r.min_singular_value = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < h.q(); ++j) {
    const Mat s = stacked(h, j);
    Eigen::JacobiSVD<Mat> svd(s);
    const auto& sv = svd.singularValues();
    Index rank = 0;
    while (rank < sv.size() && sv(rank) > tol * sv(0)) ++rank;
    const double smallest = sv(need - 1);
    r.ranks.push_back(rank);
    r.singular_values.push_back(smallest);
    r.min_singular_value = std::min(r.min_singular_value, smallest);
    if (rank < need && r.pass) {
      r.pass = false;
      r.diagnostic = "rank " + std::to_string(rank) + " < " + std::to_string(need) +
                     " at grid time t = " + std::to_string(h.grid(j));
    }
  }
  if (r.pass) r.diagnostic = "persistently exciting at all grid times";
  return r;
}

void require_pe(const HankelTriple& h, Index j, double tol) {
  h.require_index(j);
  const Index need = h.m() + h.n();
  if (h.N < need || linalg::rank(stacked(h, j), tol) < need) {
    throw RankError("data are not persistently exciting at t = " + std::to_string(h.grid(j)) +
                    " (rank of [Hu; Hx] below " + std::to_string(need) + ")");
  }
}

RepresentationCoefficients represent_state(const HankelTriple& h, Index j, const Mat& ubar,
                                           const Mat& xbar) {
  require_pe(h, j);
  if (ubar.rows() != h.m() || xbar.rows() != h.n() || ubar.cols() != xbar.cols()) {
    throw DimensionError("target pair has the wrong shape");
  }
  const Mat s = stacked(h, j);
  Mat target(h.m() + h.n(), ubar.cols());
  target << ubar, xbar;
  RepresentationCoefficients rc;
  rc.alpha = linalg::lstsq(s, target);
  rc.residual = (s * rc.alpha - target).norm() / std::max(1.0, target.norm());
  return rc;
}

Mat compute_HA(const HankelTriple& h, Index j) {
  require_pe(h, j);
  const Mat& hx = h.Hx[static_cast<std::size_t>(j)];
  Mat target(h.m() + h.n(), h.N);
  target << Mat::Zero(h.m(), h.N), hx;
  const Mat gbar = linalg::lstsq(stacked(h, j), target);
  return h.Hxd[static_cast<std::size_t>(j)] * gbar;
}

HankelTriple project_consistent(const HankelTriple& h, Index j) {
  require_pe(h, j);
  const Mat d = stacked(h, j);
  Eigen::JacobiSVD<Mat> svd(d, Eigen::ComputeThinV);
  const Mat basis = svd.matrixV().leftCols(d.rows());
  HankelTriple out = h;
  auto& hxd = out.Hxd[static_cast<std::size_t>(j)];
  hxd = (hxd * basis) * basis.transpose();
  return out;
}

}  // namespace dbctl
