#pragma once

#include <optional>
#include <vector>

#include "dbctl/least_squares.hpp"
#include "dbctl/stability.hpp"

namespace dbctl {

/// Desired trajectories sampled at common times: Xi[i] and Xid[i] are n x M.
struct ReferenceSet {
  Vec times;
  std::vector<Mat> Xi;
  std::vector<Mat> Xid;
  bool derivative_estimated = false;

  Index count() const { return times.size(); }
  Index n() const { return Xi.empty() ? 0 : Xi.front().rows(); }
  Index M() const { return Xi.empty() ? 0 : Xi.front().cols(); }
  void validate() const;
};

/// Builds a reference set; when Xid is absent it is estimated by central
/// differences (one-sided at the ends) and flagged.
ReferenceSet make_reference_set(const Vec& times, std::vector<Mat> Xi,
                                std::optional<std::vector<Mat>> Xid = std::nullopt);

/// Xi(t) = expm(F t) X0 and Xid(t) = F Xi(t) at the given times.
ReferenceSet references_from_generator(const Mat& F, const Mat& X0, const Vec& times);

/// kSquared sums squared Frobenius norms (a linear least-squares problem);
/// kNorm sums the norms themselves and is solved as a conic program.
enum class CostForm { kSquared, kNorm };

struct CandidateOptions {
  CostForm cost_form = CostForm::kSquared;
  /// Multiplies the state and input residuals (i >= 1) before they enter the
  /// cost. Large values approach hard tracking of Xi at every sample.
  double tracking_weight = 1.0;
  convex::SolverOptions solver = convex::SolverOptions::from_environment();
};

struct CandidateResult {
  Mat Kbar;
  double cost = 0.0;       // sum of squared (weighted) Frobenius norms at the optimum
  double norm_cost = 0.0;  // same terms, unsquared
  std::vector<Mat> Gamma;  // one N x M matrix per reference sample
  std::vector<Index> grid_index;
};

/// Stage 1: least-squares fit of Kbar and Gamma(t_i) to the references, with
/// the hard constraints imposed at the first sample.
CandidateResult synthesize_candidate(const HankelTriple& h, const ReferenceSet& refs,
                                     const CandidateOptions& options = CandidateOptions{});

struct ProjectionOptions {
  /// Lower bound P >= tau I as a fraction of the largest certifiable tau.
  double scale_fraction = 0.5;
  convex::SolverOptions solver = convex::SolverOptions::from_environment();
};

/// Stage 2: closest gain to Kbar certified by the disturbance-robust LMI.
GainResult project_stabilizing(const HankelTriple& h, Index j, const Mat& Kbar, const Mat& Wbar,
                               const ProjectionOptions& options = ProjectionOptions{});

struct PipelineResult {
  CandidateResult candidate;
  GainResult gain;
};

PipelineResult trajref_pipeline(const HankelTriple& h, const ReferenceSet& refs, const Mat& Wbar,
                                std::optional<Index> j = std::nullopt,
                                const ProjectionOptions& options = ProjectionOptions{},
                                const CandidateOptions& candidate_options = CandidateOptions{});

namespace detail {
/// Largest tau with P >= tau I admitting a certificate of the robust LMI; with
/// Kbar given, L is tied to -Kbar P. Empty when no certificate exists.
std::optional<double> max_certificate_scale(const HankelTriple& h, Index j, const Mat& Wbar,
                                            const std::optional<Mat>& Kbar,
                                            const convex::SolverOptions& options);
}  // namespace detail

}  // namespace dbctl
