#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "dbctl/invopt.hpp"
#include "dbctl/system.hpp"
#include "dbctl/trajref.hpp"

namespace dbctl::io {

/// printf %.17g: 17 significant digits, exact round trip for doubles.
std::string format_double(double v);

/// First line "rows cols", then one whitespace-separated row per line.
void write_matrix(std::ostream& os, const Mat& m);
Mat read_matrix(std::istream& is);
void save_matrix(const std::filesystem::path& path, const Mat& m);
Mat load_matrix(const std::filesystem::path& path);

LtiSystem load_system(const std::filesystem::path& a_path, const std::filesystem::path& b_path,
                      std::string label = "file");

/// Header t,i,u_1..u_m,x_1..x_n,xd_1..xd_n with t = i T + t_j, one row per
/// (segment i, grid time t_j), segments outermost.
void write_trajectory_csv(std::ostream& os, const TrajectoryData& data);
/// T is recovered from the first two segments (or the last grid time when
/// N = 1).
TrajectoryData read_trajectory_csv(std::istream& is);
void save_trajectory_csv(const std::filesystem::path& path, const TrajectoryData& data);
TrajectoryData load_trajectory_csv(const std::filesystem::path& path);

/// Header t,traj_id,x_1..x_n,xd_1..xd_n; rows ordered by time, then trajectory.
void write_reference_csv(std::ostream& os, const ReferenceSet& refs);
/// Accepts `traj_id` or `i` as the trajectory column and ignores u_* columns.
/// Without xd_* columns the derivatives are estimated (make_reference_set).
ReferenceSet read_reference_csv(std::istream& is);
ReferenceSet load_reference_csv(const std::filesystem::path& path);

/// Header t,traj_id,u_*,x_*,xd_* with t = sample index * spacing.
void write_bundle_csv(std::ostream& os, const ReferenceBundle& bundle, double spacing = 1.0);
ReferenceBundle read_bundle_csv(std::istream& is);
ReferenceBundle load_bundle_csv(const std::filesystem::path& path);

}  // namespace dbctl::io
