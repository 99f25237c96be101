#include "dbctl/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "dbctl/errors.hpp"

namespace dbctl::io {
namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

double parse_double(const std::string& token, const std::string& where) {
  const char* begin = token.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || (errno == ERANGE && std::isinf(v))) {
    throw ValidationError("cannot parse number '" + token + "' in " + where);
  }
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) {
    cell.erase(0, cell.find_first_not_of(" \t\r"));
    cell.erase(cell.find_last_not_of(" \t\r") + 1);
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

// Column layout of a CSV with named u_k, x_k, xd_k groups.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  Index column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<Index>(it - header.begin());
  }

  // Indices of prefix_1, prefix_2, ... in order; stops at the first gap.
  std::vector<Index> group(const std::string& prefix) const {
    std::vector<Index> cols;
    for (int k = 1;; ++k) {
      const Index c = column(prefix + "_" + std::to_string(k));
      if (c < 0) break;
      cols.push_back(c);
    }
    return cols;
  }

  double at(std::size_t row, Index col) const { return rows[row][static_cast<std::size_t>(col)]; }
};

Table read_table(std::istream& is, const std::string& what) {
  Table t;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) break;
  }
  if (line.empty()) throw ValidationError(what + " is empty");
  t.header = split(line, ',');
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line, ',');
    if (cells.size() != t.header.size()) {
      throw ValidationError(what + " line " + std::to_string(lineno) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(t.header.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c, what + " line " + std::to_string(lineno)));
    t.rows.push_back(std::move(row));
  }
  return t;
}

Index require_column(const Table& t, const std::string& name, const std::string& what) {
  const Index c = t.column(name);
  if (c < 0) throw ValidationError(what + " has no '" + name + "' column");
  return c;
}

Index as_index(double v, const std::string& what) {
  if (!(v >= 0.0) || v != std::floor(v)) {
    throw ValidationError(what + " index column must hold non-negative integers");
  }
  return static_cast<Index>(v);
}

void write_header(std::ostream& os, const std::string& lead, const std::vector<std::pair<std::string, Index>>& groups) {
  os << lead;
  for (const auto& [prefix, count] : groups) {
    for (Index k = 1; k <= count; ++k) os << ',' << prefix << '_' << k;
  }
  os << '\n';
}

void write_column(std::ostream& os, const Mat& m, Index col) {
  for (Index r = 0; r < m.rows(); ++r) os << ',' << format_double(m(r, col));
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_matrix(std::ostream& os, const Mat& m) {
  os << m.rows() << ' ' << m.cols() << '\n';
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c > 0) os << ' ';
      os << format_double(m(r, c));
    }
    os << '\n';
  }
}

Mat read_matrix(std::istream& is) {
  long long rows = -1;
  long long cols = -1;
  if (!(is >> rows >> cols) || rows < 0 || cols < 0) {
    throw ValidationError("matrix text must start with 'rows cols'");
  }
  Mat m(rows, cols);
  std::string token;
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      if (!(is >> token)) {
        throw ValidationError("matrix text ends after " + std::to_string(r * cols + c) + " of " +
                              std::to_string(rows * cols) + " entries");
      }
      m(r, c) = parse_double(token, "matrix text");
    }
  }
  if (is >> token) throw ValidationError("matrix text has trailing entries");
  return m;
}

void save_matrix(const std::filesystem::path& path, const Mat& m) {
  auto out = open_out(path);
  write_matrix(out, m);
}

Mat load_matrix(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return read_matrix(in);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

LtiSystem load_system(const std::filesystem::path& a_path, const std::filesystem::path& b_path,
                      std::string label) {
  LtiSystem sys{load_matrix(a_path), load_matrix(b_path), std::move(label)};
  sys.validate();
  return sys;
}

void write_trajectory_csv(std::ostream& os, const TrajectoryData& d) {
  d.validate();
  write_header(os, "t,i", {{"u", d.m()}, {"x", d.n()}, {"xd", d.n()}});
  for (Index i = 0; i < d.N; ++i) {
    for (Index j = 0; j < d.q(); ++j) {
      const Index col = d.column(i, j);
      os << format_double(static_cast<double>(i) * d.T + d.grid(j)) << ',' << i;
      write_column(os, d.u, col);
      write_column(os, d.x, col);
      write_column(os, d.xdot, col);
      os << '\n';
    }
  }
}

TrajectoryData read_trajectory_csv(std::istream& is) {
  const std::string what = "trajectory CSV";
  const Table t = read_table(is, what);
  const Index tc = require_column(t, "t", what);
  const Index ic = require_column(t, "i", what);
  const auto uc = t.group("u");
  const auto xc = t.group("x");
  const auto dc = t.group("xd");
  if (uc.empty() || xc.empty()) throw ValidationError(what + " needs u_1.. and x_1.. columns");
  if (dc.size() != xc.size()) throw ValidationError(what + " needs one xd column per x column");
  if (t.rows.empty()) throw ValidationError(what + " has no rows");

  std::map<Index, std::vector<std::size_t>> segments;
  for (std::size_t r = 0; r < t.rows.size(); ++r) segments[as_index(t.at(r, ic), what)].push_back(r);
  const auto N = static_cast<Index>(segments.size());
  if (segments.begin()->first != 0 || segments.rbegin()->first != N - 1) {
    throw ValidationError(what + " segments must be numbered 0..N-1");
  }
  const auto q = static_cast<Index>(segments.begin()->second.size());
  for (const auto& [i, rows] : segments) {
    if (static_cast<Index>(rows.size()) != q) {
      throw ValidationError(what + " segment " + std::to_string(i) + " has a different grid size");
    }
  }

  TrajectoryData d;
  d.N = N;
  const auto& first = segments.at(0);
  d.grid.resize(q);
  for (Index j = 0; j < q; ++j) d.grid(j) = t.at(first[static_cast<std::size_t>(j)], tc);
  if (N > 1) {
    d.T = t.at(segments.at(1)[0], tc) - d.grid(0);
  } else {
    d.T = d.grid(q - 1);
  }
  if (!(d.T > 0.0)) throw ValidationError(what + " does not determine a positive segment length");

  const auto m = static_cast<Index>(uc.size());
  const auto n = static_cast<Index>(xc.size());
  d.u.resize(m, N * q);
  d.x.resize(n, N * q);
  d.xdot.resize(n, N * q);
  for (const auto& [i, rows] : segments) {
    for (Index j = 0; j < q; ++j) {
      const auto r = rows[static_cast<std::size_t>(j)];
      const Index col = d.column(i, j);
      for (Index k = 0; k < m; ++k) d.u(k, col) = t.at(r, uc[static_cast<std::size_t>(k)]);
      for (Index k = 0; k < n; ++k) {
        d.x(k, col) = t.at(r, xc[static_cast<std::size_t>(k)]);
        d.xdot(k, col) = t.at(r, dc[static_cast<std::size_t>(k)]);
      }
    }
  }
  d.validate();
  return d;
}

void save_trajectory_csv(const std::filesystem::path& path, const TrajectoryData& data) {
  auto out = open_out(path);
  write_trajectory_csv(out, data);
}

TrajectoryData load_trajectory_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_trajectory_csv(in);
}

void write_reference_csv(std::ostream& os, const ReferenceSet& refs) {
  refs.validate();
  write_header(os, "t,traj_id", {{"x", refs.n()}, {"xd", refs.n()}});
  for (Index s = 0; s < refs.count(); ++s) {
    const auto ss = static_cast<std::size_t>(s);
    for (Index k = 0; k < refs.M(); ++k) {
      os << format_double(refs.times(s)) << ',' << k;
      write_column(os, refs.Xi[ss], k);
      write_column(os, refs.Xid[ss], k);
      os << '\n';
    }
  }
}

ReferenceSet read_reference_csv(std::istream& is) {
  const std::string what = "reference CSV";
  const Table t = read_table(is, what);
  const Index tc = require_column(t, "t", what);
  Index kc = t.column("traj_id");
  if (kc < 0) kc = require_column(t, "i", what);
  const auto xc = t.group("x");
  const auto dc = t.group("xd");
  if (xc.empty()) throw ValidationError(what + " needs x_1.. columns");
  if (!dc.empty() && dc.size() != xc.size()) {
    throw ValidationError(what + " needs one xd column per x column when derivatives are given");
  }
  std::map<Index, std::vector<std::size_t>> trajectories;
  for (std::size_t r = 0; r < t.rows.size(); ++r) trajectories[as_index(t.at(r, kc), what)].push_back(r);
  if (trajectories.empty()) throw ValidationError(what + " has no rows");
  const auto M = static_cast<Index>(trajectories.size());
  const auto samples = trajectories.begin()->second.size();
  for (const auto& [k, rows] : trajectories) {
    if (rows.size() != samples) {
      throw ValidationError(what + " trajectory " + std::to_string(k) + " has a different length");
    }
  }
  const auto n = static_cast<Index>(xc.size());
  Vec times(static_cast<Index>(samples));
  std::vector<Mat> Xi(samples, Mat(n, M));
  std::vector<Mat> Xid(samples, Mat(n, M));
  Index col = 0;
  for (const auto& [k, rows] : trajectories) {
    for (std::size_t s = 0; s < samples; ++s) {
      const double ts = t.at(rows[s], tc);
      if (col == 0) {
        times(static_cast<Index>(s)) = ts;
      } else if (ts != times(static_cast<Index>(s))) {
        throw ValidationError(what + " trajectories must share sample times");
      }
      for (Index r = 0; r < n; ++r) {
        Xi[s](r, col) = t.at(rows[s], xc[static_cast<std::size_t>(r)]);
        if (!dc.empty()) Xid[s](r, col) = t.at(rows[s], dc[static_cast<std::size_t>(r)]);
      }
    }
    ++col;
  }
  if (dc.empty()) return make_reference_set(times, std::move(Xi));
  return make_reference_set(times, std::move(Xi), std::move(Xid));
}

ReferenceSet load_reference_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_reference_csv(in);
}

void write_bundle_csv(std::ostream& os, const ReferenceBundle& b, double spacing) {
  b.validate();
  write_header(os, "t,traj_id", {{"u", b.m()}, {"x", b.n()}, {"xd", b.n()}});
  const Index M = b.trajectories;
  for (Index col = 0; col < b.samples(); ++col) {
    os << format_double(static_cast<double>(col / M) * spacing) << ',' << col % M;
    write_column(os, b.U, col);
    write_column(os, b.Xi, col);
    write_column(os, b.Xid, col);
    os << '\n';
  }
}

ReferenceBundle read_bundle_csv(std::istream& is) {
  const std::string what = "bundle CSV";
  const Table t = read_table(is, what);
  const Index kc = require_column(t, "traj_id", what);
  const auto uc = t.group("u");
  const auto xc = t.group("x");
  const auto dc = t.group("xd");
  if (uc.empty() || xc.empty() || dc.size() != xc.size()) {
    throw ValidationError(what + " needs u_*, x_* and matching xd_* columns");
  }
  std::map<Index, std::vector<std::size_t>> trajectories;
  for (std::size_t r = 0; r < t.rows.size(); ++r) trajectories[as_index(t.at(r, kc), what)].push_back(r);
  if (trajectories.empty()) throw ValidationError(what + " has no rows");
  const auto M = static_cast<Index>(trajectories.size());
  const auto samples = trajectories.begin()->second.size();
  for (const auto& [k, rows] : trajectories) {
    if (rows.size() != samples) {
      throw ValidationError(what + " trajectory " + std::to_string(k) + " has a different length");
    }
  }
  ReferenceBundle b;
  b.trajectories = M;
  const auto cols = static_cast<Index>(samples) * M;
  b.U.resize(static_cast<Index>(uc.size()), cols);
  b.Xi.resize(static_cast<Index>(xc.size()), cols);
  b.Xid.resize(static_cast<Index>(xc.size()), cols);
  Index k = 0;
  for (const auto& [id, rows] : trajectories) {
    for (std::size_t s = 0; s < samples; ++s) {
      const Index col = static_cast<Index>(s) * M + k;
      for (std::size_t r = 0; r < uc.size(); ++r) b.U(static_cast<Index>(r), col) = t.at(rows[s], uc[r]);
      for (std::size_t r = 0; r < xc.size(); ++r) {
        b.Xi(static_cast<Index>(r), col) = t.at(rows[s], xc[r]);
        b.Xid(static_cast<Index>(r), col) = t.at(rows[s], dc[r]);
      }
    }
    ++k;
  }
  b.validate();
  return b;
}

ReferenceBundle load_bundle_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_bundle_csv(in);
}

}  // namespace dbctl::io
