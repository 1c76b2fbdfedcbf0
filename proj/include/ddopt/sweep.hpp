#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddopt/metrics.hpp"
#include "ddopt/model.hpp"

namespace ddopt::sweep {

/// One swept parameter. Recognized names: tau_d, tau_c, J, beta, tau_p,
/// epsilon, tau_p_over_tau_d, tau_p_over_tau_c, J_over_beta.
struct Axis {
  std::string param;
  std::vector<double> values;

  /// Log-spaced grid from lo to hi inclusive, `per_decade` points per decade.
  static Axis log_grid(std::string param, double lo, double hi, int per_decade);
};

struct SweepPlan {
  std::vector<Axis> axes;               // 1 for sweep_1d, 2 for landscape_2d, 0 for compare
  std::map<std::string, double> fixed;  // same names as axes
  std::vector<std::string> sequences;   // make_named specs
  PulseModel::Kind model = PulseModel::Kind::Ideal;
  int n_seeds = 10;
  std::uint64_t seed = 0;  // bath seeds are seed, seed + 1, ...
  int n_spins = 4;
  Precision precision = Precision::Double;
  int jobs = 1;

  /// Throws UsageError on unknown or conflicting parameters, empty grids or
  /// an empty sequence list.
  void validate(std::size_t expected_axes) const;
};

void to_json(nlohmann::json& j, const SweepPlan& p);
void from_json(const nlohmann::json& j, SweepPlan& p);

/// Fully resolved physical parameters of one cell.
struct CellParams {
  double J = 1e-3;
  double beta = 1e-6;
  double tau_p = 0.0;
  double epsilon = 0.0;
  std::optional<double> tau_d;
  std::optional<double> tau_c;  // fixed-cycle mode when set
};

/// Applies derived parameters (ratios) on top of `fixed`.
CellParams resolve(const std::map<std::string, double>& values);

/// Interval for a fixed cycle time: (tau_c - m_p tau_p) / m_d, where m_d is
/// the free time of the unit-interval sequence and m_p its pulse-slot count.
/// Returns nullopt when the result is not positive.
std::optional<double> tau_d_for_cycle(const std::string& sequence, const CellParams& p,
                                      const PulseModel& model);

struct CellResult {
  std::string sequence;
  std::vector<double> D;        // per seed; empty when the cell failed
  double D_mean = 0.0;          // geometric mean over seeds
  double log10_stderr = 0.0;    // standard error of log10 D
  std::size_t pulses = 0;
  double tau_d = 0.0;
  double tau_c = 0.0;
  std::string reason;           // non-empty when the cell is missing data

  bool ok() const { return reason.empty(); }
};

struct SweepRow {
  double x = 0.0;
  CellResult cell;
};

std::vector<SweepRow> sweep_1d(const SweepPlan& plan);
/// x,sequence,D_mean,log10_D_stderr,n_seeds,tau_d,tau_c,reason
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

struct LandscapeCell {
  double x = 0.0;
  double y = 0.0;
  std::string winner;  // empty if no sequence succeeded
  double D = 0.0;
  std::vector<CellResult> cells;
};

/// Winner per cell by smallest mean D; ties go to fewer pulses, then plan order.
std::vector<LandscapeCell> landscape_2d(const SweepPlan& plan);
/// x,y,winner,D_best,<sequence>... (one D column per sequence)
void write_landscape_csv(std::ostream& os, const SweepPlan& plan, const std::vector<LandscapeCell>& cells);

struct CompareRow {
  CellResult cell;
  double q = 0.0;  // fitness of the mean distance
};

/// One row per sequence at the fixed parameters, sorted ascending by D.
std::vector<CompareRow> compare(const SweepPlan& plan);
/// rank,sequence,D_mean,q,log10_D_stderr,pulses,tau_d,tau_c,reason
void write_compare_csv(std::ostream& os, const std::vector<CompareRow>& rows);

/// (x, D_mean) pairs of one sequence from sweep CSV text, skipping missing cells.
std::vector<std::pair<double, double>> read_sweep_points(std::istream& is, const std::string& sequence);

}  // namespace ddopt::sweep
