#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddopt/metrics.hpp"
#include "ddopt/model.hpp"
#include "ddopt/sequence.hpp"

namespace ddopt::ga {

/// Pulse sites (0-based, in time order) partitioned into groups that share a
/// gene. Groups are kept sorted by their first site.
struct Chromosome {
  int K = 0;
  std::vector<std::vector<int>> groups;
  std::vector<PulseLabel> genes;  // one per group
  int level = 0;

  /// Label at every site.
  std::vector<PulseLabel> sites() const;
  /// K steps of one tau_d each, followed by the decoded pulse.
  Sequence decode(double tau_d = 1.0) const;
  std::string key() const;

  friend bool operator==(const Chromosome& a, const Chromosome& b) {
    return a.groups == b.groups && a.genes == b.genes;
  }
};

/// Throws UsageError unless groups partition the K sites and genes match.
void validate(const Chromosome& c);
bool cyclic_ok(const std::vector<PulseLabel>& sites);
bool cyclic_ok(const Chromosome& c);

struct GAConfig {
  int K = 4;
  int Q = 16;
  PulseModel pulse;
  double tau_d = 0.1;  // ns
  double J = 1e-3;     // rad/ns
  double beta = 1e-6;  // rad/ns
  int n_spins = 4;
  std::vector<std::uint64_t> bath_seeds{0};
  std::optional<double> T0;  // unset: chosen per level from the fitness spread
  double Tf = 0.05;
  std::optional<double> alpha_c;  // unset: 50 (1 + K / 64)
  double eta = 0.3;
  double lambda = 3.0;
  std::optional<int> generations_per_level;  // unset: alpha_c
  std::optional<int> max_level;              // unset: until every group is a singleton
  std::uint64_t seed = 0;
  Precision precision = Precision::Double;
  int jobs = 1;

  void validate() const;
  double cutoff() const;
  int generations() const;
};

void to_json(nlohmann::json& j, const GAConfig& c);
void from_json(const nlohmann::json& j, GAConfig& c);

/// Number of linked sets at complexity level l in the paper's counting.
int ktilde(int level);

/// Highest level reachable by the unlink schedule for K sites.
int max_level(int K);

/// Level-0 groups: odd sites (1st, 3rd, ...) and even sites.
std::vector<std::vector<int>> initial_groups(int K);
/// Splits every even-site block into its alternate members until the even
/// sites are all singletons, then does the same for odd sites.
std::vector<std::vector<int>> split_groups(const std::vector<std::vector<int>>& groups);

/// Every cyclic gene assignment over `groups`, or nullopt if the space has
/// more than `limit` assignments.
std::optional<std::vector<Chromosome>> enumerate_valid(int K, const std::vector<std::vector<int>>& groups,
                                                       int level, const std::vector<PulseLabel>& alphabet,
                                                       std::size_t limit = 1u << 16);

using Rng = std::mt19937_64;

/// Q distinct level-0 chromosomes (all of them if fewer are valid).
std::vector<Chromosome> initial_population(const GAConfig& cfg, Rng& rng);

/// p_j proportional to exp((q_j - q_best) / T).
std::vector<double> selection_probabilities(const std::vector<double>& q, double T);

/// T0 (Tf/T0)^(alpha/alpha_c) [1 - eta sin(lambda pi alpha / alpha_c)], floored at Tf.
double temperature(double alpha, double T0, const GAConfig& cfg);

struct CrossoverResult {
  Chromosome first;
  Chromosome second;
  int splice = 0;  // number of leading sites taken from the own parent
};

/// Splices the decoded parents after `splice` sites and repairs the site at
/// the splice point. Returns nullopt if no repair gene makes both cyclic.
std::optional<CrossoverResult> crossover_at(const Chromosome& a, const Chromosome& b, int splice,
                                            const std::vector<PulseLabel>& alphabet);
/// Random splice point; other points are tried until one succeeds.
CrossoverResult crossover(const Chromosome& a, const Chromosome& b,
                          const std::vector<PulseLabel>& alphabet, Rng& rng);

/// Rewrites per-site labels into `groups` by majority gene, ties going to the
/// label of the earliest site.
Chromosome encode(int K, const std::vector<std::vector<int>>& groups, int level,
                  const std::vector<PulseLabel>& sites);

struct MutationResult {
  Chromosome chromosome;
  bool duplicate = false;  // no cyclic change was possible
};

MutationResult mutate_single(const Chromosome& c, const std::vector<PulseLabel>& alphabet, Rng& rng);
MutationResult mutate_double(const Chromosome& c, const std::vector<PulseLabel>& alphabet, Rng& rng);

/// Mean fitness over the configured bath realizations, memoized by sequence.
class FitnessCache {
 public:
  explicit FitnessCache(const GAConfig& cfg);

  /// Fills the cache for every chromosome, evaluating new ones in parallel.
  void evaluate(const std::vector<Chromosome>& pop);
  double fitness(const Chromosome& c) const;
  std::size_t evaluations() const { return memo_.size(); }

 private:
  double compute(const Chromosome& c) const;

  GAConfig cfg_;
  std::vector<SystemModel> systems_;
  std::map<std::string, double> memo_;
};

/// Ranks by fitness (descending), ties broken by sequence text.
std::vector<Chromosome> ranked(std::vector<Chromosome> pop, const FitnessCache& fit);

/// Search state shared across generations of one level.
struct LevelContext {
  const GAConfig* cfg = nullptr;
  std::vector<PulseLabel> alphabet;
  std::vector<std::vector<int>> groups;
  int level = 0;
  std::optional<std::vector<Chromosome>> valid;  // set when the space is small
  double T0 = 1.0;

  std::size_t target_size() const;
  /// Random valid chromosome not already present in `taken`, if one exists.
  std::optional<Chromosome> random_member(const std::map<std::string, bool>& taken, Rng& rng) const;
};

LevelContext make_level(const GAConfig& cfg, const std::vector<std::vector<int>>& groups, int level);

/// One generation: crossover, interim pool, mutation and the final mix.
std::vector<Chromosome> evolve_generation(const std::vector<Chromosome>& pop, const LevelContext& ctx,
                                          int alpha, FitnessCache& fit);

/// Unlinks one level. Decoded sequences are unchanged.
std::vector<Chromosome> increase_complexity(const std::vector<Chromosome>& pop);

struct HistoryRow {
  int level = 0;
  int generation = 0;
  double temperature = 0.0;
  double best_q = 0.0;
  double mean_q = 0.0;
  std::string best;
};

struct GAResult {
  Sequence best;
  double best_q = 0.0;
  std::vector<HistoryRow> history;
  std::vector<std::pair<int, Sequence>> level_bests;
  std::vector<double> level_best_q;
  std::size_t evaluations = 0;
};

GAResult run_ga(const GAConfig& cfg);

/// level,generation,temperature,best_q,mean_q,best
void write_history_csv(std::ostream& os, const GAResult& r);

/// Seeds an RNG for one purpose at one (level, generation) of a run.
Rng stream(std::uint64_t seed, int level, int generation, int purpose);

}  // namespace ddopt::ga
