#include "ddopt/ga.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <set>

#include "ddopt/error.hpp"
#include "ddopt/parallel.hpp"

namespace ddopt::ga {

namespace {

// Pauli axis as (x, z) bits; a product of pulses is proportional to the
// identity exactly when the bits cancel.
unsigned axis_bits(PulseLabel label) {
  switch (axis_of(label)) {
    case 1: return 0b10;
    case 2: return 0b11;
    case 3: return 0b01;
    default: return 0;
  }
}

bool odd_site_group(const std::vector<int>& g) { return g.front() % 2 == 0; }

void sort_groups(std::vector<std::vector<int>>& groups) {
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <class T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

using Taken = std::map<std::string, bool>;

// Appends up to `count` members of `pool` (already ranked) not yet taken.
void take_best(const std::vector<Chromosome>& pool, std::size_t count, std::size_t cap, Taken& taken,
               std::vector<Chromosome>& out) {
  std::size_t added = 0;
  for (const Chromosome& c : pool) {
    if (added == count || out.size() >= cap) break;
    if (taken.emplace(c.key(), true).second) {
      out.push_back(c);
      ++added;
    }
  }
}

void refill(std::vector<Chromosome>& out, std::size_t target, Taken& taken, const LevelContext& ctx,
            const std::vector<const std::vector<Chromosome>*>& fallback, Rng& rng) {
  while (out.size() < target) {
    auto c = ctx.random_member(taken, rng);
    if (!c) break;
    taken.emplace(c->key(), true);
    out.push_back(std::move(*c));
  }
  for (const auto* pool : fallback) take_best(*pool, target, target, taken, out);
}

}  // namespace

// ---------------------------------------------------------------------------
// Chromosome
// ---------------------------------------------------------------------------

std::vector<PulseLabel> Chromosome::sites() const {
  std::vector<PulseLabel> out(static_cast<std::size_t>(K), PulseLabel::I);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (int s : groups[g]) out[static_cast<std::size_t>(s)] = genes[g];
  }
  return out;
}

Sequence Chromosome::decode(double tau_d) const {
  Sequence seq;
  seq.tau_d = tau_d;
  for (PulseLabel l : sites()) seq.steps.push_back({tau_d, l});
  return seq;
}

std::string Chromosome::key() const {
  std::string out;
  for (PulseLabel l : sites()) {
    if (!out.empty()) out += ' ';
    out += to_string(l);
  }
  return out;
}

void validate(const Chromosome& c) {
  if (c.K < 1) throw UsageError("chromosome: K must be positive");
  if (c.groups.size() != c.genes.size()) throw UsageError("chromosome: one gene per group required");
  std::vector<int> seen(static_cast<std::size_t>(c.K), 0);
  for (const auto& g : c.groups) {
    if (g.empty()) throw UsageError("chromosome: empty group");
    for (int s : g) {
      if (s < 0 || s >= c.K) throw UsageError("chromosome: site out of range");
      if (seen[static_cast<std::size_t>(s)]++) throw UsageError("chromosome: groups overlap");
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw UsageError("chromosome: groups do not cover every site");
  }
}

bool cyclic_ok(const std::vector<PulseLabel>& sites) {
  unsigned acc = 0;
  for (PulseLabel l : sites) acc ^= axis_bits(l);
  return acc == 0;
}

bool cyclic_ok(const Chromosome& c) {
  unsigned acc = 0;
  for (std::size_t g = 0; g < c.groups.size(); ++g) {
    if (c.groups[g].size() % 2 == 1) acc ^= axis_bits(c.genes[g]);
  }
  return acc == 0;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

double GAConfig::cutoff() const { return alpha_c.value_or(50.0 * (1.0 + K / 64.0)); }

int GAConfig::generations() const {
  return generations_per_level.value_or(static_cast<int>(std::lround(cutoff())));
}

void GAConfig::validate() const {
  if (K < 1) throw UsageError("ga config: K must be at least 1");
  if (Q < 8 || Q % 8 != 0) throw UsageError("ga config: Q must be a positive multiple of 8");
  if (!(Tf > 0.0)) throw UsageError("ga config: Tf must be positive");
  if (T0 && !(*T0 > Tf)) throw UsageError("ga config: T0 must exceed Tf");
  if (!(eta >= 0.0 && eta < 1.0)) throw UsageError("ga config: eta must lie in [0, 1)");
  if (!(lambda > 0.0)) throw UsageError("ga config: lambda must be positive");
  if (!(cutoff() > 0.0)) throw UsageError("ga config: alpha_c must be positive");
  if (generations() < 1) throw UsageError("ga config: generations_per_level must be at least 1");
  if (max_level && *max_level < 0) throw UsageError("ga config: max_level must be nonnegative");
  if (bath_seeds.empty()) throw UsageError("ga config: bath_seeds must not be empty");
  if (!(tau_d > 0.0) || !std::isfinite(tau_d)) throw UsageError("ga config: tau_d must be positive");
  if (jobs < 1) throw UsageError("ga config: jobs must be at least 1");
  BathSpec{n_spins, 0, J, beta}.validate();
  pulse.validate();
}

void to_json(nlohmann::json& j, const GAConfig& c) {
  j = nlohmann::json{{"K", c.K},
                     {"Q", c.Q},
                     {"model", c.pulse.name()},
                     {"tau_p", c.pulse.tau_p},
                     {"epsilon", c.pulse.epsilon},
                     {"tau_d", c.tau_d},
                     {"J", c.J},
                     {"beta", c.beta},
                     {"n_spins", c.n_spins},
                     {"bath_seeds", c.bath_seeds},
                     {"Tf", c.Tf},
                     {"eta", c.eta},
                     {"lambda", c.lambda},
                     {"alpha_c", c.cutoff()},
                     {"generations_per_level", c.generations()},
                     {"seed", c.seed},
                     {"precision", std::string(to_string(c.precision))}};
  if (c.T0) j["T0"] = *c.T0;
  if (c.max_level) j["max_level"] = *c.max_level;
}

void from_json(const nlohmann::json& j, GAConfig& c) {
  static const std::set<std::string> known = {
      "K",   "Q",  "model",   "tau_p",  "epsilon", "tau_d",   "J",
      "beta", "n_spins", "bath_seeds", "T0", "Tf",  "alpha_c", "eta", "lambda",
      "generations_per_level", "max_level", "seed", "precision", "jobs"};
  if (!j.is_object()) throw UsageError("ga config: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw UsageError("ga config: unknown key '" + key + "'");
  }
  try {
    c = GAConfig{};
    c.K = j.value("K", c.K);
    c.Q = j.value("Q", c.Q);
    c.pulse.kind = PulseModel::parse_kind(j.value("model", std::string("ideal")));
    c.pulse.tau_p = j.value("tau_p", 0.0);
    c.pulse.epsilon = j.value("epsilon", 0.0);
    c.tau_d = j.value("tau_d", c.tau_d);
    c.J = j.value("J", c.J);
    c.beta = j.value("beta", c.beta);
    c.n_spins = j.value("n_spins", c.n_spins);
    if (j.contains("bath_seeds")) c.bath_seeds = j.at("bath_seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("T0")) c.T0 = j.at("T0").get<double>();
    c.Tf = j.value("Tf", c.Tf);
    if (j.contains("alpha_c")) c.alpha_c = j.at("alpha_c").get<double>();
    c.eta = j.value("eta", c.eta);
    c.lambda = j.value("lambda", c.lambda);
    if (j.contains("generations_per_level")) c.generations_per_level = j.at("generations_per_level").get<int>();
    if (j.contains("max_level")) c.max_level = j.at("max_level").get<int>();
    c.seed = j.value("seed", c.seed);
    c.precision = parse_precision(j.value("precision", std::string("double")));
    c.jobs = j.value("jobs", c.jobs);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("ga config: ") + e.what());
  }
  c.validate();
}

// ---------------------------------------------------------------------------
// Complexity ladder
// ---------------------------------------------------------------------------

int ktilde(int level) {
  if (level < 0) throw UsageError("ktilde: level must be nonnegative");
  // (3/2)(l + 4/3) for even l, (3/2)(l + 1) for odd l, in integer arithmetic.
  return level % 2 == 0 ? (3 * level + 4) / 2 : 3 * (level + 1) / 2;
}

std::vector<std::vector<int>> initial_groups(int K) {
  if (K < 1) throw UsageError("initial_groups: K must be positive");
  std::vector<std::vector<int>> groups(K > 1 ? 2 : 1);
  for (int s = 0; s < K; ++s) groups[static_cast<std::size_t>(s % 2)].push_back(s);
  return groups;
}

std::vector<std::vector<int>> split_groups(const std::vector<std::vector<int>>& groups) {
  const bool even_linked = std::any_of(groups.begin(), groups.end(), [](const auto& g) {
    return !odd_site_group(g) && g.size() > 1;
  });
  std::vector<std::vector<int>> out;
  for (const auto& g : groups) {
    const bool split = g.size() > 1 && (odd_site_group(g) != even_linked);
    if (!split) {
      out.push_back(g);
      continue;
    }
    std::vector<int> a, b;
    for (std::size_t k = 0; k < g.size(); ++k) (k % 2 == 0 ? a : b).push_back(g[k]);
    out.push_back(std::move(a));
    out.push_back(std::move(b));
  }
  sort_groups(out);
  return out;
}

int max_level(int K) {
  auto groups = initial_groups(K);
  int level = 0;
  while (std::any_of(groups.begin(), groups.end(), [](const auto& g) { return g.size() > 1; })) {
    groups = split_groups(groups);
    ++level;
  }
  return level;
}

std::optional<std::vector<Chromosome>> enumerate_valid(int K, const std::vector<std::vector<int>>& groups,
                                                       int level, const std::vector<PulseLabel>& alphabet,
                                                       std::size_t limit) {
  const std::size_t n = groups.size();
  double space = std::pow(static_cast<double>(alphabet.size()), static_cast<double>(n));
  if (space > static_cast<double>(limit)) return std::nullopt;
  std::vector<Chromosome> out;
  std::vector<std::size_t> digit(n, 0);
  Chromosome c{K, groups, std::vector<PulseLabel>(n, alphabet.front()), level};
  while (true) {
    for (std::size_t g = 0; g < n; ++g) c.genes[g] = alphabet[digit[g]];
    if (cyclic_ok(c)) out.push_back(c);
    std::size_t g = n;
    while (g > 0) {
      --g;
      if (++digit[g] < alphabet.size()) break;
      digit[g] = 0;
      if (g == 0) return out;
    }
    if (n == 0) return out;
  }
}

// ---------------------------------------------------------------------------
// Selection and annealing
// ---------------------------------------------------------------------------

std::vector<double> selection_probabilities(const std::vector<double>& q, double T) {
  if (q.empty()) return {};
  if (!(T > 0.0)) throw UsageError("selection_probabilities: temperature must be positive");
  const double best = *std::max_element(q.begin(), q.end());
  std::vector<double> p(q.size());
  double total = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) total += p[k] = std::exp((q[k] - best) / T);
  for (double& x : p) x /= total;
  return p;
}

double temperature(double alpha, double T0, const GAConfig& cfg) {
  const double ac = cfg.cutoff();
  const double x = alpha / ac;
  const double t = T0 * std::pow(cfg.Tf / T0, x) * (1.0 - cfg.eta * std::sin(cfg.lambda * std::numbers::pi * x));
  return std::max(t, cfg.Tf);
}

// ---------------------------------------------------------------------------
// Variation operators
// ---------------------------------------------------------------------------

Chromosome encode(int K, const std::vector<std::vector<int>>& groups, int level,
                  const std::vector<PulseLabel>& sites) {
  Chromosome c{K, groups, {}, level};
  c.genes.reserve(groups.size());
  for (const auto& g : groups) {
    // Labels in order of first appearance with their counts.
    std::vector<std::pair<PulseLabel, int>> counts;
    for (int s : g) {
      const PulseLabel l = sites[static_cast<std::size_t>(s)];
      auto it = std::find_if(counts.begin(), counts.end(), [l](const auto& e) { return e.first == l; });
      if (it == counts.end()) {
        counts.emplace_back(l, 1);
      } else {
        ++it->second;
      }
    }
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    c.genes.push_back(best->first);
  }
  return c;
}

std::optional<CrossoverResult> crossover_at(const Chromosome& a, const Chromosome& b, int splice,
                                            const std::vector<PulseLabel>& alphabet) {
  if (a.K != b.K || a.groups != b.groups) {
    throw UsageError("crossover: parents must share K and group structure");
  }
  if (splice < 1 || splice > a.K) throw UsageError("crossover: splice point out of range");
  if (splice == a.K) return CrossoverResult{a, b, splice};

  const auto sa = a.sites();
  const auto sb = b.sites();
  const auto cut = static_cast<std::ptrdiff_t>(splice);
  std::vector<PulseLabel> o1(sa.begin(), sa.begin() + cut);
  o1.insert(o1.end(), sb.begin() + cut, sb.end());
  std::vector<PulseLabel> o2(sb.begin(), sb.begin() + cut);
  o2.insert(o2.end(), sa.begin() + cut, sa.end());

  const int site = splice - 1;
  std::size_t group = 0;
  while (std::find(a.groups[group].begin(), a.groups[group].end(), site) == a.groups[group].end()) ++group;

  auto repaired = [&](const std::vector<PulseLabel>& sites) -> std::optional<Chromosome> {
    Chromosome c = encode(a.K, a.groups, a.level, sites);
    if (cyclic_ok(c)) return c;
    for (PulseLabel l : alphabet) {
      c.genes[group] = l;
      if (cyclic_ok(c)) return c;
    }
    return std::nullopt;
  };
  auto c1 = repaired(o1);
  auto c2 = repaired(o2);
  if (!c1 || !c2) return std::nullopt;
  return CrossoverResult{std::move(*c1), std::move(*c2), splice};
}

CrossoverResult crossover(const Chromosome& a, const Chromosome& b, const std::vector<PulseLabel>& alphabet,
                          Rng& rng) {
  std::vector<int> points(static_cast<std::size_t>(a.K));
  for (int k = 0; k < a.K; ++k) points[static_cast<std::size_t>(k)] = k + 1;
  std::shuffle(points.begin(), points.end(), rng);
  for (int s : points) {
    if (auto r = crossover_at(a, b, s, alphabet)) return std::move(*r);
  }
  // Unreachable: splicing at the end reproduces the parents.
  return CrossoverResult{a, b, a.K};
}

MutationResult mutate_single(const Chromosome& c, const std::vector<PulseLabel>& alphabet, Rng& rng) {
  std::vector<std::size_t> order(c.groups.size());
  for (std::size_t g = 0; g < order.size(); ++g) order[g] = g;
  std::shuffle(order.begin(), order.end(), rng);
  Chromosome trial = c;
  for (std::size_t g : order) {
    std::vector<PulseLabel> options;
    for (PulseLabel l : alphabet) {
      if (l == c.genes[g]) continue;
      trial.genes[g] = l;
      if (cyclic_ok(trial)) options.push_back(l);
    }
    trial.genes[g] = c.genes[g];
    if (!options.empty()) {
      trial.genes[g] = pick(options, rng);
      return {std::move(trial), false};
    }
  }
  return {c, true};
}

MutationResult mutate_double(const Chromosome& c, const std::vector<PulseLabel>& alphabet, Rng& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t g = 0; g < c.genes.size(); ++g) {
    for (std::size_t h = g + 1; h < c.genes.size(); ++h) {
      if (c.genes[g] == c.genes[h]) pairs.emplace_back(g, h);
    }
  }
  std::shuffle(pairs.begin(), pairs.end(), rng);
  Chromosome trial = c;
  for (auto [g, h] : pairs) {
    std::vector<PulseLabel> options;
    for (PulseLabel l : alphabet) {
      if (l == c.genes[g]) continue;
      trial.genes[g] = trial.genes[h] = l;
      if (cyclic_ok(trial)) options.push_back(l);
    }
    trial.genes[g] = trial.genes[h] = c.genes[g];
    if (!options.empty()) {
      trial.genes[g] = trial.genes[h] = pick(options, rng);
      return {std::move(trial), false};
    }
  }
  return {c, true};
}

// ---------------------------------------------------------------------------
// Fitness
// ---------------------------------------------------------------------------

FitnessCache::FitnessCache(const GAConfig& cfg) : cfg_(cfg) {
  systems_.resize(cfg.bath_seeds.size());
  parallel_for(systems_.size(), cfg.jobs, [&](std::size_t k) {
    systems_[k] = make_system(BathSpec{cfg.n_spins, cfg.bath_seeds[k], cfg.J, cfg.beta});
  });
}

double FitnessCache::compute(const Chromosome& c) const {
  const Sequence seq = c.decode(cfg_.tau_d);
  double total = 0.0;
  for (const SystemModel& sys : systems_) total += ddopt::evaluate(seq, sys, cfg_.pulse, cfg_.precision).q;
  return total / static_cast<double>(systems_.size());
}

void FitnessCache::evaluate(const std::vector<Chromosome>& pop) {
  std::vector<const Chromosome*> todo;
  std::set<std::string> queued;
  for (const Chromosome& c : pop) {
    std::string k = c.key();
    if (!memo_.contains(k) && queued.insert(k).second) todo.push_back(&c);
  }
  std::vector<double> q(todo.size());
  parallel_for(todo.size(), cfg_.jobs, [&](std::size_t i) { q[i] = compute(*todo[i]); });
  for (std::size_t i = 0; i < todo.size(); ++i) memo_.emplace(todo[i]->key(), q[i]);
}

double FitnessCache::fitness(const Chromosome& c) const {
  auto it = memo_.find(c.key());
  if (it == memo_.end()) throw UsageError("fitness requested for an unevaluated chromosome");
  return it->second;
}

std::vector<Chromosome> ranked(std::vector<Chromosome> pop, const FitnessCache& fit) {
  std::vector<std::pair<double, std::string>> score(pop.size());
  for (std::size_t k = 0; k < pop.size(); ++k) score[k] = {fit.fitness(pop[k]), pop[k].key()};
  std::vector<std::size_t> idx(pop.size());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (score[a].first != score[b].first) return score[a].first > score[b].first;
    return score[a].second < score[b].second;
  });
  std::vector<Chromosome> out;
  out.reserve(pop.size());
  for (std::size_t k : idx) out.push_back(std::move(pop[k]));
  return out;
}

// ---------------------------------------------------------------------------
// Population management
// ---------------------------------------------------------------------------

Rng stream(std::uint64_t seed, int level, int generation, int purpose) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(level));
  h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(generation)));
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  return Rng(h);
}

namespace purpose {
constexpr int kInitial = 1;
constexpr int kSelection = 2;
constexpr int kSplice = 3;
constexpr int kMutation = 4;
constexpr int kRefill = 5;
}  // namespace purpose

LevelContext make_level(const GAConfig& cfg, const std::vector<std::vector<int>>& groups, int level) {
  LevelContext ctx;
  ctx.cfg = &cfg;
  ctx.alphabet = pulse_set(cfg.pulse);
  ctx.groups = groups;
  ctx.level = level;
  ctx.valid = enumerate_valid(cfg.K, groups, level, ctx.alphabet);
  return ctx;
}

std::size_t LevelContext::target_size() const {
  const auto q = static_cast<std::size_t>(cfg->Q);
  return valid ? std::min(q, valid->size()) : q;
}

std::optional<Chromosome> LevelContext::random_member(const Taken& taken, Rng& rng) const {
  if (valid) {
    std::vector<const Chromosome*> free;
    for (const Chromosome& c : *valid) {
      if (!taken.contains(c.key())) free.push_back(&c);
    }
    if (free.empty()) return std::nullopt;
    return *pick(free, rng);
  }
  Chromosome c{cfg->K, groups, std::vector<PulseLabel>(groups.size()), level};
  for (int attempt = 0; attempt < 10000; ++attempt) {
    for (auto& g : c.genes) g = pick(alphabet, rng);
    if (cyclic_ok(c) && !taken.contains(c.key())) return c;
  }
  return std::nullopt;
}

std::vector<Chromosome> initial_population(const GAConfig& cfg, Rng& rng) {
  cfg.validate();
  const LevelContext ctx = make_level(cfg, initial_groups(cfg.K), 0);
  const auto q = static_cast<std::size_t>(cfg.Q);
  if (ctx.valid) {
    std::vector<Chromosome> all = *ctx.valid;
    if (all.size() <= q) return all;
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(q);
    return all;
  }
  std::vector<Chromosome> out;
  Taken taken;
  while (out.size() < q) {
    auto c = ctx.random_member(taken, rng);
    if (!c) break;
    taken.emplace(c->key(), true);
    out.push_back(std::move(*c));
  }
  return out;
}

std::vector<Chromosome> evolve_generation(const std::vector<Chromosome>& pop, const LevelContext& ctx,
                                          int alpha, FitnessCache& fit) {
  const GAConfig& cfg = *ctx.cfg;
  const std::size_t Q = static_cast<std::size_t>(cfg.Q);
  const std::size_t target = ctx.target_size();
  Rng select_rng = stream(cfg.seed, ctx.level, alpha, purpose::kSelection);
  Rng splice_rng = stream(cfg.seed, ctx.level, alpha, purpose::kSplice);
  Rng mutate_rng = stream(cfg.seed, ctx.level, alpha, purpose::kMutation);
  Rng refill_rng = stream(cfg.seed, ctx.level, alpha, purpose::kRefill);

  fit.evaluate(pop);
  const std::vector<Chromosome> parents = ranked(pop, fit);

  // 2Q offspring from annealed parent pairings.
  std::vector<Chromosome> offspring;
  if (parents.size() >= 2) {
    std::vector<double> q(parents.size());
    for (std::size_t k = 0; k < parents.size(); ++k) q[k] = fit.fitness(parents[k]);
    const std::vector<double> p = selection_probabilities(q, temperature(alpha, ctx.T0, cfg));
    for (std::size_t n = 0; n < Q; ++n) {
      std::discrete_distribution<std::size_t> first(p.begin(), p.end());
      const std::size_t i = first(select_rng);
      std::vector<double> rest = p;
      rest[i] = 0.0;
      std::discrete_distribution<std::size_t> second(rest.begin(), rest.end());
      const std::size_t j = second(select_rng);
      CrossoverResult r = crossover(parents[i], parents[j], ctx.alphabet, splice_rng);
      offspring.push_back(std::move(r.first));
      offspring.push_back(std::move(r.second));
    }
  }
  fit.evaluate(offspring);
  offspring = ranked(std::move(offspring), fit);

  // Interim pool: best Q/4 parents and 3Q/4 offspring.
  std::vector<Chromosome> interim;
  {
    Taken taken;
    take_best(parents, Q / 4, target, taken, interim);
    take_best(offspring, 3 * Q / 4, target, taken, interim);
    refill(interim, target, taken, ctx, {&parents, &offspring}, refill_rng);
  }

  std::vector<Chromosome> singles, doubles;
  for (const Chromosome& c : interim) {
    if (auto m = mutate_single(c, ctx.alphabet, mutate_rng); !m.duplicate) singles.push_back(std::move(m.chromosome));
    if (auto m = mutate_double(c, ctx.alphabet, mutate_rng); !m.duplicate) doubles.push_back(std::move(m.chromosome));
  }
  fit.evaluate(singles);
  fit.evaluate(doubles);
  singles = ranked(std::move(singles), fit);
  doubles = ranked(std::move(doubles), fit);

  std::vector<Chromosome> next;
  Taken taken;
  take_best(parents, Q / 8, target, taken, next);
  take_best(offspring, 5 * Q / 8, target, taken, next);
  take_best(singles, Q / 8, target, taken, next);
  take_best(doubles, Q / 8, target, taken, next);
  refill(next, target, taken, ctx, {&offspring, &singles, &doubles, &parents}, refill_rng);
  return next;
}

std::vector<Chromosome> increase_complexity(const std::vector<Chromosome>& pop) {
  std::vector<Chromosome> out;
  out.reserve(pop.size());
  for (const Chromosome& c : pop) {
    out.push_back(encode(c.K, split_groups(c.groups), c.level + 1, c.sites()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

GAResult run_ga(const GAConfig& cfg) {
  cfg.validate();
  FitnessCache fit(cfg);
  Rng init_rng = stream(cfg.seed, 0, -1, purpose::kInitial);
  std::vector<Chromosome> pop = initial_population(cfg, init_rng);
  std::vector<std::vector<int>> groups = initial_groups(cfg.K);
  const int top = std::min(max_level(cfg.K), cfg.max_level.value_or(max_level(cfg.K)));

  GAResult result;
  std::optional<std::pair<double, Chromosome>> best;
  auto consider = [&](const std::vector<Chromosome>& p) {
    for (const Chromosome& c : p) {
      const double q = fit.fitness(c);
      if (!best || q > best->first || (q == best->first && c.key() < best->second.key())) best.emplace(q, c);
    }
  };

  for (int level = 0; level <= top; ++level) {
    LevelContext ctx = make_level(cfg, groups, level);
    fit.evaluate(pop);
    consider(pop);
    if (cfg.T0) {
      ctx.T0 = *cfg.T0;
    } else {
      double lo = fit.fitness(pop.front()), hi = lo;
      for (const Chromosome& c : pop) {
        lo = std::min(lo, fit.fitness(c));
        hi = std::max(hi, fit.fitness(c));
      }
      // Every member starts with a reasonable chance of reproducing.
      ctx.T0 = std::max({hi - lo, 1.0, 2.0 * cfg.Tf});
    }

    std::optional<std::pair<double, Chromosome>> level_best;
    for (int alpha = 0; alpha < cfg.generations(); ++alpha) {
      pop = evolve_generation(pop, ctx, alpha, fit);
      fit.evaluate(pop);
      consider(pop);
      const std::vector<Chromosome> r = ranked(pop, fit);
      double mean = 0.0;
      for (const Chromosome& c : r) mean += fit.fitness(c);
      mean /= static_cast<double>(r.size());
      const double top_q = fit.fitness(r.front());
      result.history.push_back({level, alpha, temperature(alpha, ctx.T0, cfg), top_q, mean, r.front().key()});
      if (!level_best || top_q > level_best->first) level_best.emplace(top_q, r.front());
    }
    if (level_best) {
      Sequence s = level_best->second.decode(cfg.tau_d);
      s.name = "ga-level-" + std::to_string(level);
      result.level_bests.emplace_back(level, std::move(s));
      result.level_best_q.push_back(level_best->first);
    }
    if (level < top) {
      pop = increase_complexity(pop);
      groups = split_groups(groups);
    }
  }

  result.best = best->second.decode(cfg.tau_d);
  result.best.name = "ga-best";
  result.best_q = best->first;
  result.evaluations = fit.evaluations();
  return result;
}

void write_history_csv(std::ostream& os, const GAResult& r) {
  os << "level,generation,temperature,best_q,mean_q,best\n";
  for (const HistoryRow& h : r.history) {
    os << h.level << ',' << h.generation << ',' << format_double(h.temperature) << ','
       << format_double(h.best_q) << ',' << format_double(h.mean_q) << ',' << h.best << '\n';
  }
}

}  // namespace ddopt::ga
