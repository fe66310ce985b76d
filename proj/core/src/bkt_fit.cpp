#include "skilltrace/bkt_fit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "skilltrace/errors.hpp"
#include "skilltrace/rng.hpp"

namespace skilltrace {

namespace {

constexpr double kProbLo = kBktParamEps;        // 1e-3
constexpr double kProbHi = 1.0 - kBktParamEps;  // shared box
constexpr double kSlipGuessHi = 0.5 - kBktParamEps;  // identifiability cap
constexpr std::size_t kChunk = 64;  // sequences per E-step reduction chunk

double clamp(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

// Per-chunk E-step sums; reduced in chunk order so the result is
// bit-identical for any thread count.
struct Accumulator {
  double gamma1_learned = 0.0;
  double seq_count = 0.0;
  double trans_num = 0.0;
  double trans_den = 0.0;
  double guess_num = 0.0;
  double guess_den = 0.0;
  double slip_num = 0.0;
  double slip_den = 0.0;
  double log_likelihood = 0.0;

  void add(const Accumulator& o) {
    gamma1_learned += o.gamma1_learned;
    seq_count += o.seq_count;
    trans_num += o.trans_num;
    trans_den += o.trans_den;
    guess_num += o.guess_num;
    guess_den += o.guess_den;
    slip_num += o.slip_num;
    slip_den += o.slip_den;
    log_likelihood += o.log_likelihood;
  }
};

struct Workspace {
  std::vector<double> alpha0, alpha1, scale;  // scaled forward
  std::vector<double> beta0, beta1;           // scaled backward
};

// Scaled forward-backward for the 2-state chain (state 1 absorbing).
// Emissions: state 0 -> guess, state 1 -> 1 - slip for a correct outcome.
void accumulate_sequence(const std::vector<int>& seq, const BktParams& p,
                         Workspace& ws, Accumulator& acc) {
  const std::size_t n = seq.size();
  if (n == 0) return;

  ws.alpha0.resize(n);
  ws.alpha1.resize(n);
  ws.scale.resize(n);
  ws.beta0.resize(n);
  ws.beta1.resize(n);

  const auto emit0 = [&](int y) { return y ? p.guess : 1.0 - p.guess; };
  const auto emit1 = [&](int y) { return y ? 1.0 - p.slip : p.slip; };
  const double a00 = 1.0 - p.learn;
  const double a01 = p.learn;

  double f0 = (1.0 - p.l0) * emit0(seq[0]);
  double f1 = p.l0 * emit1(seq[0]);
  double c = f0 + f1;
  ws.alpha0[0] = f0 / c;
  ws.alpha1[0] = f1 / c;
  ws.scale[0] = c;
  for (std::size_t t = 1; t < n; ++t) {
    f0 = ws.alpha0[t - 1] * a00 * emit0(seq[t]);
    f1 = (ws.alpha0[t - 1] * a01 + ws.alpha1[t - 1]) * emit1(seq[t]);
    c = f0 + f1;
    ws.alpha0[t] = f0 / c;
    ws.alpha1[t] = f1 / c;
    ws.scale[t] = c;
  }

  ws.beta0[n - 1] = 1.0;
  ws.beta1[n - 1] = 1.0;
  for (std::size_t t = n - 1; t-- > 0;) {
    const double e0 = emit0(seq[t + 1]) * ws.beta0[t + 1];
    const double e1 = emit1(seq[t + 1]) * ws.beta1[t + 1];
    ws.beta0[t] = (a00 * e0 + a01 * e1) / ws.scale[t + 1];
    ws.beta1[t] = e1 / ws.scale[t + 1];
  }

  acc.seq_count += 1.0;
  acc.gamma1_learned += ws.alpha1[0] * ws.beta1[0];
  for (std::size_t t = 0; t < n; ++t) {
    const double g0 = ws.alpha0[t] * ws.beta0[t];
    const double g1 = ws.alpha1[t] * ws.beta1[t];
    acc.guess_den += g0;
    acc.guess_num += g0 * seq[t];
    acc.slip_den += g1;
    acc.slip_num += g1 * (1 - seq[t]);
    acc.log_likelihood += std::log(ws.scale[t]);
    if (t + 1 < n) {
      const double xi01 =
          ws.alpha0[t] * a01 * emit1(seq[t + 1]) * ws.beta1[t + 1] / ws.scale[t + 1];
      acc.trans_num += xi01;
      acc.trans_den += g0;
    }
  }
}

Accumulator e_step(const std::vector<std::vector<int>>& sequences,
                   const BktParams& params, int threads) {
  const std::size_t chunk_count = (sequences.size() + kChunk - 1) / kChunk;
  std::vector<Accumulator> partial(chunk_count);

  auto run_chunk = [&](std::size_t chunk) {
    Workspace ws;
    const std::size_t begin = chunk * kChunk;
    const std::size_t end = std::min(begin + kChunk, sequences.size());
    for (std::size_t i = begin; i < end; ++i) {
      accumulate_sequence(sequences[i], params, ws, partial[chunk]);
    }
  };

  const int workers = std::max(1, threads);
  if (workers == 1 || chunk_count <= 1) {
    for (std::size_t chunk = 0; chunk < chunk_count; ++chunk) run_chunk(chunk);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int spawn = std::min<std::size_t>(workers, chunk_count);
    pool.reserve(spawn);
    for (int w = 0; w < spawn; ++w) {
      pool.emplace_back([&] {
        for (std::size_t chunk = next.fetch_add(1); chunk < chunk_count;
             chunk = next.fetch_add(1)) {
          run_chunk(chunk);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  Accumulator total;
  for (const Accumulator& a : partial) total.add(a);
  return total;
}

BktParams m_step(const Accumulator& acc, const BktParams& previous) {
  BktParams next = previous;
  if (acc.seq_count > 0.0) {
    next.l0 = clamp(acc.gamma1_learned / acc.seq_count, kProbLo, kProbHi);
  }
  if (acc.trans_den > 0.0) {
    next.learn = clamp(acc.trans_num / acc.trans_den, kProbLo, kProbHi);
  }
  if (acc.guess_den > 0.0) {
    next.guess = clamp(acc.guess_num / acc.guess_den, kProbLo, kSlipGuessHi);
  }
  if (acc.slip_den > 0.0) {
    next.slip = clamp(acc.slip_num / acc.slip_den, kProbLo, kSlipGuessHi);
  }
  return next;
}

}  // namespace

double forward_log_likelihood(const std::vector<int>& sequence,
                              const BktParams& p) {
  validate(p);
  double prob0 = 1.0 - p.l0;
  double prob1 = p.l0;
  double ll = 0.0;
  for (int y : sequence) {
    const double e0 = y ? p.guess : 1.0 - p.guess;
    const double e1 = y ? 1.0 - p.slip : p.slip;
    const double f0 = prob0 * e0;
    const double f1 = prob1 * e1;
    const double c = f0 + f1;
    ll += std::log(c);
    const double n0 = f0 / c;
    const double n1 = f1 / c;
    prob0 = n0 * (1.0 - p.learn);
    prob1 = n0 * p.learn + n1;
  }
  return ll;
}

double total_log_likelihood(const std::vector<std::vector<int>>& sequences,
                            const BktParams& params) {
  double ll = 0.0;
  for (const auto& seq : sequences) ll += forward_log_likelihood(seq, params);
  return ll;
}

FitResult fit_parameters(const std::vector<std::vector<int>>& sequences,
                         const FitConfig& config) {
  bool any = false;
  for (const auto& seq : sequences) {
    if (!seq.empty()) any = true;
    for (int y : seq) {
      if (y != 0 && y != 1) {
        throw Error(ErrorKind::Validation, "outcome sequences must be binary");
      }
    }
  }
  if (!any) {
    throw Error(ErrorKind::InsufficientData,
                "fit_parameters needs at least one nonempty sequence");
  }
  if (config.restarts < 1) {
    throw Error(ErrorKind::Validation, "fit requires at least one restart");
  }

  // Fixed first initialization plus seeded random restarts, drawn upfront so
  // the draw order never depends on the EM trajectory.
  std::vector<BktParams> inits;
  inits.push_back(BktParams{0.4, 0.15, 0.1, 0.2});
  Rng rng(config.seed);
  while (inits.size() < static_cast<std::size_t>(config.restarts)) {
    BktParams init;
    init.l0 = rng.uniform(0.05, 0.8);
    init.learn = rng.uniform(0.05, 0.8);
    init.slip = rng.uniform(0.05, 0.4);
    init.guess = rng.uniform(0.05, 0.4);
    inits.push_back(init);
  }

  FitResult best;
  bool have_best = false;
  for (const BktParams& init : inits) {
    BktParams params = init;
    std::vector<double> history;
    double previous_ll = -std::numeric_limits<double>::infinity();
    int iterations = 0;
    for (int iter = 0; iter < config.max_iterations; ++iter) {
      const Accumulator acc = e_step(sequences, params, config.threads);
      history.push_back(acc.log_likelihood);
      iterations = iter + 1;
      const BktParams updated = m_step(acc, params);
      if (acc.log_likelihood - previous_ll < config.tolerance && iter > 0) {
        params = updated;
        break;
      }
      previous_ll = acc.log_likelihood;
      params = updated;
    }
    const double final_ll = total_log_likelihood(sequences, params);
    if (!have_best || final_ll > best.log_likelihood) {
      best.params = params;
      best.log_likelihood = final_ll;
      best.iterations = iterations;
      best.ll_history = history;
      have_best = true;
    }
  }
  return best;
}

std::map<std::string, std::vector<std::vector<int>>> outcome_sequences(
    const std::vector<SignalEvent>& events) {
  validate_stream(events);
  // skill -> student -> outcomes; student map ordered for determinism.
  std::map<std::string, std::map<std::string, std::vector<int>>> grouped;
  for (const SignalEvent& event : events) {
    for (const std::string& skill : event.skill_ids) {
      grouped[skill][event.student_id].push_back(event.correct);
    }
  }
  std::map<std::string, std::vector<std::vector<int>>> out;
  for (auto& [skill, by_student] : grouped) {
    auto& sequences = out[skill];
    sequences.reserve(by_student.size());
    for (auto& [student, seq] : by_student) {
      sequences.push_back(std::move(seq));
    }
  }
  return out;
}

}  // namespace skilltrace
