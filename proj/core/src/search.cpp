// Copyright 2026 The stsp Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "stsp/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "stsp/autodiff.hpp"

namespace stsp {
namespace {

std::size_t check_square(const Tensor<double>& logits) {
  if (logits.rank() != 2 || logits.dim(0) != logits.dim(1)) {
    throw ConfigError("decoder logits must be square, got " +
                      shape_string(logits.shape));
  }
  return logits.dim(0);
}

Trajectory finish(DecodeState state, std::vector<int> order,
                  const TspInstance& instance) {
  Trajectory t;
  t.order = std::move(order);
  t.logprob = state.logprob;
  t.length = tour_length(instance, t.order);
  return t;
}

struct Partial {
  std::vector<int> order;
  DecodeState state;
};

struct Child {
  double score;
  std::uint32_t parent;
  int city;
};

}  // namespace

DecodeState DecodeState::start(std::size_t n) {
  DecodeState s;
  s.visited.assign(n, 0);
  s.visited[0] = 1;
  s.current = 0;
  s.visited_count = 1;
  return s;
}

void DecodeState::advance(int city, double step_logprob) {
  const auto c = static_cast<std::size_t>(city);
  if (c >= visited.size() || visited[c] != 0) {
    throw DecodeCorruptionError("move to visited or invalid city " +
                                std::to_string(city));
  }
  visited[c] = 1;
  ++visited_count;
  current = city;
  logprob += step_logprob;
}

std::vector<double> step_log_distribution(const Tensor<double>& logits,
                                          const DecodeState& state) {
  const std::size_t n = check_square(logits);
  if (state.visited.size() != n || state.visited_count >= n) {
    throw DecodeCorruptionError("no unvisited city left to choose");
  }
  const double* row = logits.ptr() + static_cast<std::size_t>(state.current) * n;
  std::vector<double> masked(n);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    masked[j] = row[j] + (state.visited[j] != 0 ? ad::kMaskFill : 0.0);
    mx = std::max(mx, masked[j]);
  }
  double sum = 0.0;
  for (double v : masked) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  for (std::size_t j = 0; j < n; ++j) {
    masked[j] = state.visited[j] != 0 ? -std::numeric_limits<double>::infinity()
                                      : masked[j] - lse;
  }
  return masked;
}

std::vector<double> step_distribution(const Tensor<double>& logits,
                                      const DecodeState& state) {
  std::vector<double> p = step_log_distribution(logits, state);
  for (double& v : p) v = std::exp(v);
  return p;
}

Trajectory decode_sample(const Tensor<double>& logits,
                         const TspInstance& instance, Rng& rng) {
  const std::size_t n = check_square(logits);
  DecodeState state = DecodeState::start(n);
  std::vector<int> order{0};
  order.reserve(n);
  while (state.visited_count < n) {
    const std::vector<double> logp = step_log_distribution(logits, state);
    const double u = rng.uniform();
    double cumulative = 0.0;
    int chosen = -1;
    for (std::size_t j = 0; j < n; ++j) {
      if (state.visited[j] != 0) continue;
      chosen = static_cast<int>(j);
      cumulative += std::exp(logp[j]);
      if (u < cumulative) break;
    }
    state.advance(chosen, logp[static_cast<std::size_t>(chosen)]);
    order.push_back(chosen);
  }
  return finish(std::move(state), std::move(order), instance);
}

Trajectory decode_sample(const Tensor<double>& logits,
                         const TspInstance& instance, std::uint64_t seed) {
  Rng rng(seed);
  return decode_sample(logits, instance, rng);
}

Trajectory decode_greedy(const Tensor<double>& logits,
                         const TspInstance& instance) {
  const std::size_t n = check_square(logits);
  DecodeState state = DecodeState::start(n);
  std::vector<int> order{0};
  order.reserve(n);
  while (state.visited_count < n) {
    const std::vector<double> logp = step_log_distribution(logits, state);
    std::size_t best = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (state.visited[j] != 0) continue;
      if (best == n || logp[j] > logp[best]) best = j;
    }
    state.advance(static_cast<int>(best), logp[best]);
    order.push_back(static_cast<int>(best));
  }
  return finish(std::move(state), std::move(order), instance);
}

std::vector<Trajectory> beam_candidates(const Tensor<double>& logits,
                                        std::size_t width,
                                        const TspInstance& instance) {
  const std::size_t n = check_square(logits);
  if (width < 1) throw ConfigError("beam width >= 1");
  std::vector<Partial> beam{{{0}, DecodeState::start(n)}};
  std::vector<Child> children;
  for (std::size_t step = 1; step < n; ++step) {
    children.clear();
    for (std::size_t p = 0; p < beam.size(); ++p) {
      const std::vector<double> logp = step_log_distribution(logits, beam[p].state);
      for (std::size_t j = 0; j < n; ++j) {
        if (beam[p].state.visited[j] != 0) continue;
        children.push_back({beam[p].state.logprob + logp[j],
                            static_cast<std::uint32_t>(p), static_cast<int>(j)});
      }
    }
    auto better = [&beam](const Child& a, const Child& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.parent != b.parent) return beam[a.parent].order < beam[b.parent].order;
      return a.city < b.city;
    };
    const std::size_t keep = std::min(width, children.size());
    std::partial_sort(children.begin(), children.begin() + keep, children.end(),
                      better);
    std::vector<Partial> next;
    next.reserve(keep);
    for (std::size_t c = 0; c < keep; ++c) {
      const Child& ch = children[c];
      Partial p = beam[ch.parent];
      p.state.advance(ch.city, ch.score - p.state.logprob);
      p.state.logprob = ch.score;
      p.order.push_back(ch.city);
      next.push_back(std::move(p));
    }
    beam = std::move(next);
  }
  std::vector<Trajectory> out;
  out.reserve(beam.size());
  for (Partial& p : beam) {
    out.push_back(finish(std::move(p.state), std::move(p.order), instance));
  }
  return out;
}

Trajectory decode_beam(const Tensor<double>& logits, std::size_t width,
                       const TspInstance& instance) {
  if (width < 1) throw ConfigError("beam width >= 1");
  Trajectory best = decode_greedy(logits, instance);
  auto consider = [&best](Trajectory t) {
    if (t.length < best.length || (t.length == best.length && t.order < best.order)) {
      best = std::move(t);
    }
  };
  for (std::size_t w = width; w > 1; w /= 2) {
    for (Trajectory& t : beam_candidates(logits, w, instance)) consider(std::move(t));
  }
  return best;
}

double replay_logprob(const Tensor<double>& logits, const std::vector<int>& order) {
  const std::size_t n = check_square(logits);
  validate_permutation(order, n);
  if (order.front() != 0) throw InvalidTourError("trajectory must start at city 0");
  DecodeState state = DecodeState::start(n);
  for (std::size_t i = 1; i < n; ++i) {
    const std::vector<double> logp = step_log_distribution(logits, state);
    state.advance(order[i], logp[static_cast<std::size_t>(order[i])]);
  }
  return state.logprob;
}

}  // namespace stsp
