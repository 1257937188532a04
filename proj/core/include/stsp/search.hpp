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

// Tour construction from an (n, n) log-probability heatmap.
//
// Every decoder starts at city 0 and, at each step, takes row `current` of
// the logits, adds kMaskFill to visited cities (the current city included,
// which removes the self-loop), and renormalises with a softmax. Sampling,
// greedy and beam search all score moves with exactly this distribution.

#pragma once

#include <cstdint>
#include <vector>

#include "stsp/rng.hpp"
#include "stsp/tensor.hpp"
#include "stsp/tsp.hpp"

namespace stsp {

struct Trajectory {
  std::vector<int> order;
  /// Sum of the renormalised log-probabilities of every move.
  double logprob = 0.0;
  double length = 0.0;
};

struct DecodeState {
  std::vector<std::uint8_t> visited;
  int current = 0;
  std::size_t visited_count = 0;
  double logprob = 0.0;

  static DecodeState start(std::size_t n);
  void advance(int city, double step_logprob);
};

/// Renormalised log-probabilities of the next city; masked entries hold
/// -infinity.
std::vector<double> step_log_distribution(const Tensor<double>& logits,
                                          const DecodeState& state);
/// Probabilities of the next city; masked entries are 0 and the rest sum
/// to 1.
std::vector<double> step_distribution(const Tensor<double>& logits,
                                      const DecodeState& state);

Trajectory decode_sample(const Tensor<double>& logits,
                         const TspInstance& instance, Rng& rng);
Trajectory decode_sample(const Tensor<double>& logits,
                         const TspInstance& instance, std::uint64_t seed);

/// Argmax at every step; ties to the lowest city index.
Trajectory decode_greedy(const Tensor<double>& logits,
                         const TspInstance& instance);

/// Beam search returning the shortest tour in its candidate pool.
///
/// Beams keep the `width` best partial tours by accumulated log-probability,
/// ties broken by lexicographic order. The pool is the greedy tour plus the
/// completed beams of widths width, width/2, width/4, ..., 1 (integer
/// halving), so pools of widths related by a power of two are nested and
/// the returned length never increases along such a chain. Among equal
/// lengths the lexicographically smallest order wins.
Trajectory decode_beam(const Tensor<double>& logits, std::size_t width,
                       const TspInstance& instance);

/// Completed beams of a single beam search of the given width, ranked by
/// log-probability.
std::vector<Trajectory> beam_candidates(const Tensor<double>& logits,
                                        std::size_t width,
                                        const TspInstance& instance);

/// Recomputes the accumulated log-probability of a fixed order.
double replay_logprob(const Tensor<double>& logits, const std::vector<int>& order);

}  // namespace stsp
