// Copyright 2026 The llearn Authors
//
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

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <deque>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "llearn/controller.hpp"
#include "llearn/delan.hpp"
#include "llearn/metrics.hpp"
#include "llearn/rollout.hpp"

namespace llearn {

struct TrainerConfig {
  std::size_t K = 10;
  double I0 = 3.0;  // N m
  double E_min = 0.005;
  std::size_t episodes_per_iter = 1;
  std::size_t epochs_per_iter = 20;
  std::size_t batch_size = 256;
  std::size_t buffer_capacity = 100000;
  std::uint64_t seed = 1;
  std::vector<std::size_t> hidden{64, 64};
  double epsilon_pd = 1e-3;
  double torque_scale = 1.0;
  double learning_rate = 1e-3;

  void validate() const {
    require(K >= 1, "trainer: K must be >= 1");
    require(I0 >= 0.0 && std::isfinite(I0), "trainer: I0 must be finite and >= 0");
    require(E_min > 0.0, "trainer: E_min must be positive");
    require(episodes_per_iter >= 1, "trainer: episodes_per_iter must be >= 1");
    require(epochs_per_iter >= 1, "trainer: epochs_per_iter must be >= 1");
    require(batch_size >= 1, "trainer: batch_size must be >= 1");
    require(buffer_capacity >= batch_size, "trainer: buffer_capacity must be >= batch_size");
    require(epsilon_pd > 0.0 && torque_scale > 0.0 && learning_rate > 0.0, "trainer: scales must be positive");
  }

  /// Outer iterations that fit in a transition budget.
  static std::size_t iterations_for_budget(std::size_t budget, std::size_t episodes_per_iter,
                                           std::size_t steps_per_episode) {
    const std::size_t per_iter = episodes_per_iter * steps_per_episode;
    require(per_iter > 0, "trainer: empty iteration");
    return std::max<std::size_t>(1, budget / per_iter);
  }
};

/// I_k = I0 (1 - k/K), floored at zero.
inline double noise_std(double I0, std::size_t k, std::size_t K) {
  require(K >= 1 && k >= 1 && k <= K, "noise_std: k must lie in [1, K]");
  return std::max(0.0, I0 * (1.0 - static_cast<double>(k) / static_cast<double>(K)));
}

inline Eigen::VectorXd perturb_control(const Eigen::VectorXd& u, double I_k, std::mt19937_64& rng) {
  require(I_k >= 0.0, "perturb_control: negative noise level");
  if (I_k == 0.0) return u;
  std::normal_distribution<double> n(0.0, I_k);
  Eigen::VectorXd out = u;
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += n(rng);
  return out;
}

/// Bounded FIFO of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    require(capacity >= 1, "replay buffer: capacity must be >= 1");
  }

  void push(std::span<const Transition> items) {
    for (const auto& t : items) {
      if (data_.size() == capacity_) data_.pop_front();
      data_.push_back(t);
    }
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return data_[i]; }
  std::vector<Transition> contents() const { return {data_.begin(), data_.end()}; }

  /// Uniform draw without replacement; batches are independent.
  std::vector<Transition> sample(std::size_t batch_size, std::mt19937_64& rng) const {
    require(!data_.empty(), "replay buffer: sample from empty buffer");
    const std::size_t n = std::min(batch_size, data_.size());
    std::vector<std::size_t> idx(data_.size());
    std::iota(idx.begin(), idx.end(), 0);
    // Partial Fisher-Yates: the first n slots form the batch.
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    std::vector<Transition> batch;
    batch.reserve(n);
    for (std::size_t i = 0; i < n; ++i) batch.push_back(data_[idx[i]]);
    return batch;
  }

 private:
  std::size_t capacity_;
  std::deque<Transition> data_;
};

struct EpisodeData {
  std::vector<Transition> transitions;
  bool diverged = false;
};

template <Plant P>
EpisodeData collect_episode(const P& plant, Controller& ctrl, const TrajectoryConfig& traj, double I_k,
                            std::mt19937_64& rng) {
  RolloutOptions opt;
  opt.record_transitions = true;
  opt.perturb = [&](const Eigen::VectorXd& u) { return perturb_control(u, I_k, rng); };
  auto r = rollout(plant, ctrl, traj, opt);
  return {std::move(r.transitions), r.diverged};
}

struct Evaluation {
  double rmse = std::numeric_limits<double>::infinity();
  double itae = std::numeric_limits<double>::infinity();
  bool diverged = false;
  RolloutResult run;
};

/// Noiseless rollout scored by RMSE and ITAE of ||q_d - q||.
template <Plant P>
Evaluation evaluate_tracking(const P& plant, Controller& ctrl, const TrajectoryConfig& traj) {
  Evaluation ev;
  ev.run = rollout(plant, ctrl, traj);
  ev.diverged = ev.run.diverged;
  if (!ev.diverged) {
    const auto e = ev.run.errors();
    ev.rmse = rmse(e, plant.dt_ctrl());
    ev.itae = itae(e, plant.dt_ctrl());
  }
  return ev;
}

struct IterationRecord {
  std::size_t k = 0;
  double noise = 0.0;
  std::size_t collected = 0;
  std::size_t buffer_size = 0;
  std::size_t diverged_episodes = 0;
  std::vector<double> losses;
  double E_k = 0.0;
  double itae = 0.0;
  bool eval_diverged = false;
  double wall_clock = 0.0;  // collection plus training, seconds
};

struct LLearningResult {
  LearnedModel model;  // model behind the returned controller
  LearnedModel initial_model;
  ControllerGains gains;
  std::vector<IterationRecord> history;
  std::size_t best_iteration = 0;
  double best_E = std::numeric_limits<double>::infinity();
  bool early_stopped = false;
  std::size_t samples_used = 0;
  double wall_clock = 0.0;
  StateBox state_box;
};

using IterationCallback = std::function<void(const IterationRecord&, const LearnedModel&)>;

/// Collect, train and re-evaluate until the tracking error falls below
/// E_min or K iterations have run; returns the best controller seen.
template <Plant P>
LLearningResult l_learning(const TrainerConfig& cfg, const P& plant, const TrajectoryConfig& traj,
                           const ControllerGains& gains, const IterationCallback& on_iteration = {}) {
  cfg.validate();
  gains.validate(plant.dt_ctrl());
  using clock = std::chrono::steady_clock;
  std::mt19937_64 rng(cfg.seed);
  LearnedModel model = LearnedModel::create(plant.dof(), cfg.hidden, cfg.seed, cfg.epsilon_pd, cfg.torque_scale);
  OptimizerState opt = OptimizerState::for_size(model.parameter_count(), cfg.learning_rate);
  ReplayBuffer buffer(cfg.buffer_capacity);
  std::vector<Transition> seen;

  LLearningResult res;
  res.initial_model = model;
  res.model = model;
  res.gains = gains;
  long batch_index = 0;

  for (std::size_t k = 1; k <= cfg.K; ++k) {
    IterationRecord rec;
    rec.k = k;
    rec.noise = noise_std(cfg.I0, k, cfg.K);
    const auto t0 = clock::now();

    LyapunovController behaviour(learned_estimator(model), gains, plant.dt_ctrl());
    for (std::size_t ep = 0; ep < cfg.episodes_per_iter; ++ep) {
      auto data = collect_episode(plant, behaviour, traj, rec.noise, rng);
      rec.collected += data.transitions.size();
      rec.diverged_episodes += data.diverged ? 1 : 0;
      buffer.push(data.transitions);
      seen.insert(seen.end(), data.transitions.begin(), data.transitions.end());
    }
    res.samples_used += rec.collected;
    rec.buffer_size = buffer.size();
    if (buffer.size() == 0)
      throw TrainingDivergence("every episode diverged before producing data", batch_index);

    const std::size_t batches = (buffer.size() + cfg.batch_size - 1) / cfg.batch_size;
    for (std::size_t epoch = 0; epoch < cfg.epochs_per_iter; ++epoch) {
      for (std::size_t b = 0; b < batches; ++b) {
        const auto batch = buffer.sample(cfg.batch_size, rng);
        auto step = train_step(std::move(model), batch, std::move(opt), batch_index++);
        model = std::move(step.model);
        opt = std::move(step.state);
        rec.losses.push_back(step.loss);
      }
    }
    rec.wall_clock = std::chrono::duration<double>(clock::now() - t0).count();
    res.wall_clock += rec.wall_clock;

    LyapunovController candidate(learned_estimator(model), gains, plant.dt_ctrl());
    const auto ev = evaluate_tracking(plant, candidate, traj);
    rec.E_k = ev.rmse;
    rec.itae = ev.itae;
    rec.eval_diverged = ev.diverged;
    if (ev.rmse < res.best_E) {
      res.best_E = ev.rmse;
      res.best_iteration = k;
      res.model = model;
    }
    res.history.push_back(rec);
    if (on_iteration) on_iteration(rec, model);
    if (ev.rmse < cfg.E_min) {
      res.early_stopped = true;
      break;
    }
  }
  res.state_box = StateBox::around(seen);
  return res;
}

}  // namespace llearn
