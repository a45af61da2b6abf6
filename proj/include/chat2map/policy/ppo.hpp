#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "chat2map/core/optim.hpp"
#include "chat2map/policy/rollout.hpp"

namespace chat2map::policy {

struct PpoConfig {
  double clip_eps = 0.1;
  double w_action = 1.0;
  double w_value = 0.5;
  double w_entropy = 0.05;
  int epochs = 4;
  double max_grad_norm = 0.5;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double lr = 1e-4;
  bool normalize_advantages = true;
};

struct GaeResult {
  std::vector<double> advantages;  // per step
  std::vector<double> returns;     // advantage + value
};

// Generalized advantage estimation over the concatenated rollout. Episodes are
// delimited by `episode_start` flags; every episode ends at the step before
// the next start (or the rollout end) with a zero bootstrap value.
template <typename T>
GaeResult compute_gae(const PolicyRollout<T>& roll, double gamma, double lam) {
  size_t n = roll.steps.size();
  GaeResult g;
  g.advantages.assign(n, 0);
  g.returns.assign(n, 0);
  double adv = 0;
  for (size_t k = n; k-- > 0;) {
    bool terminal = k + 1 == n || roll.steps[k + 1].episode_start;
    double next_v = terminal ? 0.0 : roll.steps[k + 1].value;
    if (terminal) adv = 0;
    double delta = roll.steps[k].reward.r + gamma * next_v - roll.steps[k].value;
    adv = delta + gamma * lam * adv;
    g.advantages[k] = adv;
    g.returns[k] = adv + roll.steps[k].value;
  }
  return g;
}

struct PpoDiagnostics {
  double action_loss = 0;   // last epoch
  double value_loss = 0;
  double entropy = 0;
  double clip_fraction = 0;
  double mean_reward = 0;
  double mean_return = 0;
};

// One PPO update: `epochs` clipped-surrogate passes over the whole rollout,
// re-running the recurrent policy over each episode so gradients flow through
// the GRU. Budget-forced (masked) ego-actions are excluded from the action and
// entropy losses; every step contributes to the value loss.
template <typename T>
PpoDiagnostics ppo_update(PolicyNet<T>& pol, nn::Adam<T>& opt, const PolicyRollout<T>& roll,
                          const PpoConfig& cfg) {
  if (roll.steps.empty()) throw std::invalid_argument("ppo_update: empty rollout");
  auto gae = compute_gae(roll, cfg.gamma, cfg.gae_lambda);
  size_t n = roll.steps.size();

  // Count free (non-masked) ego-actions and optionally normalize advantages
  // over them.
  long n_free = 0;
  double adv_mean = 0, adv_sq = 0;
  for (size_t k = 0; k < n; ++k)
    for (int i = 0; i < 2; ++i)
      if (!roll.steps[k].masked[static_cast<size_t>(i)]) {
        ++n_free;
        adv_mean += gae.advantages[k];
        adv_sq += gae.advantages[k] * gae.advantages[k];
      }
  std::vector<double> adv = gae.advantages;
  if (cfg.normalize_advantages && n_free > 1) {
    adv_mean /= static_cast<double>(n_free);
    double var = adv_sq / static_cast<double>(n_free) - adv_mean * adv_mean;
    double sd = std::sqrt(std::max(var, 0.0));
    for (auto& a : adv) a = (a - adv_mean) / (sd + 1e-8);
  }

  PpoDiagnostics diag;
  for (const auto& s : roll.steps) diag.mean_reward += s.reward.r;
  diag.mean_reward /= static_cast<double>(n);
  for (double r : gae.returns) diag.mean_return += r;
  diag.mean_return /= static_cast<double>(n);

  // Update passes keep BatchNorm in running-statistic mode so the re-run
  // policy matches the behavior policy exactly (ratio 1 before the first
  // gradient step); gradients still flow through the affine parameters.
  pol.training = false;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.zero_grad();
    Var<T> action_loss, value_loss, entropy_sum;
    bool have_action = false, have_value = false, have_entropy = false;
    long clipped = 0;
    Var<T> state = pol.initial_state();
    for (size_t k = 0; k < n; ++k) {
      const auto& s = roll.steps[k];
      if (s.episode_start) state = pol.initial_state();
      Var<T> e_t = pol.encode_obs(s.obs);
      auto so = pol.step(e_t, state);
      state = so.state;

      // Value loss on every step.
      Var<T> v_err = add_scalar(reshape(so.value, {1}), static_cast<T>(-gae.returns[k]));
      Var<T> v_l = square(v_err);
      value_loss = have_value ? add(value_loss, v_l) : v_l;
      have_value = true;

      Tensor<T> actions({1, 2});
      actions[0] = static_cast<T>(s.action.a_1);
      actions[1] = static_cast<T>(s.action.a_2);
      Var<T> logp_new = bernoulli_logprob(so.logits, actions);  // [1,2]
      Var<T> ent = bernoulli_entropy(so.logits);                // [1,2]
      for (int i = 0; i < 2; ++i) {
        if (s.masked[static_cast<size_t>(i)]) continue;
        Var<T> lp = reshape(slice(logp_new, 1, i, 1), {1});
        Var<T> ratio = vexp(add_scalar(lp, static_cast<T>(-s.logp[static_cast<size_t>(i)])));
        double r0 = static_cast<double>(ratio.val()[0]);
        if (r0 < 1.0 - cfg.clip_eps || r0 > 1.0 + cfg.clip_eps) ++clipped;
        T a_k = static_cast<T>(adv[k]);
        Var<T> surr1 = mul_scalar(ratio, a_k);
        Var<T> surr2 = mul_scalar(
            clamp(ratio, static_cast<T>(1.0 - cfg.clip_eps), static_cast<T>(1.0 + cfg.clip_eps)),
            a_k);
        Var<T> a_l = mul_scalar(minimum(surr1, surr2), T(-1));
        action_loss = have_action ? add(action_loss, a_l) : a_l;
        have_action = true;
        Var<T> e_i = reshape(slice(ent, 1, i, 1), {1});
        entropy_sum = have_entropy ? add(entropy_sum, e_i) : e_i;
        have_entropy = true;
      }
    }
    if (!have_action) throw std::runtime_error("ppo_update: no free actions in rollout");

    T inv_free = static_cast<T>(1.0 / static_cast<double>(n_free));
    action_loss = mul_scalar(action_loss, inv_free);
    entropy_sum = mul_scalar(entropy_sum, inv_free);
    value_loss = mul_scalar(value_loss, static_cast<T>(1.0 / static_cast<double>(n)));
    Var<T> total = add(mul_scalar(action_loss, static_cast<T>(cfg.w_action)),
                       sub(mul_scalar(value_loss, static_cast<T>(cfg.w_value)),
                           mul_scalar(entropy_sum, static_cast<T>(cfg.w_entropy))));
    double tv = static_cast<double>(total.val()[0]);
    if (!std::isfinite(tv)) throw std::runtime_error("ppo_update: loss diverged (non-finite)");
    total.backward();
    opt.clip_grad_norm(cfg.max_grad_norm);
    opt.step();

    diag.action_loss = static_cast<double>(action_loss.val()[0]);
    diag.value_loss = static_cast<double>(value_loss.val()[0]);
    diag.entropy = static_cast<double>(entropy_sum.val()[0]);
    diag.clip_fraction = static_cast<double>(clipped) / static_cast<double>(n_free);
  }
  pol.training = false;
  return diag;
}

}  // namespace chat2map::policy
