"""Numba-compiled numeric core.

The small selection helpers are shared between the public per-step operations
and the whole-trial loop so both paths produce bit-identical trajectories
from the same random draws. All selections consume exactly one uniform draw.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _fill_order(order, u):
    """Fisher-Yates shuffle of 0..n-1 into ``order``, consuming n-1 uniforms."""
    n = order.shape[0]
    for i in range(n):
        order[i] = i
    for i in range(n - 1, 0, -1):
        j = int(u[n - 1 - i] * (i + 1))
        tmp = order[i]
        order[i] = order[j]
        order[j] = tmp


@njit(cache=True)
def _softmax_select(mu_row, beta, u):
    """Inverse-CDF sample from softmax(beta * mu_row) using one uniform draw."""
    k = mu_row.shape[0]
    mx = beta * mu_row[0]
    for i in range(1, k):
        v = beta * mu_row[i]
        if v > mx:
            mx = v
    w = np.empty(k)
    total = 0.0
    for i in range(k):
        w[i] = np.exp(beta * mu_row[i] - mx)
        total += w[i]
    target = u * total
    acc = 0.0
    for i in range(k):
        acc += w[i]
        if acc >= target:
            return i
    return k - 1


@njit(cache=True)
def _restricted_uniform_select(taken, n_avail, u):
    """Uniform sample over the untaken indices using one uniform draw."""
    idx = int(u * n_avail)
    if idx >= n_avail:
        idx = n_avail - 1
    c = -1
    for i in range(taken.shape[0]):
        if not taken[i]:
            c += 1
            if c == idx:
                return i
    return -1  # unreachable while n_avail >= 1


@njit(cache=True)
def _restricted_softmax_select(mu_row, beta, taken, u):
    """Sample from softmax(beta * mu_row) restricted to untaken indices, renormalized.

    Falls back to a uniform choice over the untaken indices if the restricted
    mass underflows to zero.
    """
    k = mu_row.shape[0]
    mx = -np.inf
    n_avail = 0
    for i in range(k):
        if not taken[i]:
            n_avail += 1
            v = beta * mu_row[i]
            if v > mx:
                mx = v
    w = np.empty(k)
    total = 0.0
    for i in range(k):
        if taken[i]:
            w[i] = 0.0
        else:
            w[i] = np.exp(beta * mu_row[i] - mx)
            total += w[i]
    if total <= 0.0:
        return _restricted_uniform_select(taken, n_avail, u)
    target = u * total
    acc = 0.0
    last = -1
    for i in range(k):
        if taken[i]:
            continue
        acc += w[i]
        last = i
        if acc >= target:
            return i
    return last


@njit(cache=True)
def run_trial_kernel(T, n_agents, K, qstar,
                     alpha0, alpha_final, beta0, beta_final, gamma,
                     bandit, conflict_free,
                     is_special, succ_prob, succ_reward, succ_next, fail_next,
                     det_reward, det_next,
                     u_sel, u_perm, u_env, u_conf):
    """Run one full trial from an all-zero table.

    Draw layout (row t serves step t): u_sel (T, N) one selection draw per
    agent; u_perm (T, N-1) agent ordering, conflict-free mode only; u_env
    (T, N) one coin flip per agent, used only by special-cell winners; u_conf
    (T, N) winner draws, conflict mode only, consumed per distinct proposed
    pair in ascending pair order.

    Returns (q, mu, cnt, loss, valid, props) where loss[t] is the mean
    absolute gap to ``qstar`` after step t's updates and props holds the last
    step's proposals.
    """
    q = np.zeros(K)
    q_snap = np.zeros(K)
    mu = np.zeros((n_agents, K))
    cnt = np.zeros((n_agents, K), dtype=np.int64)
    loss = np.empty(T)
    valid = np.empty(T, dtype=np.int64)
    props = np.zeros(n_agents, dtype=np.int64)
    order = np.empty(n_agents, dtype=np.int64)
    taken = np.zeros(K, dtype=np.bool_)
    counts = np.zeros(K, dtype=np.int64)
    offsets = np.zeros(K + 1, dtype=np.int64)
    fill = np.zeros(K, dtype=np.int64)
    sorted_agents = np.empty(n_agents, dtype=np.int64)

    for t in range(T):
        if t == 0:
            alpha = alpha0
            beta = beta0
        else:
            alpha = alpha0 + (alpha_final - alpha0) * t / T
            beta = beta0 + (beta_final - beta0) * t / T

        # --- joint selection ---
        if conflict_free:
            _fill_order(order, u_perm[t])
            for i in range(K):
                taken[i] = False
            for pos in range(n_agents):
                a_id = order[pos]
                if bandit:
                    sel = _restricted_softmax_select(mu[a_id], beta, taken, u_sel[t, a_id])
                else:
                    sel = _restricted_uniform_select(taken, K - pos, u_sel[t, a_id])
                taken[sel] = True
                props[a_id] = sel
        else:
            for i in range(n_agents):
                if bandit:
                    sel = _softmax_select(mu[i], beta, u_sel[t, i])
                else:
                    sel = int(u_sel[t, i] * K)
                    if sel >= K:
                        sel = K - 1
                props[i] = sel

        # --- bucket proposals by pair (counting sort, agents stay ascending) ---
        for k in range(K):
            counts[k] = 0
        for i in range(n_agents):
            counts[props[i]] += 1
        offsets[0] = 0
        for k in range(K):
            offsets[k + 1] = offsets[k] + counts[k]
            fill[k] = offsets[k]
        for i in range(n_agents):
            p = props[i]
            sorted_agents[fill[p]] = i
            fill[p] += 1

        # --- resolve winners and apply snapshot-read updates ---
        for k in range(K):
            q_snap[k] = q[k]
        n_win = 0
        j = 0
        for k in range(K):
            m = counts[k]
            if m == 0:
                continue
            if conflict_free:
                if m > 1:
                    raise ValueError("conflict-free selection produced a duplicate pair")
                winner = sorted_agents[offsets[k]]
            else:
                wi = int(u_conf[t, j] * m)
                j += 1
                if wi >= m:
                    wi = m - 1
                winner = sorted_agents[offsets[k] + wi]
            n_win += 1

            if is_special[k]:
                if u_env[t, winner] < succ_prob[k]:
                    rew = succ_reward[k]
                    nxt = succ_next[k]
                else:
                    rew = 0.0
                    nxt = fail_next[k]
            else:
                rew = det_reward[k]
                nxt = det_next[k]

            mxq = q_snap[nxt * 4]
            for a in range(1, 4):
                v = q_snap[nxt * 4 + a]
                if v > mxq:
                    mxq = v
            q_old = q_snap[k]
            q_new = q_old + alpha * (rew + gamma * mxq - q_old)
            q[k] = q_new
            # selection signal: the unscaled target gap, so late-stage shrinking
            # of the learning rate does not flatten the bandit preferences
            dq = abs(rew + gamma * mxq - q_old)
            cnt[winner, k] += 1
            mu[winner, k] += (dq - mu[winner, k]) / cnt[winner, k]

        valid[t] = n_win
        s = 0.0
        for k in range(K):
            s += abs(qstar[k] - q[k])
        loss[t] = s / K

    return q, mu, cnt, loss, valid, props
