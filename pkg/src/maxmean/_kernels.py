"""Compiled inner loops shared by the sampling, policy and risk modules.

Everything here works on plain arrays so numba can compile it; the typed
wrappers live in :mod:`maxmean.systems`, :mod:`maxmean.policy` and
:mod:`maxmean.riskmodel`.
"""

import math
import threading

import numba as nb
import numpy as np

NORMAL = 0
BERNOULLI = 1
SHIFTED_EXPONENTIAL = 2
SHIFTED_ERLANG = 3
SHIFTED_WEIBULL = 4
SCENARIO = 5
EMPIRICAL = 6

UPPER_TAIL = 0
LOWER_TAIL = 1
MIDDLE = 2
UNRESTRICTED = 3

TAIL_PROB = 1.0 / math.sqrt(20.0)

RATE_LOG = 0
RATE_POW = 1
RATE_TABLE = 2


@nb.njit(nogil=True, cache=True)
def ndtri(p):
    """Standard normal quantile, Wichura's AS241 (PPND16), ~1e-16 relative."""
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * (((((((2509.0809287301226727 * r + 33430.575583588128105) * r
                         + 67265.770927008700853) * r + 45921.953931549871457) * r
                       + 13731.693765509461125) * r + 1971.5909503065514427) * r
                     + 133.14166789178437745) * r + 3.387132872796366608) / (
            ((((((5226.495278852545925 * r + 28729.085735721942674) * r
                 + 39307.89580009271061) * r + 21213.794301586595867) * r
               + 5394.1960214247511077) * r + 687.1870074920579083) * r
             + 42.313330701600911252) * r + 1.0)
    r = p if q < 0.0 else 1.0 - p
    if r <= 0.0:
        return -np.inf if q < 0.0 else np.inf
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r
                    + 0.24178072517745061177) * r + 1.27045825245236838258) * r
                  + 3.64784832476320460504) * r + 5.7694972214606914055) * r
                + 4.6303378461565452959) * r + 1.42343711074968357734) / (
            ((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r
                 + 0.0151986665636164571966) * r + 0.14810397642748007459) * r
               + 0.68976733498510000455) * r + 1.6763848301838038494) * r
             + 2.05319162663775882187) * r + 1.0)
    else:
        r -= 5.0
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 0.0012426609473880784386) * r + 0.026532189526576123093) * r
                  + 0.29656057182850489123) * r + 1.7848265399172913358) * r
                + 5.4637849111641143699) * r + 6.6579046435011037772) / (
            ((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r
                 + 1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r
               + 0.0148753612908506148525) * r + 0.13692988092273580531) * r
             + 0.59983220655588793769) * r + 1.0)
    return -val if q < 0.0 else val


@nb.njit(nogil=True, cache=True)
def conditional_normal(region, gen):
    if region == UNRESTRICTED:
        return gen.standard_normal()
    # u in (0, 1] keeps ndtri away from its pole at 0
    u = 1.0 - gen.random()
    if region == UPPER_TAIL:
        return -ndtri(TAIL_PROB * u)
    if region == LOWER_TAIL:
        return ndtri(TAIL_PROB * u)
    return ndtri(TAIL_PROB + (1.0 - 2.0 * TAIL_PROB) * u)


@nb.njit(nogil=True, cache=True)
def portfolio_loss(regions, assets, options, horizon, discount, gen):
    """Discounted loss -Y/r of the option book for one scenario draw.

    ``regions`` holds one region code for the market factor followed by one
    per asset. ``assets`` rows are (S0, vol, market loading, drift);
    ``options`` rows are (asset, is_call, strike, quantity).
    """
    n_assets = assets.shape[0]
    z0 = conditional_normal(int(regions[0]), gen)
    prices = np.empty(n_assets)
    sqrt_t = math.sqrt(horizon)
    for j in range(n_assets):
        zj = conditional_normal(int(regions[j + 1]), gen)
        lam = assets[j, 2]
        w = lam * z0 + math.sqrt(1.0 - lam * lam) * zj
        vol = assets[j, 1]
        prices[j] = assets[j, 0] * math.exp((assets[j, 3] - 0.5 * vol * vol) * horizon + vol * w * sqrt_t)
    value = 0.0
    for i in range(options.shape[0]):
        s = prices[int(options[i, 0])]
        strike = options[i, 2]
        if options[i, 1] > 0.5:
            payoff = s - strike if s > strike else 0.0
        else:
            payoff = strike - s if strike > s else 0.0
        value += options[i, 3] * payoff
    return -value / discount


@nb.njit(nogil=True, cache=True)
def uniform_index(size, gen):
    # floor(u * size): bias below 2**-53 per cell, much faster than gen.integers
    i = int(gen.random() * size)
    return i if i < size else size - 1


@nb.njit(nogil=True, cache=True)
def rate_value(rate_kind, rate_param, tab_n, tab_v, n):
    if rate_kind == RATE_LOG:
        return rate_param * math.log(n)
    if rate_kind == RATE_POW:
        return float(n) ** rate_param
    return np.interp(float(n), tab_n, tab_v)


@nb.njit(nogil=True, cache=True)
def arm_index(mean, var, inv_sqrt_count, sqrt_2nu, variance_aware):
    bonus = sqrt_2nu * inv_sqrt_count
    if variance_aware:
        v = var + bonus
        v = v if v > 0.0 else 0.0
        return mean + bonus * math.sqrt(v)
    return mean + bonus


@nb.njit(nogil=True, cache=True)
def select(means, variances, inv_sqrt_counts, sqrt_2nu, variance_aware, buf):
    # fill first so the index loop vectorizes; strict '>' keeps the lowest index on ties
    K = means.shape[0]
    for j in range(K):
        buf[j] = arm_index(means[j], variances[j], inv_sqrt_counts[j], sqrt_2nu, variance_aware)
    best = buf[0]
    arm = 0
    for j in range(1, K):
        if buf[j] > best:
            best = buf[j]
            arm = j
    return arm




class Kernels:
    """Compiled samplers and policy loops specialized to a set of arm kinds.

    Branches for kinds that do not occur are removed at compile time; a
    catch-all sampler with every kind runs noticeably slower per draw.
    """

    def __init__(self, present):
        has = [k in present for k in range(7)]
        has_normal, has_bern, has_exp, has_erl, has_weib, has_scen, has_emp = has

        # Early returns per branch: assigning into a shared local instead makes
        # numba generate much slower code for the generator calls.
        @nb.njit(nogil=True)
        def draw(k, kinds, params, signs, emp_values, emp_offsets, assets, options, horizon, discount, gen):
            kind = kinds[k]
            if has_normal and kind == NORMAL:
                return signs[k] * (params[k, 0] + params[k, 1] * gen.standard_normal())
            if has_bern and kind == BERNOULLI:
                return signs[k] * (1.0 if gen.random() < params[k, 0] else 0.0)
            if has_exp and kind == SHIFTED_EXPONENTIAL:
                return signs[k] * (params[k, 0] + params[k, 1] * gen.standard_exponential())
            if has_erl and kind == SHIFTED_ERLANG:
                return signs[k] * (params[k, 0] + gen.gamma(params[k, 2], params[k, 1]))
            if has_weib and kind == SHIFTED_WEIBULL:
                return signs[k] * (params[k, 0] + params[k, 1] * gen.weibull(params[k, 2]))
            if has_scen and kind == SCENARIO:
                return signs[k] * portfolio_loss(params[k], assets, options, horizon, discount, gen)
            lo = emp_offsets[k]
            return signs[k] * emp_values[lo + uniform_index(emp_offsets[k + 1] - lo, gen)]

        @nb.njit(nogil=True)
        def draw_many(k, size, kinds, params, signs, emp_values, emp_offsets, assets, options, horizon,
                      discount, gen):
            out = np.empty(size)
            for i in range(size):
                out[i] = draw(k, kinds, params, signs, emp_values, emp_offsets, assets, options, horizon,
                              discount, gen)
            return out

        @nb.njit(nogil=True)
        def run_gucb(kinds, params, signs, emp_values, emp_offsets, assets, options, horizon, discount,
                     n, rate_kind, rate_param, tab_n, tab_v, variance_aware, warmup_cutoff, forced_rounds,
                     gen, log):
            # rounds 1..forced_rounds cycle through the arms in order
            K = kinds.shape[0]
            counts = np.zeros(K, dtype=np.int64)
            sums = np.zeros(K)
            sumsq = np.zeros(K)
            counts_post = np.zeros(K, dtype=np.int64)
            sums_post = np.zeros(K)
            sumsq_post = np.zeros(K)
            means = np.zeros(K)
            variances = np.zeros(K)
            inv_sqrt = np.zeros(K)
            buf = np.empty(K)
            n_log = n if log else 0
            traj_arm = np.empty(n_log, dtype=np.int64)
            traj_val = np.empty(n_log)
            for r in range(1, n + 1):
                if r <= forced_rounds:
                    k = (r - 1) % K
                else:
                    nu = rate_value(rate_kind, rate_param, tab_n, tab_v, r)
                    k = select(means, variances, inv_sqrt, math.sqrt(2.0 * nu), variance_aware, buf)
                x = draw(k, kinds, params, signs, emp_values, emp_offsets, assets, options, horizon, discount, gen)
                counts[k] += 1
                sums[k] += x
                sumsq[k] += x * x
                if r > warmup_cutoff:
                    counts_post[k] += 1
                    sums_post[k] += x
                    sumsq_post[k] += x * x
                t = float(counts[k])
                m = sums[k] / t
                means[k] = m
                variances[k] = sumsq[k] / t - m * m
                inv_sqrt[k] = 1.0 / math.sqrt(t)
                if log:
                    traj_arm[r - 1] = k
                    traj_val[r - 1] = x
            return counts, sums, sumsq, counts_post, sums_post, sumsq_post, traj_arm, traj_val

        @nb.njit(nogil=True)
        def run_uniform(kinds, params, signs, emp_values, emp_offsets, assets, options, horizon, discount,
                        n, warmup_cutoff, gen, log):
            K = kinds.shape[0]
            counts = np.zeros(K, dtype=np.int64)
            sums = np.zeros(K)
            sumsq = np.zeros(K)
            counts_post = np.zeros(K, dtype=np.int64)
            sums_post = np.zeros(K)
            sumsq_post = np.zeros(K)
            n_log = n if log else 0
            traj_arm = np.empty(n_log, dtype=np.int64)
            traj_val = np.empty(n_log)
            for r in range(1, n + 1):
                k = uniform_index(K, gen)
                x = draw(k, kinds, params, signs, emp_values, emp_offsets, assets, options, horizon, discount, gen)
                counts[k] += 1
                sums[k] += x
                sumsq[k] += x * x
                if r > warmup_cutoff:
                    counts_post[k] += 1
                    sums_post[k] += x
                    sumsq_post[k] += x * x
                if log:
                    traj_arm[r - 1] = k
                    traj_val[r - 1] = x
            return counts, sums, sumsq, counts_post, sums_post, sumsq_post, traj_arm, traj_val

        self.draw = draw
        self.draw_many = draw_many
        self.run_gucb = run_gucb
        self.run_uniform = run_uniform


_KERNELS = {}
_KERNELS_LOCK = threading.Lock()


def kernels_for(kinds) -> Kernels:
    key = frozenset(int(k) for k in np.unique(kinds))
    with _KERNELS_LOCK:
        if key not in _KERNELS:
            _KERNELS[key] = Kernels(key)
        return _KERNELS[key]
