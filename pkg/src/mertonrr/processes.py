"""Terminal asset values for diffusion, jump-diffusion and GARCH(1,1).

Every realization ``m`` draws from its own Philox stream.  Substream 0
carries the market factor, substream ``k + 1`` firm ``k``.  Lane 0 holds
the Gaussian draws and lane 1 the jump arrivals/sizes, so switching jumps
on or off never shifts the Gaussian sequence.

The per-step growth factor is floored at zero: a firm whose factor hits
zero stays at zero (absorbing).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .model import ContractSpec, DiffusionParams, GarchParams, JumpParams, ProcessParams
from .numerics.rng import RngStream, fill_normals, normal_at, uniform_at

DIFFUSION, JUMP_DIFFUSION, GARCH = 0, 1, 2
_KIND = {"diffusion": DIFFUSION, "jump-diffusion": JUMP_DIFFUSION, "garch": GARCH}

MARKET_SUBSTREAM = 0
NORMAL_LANE, JUMP_LANE = 0, 1
_MS = np.uint64(MARKET_SUBSTREAM)
_NL = np.uint64(NORMAL_LANE)
_JL = np.uint64(JUMP_LANE)
_ZERO = np.uint64(0)


@dataclass(frozen=True)
class MarketFactorPath:
    normals: np.ndarray
    jump_increments: np.ndarray | None = None


@dataclass(frozen=True)
class TerminalValues:
    values: np.ndarray
    market_return: float


# --- jitted building blocks -------------------------------------------------

@nb.njit(cache=True, inline="always")
def _next_arrival(key, m, sub, w, prev, lam):
    u, w = uniform_at(key, m, sub, _JL, w)
    return prev - math.log(u) / lam, w


@nb.njit(cache=True, inline="always")
def _jump_size(key, m, sub, w, log_mean, log_sd):
    z, w = normal_at(key, m, sub, _JL, w)
    return math.exp(log_mean + log_sd * z) - 1.0, w


@nb.njit(cache=True, nogil=True)
def _fill_market(key, m, N, dt, T, eta, jumps, lam, log_mean, log_sd):
    fill_normals(key, m, _MS, _NL, _ZERO, eta)
    jumps[:] = 0.0
    if lam > 0.0:
        arrival, w = _next_arrival(key, m, _MS, _ZERO, 0.0, lam)
        while arrival < T:
            t = min(int(arrival / dt), N - 1)
            size, w = _jump_size(key, m, _MS, w, log_mean, log_sd)
            jumps[t] += size
            arrival, w = _next_arrival(key, m, _MS, w, arrival, lam)


@nb.njit(cache=True, nogil=True)
def _terminal_values(kind, key, m, K, N, V0, dt, T, mu, sigma, c,
                     lam, log_mean, log_sd, a0, a1, b1, s0, eta, mjumps, base, eps, out):
    """Fill ``out[:K]`` with V_k(T) for realization ``m``."""
    m = np.uint64(m)
    _fill_market(key, m, N, dt, T, eta, mjumps, lam, log_mean, log_sd)
    sqdt = math.sqrt(dt)
    sc = math.sqrt(c)
    sic = math.sqrt(1.0 - c)
    if kind != GARCH:
        mscale = sc * sigma * sqdt
        for t in range(N):
            base[t] = 1.0 + mu * dt + mscale * eta[t] + mjumps[t]
    idio = sic * sigma * sqdt
    drift = 1.0 + mu * dt
    for k in range(K):
        sub = np.uint64(k + 1)
        fill_normals(key, m, sub, _NL, _ZERO, eps)
        prod = 1.0
        if kind == GARCH:
            s2 = s0 * s0
            for t in range(N):
                r = math.sqrt(s2) * (sc * eta[t] + sic * eps[t])
                f = drift + r
                if f <= 0.0:
                    prod = 0.0
                    break
                prod *= f
                s2 = a0 + a1 * r * r + b1 * s2
        else:
            arrival = T
            wj = _ZERO
            if lam > 0.0:
                arrival, wj = _next_arrival(key, m, sub, _ZERO, 0.0, lam)
            for t in range(N):
                f = base[t] + idio * eps[t]
                if arrival < T:
                    edge = T if t == N - 1 else (t + 1) * dt
                    while arrival < edge:
                        size, wj = _jump_size(key, m, sub, wj, log_mean, log_sd)
                        f += size
                        arrival, wj = _next_arrival(key, m, sub, wj, arrival, lam)
                if f <= 0.0:
                    prod = 0.0
                    break
                prod *= f
        out[k] = V0 * prod


@nb.njit(cache=True, nogil=True)
def summarize_values(values, V0, F):
    """(X_m, N_D, mean individual loss) for one portfolio."""
    K = values.shape[0]
    total = 0.0
    loss = 0.0
    nd = 0
    for k in range(K):
        v = values[k]
        total += v
        if v < F:
            nd += 1
            loss += 1.0 - v / F
    return total / K / V0 - 1.0, nd, loss / K


@nb.njit(cache=True, nogil=True)
def run_range(kind, seed, m0, m1, K, N, V0, F, dt, T, mu, sigma, c,
              lam, log_mean, log_sd, a0, a1, b1, s0, xm, nd, loss):
    """Summaries for realizations ``m0 <= m < m1`` written at ``m - m0``."""
    key = np.uint64(seed)
    eta = np.empty(N)
    mj = np.empty(N)
    base = np.empty(N)
    eps = np.empty(N)
    vals = np.empty(K)
    for m in range(m0, m1):
        _terminal_values(kind, key, m, K, N, V0, dt, T, mu, sigma, c,
                         lam, log_mean, log_sd, a0, a1, b1, s0, eta, mj, base, eps, vals)
        x, n, l = summarize_values(vals, V0, F)
        i = m - m0
        xm[i] = x
        nd[i] = n
        loss[i] = l


@nb.njit(cache=True)
def _garch_returns(key, m, k, N, c, a0, a1, b1, s0, eta, eps, out):
    fill_normals(key, m, _MS, _NL, _ZERO, eta)
    fill_normals(key, m, np.uint64(k + 1), _NL, _ZERO, eps)
    sc, sic = math.sqrt(c), math.sqrt(1.0 - c)
    s2 = s0 * s0
    for t in range(N):
        r = math.sqrt(s2) * (sc * eta[t] + sic * eps[t])
        out[t] = r
        s2 = a0 + a1 * r * r + b1 * s2


@nb.njit(cache=True)
def _jump_counts(key, m, lam, T, dt, N, out):
    for p in range(out.shape[0]):
        sub = np.uint64(p)
        arrival, w = _next_arrival(key, m, sub, _ZERO, 0.0, lam)
        while arrival < T:
            out[p, min(int(arrival / dt), N - 1)] += 1
            arrival, w = _next_arrival(key, m, sub, w, arrival, lam)


@nb.njit(cache=True)
def _jump_sizes(key, m, sub, w, log_mean, log_sd, out):
    for i in range(out.shape[0]):
        out[i], w = _jump_size(key, m, sub, w, log_mean, log_sd)
    return w


# --- Python API -------------------------------------------------------------

def kernel_args(params: ProcessParams, contract: ContractSpec):
    """Flat argument tuple for :func:`run_range` after ``(kind, seed, m0, m1, K)``."""
    d = params.diffusion
    lam = log_mean = 0.0
    log_sd = 1.0
    a0 = a1 = b1 = s0 = 0.0
    if params.process == "jump-diffusion":
        j = params.jumps
        lam, log_mean, log_sd = j.intensity, j.log_mean, j.log_sd
    if params.process == "garch":
        g = params.garch
        a0, a1, b1, s0 = g.alpha0, g.alpha1, g.beta1, g.initial_vol
    return (contract.steps, float(contract.initial_value), float(contract.face_value),
            contract.dt, float(contract.maturity), float(d.mu), float(d.sigma), float(d.corr),
            float(lam), float(log_mean), float(log_sd), float(a0), float(a1), float(b1), float(s0))


def _simulate(params: ProcessParams, contract: ContractSpec, K: int, stream: RngStream):
    if K < 1:
        raise ValueError("portfolio size K must be >= 1")
    N, V0, F, dt, T, mu, sigma, c, lam, lm, ls, a0, a1, b1, s0 = kernel_args(params, contract)
    eta, mj, base, eps, vals = (np.empty(N), np.empty(N), np.empty(N), np.empty(N),
                                np.empty(K))
    _terminal_values(_KIND[params.process], np.uint64(stream.master_seed), stream.stream_index,
                     K, N, V0, dt, T, mu, sigma, c, lam, lm, ls, a0, a1, b1, s0,
                     eta, mj, base, eps, vals)
    x, _, _ = summarize_values(vals, V0, F)
    return TerminalValues(values=vals, market_return=float(x))


def simulate_diffusion(contract: ContractSpec, params: DiffusionParams, K: int,
                       stream: RngStream) -> TerminalValues:
    """Correlated diffusion; realization index is ``stream.stream_index``."""
    return _simulate(ProcessParams("diffusion", params), contract, K, stream)


def simulate_jump_diffusion(contract: ContractSpec, diff: DiffusionParams, jumps: JumpParams,
                            K: int, stream: RngStream) -> TerminalValues:
    return _simulate(ProcessParams("jump-diffusion", diff, jumps=jumps), contract, K, stream)


def simulate_garch(contract: ContractSpec, mu: float, garch: GarchParams, c: float, K: int,
                   stream: RngStream) -> TerminalValues:
    # sigma is unused by the GARCH kernel; any valid value will do
    diff = DiffusionParams(mu=mu, sigma=1.0, corr=c)
    return _simulate(ProcessParams("garch", diff, garch=garch), contract, K, stream)


def simulate(params: ProcessParams, contract: ContractSpec, K: int,
             stream: RngStream) -> TerminalValues:
    return _simulate(params, contract, K, stream)


def market_factor_path(params: ProcessParams, contract: ContractSpec,
                       stream: RngStream) -> MarketFactorPath:
    """The market draws realization ``stream.stream_index`` uses."""
    N = contract.steps
    eta, mj = np.empty(N), np.empty(N)
    lam, lm, ls = 0.0, 0.0, 1.0
    if params.process == "jump-diffusion":
        lam, lm, ls = params.jumps.intensity, params.jumps.log_mean, params.jumps.log_sd
    _fill_market(np.uint64(stream.master_seed), np.uint64(stream.stream_index), N, contract.dt,
                 float(contract.maturity), eta, mj, lam, lm, ls)
    return MarketFactorPath(eta, mj if params.process == "jump-diffusion" else None)


def market_only_growth(path: MarketFactorPath, params: DiffusionParams,
                       contract: ContractSpec) -> float:
    """Product of the market-only factors, i.e. the K -> infinity limit of X_m + 1
    for the diffusion."""
    dt = contract.dt
    f = 1.0 + params.mu * dt + math.sqrt(params.corr) * params.sigma * math.sqrt(dt) * path.normals
    return float(np.prod(np.maximum(f, 0.0)))


def garch_returns(garch: GarchParams, c: float, steps: int, stream: RngStream,
                  firm: int = 0) -> np.ndarray:
    """Per-step returns r_t of firm ``firm`` in realization ``stream.stream_index``.

    Uses the same draws and recursion as :func:`simulate_garch`, without the
    absorbing floor.
    """
    eta, eps, out = np.empty(steps), np.empty(steps), np.empty(steps)
    _garch_returns(np.uint64(stream.master_seed), np.uint64(stream.stream_index), firm, steps,
                   float(c), garch.alpha0, garch.alpha1, garch.beta1, garch.initial_vol,
                   eta, eps, out)
    return out


def jump_counts(stream: RngStream, intensity: float, contract: ContractSpec,
                n_paths: int) -> np.ndarray:
    """Per-step jump counts for ``n_paths`` independent firms, shape (n_paths, N)."""
    if not intensity > 0:
        return np.zeros((n_paths, contract.steps), dtype=np.int64)
    out = np.zeros((n_paths, contract.steps), dtype=np.int64)
    _jump_counts(np.uint64(stream.master_seed), np.uint64(stream.stream_index),
                 float(intensity), float(contract.maturity), contract.dt, contract.steps, out)
    return out


def jump_sizes(stream: RngStream, jumps: JumpParams, n: int) -> np.ndarray:
    """``n`` single-jump increments Lambda drawn the way the engine draws them."""
    key, m, sub, _ = stream.coords
    out = np.empty(n)
    stream.counter = int(_jump_sizes(key, m, sub, np.uint64(stream.counter),
                                     jumps.log_mean, jumps.log_sd, out))
    return out
