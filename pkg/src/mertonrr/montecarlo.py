"""Nested Monte Carlo driver: K firms per realization, M market realizations.

Realization ``m`` always draws from stream index ``m``, so results depend
only on ``(config, seed)``.  Work is cut into contiguous chunks that a thread
pool runs through the GIL-free kernel; chunk results land in preallocated
arrays at fixed offsets, which makes the output independent of the worker
count and of completion order.
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .model import ContractSpec, ParameterError, ProcessParams
from .numerics import RngStream
from .processes import _KIND, kernel_args, run_range, simulate, summarize_values

OUTCOME_HEADER = ("realization", "x_m", "n_default", "pd_hat", "loss_hat", "recovery_hat")


class SimulationError(RuntimeError):
    """A chunk failed; ``completed`` realizations (a prefix, 0..completed-1) finished."""

    def __init__(self, message: str, completed: int):
        super().__init__(f"{message} (completed realizations: {completed})")
        self.completed = completed


@dataclass(frozen=True)
class PortfolioOutcome:
    x_m: float
    n_default: int
    pd_hat: float
    loss_hat: float
    recovery_hat: float | None


def outcome_from_values(values: np.ndarray, contract: ContractSpec) -> PortfolioOutcome:
    """Estimators for one portfolio of terminal values."""
    values = np.asarray(values, dtype=float)
    K = values.shape[0]
    if K < 1:
        raise ParameterError("need at least one firm")
    x, nd, loss = summarize_values(values, float(contract.initial_value), float(contract.face_value))
    return _outcome(float(x), int(nd), float(loss), K)


def _recovery(nd, loss, K):
    # clipped against roundoff at the ends of [0, 1]
    return min(1.0, max(0.0, 1.0 - K * loss / nd))


def _outcome(x, nd, loss, K):
    rec = _recovery(nd, loss, K) if nd > 0 else None
    return PortfolioOutcome(x, nd, nd / K, loss, rec)


def run_realization(params: ProcessParams, contract: ContractSpec, K: int,
                    stream: RngStream) -> PortfolioOutcome:
    """One market realization; its index is ``stream.stream_index``."""
    tv = simulate(params, contract, K, stream)
    return outcome_from_values(tv.values, contract)


@dataclass(frozen=True)
class SimulationConfig:
    """Everything that determines a simulation result.

    ``threads`` and ``chunk_size`` only affect scheduling, never the numbers.
    """

    params: ProcessParams = field(default_factory=ProcessParams)
    contract: ContractSpec = field(default_factory=ContractSpec)
    portfolio_size: int = 500
    realizations: int = 100_000
    seed: int = 0
    threads: int = 1
    chunk_size: int = 250

    def __post_init__(self):
        if int(self.portfolio_size) != self.portfolio_size or self.portfolio_size < 1:
            raise ParameterError("portfolio_size must be an integer >= 1")
        if int(self.realizations) != self.realizations or self.realizations < 1:
            raise ParameterError("realizations must be an integer >= 1")
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must fit in 64 unsigned bits")
        if self.realizations > 2**32:
            raise ParameterError("at most 2**32 realizations")
        if self.threads < 1 or self.chunk_size < 1:
            raise ParameterError("threads and chunk_size must be >= 1")


@dataclass
class SimulationResult:
    """Per-realization estimators stored column-wise."""

    x_m: np.ndarray
    n_default: np.ndarray
    loss_hat: np.ndarray
    config: SimulationConfig
    elapsed_seconds: float = 0.0
    threads_used: int = 1

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def size(self) -> int:
        return self.x_m.shape[0]

    @property
    def pd_hat(self) -> np.ndarray:
        return self.n_default / self.config.portfolio_size

    @property
    def recovery_hat(self) -> np.ndarray:
        """1 - K L / N_D, NaN where there are no defaults."""
        K = self.config.portfolio_size
        out = np.full(self.size, np.nan)
        d = self.n_default > 0
        out[d] = np.clip(1.0 - K * self.loss_hat[d] / self.n_default[d], 0.0, 1.0)
        return out

    def outcome(self, m: int) -> PortfolioOutcome:
        return _outcome(float(self.x_m[m]), int(self.n_default[m]), float(self.loss_hat[m]),
                        self.config.portfolio_size)

    def outcomes(self) -> Iterator[PortfolioOutcome]:
        for m in range(self.size):
            yield self.outcome(m)

    def pooled_loss(self) -> float:
        """Mean of loss_hat; exactly rounded, so independent of summation order."""
        return math.fsum(self.loss_hat) / self.size


def _chunks(M, size):
    return [(a, min(a + size, M)) for a in range(0, M, size)]


def run_simulation(config: SimulationConfig,
                   progress: Callable[[int, int], None] | None = None,
                   sink: Callable[[int, np.ndarray, np.ndarray, np.ndarray], None] | None = None,
                   ) -> SimulationResult:
    """Run ``config.realizations`` market realizations.

    ``progress(done, total)`` is called after each chunk (from the calling
    thread).  ``sink(m0, x_m, n_default, loss_hat)`` receives chunks in
    ascending realization order, e.g. to stream outcomes to disk.
    """
    M, K = config.realizations, config.portfolio_size
    kind = _KIND[config.params.process]
    args = kernel_args(config.params, config.contract)
    xm = np.empty(M)
    nd = np.empty(M, dtype=np.int64)
    loss = np.empty(M)
    chunks = _chunks(M, config.chunk_size)
    threads = min(config.threads, len(chunks))

    def work(c):
        m0, m1 = c
        run_range(kind, config.seed, m0, m1, K, *args,
                  xm[m0:m1], nd[m0:m1], loss[m0:m1])

    start = time.perf_counter()
    done = 0
    emitted = 0
    try:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(work, c) for c in chunks]
            for i, fut in enumerate(futures):
                try:
                    fut.result()
                except BaseException as exc:
                    for f in futures:
                        f.cancel()
                    raise SimulationError(f"realizations {chunks[i][0]}..{chunks[i][1] - 1} "
                                          f"failed: {exc!r}", chunks[i][0]) from exc
                m0, m1 = chunks[i]
                done += m1 - m0
                if sink is not None:
                    sink(m0, xm[m0:m1], nd[m0:m1], loss[m0:m1])
                    emitted = m1
                if progress is not None:
                    progress(done, M)
    except SimulationError:
        raise
    except OSError as exc:
        raise SimulationError(f"output sink failed: {exc!r}", emitted) from exc
    elapsed = time.perf_counter() - start
    return SimulationResult(xm, nd, loss, config, elapsed, threads)


# --- binning and histograms -------------------------------------------------

@dataclass(frozen=True)
class BinnedCurve:
    centers: np.ndarray
    means: np.ndarray
    counts: np.ndarray

    def __len__(self):
        return self.centers.shape[0]


def bin_curve(x, y, bins) -> BinnedCurve:
    """Per-bin means of ``y`` against ``x``; NaN ``y`` values and empty bins are skipped.

    ``bins`` is an array of edges; values outside them are dropped.  Centers
    are the mean ``x`` of the members, which puts points on the curve even
    for wide bins.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError("x and y must have equal length")
    ok = ~np.isnan(y) & ~np.isnan(x)
    x, y = x[ok], y[ok]
    edges = np.asarray(bins, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("bins must be increasing edges")
    idx = np.searchsorted(edges, x, side="right") - 1
    # the last edge is inclusive
    idx[x == edges[-1]] = edges.size - 2
    inside = (idx >= 0) & (idx < edges.size - 1)
    idx, x, y = idx[inside], x[inside], y[inside]
    nb = edges.size - 1
    counts = np.bincount(idx, minlength=nb)
    sx = np.bincount(idx, weights=x, minlength=nb)
    sy = np.bincount(idx, weights=y, minlength=nb)
    keep = counts > 0
    return BinnedCurve(sx[keep] / counts[keep], sy[keep] / counts[keep], counts[keep])


def pd_bins(K: int) -> np.ndarray:
    """Edges placing every attainable pd_hat = n/K in its own bin."""
    return (np.arange(K + 2) - 0.5) / K


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    density: np.ndarray
    counts: np.ndarray
    total: int

    @property
    def centers(self) -> np.ndarray:
        return np.sqrt(self.edges[:-1] * self.edges[1:]) if self.edges[0] > 0 else \
            0.5 * (self.edges[:-1] + self.edges[1:])


def log_edges(lo: float, hi: float, n: int) -> np.ndarray:
    if not (0 < lo < hi) or n < 1:
        raise ValueError("need 0 < lo < hi and n >= 1")
    return np.geomspace(lo, hi, n + 1)


def empirical_histogram(samples, edges, normalize: str = "included") -> Histogram:
    """Density histogram with ``sum(density * width) = 1``.

    With ``normalize="included"`` the mass is that of samples inside the edges;
    ``"total"`` divides by all samples, so the density integrates to the
    included fraction (useful when zeros fall outside log-spaced bins).
    """
    s = np.asarray(samples, dtype=float).ravel()
    if s.size == 0:
        raise ValueError("need at least one sample")
    edges = np.asarray(edges, dtype=float)
    counts, _ = np.histogram(s, bins=edges)
    denom = counts.sum() if normalize == "included" else s.size
    if normalize not in ("included", "total"):
        raise ValueError("normalize must be 'included' or 'total'")
    widths = np.diff(edges)
    dens = counts / (denom * widths) if denom else np.zeros_like(widths)
    return Histogram(edges, dens, counts, int(s.size))


# --- outcome CSV ------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def outcome_rows(m0: int, xm, nd, loss, K: int):
    for i in range(len(xm)):
        n = int(nd[i])
        rec = "" if n == 0 else _fmt(_recovery(n, float(loss[i]), K))
        yield (str(m0 + i), _fmt(xm[i]), str(n), _fmt(n / K), _fmt(loss[i]), rec)


class OutcomeWriter:
    """Streams outcome chunks to CSV; usable as a :func:`run_simulation` sink."""

    def __init__(self, path: str | os.PathLike, K: int, header_lines=()):
        self.K = K
        self._fh = open(path, "w", newline="", encoding="utf-8")
        for line in header_lines:
            self._fh.write(line.rstrip("\n") + "\n")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(OUTCOME_HEADER)

    def __call__(self, m0, xm, nd, loss):
        self._w.writerows(outcome_rows(m0, xm, nd, loss, self.K))

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_outcomes(path, result: SimulationResult, header_lines=()):
    with OutcomeWriter(path, result.config.portfolio_size, header_lines) as w:
        w(0, result.x_m, result.n_default, result.loss_hat)


def read_outcomes(path) -> dict:
    """Columns of an outcome CSV as arrays; absent recovery reads as NaN."""
    cols = {k: [] for k in OUTCOME_HEADER}
    with open(path, newline="", encoding="utf-8") as fh:
        lines = (ln for ln in fh if not ln.startswith("#"))
        reader = csv.reader(lines)
        header = next(reader)
        if tuple(header) != OUTCOME_HEADER:
            raise ValueError(f"unexpected outcome header {header}")
        for row in reader:
            for k, v in zip(OUTCOME_HEADER, row):
                cols[k].append(v)
    out = {
        "realization": np.array(cols["realization"], dtype=np.int64),
        "x_m": np.array(cols["x_m"], dtype=float),
        "n_default": np.array(cols["n_default"], dtype=np.int64),
        "pd_hat": np.array(cols["pd_hat"], dtype=float),
        "loss_hat": np.array(cols["loss_hat"], dtype=float),
        "recovery_hat": np.array([float(v) if v else np.nan for v in cols["recovery_hat"]]),
    }
    return out
