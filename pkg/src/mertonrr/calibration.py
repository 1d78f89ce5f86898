"""Least-squares fit of the structural parameter B.

The objective is the (optionally weighted) sum of squared differences
between observed recovery or loss values and the structural relation
evaluated at the observed default probability.  B is found by golden
section search in log B from three brackets; the best local minimum wins.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .analytics import structural_loss, structural_recovery
from .model import ParameterError

KINDS = ("recovery", "loss")
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class CalibrationError(ArithmeticError):
    """Golden-section search hit its iteration cap; carries the best iterate."""

    def __init__(self, message, best_b, best_sse, iterations):
        super().__init__(f"{message}: best B={best_b!r}, SSE={best_sse!r}, "
                         f"iterations={iterations}")
        self.best_b = best_b
        self.best_sse = best_sse
        self.iterations = iterations


class IngestionError(ValueError):
    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


class RejectedRowWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ObservationSet:
    """Observed (pd, value) pairs; ``kind[i]`` says whether value is a recovery or a loss."""

    pd: np.ndarray
    value: np.ndarray
    kind: tuple
    weight: np.ndarray | None = None
    label: tuple = field(default=())

    def __post_init__(self):
        pd = np.asarray(self.pd, dtype=float).ravel()
        val = np.asarray(self.value, dtype=float).ravel()
        kind = tuple(self.kind)
        if isinstance(self.kind, str):
            kind = (self.kind,) * pd.size
        if pd.size < 1:
            raise ParameterError("need at least one observation")
        if val.shape != pd.shape or len(kind) != pd.size:
            raise ParameterError("pd, value and kind must have equal length")
        if np.any(~((pd > 0) & (pd < 1))):
            raise ParameterError("observed pd must lie strictly inside (0, 1)")
        if np.any(~((val >= 0) & (val <= 1))):
            raise ParameterError("observed values must lie in [0, 1]")
        if any(k not in KINDS for k in kind):
            raise ParameterError(f"kind must be one of {KINDS}")
        w = None
        if self.weight is not None:
            w = np.asarray(self.weight, dtype=float).ravel()
            if w.shape != pd.shape or np.any(~(w >= 0)):
                raise ParameterError("weights must be nonnegative, one per record")
        object.__setattr__(self, "pd", pd)
        object.__setattr__(self, "value", val)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "weight", w)

    def __len__(self):
        return self.pd.size

    @property
    def weights(self) -> np.ndarray:
        return np.ones(self.pd.size) if self.weight is None else self.weight

    def model(self, b: float) -> np.ndarray:
        out = np.empty(self.pd.size)
        is_rec = np.array([k == "recovery" for k in self.kind])
        if is_rec.any():
            out[is_rec] = structural_recovery(self.pd[is_rec], b)
        if (~is_rec).any():
            out[~is_rec] = structural_loss(self.pd[~is_rec], b)
        return out


@dataclass(frozen=True)
class FitResult:
    b_hat: float
    sse: float
    iterations: int
    converged: bool
    at_boundary: bool = False

    def to_text(self) -> str:
        return "".join(f"{k} = {v!r}\n" for k, v in (
            ("b_hat", self.b_hat), ("sse", self.sse), ("iterations", self.iterations),
            ("converged", self.converged), ("at_boundary", self.at_boundary)))


def residuals(obs: ObservationSet, b: float) -> np.ndarray:
    """Observed minus modelled value, one entry per record."""
    return obs.value - obs.model(b)


def sse(obs: ObservationSet, b: float) -> float:
    r = residuals(obs, b)
    return math.fsum(obs.weights * r * r)


def _golden(f, lo, hi, tol, max_iter):
    """Golden section on [lo, hi] in log space; stops when the bracket width in B <= tol."""
    a, d = math.log(lo), math.log(hi)
    b = d - _INVPHI * (d - a)
    c = a + _INVPHI * (d - a)
    fb, fc = f(math.exp(b)), f(math.exp(c))
    it = 0
    while math.exp(d) - math.exp(a) > tol:
        if it >= max_iter:
            return (math.exp(b), fb, it, False) if fb <= fc else (math.exp(c), fc, it, False)
        it += 1
        if fb <= fc:
            d, c, fc = c, b, fb
            b = d - _INVPHI * (d - a)
            fb = f(math.exp(b))
        else:
            a, b, fb = b, c, fc
            c = a + _INVPHI * (d - a)
            fc = f(math.exp(c))
    x = math.exp(0.5 * (a + d))
    return x, f(x), it, True


def fit_b(obs: ObservationSet, b_lo: float = 1e-3, b_hi: float = 10.0, tol: float = 1e-8,
          starts: int = 3, max_iter: int = 500) -> FitResult:
    """Minimise the weighted SSE over B in ``[b_lo, b_hi]``.

    The interval is split into ``starts`` log-equal brackets and golden
    section runs in each; this guards against flat stretches of the SSE.
    A minimum within ``10 tol`` of either end sets ``at_boundary``.
    """
    if not 0 < b_lo < b_hi:
        raise ParameterError("need 0 < b_lo < b_hi")
    if not tol > 0 or starts < 1:
        raise ParameterError("tol must be > 0 and starts >= 1")
    f = lambda b: sse(obs, b)  # noqa: E731
    edges = np.geomspace(b_lo, b_hi, starts + 1)
    best = None
    total_it = 0
    all_ok = True
    for lo, hi in zip(edges[:-1], edges[1:]):
        x, fx, it, ok = _golden(f, float(lo), float(hi), tol, max_iter)
        total_it += it
        all_ok &= ok
        if best is None or fx < best[1]:
            best = (x, fx)
    # also consider the bracket ends so a monotone SSE reports its boundary
    for x in (b_lo, b_hi):
        fx = f(x)
        if fx < best[1]:
            best = (x, fx)
    if not all_ok:
        raise CalibrationError("golden-section search did not converge", best[0], best[1], total_it)
    b_hat, s = best
    at_boundary = b_hat - b_lo <= 10 * tol or b_hi - b_hat <= 10 * tol
    return FitResult(float(b_hat), float(s), total_it, True, bool(at_boundary))


# --- CSV ingestion ----------------------------------------------------------

def read_observations(path, kind: str | None = None) -> tuple[ObservationSet, list[str]]:
    """Read ``year,default_rate,recovery_rate`` (or ``loss_rate``) CSV.

    ``year`` and ``weight`` columns are optional.  Lines starting with ``#``
    are comments.  Rows with a default rate outside (0, 1) are skipped with
    a :class:`RejectedRowWarning`; malformed rows raise :class:`IngestionError`.
    Returns the observations and the list of row labels (year or line number).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_observations(fh, kind)


def parse_observations(lines, kind: str | None = None):
    numbered = [(i, ln) for i, ln in enumerate(lines, start=1)
                if ln.strip() and not ln.lstrip().startswith("#")]
    if not numbered:
        raise IngestionError("no header", 1)
    hdr_line, hdr = numbered[0]
    header = [h.strip() for h in next(csv.reader([hdr]))]
    if "default_rate" not in header:
        raise IngestionError("header needs a default_rate column", hdr_line)
    value_col = None
    for col, k in (("recovery_rate", "recovery"), ("loss_rate", "loss")):
        if col in header and (kind is None or kind == k):
            value_col, vkind = col, k
            break
    if value_col is None:
        raise IngestionError("header needs a recovery_rate or loss_rate column", hdr_line)
    ip = header.index("default_rate")
    iv = header.index(value_col)
    iy = header.index("year") if "year" in header else None
    iw = header.index("weight") if "weight" in header else None
    pds, vals, ws, labels = [], [], [], []
    for lineno, ln in numbered[1:]:
        row = next(csv.reader([ln]))
        if len(row) != len(header):
            raise IngestionError(f"expected {len(header)} fields, got {len(row)}", lineno)
        try:
            p = float(row[ip])
            v = float(row[iv])
            w = float(row[iw]) if iw is not None else 1.0
        except ValueError as exc:
            raise IngestionError(f"not a number ({exc})", lineno) from None
        if not (math.isfinite(v) and 0 <= v <= 1):
            raise IngestionError(f"{value_col} {v!r} outside [0, 1]", lineno)
        if not (math.isfinite(w) and w >= 0):
            raise IngestionError(f"weight {w!r} must be >= 0", lineno)
        if not 0 < p < 1:
            warnings.warn(f"line {lineno}: default_rate {p!r} outside (0, 1), row skipped",
                          RejectedRowWarning, stacklevel=2)
            continue
        pds.append(p)
        vals.append(v)
        ws.append(w)
        labels.append(row[iy].strip() if iy is not None else str(lineno))
    if not pds:
        raise IngestionError("no usable rows", numbered[-1][0])
    obs = ObservationSet(np.array(pds), np.array(vals), (vkind,) * len(pds),
                         np.array(ws) if iw is not None else None, tuple(labels))
    return obs, labels
