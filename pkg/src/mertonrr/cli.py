"""Command-line front end.

Subcommands
-----------
analytic   closed-form risk report and the analytic curves
simulate   Monte Carlo run: outcomes, histograms, binned curves, risk report
calibrate  fit B to a default-rate/recovery-rate CSV
curves     structural recovery and loss curves for a list of B values
report     risk report recomputed from a saved outcomes CSV

Settings come from built-in defaults, then an optional ``--config`` file of
``key = value`` lines, then command-line flags.  Every CSV starts with a
``# config:`` line echoing the settings that determine its contents.

Exit codes: 0 success, 2 configuration/input error, 3 numeric failure,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import analytics as an
from . import calibration as cal
from . import montecarlo as mc
from . import riskmeasures as rm
from .model import (ContractSpec, DiffusionParams, GarchParams, JumpParams, ParameterError,
                    ProcessParams, PROCESSES)
from .numerics import DomainError, QuadratureError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

DEFAULT_B_SWEEP = (0.1, 0.2, 0.3, 0.4, 0.5)

# key: (type, default); keys double as --flag names with '_' -> '-'
SETTINGS = {
    "process": (str, "diffusion"),
    "v0": (float, 100.0),
    "face": (float, 75.0),
    "maturity": (float, 1.0),
    "steps": (int, 250),
    "mu": (float, 0.05),
    "sigma": (float, 0.15),
    "corr": (float, 0.5),
    "lambda": (float, 0.005),
    "jump_mu": (float, 0.4),
    "jump_sigma": (float, 0.3),
    "garch_a0": (float, None),
    "garch_a1": (float, 0.05),
    "garch_b1": (float, 0.90),
    "portfolio_size": (int, 500),
    "realizations": (int, 100_000),
    "seed": (int, 20240101),
    "alpha": (float, 0.01),
    "out_dir": (str, "."),
    "threads": (int, None),
}
# scheduling and location only; never echoed into output headers
NOT_ECHOED = {"out_dir", "threads"}


class ConfigError(ValueError):
    pass


class OutputError(OSError):
    def __init__(self, message, written):
        super().__init__(f"{message}; completed files: {', '.join(written) or 'none'}")
        self.written = written


def _parse_int(s):
    v = float(s)
    if v != int(v):
        raise ValueError(f"{s!r} is not an integer")
    return int(v)


def _convert(key, raw):
    typ = SETTINGS[key][0]
    try:
        return _parse_int(raw) if typ is int else typ(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None


def read_config_file(path) -> dict:
    """``key = value`` lines (an optional ``[run]`` section header is allowed)."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config file {path}: {exc}") from None
    out = {}
    for section in cp.sections():
        for k, v in cp.items(section):
            key = k.replace("-", "_")
            if key not in SETTINGS:
                raise ConfigError(f"config file {path}: unknown key {k!r}")
            out[key] = _convert(key, v)
    return out


@dataclass(frozen=True)
class RunConfig:
    settings: dict

    def __getattr__(self, name):
        try:
            return self.settings[name]
        except KeyError:
            raise AttributeError(name) from None

    @property
    def contract(self) -> ContractSpec:
        return ContractSpec(self.v0, self.face, self.maturity, self.steps)

    @property
    def diffusion(self) -> DiffusionParams:
        return DiffusionParams(self.mu, self.sigma, self.corr)

    def garch(self) -> GarchParams:
        dt = self.contract.dt
        g = GarchParams.default(self.sigma, dt, self.garch_a1, self.garch_b1)
        if self.garch_a0 is not None:
            g = GarchParams(self.garch_a0, self.garch_a1, self.garch_b1, g.initial_vol)
        return g

    @property
    def params(self) -> ProcessParams:
        p = self.process
        if p == "jump-diffusion":
            return ProcessParams(p, self.diffusion,
                                 jumps=JumpParams(self.settings["lambda"], self.jump_mu,
                                                  self.jump_sigma))
        if p == "garch":
            return ProcessParams(p, self.diffusion, garch=self.garch())
        return ProcessParams(p, self.diffusion)

    def echo(self, extra: dict | None = None) -> str:
        items = {k: v for k, v in self.settings.items() if k not in NOT_ECHOED}
        items.update(extra or {})
        return "# config: " + " ".join(f"{k}={_fmt(v)}" for k, v in sorted(items.items()))


def build_config(ns: argparse.Namespace) -> RunConfig:
    settings = {k: d for k, (_, d) in SETTINGS.items()}
    if getattr(ns, "config", None):
        settings.update(read_config_file(ns.config))
    for k in SETTINGS:
        v = getattr(ns, k, None)
        if v is not None:
            settings[k] = v
    if settings["process"] not in PROCESSES:
        raise ConfigError(f"process must be one of {PROCESSES}")
    if settings["threads"] is None:
        settings["threads"] = os.cpu_count() or 1
    if settings["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    if not 0 < settings["alpha"] < 1:
        raise ConfigError("alpha must lie in (0, 1)")
    cfg = RunConfig(settings)
    cfg.contract, cfg.params  # validate eagerly
    return cfg


# --- output helpers ---------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class Outputs:
    """Tracks files written so an I/O failure can name what completed."""

    def __init__(self, out_dir):
        self.out_dir = out_dir
        self.written: list[str] = []
        try:
            os.makedirs(out_dir, exist_ok=True)
        except OSError as exc:
            raise OutputError(f"cannot create {out_dir}: {exc}", []) from None

    def path(self, name):
        return os.path.join(self.out_dir, name)

    def csv(self, name, echo, header, rows):
        try:
            with open(self.path(name), "w", newline="", encoding="utf-8") as fh:
                fh.write(echo + "\n")
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                for row in rows:
                    w.writerow([_fmt(v) for v in row])
        except OSError as exc:
            raise OutputError(f"writing {name} failed: {exc}", self.written) from None
        self.written.append(name)

    def text(self, name, echo, body):
        try:
            with open(self.path(name), "w", encoding="utf-8") as fh:
                fh.write(echo + "\n" + body)
        except OSError as exc:
            raise OutputError(f"writing {name} failed: {exc}", self.written) from None
        self.written.append(name)


LOSS_EDGES = np.geomspace(1e-6, 1.0, 61)


def _structural_rows(b_values, n=200):
    pd = np.geomspace(1e-4, 0.999, n)
    for b in b_values:
        rec = an.structural_recovery(pd, b)
        loss = an.structural_loss(pd, b)
        for p, r, l in zip(pd, rec, loss):
            yield (b, p, r, l)


def _xm_rows(cfg, b, n=400):
    law = an.MarketReturnLaw.from_params(cfg.diffusion, cfg.contract)
    x = law.quantile(np.linspace(1e-6, 1 - 1e-6, n))
    pd = an.default_prob_given_xm(x, cfg.contract, b)
    loss = an.expected_loss_given_xm(x, cfg.contract, b)
    return zip(x, pd, loss)


def _report_body(*reports, extra=()):
    parts = [r.to_text() for r in reports]
    if extra:
        parts.append("".join(f"{k} = {_fmt(v)}\n" for k, v in extra))
    return "\n".join(parts)


def _loss_pdf_rows(density: an.TabulatedDensity):
    for x, d in zip(density.x, density.density):
        yield (x, d)
    for loc, mass in density.atoms:
        yield (loc, f"atom:{_fmt(mass)}")


# --- subcommands ------------------------------------------------------------

def cmd_analytic(cfg: RunConfig, ns) -> int:
    c = cfg.contract
    b = an.compound_b(cfg.corr, cfg.sigma, cfg.maturity)
    law = an.MarketReturnLaw.from_params(cfg.diffusion, c)
    rep = rm.analytic_report(cfg.alpha, law, c, b)
    out = Outputs(cfg.out_dir)
    echo = cfg.echo({"b": b.b})
    out.text("analytic_report.txt", echo, _report_body(rep, extra=[("b", b.b)]))
    sweep = tuple(ns.b) if ns.b else DEFAULT_B_SWEEP
    out.csv("structural_curves.csv", cfg.echo({"b_sweep": ",".join(map(str, sweep))}),
            ("b", "pd", "recovery", "loss"), _structural_rows(sweep))
    out.csv("xm_curves.csv", echo, ("xm", "pd", "loss"), _xm_rows(cfg, b))
    out.csv("loss_pdf_analytic.csv", echo, ("loss", "density"),
            _loss_pdf_rows(an.loss_pdf_from_market(law, c, b)))
    print(rep.to_text(), end="")
    return EXIT_OK


def cmd_curves(cfg: RunConfig, ns) -> int:
    sweep = tuple(ns.b) if ns.b else DEFAULT_B_SWEEP
    out = Outputs(cfg.out_dir)
    out.csv("structural_curves.csv", "# config: b_sweep=" + ",".join(map(str, sweep)),
            ("b", "pd", "recovery", "loss"), _structural_rows(sweep))
    return EXIT_OK


def _fit_binned(curve: mc.BinnedCurve, lo=0.01, hi=0.5) -> cal.FitResult:
    keep = (curve.centers >= lo) & (curve.centers <= hi) & (curve.centers < 1)
    obs = cal.ObservationSet(curve.centers[keep], curve.means[keep], "recovery",
                             weight=curve.counts[keep].astype(float))
    return cal.fit_b(obs)


def simulation_reports(res: mc.SimulationResult, cfg: RunConfig):
    """Risk reports and fitted B for a finished run; also used by ``report``."""
    return _reports(res.x_m, res.pd_hat, res.loss_hat, res.recovery_hat, cfg)


def _reports(xm, pd, loss, rec, cfg):
    alpha = cfg.alpha
    reports = [rm.risk_empirical(alpha, loss)]
    extra = []
    rec_curve = mc.bin_curve(pd, rec, mc.pd_bins(cfg.portfolio_size))
    fit = None
    try:
        fit = _fit_binned(rec_curve)
        extra.append(("b_fitted", fit.b_hat))
    except ParameterError:
        pass  # no binned points in range
    if cfg.process in ("diffusion", "jump-diffusion") and cfg.corr < 1:
        b = an.compound_b(cfg.corr, cfg.sigma, cfg.maturity)
        extra.append(("b_model", b.b))
        reports.append(rm.risk_from_xm_samples(alpha, xm, cfg.contract, b))
        if cfg.process == "diffusion":
            law = an.MarketReturnLaw.from_params(cfg.diffusion, cfg.contract)
            reports.append(rm.analytic_report(alpha, law, cfg.contract, b))
    if fit is not None:
        reports.append(rm.risk_from_pd_samples(alpha, pd, fit.b_hat))
    return reports, extra, fit


def _binned_rows(res_cols, K):
    xm, pd, loss, rec = res_cols
    pdb = mc.pd_bins(K)
    finite = xm[np.isfinite(xm)]
    xb = np.linspace(finite.min(), finite.max(), 101) if finite.size and finite.min() < finite.max() \
        else np.array([finite.min() - 0.5, finite.min() + 0.5]) if finite.size else np.array([0.0, 1.0])
    for xname, yname, x, y, bins in (("pd_hat", "recovery_hat", pd, rec, pdb),
                                     ("pd_hat", "loss_hat", pd, loss, pdb),
                                     ("x_m", "pd_hat", xm, pd, xb),
                                     ("x_m", "loss_hat", xm, loss, xb)):
        cur = mc.bin_curve(x, y, bins)
        for cx, my, n in zip(cur.centers, cur.means, cur.counts):
            yield (xname, yname, cx, my, int(n))


def _hist_rows(h: mc.Histogram):
    for lo, hi, n, d in zip(h.edges[:-1], h.edges[1:], h.counts, h.density):
        yield (lo, hi, int(n), d)


def cmd_simulate(cfg: RunConfig, ns) -> int:
    sim_cfg = mc.SimulationConfig(cfg.params, cfg.contract, cfg.portfolio_size,
                                  cfg.realizations, cfg.seed, cfg.threads)
    out = Outputs(cfg.out_dir)
    echo = cfg.echo()
    quiet = getattr(ns, "quiet", False)
    last = [0.0]

    def progress(done, total):
        now = time.perf_counter()
        if not quiet and (now - last[0] > 5 or done == total):
            last[0] = now
            print(f"{done}/{total} realizations", file=sys.stderr)

    try:
        writer = mc.OutcomeWriter(out.path("outcomes.csv"), cfg.portfolio_size, [echo])
    except OSError as exc:
        raise OutputError(f"opening outcomes.csv failed: {exc}", out.written) from None
    try:
        with writer:
            res = mc.run_simulation(sim_cfg, progress=progress, sink=writer)
    except mc.SimulationError as exc:
        if isinstance(exc.__cause__, OSError):
            raise OutputError(str(exc), out.written) from None
        raise
    out.written.append("outcomes.csv")
    if not quiet:
        print(f"simulated {cfg.realizations} realizations in {res.elapsed_seconds:.1f} s "
              f"on {res.threads_used} thread(s)", file=sys.stderr)

    reports, extra, fit = simulation_reports(res, cfg)
    out.csv("loss_histogram.csv", echo, ("bin_lo", "bin_hi", "count", "density"),
            _hist_rows(mc.empirical_histogram(res.loss_hat, LOSS_EDGES, "total")))
    out.csv("pd_histogram.csv", echo, ("bin_lo", "bin_hi", "count", "density"),
            _hist_rows(mc.empirical_histogram(res.pd_hat, LOSS_EDGES, "total")))
    out.csv("binned_curves.csv", echo, ("x_axis", "y_axis", "center", "mean", "count"),
            _binned_rows((res.x_m, res.pd_hat, res.loss_hat, res.recovery_hat),
                         cfg.portfolio_size))
    # transformed analytic pdf for overlay on the histogram
    if cfg.process == "garch":
        if fit is not None:
            out.csv("loss_pdf_transformed.csv", cfg.echo({"b": fit.b_hat}), ("loss", "density"),
                    _loss_pdf_rows(an.loss_pdf_from_pd(res.pd_hat, fit.b_hat)))
    elif cfg.corr < 1:
        b = an.compound_b(cfg.corr, cfg.sigma, cfg.maturity)
        law = an.MarketReturnLaw.from_params(cfg.diffusion, cfg.contract)
        out.csv("loss_pdf_transformed.csv", cfg.echo({"b": b.b}), ("loss", "density"),
                _loss_pdf_rows(an.loss_pdf_from_market(law, cfg.contract, b)))
    out.text("simulation_report.txt", echo, _report_body(*reports, extra=extra))
    for r in reports:
        print(r.to_text())
    return EXIT_OK


def cmd_report(cfg: RunConfig, ns) -> int:
    if not ns.input:
        raise ConfigError("report needs --input OUTCOMES_CSV")
    try:
        cols = mc.read_outcomes(ns.input)
    except OSError as exc:
        raise OutputError(f"reading {ns.input} failed: {exc}", []) from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    K = cfg.portfolio_size
    reports, extra, _ = _reports(cols["x_m"], cols["n_default"] / K, cols["loss_hat"],
                                 cols["recovery_hat"], cfg)
    body = _report_body(*reports, extra=extra)
    out = Outputs(cfg.out_dir)
    out.text("report.txt", cfg.echo({"input": os.path.basename(ns.input)}), body)
    print(body, end="")
    return EXIT_OK


def cmd_calibrate(cfg: RunConfig, ns) -> int:
    if not ns.input:
        raise ConfigError("calibrate needs --input CSV")
    try:
        obs, _ = cal.read_observations(ns.input, ns.kind)
    except OSError as exc:
        raise OutputError(f"reading {ns.input} failed: {exc}", []) from None
    fit = cal.fit_b(obs, ns.b_lo, ns.b_hi, ns.tol)
    out = Outputs(cfg.out_dir)
    echo = (f"# config: input={os.path.basename(ns.input)} kind={obs.kind[0]} "
            f"b_lo={_fmt(ns.b_lo)} b_hi={_fmt(ns.b_hi)} tol={_fmt(ns.tol)}")
    out.text("fit_report.txt", echo, fit.to_text())
    pd = np.geomspace(obs.pd.min(), obs.pd.max(), 200) if obs.pd.min() < obs.pd.max() \
        else obs.pd[:1]
    out.csv("fitted_curve.csv", echo + f" b_hat={_fmt(fit.b_hat)}", ("pd", "recovery", "loss"),
            zip(pd, an.structural_recovery(pd, fit.b_hat), an.structural_loss(pd, fit.b_hat)))
    out.csv("fit_residuals.csv", echo, ("label", "pd", "value", "model", "residual"),
            zip(obs.label, obs.pd, obs.value, obs.model(fit.b_hat), cal.residuals(obs, fit.b_hat)))
    if fit.at_boundary:
        print("warning: minimum at the search-interval boundary", file=sys.stderr)
    print(fit.to_text(), end="")
    return EXIT_OK


COMMANDS = {"analytic": cmd_analytic, "simulate": cmd_simulate, "calibrate": cmd_calibrate,
            "curves": cmd_curves, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run settings")
    g.add_argument("--config", help="key = value settings file (flags override it)")
    g.add_argument("--process", choices=PROCESSES)
    for key, (typ, default) in SETTINGS.items():
        if key == "process":
            continue
        flag = "--" + key.replace("_", "-")
        g.add_argument(flag, dest=key, type=_parse_int if typ is int else typ,
                       help=f"default: {default if default is not None else 'derived'}")
    p = argparse.ArgumentParser(prog="mertonrr", description="Merton-model credit risk engine")
    sub = p.add_subparsers(dest="command", required=True)
    a = sub.add_parser("analytic", parents=[common], help="closed-form diffusion results")
    a.add_argument("--b", type=float, action="append", help="B values for the structural curves")
    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo run")
    s.add_argument("--quiet", action="store_true")
    c = sub.add_parser("calibrate", parents=[common], help="fit B to observed data")
    c.add_argument("--input", required=False)
    c.add_argument("--kind", choices=cal.KINDS)
    c.add_argument("--b-lo", type=float, default=1e-3)
    c.add_argument("--b-hi", type=float, default=10.0)
    c.add_argument("--tol", type=float, default=1e-8)
    cu = sub.add_parser("curves", parents=[common], help="structural curves for a B sweep")
    cu.add_argument("--b", type=float, action="append")
    r = sub.add_parser("report", parents=[common], help="risk report from an outcomes CSV")
    r.add_argument("--input")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = build_config(ns)
        return COMMANDS[ns.command](cfg, ns)
    except (ConfigError, ParameterError, DomainError, an.DegenerateError,
            cal.IngestionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (QuadratureError, cal.CalibrationError, an.GridError, an.UndefinedLGDError,
            rm.InsufficientSamplesError, mc.SimulationError, ArithmeticError,
            FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
