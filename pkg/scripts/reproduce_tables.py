"""Print the three risk tables (analytic and simulated columns).

    python3 scripts/reproduce_tables.py --realizations 100000 --out-dir runs

Each process is run through the ``simulate`` command, so the per-run files
stay in ``<out-dir>/<process>`` for plotting.
"""
import argparse
import os
import sys

from mertonrr import cli
from mertonrr.riskmeasures import RiskReport


def reports(path):
    body = open(path, encoding="utf-8").read().split("\n", 1)[1]
    return {r.method: r for r in (RiskReport.from_text(b) for b in body.strip().split("\n\n")
                                  if b.startswith("method"))}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--realizations", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=20240101)
    ap.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--out-dir", default="runs")
    args = ap.parse_args()

    rows = []
    for process in ("diffusion", "jump-diffusion", "garch"):
        out = os.path.join(args.out_dir, process)
        code = cli.main(["simulate", "--process", process, "--realizations", str(args.realizations),
                         "--seed", str(args.seed), "--threads", str(args.threads), "--quiet",
                         "--out-dir", out])
        if code:
            sys.exit(code)
        for method, r in sorted(reports(os.path.join(out, "simulation_report.txt")).items()):
            rows.append((process, method, r.expected_loss, r.var, r.etl))

    print(f"{'process':<15}{'method':<24}{'EL':>12}{'VaR_0.99':>12}{'ETL_0.99':>12}")
    for p, m, el, var, etl in rows:
        print(f"{p:<15}{m:<24}{el:>12.4e}{var:>12.4e}{etl:>12.4e}")


if __name__ == "__main__":
    main()
