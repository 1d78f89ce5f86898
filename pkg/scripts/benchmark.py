"""Throughput of the Monte Carlo kernel.

    python3 scripts/benchmark.py --realizations 2000 --threads 1 2 4
"""
import argparse
import time

from mertonrr.model import ContractSpec, DiffusionParams, GarchParams, JumpParams, ProcessParams
from mertonrr.montecarlo import SimulationConfig, run_simulation


def params(process, contract):
    d = DiffusionParams()
    if process == "jump-diffusion":
        return ProcessParams(process, d, jumps=JumpParams())
    if process == "garch":
        return ProcessParams(process, d, garch=GarchParams.default(d.sigma, contract.dt))
    return ProcessParams(process, d)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--realizations", type=int, default=2000)
    ap.add_argument("--portfolio-size", type=int, default=500)
    ap.add_argument("--steps", type=int, default=250)
    ap.add_argument("--threads", type=int, nargs="+", default=[1])
    args = ap.parse_args()
    c = ContractSpec(steps=args.steps)
    # compile outside the timed region
    run_simulation(SimulationConfig(params("garch", c), c, 2, 2))
    firm_steps = args.realizations * args.portfolio_size * args.steps
    for process in ("diffusion", "jump-diffusion", "garch"):
        for t in args.threads:
            cfg = SimulationConfig(params(process, c), c, args.portfolio_size, args.realizations,
                                   seed=1, threads=t)
            t0 = time.perf_counter()
            run_simulation(cfg)
            dt = time.perf_counter() - t0
            print(f"{process:<15} threads={t:<3} {dt:7.2f} s  "
                  f"{dt / args.realizations * 1e3:6.2f} ms/realization  "
                  f"{firm_steps / dt / 1e6:6.1f} M firm-steps/s  "
                  f"M=1e5 est. {dt / args.realizations * 1e5 / 60:5.1f} min")


if __name__ == "__main__":
    main()
