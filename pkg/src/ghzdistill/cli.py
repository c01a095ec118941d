"""Command-line front end: ``ghzdistill {rates,region,simulate,examples}``.

Exit codes: 0 success, 2 bad input (one-line diagnostic on stderr),
3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import binning_sim, rates
from .measurement import InstrumentError, LocalInstrument, apply_instruments, measure_joint
from .quantum_core import CapacityError, JointPmf, marginal_entropy, shannon_entropy
from .rate_region import build_region_classical, build_region_cq, minimize_sum
from .states_io import (
    SchemaError,
    build_named_state,
    flower_instruments,
    flower_residual_bases,
    load_instruments,
    load_pmf,
    load_state,
)

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT = 0, 2, 3


class InputError(Exception):
    pass


class InvariantError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


# --- input resolution --------------------------------------------------------

def resolve_state(spec: str):
    """Named state (w3, antisym3, epr, ghzN, flowerN) or a path to a state file."""
    try:
        return build_named_state(spec)
    except ValueError:
        pass
    path = Path(spec)
    if not path.is_file():
        raise InputError(f"unknown state {spec!r} (not a known name or an existing file)")
    return load_state(path)


_PMF_NAME = re.compile(r"^(deterministic|fairbits)(?:\(?(\d+)\)?)?$")


def resolve_pmf(spec: str) -> JointPmf:
    """Pmf file, ``deterministic[N]``, ``fairbits[N]``, or a state name (computational outcomes)."""
    match = _PMF_NAME.match(spec.strip().lower())
    if match:
        kind, digits = match.groups()
        m = int(digits) if digits else 2
        if m < 1:
            raise InputError(f"pmf {spec!r} needs at least one party")
        if kind == "deterministic":
            return JointPmf(np.ones((1,) * m))
        return JointPmf(np.full((2,) * m, 0.5 ** m))
    path = Path(spec)
    if path.is_file():
        return load_pmf(path)
    try:
        return measure_joint(build_named_state(spec))
    except ValueError:
        raise InputError(f"unknown pmf {spec!r} (not a known name or an existing file)") from None


def parse_rates(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(t) for t in text.split(","))
    except ValueError:
        raise InputError(f"malformed rates {text!r}: expected comma-separated numbers") from None
    if not vals or any(not math.isfinite(v) or v < 0 for v in vals):
        raise InputError(f"malformed rates {text!r}: need finite nonnegative values")
    return vals


def _instruments(args, psi):
    if args.instr:
        if not Path(args.instr).is_file():
            raise InputError(f"instrument file {args.instr!r} not found")
        ins = load_instruments(args.instr, dims=psi.dims)
        if len(ins) != psi.m:
            raise InputError(f"{len(ins)} instruments for {psi.m} parties")
        return ins
    return None


def _write_outputs(prefix, payloads: dict) -> None:
    if not prefix:
        return
    base = Path(prefix)
    if base.suffix in {f".{ext}" for ext in payloads}:
        base = base.with_suffix("")
    for ext, text in payloads.items():
        Path(f"{base}.{ext}").write_text(text, encoding="utf-8")


def _dumps(obj) -> str:
    return json.dumps(rates._jsonable(obj), indent=2, sort_keys=True) + "\n"


# --- subcommands ---------------------------------------------------------------

def build_rate_report(psi, state_id, instruments=None, optimize=False, restarts=3, seed=0):
    rep = rates.RateReport(state_id)
    value, wit = rates.combing_rate(psi, return_witness=True)
    rep.add("combing", value, {"party": wit[0], "cut": list(wit[1])})
    p = measure_joint(psi)
    vc, sol = rates.ghz_rate_vc(psi, return_solution=True)
    rep.add("omniscience_rate", sol.objective, sol, "R_CO, computational bases")
    rep.add("vc", vc, None, "computational bases")
    rep.add("joint_entropy", p.entropy(), None, "H(X), computational bases")
    if optimize:
        params, best = rates.optimize_bases(psi, "ghz_rate_vc", restarts=restarts, seed=seed)
        rep.add("vc_optimized", best, params, f"local search, restarts={restarts} seed={seed}")
    if instruments is not None:
        rep.add("cr_classical", rates.cr_rate_classical(psi, instruments), None, "given instruments")
        rep.add("cr_cq", rates.cr_rate_cq(psi, instruments), None, "given instruments")
        try:
            res = rates.ghz_rate_cq(psi, instruments)
            rep.add("cq_ghz", res.value, res, "pure instruments")
        except ValueError as exc:
            rep.add("cq_ghz", None, None, f"undefined: {exc}")
    if psi.m == 3:
        svw = rates.svw_rate(psi, party=0)
        rep.add("chi", svw.chi, svw, "party 0 measured in computational basis")
        rep.add("ebar", svw.ebar, None, "average residual entanglement")
        rep.add("svw_fused", svw.fused_total, None, "chi + ebar/2" if svw.pairable else "not pairable")
    ub, arg = rates.entropy_upper_bound(psi)
    rep.add("entropy_upper_bound", ub, list(arg), f"witness {list(arg)}")
    for i, j in itertools.combinations(range(psi.m), 2):
        val, cut = rates.epr_capacity(psi, i, j, return_witness=True)
        rep.add(f"epr_{i}_{j}", val, list(cut))
    return rep


def cmd_rates(args) -> int:
    psi = resolve_state(args.state)
    instruments = _instruments(args, psi)
    rep = build_rate_report(psi, args.state, instruments, args.optimize, args.restarts, args.seed)
    bad = rep.check_ordering()
    if bad:
        raise InvariantError(f"achievable rates exceed the entropy upper bound: {', '.join(bad)}")
    table = rep.to_table()
    sys.stdout.write(table)
    _write_outputs(args.out, {"json": rep.to_json(), "txt": table})
    return EXIT_OK


def _region_table(title, region, sol, h) -> str:
    lines = [title, f"{'decoder':>9}  {'subset':<16}  {'bound':>10}"]
    for c in region.constraints:
        lines.append(f"{str(c.decoder):>9}  {str(list(c.subset)):<16}  {c.bound:>10.6f}")
    lines.append("minimizing vertex: " + ", ".join(f"{r:.6f}" for r in sol.rates))
    lines.append(f"min total rate:    {sol.objective:.6f}")
    lines.append(f"joint entropy:     {h:.6f}")
    lines.append(f"cr rate:           {h - sol.objective:.6f}")
    return "\n".join(lines) + "\n"


def cmd_region(args) -> int:
    if (args.state is None) == (args.pmf is None):
        raise InputError("region: give exactly one of --state or --pmf")
    if args.mode == "cq":
        if args.state is None or not args.instr:
            raise InputError("region: --mode cq needs --state and --instr")
        psi = resolve_state(args.state)
        omega = apply_instruments(psi, _instruments(args, psi))
        region, h = build_region_cq(omega), omega.pmf.entropy()
        source = args.state
    else:
        if args.pmf is not None:
            p, source = resolve_pmf(args.pmf), args.pmf
        else:
            psi = resolve_state(args.state)
            p, source = measure_joint(psi, _instruments(args, psi)), args.state
        region, h = build_region_classical(p), p.entropy()
    sol = minimize_sum(region)
    doc = {"source": source, "mode": args.mode, "constraints": region.to_dict(),
           "solution": sol.to_dict(), "joint_entropy": h, "cr_rate": h - sol.objective}
    table = _region_table(f"{args.mode} region: {source}", region, sol, h)
    sys.stdout.write(table)
    _write_outputs(args.out, {"json": _dumps(doc), "txt": table})
    return EXIT_OK


def cmd_simulate(args) -> int:
    p = resolve_pmf(args.pmf)
    r = parse_rates(args.rates)
    if len(r) != p.m:
        raise InputError(f"{len(r)} rates given for a {p.m}-party pmf")
    try:
        cfg = binning_sim.SimConfig(p, r, args.n, args.trials, args.delta, args.seed, pmf_id=args.pmf)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    result = binning_sim.run_omniscience(cfg)
    csv_text = binning_sim.results_to_csv([result])
    sys.stdout.write(csv_text)
    _write_outputs(args.out, {"csv": csv_text, "json": result.to_json()})
    return EXIT_OK


# --- examples ----------------------------------------------------------------

def example_rows() -> list[dict]:
    """Recompute every reproduced number; each row carries its expected value and tolerance."""
    rows = []

    def row(name, value, expected, tol):
        rows.append({"name": name, "value": float(value), "expected": float(expected), "tol": tol,
                     "ok": bool(abs(value - expected) <= tol)})

    log3 = math.log2(3)
    h23 = -(2 / 3) * math.log2(2 / 3) - (1 / 3) * math.log2(1 / 3)
    targets = {
        "w3": {"marginal": h23, "h_1_given_23": 0.0, "h_12_given_3": 2 / 3, "r_co": 1.0,
               "vc": log3 - 1, "combing": h23 / 2, "chi": log3 - 4 / 3, "ebar": 2 / 3,
               "fused": log3 - 1, "upper": h23},
        "antisym3": {"marginal": log3, "h_1_given_23": 0.0, "h_12_given_3": 1.0, "r_co": 1.5,
                     "vc": log3 - 0.5, "combing": log3 / 2, "chi": log3 - 1, "ebar": 1.0,
                     "fused": log3 - 0.5, "upper": log3},
    }
    for name, t in targets.items():
        psi = build_named_state(name)
        p = measure_joint(psi)
        support = p.probs[p.probs > 0]
        row(f"{name}.pmf_uniform_dev", np.max(np.abs(support - 1 / len(support))), 0.0, 1e-12)
        row(f"{name}.marginal_entropy", marginal_entropy(psi, [0]), t["marginal"], 1e-9)
        row(f"{name}.H(X0|X1X2)", shannon_entropy(p, [0], [1, 2]), t["h_1_given_23"], 1e-9)
        row(f"{name}.H(X0X1|X2)", shannon_entropy(p, [0, 1], [2]), t["h_12_given_3"], 1e-9)
        vc, sol = rates.ghz_rate_vc(psi, return_solution=True)
        row(f"{name}.R_CO", sol.objective, t["r_co"], 1e-9)
        row(f"{name}.R_VC", vc, t["vc"], 1e-9)
        row(f"{name}.R_comb", rates.combing_rate(psi), t["combing"], 1e-6)
        svw = rates.svw_rate(psi, 0)
        row(f"{name}.chi", svw.chi, t["chi"], 1e-6)
        row(f"{name}.ebar", svw.ebar, t["ebar"], 1e-9)
        row(f"{name}.fused_total", svw.fused_total if svw.fused_total is not None else math.nan, t["fused"], 1e-6)
        row(f"{name}.upper_bound", rates.entropy_upper_bound(psi)[0], t["upper"], 1e-9)
    row("w3.post_omniscience_yield", rates.ghz_type_rate(build_named_state("w3"), post_omniscience=True).rate, log3, 1e-9)
    for m in (3, 4, 5):
        psi = build_named_state(f"ghz{m}")
        row(f"ghz{m}.R_comb", rates.combing_rate(psi), 1 / (m - 1), 1e-9)
        row(f"ghz{m}.upper_bound", rates.entropy_upper_bound(psi)[0], 1.0, 1e-9)

    d = 4
    flower = build_named_state(f"flower{d}")
    ub, wit = rates.entropy_upper_bound(flower)
    row("flower4.upper_bound", ub, 2.0, 1e-8)
    row("flower4.upper_bound_witness_is_C", float(wit == (2,)), 1.0, 0.0)
    res = rates.ghz_rate_cq(flower, flower_instruments(d))
    row("flower4.cq_ghz_value", res.value, 0.0, 1e-8)
    omega = apply_instruments(flower, flower_instruments(d))
    region = build_region_cq(omega)
    binding = next(c for c in region.constraints if c.subset == (1,))
    row("flower4.R_B_bound", binding.bound, 1.0, 1e-8)
    row("flower4.R_B_bound_from_C", float(binding.decoder == 2), 1.0, 0.0)
    for x, state in sorted(res.residuals.items()):
        j = x[1]
        g = rates.ghz_type_rate(state, flower_residual_bases(d, j))
        row(f"flower4.residual_j{j}_ghz_rate", g.rate if g.is_ghz_type else math.nan, 2.0, 1e-8)
    worst = -math.inf
    for s in range(50):
        u = rates.random_unitary(d, np.random.default_rng(s))
        worst = max(worst, rates.cr_rate_classical(flower, ["computational", "computational", LocalInstrument.in_basis(2, u)]))
    row("flower4.max_cr_over_50_C_bases_le_1", float(worst <= 1.0 + 1e-6), 1.0, 0.0)
    return rows


def cmd_examples(args) -> int:
    start = time.perf_counter()
    rows = example_rows()
    elapsed = time.perf_counter() - start
    width = max(len(r["name"]) for r in rows)
    lines = [f"{'quantity':<{width}}  {'computed':>10}  {'expected':>10}  {'tol':>7}  status"]
    for r in rows:
        lines.append(f"{r['name']:<{width}}  {r['value']:>10.6f}  {r['expected']:>10.6f}  {r['tol']:>7.0e}  "
                     + ("ok" if r["ok"] else "MISMATCH"))
    failed = [r["name"] for r in rows if not r["ok"]]
    lines.append(f"{len(rows) - len(failed)}/{len(rows)} match")
    table = "\n".join(lines) + "\n"
    sys.stdout.write(table)
    _write_outputs(args.out, {"json": _dumps({"rows": rows}), "txt": table})
    if args.verbose:
        sys.stderr.write(f"computed in {elapsed:.2f} s\n")
    if failed:
        raise InvariantError(f"{len(failed)} reproduced values out of tolerance: {', '.join(failed)}")
    return EXIT_OK


# --- entry point ---------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ghzdistill", description="GHZ distillation and common-randomness rate calculator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rates", help="achievable rates and bounds for a pure state")
    p.add_argument("--state", required=True, help="state name (w3, antisym3, epr, ghzN, flowerN) or state file")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--instr", help="instrument file")
    g.add_argument("--measure", choices=["computational"], help="measure all parties in the computational basis")
    p.add_argument("--optimize", action="store_true", help="also search measurement bases for the VC rate")
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output prefix; writes PREFIX.json and PREFIX.txt")
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("region", help="omniscience rate region and its minimum total rate")
    p.add_argument("--state", help="state name or state file")
    p.add_argument("--pmf", help="pmf file or name (classical mode only)")
    p.add_argument("--mode", choices=["classical", "cq"], default="classical")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--instr", help="instrument file")
    g.add_argument("--measure", choices=["computational"])
    p.add_argument("--out", help="output prefix; writes PREFIX.json and PREFIX.txt")
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("simulate", help="random-binning omniscience simulation")
    p.add_argument("--pmf", required=True, help="pmf file, deterministic[N], fairbits[N] or a state name")
    p.add_argument("--rates", required=True, help="comma-separated per-party rates in bits/symbol")
    p.add_argument("--n", type=int, required=True, help="block length")
    p.add_argument("--trials", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta", type=float, default=binning_sim.DEFAULT_DELTA)
    p.add_argument("--out", help="output prefix; writes PREFIX.csv and PREFIX.json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("examples", help="recompute the reference example values and check them")
    p.add_argument("--out", help="output prefix; writes PREFIX.json and PREFIX.txt")
    p.add_argument("--verbose", action="store_true", help="report timing on stderr")
    p.set_defaults(func=cmd_examples)
    return parser


def main(argv=None) -> int:
    try:
        args = make_parser().parse_args(argv)
        return args.func(args)
    except InvariantError as exc:
        print(f"ghzdistill: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (InputError, SchemaError, InstrumentError, CapacityError, ValueError, IndexError, OSError) as exc:
        msg = " ".join(str(exc).split())
        print(msg if msg.startswith("ghzdistill") else f"ghzdistill: error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
