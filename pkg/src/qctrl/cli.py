"""Command-line front end: check | synth | simulate | bounds | lie-rank |
model | sweep.

Machine-first output: JSON reports on stdout or to files, controls and
trajectories as CSV with a header row.  Exit codes: 0 ok, 2 hypothesis
failure, 3 synthesis failure, 4 I/O or usage error.  The environment
variable QCTRL_GAP_TOL overrides the gap tolerance.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import liealg, models, propagate, spectra, synthesis
from .errors import (NotConnected, NotFoundWithin, QctrlError,
                     SpecValidationError)

EXIT_OK = 0
EXIT_HYPOTHESIS = 2
EXIT_SYNTHESIS = 3
EXIT_IO = 4


def _gap_tol(args) -> float:
    if getattr(args, "gap_tol", None) is not None:
        return args.gap_tol
    env = os.environ.get("QCTRL_GAP_TOL")
    return float(env) if env else spectra.DEFAULT_GAP_TOL


def _load_spec(path: str) -> spectra.SystemSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return spectra.SystemSpec.from_json(fh.read())
    except OSError as exc:
        raise _IOFailure(f"cannot read spec {path}: {exc}") from exc
    except (ValueError, KeyError) as exc:
        raise _IOFailure(f"malformed spec {path}: {exc}") from exc


class _IOFailure(Exception):
    pass


def _emit(payload: dict, out_path: str | None):
    text = json.dumps(payload, indent=2)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _write(path: str, text: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def cmd_model(args) -> int:
    if args.kind == "well":
        spec = models.infinite_well(models.WellParams(N=args.N, eta=args.eta))
    elif args.kind == "molecule":
        spec = models.planar_molecule(models.MoleculeParams(
            N=args.N, alpha=args.alpha, parity=args.parity))
    elif args.kind == "ex4":
        spec = models.example_4x4()
    else:
        raise _IOFailure(f"unknown model {args.kind}")
    if args.out:
        _write(args.out, spec.to_json() + "\n")
    else:
        print(spec.to_json())
    return EXIT_OK


def cmd_check(args) -> int:
    spec = _load_spec(args.spec)
    gap_tol = _gap_tol(args)
    report = {"levels": spec.size}
    degenerate = spectra.check_degenerate_decoupling(spec)
    report["degenerate_coupled"] = [list(p) for p in degenerate]
    try:
        chain = spectra.find_chain(spec)
    except NotConnected as exc:
        report["connected"] = False
        report["components"] = [list(c) for c in exc.components]
        _emit(report, args.out)
        return EXIT_HYPOTHESIS
    chain = spectra.check_nonresonant(spec, chain, gap_tol=gap_tol)
    sigma = spectra.reorder_basis(spec, chain)
    report.update({
        "connected": True,
        "chain_edges": [list(e) for e in chain.unordered_edges()],
        "chain_gaps": [abs(spec.lam[j - 1] - spec.lam[k - 1])
                       for j, k in chain.unordered_edges()],
        "nonresonant": chain.certified_nonresonant,
        "violations": [[list(a), list(b)] for a, b in chain.violations],
        "reorder": list(sigma),
    })
    _emit(report, args.out)
    ok = not degenerate and chain.certified_nonresonant
    return EXIT_OK if ok else EXIT_HYPOTHESIS


def cmd_lie_rank(args) -> int:
    spec = _load_spec(args.spec)
    if not args.allow_degenerate_coupling:
        bad = spectra.check_degenerate_decoupling(spec)
        if bad:
            _emit({"error": "degenerate levels directly coupled",
                   "pairs": [list(p) for p in bad]}, args.out)
            return EXIT_HYPOTHESIS
    pair = propagate.galerkin(spec, spec.size)
    dim, verdict = liealg.lie_rank(pair)
    _emit({"dimension": dim, "verdict": verdict,
           "generators_found": dim}, args.out)
    return EXIT_OK if verdict in ("SU", "U") else EXIT_HYPOTHESIS


def _certified_chain(spec, gap_tol):
    chain = spectra.find_chain(spec)
    chain = spectra.check_nonresonant(spec, chain, gap_tol=gap_tol)
    if not chain.certified_nonresonant:
        raise SpecValidationError(
            f"chain not certified non-resonant: {chain.violations}")
    return chain


def cmd_synth(args) -> int:
    spec = _load_spec(args.spec)
    gap_tol = _gap_tol(args)
    N = args.N if args.N else spec.size
    params = synthesis.SynthesisParams(eta=args.eta, N=N,
                                       delta_bar=args.delta_bar)
    chain = _certified_chain(spec, gap_tol)
    if args.perm:
        sigma = [int(x) for x in args.perm.split(",")]
        control, report = synthesis.synth_permutation(
            spec, chain, sigma, params, gap_tol=gap_tol)
    else:
        if args.source is None or args.target is None:
            raise _IOFailure("need --from/--to or --perm")
        control, report = synthesis.synth_transfer(
            spec, chain, args.source, args.target, params, gap_tol=gap_tol)
    if args.out_control:
        _write(args.out_control, control.to_csv())
    payload = report.to_dict()
    payload["control_steps"] = len(control)
    slack = (report.l1_realized / report.l1_upper - 1.0) \
        if report.l1_upper > 0 else 0.0
    payload["l1_upper_slack"] = max(0.0, slack)
    _emit(payload, args.out_report)
    return EXIT_OK


def _parse_state(text: str, N: int) -> np.ndarray:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if len(parts) == 1 and parts[0].isdigit():
        idx = int(parts[0])
        if not 1 <= idx <= N:
            raise _IOFailure(f"basis index {idx} outside 1..{N}")
        psi = np.zeros(N, dtype=complex)
        psi[idx - 1] = 1.0
        return psi
    if len(parts) != N:
        raise _IOFailure(f"state needs {N} components, got {len(parts)}")
    psi = np.array([complex(p) for p in parts])
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise _IOFailure("state must be nonzero")
    return psi / nrm


def cmd_simulate(args) -> int:
    spec = _load_spec(args.spec)
    try:
        with open(args.control, "r", encoding="utf-8") as fh:
            control = synthesis.PiecewiseConstantControl.from_csv(fh.read())
    except OSError as exc:
        raise _IOFailure(f"cannot read control: {exc}") from exc
    N = args.N if args.N else spec.size
    if args.density:
        with open(args.density, "r", encoding="utf-8") as fh:
            d = json.load(fh)
        rho = np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"],
                                                                 dtype=float)
        rho0 = propagate.DensityMatrix(rho)
        rho1 = propagate.density_evolve(rho0, control, spec, N)
        _emit({"trace": float(np.trace(rho1.rho).real),
               "spectrum": rho1.spectrum().tolist(),
               "diag": np.abs(np.diagonal(rho1.rho)).tolist()},
              args.out_report)
        if args.out_density:
            _write(args.out_density, json.dumps(
                {"re": rho1.rho.real.tolist(), "im": rho1.rho.imag.tolist()}))
        return EXIT_OK
    psi0 = _parse_state(args.psi0, N)
    traj, _ = propagate.propagate(control, spec, N, psi0)
    if args.out_trajectory:
        header = (["t"] + [f"re_{j}" for j in range(1, N + 1)]
                  + [f"im_{j}" for j in range(1, N + 1)]
                  + [f"mod_{j}" for j in range(1, N + 1)])
        lines = [",".join(header)]
        for t, psi in zip(traj.times, traj.states):
            row = ([f"{t!r}"] + [f"{c.real!r}" for c in psi]
                   + [f"{c.imag!r}" for c in psi]
                   + [f"{abs(c)!r}" for c in psi])
            lines.append(",".join(row))
        _write(args.out_trajectory, "\n".join(lines) + "\n")
    final = traj.states[-1]
    payload = {"final_moduli": np.abs(final).tolist(),
               "total_time": float(traj.times[-1])}
    if args.target:
        tgt = _parse_state(args.target, N)
        payload["fidelity"] = propagate.fidelity(tgt, final)
    _emit(payload, args.out_report)
    return EXIT_OK


def cmd_bounds(args) -> int:
    spec = _load_spec(args.spec)
    gap_tol = _gap_tol(args)
    chain = _certified_chain(spec, gap_tol)
    payload = {"m": args.m,
               "l1_upper": synthesis.l1_upper_bound(spec, chain, args.m)}
    if args.swap:
        j, k = (int(x) for x in args.swap.split(","))
        target = np.eye(spec.size, dtype=complex)
        target[j - 1, j - 1] = target[k - 1, k - 1] = 0.0
        target[k - 1, j - 1] = -1.0
        target[j - 1, k - 1] = 1.0
        payload["l1_lower"] = propagate.l1_lower_bound(
            spec, target, eps=0.0, m=max(j, k))
        payload["l1_lower_eps"] = propagate.l1_lower_bound(
            spec, target, eps=args.eps, m=max(j, k))
    _emit(payload, args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = _load_spec(args.spec)
    gap_tol = _gap_tol(args)
    chain = _certified_chain(spec, gap_tol)
    etas = [float(x) for x in args.etas.split(",")]
    N = args.N if args.N else spec.size

    def run(eta):
        params = synthesis.SynthesisParams(eta=eta, N=N)
        _, report = synthesis.synth_transfer(
            spec, chain, args.source, args.target, params, gap_tol=gap_tol)
        return {"eta": eta, "fidelity": report.fidelities[0],
                "l1_realized": report.l1_realized,
                "total_time": report.total_time}

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(run, etas))
    else:
        rows = [run(e) for e in etas]
    _emit({"source": args.source, "target": args.target, "points": rows},
          args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qctrl")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("model", help="emit a built-in system spec as JSON")
    p.add_argument("kind", choices=["well", "molecule", "ex4"])
    p.add_argument("--N", type=int, default=6)
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--parity", choices=["even", "odd"], default="even")
    p.add_argument("--out")
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("check", help="certify the synthesis hypotheses")
    p.add_argument("spec")
    p.add_argument("--gap-tol", dest="gap_tol", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("lie-rank", help="numeric Lie-algebra rank and verdict")
    p.add_argument("--spec", required=True)
    p.add_argument("--allow-degenerate-coupling", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_lie_rank)

    p = sub.add_parser("synth", help="synthesize a transfer or permutation")
    p.add_argument("--spec", required=True)
    p.add_argument("--from", dest="source", type=int)
    p.add_argument("--to", dest="target", type=int)
    p.add_argument("--perm")
    p.add_argument("--eta", type=float, default=0.05)
    p.add_argument("--N", type=int)
    p.add_argument("--delta-bar", dest="delta_bar", type=float)
    p.add_argument("--gap-tol", dest="gap_tol", type=float)
    p.add_argument("--out-control")
    p.add_argument("--out-report")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("simulate", help="propagate a control file")
    p.add_argument("--spec", required=True)
    p.add_argument("--control", required=True)
    p.add_argument("--psi0", default="1")
    p.add_argument("--target")
    p.add_argument("--density")
    p.add_argument("--N", type=int)
    p.add_argument("--out-trajectory")
    p.add_argument("--out-density")
    p.add_argument("--out-report")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bounds", help="L1 upper/lower bounds")
    p.add_argument("--spec", required=True)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--swap", help="j,k target exchange for the lower bound")
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--gap-tol", dest="gap_tol", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("sweep", help="fidelity sweep over averaging fineness")
    p.add_argument("--spec", required=True)
    p.add_argument("--from", dest="source", type=int, required=True)
    p.add_argument("--to", dest="target", type=int, required=True)
    p.add_argument("--etas", required=True)
    p.add_argument("--N", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--gap-tol", dest="gap_tol", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_IO if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except _IOFailure as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return EXIT_IO
    except (NotConnected, SpecValidationError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return EXIT_HYPOTHESIS
    except NotFoundWithin as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return EXIT_SYNTHESIS
    except QctrlError as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return EXIT_SYNTHESIS
    except OSError as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return EXIT_IO


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
