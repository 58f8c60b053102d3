"""Scenario-driven command line front end.

Commands: derive, reduce, simulate, qec, verify.  Exit codes: 0 success,
1 schema error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import eom, linalg, mor, qec, sim
from .exceptions import QmorError, SchemaError
from .pauli import LindbladModel, PauliPolynomial, PauliString
from .scenario import Scenario, load_scenario
from .svgplot import line_plot

__all__ = ["main"]


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def _write_csv(path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _closure_and_generator(sc: Scenario):
    vars = eom.closure([PauliString.from_letters(s) for s in sc.interest], sc.model)
    return vars, eom.build_generator(vars, sc.model)


def _initial_vector(sc: Scenario, vars: eom.VariableSet) -> np.ndarray:
    return eom.initial_expectations(sc.initial, vars)


def _initial_density(sc: Scenario) -> sim.DensityMatrix:
    if sc.initial_is_product:
        return sim.density_from_bloch_product(sc.initial.bloch)
    return sim.density_from_amplitudes(sc.initial)


def cmd_derive(args) -> int:
    sc = load_scenario(args.scenario)
    vars, gen = _closure_and_generator(sc)
    labels = vars.labels
    width = max(len(s) for s in labels)
    for i, lab in enumerate(labels):
        terms = []
        for j, lab2 in enumerate(labels):
            c = gen.a[i, j]
            if c != 0.0:
                sign = "-" if c < 0 else "+"
                terms.append(f"{sign} {abs(c):g}*<{lab2}>")
        rhs = " ".join(terms) if terms else "0"
        if rhs.startswith("+ "):
            rhs = rhs[2:]
        print(f"d<{lab:<{width}}>/dt = {rhs}")
    if args.json:
        payload = {"variables": list(labels), "matrix": gen.a.tolist()}
        with open(args.json, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    return 0


def _pick_k(sc: Scenario, args, hankel: np.ndarray) -> int:
    if getattr(args, "k", None):
        return args.k
    red = sc.raw.get("reduction", {})
    if "k" in red:
        return int(red["k"])
    if "tolerance" in red:
        tol = float(red["tolerance"])
        tails = 2.0 * np.cumsum(hankel[::-1])[::-1]
        for k in range(1, hankel.size + 1):
            tail = tails[k] if k < hankel.size else 0.0
            if tail <= tol:
                return k
        return hankel.size
    raise SchemaError("reduction: specify k (or tolerance) for this command")


def cmd_reduce(args) -> int:
    sc = load_scenario(args.scenario)
    vars, gen = _closure_and_generator(sc)
    ic = eom.partition_and_factor(gen, list(sc.interest))
    env = mor.StateSpaceModel(ic.sys2.a, ic.sys2.b, ic.sys2.c)
    bal = mor.balance(env)
    k = _pick_k(sc, args, bal.hankel)
    red = mor.truncate(bal, k)
    err_sys = mor.error_system(env, mor.StateSpaceModel(red.a, red.b, red.c))
    hinf = mor.hinf_norm(err_sys)
    payload = {
        "hankel": [float(s) for s in bal.hankel],
        "k": k,
        "lower_bound": red.lower_bound,
        "upper_bound": red.upper_bound,
        "hinf_measured": hinf,
    }
    text = json.dumps(payload, indent=2) + "\n"
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario)
    vars, gen = _closure_and_generator(sc)
    x0 = _initial_vector(sc, vars)
    full = sim.integrate_linear(gen.a, x0, sc.times, vars.labels)

    k = args.reduce
    if k is None and sc.reduction_k is not None:
        k = sc.reduction_k
    header = ["t"] + list(full.labels)
    columns = [full.times] + [full.values[:, j] for j in range(len(full.labels))]
    series = {lab: full.column(lab) for lab in sc.interest}
    if k is not None:
        ic = eom.partition_and_factor(gen, list(sc.interest))
        red = mor.reduce_interconnected(ic, k)
        n1 = len(sc.interest)
        rtraj = sim.simulate_interconnected(red, x0[:n1], x0[n1:], sc.times)
        for lab in sc.interest:
            header.append(f"{lab}_reduced")
            columns.append(rtraj.column(lab))
            series[f"{lab} (k={k})"] = rtraj.column(lab)
    rows = np.column_stack(columns)
    _write_csv(args.out, header, rows)
    if args.svg:
        line_plot(sc.times, series, args.svg, title="expectation dynamics",
                  xlabel="t", ylabel="expectation")
    return 0


def _qec_settings(args) -> dict:
    settings = {
        "code": "bitflip3",
        "levels": 1,
        "model": "independent",
        "gamma": 1.0,
        "eta_meas": 1.0,
        "eta_rec": 1.0,
        "dt": 0.1,
        "cycles": 10,
        "initial_bloch": [0.0, 0.0, 1.0],
    }
    if args.scenario:
        sc = load_scenario(args.scenario)
        if sc.qec:
            settings.update(sc.qec)
    for key in ("code", "levels", "model", "gamma", "eta_meas", "eta_rec", "dt", "cycles"):
        v = getattr(args, key)
        if v is not None:
            settings[key] = v
    if args.initial_bloch is not None:
        try:
            parts = [float(x) for x in args.initial_bloch.split(",")]
        except ValueError:
            raise SchemaError("initial_bloch: expected numbers") from None
        if len(parts) != 3:
            raise SchemaError("initial_bloch: expected three comma-separated numbers")
        settings["initial_bloch"] = parts
    if not 1 <= settings["levels"] <= 3:
        raise SchemaError("levels: must be between 1 and 3")
    for key in ("eta_meas", "eta_rec"):
        if not 0.0 <= settings[key] <= 1.0:
            raise SchemaError(f"{key}: must lie in [0, 1]")
    if settings["gamma"] < 0:
        raise SchemaError("gamma: must be non-negative")
    if settings["dt"] <= 0:
        raise SchemaError("dt: must be positive")
    if settings["cycles"] < 0:
        raise SchemaError("cycles: must be non-negative")
    if sum(v * v for v in settings["initial_bloch"]) > 1.0 + 1e-9:
        raise SchemaError("initial_bloch: norm exceeds 1")
    return settings


def _qec_model(kind: str, gamma: float, n: int) -> LindbladModel:
    if kind == "independent":
        diss = tuple(
            (gamma, PauliPolynomial.from_pauli(PauliString.single(n, i, "X")))
            for i in range(n)
        )
    else:
        collective = PauliPolynomial(
            n, {PauliString.single(n, i, "X"): 1.0 for i in range(n)}
        )
        diss = ((gamma, collective),)
    return LindbladModel(n, PauliPolynomial.zero(n), diss)


def cmd_qec(args) -> int:
    settings = _qec_settings(args)
    if settings["code"] != "bitflip3":
        raise SchemaError(f"code: unknown code {settings['code']!r}")
    code = qec.bitflip3()
    if settings["levels"] > 1:
        code, _ = qec.concatenate(code, settings["levels"])
    ch = qec.RecoveryChannel(settings["eta_meas"], settings["eta_rec"])
    model = _qec_model(settings["model"], settings["gamma"], code.n)
    traj = qec.run_cycles(
        code, ch, model, settings["dt"], settings["cycles"], settings["initial_bloch"]
    )
    rows = np.column_stack([traj.times, traj.values])
    _write_csv(args.out, ["cycle", "xbar", "ybar", "zbar"], rows)
    if args.json:
        ld = qec.logical_dynamics(code, ch, model)
        report = {"n_qubits": code.n, "sectors": {}}
        for name, sector in ld.sectors.items():
            x0 = qec.encode_expectations(
                code, settings["initial_bloch"], sector.variables
            )
            u0 = sector.basis @ x0
            lam, v = np.linalg.eig(sector.generator)
            amps = (sector.output @ v) * np.linalg.solve(v, u0)
            decomp = sorted(
                (
                    {"rate": float(l.real), "amplitude": float(a.real)}
                    for l, a in zip(lam, amps)
                ),
                key=lambda d: -d["rate"],
            )
            report["sectors"][name] = {
                "coupled_strings": len(sector.variables),
                "dimension": sector.dimension,
                "auxiliary_variables": sector.aux_count,
                "exponential_decomposition": decomp,
            }
        with open(args.json, "w") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    return 0


def cmd_verify(args) -> int:
    sc = load_scenario(args.scenario)
    checks: list[tuple[str, float, float]] = []

    vars, gen = _closure_and_generator(sc)
    x0 = _initial_vector(sc, vars)
    ode = sim.integrate_linear(gen.a, x0, sc.times, vars.labels)
    oracle = sim.oracle_master_equation(sc.model, _initial_density(sc), sc.times, vars)
    checks.append(
        ("expectation ODE vs density-matrix oracle",
         float(np.max(np.abs(ode.values - oracle.values))), 1e-6)
    )
    checks.append(
        ("expectation bound |<P>| <= 1",
         max(float(np.max(np.abs(ode.values))) - 1.0, 0.0), 1e-6)
    )
    if sc.qec:
        checks.append(_verify_qec(sc))
    width = max(len(name) for name, _, _ in checks)
    ok = True
    for name, dev, tol in checks:
        passed = dev <= tol
        ok = ok and passed
        status = "PASS" if passed else "FAIL"
        print(f"{name:<{width}}  max dev {dev:10.3e}  tol {tol:7.1e}  {status}")
    return 0 if ok else 2


def _verify_qec(sc: Scenario) -> tuple[str, float, float]:
    settings = {
        "code": "bitflip3", "levels": 1, "model": "independent", "gamma": 1.0,
        "eta_meas": 1.0, "eta_rec": 1.0, "dt": 0.1, "cycles": 10,
        "initial_bloch": [0.0, 0.0, 1.0],
    }
    settings.update(sc.qec)
    code = qec.bitflip3()
    if settings["levels"] > 1:
        code, _ = qec.concatenate(code, settings["levels"])
    ch = qec.RecoveryChannel(settings["eta_meas"], settings["eta_rec"])
    model = _qec_model(settings["model"], settings["gamma"], code.n)
    bloch = settings["initial_bloch"]
    rho0 = sim.poly_to_matrix(qec.encode_polynomial(code, bloch))
    dt = settings["dt"]
    if code.n <= sim.ORACLE_DENSE_MAX_SITES:
        # one full decohere + recover cycle against the dense oracle
        lsup = sim._superop_matrix(model)
        rho_t = (linalg.expm(lsup * dt) @ rho0.ravel()).reshape(rho0.shape)
        name = "one qec cycle: symbolic vs oracle Kraus"
    else:
        rho_t = rho0
        dt = 0.0
        name = "qec decode: symbolic vs oracle Kraus"
    rho_rec = qec.oracle_apply_recovery(code, ch, rho_t)
    dec = qec.decode_functional(code, ch)
    worst = 0.0
    for obs_name in ("x", "y", "z"):
        obs_mat = sim.poly_to_matrix(code.logical_observables[obs_name])
        oracle_val = float(np.trace(obs_mat @ rho_rec).real)
        poly = dec.poly(obs_name)
        support = eom.VariableSet(poly.support())
        vec = sim.expectations_from_state(sim.DensityMatrix(code.n, rho_t), support)
        sym_val = float(support.coefficient_vector(poly) @ vec)
        worst = max(worst, abs(oracle_val - sym_val))
    return (name, worst, 1e-8)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qmor",
        description="Lindblad spin dynamics as LTI systems: derivation, "
        "balanced-truncation reduction, simulation, error correction, and "
        "oracle verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("derive", help="print the closed expectation ODE system")
    p.add_argument("scenario")
    p.add_argument("--json", help="also write {variables, matrix} to this file")
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("reduce", help="balance and truncate the environment block")
    p.add_argument("scenario")
    p.add_argument("--k", type=int, help="kept environment order")
    p.add_argument("--json", help="write the report to this file (default stdout)")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("simulate", help="integrate the system, optionally reduced")
    p.add_argument("scenario")
    p.add_argument("--reduce", type=int, metavar="K", help="also simulate with the environment truncated to order K")
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.add_argument("--svg", help="write a line plot of the interest variables")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("qec", help="repeated error-correction cycles")
    p.add_argument("scenario", nargs="?", help="optional scenario with a qec block")
    p.add_argument("--code", choices=["bitflip3"])
    p.add_argument("--levels", type=int)
    p.add_argument("--model", choices=["independent", "correlated"])
    p.add_argument("--gamma", type=float)
    p.add_argument("--eta-meas", dest="eta_meas", type=float)
    p.add_argument("--eta-rec", dest="eta_rec", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--cycles", type=int)
    p.add_argument("--initial-bloch", dest="initial_bloch", metavar="X,Y,Z")
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.add_argument("--json", help="write closure/rate report to this file")
    p.set_defaults(func=cmd_qec)

    p = sub.add_parser("verify", help="oracle comparison with a pass/fail table")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 1
    except QmorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
