"""Batch front door: spec files in, reports and plot data out.

A cascade spec file is a JSON document:

    {
      "field_channels": 6,
      "oscillators": [{"n": 2, "R": [[...]], "M": [[...]], "theta": optional}],
      "uncertainty": [{"a": ..., "b": ...} | {"sigma": [[...]]}],
      "epsilon": 1e-6,
      "options": {"seed": ..., "samples": ..., "kmax": ..., "fd_step": ...},
      "expected": { optional reference values for the reproduce command }
    }

Commands: validate, covariance, purity, gradients, sensitivity, balance,
mc-check, ti-bounds, reproduce-paper. Every run writes ``report.json``
into the output directory; some commands add CSV series or a balanced
spec. Exit codes: 0 success, 1 validation failure, 2 numerical failure.
Results are deterministic for a fixed input file and seed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .balance import CascadeBalanceReport, balance_cascade
from .covariance import (
    invariant_covariance_direct,
    invariant_covariance_recursive,
    steady_state,
)
from .errors import (
    DimensionMismatch,
    ParseError,
    QCascadeError,
    SchemaError,
    SingularTheta,
)
from .gradients import (
    gradient_fd_oracle,
    purity_gradients_direct,
    purity_gradients_recursive,
)
from .linalg import quantum_psd_margin
from .oscillator import CascadeModel, OscillatorParams, assemble_cascade, default_theta
from .sensitivity import (
    UncertaintyModel,
    OscillatorUncertainty,
    fisher_sensitivity,
    monte_carlo_variance,
    psi_transformed,
    sensitivity_index,
)
from .zcascade import TIModel, covariance_trace_bound

COMMANDS = (
    "validate",
    "covariance",
    "purity",
    "gradients",
    "sensitivity",
    "balance",
    "mc-check",
    "ti-bounds",
    "reproduce-paper",
)

VALIDATION_ERRORS = (ParseError, SchemaError, DimensionMismatch, SingularTheta)


@dataclass(frozen=True)
class CascadeSpecFile:
    """Validated content of a cascade spec file."""

    field_channels: int
    oscillators: tuple[OscillatorParams, ...]
    uncertainty: UncertaintyModel | None
    epsilon: float
    options: dict[str, Any]
    expected: dict[str, Any] | None
    source: Path
    sha256: str


@dataclass
class ReportBundle:
    """Results of one command run, plus provenance and export data."""

    command: str
    results: dict[str, Any]
    provenance: dict[str, Any]
    csv_series: dict[str, list[tuple]] = field(default_factory=dict)
    table: str = ""
    extra_files: dict[str, dict[str, Any]] = field(default_factory=dict)


def _as_matrix(obj: Any, path: str, shape: tuple[int, int]) -> np.ndarray:
    try:
        mat = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: not a numeric matrix: {exc}") from exc
    if mat.shape != shape:
        raise DimensionMismatch(f"{path}: expected shape {shape}, got {mat.shape}")
    return mat


def load_spec(path: str | Path) -> CascadeSpecFile:
    """Parse and validate a cascade spec file.

    Defaulting rules: missing theta becomes the canonical half form of
    the right order; missing epsilon becomes 1e-6. The energy matrix is
    symmetrized after checking that its asymmetry stays below 1e-9.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("top level must be an object")

    m = doc.get("field_channels")
    if not isinstance(m, int) or m <= 0 or m % 2:
        raise SchemaError(f"field_channels: must be a positive even integer, got {m!r}")
    oscs_doc = doc.get("oscillators")
    if not isinstance(oscs_doc, list) or not oscs_doc:
        raise SchemaError("oscillators: must be a non-empty list")

    oscillators: list[OscillatorParams] = []
    for k, entry in enumerate(oscs_doc):
        where = f"oscillators[{k}]"
        if not isinstance(entry, dict):
            raise SchemaError(f"{where}: must be an object")
        n = entry.get("n")
        if not isinstance(n, int) or n <= 0 or n % 2:
            raise SchemaError(f"{where}.n: must be a positive even integer, got {n!r}")
        r = _as_matrix(entry.get("R"), f"{where}.R", (n, n))
        asym = float(np.max(np.abs(r - r.T))) if r.size else 0.0
        if asym > 1e-9:
            raise SchemaError(
                f"{where}.R: asymmetry {asym:.3e} exceeds 1e-9"
            )
        r = 0.5 * (r + r.T)
        mat = _as_matrix(entry.get("M"), f"{where}.M", (m, n))
        if "theta" in entry:
            theta = _as_matrix(entry["theta"], f"{where}.theta", (n, n))
            if np.max(np.abs(theta + theta.T)) > 1e-12 * max(1.0, np.max(np.abs(theta))):
                raise SchemaError(f"{where}.theta: must be antisymmetric")
            if abs(np.linalg.det(theta)) < 1e-300:
                raise SingularTheta(f"{where}.theta: singular commutation matrix")
        else:
            theta = default_theta(n)
        oscillators.append(OscillatorParams(theta=theta, r_energy=r, m_coupling=mat))

    uncertainty = None
    if "uncertainty" in doc:
        unc_doc = doc["uncertainty"]
        if not isinstance(unc_doc, list) or len(unc_doc) != len(oscillators):
            raise SchemaError(
                "uncertainty: must be a list with one entry per oscillator"
            )
        entries = []
        for k, entry in enumerate(unc_doc):
            where = f"uncertainty[{k}]"
            if not isinstance(entry, dict):
                raise SchemaError(f"{where}: must be an object")
            if "sigma" in entry:
                nk = oscillators[k].n
                d = nk * (nk + 1) // 2 + m * nk
                sigma = _as_matrix(entry["sigma"], f"{where}.sigma", (d, d))
                entries.append(OscillatorUncertainty(sigma=sigma))
            elif "a" in entry and "b" in entry:
                a_val, b_val = float(entry["a"]), float(entry["b"])
                if a_val < 0 or b_val < 0:
                    raise SchemaError(f"{where}: weights must be nonnegative")
                entries.append(
                    OscillatorUncertainty(energy_weight=a_val, coupling_weight=b_val)
                )
            else:
                raise SchemaError(f"{where}: needs either 'sigma' or both 'a' and 'b'")
        uncertainty = UncertaintyModel(oscillators=tuple(entries))

    epsilon = float(doc.get("epsilon", 1e-6))
    options = doc.get("options", {})
    if not isinstance(options, dict):
        raise SchemaError("options: must be an object")
    expected = doc.get("expected")
    if expected is not None and not isinstance(expected, dict):
        raise SchemaError("expected: must be an object")
    return CascadeSpecFile(
        field_channels=m,
        oscillators=tuple(oscillators),
        uncertainty=uncertainty,
        epsilon=epsilon,
        options=options,
        expected=expected,
        source=path,
        sha256=hashlib.sha256(raw).hexdigest(),
    )


def build_cascade(spec: CascadeSpecFile) -> CascadeModel:
    return assemble_cascade(spec.oscillators)


@dataclass
class RunFlags:
    tol_residual: float = 1e-9
    fd_step: float = 1e-5
    samples: int = 100_000
    seed: int = 7
    epsilon: float | None = None
    kmax: int = 10
    out: Path = Path(".")
    fmt: str = "table"

    @classmethod
    def from_spec(cls, spec: CascadeSpecFile, ns: argparse.Namespace) -> "RunFlags":
        opts = spec.options

        def pick(flag_val, key, default):
            if flag_val is not None:
                return flag_val
            return opts.get(key, default)

        return cls(
            tol_residual=float(pick(ns.tol_residual, "tol_residual", 1e-9)),
            fd_step=float(pick(ns.fd_step, "fd_step", 1e-5)),
            samples=int(pick(ns.samples, "samples", 100_000)),
            seed=int(pick(ns.seed, "seed", 7)),
            epsilon=float(pick(ns.epsilon, "epsilon", spec.epsilon)),
            kmax=int(pick(ns.kmax, "kmax", 10)),
            out=Path(ns.out) if ns.out else Path("."),
            fmt=ns.format or "table",
        )


def _listify(mat: np.ndarray) -> list:
    return np.asarray(mat).tolist()


def _fmt4(x: float) -> str:
    return f"{x:12.4f}"


def _require_uncertainty(spec: CascadeSpecFile) -> UncertaintyModel:
    if spec.uncertainty is None:
        raise SchemaError("this command needs an 'uncertainty' block in the spec")
    return spec.uncertainty


def _cmd_validate(spec: CascadeSpecFile, flags: RunFlags) -> tuple[dict, int, str]:
    cascade = build_cascade(spec)
    j = cascade.j_ito
    pr_res = float(
        np.linalg.norm(
            cascade.a @ cascade.theta
            + cascade.theta @ cascade.a.T
            + cascade.b @ j @ cascade.b.T
        )
        + np.linalg.norm(cascade.theta @ cascade.c.T + cascade.b @ j)
    )
    hurwitz = [
        {"oscillator": k, "stable": bool(flag), "abscissa": float(absc)}
        for k, (flag, absc) in enumerate(cascade.hurwitz)
    ]
    results: dict[str, Any] = {
        "pr_residual": pr_res,
        "pr_ok": pr_res <= flags.tol_residual * max(1.0, float(np.linalg.norm(cascade.a))),
        "hurwitz": hurwitz,
    }
    lines = [f"PR residual      {pr_res:.3e}"]
    exit_code = 0
    unstable = [h["oscillator"] for h in hurwitz if not h["stable"]]
    if unstable:
        results["unstable_oscillators"] = unstable
        lines.append(f"unstable oscillators: {unstable}")
        exit_code = 1
    else:
        p = invariant_covariance_direct(cascade)
        margin = quantum_psd_margin(p, cascade.theta)
        results["psd_margin"] = float(margin)
        results["psd_ok"] = bool(margin >= -1e-9 * max(1.0, float(np.linalg.norm(p))))
        lines.append(f"admissibility margin {margin:.3e}")
    for h in hurwitz:
        lines.append(
            f"oscillator {h['oscillator']}: abscissa {_fmt4(h['abscissa'])}"
            f" {'stable' if h['stable'] else 'UNSTABLE'}"
        )
    return results, exit_code, "\n".join(lines)


def _cmd_covariance(spec: CascadeSpecFile, flags: RunFlags) -> tuple[dict, int, str]:
    cascade = build_cascade(spec)
    p_direct = invariant_covariance_direct(cascade)
    p_rec = invariant_covariance_recursive(cascade)
    gap = float(np.linalg.norm(p_direct - p_rec))
    results = {
        "p_direct": _listify(p_direct),
        "p_recursive": _listify(p_rec),
        "route_gap": gap,
        "blocks": {
            f"{j}_{k}": _listify(p_direct[cascade.block(j), cascade.block(k)])
            for j in range(cascade.n_oscillators)
            for k in range(j + 1)
        },
    }
    table = f"covariance route gap {gap:.3e}\n"
    table += "\n".join(
        "  ".join(_fmt4(x) for x in row) for row in p_direct
    )
    return results, 0, table


def _cmd_purity(spec: CascadeSpecFile, flags: RunFlags) -> tuple[dict, int, str]:
    cascade = build_cascade(spec)
    ss = steady_state(cascade)
    results = {
        "purity": ss.purity,
        "v_logdet": ss.v_logdet,
        "v_k": list(ss.v_k),
    }
    lines = [
        f"purity      {_fmt4(ss.purity)}",
        f"log-det V   {_fmt4(ss.v_logdet)}",
    ]
    for k, v in enumerate(ss.v_k):
        lines.append(f"V_{k}         {_fmt4(v)}")
    return results, 0, "\n".join(lines)


def _cmd_gradients(spec: CascadeSpecFile, flags: RunFlags) -> tuple[dict, int, str]:
    cascade = build_cascade(spec)
    direct = purity_gradients_direct(cascade)
    recursive = purity_gradients_recursive(cascade)
    gap = max(
        max(
            float(np.max(np.abs(a - b)))
            for a, b in zip(direct.rho, recursive.rho)
        ),
        max(
            float(np.max(np.abs(a - b)))
            for a, b in zip(direct.mu, recursive.mu)
        ),
    )
    fd = gradient_fd_oracle(cascade, h=flags.fd_step)
    fd_gap = max(
        max(float(np.max(np.abs(a - b))) for a, b in zip(direct.rho, fd.rho)),
        max(float(np.max(np.abs(a - b))) for a, b in zip(direct.mu, fd.mu)),
    )
    results = {
        "rho": [_listify(r) for r in direct.rho],
        "mu": [_listify(u) for u in direct.mu],
        "route_gap": gap,
        "fd_gap": fd_gap,
        "fd_step": flags.fd_step,
    }
    lines = [f"route gap {gap:.3e}   fd gap {fd_gap:.3e}"]
    for k, r in enumerate(direct.rho):
        lines.append(f"rho_{k}")
        lines.extend("  ".join(_fmt4(x) for x in row) for row in r)
    for k, u in enumerate(direct.mu):
        lines.append(f"mu_{k}")
        lines.extend("  ".join(_fmt4(x) for x in row) for row in u)
    return results, 0, "\n".join(lines)


def _cmd_sensitivity(spec: CascadeSpecFile, flags: RunFlags) -> tuple[dict, int, str]:
    cascade = build_cascade(spec)
    uncertainty = _require_uncertainty(spec)
    grads = purity_gradients_direct(cascade)
    index = sensitivity_index(grads, uncertainty)
    psi_id = []
    for k in range(cascade.n_oscillators):
        try:
            psi_id.append(psi_transformed(grads, uncertainty, k, np.eye(cascade.dims[k])))
        except ValueError:
            psi_id.append(None)
    fisher = fisher_sensitivity(cascade, uncertainty)
    results = {
        "z_total": index.z_total,
        "z_k": list(index.z_k),
        "psi_identity": psi_id,
        "z_fisher": fisher.z_total,
        "z_fisher_k": list(fisher.z_k),
    }
    lines = [f"Z total     {_fmt4(index.z_total)}", f"Z fisher    {_fmt4(fisher.z_total)}"]
    for k, (z_k, psi) in enumerate(zip(index.z_k, psi_id)):
        psi_txt = _fmt4(psi) if psi is not None else "      n/a"
        lines.append(f"k={k}  Z_k {_fmt4(z_k)}  Psi_k(I) {psi_txt}")
    return results, 0, "\n".join(lines)


def _spec_document_from_cascade(
    spec: CascadeSpecFile, cascade: CascadeModel
) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "field_channels": spec.field_channels,
        "oscillators": [
            {
                "n": p.n,
                "theta": _listify(p.theta),
                "R": _listify(0.5 * (p.r_energy + p.r_energy.T)),
                "M": _listify(p.m_coupling),
            }
            for p in cascade.params
        ],
        "epsilon": spec.epsilon,
        "options": spec.options,
    }
    if spec.uncertainty is not None:
        unc = []
        for entry in spec.uncertainty.oscillators:
            if entry.sigma is not None:
                unc.append({"sigma": _listify(entry.sigma)})
            else:
                unc.append({"a": entry.energy_weight, "b": entry.coupling_weight})
        doc["uncertainty"] = unc
    return doc


def _balance_report(
    spec: CascadeSpecFile, flags: RunFlags
) -> tuple[CascadeBalanceReport, dict, str]:
    cascade = build_cascade(spec)
    uncertainty = _require_uncertainty(spec)
    grads = purity_gradients_direct(cascade)
    report = balance_cascade(cascade, grads, uncertainty, seed=flags.seed)
    round_trip = []
    new_grads = purity_gradients_direct(report.transformed)
    for k, res in enumerate(report.results):
        psi_again = psi_transformed(
            new_grads, uncertainty, k, np.eye(cascade.dims[k])
        )
        round_trip.append(abs(psi_again - res.psi_after))
    results = {
        "s_k": [_listify(r.s_k) for r in report.results],
        "lambda_k": [r.lambda_k for r in report.results],
        "stretch_k": [r.stretch for r in report.results],
        "angle_k": [r.angle for r in report.results],
        "newton_iterations": [r.newton_iterations for r in report.results],
        "psi_before": [r.psi_before for r in report.results],
        "psi_after": [r.psi_after for r in report.results],
        "ratios": list(report.ratios),
        "total_ratio": report.total_ratio,
        "probe_violations": report.probe_violations,
        "round_trip_gap": max(round_trip),
    }
    lines = ["k   Psi(I)        Psi(S)        ratio"]
    for k, res in enumerate(report.results):
        lines.append(
            f"{k}  {_fmt4(res.psi_before)}  {_fmt4(res.psi_after)}  "
            f"{report.ratios[k]:8.4f}"
        )
    lines.append(f"total ratio {report.total_ratio:8.4f}")
    return report, results, "\n".join(lines)


def _cmd_balance(
    spec: CascadeSpecFile, flags: RunFlags, bundle: ReportBundle
) -> tuple[dict, int, str]:
    from .balance import OneModeBalanceProblem, _h_and_slope

    report, results, table = _balance_report(spec, flags)
    bundle.extra_files["balanced.json"] = _spec_document_from_cascade(
        spec, report.transformed
    )
    cascade = build_cascade(spec)
    grads = purity_gradients_direct(cascade)
    uncertainty = spec.uncertainty
    curve: list[tuple] = []
    for k, res in enumerate(report.results):
        a_k, b_k = uncertainty.oscillators[k].weights()
        problem = OneModeBalanceProblem.from_gradients(
            grads.rho[k], grads.mu[k], a_k, b_k
        )
        w, v = np.linalg.eigh(problem.tau)
        tau_isqrt = (v / np.sqrt(w)) @ v.T
        r = np.linalg.eigvalsh(tau_isqrt @ problem.rho @ tau_isqrt)
        for lam in np.geomspace(res.lambda_k / 10, res.lambda_k * 10, 41):
            h_val, _ = _h_and_slope(lam, r)
            curve.append((k, float(lam), h_val))
    bundle.csv_series["balance_multiplier.csv"] = curve
    return results, 0, table


def _cmd_mc_check(spec: CascadeSpecFile, flags: RunFlags) -> tuple[dict, int, str]:
    cascade = build_cascade(spec)
    uncertainty = _require_uncertainty(spec)
    grads = purity_gradients_direct(cascade)
    mc = monte_carlo_variance(
        cascade,
        uncertainty,
        grads,
        samples=flags.samples,
        epsilon=flags.epsilon if flags.epsilon is not None else spec.epsilon,
        seed=flags.seed,
    )
    in_range = 0.9 <= mc.ratio <= 1.1
    results = {
        "variance": mc.variance,
        "predicted": mc.predicted,
        "ratio": mc.ratio,
        "samples": mc.samples,
        "rejected": mc.rejected,
        "in_range": bool(in_range),
    }
    table = (
        f"variance  {mc.variance:.6e}\n"
        f"predicted {mc.predicted:.6e}\n"
        f"ratio     {mc.ratio:8.4f}  ({'ok' if in_range else 'OUT OF RANGE'})"
    )
    return results, 0 if in_range else 2, table


def _cmd_ti_bounds(
    spec: CascadeSpecFile, flags: RunFlags, bundle: ReportBundle
) -> tuple[dict, int, str]:
    rows: list[tuple] = []
    per_osc = []
    all_ok = True
    for k, params in enumerate(spec.oscillators):
        model = TIModel.from_oscillator(params)
        res = covariance_trace_bound(model, flags.kmax)
        ok = all(t <= b * (1 + 1e-9) for t, b in zip(res.traces, res.bounds))
        all_ok &= ok
        per_osc.append(
            {
                "oscillator": k,
                "h2": res.h2,
                "hinf": res.hinf,
                "traces": list(res.traces),
                "bounds": list(res.bounds),
                "bound_holds": bool(ok),
            }
        )
        for i, (t, b) in enumerate(zip(res.traces, res.bounds), start=1):
            rows.append((k, i, t, b))
    bundle.csv_series["ti_bounds.csv"] = rows
    lines = ["osc  k   trace         bound"]
    for row in rows:
        lines.append(f"{row[0]}    {row[1]:2d} {_fmt4(row[2])}  {_fmt4(row[3])}")
    return {"per_oscillator": per_osc}, 0 if all_ok else 2, "\n".join(lines)


def _compare(name: str, got, want, atol: float, rtol: float) -> dict[str, Any]:
    got_arr = np.asarray(got, dtype=float)
    want_arr = np.asarray(want, dtype=float)
    err = float(np.max(np.abs(got_arr - want_arr)))
    tol = max(atol, rtol * float(np.max(np.abs(want_arr))))
    return {
        "name": name,
        "max_error": err,
        "tolerance": tol,
        "pass": bool(err <= tol),
    }


def _cmd_reproduce(
    spec: CascadeSpecFile, flags: RunFlags, bundle: ReportBundle
) -> tuple[dict, int, str]:
    if spec.expected is None:
        raise SchemaError("reproduce needs an 'expected' block in the spec")
    expected = spec.expected
    cascade = build_cascade(spec)
    grads = purity_gradients_direct(cascade)
    report, balance_results, _ = _balance_report(spec, flags)
    checks: list[dict[str, Any]] = []
    if "rho" in expected:
        for k, want in enumerate(expected["rho"]):
            checks.append(_compare(f"rho_{k}", grads.rho[k], want, 1e-2, 1e-2))
    if "mu" in expected:
        for k, want in enumerate(expected["mu"]):
            checks.append(_compare(f"mu_{k}", grads.mu[k], want, 1e-2, 1e-2))
    if "s" in expected:
        for k, want in enumerate(expected["s"]):
            checks.append(
                _compare(f"s_{k}", report.results[k].s_k, want, 1e-3, 0.0)
            )
    if "psi_identity" in expected:
        for k, want in enumerate(expected["psi_identity"]):
            checks.append(
                _compare(
                    f"psi_identity_{k}",
                    report.results[k].psi_before,
                    want,
                    0.0,
                    5e-3,
                )
            )
    if "psi_balanced" in expected:
        for k, want in enumerate(expected["psi_balanced"]):
            checks.append(
                _compare(
                    f"psi_balanced_{k}",
                    report.results[k].psi_after,
                    want,
                    0.0,
                    5e-3,
                )
            )
    if "ratios" in expected:
        for k, want in enumerate(expected["ratios"]):
            checks.append(_compare(f"ratio_{k}", report.ratios[k], want, 1e-3, 0.0))
    if "total_ratio" in expected:
        checks.append(
            _compare("total_ratio", report.total_ratio, expected["total_ratio"], 1e-3, 0.0)
        )
    all_pass = all(c["pass"] for c in checks)
    lines = ["check                max error    tolerance    verdict"]
    for c in checks:
        lines.append(
            f"{c['name']:<20} {c['max_error']:.6e} {c['tolerance']:.6e} "
            f"{'pass' if c['pass'] else 'FAIL'}"
        )
    lines.append(f"overall: {'pass' if all_pass else 'FAIL'}")
    results = {"checks": checks, "all_pass": bool(all_pass), "balance": balance_results}
    return results, 0 if all_pass else 2, "\n".join(lines)


def run_command(command: str, spec: CascadeSpecFile, flags: RunFlags) -> tuple[ReportBundle, int]:
    """Dispatch one command on a loaded spec; returns the bundle and exit code."""
    bundle = ReportBundle(
        command=command,
        results={},
        provenance={
            "input": str(spec.source),
            "sha256": spec.sha256,
            "seed": flags.seed,
            "epsilon": flags.epsilon if flags.epsilon is not None else spec.epsilon,
            "tol_residual": flags.tol_residual,
            "fd_step": flags.fd_step,
            "samples": flags.samples,
            "kmax": flags.kmax,
            "version": __version__,
        },
    )
    simple: dict[str, Callable[[CascadeSpecFile, RunFlags], tuple[dict, int, str]]] = {
        "validate": _cmd_validate,
        "covariance": _cmd_covariance,
        "purity": _cmd_purity,
        "gradients": _cmd_gradients,
        "sensitivity": _cmd_sensitivity,
        "mc-check": _cmd_mc_check,
    }
    if command in simple:
        results, code, table = simple[command](spec, flags)
    elif command == "balance":
        results, code, table = _cmd_balance(spec, flags, bundle)
    elif command == "ti-bounds":
        results, code, table = _cmd_ti_bounds(spec, flags, bundle)
    elif command == "reproduce-paper":
        results, code, table = _cmd_reproduce(spec, flags, bundle)
    else:
        raise ValueError(f"unknown command {command!r}")
    bundle.results = results
    bundle.table = table
    return bundle, code


def _write_outputs(bundle: ReportBundle, flags: RunFlags) -> None:
    out = flags.out
    out.mkdir(parents=True, exist_ok=True)
    report = {
        "command": bundle.command,
        "provenance": bundle.provenance,
        "results": bundle.results,
    }
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    for name, rows in bundle.csv_series.items():
        header = {
            "ti_bounds.csv": "oscillator,k,trace,bound",
            "balance_multiplier.csv": "oscillator,lambda,h",
        }.get(name, "")
        lines = [header] if header else []
        lines.extend(",".join(repr(x) for x in row) for row in rows)
        (out / name).write_text("\n".join(lines) + "\n")
    for name, doc in bundle.extra_files.items():
        (out / name).write_text(json.dumps(doc, indent=2, sort_keys=True))


def _emit(bundle: ReportBundle, flags: RunFlags) -> None:
    if flags.fmt == "json":
        print(json.dumps({"results": bundle.results, "provenance": bundle.provenance}, indent=2, sort_keys=True))
    elif flags.fmt == "csv":
        for name, rows in bundle.csv_series.items():
            print(f"# {name}")
            for row in rows:
                print(",".join(repr(x) for x in row))
        if not bundle.csv_series:
            print(bundle.table)
    else:
        print(bundle.table)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcascade",
        description="Steady-state, sensitivity and balancing analyses of "
        "cascaded oscillator models described by spec files.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("spec", help="path to a cascade spec file (JSON)")
    parser.add_argument("--tol-residual", type=float, default=None, dest="tol_residual")
    parser.add_argument("--fd-step", type=float, default=None, dest="fd_step")
    parser.add_argument("--samples", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--epsilon", type=float, default=None)
    parser.add_argument("--kmax", type=int, default=None)
    parser.add_argument("--out", type=str, default=None)
    parser.add_argument("--format", choices=("json", "csv", "table"), default=None)
    return parser


def _flag_range_problem(ns: argparse.Namespace) -> str | None:
    # library guards raise bare ValueError; reject out-of-range flags up front
    if ns.samples is not None and ns.samples < 1:
        return "--samples must be at least 1"
    if ns.kmax is not None and ns.kmax < 1:
        return "--kmax must be at least 1"
    if ns.fd_step is not None and ns.fd_step <= 0.0:
        return "--fd-step must be positive"
    if ns.epsilon is not None and ns.epsilon <= 0.0:
        return "--epsilon must be positive"
    if ns.tol_residual is not None and ns.tol_residual <= 0.0:
        return "--tol-residual must be positive"
    return None


def main(argv: Sequence[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    problem = _flag_range_problem(ns)
    if problem is not None:
        print(f"validation error: {problem}", file=sys.stderr)
        return 1
    try:
        spec = load_spec(ns.spec)
    except VALIDATION_ERRORS as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    flags = RunFlags.from_spec(spec, ns)
    try:
        bundle, code = run_command(ns.command, spec, flags)
    except VALIDATION_ERRORS as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except (QCascadeError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    _write_outputs(bundle, flags)
    _emit(bundle, flags)
    return code


if __name__ == "__main__":
    sys.exit(main())
