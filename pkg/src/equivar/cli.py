"""Batch front-end: JSON configs in, CSV tables and JSON verdicts out.

Every command is reproducible: a seed is mandatory (config or flag, never
the clock), and identical configs produce byte-identical CSV bodies.
Timestamps appear only in the JSON report's metadata block.

Exit codes: 0 all checks passed, 1 a verification failed or a runtime data
error occurred, 2 the config did not validate.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .checks import (
    group_axioms,
    loss_invariance,
    maximal_invariance,
    random_theta,
    transitivity,
)
from .estimators import (
    BlockVarianceEstimator,
    EquivariantRegressor,
    NotEstimable,
    WrongShape,
    estimator_from_spec,
    resolve_omega,
    resolve_weights,
)
from .groups import DegenerateBlock
from .losses import LossKind, ZeroVariance
from .model import Design, ParameterPoint
from .risk import (
    IncompatiblePair,
    analytic_risk_beta,
    analytic_risk_lik_at,
    analytic_risk_quad,
    dominance_sweep,
    equivariance_check,
    mc_risk,
    orbit_constancy_check,
)

DEFAULT_XP = ((1.0, 0.0), (1.0, 1.0))
DEFAULT_REPS = (1, 3)
DEFAULT_SWEEP_REPS = (3, 3)
DEFAULT_COV_REPS = (3, 3)
DEFAULT_GRID = {"start": 0.1, "stop": 1.5, "step": 0.05}
DEFAULT_REPLICATES = 100_000
REPLICATE_FLOOR = 100

_CSV_HEADER = "population,h,mean_loss,std_error,replicates,seed"

_KNOWN_KEYS = {
    "xp", "reps", "beta", "sigma2", "cov_reps", "estimator", "loss",
    "replicates", "seed", "grid", "y", "out", "workers",
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    design: Design
    theta: ParameterPoint
    cov_design: Design
    estimator: str
    loss: LossKind
    replicates: int
    seed: int
    grid: np.ndarray
    y: np.ndarray | None
    out: Path | None
    workers: int


def _load_document(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(doc) - _KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return doc


def _parse_grid(spec) -> np.ndarray:
    if isinstance(spec, dict):
        try:
            start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"grid spec needs numeric start/stop/step: {exc}") from exc
        if step <= 0 or stop < start:
            raise ConfigError("grid needs step > 0 and stop >= start")
        count = int(np.floor((stop - start) / step + 0.5)) + 1
        grid = np.array([round(start + k * step, 10) for k in range(count)])
    else:
        try:
            grid = np.array([float(v) for v in spec], dtype=float)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"grid must be a list of numbers or start/stop/step: {exc}") from exc
    if grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ConfigError("grid must be positive and strictly increasing")
    return grid


def load_config(command: str, args: argparse.Namespace) -> RunConfig:
    doc = _load_document(args.config)

    xp = doc.get("xp", DEFAULT_XP)
    reps = doc.get("reps", DEFAULT_SWEEP_REPS if command == "sweep" else DEFAULT_REPS)
    try:
        design = Design(xp=xp, reps=tuple(reps))
        cov_design = Design(xp=xp, reps=tuple(doc.get("cov_reps", DEFAULT_COV_REPS)))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid design: {exc}") from exc

    try:
        theta = ParameterPoint(
            beta=doc.get("beta", [0.0] * design.p),
            sigma2=doc.get("sigma2", [1.0] * design.p),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid parameter point: {exc}") from exc
    if theta.p != design.p:
        raise ConfigError(f"parameter dimension {theta.p} does not match design p={design.p}")

    seed = args.seed if args.seed is not None else doc.get("seed")
    if seed is None:
        raise ConfigError("a seed is required (config key 'seed' or --seed); "
                          "no implicit entropy is ever used")
    try:
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError
    except (TypeError, ValueError):
        raise ConfigError("seed must be an unsigned 64-bit integer") from None

    replicates = args.replicates if args.replicates is not None else doc.get(
        "replicates", DEFAULT_REPLICATES)
    try:
        replicates = int(replicates)
    except (TypeError, ValueError):
        raise ConfigError("replicates must be an integer") from None
    if replicates < REPLICATE_FLOOR:
        raise ConfigError(f"replicates={replicates} is below the floor of {REPLICATE_FLOOR}")

    workers = doc.get("workers", 1)
    try:
        workers = int(workers)
        if workers < 1:
            raise ValueError
    except (TypeError, ValueError):
        raise ConfigError("workers must be a positive integer") from None

    estimator_spec = doc.get("estimator", "ols")
    try:
        estimator = estimator_from_spec(estimator_spec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    loss_name = doc.get("loss")
    if loss_name is None:
        if command == "sweep":
            loss_name = "quad"
        else:
            loss_name = "beta" if isinstance(estimator, EquivariantRegressor) else "quad"
    try:
        loss = LossKind(loss_name)
    except ValueError:
        raise ConfigError(f"unknown loss {loss_name!r}; use 'beta', 'quad' or 'lik'") from None

    grid = _parse_grid(doc.get("grid", DEFAULT_GRID))

    y = doc.get("y")
    if y is not None:
        y = np.asarray(y, dtype=float)
        if y.ndim != 1 or y.size != design.n:
            raise ConfigError(f"y must be a vector of length n={design.n}")

    out = args.out if args.out is not None else doc.get("out")
    out = Path(out) if out is not None else None

    config = RunConfig(
        command=command, design=design, theta=theta, cov_design=cov_design,
        estimator=estimator_spec, loss=loss, replicates=replicates, seed=seed,
        grid=grid, y=y, out=out, workers=workers,
    )
    _validate_for_command(config, estimator)
    return config


def _validate_for_command(config: RunConfig, estimator) -> None:
    command = config.command
    if command == "estimate" and config.y is None:
        raise ConfigError("the estimate command needs response data (config key 'y')")
    if command in ("estimate", "risk"):
        try:
            if isinstance(estimator, BlockVarianceEstimator):
                resolve_weights(estimator.weights, config.design)
                if any(r < 2 for r in config.design.reps):
                    raise NotEstimable(
                        f"variance estimation needs every population observed twice, "
                        f"got reps={config.design.reps}")
            else:
                spec = resolve_omega(estimator.omega, config.design.p)
                if not spec.is_zero:
                    # the corrected family is defined on single-sample-rows designs
                    if any(r != 1 for r in config.design.reps[:-1]):
                        raise WrongShape(
                            f"estimator {config.estimator!r} needs reps (1,...,1,k), "
                            f"got {config.design.reps}")
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        if command == "risk":
            beta_pair = isinstance(estimator, EquivariantRegressor) and config.loss is LossKind.BETA
            cov_pair = isinstance(estimator, BlockVarianceEstimator) and config.loss in (
                LossKind.QUAD, LossKind.LIK)
            if not (beta_pair or cov_pair):
                raise ConfigError(
                    f"estimator {config.estimator!r} is incompatible with loss "
                    f"{config.loss.value!r}")
    if command == "sweep":
        if config.loss is LossKind.BETA:
            raise ConfigError("sweeps apply to variance losses; use loss 'quad' or 'lik'")
        if any(r < 2 for r in config.design.reps):
            raise ConfigError(
                f"sweeps need every population observed twice, got reps={config.design.reps}")
    if command == "verify":
        if any(r != 1 for r in config.design.reps[:-1]):
            raise ConfigError(
                f"verify needs a coefficient-side design with reps (1,...,1,k), "
                f"got {config.design.reps}; covariance suites use 'cov_reps'")
        if any(r < 2 for r in config.cov_design.reps):
            raise ConfigError(
                f"cov_reps must observe every population twice, got {config.cov_design.reps}")


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_csv(path: Path, rows: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_CSV_HEADER + "\n")
        for row in rows:
            fh.write(row + "\n")


def _write_report(path: Path, report: dict) -> None:
    report = dict(report)
    report["metadata"] = {"generated_at": datetime.now(timezone.utc).isoformat()}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(report, indent=2, sort_keys=True) + "\n")


def _analytic_value(config: RunConfig, estimator) -> float | None:
    design = config.design
    if isinstance(estimator, EquivariantRegressor):
        if any(r != 1 for r in design.reps[:-1]):
            return None
        spec = resolve_omega(estimator.omega, design.p)
        if spec.constant is None:
            return None
        # constant-correction risk: least squares risk plus the squared last
        # component (unit expected squared scale at the reference point)
        return analytic_risk_beta(design) + float(spec.constant[-1]) ** 2
    weights = resolve_weights(estimator.weights, design)
    if weights.constant is None:
        return None
    per_pop = []
    for h, r in zip(weights.constant, design.reps):
        nu = r - 1
        if config.loss is LossKind.QUAD:
            per_pop.append(analytic_risk_quad(h, nu))
        else:
            per_pop.append(analytic_risk_lik_at(h, nu))
    return float(sum(per_pop))


def cmd_estimate(config: RunConfig) -> int:
    estimator = estimator_from_spec(config.estimator)
    fitted = estimator.fit(config.design, config.y)
    report: dict = {"command": "estimate", "estimator": config.estimator}
    if isinstance(fitted, EquivariantRegressor):
        values = fitted.coef_
        report["coef"] = values.tolist()
        print("coef:", " ".join(_fmt(v) for v in values))
    else:
        values = fitted.variances_
        report["variances"] = values.tolist()
        print("variances:", " ".join(_fmt(v) for v in values))
    if config.out is not None:
        config.out.mkdir(parents=True, exist_ok=True)
        _write_report(config.out / "report.json", report)
    return 0


def cmd_risk(config: RunConfig) -> int:
    estimator = estimator_from_spec(config.estimator)
    result = mc_risk(config.design, estimator, config.loss, config.theta,
                     config.replicates, config.seed, workers=config.workers)
    analytic = _analytic_value(config, estimator)
    verdict = None
    if analytic is not None:
        verdict = "PASS" if abs(result.mean_loss - analytic) <= 4.0 * result.std_error else "FAIL"
    print(f"risk[{config.estimator} | {config.loss.value}] = {result.mean_loss:.6f} "
          f"+- {result.std_error:.6f}  (replicates={result.replicates}, seed={result.seed})")
    if analytic is not None:
        print(f"analytic = {analytic:.6f}  verdict = {verdict}")
    if config.out is not None:
        config.out.mkdir(parents=True, exist_ok=True)
        row = ",".join(["all", "", _fmt(result.mean_loss), _fmt(result.std_error),
                        str(result.replicates), str(result.seed)])
        _write_csv(config.out / "risk.csv", [row])
        _write_report(config.out / "report.json", {
            "command": "risk",
            "estimator": config.estimator,
            "loss": config.loss.value,
            "mean_loss": result.mean_loss,
            "std_error": result.std_error,
            "replicates": result.replicates,
            "seed": result.seed,
            "failures": result.failures,
            "analytic": analytic,
            "verdict": verdict,
        })
    return 1 if verdict == "FAIL" else 0


def cmd_sweep(config: RunConfig) -> int:
    result = dominance_sweep(config.design, config.loss, config.grid, config.theta,
                             config.replicates, config.seed, workers=config.workers)
    step = float(np.max(np.diff(result.h_grid))) if result.h_grid.size > 1 else 0.0
    argmin_h = result.argmin_h()
    verdicts = []
    for j, r in enumerate(config.design.reps):
        expected = (r - 1.0) / (r + 1.0) if config.loss is LossKind.QUAD else 1.0
        ok = bool(abs(argmin_h[j] - expected) <= step * (1.0 + 1e-9))
        verdicts.append({
            "population": j + 1,
            "argmin_h": float(argmin_h[j]),
            "expected_h": expected,
            "passed": ok,
        })
        print(f"population {j + 1}: argmin h = {argmin_h[j]:.4f} "
              f"(expected {expected:.4f} +- {step:.4f}) -> {'PASS' if ok else 'FAIL'}")
    if config.out is not None:
        config.out.mkdir(parents=True, exist_ok=True)
        total_rows = []
        for k, h in enumerate(result.h_grid):
            est = result.estimates[k]
            total_rows.append(",".join(["all", _fmt(h), _fmt(est.mean_loss),
                                        _fmt(est.std_error), str(est.replicates),
                                        str(est.seed)]))
        _write_csv(config.out / "sweep.csv", total_rows)
        pop_rows = []
        for j in range(config.design.p):
            for k, h in enumerate(result.h_grid):
                pop_rows.append(",".join([str(j + 1), _fmt(h),
                                          _fmt(result.population_mean[k, j]),
                                          _fmt(result.population_se[k, j]),
                                          str(result.replicates), str(result.seed)]))
        _write_csv(config.out / "sweep_by_population.csv", pop_rows)
        _write_report(config.out / "report.json", {
            "command": "sweep",
            "loss": config.loss.value,
            "replicates": result.replicates,
            "seed": result.seed,
            "grid": result.h_grid.tolist(),
            "populations": verdicts,
            "passed": all(v["passed"] for v in verdicts),
        })
    return 0 if all(v["passed"] for v in verdicts) else 1


def cmd_verify(config: RunConfig) -> int:
    design = config.design
    cov_design = config.cov_design
    seed = config.seed
    checks: list[dict] = []

    for result in (
        group_axioms(design, trials=1000, seed=seed),
        loss_invariance(design, trials=1000, seed=seed + 1),
        transitivity(design, trials=1000, seed=seed + 2),
        maximal_invariance(design, trials=1000, seed=seed + 3),
    ):
        checks.append(result.as_dict())

    equivariance_targets = [
        ("equivariance_ols", design, EquivariantRegressor()),
        ("equivariance_corrected", design, EquivariantRegressor(omega=np.ones(design.p))),
        ("equivariance_cov", cov_design, BlockVarianceEstimator(weights="shrinkage")),
    ]
    for name, dsn, estimator in equivariance_targets:
        rep = equivariance_check(dsn, estimator, transform_count=1000,
                                 sample_count=1, seed=seed + 4)
        checks.append({
            "name": name,
            "passed": rep.passed,
            "worst": rep.max_deviation,
            "tolerance": rep.tolerance,
            "trials": rep.pairs,
        })

    rng = np.random.default_rng(seed + 5)
    orbit_targets = [
        ("orbit_ols_beta", design, EquivariantRegressor(), LossKind.BETA),
        ("orbit_shrunk_cov_quad", cov_design, BlockVarianceEstimator("shrinkage"),
         LossKind.QUAD),
    ]
    for name, dsn, estimator, loss in orbit_targets:
        thetas = [ParameterPoint.origin(dsn.p)] + [random_theta(rng, dsn.p) for _ in range(10)]
        rep = orbit_constancy_check(dsn, estimator, loss, thetas, config.replicates,
                                    seed, workers=config.workers)
        checks.append({
            "name": name,
            "passed": rep.passed,
            "worst": rep.max_sigma,
            "tolerance": 4.0,
            "trials": len(thetas),
            "risks": [e.mean_loss for e in rep.estimates],
        })

    all_passed = all(c["passed"] for c in checks)
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']} "
              f"(worst {c['worst']:.3e} <= {c['tolerance']:.0e}, trials {c['trials']})")
    print("verify:", "PASS" if all_passed else "FAIL")
    if config.out is not None:
        config.out.mkdir(parents=True, exist_ok=True)
        _write_report(config.out / "report.json", {
            "command": "verify",
            "passed": all_passed,
            "checks": checks,
            "replicates": config.replicates,
            "seed": seed,
        })
    return 0 if all_passed else 1


_COMMANDS = {
    "estimate": cmd_estimate,
    "risk": cmd_risk,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="equivar",
        description="Minimum-risk equivariant estimation and verification for "
                    "replicated fixed-design normal linear models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("estimate", "estimate coefficients or variances from supplied data"),
        ("risk", "Monte Carlo risk of one estimator against its analytic oracle"),
        ("sweep", "risk curve over a grid of constant variance weights"),
        ("verify", "run the group, invariance, equivariance and constancy suites"),
    ):
        cmd = sub.add_parser(name, help=helptext)
        cmd.add_argument("--config", type=Path, help="JSON config file")
        cmd.add_argument("--seed", type=int, help="overrides the config seed")
        cmd.add_argument("--replicates", type=int, help="overrides the config replicates")
        cmd.add_argument("--out", type=Path, help="directory for CSV/JSON reports")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.command, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        return _COMMANDS[args.command](config)
    except (DegenerateBlock, ZeroVariance, NotEstimable, WrongShape,
            IncompatiblePair, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
