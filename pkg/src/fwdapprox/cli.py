"""Command-line harness: config-driven checks, simulations and experiments.

Subcommands
    basis-check       invariant suite (biorthogonality, frame bounds, norms)
    truncation-rate   projection error vs k with the rate-constant bound
    simulate          scenario generation (CSV long format + coefficient JSON)
    converge          MC convergence study, optionally with --markovian

Every subcommand takes --config <json file> and --out <directory>.  Outputs
are deterministic for a fixed config (no timestamps); CSV is the normative
format, SVG plots are advisory.

Exit codes: 0 success, 1 invariant failure, 2 config error, 3 numerical
failure (instability, domain exhaustion, failed smoothness check).
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .basis import (BasisParams, eval_g_n, eval_g_n_deriv,
                    frame_lower_constant, frame_upper_constant,
                    projector_norm_bound, shift_norm_bound)
from .dynamics import (LevyDriver, ModelSpec, convergence_experiment,
                       delivery_forward, simulate_fk_state)
from .errors import (ConfigError, DomainTooShort, FwdApproxError, GridMismatch,
                     NotSmoothEnough, UnstableStep)
from .markovian import (contract_audit, make_field,
                        markovian_convergence_experiment)
from .projection import (CoeffState, coefficients_fft, commutator_apply,
                         compute_C1, norm_alpha_span, power_iteration_pi_norm)
from .space import Curve, dual_gram_matrix, read_curve_csv
from . import testcurves

__all__ = ["main"]


# -- config loading ----------------------------------------------------------

def _require(cfg: dict, key: str, typ=None):
    if key not in cfg:
        raise ConfigError(f"missing config key {key!r}")
    v = cfg[key]
    if typ is not None and not isinstance(v, typ):
        raise ConfigError(f"config key {key!r} has wrong type {type(v).__name__}")
    return v


def load_params(cfg: dict) -> BasisParams:
    p = _require(cfg, "params", dict)
    try:
        return BasisParams(alpha=float(_require(p, "alpha")),
                           lam=float(_require(p, "lambda")),
                           horizon=float(_require(p, "horizon")),
                           k=int(p.get("k", 0)))
    except (ValueError, TypeError) as e:
        raise ConfigError(f"bad basis parameters: {e}") from e


def load_curve(spec, base_dir: Path) -> Curve:
    if isinstance(spec, str):
        path = base_dir / spec
        if not path.exists():
            raise ConfigError(f"curve file {path} does not exist")
        try:
            return read_curve_csv(str(path))
        except ValueError as e:
            raise ConfigError(f"bad curve file {path}: {e}") from e
    if not isinstance(spec, dict):
        raise ConfigError("curve spec must be a file path or an object")
    kind = _require(spec, "kind")
    kw = {k: v for k, v in spec.items() if k != "kind"}
    factory = {"bump": testcurves.smooth_bump, "exp": testcurves.exp_loading,
               "seasonal": testcurves.seasonal_curve, "flat": testcurves.flat_curve}
    if kind not in factory:
        raise ConfigError(f"unknown curve kind {kind!r}")
    try:
        return factory[kind](**kw)
    except TypeError as e:
        raise ConfigError(f"bad arguments for curve kind {kind!r}: {e}") from e


def load_driver(cfg: dict, base_dir: Path, seed: int) -> LevyDriver:
    d = _require(cfg, "driver", dict)
    loadings = [load_curve(s, base_dir) for s in _require(d, "loadings", list)]
    try:
        return LevyDriver(rank=int(_require(d, "rank")), loadings=loadings,
                          increment_law=d.get("law", "gaussian"),
                          law_param=d.get("law_param"), seed=seed)
    except ValueError as e:
        raise ConfigError(f"bad driver spec: {e}") from e


def load_model(cfg: dict, base_dir: Path, params: BasisParams) -> ModelSpec:
    f0 = load_curve(_require(cfg, "f0"), base_dir)
    beta_spec = cfg.get("beta")
    beta = None
    if beta_spec is not None:
        beta_curve = load_curve(beta_spec, base_dir)
        beta = lambda t: beta_curve
    return ModelSpec(f0=f0, params=params, beta=beta)


def load_k_list(cfg: dict, default) -> list[int]:
    ks = cfg.get("k_list", default)
    if not isinstance(ks, list) or not ks or any(int(k) < 0 for k in ks):
        raise ConfigError("k_list must be a non-empty list of nonnegative integers")
    ks = [int(k) for k in ks]
    if ks != sorted(ks):
        raise ConfigError("k_list must be ascending")
    return ks


def load_times(cfg: dict) -> tuple[float, float, int]:
    dt = float(_require(cfg, "time_step"))
    t_eval = float(_require(cfg, "t_eval"))
    if dt <= 0.0 or t_eval <= 0.0:
        raise ConfigError("time_step and t_eval must be positive")
    n = t_eval / dt
    if abs(n - round(n)) > 1e-9:
        raise ConfigError("time_step must divide t_eval")
    return dt, t_eval, int(round(n))


def load_n_paths(cfg: dict) -> int:
    n = int(cfg.get("n_paths", 1))
    if n < 1:
        raise ConfigError("n_paths must be at least 1")
    return n


# -- output helpers ----------------------------------------------------------

def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_loglog_svg(path: Path, xs, ys_by_label: dict, title: str) -> None:
    """Minimal log-log polyline plot; advisory output only."""
    W, H, pad = 640, 480, 60
    all_y = np.concatenate([np.asarray(v, dtype=float) for v in ys_by_label.values()])
    all_y = all_y[all_y > 0]
    if all_y.size == 0:
        path.write_text(f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" '
                        f'height="{H}"><text x="20" y="40">no positive data'
                        '</text></svg>\n')
        return
    lx = np.log10(np.asarray(xs, dtype=float))
    ly0, ly1 = np.floor(np.log10(all_y.min())), np.ceil(np.log10(all_y.max()))
    lx0, lx1 = lx.min(), lx.max()
    if lx1 == lx0:
        lx1 = lx0 + 1.0
    if ly1 == ly0:
        ly1 = ly0 + 1.0

    def px(v):
        return pad + (v - lx0) / (lx1 - lx0) * (W - 2 * pad)

    def py(v):
        return H - pad - (v - ly0) / (ly1 - ly0) * (H - 2 * pad)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">',
             f'<rect width="{W}" height="{H}" fill="white"/>',
             f'<text x="{W/2:.0f}" y="24" text-anchor="middle" '
             f'font-family="sans-serif" font-size="14">{title}</text>',
             f'<rect x="{pad}" y="{pad}" width="{W-2*pad}" height="{H-2*pad}" '
             'fill="none" stroke="#888"/>']
    for d in np.arange(ly0, ly1 + 0.5):
        parts.append(f'<text x="{pad-8}" y="{py(d):.1f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">1e{int(d)}</text>')
    for i, (label, ys) in enumerate(ys_by_label.items()):
        ys = np.asarray(ys, dtype=float)
        pts = " ".join(f"{px(a):.1f},{py(np.log10(b)):.1f}"
                       for a, b in zip(lx, ys) if b > 0)
        col = colors[i % len(colors)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{col}" '
                     'stroke-width="2"/>')
        parts.append(f'<text x="{W-pad+4}" y="{pad+16*(i+1)}" fill="{col}" '
                     f'font-family="sans-serif" font-size="11">{label}</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n")


def loglog_slope(ks, errs) -> float:
    ks = np.asarray(ks, dtype=float)
    errs = np.asarray(errs, dtype=float)
    keep = errs > 0
    if keep.sum() < 2:
        return 0.0
    return float(np.polyfit(np.log(ks[keep]), np.log(errs[keep]), 1)[0])


# -- subcommands -------------------------------------------------------------

def cmd_basis_check(cfg: dict, base_dir: Path, out: Path) -> int:
    params = load_params(cfg)
    seed = int(cfg.get("seed", 0))
    k = max(int(cfg.get("k", 8)), 0)
    checks = []

    gram = dual_gram_matrix(params, min(k, 8) if k > 0 else 0)
    dev = float(np.max(np.abs(gram - np.eye(gram.shape[0]))))
    checks.append(("biorthogonality_max_dev", dev, 1e-6, dev <= 1e-6))

    # frame bounds on random span elements
    rng = np.random.default_rng(seed)
    k_frame = max(k, 1)
    pf = BasisParams(params.alpha, params.lam, params.horizon, k_frame)
    lo, hi = frame_lower_constant(params), frame_upper_constant(params)
    worst_lo, worst_hi = np.inf, 0.0
    for _ in range(20):
        c = rng.normal(size=2 * k_frame + 1) + 1j * rng.normal(size=2 * k_frame + 1)
        s = CoeffState(complex(rng.normal()), c, pf)
        nsq = norm_alpha_span(s) ** 2
        csq = abs(s.c_star) ** 2 + float(np.sum(np.abs(c) ** 2))
        worst_lo = min(worst_lo, nsq / csq)
        worst_hi = max(worst_hi, nsq / csq)
    checks.append(("frame_lower", worst_lo, lo * 0.98, worst_lo >= lo * 0.98))
    checks.append(("frame_upper", worst_hi, hi * 1.02, worst_hi <= hi * 1.02))

    est = power_iteration_pi_norm(params)
    bound = projector_norm_bound(params)
    rel = abs(est - bound) / bound
    checks.append(("projector_norm_rel_err", rel, 0.01, rel <= 0.01))
    checks.append(("shift_norm_bound", shift_norm_bound(params), np.inf, True))

    # commutator identity: series evaluation vs closed form g_n(t) 1_{|n|>k}
    t_grid = np.linspace(0.0, params.horizon, 5)
    x = np.linspace(0.0, params.horizon, 2**12 + 1)
    worst = 0.0
    k_c = max(k, 2)
    for n in (-2 * k_c, -k_c // 2, 0, k_c // 2, 2 * k_c):
        d = eval_g_n_deriv(params, n, x)
        h = Curve(0.0, d, params.horizon / (x.size - 1), params.horizon)
        for t in t_grid:
            expected = eval_g_n(params, n, float(t)) if abs(n) > k_c else 0.0
            got = commutator_apply(h, k_c, float(t), params)
            worst = max(worst, abs(got - expected))
    checks.append(("commutator_identity_max_dev", worst, 1e-10, worst <= 1e-10))

    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "basis_check.csv", ["check", "value", "threshold", "pass"],
              [[n, repr(float(v)), repr(float(th)), str(bool(ok)).lower()]
               for n, v, th, ok in checks])
    ok_all = all(ok for _, _, _, ok in checks)
    for name, v, th, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {v:.3e} (threshold {th:.3e})")
    return 0 if ok_all else 1


def cmd_truncation_rate(cfg: dict, base_dir: Path, out: Path) -> int:
    params = load_params(cfg)
    f0 = load_curve(_require(cfg, "f0"), base_dir)
    ks = load_k_list(cfg, [4, 8, 16, 32, 64, 128])
    C1 = compute_C1(f0, params)
    n_big = 512
    big = coefficients_fft(f0, n_big, params, n_points=2**15 + 1)
    pb = BasisParams(params.alpha, params.lam, params.horizon, n_big)
    ns = pb.n_range()
    rows, errs = [], []
    ok_all = True
    for k in ks:
        resid = CoeffState(0.0, np.where(np.abs(ns) > k, big.c, 0.0), pb)
        err = norm_alpha_span(resid) ** 2
        errs.append(err)
        ok_all &= err <= C1 / k
        rows.append([k, repr(float(err)), repr(float(C1 / k))])
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "truncation_rate.csv", ["k", "error_sq", "C1_over_k"], rows)
    write_loglog_svg(out / "truncation_rate.svg", ks,
                     {"error_sq": errs, "C1_over_k": [C1 / k for k in ks]},
                     "projection error vs truncation level")
    slope = loglog_slope(ks, errs)
    print(f"slope {slope:.3f}; bound {'holds' if ok_all else 'VIOLATED'} at all k")
    return 0 if ok_all else 1


def cmd_simulate(cfg: dict, base_dir: Path, out: Path) -> int:
    params = load_params(cfg)
    seed = int(cfg.get("seed", 0))
    model = load_model(cfg, base_dir, params)
    driver = load_driver(cfg, base_dir, seed)
    dt, t_eval, n_steps = load_times(cfg)
    n_paths = load_n_paths(cfg)
    k = int(cfg.get("k", 8))
    times = np.linspace(0.0, t_eval, n_steps + 1)
    x = np.linspace(0.0, params.horizon, int(cfg.get("x_points", 33)))
    windows = cfg.get("windows", [])
    for w in windows:
        if not (isinstance(w, list) and len(w) == 2):
            raise ConfigError("each delivery window must be a [T1, T2] pair")

    out.mkdir(parents=True, exist_ok=True)
    scen_rows, fwd_rows, slices = [], [], []
    for pid in range(n_paths):
        path, _ = simulate_fk_state(model, driver, times, k, path_id=pid)
        for j, t in enumerate(times):
            s = path.states[j]
            vals = s.c_star + s.c @ eval_g_n(params, params.n_range(k), x)
            for xi, v in zip(x, vals):
                scen_rows.append([pid, repr(float(t)), repr(float(xi)),
                                  repr(float(np.real(v)))])
            for wi, (T1, T2) in enumerate(windows):
                if t <= T1:
                    F = delivery_forward(s, float(t), float(T1), float(T2))
                    fwd_rows.append([pid, repr(float(t)), wi, repr(float(T1)),
                                     repr(float(T2)), repr(float(np.real(F)))])
            if pid == 0:
                slices.append(json.loads(s.to_json()))
    write_csv(out / "scenarios.csv", ["path_id", "t", "x", "f"], scen_rows)
    if windows:
        write_csv(out / "forwards.csv",
                  ["path_id", "t", "window", "T1", "T2", "F"], fwd_rows)
    (out / "coefficients_path0.json").write_text(
        json.dumps({"times": list(map(float, times)), "states": slices}, indent=1)
        + "\n")
    print(f"wrote {n_paths} paths x {times.size} times to {out}")
    return 0


def cmd_converge(cfg: dict, base_dir: Path, out: Path, markovian: bool) -> int:
    params = load_params(cfg)
    seed = int(cfg.get("seed", 0))
    model = load_model(cfg, base_dir, params)
    driver = load_driver(cfg, base_dir, seed)
    n_paths = load_n_paths(cfg)
    ks = load_k_list(cfg, [4, 8, 16, 32, 64])
    out.mkdir(parents=True, exist_ok=True)
    if markovian:
        m = cfg.get("markovian", {})
        name = m.get("field", "constant")
        kw = {}
        if "kappa" in m:
            kw["kappa"] = float(m["kappa"])
        if "theta" in m:
            kw["theta"] = load_curve(m["theta"], base_dir)
        if "sigma0" in m:
            kw["sigma0"] = float(m["sigma0"])
        try:
            field = make_field(name, driver, params, **kw)
        except (ValueError, KeyError) as e:
            raise ConfigError(f"bad markovian field spec: {e}") from e
        audit = contract_audit(field, params, driver.rank, n_pairs=50, seed=seed)
        if audit["structure_leak"] > 0.0 or audit["lipschitz_b_ratio"] > 1.0 \
                or audit["lipschitz_psi_ratio"] > 1.0:
            print(f"contract audit failed: {audit}")
            return 1
        rows = markovian_convergence_experiment(
            field, model, driver, ks, n_paths,
            n_steps=int(cfg.get("n_steps", 32)))
        table = [[r["k"], repr(r["mc_error"]), repr(r["stderr"]), "",
                  r["n_paths"], r["seed"]] for r in rows]
    else:
        _, t_eval, _ = load_times(cfg)
        rows = convergence_experiment(model, driver, t_eval, ks, n_paths,
                                      n_steps=int(cfg.get("n_steps", 64)))
        table = [[r["k"], repr(r["mc_error"]), repr(r["stderr"]),
                  repr(r["bound_A_over_k"]), r["n_paths"], r["seed"]] for r in rows]
    write_csv(out / "converge.csv",
              ["k", "mc_error", "stderr", "bound", "n_paths", "seed"], table)
    errs = [r["mc_error"] for r in rows]
    curves = {"mc_error": errs}
    if not markovian:
        curves["bound"] = [r["bound_A_over_k"] for r in rows]
    write_loglog_svg(out / "converge.svg", ks, curves,
                     "MC sup-error vs truncation level")
    print(f"slope {loglog_slope(ks, errs):.3f} over k={ks}")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="fwdapprox",
                                 description="forward-curve approximation harness")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("basis-check", "truncation-rate", "simulate", "converge"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", required=True)
        if name == "converge":
            sp.add_argument("--markovian", action="store_true")
    args = ap.parse_args(argv)

    try:
        cfg_path = Path(args.config)
        try:
            cfg = json.loads(cfg_path.read_text())
        except FileNotFoundError as e:
            raise ConfigError(f"config file {cfg_path} not found") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from e
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        base_dir = cfg_path.parent
        out = Path(args.out)
        if args.command == "basis-check":
            return cmd_basis_check(cfg, base_dir, out)
        if args.command == "truncation-rate":
            return cmd_truncation_rate(cfg, base_dir, out)
        if args.command == "simulate":
            return cmd_simulate(cfg, base_dir, out)
        return cmd_converge(cfg, base_dir, out, args.markovian)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (UnstableStep, DomainTooShort, NotSmoothEnough, GridMismatch) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3
    except FwdApproxError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
