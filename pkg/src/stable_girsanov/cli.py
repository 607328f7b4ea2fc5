"""Command-line entry point.

Exit status: 0 when every check of the command passes, 1 on a numeric
failure (a JSON failure report goes to stdout), 2 on a configuration error.
"""

import argparse
import io
import json
import math
import os
import sys
import warnings

import numpy as np
import yaml

from .estimate import (
    check_lower_bound,
    fit_two_sided,
    lower_bound_k,
    mc_density,
    write_density_csv,
)
from .exceptions import ConfigError, GirsanovError, JClassViolation
from .functional import accumulate, identity_errors, write_traces_csv
from .model import check_envelope_11, check_kato_J
from .series import (
    fit_growth,
    kato_Ct,
    kernel_G,
    lemma_constants,
    qbar_recursion,
    qn_recursion,
    semigroup_check,
    series_summary,
    write_series_csv,
)
from .sim import SimMode, simulate_paths, write_paths_csv

COMMANDS = ("refcheck", "simulate", "identities", "weights", "mc-density", "series", "kato",
            "bounds", "ck", "all")


class Output:
    """Collects artifacts and writes them with a provenance header."""

    def __init__(self, cfg, out_dir):
        self.cfg = cfg
        self.out_dir = out_dir
        self.files = []

    def _header(self):
        return f"# config_hash: {self.cfg.config_hash}\n# seed: {self.cfg.seed}\n"

    def table(self, name, header, rows):
        """Write rows as CSV (17 significant digits) or as a JSON list of records."""
        rows = [[_num(v) for v in r] for r in rows]
        if self.cfg.format == "json":
            self.json(f"{name}_table", {"columns": header, "rows": rows})
            return
        buf = io.StringIO()
        buf.write(self._header())
        buf.write(",".join(header) + "\n")
        for r in rows:
            buf.write(",".join(_csv_cell(v) for v in r) + "\n")
        self._write(f"{name}.csv", buf.getvalue())

    def text_csv(self, name, writer):
        buf = io.StringIO()
        buf.write(self._header())
        writer(buf)
        self._write(f"{name}.csv", buf.getvalue())

    def json(self, name, payload):
        doc = {"meta": {"config_hash": self.cfg.config_hash, "seed": self.cfg.seed}}
        doc.update(payload)
        self._write(f"{name}.json", json.dumps(_jsonable(doc), indent=2, sort_keys=False) + "\n")

    def _write(self, filename, text):
        os.makedirs(self.out_dir, exist_ok=True)
        path = os.path.join(self.out_dir, filename)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        self.files.append(path)


def _num(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _csv_cell(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


# -- commands ------------------------------------------------------------------


def cmd_refcheck(cfg, out):
    ref, spec = cfg.reference(), cfg.process()
    t_set = cfg.t_probes
    h = cfg.x_max * 2 / (cfg.nodes - 1)
    coarse = check_envelope_11(ref, spec, t_set, np.arange(0.0, 10.0 + h / 2, h))
    fine = check_envelope_11(ref, spec, t_set, np.arange(0.0, 10.0 + h / 4, h / 2))
    drift = max(abs(fine.m1 / coarse.m1 - 1), abs(fine.m2 / coarse.m2 - 1))
    ok = 0 < fine.m1 <= fine.m2 < math.inf and drift <= cfg.tol["envelope_refine_rel"]
    report = {"m1": fine.m1, "m2": fine.m2, "m1_coarse": coarse.m1, "m2_coarse": coarse.m2,
              "refinement_drift": drift, "t_probes": t_set, "pass": ok}
    out.json("refcheck", report)
    return ok, report


def cmd_simulate(cfg, out):
    spec = cfg.process()
    mode = SimMode(cfg.mode)
    eps = 1.0 / cfg.l if mode is SimMode.PIECEWISE_CONSTANT else cfg.density_epsilon()
    if cfg.epsilon is not None:
        eps = cfg.epsilon
    n = min(cfg.n_paths, 1000)
    paths = simulate_paths(spec, cfg.x0, cfg.horizon, cfg.l, eps, mode, n, cfg.seed, threads=cfg.threads)
    out.text_csv("paths", lambda fh: write_paths_csv(paths, fh))
    counts = [len(p.large_jumps) for p in paths]
    report = {"n_paths": n, "epsilon": eps, "mode": mode.value, "mean_large_jumps": float(np.mean(counts)),
              "pass": True}
    out.json("simulate", report)
    return True, report


def cmd_identities(cfg, out):
    spec, fspec = cfg.process(), cfg.functional_spec()
    l, T = cfg.identity_l, cfg.identity_horizon
    paths = simulate_paths(spec, cfg.x0, T, l, 1.0 / l, SimMode.PIECEWISE_CONSTANT, cfg.identity_paths,
                           cfg.seed, threads=cfg.threads)
    worst_exact = 0.0
    worst_float = 0.0
    rows = []
    traces = []
    for p in paths:
        tr = accumulate(p, fspec, spec, l)
        traces.append(tr)
        for n in range(1, cfg.identity_n_max + 1):
            fe, be, _ = identity_errors(tr, p, fspec, spec, l, n, exact=True)
            ff, bf, _ = identity_errors(tr, p, fspec, spec, l, n)
            worst_exact = max(worst_exact, fe, be)
            worst_float = max(worst_float, ff, bf)
            rows.append([p.path_index, n, fe, be, ff, bf])
    ok = worst_exact <= cfg.tol["identity_rel"] and worst_float <= cfg.tol["identity_rel"]
    out.table("identities", ["path_id", "n", "rel_err_forward", "rel_err_backward",
                             "scaled_err_forward_float", "scaled_err_backward_float"], rows)
    out.text_csv("traces", lambda fh: write_traces_csv(traces, fh))
    report = {"n_paths": len(paths), "l": l, "horizon": T, "max_relative_error": worst_exact,
              "max_scaled_error_float": worst_float, "pass": ok}
    print(f"identities: max relative error {worst_exact:.3e} (float, scaled: {worst_float:.3e})")
    out.json("identities", report)
    return ok, report


def cmd_weights(cfg, out):
    spec, fspec = cfg.process(), cfg.functional_spec()
    rows = []
    ok = True
    for t in cfg.t_probes:
        eps = cfg.density_epsilon()
        paths = simulate_paths(spec, cfg.x0, t, cfg.l, eps, SimMode(cfg.mode), cfg.n_paths, cfg.seed,
                               threads=cfg.threads)
        w = np.array([accumulate(p, fspec, spec, cfg.l).l_weight for p in paths])
        mean, se = float(w.mean()), float(w.std(ddof=1) / math.sqrt(w.size))
        z = abs(mean - 1) / se if se > 0 else abs(mean - 1) / 1e-300
        passed = z <= cfg.tol["weight_sigma"] and bool(np.all(w > 0))
        ok &= passed
        rows.append([t, mean, se, z, int(passed)])
    out.table("weights", ["t", "mean_weight", "std_err", "z_score", "pass"], rows)
    report = {"rows": rows, "pass": ok}
    out.json("weights", report)
    return ok, report


def cmd_mc_density(cfg, out):
    spec, fspec, ref = cfg.process(), cfg.functional_spec(), cfg.reference()
    est = mc_density(spec, fspec, ref, cfg.x0, cfg.horizon, cfg.l, cfg.n_paths, seed=cfg.seed,
                     epsilon=cfg.density_epsilon(), threads=cfg.threads, z_half=cfg.z_half)
    out.text_csv("density", lambda fh: write_density_csv(est, fh))
    report = {"t": est.t, "n_paths": est.n_paths, "mean_weight": est.mean_weight,
              "mean_weight_se": est.mean_weight_se, "ess": est.ess}
    ok = True
    if fspec.is_zero:
        w = est.estimator.bin_width
        exact = (ref.cdf(est.t, est.z_grid - est.x0 + w / 2) - ref.cdf(est.t, est.z_grid - est.x0 - w / 2)) / w
        dev = float(np.max(np.abs(est.values - exact) / est.std_err))
        ok = dev <= cfg.tol["density_sigma"]
        report["max_abs_dev_over_se"] = dev
    report["pass"] = ok
    out.json("mc_density", report)
    return ok, report


def _series_tables(cfg, t):
    spec, fspec, ref, grid = cfg.process(), cfg.functional_spec(), cfg.reference(), cfg.grid()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        table = qn_recursion(spec, fspec, ref, grid, t, cfg.l, cfg.n_max, quad_tol=cfg.tol["quad_tol"])
        qbar_recursion(spec, fspec, ref, grid, t, cfg.n_max, table=table, quad_tol=cfg.tol["quad_tol"])
    return table


def cmd_series(cfg, out):
    ok = True
    summaries = []
    ks = []
    for t in cfg.t_probes:
        table = _series_tables(cfg, t)
        dom = min(float((table.q_bar[n] - np.abs(table.q[n])).min()) for n in range(1, cfg.n_max + 1))
        fit = fit_growth(table)
        passed = dom >= -cfg.tol["domination"]
        ok &= passed
        summary = series_summary(table)
        summary.update(domination_margin=dom, pass_domination=passed)
        summaries.append(summary)
        ks.append(fit.k)
        for n in range(cfg.n_max + 1):
            out.text_csv(f"series_t{t:g}_n{n}", lambda fh, table=table, n=n: write_series_csv(table, fh, n))
    t2 = max((t for t, k in zip(cfg.t_probes, ks) if k < 1), default=None)
    report = {"levels": summaries, "empirical_t2": t2, "pass": ok}
    out.json("series", report)
    return ok, report


def cmd_kato(cfg, out):
    spec, fspec, ref = cfg.process(), cfg.functional_spec(), cfg.reference()
    try:
        j_table = check_kato_J(spec, fspec, cfg.kato_t, ref)
        c_table = kato_Ct(spec, fspec, ref, cfg.kato_t, cfg.grid(), strict=False)
    except JClassViolation as exc:
        report = {"error": str(exc), "pass": False}
        out.json("kato", report)
        return False, report
    vals = [v for _, v in c_table]
    increasing = all(b > a for a, b in zip(vals, vals[1:])) or fspec.is_zero
    small = vals[0] <= cfg.tol["kato_small_ratio"] * vals[-1]
    ok = increasing and small
    rows = [[t, j, c] for (t, j), (_, c) in zip(j_table, c_table)]
    out.table("kato", ["t", "j_potential", "c_t"], rows)
    report = {"rows": rows, "increasing": increasing, "small_at_short_time": small, "pass": ok}
    out.json("kato", report)
    return ok, report


def cmd_bounds(cfg, out):
    spec, fspec, ref = cfg.process(), cfg.functional_spec(), cfg.reference()
    estimates = [
        mc_density(spec, fspec, ref, cfg.x0, t, cfg.l, cfg.n_paths, seed=cfg.seed + i,
                   epsilon=cfg.density_epsilon(), threads=cfg.threads, z_half=cfg.z_half)
        for i, t in enumerate(cfg.t_probes)
    ]
    rep = fit_two_sided(estimates, ref, noise_band=cfg.tol["noise_band"])
    k_values, failures = [], []
    for est in estimates:
        table = _series_tables(cfg, est.t)
        lb = lower_bound_k(table, ref)
        k_values.append(lb.k)
        failures.extend((est.t, z) for z in check_lower_bound(lb, est, ref, cfg.tol["lower_band"]))
    rep.k_lower = max(k_values)
    ok = (rep.violations == 0 and min(rep.c3, rep.c4, rep.c5, rep.c6) > 0 and not failures)
    report = {"m1": rep.m1, "m2": rep.m2, "c3": rep.c3, "c4": rep.c4, "c5": rep.c5, "c6": rep.c6,
              "k": rep.k_lower, "violations": rep.violations, "nodes": rep.nodes,
              "lower_bound_failures": failures, "degenerate": rep.degenerate, "pass": ok}
    out.json("bounds", report)
    return ok, report


def cmd_ck(cfg, out):
    spec, fspec, ref, grid = cfg.process(), cfg.functional_spec(), cfg.reference(), cfg.grid()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        lhs, rhs, rel = semigroup_check(spec, fspec, ref, grid, cfg.ck_t, cfg.ck_t, cfg.l, cfg.n_max,
                                        cfg.x0, cfg.x0)
    ok = rel <= cfg.tol["semigroup_rel"]
    report = {"t": cfg.ck_t, "s": cfg.ck_t, "lhs": lhs, "rhs": rhs, "relative_difference": rel, "pass": ok}
    out.json("ck", report)
    return ok, report


def cmd_all(cfg, out):
    results = {}
    ok = True
    for name in COMMANDS[:-1]:
        passed, report = HANDLERS[name](cfg, out)
        results[name] = passed
        ok &= passed
    # Lemma constants and G symmetry have no dedicated command
    spec, fspec, ref, grid = cfg.process(), cfg.functional_spec(), cfg.reference(), cfg.grid()
    c_short = lemma_constants(cfg.lemma_k, cfg.lemma_l, 50)
    c_long = lemma_constants(cfg.lemma_k, cfg.lemma_l, cfg.lemma_n_max)
    stable = all(abs(a - b) <= 1e-12 * abs(b) for a, b in zip(c_short, c_long))
    g_xz = kernel_G(spec, fspec, ref, grid, cfg.horizon, 1.0, -1.0)
    g_zx = kernel_G(spec, fspec, ref, grid, cfg.horizon, -1.0, 1.0)
    g_ok = abs(g_xz - g_zx) <= cfg.tol["g_symmetry"]
    results["lemma_constants"] = stable
    results["g_symmetry"] = g_ok
    ok &= stable and g_ok
    out.json("all", {"results": results, "lemma_constants": c_long, "g": [g_xz, g_zx], "pass": ok})
    return ok, {"results": results}


HANDLERS = {
    "refcheck": cmd_refcheck,
    "simulate": cmd_simulate,
    "identities": cmd_identities,
    "weights": cmd_weights,
    "mc-density": cmd_mc_density,
    "series": cmd_series,
    "kato": cmd_kato,
    "bounds": cmd_bounds,
    "ck": cmd_ck,
    "all": cmd_all,
}


def _parse_override(text):
    if "=" not in text:
        raise ConfigError(f"--set expects KEY=VALUE, got {text!r}", key=text)
    key, value = text.split("=", 1)
    return key.strip(), yaml.safe_load(value)


def build_parser():
    parser = argparse.ArgumentParser(prog="stable-girsanov", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="YAML or JSON configuration file")
    parser.add_argument("--preset", help="named preset: cauchy-ref, ftheta-0.3")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--format", choices=("csv", "json"), help="table format")
    parser.add_argument("--threads", type=int, help="worker threads for path simulation")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration key (repeatable)")
    return parser


def main(argv=None):
    from .config import load_config

    args = build_parser().parse_args(argv)
    try:
        overrides = dict(_parse_override(s) for s in args.set)
        for flag, key in (("seed", "seed"), ("out", "output_dir"), ("format", "format"),
                          ("threads", "threads")):
            value = getattr(args, flag)
            if value is not None:
                overrides[key] = value
        cfg = load_config(args.config, args.preset, overrides)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "key": exc.key, "message": str(exc)}), file=sys.stderr)
        return 2
    out = Output(cfg, cfg.output_dir)
    try:
        ok, report = HANDLERS[args.command](cfg, out)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "key": exc.key, "message": str(exc)}), file=sys.stderr)
        return 2
    except (GirsanovError, ArithmeticError, ValueError, RuntimeError) as exc:
        print(json.dumps({"command": args.command, "pass": False, "error": str(exc)}))
        return 1
    if not ok:
        print(json.dumps(_jsonable({"command": args.command, "pass": False, "report": report})))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
