"""Command-line front end.

Every subcommand reads one JSON config (``--config``; defaults are used for
missing sections), runs the analysis and writes a table as CSV or JSON.
Exit codes: 0 success, 1 failed validation checks, 2 config/schema errors,
3 domain errors raised by the library.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import jsonschema
import numpy as np

from . import approx, graph, risk, sim, stability, variance
from .errors import PlatoonRiskError, UnstablePlatoon

EXIT_OK = 0
EXIT_VALIDATE_FAILED = 1
EXIT_CONFIG = 2
EXIT_DOMAIN = 3

COMMANDS = (
    "spectrum",
    "stability",
    "risk",
    "joint-risk",
    "limits",
    "tradeoff",
    "sweep",
    "fit-approx",
    "simulate",
    "validate",
)

# -- configuration ---------------------------------------------------------------------

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int2 = {"type": "integer", "minimum": 2}


def _topology(kind, props, required):
    return {
        "type": "object",
        "properties": {"type": {"const": kind}, **props},
        "required": ["type", *required],
        "additionalProperties": False,
    }


TOPOLOGY_SCHEMA = {
    "oneOf": [
        _topology("complete", {"n": _int2, "k": _pos}, ["n", "k"]),
        _topology("path", {"n": _int2, "k": _pos}, ["n", "k"]),
        _topology("p_cycle", {"n": _int2, "k": _pos, "p": {"type": "integer", "minimum": 1}}, ["n", "k", "p"]),
        _topology("spatial", {"n": _int2, "k0": _pos, "gamma": {"type": "number", "minimum": 0}}, ["n", "k0", "gamma"]),
        _topology(
            "perturbed_complete",
            {"n": _int2, "k_star": _pos, "b": {"type": "number", "minimum": 0}, "seed": {"type": "integer", "minimum": 0}},
            ["n", "k_star", "b"],
        ),
        _topology(
            "random",
            {
                "n": _int2,
                "edge_prob": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "weight_range": {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2},
            },
            ["n", "edge_prob"],
        ),
        _topology(
            "edges",
            {
                "n": _int2,
                "edges": {
                    "type": "array",
                    "items": {"type": "array", "items": _num, "minItems": 3, "maxItems": 3},
                },
            },
            ["n", "edges"],
        ),
        _topology("file", {"path": {"type": "string"}}, ["path"]),
    ]
}

_grid = {
    "oneOf": [
        {"type": "array", "items": _num, "minItems": 1},
        {
            "type": "object",
            "properties": {"start": _num, "stop": _num, "num": {"type": "integer", "minimum": 1}},
            "required": ["start", "stop", "num"],
            "additionalProperties": False,
        },
    ]
}


def _section(props):
    return {"type": "object", "properties": props, "additionalProperties": False}


CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "model": _section(
            {
                "topology": TOPOLOGY_SCHEMA,
                "gain_scale": _pos,
                "beta": _pos,
                "tau": {"type": "number", "minimum": 0},
                "g": _num,
                "d": _pos,
            }
        ),
        "collision": _section(
            {"c": {"type": "number", "minimum": 1}, "eps": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}}
        ),
        "detachment": _section(
            {
                "a": {"type": "number", "minimum": 1},
                "h": _pos,
                "eps": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            }
        ),
        "joint": _section({"split": {"type": "array", "items": _pos, "minItems": 1}, "event": {"enum": ["collision", "detachment"]}}),
        "stability": _section({"boundary_samples": {"type": "integer", "minimum": 2}}),
        "sweep": _section(
            {"variable": {"enum": ["tau", "n", "p", "gamma", "b", "r"]}, "values": _grid}
        ),
        "fit": _section({"m1": {"type": "integer", "minimum": 10}, "m2": {"type": "integer", "minimum": 10}}),
        "simulation": _section(
            {
                "dt": _pos,
                "T": _pos,
                "burn_in": {"type": ["number", "null"], "minimum": 0},
                "stride": {"type": ["integer", "null"], "minimum": 1},
                "replicas": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "workers": {"type": "integer", "minimum": 1},
            }
        ),
        "validate": _section(
            {
                "std_rtol": _pos,
                "risk_rtol": _pos,
                "joint_eps": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
            }
        ),
    },
}

DEFAULT_CONFIG = {
    "model": {
        "topology": {"type": "complete", "n": 5, "k": 2.222},
        "gain_scale": 1.0,
        "beta": 2.2,
        "tau": 0.1,
        "g": 1.0,
        "d": 1.0,
    },
    "collision": {"c": 1.0, "eps": 0.01},
    "detachment": {"a": 2.0, "h": 1.0, "eps": 0.05},
    "joint": {"event": "collision"},
    "stability": {},
    "fit": {"m1": 100, "m2": 80},
    "simulation": {"dt": 1e-3, "T": 15.0, "burn_in": 5.0, "stride": 100, "replicas": 1000, "seed": 0, "workers": 1},
    "validate": {"std_rtol": 0.05, "risk_rtol": 0.10, "joint_eps": 0.4},
}


class ConfigError(Exception):
    pass


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key != "topology":
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path: str | None) -> dict:
    """Read, validate and complete a config file (``None`` gives the defaults)."""
    user = {}
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    validate_config(user)
    cfg = _merge(DEFAULT_CONFIG, user)
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from exc


def build_graph(topo: dict) -> graph.WeightedGraph:
    kind = topo["type"]
    if kind == "complete":
        return graph.make_complete(topo["n"], topo["k"])
    if kind == "path":
        return graph.make_path(topo["n"], topo["k"])
    if kind == "p_cycle":
        return graph.make_p_cycle(topo["n"], topo["k"], topo["p"])
    if kind == "spatial":
        return graph.make_spatial(topo["n"], topo["k0"], topo["gamma"])
    if kind == "perturbed_complete":
        return graph.make_perturbed_complete(topo["n"], topo["k_star"], topo["b"], topo.get("seed", 0))
    if kind == "random":
        return graph.make_random_connected(
            topo["n"], topo["edge_prob"], topo.get("seed", 0), tuple(topo.get("weight_range", (1.0, 1.0)))
        )
    if kind == "edges":
        return graph.graph_from_json({"n": topo["n"], "edges": topo["edges"]})
    return graph.load_graph(topo["path"])


def build_model(cfg: dict) -> sim.PlatoonModel:
    m = cfg["model"]
    G = build_graph(m["topology"])
    if m.get("gain_scale", 1.0) != 1.0:
        G = G.scaled(m["gain_scale"])
    return sim.PlatoonModel(G, m["beta"], m["tau"], m["g"], m["d"])


def collision_spec(cfg, eps=None) -> risk.EventSpec:
    c = cfg["collision"]
    return risk.EventSpec.collision(cfg["model"]["d"], c["eps"] if eps is None else eps, c["c"])


def detachment_spec(cfg) -> risk.EventSpec:
    c = cfg["detachment"]
    return risk.EventSpec.detachment(cfg["model"]["d"], c["eps"], c["a"], c["h"])


# -- reports ------------------------------------------------------------------------------


@dataclass
class Report:
    command: str
    columns: list
    rows: list
    summary: dict = field(default_factory=dict)
    failed: bool = False
    metadata: dict | None = None


def format_value(v, digits: int):
    if isinstance(v, risk.RiskValue):
        return v.format(digits)
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return f"{v:.{digits}g}"
    return str(v)


def _json_value(v, digits):
    if isinstance(v, risk.RiskValue):
        return v.format(digits) if not v.is_finite else float(f"{v.value:.{digits}g}")
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return format_value(v, digits)
        return float(f"{v:.{digits}g}")
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_json_value(x, digits) for x in v]
    if isinstance(v, dict):
        return {k: _json_value(x, digits) for k, x in v.items()}
    return v


def render(report: Report, fmt: str, digits: int, timestamp: bool) -> str:
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds") if timestamp else None
    if fmt == "json":
        doc = {"command": report.command}
        if stamp:
            doc["generated"] = stamp
        doc["summary"] = _json_value(report.summary, digits)
        doc["columns"] = list(report.columns)
        doc["rows"] = [[_json_value(v, digits) for v in row] for row in report.rows]
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    if stamp:
        buf.write(f"# generated {stamp}\n")
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(report.columns)
    for row in report.rows:
        out.writerow([format_value(v, digits) for v in row])
    return buf.getvalue()


def summary_text(report: Report, digits: int) -> str:
    lines = []
    for key, val in report.summary.items():
        if isinstance(val, (list, tuple, np.ndarray)):
            val = "[" + ", ".join(format_value(v, digits) for v in val) + "]"
        else:
            val = format_value(val, digits)
        lines.append(f"{key}: {val}")
    return "\n".join(lines)


# -- commands -------------------------------------------------------------------------------


def cmd_spectrum(cfg) -> Report:
    model = build_model(cfg)
    s = graph.graph_spectrum(model.graph)
    verdict = stability.platoon_stable(s, model.beta, model.tau)
    rows = [[1, 0.0, 0.0, model.beta * model.tau, "", ""]]
    for j, m in enumerate(verdict.per_mode, start=2):
        rows.append([j, float(s.eigenvalues[j - 1]), float(s.eigenvalues[j - 1] * model.tau), model.beta * model.tau, m.in_S, m.margin])
    summary = {
        "n": s.n,
        "effective_resistance": graph.effective_resistance(s),
        "stable": verdict.stable,
        "lambda_2": float(s.eigenvalues[1]),
        "lambda_n": float(s.eigenvalues[-1]),
    }
    return Report("spectrum", ["index", "eigenvalue", "s1", "s2", "in_S", "margin"], rows, summary)


def cmd_stability(cfg) -> Report:
    model = build_model(cfg)
    s = graph.graph_spectrum(model.graph)
    verdict = stability.platoon_stable(s, model.beta, model.tau)
    summary = {"stable": verdict.stable, "marginal_modes": verdict.marginal_modes}
    bt = model.beta * model.tau
    if model.tau > 0 and 0 < bt < 1:
        summary["theta"] = stability.theta(bt)
        summary["max_stable_lambda"] = stability.theta(bt) / model.tau
        summary["resistance_lower_bound"] = stability.resistance_lower_bound(s.n, model.beta, model.tau)
    m = cfg["stability"].get("boundary_samples")
    if m:
        pts = stability.region_boundary_samples(m)
        return Report("stability", ["s1", "s2"], [list(p) for p in pts], summary)
    rows = [[j, p.s1, p.s2, p.in_S, p.margin, p.marginal] for j, p in enumerate(verdict.per_mode, start=2)]
    return Report("stability", ["mode", "s1", "s2", "in_S", "margin", "marginal"], rows, summary)


def _sigma(model):
    s = graph.graph_spectrum(model.graph)
    return variance.sigma_vector(s, model.g, model.tau, model.beta)


def cmd_risk(cfg) -> Report:
    model = build_model(cfg)
    md = _sigma(model)
    cs, ds = collision_spec(cfg), detachment_spec(cfg)
    c_zero, c_inf = risk.collision_thresholds(cs) if cs.eps < 0.5 else (math.inf, math.inf)
    d_zero, d_inf = risk.detachment_thresholds(ds) if ds.eps < 0.5 else (math.inf, math.inf)
    rows = []
    for i, sg in enumerate(md.sigma, start=1):
        rows.append([i, float(sg), risk.collision_risk(float(sg), cs), c_inf, risk.detachment_risk(float(sg), ds), d_inf])
    summary = {
        "collision_threshold": c_inf,
        "collision_zero_threshold": c_zero,
        "detachment_threshold": d_inf,
        "detachment_zero_threshold": d_zero,
        "sigma_star": variance.sigma_star(model.g, model.tau),
    }
    cols = ["pair", "sigma", "collision_risk", "collision_threshold", "detachment_risk", "detachment_threshold"]
    return Report("risk", cols, rows, summary)


def cmd_joint_risk(cfg) -> Report:
    model = build_model(cfg)
    md = _sigma(model)
    spec = collision_spec(cfg) if cfg["joint"].get("event", "collision") == "collision" else detachment_spec(cfg)
    split = cfg["joint"].get("split")
    V, W = risk.joint_risk_boxes(md, spec, split)
    if split is None:
        split = [spec.eps / len(md.sigma)] * len(md.sigma)
    rows = [[i, float(sg), v[0], v[1], w[0], w[1], e] for i, (sg, v, w, e) in enumerate(zip(md.sigma, V, W, split), start=1)]
    cols = ["pair", "sigma", "V_lo", "V_hi", "W_lo", "W_hi", "eps_i"]
    return Report("joint-risk", cols, rows, {"event": spec.kind, "eps": spec.eps})


def cmd_limits(cfg) -> Report:
    model = build_model(cfg)
    spec = collision_spec(cfg)
    n, beta, tau = model.n, model.beta, model.tau
    bound = stability.resistance_lower_bound(n, beta, tau)
    s = graph.graph_spectrum(model.graph)
    xi = graph.effective_resistance(s)
    f_min, s1m, s2m = variance.f_min()
    summary = {
        "f_min": f_min,
        "argmin_s1": s1m,
        "argmin_s2": s2m,
        "sigma_star": variance.sigma_star(model.g, tau),
        "collision_risk_lower_bound": risk.collision_risk_lower_bound(model.g, tau, spec),
        "inevitability_constant": risk.inevitability_constant(),
        "theta": stability.theta(beta * tau),
        "resistance_lower_bound": bound,
        "effective_resistance": xi,
        "resistance_bound_holds": xi > bound,
    }
    rows = [[k, v] for k, v in summary.items()]
    return Report("limits", ["quantity", "value"], rows, summary)


def cmd_tradeoff(cfg) -> Report:
    model = build_model(cfg)
    spec = collision_spec(cfg)
    md = _sigma(model)
    s = graph.graph_spectrum(model.graph)
    xi = graph.effective_resistance(s)
    bound = risk.tradeoff_bound(model.n, model.g, model.tau, model.beta, spec)
    rows = []
    for i, sg in enumerate(md.sigma, start=1):
        r = risk.collision_risk(float(sg), spec)
        lhs = math.inf if r.is_infinite else r.value * math.sqrt(xi)
        rows.append([i, float(sg), r, lhs, bound, lhs > bound])
    summary = {
        "tradeoff_bound": bound,
        "e_lower": risk.e_lower(model.g, model.tau, spec),
        "series_terms": len(risk.alpha_terms(model.n, model.g, model.tau, spec)),
        "effective_resistance": xi,
    }
    cols = ["pair", "sigma", "collision_risk", "risk_times_sqrt_resistance", "bound", "holds"]
    return Report("tradeoff", cols, rows, summary)


def _grid_values(spec):
    if isinstance(spec, dict):
        return list(np.linspace(spec["start"], spec["stop"], spec["num"]))
    return list(spec)


def _with_variable(cfg, var, value):
    c = copy.deepcopy(cfg)
    topo = c["model"]["topology"]
    if var == "tau":
        c["model"]["tau"] = float(value)
    elif var == "r":
        c["model"]["gain_scale"] = float(value)
    else:
        key = {"n": "n", "p": "p", "gamma": "gamma", "b": "b"}[var]
        if key not in topo and not (key == "n" and topo["type"] != "file"):
            raise PlatoonRiskError(f"sweep variable {var!r} does not apply to topology {topo['type']!r}")
        topo[key] = int(round(value)) if key in ("n", "p") else float(value)
    return c


def cmd_sweep(cfg) -> Report:
    sw = cfg.get("sweep")
    if not sw or "variable" not in sw or "values" not in sw:
        raise ConfigError("sweep needs a 'sweep' section with 'variable' and 'values'")
    values = _grid_values(sw["values"])
    if not values:
        raise ConfigError("sweep grid is empty")
    var = sw["variable"]
    rows = []
    unstable = 0
    for val in values:
        c = _with_variable(cfg, var, val)
        model = build_model(c)
        cs, ds = collision_spec(c), detachment_spec(c)
        try:
            sig = _sigma(model).sigma
            stable = True
        except UnstablePlatoon:
            sig = np.full(model.n - 1, math.inf)
            stable = False
            unstable += 1
        for i, sg in enumerate(sig, start=1):
            if stable:
                cr, dr = risk.collision_risk(float(sg), cs), risk.detachment_risk(float(sg), ds)
            else:
                cr = dr = risk.RiskValue.infinite()
            rows.append([val, i, float(sg), cr, dr, stable])
    cols = [var, "pair", "sigma", "collision_risk", "detachment_risk", "stable"]
    return Report("sweep", cols, rows, {"variable": var, "points": len(values), "unstable_points": unstable})


def cmd_fit_approx(cfg) -> Report:
    f = cfg["fit"]
    scan = approx.error_scan(f["m1"], f["m2"])
    rows = [list(r) for r in zip(scan.s1.ravel(), scan.s2.ravel(), scan.f_exact.ravel(), scan.f_tilde.ravel(), scan.eta.ravel())]
    avg = approx.averaged_alphas()
    summary = {"max_eta": scan.max_eta, "alpha_2": avg[2], "alpha_3": avg[3], "alpha_4": avg[4]}
    return Report("fit-approx", ["s1", "s2", "f_exact", "f_tilde", "eta"], rows, summary)


def _ensemble(cfg, model):
    s = cfg["simulation"]
    return sim.steady_state_samples(
        model,
        dt=s["dt"],
        T=s["T"],
        burn_in=s.get("burn_in"),
        stride=s.get("stride"),
        replicas=s["replicas"],
        seed=s["seed"],
        workers=s.get("workers", 1),
    )


def cmd_simulate(cfg) -> Report:
    model = build_model(cfg)
    ens = _ensemble(cfg, model)
    rows = []
    for r in range(ens.samples.shape[0]):
        for k, t in enumerate(ens.times):
            for i in range(ens.pair_count):
                rows.append([r, float(t), i + 1, float(ens.samples[r, k, i])])
    meta = ens.metadata()
    return Report("simulate", ["replica", "t", "pair_index", "rel_distance"], rows, meta, metadata=meta)


def effective_sample_size(samples: np.ndarray) -> float:
    """``N (1 - rho) / (1 + rho)`` from the lag-1 autocorrelation within replicas."""
    x = samples - samples.mean()
    if samples.shape[1] < 2:
        return float(samples.size)
    rho = float((x[:, 1:] * x[:, :-1]).mean() / x.var())
    rho = min(max(rho, 0.0), 0.99)
    return samples.size * (1 - rho) / (1 + rho)


def run_validation(cfg):
    """Closed form against Monte Carlo; returns a list of ``(check, measured, limit, ok)``."""
    model = build_model(cfg)
    md = _sigma(model)
    ens = _ensemble(cfg, model)
    tol = cfg["validate"]
    checks = []
    for i, sg in enumerate(md.sigma):
        y = ens.pair(i)
        dev = abs(y.std() / sg - 1)
        checks.append((f"std pair {i + 1}", dev, tol["std_rtol"], dev <= tol["std_rtol"]))
        n_eff = effective_sample_size(ens.samples[:, :, i])
        z = abs(y.mean() - model.d) / (sg / math.sqrt(n_eff))
        checks.append((f"mean pair {i + 1} (z-score)", z, 3.0, z <= 3.0))
    for spec in (collision_spec(cfg), detachment_spec(cfg)):
        emp = sim.empirical_risk(ens, spec)
        for i, sg in enumerate(md.sigma):
            cf = risk.risk(float(sg), spec)
            if cf.is_finite and emp[i].is_finite:
                dev = abs(emp[i].value / cf.value - 1)
                checks.append((f"{spec.kind} risk pair {i + 1}", dev, tol["risk_rtol"], dev <= tol["risk_rtol"]))
            else:
                same = cf.kind == emp[i].kind
                checks.append((f"{spec.kind} risk branch pair {i + 1}", 0.0 if same else 1.0, 0.0, same))
    js = collision_spec(cfg, eps=tol["joint_eps"])
    V, W = risk.joint_risk_boxes(md, js)
    delta = [w[0].value if w[0].is_finite else 0.0 for w in W]
    est = sim.joint_event_probability(ens, js, delta, "union")
    sandwich = est.marginals.max() <= est.p <= est.marginals.sum()
    checks.append(("union Boole-Frechet sandwich", est.p, float(est.marginals.sum()), sandwich))
    est_i = sim.joint_event_probability(ens, js, delta, "intersection")
    checks.append(("intersection below min marginal", est_i.p, float(est_i.marginals.min()), est_i.p <= est_i.marginals.min()))
    if all(not w[1].is_infinite for w in W):
        r_union, _ = sim.union_delta_risk(ens, js)
        inside = all(lo <= r <= hi for r, (lo, hi) in zip(r_union, W))
        worst = max(float(r) / float(hi) for r, (_, hi) in zip(r_union, W) if hi.is_finite and hi.value > 0) if inside else 1.0
        checks.append(("union delta-risk inside W box", worst, 1.0, inside))
    return checks


def cmd_validate(cfg) -> Report:
    checks = run_validation(cfg)
    rows = [[name, measured, limit, "pass" if ok else "FAIL"] for name, measured, limit, ok in checks]
    failed = not all(ok for *_, ok in checks)
    rep = Report("validate", ["check", "measured", "limit", "status"], rows, {"checks": len(checks), "failed": sum(not c[3] for c in checks)})
    rep.failed = failed
    return rep


HANDLERS = {
    "spectrum": cmd_spectrum,
    "stability": cmd_stability,
    "risk": cmd_risk,
    "joint-risk": cmd_joint_risk,
    "limits": cmd_limits,
    "tradeoff": cmd_tradeoff,
    "sweep": cmd_sweep,
    "fit-approx": cmd_fit_approx,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="platoon-risk", description="Value-at-risk of collision and detachment in delayed noisy platoons.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--seed", type=int, help="override simulation.seed")
    parser.add_argument("--out", help="output file (default: stdout)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--digits", type=int, default=6, help="significant digits (default 6)")
    parser.add_argument("--no-timestamp", action="store_true", help="omit the generated-at line")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.digits < 1 or args.digits > 17:
        print("error: --digits must lie in [1, 17]", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg["simulation"]["seed"] = args.seed
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = _show_warning
            report = HANDLERS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PlatoonRiskError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    text = render(report, args.format, args.digits, not args.no_timestamp)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        if report.metadata is not None:
            Path(str(args.out) + ".meta.json").write_text(json.dumps(report.metadata, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(text)
    if args.format == "csv" and report.summary:
        print(summary_text(report, args.digits), file=sys.stderr)
    return EXIT_VALIDATE_FAILED if report.failed else EXIT_OK


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
