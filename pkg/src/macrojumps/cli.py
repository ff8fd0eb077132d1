"""Command-line front end: ``simulate``, ``predict``, ``analyze``, ``sweep``, ``compare``.

Configuration is a JSON object::

    {"model": "full", "preset": "fig5a", "basis": "product",
     "params": {"gamma": 0.1, "delta_g": 0.1},
     "simulation": {"t_max": 1e6, "n_traj": 100, "master_seed": 1},
     "analysis": {"t_unit": "t_click", "t_grid": [0.5, 1, 2], "t_wait": [1, 5]},
     "sweep": {"parameter": "delta_g", "values": [0, 0.1, 0.3]},
     "compare": {"tolerance": {"t_dark": 0.1}}}

Every output file carries the resolved configuration (``#``-prefixed JSON
header for CSV files); passing such a file back as ``--config`` reruns it.
Exit codes: 0 success, 1 comparison outside tolerance, 2 invalid input,
3 numerical failure, 4 insufficient data.
"""
from __future__ import annotations

import argparse
import copy
import json
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import markov, telegraph
from .evolve import NonUniqueSteadyStateError, StepSizeError
from .hilbert import SpaceSpec, state_vector
from .models import (PRESETS, TOY_PRESETS, ConfigurationError, ModelParams, ParameterError,
                     ToyParams, build_effective, build_full, build_toy, to_bell_basis)
from .trajectory import InternalConsistencyError, default_workers, run_ensemble

EXIT_OK, EXIT_COMPARE, EXIT_INVALID, EXIT_NUMERICAL, EXIT_NODATA = 0, 1, 2, 3, 4

_MODELS = ("toy", "full", "effective")
_SYMMETRIC_KEYS = ("g", "kappa", "gamma", "omega_L", "omega_M", "delta", "eta", "n_max",
                   "branching", "delta_g", "delta_omega_M")
_RAW_KEYS = tuple(f.name for f in fields(ModelParams))
_TOY_KEYS = tuple(f.name for f in fields(ToyParams))
_SIM_DEFAULTS = {"t_max": None, "dt": None, "n_traj": 10, "master_seed": 0,
                 "sample_times": None, "initial_state": None}
_ANALYSIS_DEFAULTS = {"tau_thresh": None, "t_unit": "t_click",
                      "t_grid": [0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0], "t_wait": [0.5, 1.0, 2.0, 3.0, 4.0, 5.0]}
_TOLERANCE_DEFAULTS = {"t_dark": 0.15, "t_light": 0.2, "t_click": 0.1}
_T_UNITS = ("absolute", "t_click", "t_dark", "t_light")


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class RunConfig:
    model: str
    params: ToyParams | ModelParams
    basis: str = "product"
    simulation: dict = field(default_factory=lambda: dict(_SIM_DEFAULTS))
    analysis: dict = field(default_factory=lambda: dict(_ANALYSIS_DEFAULTS))
    sweep: dict | None = None
    compare: dict = field(default_factory=lambda: {"tolerance": dict(_TOLERANCE_DEFAULTS)})
    preset: str | None = None
    overrides: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        """Re-parsable form; ``resolved_params`` is informational."""
        return {"model": self.model, "preset": self.preset, "params": self.overrides,
                "resolved_params": self.params.to_dict(), "basis": self.basis,
                "simulation": self.simulation, "analysis": self.analysis,
                "sweep": self.sweep, "compare": self.compare}


# -- parsing -----------------------------------------------------------------

def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _number_list(v):
    return isinstance(v, list) and all(_is_number(x) for x in v)


def _build_params(model, preset_name, overrides, errors):
    if model == "toy":
        base = dict(TOY_PRESETS.get(preset_name or "toy", {}))
        allowed = _TOY_KEYS
    else:
        base = dict(PRESETS.get(preset_name or "fig5a", {}))
        allowed = _SYMMETRIC_KEYS + _RAW_KEYS
    ok = True
    for k, v in overrides.items():
        if k not in allowed:
            errors.append(f"params.{k}: unknown parameter for model {model!r}")
            ok = False
        elif k == "n_max":
            if not isinstance(v, int) or isinstance(v, bool):
                errors.append(f"params.n_max: expected an integer, got {v!r}")
                ok = False
        elif not _is_number(v):
            errors.append(f"params.{k}: expected a number, got {v!r}")
            ok = False
    if not ok:
        return None
    try:
        if model == "toy":
            return ToyParams(**{**base, **overrides})
        sym = {k: v for k, v in {**base, **overrides}.items() if k in _SYMMETRIC_KEYS}
        raw = {k: v for k, v in overrides.items() if k in _RAW_KEYS and k not in _SYMMETRIC_KEYS}
        p = ModelParams.symmetric(**sym)
        return replace(p, **raw) if raw else p
    except (ParameterError, TypeError) as exc:
        name = next((k for k in list(overrides) + ["eta"] if k in str(exc)), "params")
        errors.append(f"params.{name}: {exc}")
        return None


def _check_section(name, given, defaults, errors):
    if given is None:
        return dict(defaults)
    if not isinstance(given, dict):
        errors.append(f"{name}: expected an object")
        return dict(defaults)
    for k in given:
        if k not in defaults:
            errors.append(f"{name}.{k}: unknown field")
    return {**defaults, **{k: v for k, v in given.items() if k in defaults}}


def config_from_dict(raw: dict, preset: str | None = None) -> RunConfig:
    """Validate a raw configuration mapping, collecting every error before raising."""
    errors = []
    if not isinstance(raw, dict):
        raise ConfigError(["config: expected a JSON object"])
    raw = copy.deepcopy(raw)
    for k in raw:
        if k not in ("model", "preset", "params", "resolved_params", "basis", "simulation",
                     "analysis", "sweep", "compare"):
            errors.append(f"{k}: unknown field")
    preset = preset or raw.get("preset")
    model = raw.get("model")
    if model is None:
        model = "toy" if preset in TOY_PRESETS else ("full" if preset in PRESETS else None)
    if model not in _MODELS:
        errors.append(f"model: must be one of {list(_MODELS)}, got {model!r}")
    if preset is not None and preset not in PRESETS and preset not in TOY_PRESETS:
        errors.append(f"preset: unknown preset {preset!r}")
    elif (model == "toy" and preset in PRESETS) or (model in ("full", "effective") and preset in TOY_PRESETS):
        errors.append(f"preset: {preset!r} does not belong to model {model!r}")
    overrides = raw.get("params", {})
    if not isinstance(overrides, dict):
        errors.append("params: expected an object")
        overrides = {}
    params = _build_params(model, preset, overrides, errors) if model in _MODELS else None

    basis = raw.get("basis", "product")
    if basis not in ("product", "bell"):
        errors.append(f"basis: must be 'product' or 'bell', got {basis!r}")

    sim = _check_section("simulation", raw.get("simulation"), _SIM_DEFAULTS, errors)
    if sim["t_max"] is not None and not (_is_number(sim["t_max"]) and sim["t_max"] > 0):
        errors.append(f"simulation.t_max: must be a positive number, got {sim['t_max']!r}")
    if sim["dt"] is not None and not (_is_number(sim["dt"]) and sim["dt"] > 0):
        errors.append(f"simulation.dt: must be a positive number, got {sim['dt']!r}")
    if not (isinstance(sim["n_traj"], int) and not isinstance(sim["n_traj"], bool) and sim["n_traj"] >= 1):
        errors.append(f"simulation.n_traj: must be a positive integer, got {sim['n_traj']!r}")
    if not (isinstance(sim["master_seed"], int) and 0 <= sim["master_seed"] < 2**64):
        errors.append(f"simulation.master_seed: must be an unsigned 64-bit integer, got {sim['master_seed']!r}")
    if sim["sample_times"] is not None and not _number_list(sim["sample_times"]):
        errors.append("simulation.sample_times: expected a list of numbers")
    if sim["initial_state"] is not None and not isinstance(sim["initial_state"], str):
        errors.append("simulation.initial_state: expected a state label such as '00,0'")

    ana = _check_section("analysis", raw.get("analysis"), _ANALYSIS_DEFAULTS, errors)
    if ana["tau_thresh"] is not None and not (_is_number(ana["tau_thresh"]) and ana["tau_thresh"] > 0):
        errors.append(f"analysis.tau_thresh: must be a positive number, got {ana['tau_thresh']!r}")
    if ana["t_unit"] not in _T_UNITS:
        errors.append(f"analysis.t_unit: must be one of {list(_T_UNITS)}, got {ana['t_unit']!r}")
    for key in ("t_grid", "t_wait"):
        v = ana[key]
        if not _number_list(v) or any(x < 0 for x in v):
            errors.append(f"analysis.{key}: expected a list of non-negative numbers")
    if _number_list(ana["t_wait"]) and any(x <= 0 for x in ana["t_wait"]):
        errors.append("analysis.t_wait: wait times must be positive")

    sweep = raw.get("sweep")
    if sweep is not None:
        if not isinstance(sweep, dict) or set(sweep) != {"parameter", "values"}:
            errors.append("sweep: expected an object with 'parameter' and 'values'")
            sweep = None
        else:
            allowed = _TOY_KEYS if model == "toy" else _SYMMETRIC_KEYS + _RAW_KEYS
            if sweep["parameter"] not in allowed:
                errors.append(f"sweep.parameter: unknown parameter {sweep['parameter']!r}")
            if not _number_list(sweep["values"]) or not sweep["values"]:
                errors.append("sweep.values: expected a non-empty list of numbers")
            elif params is not None and sweep["parameter"] in allowed:
                for v in sweep["values"]:
                    _build_params(model, preset, {**overrides, sweep["parameter"]: v}, errors)

    cmp_ = raw.get("compare") or {}
    tol = cmp_.get("tolerance", {}) if isinstance(cmp_, dict) else None
    if not isinstance(tol, dict):
        errors.append("compare.tolerance: expected an object")
        tol = {}
    for k, v in tol.items():
        if k not in _TOLERANCE_DEFAULTS:
            errors.append(f"compare.tolerance.{k}: unknown observable")
        elif not (_is_number(v) and v > 0):
            errors.append(f"compare.tolerance.{k}: must be a positive number")

    if model == "effective" and params is not None and not params.is_symmetric:
        errors.append("params: the effective model requires g1 == g2 and omega_M1 == omega_M2")
    if model == "full" and params is not None and params.n_max < 1:
        errors.append("params.n_max: the full model needs n_max >= 1")
    if errors:
        raise ConfigError(errors)
    return RunConfig(model=model, params=params, basis=basis, simulation=sim, analysis=ana,
                     sweep=sweep, compare={"tolerance": {**_TOLERANCE_DEFAULTS, **tol}},
                     preset=preset, overrides=overrides)


def parse_config(path, preset: str | None = None) -> RunConfig:
    """Read a JSON config, or the embedded config of an output file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"config: cannot read {path}: {exc.strerror}"]) from None
    if text.startswith("# "):
        text = text.splitlines()[0][2:]
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from None
    if isinstance(raw, dict) and "config" in raw and "model" not in raw:
        raw = raw["config"]
    return config_from_dict(raw, preset)


# -- orchestration -------------------------------------------------------------

def build_bundle(cfg: RunConfig, params=None):
    p = cfg.params if params is None else params
    if cfg.model == "toy":
        return build_toy(p)
    if cfg.model == "effective":
        return build_effective(p)
    b = build_full(p)
    return to_bell_basis(b) if cfg.basis == "bell" else b


def _initial_state(cfg, bundle):
    label = cfg.simulation["initial_state"]
    if label is None:
        psi = np.zeros(bundle.dim, dtype=complex)
        psi[0] = 1.0
        return psi
    if cfg.model != "full":
        raise ConfigError(["simulation.initial_state: labels are only supported for the full model"])
    try:
        return state_vector(label, SpaceSpec(cfg.params.n_max), basis=cfg.basis)
    except ValueError as exc:
        raise ConfigError([f"simulation.initial_state: {exc}"]) from None


def timescales_for(model, params):
    if model == "toy":
        return markov.toy_timescales_from(params)
    return markov.cavity_timescales(params)


def _time_unit(cfg, params=None):
    unit = cfg.analysis["t_unit"]
    if unit == "absolute":
        return 1.0
    ts = timescales_for(cfg.model, cfg.params if params is None else params)
    return getattr(ts, unit)


def _eta(params):
    return getattr(params, "eta", 1.0)


def simulate(cfg: RunConfig, params=None, workers=None, keep_states=False):
    p = cfg.params if params is None else params
    bundle = build_bundle(cfg, p)
    sim = cfg.simulation
    t_max = sim["t_max"] or (2e4 if cfg.model == "toy" else 1e6)
    ens = run_ensemble(bundle, _initial_state(cfg, bundle), t_max, dt=sim["dt"],
                       n_traj=sim["n_traj"], master_seed=sim["master_seed"],
                       sample_times=sim["sample_times"], keep_states=keep_states, workers=workers)
    return bundle, ens


def analyze(cfg: RunConfig, params=None, workers=None, fidelity=True) -> dict:
    """Simulate and reduce to period statistics, survival and fidelity curves."""
    p = cfg.params if params is None else params
    want_fid = fidelity and bool(cfg.analysis["t_wait"])
    bundle, ens = simulate(cfg, p, workers, keep_states=want_fid)
    tau = cfg.analysis["tau_thresh"] or telegraph.default_tau(bundle)
    _, stats = telegraph.analyze_records(ens.records, tau)
    unit = _time_unit(cfg)  # grid fixed by the unswept parameters
    t_grid = np.asarray(cfg.analysis["t_grid"], dtype=float) * unit
    out = {"tau_thresh": tau, "stats": stats, "summary": ens.summary, "t_unit_value": unit,
           "survival": telegraph.survival_probability(ens.records, t_grid), "fidelity": None}
    if want_fid:
        t_wait = np.asarray(cfg.analysis["t_wait"], dtype=float) * unit
        try:
            out["fidelity"] = telegraph.conditional_fidelity(ens.records, bundle, t_wait)
        except telegraph.InsufficientDataError:
            out["fidelity"] = None
    return out


def _header(cfg, extra=None):
    meta = {"config": cfg.to_dict(), "master_seed": cfg.simulation["master_seed"]}
    meta.update(extra or {})
    return meta


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=telegraph._jsonable)
        fh.write("\n")


def cmd_simulate(cfg, out: Path, workers):
    bundle, ens = simulate(cfg, workers=workers)
    rec_dir = out / "records"
    rec_dir.mkdir(parents=True, exist_ok=True)
    width = len(str(len(ens.records) - 1))
    for i, rec in enumerate(ens.records):
        rec.write(rec_dir / f"trajectory_{i:0{width}d}.csv")
    summary = {k: v for k, v in ens.summary.items() if k != "rho"}
    _write_json(out / "summary.json", {**_header(cfg), "summary": summary})
    return EXIT_OK


def _prediction(cfg, params=None):
    p = cfg.params if params is None else params
    ts = timescales_for(cfg.model, p)
    eta = _eta(p)
    r = markov.rates_from_timescales(ts, eta)
    pred = {"T_D": ts.t_dark, "T_L": ts.t_light, "T_C": ts.t_click,
            "interclick_detected": ts.t_click / eta if eta > 0 else float("inf"),
            "gamma_L": r.gamma_L, "gamma_D": r.gamma_D, "gamma_C": r.gamma_C}
    if cfg.model != "toy":
        pred["C"] = p.cooperativity
        if eta > 0 and p.cooperativity > 0:
            pred["F_asymptotic_optimal"] = markov.asymptotic_fidelity(p.cooperativity, eta)
    return ts, r, pred


def cmd_predict(cfg, out: Path, workers):
    ts, r, pred = _prediction(cfg)
    _write_json(out / "prediction.json", {**_header(cfg), "prediction": pred})
    t = np.asarray(cfg.analysis["t_wait"], dtype=float) * _time_unit(cfg)
    t = np.concatenate(([0.0], t))
    markov.write_prediction_csv(out / "markov_table.csv", r, t, meta=_header(cfg))
    return EXIT_OK


def _analysis_columns(res):
    cols = {"t": res["survival"].t, "survival": res["survival"].value,
            "survival_se": res["survival"].stderr, "n_references": res["survival"].n}
    return cols


def cmd_analyze(cfg, out: Path, workers):
    res = analyze(cfg, workers=workers)
    stats = res["stats"].to_dict()
    summary = {k: v for k, v in res["summary"].items() if k != "rho"}
    _write_json(out / "analysis.json", {**_header(cfg, {"tau_thresh": res["tau_thresh"]}),
                                        "period_stats": stats, "summary": summary})
    telegraph.write_curve_csv(out / "survival.csv", _analysis_columns(res), _header(cfg))
    fid = res["fidelity"]
    if fid is not None:
        telegraph.write_curve_csv(out / "fidelity.csv",
                                  {"t_wait": fid.t, "fidelity": fid.value, "fidelity_se": fid.stderr,
                                   "n_events": fid.n},
                                  _header(cfg, {"correction": fid.extra["correction"]}))
    if res["stats"].n_dark_exits == 0:
        _error(EXIT_NODATA, "insufficient_data", ["no dark periods detected"])
        return EXIT_NODATA
    return EXIT_OK


def cmd_sweep(cfg, out: Path, workers):
    if cfg.sweep is None:
        raise ConfigError(["sweep: required for the sweep command"])
    name, values = cfg.sweep["parameter"], cfg.sweep["values"]
    cols = {name: [], "mean_dark": [], "mean_light": [], "mean_interclick": []}
    t_grid = np.asarray(cfg.analysis["t_grid"], dtype=float)
    t_wait = np.asarray(cfg.analysis["t_wait"], dtype=float)
    surv_keys = [f"survival@{t:g}" for t in t_grid]
    fid_keys = [f"fidelity@{t:g}" for t in t_wait]
    for k in surv_keys + fid_keys:
        cols[k] = []
    errs = []
    for v in values:
        p = _build_params(cfg.model, cfg.preset, {**cfg.overrides, name: v}, errs)
        if p is None:
            raise ConfigError(errs)
        res = analyze(cfg, p, workers)
        st = res["stats"]
        cols[name].append(v)
        for k in ("mean_dark", "mean_light", "mean_interclick"):
            val = getattr(st, k)
            cols[k].append(np.nan if val is None else val)
        for k, s in zip(surv_keys, res["survival"].value):
            cols[k].append(s)
        fid = res["fidelity"]
        for i, k in enumerate(fid_keys):
            cols[k].append(np.nan if fid is None else fid.value[i])
    telegraph.write_curve_csv(out / "sweep.csv", cols,
                              _header(cfg, {"t_unit_value": _time_unit(cfg)}))
    return EXIT_OK


def compare_table(cfg, res) -> list[dict]:
    _, _, pred = _prediction(cfg)
    st = res["stats"]
    tol = cfg.compare["tolerance"]
    rows = []
    for obs, sim_val, se, ref in (("t_dark", st.mean_dark, st.mean_dark_se, pred["T_D"]),
                                  ("t_light", st.mean_light, st.mean_light_se, pred["T_L"]),
                                  ("t_click", st.mean_interclick, st.mean_interclick_se,
                                   pred["interclick_detected"])):
        dev = abs(sim_val - ref) / ref if sim_val is not None else float("nan")
        rows.append({"observable": obs, "simulated": sim_val, "stderr": se, "predicted": ref,
                     "rel_deviation": dev, "tolerance": tol[obs],
                     "ok": bool(sim_val is not None and dev <= tol[obs])})
    return rows


def cmd_compare(cfg, out: Path, workers):
    res = analyze(cfg, workers=workers, fidelity=False)
    rows = compare_table(cfg, res)
    keys = list(rows[0])
    with open(out / "compare.csv", "w") as fh:
        fh.write("# " + json.dumps(_header(cfg, {"tau_thresh": res["tau_thresh"]}), sort_keys=True,
                                   default=telegraph._jsonable) + "\n")
        fh.write(",".join(keys) + "\n")
        for r in rows:
            fh.write(",".join("" if r[k] is None else (repr(r[k]) if isinstance(r[k], float) else str(r[k]))
                              for k in keys) + "\n")
    for r in rows:
        print(f"{r['observable']}: simulated={r['simulated']} predicted={r['predicted']:.6g} "
              f"rel_dev={r['rel_deviation']:.4f} tol={r['tolerance']} {'PASS' if r['ok'] else 'FAIL'}")
    failed = [r["observable"] for r in rows if not r["ok"]]
    if failed:
        _error(EXIT_COMPARE, "tolerance", [f"{o} outside tolerance" for o in failed])
        return EXIT_COMPARE
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "predict": cmd_predict, "analyze": cmd_analyze,
            "sweep": cmd_sweep, "compare": cmd_compare}


def _error(code, kind, messages):
    print("error: " + json.dumps({"code": code, "kind": kind, "errors": messages}), file=sys.stderr)


def build_parser():
    ap = argparse.ArgumentParser(prog="macrojumps", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON config, or an output file with an embedded config")
    ap.add_argument("--preset", help=f"parameter preset: {', '.join(sorted(PRESETS) + sorted(TOY_PRESETS))}")
    ap.add_argument("--out", default=".", help="output directory (default: current)")
    ap.add_argument("--seed", type=int, help="master seed (overrides the config)")
    ap.add_argument("--n-traj", type=int, help="number of trajectories (overrides the config)")
    ap.add_argument("--workers", type=int, help="worker processes (default: $MACROJUMPS_WORKERS or 1)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            cfg = parse_config(args.config, preset=args.preset)
        elif args.preset:
            cfg = config_from_dict({"preset": args.preset})
        else:
            raise ConfigError(["config: give --config or --preset"])
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError(["--seed: must be an unsigned 64-bit integer"])
            cfg.simulation["master_seed"] = args.seed
        if args.n_traj is not None:
            if args.n_traj < 1:
                raise ConfigError(["--n-traj: must be a positive integer"])
            cfg.simulation["n_traj"] = args.n_traj
        try:
            workers = default_workers() if args.workers is None else args.workers
        except ValueError as exc:
            raise ConfigError([f"workers: {exc}"]) from None
        if workers < 1:
            raise ConfigError(["--workers: must be at least 1"])
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, workers)
    except ConfigError as exc:
        _error(EXIT_INVALID, "validation", exc.errors)
        return EXIT_INVALID
    except (ParameterError, ConfigurationError) as exc:
        _error(EXIT_INVALID, "validation", [f"{args.command}: {exc}"])
        return EXIT_INVALID
    except (StepSizeError, NonUniqueSteadyStateError, InternalConsistencyError,
            np.linalg.LinAlgError, FloatingPointError) as exc:
        _error(EXIT_NUMERICAL, "numerical", [f"{args.command}: {exc}"])
        return EXIT_NUMERICAL
    except telegraph.InsufficientDataError as exc:
        _error(EXIT_NODATA, "insufficient_data", [f"{args.command}: {exc}"])
        return EXIT_NODATA


if __name__ == "__main__":
    sys.exit(main())
