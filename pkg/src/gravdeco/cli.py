"""Command-line front end.

Every command takes its parameters from flags, from a JSON config file
(``--config``), or both; flags win. Parameters are validated against the
JSON schema shipped as ``config_schema.json`` before anything runs.

Exit codes: 0 success, 1 validation error, 2 numerical failure (including
acceptance criteria that do not pass under ``paper-check``).
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Callable

import jsonschema
import numpy as np

from . import acceptance, decoherence, dynamics, experiments, numerics, spectra, states
from .decoherence import BallParams, DecoherenceSpec, NBodyConfig, PlanckUnits, default_units, planck_convert

__all__ = ["main", "load_config", "RunConfig", "ConfigError", "COMMANDS", "OPERATIONS", "build_schema"]

SCHEMA_FILE = "config_schema.json"


class ConfigError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# parameter tables: name -> (json type, default, dimension, extra schema)

_STATE = {
    "state": ("string", "bead", None, {"enum": ["bead", "box", "gaussian", "complex_gaussian", "hermite", "cat"]}),
    "n": ("integer", 257, None, {"minimum": 3}),
    "delta": ("number", 1.0, "length", {"exclusiveMinimum": 0}),
    "level": ("integer", 1, None, {"minimum": 1}),
    "sigma": ("number", 1.0, "length", {"exclusiveMinimum": 0}),
    "half_width": ("number", 12.0, "length", {"exclusiveMinimum": 0}),
    "x0": ("number", 0.0, "length", {}),
    "p0": ("number", 0.0, "inverse_length", {}),
    "c_re": ("number", 0.5, "inverse_length2", {"exclusiveMinimum": 0}),
    "c_im": ("number", 0.0, "inverse_length2", {}),
    "separation": ("number", 4.0, "length", {"exclusiveMinimum": 0}),
    "weight1": ("number", 0.5, None, {"minimum": 0, "maximum": 1}),
}

_DECO = {
    "kappa": (["number", "null"], None, "inverse_length2", {"minimum": 0}),
    "M": ("number", 1.0, "mass", {"exclusiveMinimum": 0}),
    "R": ("number", 10.0, "length", {"exclusiveMinimum": 0}),
}

_HAM = {
    "hamiltonian": ("string", "free", None, {"enum": ["free", "harmonic", "box"]}),
    "k": ("number", 1.0, None, {"minimum": 0}),
}

_NUMBERS = {"type": "array", "items": {"type": "number"}}

COMMANDS: dict[str, dict[str, tuple]] = {
    "dexp": {
        "M": ("number", 1.0, "mass", {"exclusiveMinimum": 0}),
        "R": ("number", 1.0, "length", {"exclusiveMinimum": 0}),
        "a": ("array", [0.1], "length", {"items": {"type": "number", "minimum": 0}, "minItems": 1}),
        "mode": ("string", "auto", None, {"enum": ["exact", "gaussian", "logarithmic", "auto", "nbody_gaussian", "nbody_log"]}),
        "masses": ("array", [], "mass", {"items": {"type": "number", "exclusiveMinimum": 0}}),
        "radii": ("array", [], "length", {"items": {"type": "number", "exclusiveMinimum": 0}}),
        "x": ("array", [], "length", _NUMBERS | {}),
        "xp": ("array", [], "length", _NUMBERS | {}),
        "normalization": ("boolean", False, None, {}),
    },
    "rho": {
        **_STATE,
        **_DECO,
        "model": ("string", "gauss", None, {"enum": ["gauss", "ball", "first_order", "nbody"]}),
        "bodies": ("integer", 2, None, {"minimum": 1, "maximum": 3}),
    },
    "expect": {
        **_STATE,
        **_DECO,
        "observable": ("string", "p2", None, {"enum": ["x", "x2", "p", "p2", "parity", "uncertainty"]}),
    },
    "spectrum": {
        **_STATE,
        **_DECO,
        "kind": ("string", "1d", None, {"enum": ["1d", "general", "product", "3d", "cat"]}),
        "bodies": ("integer", 2, None, {"minimum": 1, "maximum": 4}),
        "deltas": ("array", [1.0, 1.0, 1.0], "length", {"items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 3, "maxItems": 3}),
        "overlap": ("number", 0.0, None, {"minimum": 0, "maximum": 1}),
    },
    "events": {
        **_STATE,
        **_DECO,
        "beable": ("string", "none", None, {"enum": ["none", "parity", "x"]}),
        "cluster_tol": ("number", 1e-8, None, {"exclusiveMinimum": 0}),
        "floor": ("number", 1e-12, None, {"minimum": 0}),
        "overlap": ("number", -1.0, None, {"maximum": 1}),
    },
    "evolve": {
        **_STATE,
        **_DECO,
        **_HAM,
        "t_start": ("number", 0.0, "time", {}),
        "t_stop": ("number", 1.0, "time", {}),
        "n_times": ("integer", 11, None, {"minimum": 1}),
        "method": ("string", "cn", None, {"enum": ["cn", "spectral"]}),
        "example": ("boolean", False, None, {}),
    },
    "master": {
        **_STATE,
        **_DECO,
        **_HAM,
        "kind": ("string", "mdm_gauss", None, {"enum": ["mdm_gauss", "blp"]}),
        "c": ("number", 1.0, None, {"minimum": 0}),
        "dt": ("number", 1e-3, "time", {"exclusiveMinimum": 0}),
        "steps": ("integer", 100, None, {"minimum": 1}),
        "record_every": ("integer", 10, None, {"minimum": 1}),
        "probe": ("boolean", False, None, {}),
    },
    "penrose": {
        "M": ("number", 10.0, "mass", {"exclusiveMinimum": 0}),
        "R": ("number", 1.0, "length", {"exclusiveMinimum": 0}),
        "xi_max": ("number", 0.15, "length", {"minimum": 0}),
        "t_f": ("number", 1.0, "time", {"exclusiveMinimum": 0}),
        "n_times": ("integer", 41, None, {"minimum": 3}),
        "width": (["number", "null"], None, "length", {"exclusiveMinimum": 0}),
        "theory": ("string", "all", None, {"enum": ["all", "standard", "penrose_collapse", "entanglement"]}),
    },
    "pmt": {
        "M": ("number", 1.0, "mass", {"exclusiveMinimum": 0}),
        "R": ("number", 10.0, "length", {"exclusiveMinimum": 0}),
        "delta": ("number", 1.0, "length", {"exclusiveMinimum": 0}),
        "probe_mass": ("number", 1.0, "mass", {"exclusiveMinimum": 0}),
        "nx": ("integer", 21, None, {"minimum": 3}),
        "ny": ("integer", 64, None, {"minimum": 3}),
        "t_out": ("number", 2.5, "time", {"exclusiveMinimum": 0}),
        "light_probe": ("boolean", False, None, {}),
        "mass_ratios": ("array", [1.0, 0.1, 0.01, 0.001], None, {"items": {"type": "number", "exclusiveMinimum": 0}}),
    },
    "estimate": {
        "graviton": ("boolean", False, None, {}),
        "photon": ("boolean", False, None, {}),
        "m": ("number", 1e-8, None, {"minimum": 0}),
        "ell": ("number", 1e-11, None, {"minimum": 0}),
        "omega": ("number", 3e3, None, {"minimum": 0}),
        "area": ("number", 1e-6, None, {"minimum": 0}),
    },
    "paper-check": {
        "criteria": ("array", [], None, {"items": {"type": "integer", "minimum": 1, "maximum": 15}}),
    },
}

# every library operation and the one command that reaches it
OPERATIONS: dict[str, tuple[Callable, ...]] = {
    "dexp": (
        decoherence.alpha,
        decoherence.dexp_exact,
        decoherence.dexp_gaussian,
        decoherence.dexp_log,
        decoherence.dexp_auto,
        decoherence.dexp_nbody_gaussian,
        decoherence.dexp_nbody_log,
        decoherence.planck_convert,
        numerics.integrate_semiinfinite,
    ),
    "rho": (
        states.build_rho_gauss,
        states.build_rho_ball,
        states.build_rho_nbody,
        states.first_order_rho,
        experiments.bead_ground_state,
    ),
    "expect": (states.expect, states.naive_p2_offset, states.expect_parity, states.uncertainty_report),
    "spectrum": (
        spectra.perturb_diag_1d,
        spectra.general_first_eigenpair,
        spectra.perturb_diag_product,
        spectra.perturb_diag_3d,
        spectra.cat_exact_diag,
    ),
    "events": (spectra.brute_force_events, numerics.hermitian_spectrum, spectra.is_beable, spectra.beable_expectation),
    "evolve": (
        dynamics.evolve_mdm,
        numerics.schrodinger_propagate,
        dynamics.entropy_S,
        dynamics.entropy_S1,
        dynamics.spread_fit,
        dynamics.two_sided_check,
        dynamics.entropy_timescale_example,
    ),
    "master": (dynamics.integrate_master, dynamics.positivity_probe),
    "penrose": (experiments.penrose_run,),
    "pmt": (experiments.pmt_run, experiments.pmt_light_probe),
    "estimate": (experiments.graviton_estimate, experiments.photon_emission_estimate),
    "paper-check": (acceptance.run_criteria,),
}


def build_schema() -> dict:
    """JSON schema for run configs, assembled from the parameter tables."""
    variants = []
    for cmd, table in COMMANDS.items():
        props = {}
        for name, (typ, default, dim, extra) in table.items():
            p = {"type": typ, "default": default}
            p.update(copy.deepcopy(extra))
            if dim:
                p["x-dimension"] = dim
            props[name] = p
        variants.append(
            {
                "if": {"properties": {"command": {"const": cmd}}},
                "then": {"properties": {"params": {"type": "object", "properties": props, "additionalProperties": False}}},
            }
        )
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "gravdeco run configuration",
        "type": "object",
        "properties": {
            "command": {"type": "string", "enum": list(COMMANDS)},
            "params": {"type": "object", "default": {}},
            "output_path": {"type": ["string", "null"], "default": None},
            "format": {"type": "string", "enum": ["csv", "json"], "default": "json"},
            "seed": {"type": ["integer", "null"], "default": None},
            "units": {"type": "array", "items": {"type": "string", "enum": list(UNIT_DIMENSIONS)}, "default": []},
        },
        "required": ["command"],
        "additionalProperties": False,
        "allOf": variants,
    }


def load_schema() -> dict:
    return json.loads(resources.files("gravdeco").joinpath(SCHEMA_FILE).read_text())


# ---------------------------------------------------------------------------
# configuration

UNIT_DIMENSIONS = {"cm": "length", "g": "mass", "s": "time", "yr": "time"}


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    output_path: str | None = None
    format: str = "json"
    seed: int | None = None
    units: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "params": self.params,
            "output_path": self.output_path,
            "format": self.format,
            "seed": self.seed,
            "units": list(self.units),
        }


def _offending_key(err: jsonschema.ValidationError) -> str:
    if err.validator == "additionalProperties":
        allowed = set(err.schema.get("properties", {}))
        extra = sorted(set(err.instance) - allowed)
        where = ".".join(str(p) for p in err.absolute_path)
        return ", ".join(f"{where + '.' if where else ''}{k}" for k in extra)
    return ".".join(str(p) for p in err.absolute_path) or "<root>"


def validate_config(raw: dict) -> RunConfig:
    """Validate a raw mapping and fill every default deterministically."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: (list(e.absolute_path), e.message))
    if errors:
        e = errors[0]
        raise ConfigError(f"invalid config key {_offending_key(e)}: {e.message}")
    params = {name: copy.deepcopy(spec[1]) for name, spec in COMMANDS[raw["command"]].items()}
    params.update(copy.deepcopy(raw.get("params", {})))
    seen = {}
    for u in raw.get("units", []):
        dim = UNIT_DIMENSIONS[u]
        if seen.get(dim, u) != u:
            raise ConfigError(f"invalid config key units: two units given for {dim}")
        seen[dim] = u
    return RunConfig(
        command=raw["command"],
        params=params,
        output_path=raw.get("output_path"),
        format=raw.get("format", "json"),
        seed=raw.get("seed"),
        units=list(raw.get("units", [])),
    )


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    return validate_config(raw)


def _planck_params(cfg: RunConfig, consts: PlanckUnits | None = None) -> dict:
    """Parameter values converted to Planck units according to ``cfg.units``."""
    consts = consts or default_units()
    factors = {}
    for u in cfg.units:
        dim = UNIT_DIMENSIONS[u]
        target = {"length": "planck_length", "mass": "planck_mass", "time": "planck_time"}[dim]
        factors[dim] = planck_convert(1.0, u, target, consts)
    length = factors.get("length", 1.0)
    scale = {
        "length": length,
        "mass": factors.get("mass", 1.0),
        "time": factors.get("time", 1.0),
        "inverse_length": 1.0 / length,
        "inverse_length2": 1.0 / length**2,
    }
    out = {}
    for name, value in cfg.params.items():
        dim = COMMANDS[cfg.command][name][2]
        f = scale.get(dim, 1.0) if dim else 1.0
        if value is None or f == 1.0 or isinstance(value, bool):
            out[name] = value
        elif isinstance(value, list):
            out[name] = [v * f for v in value]
        else:
            out[name] = value * f
    return out


# ---------------------------------------------------------------------------
# shared builders


def _state(p: dict) -> states.WaveFunction:
    kind = p["state"]
    n = p["n"]
    if kind == "bead":
        return experiments.bead_ground_state(p["delta"], n)
    if kind == "box":
        return states.box_eigenstate(numerics.Grid1D.box(p["delta"], n), p["delta"], p["level"])
    grid = numerics.Grid1D.symmetric(p["half_width"], n)
    if kind == "gaussian":
        return states.gaussian_packet(grid, p["sigma"], p["x0"], p["p0"])
    if kind == "complex_gaussian":
        return states.complex_gaussian(grid, complex(p["c_re"], p["c_im"]))
    if kind == "hermite":
        return states.hermite_state(grid, p["level"] - 1, p["sigma"])
    w1 = p["weight1"]
    return states.cat_wavefunction(grid, p["separation"], p["sigma"], math.sqrt(w1), math.sqrt(1.0 - w1))


def _kappa(p: dict) -> float:
    if p.get("kappa") is not None:
        return float(p["kappa"])
    return decoherence.alpha(BallParams(p["M"], p["R"]))


def _hamiltonian(p: dict, grid: numerics.Grid1D) -> numerics.HamiltonianSpec:
    if p["hamiltonian"] == "free":
        return numerics.HamiltonianSpec.free(p["M"])
    if p["hamiltonian"] == "harmonic":
        return numerics.HamiltonianSpec.harmonic(p["M"], p["k"])
    return numerics.HamiltonianSpec.box(p["M"], grid.walls[1])


def _kernel_summary(rho: states.DensityKernel) -> dict:
    return {"trace": rho.trace, "purity": rho.purity(), "min_eigenvalue": rho.min_eigenvalue}


# ---------------------------------------------------------------------------
# command implementations: each returns {"table": rows or None, "report": dict}


def _cmd_dexp(p: dict) -> dict:
    if p["normalization"]:
        v = decoherence.normalization_integral()
        return {"table": None, "report": {"normalization_integral": v, "expected": 0.25}}
    mode = p["mode"]
    if mode.startswith("nbody"):
        cfgn = NBodyConfig(tuple(p["masses"]), tuple(p["radii"]))
        fn = decoherence.dexp_nbody_gaussian if mode == "nbody_gaussian" else decoherence.dexp_nbody_log
        return {"table": None, "report": {"mode": mode, "D": fn(cfgn, p["x"], p["xp"])}}
    ball = BallParams(p["M"], p["R"])
    spec = DecoherenceSpec(mode, ball)
    rows = [{"a": float(a), "D": decoherence.dexp(float(a), spec)} for a in p["a"]]
    return {"table": rows, "report": {"alpha": decoherence.alpha(ball), "mode": mode, "values": rows}}


def _cmd_rho(p: dict) -> dict:
    psi = _state(p)
    kappa = _kappa(p)
    model = p["model"]
    if model == "gauss":
        rho = states.build_rho_gauss(psi, kappa)
    elif model == "ball":
        rho = states.build_rho_ball(psi, BallParams(p["M"], p["R"]), DecoherenceSpec("auto", BallParams(p["M"], p["R"])))
    elif model == "first_order":
        rho = states.first_order_rho(psi, kappa)
    else:
        Psi = states.ProductWaveFunction.product(*([psi] * p["bodies"]))

        def d(q, qp):
            s = sum(q) - sum(qp)
            return kappa * s * s

        rho = states.build_rho_nbody(Psi, d)
    report = {"model": model, "kappa": kappa, "nbody": rho.nbody}
    if model != "first_order":
        report.update(_kernel_summary(rho))
    else:
        report.update({"trace": rho.trace})
    diag = rho.diagonal.reshape(-1)
    if rho.nbody == 1:
        rows = [{"x": float(x), "rho_xx": float(v)} for x, v in zip(rho.grid.points, diag)]
    else:
        rows = [{"index": i, "rho_qq": float(v)} for i, v in enumerate(diag)]
    return {"table": rows, "report": report}


def _cmd_expect(p: dict) -> dict:
    psi = _state(p)
    kappa = _kappa(p)
    obs_name = p["observable"]
    if obs_name == "uncertainty":
        rep = states.uncertainty_report(psi, BallParams(p["M"], p["R"])).to_dict()
        return {"table": None, "report": rep}
    rho, rho0 = states.build_rho_gauss(psi, kappa), states.pure_kernel(psi)
    if obs_name == "parity":
        val, val0 = states.expect_parity(rho), states.expect_parity(rho0)
        extra = {"first_order": states.parity_first_order(psi, kappa)} if psi.parity_tag != "none" else {}
    else:
        obs = {
            "x": states.ObservableKernel.position(lambda x: x),
            "x2": states.ObservableKernel.position(lambda x: x * x),
            "p": states.ObservableKernel("momentum"),
            "p2": states.ObservableKernel("momentum_squared"),
        }[obs_name]
        val, val0 = states.expect(rho, obs), states.expect(rho0, obs)
        extra = {"naive_offset": states.naive_p2_offset(1, kappa)} if obs_name == "p2" else {}
    return {"table": None, "report": {"observable": obs_name, "kappa": kappa, "rho": val, "rho0": val0, "difference": val - val0, **extra}}


def _pairs_rows(pairs) -> list:
    return [{"index": i, "eigenvalue": float(lam)} for i, (lam, _) in enumerate(pairs)]


def _cmd_spectrum(p: dict) -> dict:
    kind = p["kind"]
    kappa = _kappa(p)
    if kind == "cat":
        w1 = p["weight1"]
        cat = spectra.CatState(math.sqrt(w1), math.sqrt(1.0 - w1), p["overlap"])
        diag = spectra.cat_exact_diag(cat)
        rows = [{"index": 0, "eigenvalue": diag.A}, {"index": 1, "eigenvalue": diag.B}]
        return {"table": rows, "report": {"A": diag.A, "B": diag.B, "k": [diag.k.real, diag.k.imag], "s": [diag.s.real, diag.s.imag]}}
    if kind == "3d":
        factors = [experiments.bead_ground_state(d, p["n"]) for d in p["deltas"]]
        ps = spectra.perturb_diag_3d(factors, kappa)
    else:
        psi = _state(p)
        if kind == "1d":
            ps = spectra.perturb_diag_1d(psi, kappa)
        elif kind == "product":
            ps = spectra.perturb_diag_product([psi] * p["bodies"], kappa)
        else:
            lam, _ = spectra.general_first_eigenpair(psi, kappa)
            rows = [{"index": 0, "eigenvalue": lam}]
            return {"table": rows, "report": {"kind": kind, "kappa": kappa, "eigenvalues": [lam]}}
    rows = _pairs_rows(ps.pairs)
    return {"table": rows, "report": {"kind": kind, "kappa": kappa, "order_param": ps.order_param, "eigenvalues": [r["eigenvalue"] for r in rows]}}


def _cmd_events(p: dict) -> dict:
    if p["overlap"] >= 0:
        grid = numerics.Grid1D.symmetric(p["half_width"], p["n"])
        w1 = p["weight1"]
        cat = spectra.CatState(math.sqrt(w1), math.sqrt(1.0 - w1), p["overlap"])
        rho = spectra.cat_kernel(grid, cat, p["separation"], min(p["separation"] / 2.0, 2.0))[0]
    else:
        rho = states.build_rho_gauss(_state(p), _kappa(p))
    ev = spectra.brute_force_events(rho, p["cluster_tol"], p["floor"])
    rows = [{"index": i, **e.to_dict()} for i, e in enumerate(ev.events)]
    report = {"events": rows, "residual": ev.residual}
    if p["beable"] != "none":
        B = states.ObservableKernel("parity") if p["beable"] == "parity" else states.ObservableKernel.position(lambda x: x)
        chk = spectra.is_beable(B, rho, events=ev)
        report["beable"] = chk["beable"]
        report["commutator_norm"] = chk["commutator_norm"]
        report["event_values"] = chk["event_values"]
        if chk["beable"]:
            report["beable_expectation"] = spectra.beable_expectation(B, ev, chk["event_values"])
    return {"table": rows, "report": report}


def _cmd_evolve(p: dict) -> dict:
    if p["example"]:
        return {"table": None, "report": dynamics.entropy_timescale_example()}
    psi = _state(p)
    h = _hamiltonian(p, psi.grid)
    times = np.linspace(p["t_start"], p["t_stop"], p["n_times"])
    res = dynamics.evolve_mdm(psi, h, _kappa(p), times, method=p["method"])
    rows = [dict(zip(("t", "S", "S1", "x2", "min_eig"), r)) for r in zip(res.times, res.S, res.S1, res.x2, res.min_eig)]
    report = {"series": res.to_dict()}
    if p["n_times"] >= 3:
        report["two_sided"] = dynamics.two_sided_check(res)
        if h.kind == "free":
            report["spread_fit"] = dynamics.spread_fit(times, res.x2, h.M).to_dict()
    return {"table": rows, "report": report}


def _cmd_master(p: dict) -> dict:
    psi = _state(p)
    kappa = _kappa(p)
    h = _hamiltonian(p, psi.grid)
    if p["probe"]:
        return {"table": None, "report": dynamics.positivity_probe(psi, kappa, p["M"], p["dt"], h)}
    if p["kind"] == "blp":
        spec = dynamics.MasterEqSpec.blp(p["c"], h, p["dt"])
    else:
        spec = dynamics.MasterEqSpec.mdm_gauss(kappa, h, p["dt"])
    traj = dynamics.integrate_master(states.build_rho_gauss(psi, kappa), spec, p["steps"], record_every=p["record_every"])
    res = traj.evolution_result()
    rows = [dict(zip(("t", "S", "S1", "x2", "min_eig"), r)) for r in zip(res.times, res.S, res.S1, res.x2, res.min_eig)]
    return {"table": rows, "report": {"kind": p["kind"], "series": res.to_dict()}}


def _jsonable_penrose(rep: dict) -> dict:
    out = {k: v for k, v in rep.items() if k != "rho_matter"}
    for k in ("photon_t_m", "photon_t_f"):
        out[k] = np.asarray(rep[k]).tolist()
    return out


def _cmd_penrose(p: dict) -> dict:
    mirror = BallParams(p["M"], p["R"])
    theories = experiments.THEORIES if p["theory"] == "all" else (p["theory"],)
    reports = {}
    for th in theories:
        cfg = experiments.PenroseConfig.sine(mirror, p["xi_max"], p["t_f"], p["n_times"], p["width"], th)
        reports[th] = _jsonable_penrose(experiments.penrose_run(cfg))
    rows = [{"theory": th, "p_detector": r["p_detector"], "p_source": r["p_source"], "D_max": r["D_max"]} for th, r in reports.items()]
    return {"table": rows, "report": reports}


def _cmd_pmt(p: dict) -> dict:
    cfg = experiments.PMTConfig(
        bead=BallParams(p["M"], p["R"]), delta=p["delta"], probe_mass=p["probe_mass"], nx=p["nx"], ny=p["ny"], t_out=p["t_out"]
    )
    if p["light_probe"]:
        rep = experiments.pmt_light_probe(cfg, p["mass_ratios"])
        return {"table": rep["sweep"], "report": rep}
    rep = experiments.pmt_run(cfg)
    rows = []
    for model, m in rep["models"].items():
        for name, o in m["observables"].items():
            rows.append({"model": model, "observable": name, "rho0": o["rho0"], "rho": o["rho"], "discrepancy": o["discrepancy"]})
    return {"table": rows, "report": rep}


def _cmd_estimate(p: dict) -> dict:
    inp = experiments.RadiationInput(p["m"], p["ell"], p["omega"], p["area"])
    both = not (p["graviton"] or p["photon"])
    report = {}
    if p["graviton"] or both:
        report.update(experiments.graviton_estimate(inp))
    if p["photon"] or both:
        report.update(experiments.photon_emission_estimate(inp))
    return {"table": [report], "report": report}


def _cmd_paper_check(p: dict) -> dict:
    results = acceptance.run_criteria(p["criteria"] or None)
    rows = [{"criterion": r.number, "title": r.title, "pass": r.passed, "seconds": r.seconds} for r in results]
    report = {"results": [{"criterion": r.number, "title": r.title, "pass": r.passed, "detail": r.detail} for r in results]}
    return {"table": rows, "report": report, "text": acceptance.format_table(results), "ok": all(r.passed for r in results)}


RUNNERS: dict[str, Callable[[dict], dict]] = {
    "dexp": _cmd_dexp,
    "rho": _cmd_rho,
    "expect": _cmd_expect,
    "spectrum": _cmd_spectrum,
    "events": _cmd_events,
    "evolve": _cmd_evolve,
    "master": _cmd_master,
    "penrose": _cmd_penrose,
    "pmt": _cmd_pmt,
    "estimate": _cmd_estimate,
    "paper-check": _cmd_paper_check,
}


# ---------------------------------------------------------------------------
# output


def _fmt(v: Any) -> str:
    if isinstance(v, bool) or v is None:
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17e}"
    return str(v)


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, spectra.EventSet):
        return _to_jsonable(obj.to_dict())
    return obj


def render(result: dict, fmt: str) -> str:
    if fmt == "csv" and result.get("table"):
        rows = result["table"]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        keys = list(rows[0])
        writer.writerow(keys)
        for r in rows:
            writer.writerow([_fmt(r.get(k)) for k in keys])
        return buf.getvalue()
    return json.dumps(_to_jsonable(result["report"]), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _add_flags(sub: argparse.ArgumentParser, table: dict) -> None:
    for name, (typ, _default, _dim, extra) in table.items():
        flags = [f"--{name}"]
        if "_" in name:
            flags.append(f"--{name.replace('_', '-')}")
        if typ == "boolean":
            sub.add_argument(*flags, dest=name, action="store_true", default=None)
        elif typ == "array":
            item = int if extra.get("items", {}).get("type") == "integer" else float
            sub.add_argument(*flags, dest=name, nargs="+", type=item, default=None)
        elif typ == "integer":
            sub.add_argument(*flags, dest=name, type=int, default=None)
        elif typ == "string":
            sub.add_argument(*flags, dest=name, choices=extra.get("enum"), default=None)
        else:
            sub.add_argument(*flags, dest=name, type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gravdeco", description="Gravitational decoherence kernels, spectra, dynamics and experiment harnesses.")
    subs = parser.add_subparsers(dest="command", parser_class=_Parser)
    for cmd, table in COMMANDS.items():
        sub = subs.add_parser(cmd, help=f"run the {cmd} operations")
        sub.add_argument("--config", help="JSON run configuration (flags override its params)")
        sub.add_argument("--output", help="write the result here instead of stdout")
        sub.add_argument("--format", choices=["csv", "json"], default=None)
        sub.add_argument("--seed", type=int, default=None)
        sub.add_argument("--unit", action="append", choices=sorted(UNIT_DIMENSIONS), default=None, help="input unit override (repeatable)")
        sub.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")
        _add_flags(sub, table)
    return parser


def _resolve(args: argparse.Namespace) -> RunConfig:
    raw: dict = {"command": args.command, "params": {}}
    if args.config:
        with open(args.config) as fh:
            try:
                file_raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(file_raw, dict):
            raise ConfigError("config must be a JSON object")
        if file_raw.get("command", args.command) != args.command:
            raise ConfigError(f"invalid config key command: file is for {file_raw['command']!r}")
        raw.update(file_raw)
        raw["params"] = dict(file_raw.get("params", {}))
    for name in COMMANDS[args.command]:
        v = getattr(args, name, None)
        if v is not None:
            raw["params"][name] = v
    if args.output is not None:
        raw["output_path"] = args.output
    if args.format is not None:
        raw["format"] = args.format
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.unit:
        raw["units"] = args.unit
    return validate_config(raw)


NUMERICAL_ERRORS = (
    numerics.QuadratureBudgetExceeded,
    numerics.PropagationUnstable,
    dynamics.MasterEquationUnstable,
    dynamics.NonPositiveState,
    np.linalg.LinAlgError,
    FloatingPointError,
    NumericalFailure,
)


def run(cfg: RunConfig) -> tuple[int, str]:
    """Execute a validated config; returns the exit code and the text for stdout."""
    result = RUNNERS[cfg.command](_planck_params(cfg))
    text = render(result, cfg.format)
    summary = result["text"] + "\n" if "text" in result else None
    if cfg.output_path:
        with open(cfg.output_path, "w") as fh:
            fh.write(text)
        text = summary or ""
    elif summary is not None:
        text = summary
    return (0 if result.get("ok", True) else 2), text


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            print("gravdeco: error: a command is required", file=sys.stderr)
            return 1
        cfg = _resolve(args)
        if args.dump_config:
            sys.stdout.write(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
            return 0
        code, text = run(cfg)
    except NUMERICAL_ERRORS as exc:
        print(f"gravdeco: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError, TypeError, KeyError, MemoryError, OSError) as exc:
        print(f"gravdeco: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
