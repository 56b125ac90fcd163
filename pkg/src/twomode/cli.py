"""Command-line front end: ``twomode {spectrum,bethe,oracle,potential,verify}``.

Runs are driven by a JSON config (schema in ``CONFIG_SCHEMA``); a few
flags override config entries.  Exit codes: 0 success, 1 computation
failure (capacity, unsupported order, failed verification), 2 usage or
config errors.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from fractions import Fraction

import jsonschema
import numpy as np

from . import __version__
from .bethe import (IncompleteSpectrumWarning, SolverConfig, match_spectrum, solve_bae)
from .diffop import (ERRATA, UnsupportedCaseError, build_diffop, case_coefficients,
                     exact_zeros, normalized_matrix, stirling_L)
from .oracle import (CapacityError, build_fock_hamiltonian, oracle_bethe_check, oracle_states)
from .qes import (CLOSED_FORM_CASES, DomainError, gauge_and_potential, normal_form,
                  transformed_wavefunction, verify_spectral_equivalence)
from .repkit import (BlockLabel, InvalidBlockError, InvalidDegreeError, ModelParams,
                     blocks_with_charge, build_block_matrices, commutator_check, iter_blocks)

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

_NUMBER = {"oneOf": [
    {"type": "number"},
    {"type": "string", "pattern": r"^\s*[-+]?\d+(\.\d*)?([eE][-+]?\d+)?(\s*/\s*\d+)?\s*$"},
]}
_INTEGER = {"oneOf": [
    {"type": "integer"},
    {"type": "string", "pattern": r"^\s*[-+]?\d+(\s*/\s*\d+)?\s*$"},
]}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["s", "r"],
            "properties": {
                "s": _INTEGER, "r": _INTEGER,
                **{k: _NUMBER for k in ("w1", "w2", "w11", "w22", "w12", "g")},
            },
        },
        "block": {
            "type": "object",
            "additionalProperties": False,
            "required": ["M"],
            "properties": {"M": _INTEGER, "delta1": _INTEGER, "delta2": _INTEGER},
        },
        "charge": _INTEGER,
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iters": {"type": "integer", "minimum": 1},
                "starts": {"type": ["integer", "null"], "minimum": 0},
                "seed": {"type": "integer"},
                "oracle_seeding": {"type": "boolean"},
                "strategy": {"enum": ["coefficients", "roots"]},
            },
        },
        "qes": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "x_range": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "z_interval": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "n_points": {"type": "integer", "minimum": 3},
                "sign": {"enum": [1, -1]},
                "states": {"type": "boolean"},
                "check_spectrum": {"type": "boolean"},
                "fd_points": {"type": "integer", "minimum": 10},
                "half_width": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
        },
        "verify": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "degrees": {"type": "array", "items": {
                    "type": "array", "items": {"type": "integer", "minimum": 1},
                    "minItems": 2, "maxItems": 2}},
                "max_M": {"type": "integer", "minimum": 0},
                "draws": {"type": "integer", "minimum": 1},
                "suites": {"type": "array", "items": {"enum": [
                    "commutators", "equivalence", "tables", "stirling", "exact-zeros", "bethe"]}},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"path": {"type": "string"}, "format": {"enum": ["json", "csv"]}},
        },
    },
    "not": {"required": ["block", "charge"]},
}

VERIFY_DEFAULTS = {
    "degrees": [[s, r] for s in (1, 2, 3) for r in (1, 2, 3)],
    "max_M": 6,
    "draws": 10,
    "suites": ["commutators", "equivalence", "tables", "stirling", "exact-zeros", "bethe"],
}


class UsageError(Exception):
    pass


# -- config handling ---------------------------------------------------------------

def parse_real(value) -> float:
    if isinstance(value, str):
        return float(Fraction(value.replace(" ", "")))
    return float(value)


def parse_int(value) -> int:
    q = Fraction(value.replace(" ", "")) if isinstance(value, str) else Fraction(value)
    if q.denominator != 1:
        raise UsageError(f"label {value!r} is not an integer")
    return int(q)


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise UsageError(f"config schema violation at {where}: {exc.message}") from exc


def apply_overrides(cfg: dict, args: argparse.Namespace) -> dict:
    """Fold command-line overrides into a copy of the config and re-validate."""
    cfg = json.loads(json.dumps(cfg))
    if getattr(args, "block", None):
        parts = args.block.split(",")
        if len(parts) != 3:
            raise UsageError("--block expects M,delta1,delta2")
        try:
            M, d1, d2 = (int(p) for p in parts)
        except ValueError as exc:
            raise UsageError("--block expects three integers") from exc
        cfg.pop("charge", None)
        cfg["block"] = {"M": M, "delta1": d1, "delta2": d2}
    if getattr(args, "charge", None) is not None:
        cfg.pop("block", None)
        cfg["charge"] = args.charge
    solver = cfg.setdefault("solver", {})
    for flag, key in (("tol", "tol"), ("starts", "starts"), ("seed", "seed")):
        val = getattr(args, flag, None)
        if val is not None:
            solver[key] = val
    if not solver:
        cfg.pop("solver")
    out = cfg.get("output", {})
    if getattr(args, "out", None):
        out["path"] = args.out
    if getattr(args, "format", None):
        out["format"] = args.format
    if out:
        cfg["output"] = out
    validate_config(cfg)
    return cfg


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(cfg: dict) -> str:
    """sha256 of the canonical config; the output section does not affect results."""
    cfg = {k: v for k, v in cfg.items() if k != "output"}
    return hashlib.sha256(canonical_json(cfg).encode("utf-8")).hexdigest()


def model_from_config(cfg: dict) -> ModelParams:
    if "model" not in cfg:
        raise UsageError("config needs a 'model' section")
    m = cfg["model"]
    try:
        return ModelParams(s=parse_int(m["s"]), r=parse_int(m["r"]),
                           **{k: parse_real(m[k]) for k in ("w1", "w2", "w11", "w22", "w12", "g")
                              if k in m})
    except (InvalidDegreeError, ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad model: {exc}") from exc


def blocks_from_config(cfg: dict, model: ModelParams) -> list[BlockLabel]:
    if "block" in cfg:
        b = cfg["block"]
        label = BlockLabel(parse_int(b["M"]), parse_int(b.get("delta1", 0)),
                           parse_int(b.get("delta2", 0)))
        try:
            label.validate(model)
        except InvalidBlockError as exc:
            raise UsageError(str(exc)) from exc
        return [label]
    if "charge" in cfg:
        K = parse_int(cfg["charge"])
        if K < 0:
            raise UsageError("charge must be nonnegative")
        labels = blocks_with_charge(model, K)
        if not labels:
            raise UsageError(f"no block has charge K={K}")
        return labels
    raise UsageError("select a block (--block or 'block') or a charge (--charge or 'charge')")


def solver_from_config(cfg: dict) -> SolverConfig:
    s = cfg.get("solver", {})
    return SolverConfig(tol=s.get("tol", 1e-10), max_iters=s.get("max_iters", 200),
                        starts=s.get("starts"), seed=s.get("seed", 0),
                        oracle_seeding=s.get("oracle_seeding", False),
                        strategy=s.get("strategy", "coefficients"))


def provenance(cfg: dict) -> dict:
    return {
        "tool": "twomode",
        "version": __version__,
        "config_sha256": config_hash(cfg),
        "seed": cfg.get("solver", {}).get("seed", 0),
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


# -- serialization --------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [_jsonable(float(obj.real)), _jsonable(float(obj.imag))]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def _strip_timings(obj):
    if isinstance(obj, dict):
        return {k: _strip_timings(v) for k, v in obj.items() if k != "seconds"}
    if isinstance(obj, list):
        return [_strip_timings(v) for v in obj]
    return obj


def content_digest(report: dict) -> str:
    """sha256 of the report without the timestamp and wall-clock timings."""
    body = _strip_timings(json.loads(json.dumps(report)))
    body.get("provenance", {}).pop("timestamp", None)
    body.get("provenance", {}).pop("content_sha256", None)
    return hashlib.sha256(canonical_json(body).encode("utf-8")).hexdigest()


def dump_json(report: dict) -> str:
    report = _jsonable(report)
    report["provenance"]["content_sha256"] = content_digest(report)
    return json.dumps(report, indent=2, sort_keys=False, allow_nan=False) + "\n"


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- per-block pipelines ------------------------------------------------------------------

def _label_dict(label: BlockLabel, model: ModelParams) -> dict:
    return {"M": label.M, "delta1": label.delta1, "delta2": label.delta2,
            "q1": str(label.q1(model)), "q2": str(label.q2(model)), "l": str(label.l(model)),
            "charge": label.charge(model)}


def _oracle_part(model, label):
    states = oracle_states(model, label)
    return [{"energy": st.energy, "leading_deficient": st.leading_deficient,
             "roots": st.roots} for st in states]


def _bethe_part(model, label, solver):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IncompleteSpectrumWarning)
        states = solve_bae(model, label, solver)
    notes = [str(w.message) for w in caught if issubclass(w.category, IncompleteSpectrumWarning)]
    return [{"energy": st.energy, "roots": st.roots, "residual_norm": st.residual_norm,
             "monomial_coeffs": st.monomial_coeffs, "flags": st.flags} for st in states], notes


def block_task(kind: str, model: ModelParams, label: BlockLabel, solver: SolverConfig) -> dict:
    """One block of the spectrum / bethe / oracle pipelines (also run in worker processes)."""
    out = {"block": _label_dict(label, model), "warnings": []}
    need_oracle = kind in ("spectrum", "oracle") or model.g == 0
    oracle = _oracle_part(model, label) if need_oracle else None
    if oracle is not None:
        out["oracle"] = oracle
        n_def = sum(st["leading_deficient"] for st in oracle)
        if n_def:
            out["warnings"].append(f"{n_def} degree-deficient state(s) excluded from Bethe matching")
    if kind == "oracle":
        return out
    if model.g == 0:
        out["bethe"] = None
        out["note"] = "g = 0: diagonal, exactly solvable; oracle spectrum reported"
        return out
    bethe, notes = _bethe_part(model, label, solver)
    out["bethe"] = bethe
    out["warnings"].extend(notes)
    if oracle is not None:
        targets = [st["energy"] for st in oracle if not st["leading_deficient"]]
        rep = match_spectrum([b["energy"] for b in bethe], targets, tol=1e-8)
        out["pairing"] = [{"bethe": i, "oracle": j, "delta_E": d} for i, j, d in rep.pairs]
        out["max_delta_E"] = max((d for _, _, d in rep.pairs), default=0.0)
        out["unmatched_oracle"] = list(rep.unmatched_oracle)
        out["unmatched_bethe"] = list(rep.unmatched_bethe)
    return out


def _run_blocks(kind, model, labels, solver, jobs):
    if jobs and jobs > 1 and len(labels) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(block_task, kind, model, lab, solver) for lab in labels]
            return [f.result() for f in futures]
    return [block_task(kind, model, lab, solver) for lab in labels]


def _model_dict(model: ModelParams) -> dict:
    return {"s": model.s, "r": model.r, **{k: float(v) for k, v in model.couplings().items()}}


def cmd_blocks(kind: str, cfg: dict, jobs: int | None) -> tuple[dict, int]:
    model = model_from_config(cfg)
    labels = blocks_from_config(cfg, model)
    solver = solver_from_config(cfg)
    blocks = _run_blocks(kind, model, labels, solver, jobs)
    report = {"provenance": provenance(cfg), "command": kind, "model": _model_dict(model),
              "tolerances": {"bethe_residual": solver.tol, "energy_match": 1e-8},
              "blocks": blocks}
    return report, EXIT_OK


def blocks_csv(report: dict) -> str:
    rows = []
    for b in report["blocks"]:
        lab = b["block"]
        for source in ("oracle", "bethe"):
            for k, st in enumerate(b.get(source) or []):
                rows.append([lab["M"], lab["delta1"], lab["delta2"], source, k,
                             float(st["energy"]), float(st.get("residual_norm", 0.0))])
    return _csv_text(["M", "delta1", "delta2", "source", "index", "energy", "residual"], rows)


# -- potential ------------------------------------------------------------------------------

def _closed_form_header(case: str, c: dict) -> dict:
    A, g, B, D, l = c["A"], c["g"], c["B"], c["D"], c["l"]
    if case == "II-sextic":
        return {"x^6": g**4 / 16, "x^4": -g * g * B / 8,
                "x^2": (B * B + 8 * g * g * (1 - 4 * l)) / 16, "x^0": c["q1"] * B - D}
    if case == "I":
        return {"sqrtA": math.sqrt(A), "cosh(2 sqrtA x)": g * g / (2 * A),
                "sinh(sqrtA x)": g * (2 - B / A), "exp(sqrtA x)": -(2 * l - 1) * g,
                "constant": -D + ((A - B) ** 2 - 2 * g * g) / (4 * A)}
    return {k: c[k] for k in ("A", "B", "D", "g", "q1", "l")}


def cmd_potential(cfg: dict) -> tuple[dict, int]:
    model = model_from_config(cfg)
    if model.order != 2:
        raise UnsupportedCaseError(
            f"(s, r) = ({model.s}, {model.r}) gives a differential operator of order "
            f"{model.order}; the Schroedinger mapping needs order 2")
    labels = blocks_from_config(cfg, model)
    q = cfg.get("qes", {})
    sign = q.get("sign", 1)
    solver = solver_from_config(cfg)
    blocks = []
    for label in labels:
        nf = normal_form(build_diffop(model, label))
        case = nf.case
        if case in CLOSED_FORM_CASES:
            lo, hi = q.get("x_range", [-3.0, 3.0])
            pot = gauge_and_potential(nf, x=np.linspace(lo, hi, q.get("n_points", 401)), sign=sign)
        else:
            if "z_interval" not in q:
                raise UsageError(f"case {case}: set qes.z_interval to sample the potential over z")
            a, b = q["z_interval"]
            pot = gauge_and_potential(nf, z=np.linspace(a, b, q.get("n_points", 401)), sign=sign)
        entry = {"block": _label_dict(label, model), "case": case, "sign": sign,
                 "constants": pot.constants, "metadata": pot.metadata,
                 "grid": {"z": pot.z, "x": pot.x, "V": pot.V, "W": pot.W}}
        if case in CLOSED_FORM_CASES:
            entry["closed_form"] = _closed_form_header(case, pot.constants)
        if q.get("states", False) or q.get("check_spectrum", False):
            if model.g == 0:
                states = [(st.energy, None) for st in oracle_states(model, label)
                          if not st.leading_deficient]
            else:
                states = [(st.energy, st) for st in solve_bae(model, label, solver)]
            entry["states"] = [{"energy": e, "residual_norm": st.residual_norm if st else 0.0}
                               for e, st in states]
            if q.get("states", False) and case in CLOSED_FORM_CASES and model.g != 0:
                psis = []
                for _, st in states:
                    f = transformed_wavefunction(nf, st.polynomial, pot.x, sign)
                    big = np.max(np.abs(f[np.isfinite(f)])) if np.any(np.isfinite(f)) else 1.0
                    psis.append(f / big if big > 0 else f)
                entry["psi_tilde"] = psis
            if q.get("check_spectrum", False):
                rep = verify_spectral_equivalence(pot, [e for e, _ in states],
                                                  n_points=q.get("fd_points", 4000),
                                                  half_width=q.get("half_width"))
                entry["equivalence"] = {
                    "checkable": rep.checkable, "note": rep.note, "half_width": rep.half_width,
                    "n_points": rep.n_points, "tol": rep.tol, "all_match": rep.all_match,
                    "rows": [{"E": E, "fd_eigenvalue": lam, "rel_error": err, "match": ok}
                             for E, lam, err, ok in rep.rows],
                    "refined_rel_errors": rep.refined_errors,
                }
        blocks.append(entry)
    report = {"provenance": provenance(cfg), "command": "potential",
              "model": _model_dict(model), "blocks": blocks}
    code = EXIT_OK
    if any(b.get("equivalence", {}).get("checkable") and not b["equivalence"]["all_match"]
           for b in blocks):
        code = EXIT_FAILURE
    return report, code


def potential_csv(report: dict) -> str:
    if len(report["blocks"]) != 1:
        raise UsageError("CSV output of a potential needs exactly one block")
    b = report["blocks"][0]
    psis = b.get("psi_tilde", [])
    header = ["x", "V"] + [f"psi_{k}" for k in range(len(psis))]
    cols = [b["grid"]["x"], b["grid"]["V"]] + list(psis)
    return _csv_text(header, zip(*[np.asarray(c, dtype=float) for c in cols]))


# -- verify ---------------------------------------------------------------------------------

@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _draws(rng: np.random.Generator, degrees, draws: int, min_g: float = 0.0):
    for s, r in degrees:
        for _ in range(draws):
            w = rng.uniform(-2, 2, 6)
            while abs(w[5]) < min_g:
                w[5] = rng.uniform(-2, 2)
            yield ModelParams(s, r, *w)


def _rel_close(a: np.ndarray, b: np.ndarray, rtol: float) -> float:
    """Largest entrywise relative deviation, with a floor at 1e-13 of the largest entry."""
    floor = 1e-13 * max(np.max(np.abs(a)), np.max(np.abs(b)), np.finfo(float).tiny)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def suite_commutators(opts, rng, fault):
    worst = 0.0
    for model in _draws(rng, opts["degrees"], 1):
        for label in iter_blocks(model, opts["max_M"]):
            mats = build_block_matrices(model, label)
            if fault == "qm-sign":
                mats = type(mats)(mats.q0, mats.qp, -mats.qm, mats.n1, mats.n2, mats.h)
            worst = max(worst, commutator_check(mats, model, label).max_deviation)
    return worst <= 1e-10, f"max deviation {worst:.3e} (tol 1e-10)"


def suite_equivalence(opts, rng, fault):
    worst = 0.0
    for model in _draws(rng, opts["degrees"], opts["draws"]):
        for label in iter_blocks(model, opts["max_M"]):
            h = build_block_matrices(model, label).h
            f = build_fock_hamiltonian(model, label)
            d = normalized_matrix(build_diffop(model, label), model, label)
            worst = max(worst, _rel_close(h, f, 1e-9), _rel_close(d, f, 1e-9))
    return worst <= 1e-9, f"max relative deviation {worst:.3e} (tol 1e-9)"


def suite_tables(opts, rng, fault):
    supported = [(1, 1), (2, 1), (2, 2), (3, 3)]
    degrees = [tuple(d) for d in opts["degrees"] if tuple(d) in supported]
    worst = 0.0
    for model in _draws(rng, degrees, opts["draws"]):
        for label in iter_blocks(model, opts["max_M"]):
            op = build_diffop(model, label)
            table = case_coefficients(model, label, corrected=True)
            for i in range(op.order + 1):
                mine = op.p[i]
                ref = table.p[i] if i < len(table.p) else None
                n = max(len(mine.coefficients), len(ref.coefficients) if ref else 0, 1)
                a = mine.padded(n)
                b = ref.padded(n) if ref else np.zeros(n)
                scale = max(np.max(np.abs(a)), np.max(np.abs(b)), np.finfo(float).tiny)
                worst = max(worst, float(np.max(np.abs(a - b))) / scale)
    note = "; ".join(f"{k}: {v}" for k, v in ERRATA.items())
    return worst <= 1e-12, f"max normwise deviation {worst:.3e} (tol 1e-12); errata applied: {note}"


def suite_stirling(opts, rng, fault):
    S = {(0, 0): 1}
    bad = []
    for k in range(1, 13):
        for i in range(0, k + 1):
            S[(k, i)] = i * S.get((k - 1, i), 0) + S.get((k - 1, i - 1), 0)
        for i in range(1, k + 1):
            if stirling_L(k, i) != S[(k, i)]:
                bad.append((k, i))
    return not bad, "all L(k, i) = S(k, i) for k <= 12" if not bad else f"mismatches at {bad}"


def suite_exact_zeros(opts, rng, fault):
    bad = []
    for model in _draws(rng, opts["degrees"], 1):
        for label in iter_blocks(model, opts["max_M"]):
            annihilation, closure = exact_zeros(model, label)
            if annihilation != 0 or closure != 0:
                bad.append(str(label))
    return not bad, "annihilation and closure products vanish exactly" if not bad else f"nonzero at {bad}"


def suite_bethe(opts, rng, fault):
    worst_res = worst_e = 0.0
    weak = []
    blocks = 0
    for model in _draws(rng, opts["degrees"], opts["draws"], min_g=0.1):
        for label in iter_blocks(model, opts["max_M"]):
            rep = oracle_bethe_check(model, label)
            worst_res = max(worst_res, rep.max_residual)
            worst_e = max(worst_e, rep.max_energy_error)
            targets = [st.energy for st in oracle_states(model, label) if not st.leading_deficient]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", IncompleteSpectrumWarning)
                found = solve_bae(model, label)
            pairs = match_spectrum([st.energy for st in found], targets, tol=1e-8)
            blocks += 1
            if targets and len(pairs.pairs) < 0.95 * len(targets):
                weak.append(str(label))
    ok = worst_res < 1e-8 and worst_e < 1e-8 and not weak
    return ok, (f"oracle roots: max residual {worst_res:.2e}, max energy error {worst_e:.2e}; "
                f"multistart below 95% in {len(weak)} of {blocks} blocks")


SUITES = {
    "commutators": suite_commutators,
    "equivalence": suite_equivalence,
    "tables": suite_tables,
    "stirling": suite_stirling,
    "exact-zeros": suite_exact_zeros,
    "bethe": suite_bethe,
}


def cmd_verify(cfg: dict, fault: str | None = None, log=None) -> tuple[dict, int]:
    opts = {**VERIFY_DEFAULTS, **cfg.get("verify", {})}
    seed = cfg.get("solver", {}).get("seed", 0)
    results = []
    for name in opts["suites"]:
        rng = np.random.default_rng([seed, list(SUITES).index(name)])
        t0 = time.perf_counter()
        passed, detail = SUITES[name](opts, rng, fault)
        res = SuiteResult(name, bool(passed), detail, time.perf_counter() - t0)
        results.append(res)
        if log:
            log(f"{'PASS' if res.passed else 'FAIL'} {name:12s} {res.seconds:7.2f}s  {res.detail}")
    report = {"provenance": provenance(cfg), "command": "verify",
              "settings": opts, "fault": fault,
              "suites": [{"name": r.name, "passed": r.passed, "detail": r.detail,
                          "seconds": round(r.seconds, 3)} for r in results]}
    return report, EXIT_OK if all(r.passed for r in results) else EXIT_FAILURE


# -- argument parsing ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twomode", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"twomode {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--block", help="explicit block M,delta1,delta2")
    common.add_argument("--charge", type=int, help="all blocks with conserved charge K")
    common.add_argument("--tol", type=float, help="Bethe residual tolerance")
    common.add_argument("--starts", type=int, help="multistart count per block")
    common.add_argument("--seed", type=int, help="RNG seed")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for block loops")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--format", choices=["json", "csv"], help="output format")
    helps = {
        "spectrum": "oracle and Bethe spectra with pairing",
        "bethe": "Bethe ansatz solutions only",
        "oracle": "dense diagonalization only",
        "potential": "Schroedinger potential of a second-order case",
        "verify": "run the invariant suites",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, parents=[common], help=text, description=text)
        if name == "verify":
            p.add_argument("--inject-fault", choices=["qm-sign"], help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = apply_overrides(load_config(args.config), args)
        fmt = cfg.get("output", {}).get("format", "json")
        path = cfg.get("output", {}).get("path")
        if args.command in ("spectrum", "bethe", "oracle"):
            report, code = cmd_blocks(args.command, cfg, args.jobs)
            text = blocks_csv(report) if fmt == "csv" else dump_json(report)
        elif args.command == "potential":
            report, code = cmd_potential(cfg)
            text = potential_csv(report) if fmt == "csv" else dump_json(report)
        else:
            if fmt == "csv":
                raise UsageError("verify writes JSON only")
            report, code = cmd_verify(cfg, getattr(args, "inject_fault", None),
                                      log=lambda s: print(s, file=sys.stderr))
            text = dump_json(report)
        emit(text, path)
        return code
    except UsageError as exc:
        print(f"twomode: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CapacityError, UnsupportedCaseError, DomainError) as exc:
        print(f"twomode: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    raise SystemExit(main())
