"""
Command-line front end: ``phasebundle <task> --config scenario.json``.

Exit codes: 0 on success, 2 for an invalid configuration (the message names
the offending field), 3 for a numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from importlib import resources

import jsonschema
import numpy as np

from . import evolution, fock_spaces, frame_transport, linear_structures as ls, parameter_geometry as pg
from .errors import NumericalFailure, PhaseBundleError

TASKS = ("check", "holonomy", "curvature", "spectrum", "evolve", "phases")

DEFAULTS = {
    "steps": 10000,
    "truncation": 40,
    "metaplectic": True,
    "T": [50.0, 100.0, 200.0, 400.0],
    "substeps_per_time": 10.0,
    "eps": 1e-3,
    "gap_floor": 1e-6,
    "seed": 0,
    "family_vertices": 64,
    "levels": [0],
    "input_tolerance": ls.INPUT_TOL,
    "exact_tolerance": ls.EXACT_TOL,
    "frame_tolerance": frame_transport.FRAME_TOL,
    "unitarity_bound": evolution.UNITARITY_BOUND,
    "leakage_bound": evolution.LEAKAGE_BOUND,
}

DEFAULT_FORMAT = {"check": "json", "holonomy": "json", "curvature": "json",
                  "spectrum": "csv", "evolve": "csv", "phases": "csv"}


class ConfigError(Exception):
    """Invalid scenario; the message starts with the offending field."""


def load_schema() -> dict:
    text = resources.files("phasebundle").joinpath("data/scenario.schema.json").read_text()
    return json.loads(text)


def _field(path) -> str:
    return ".".join(str(p) for p in path) or "<root>"


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: malformed JSON at line {exc.lineno}: {exc.msg}") from None
    errors = sorted(jsonschema.Draft202012Validator(load_schema()).iter_errors(data), key=lambda e: list(e.path))
    if errors:
        err = errors[0]
        raise ConfigError(f"{_field(err.path)}: {err.message}")
    return data


class Scenario:
    """A validated configuration with command-line overrides and defaults applied."""

    def __init__(self, data: dict, steps=None, metaplectic=None, seed=None):
        self.data = data
        space = data["space"]
        self.kind = space["kind"]
        self.n = space["half_dim"]
        num = dict(data.get("numerics", {}))
        self.steps = steps if steps is not None else num.get("steps", DEFAULTS["steps"])
        if self.steps < 3:
            raise ConfigError("numerics.steps: must be at least 3")
        self.metaplectic = metaplectic if metaplectic is not None else num.get("metaplectic", DEFAULTS["metaplectic"])
        self.seed = seed if seed is not None else space.get("seed", DEFAULTS["seed"])
        self.num = num
        self.triple = None
        if self.kind != "generic":
            try:
                self.triple = ls.standard_triple(self.kind, self.n)
            except PhaseBundleError as exc:
                raise ConfigError(f"space.half_dim: {exc}") from None
        self.form = self._form(space)

    def knob(self, name):
        return self.num.get(name, DEFAULTS[name])

    def _form(self, space):
        if "form" in space:
            try:
                form = ls.BilinearForm.from_json(space["form"])
            except (PhaseBundleError, ValueError, KeyError) as exc:
                raise ConfigError(f"space.form: {exc}") from None
            if form.dim != 2 * self.n:
                raise ConfigError(f"space.form: dimension {form.dim} does not match half_dim {self.n}")
            return form
        if self.triple is not None:
            return self.triple.invariant_form()
        if space.get("statistics", "fermion") == "boson":
            return ls.standard_symplectic(self.n)
        return ls.euclidean(2 * self.n)

    @property
    def manifold(self):
        if self.kind == ls.QUATERNIONIC:
            return pg.SPHERE
        if self.kind == ls.PARAQUATERNIONIC:
            return pg.HYPERBOLOID
        raise ConfigError("space.kind: this task needs a quaternionic or paraquaternionic family")

    @property
    def fixed_statistics(self):
        """Statistics of the fixed-structure Fock family over this space."""
        stat = self.data["space"].get("statistics")
        if stat is not None:
            return stat
        return "boson" if self.form.kind == ls.SYMPLECTIC else "fermion"

    @property
    def varying_statistics(self):
        """Statistics whose Hilbert spaces vary with J over the triple's family."""
        return "boson" if self.kind == ls.QUATERNIONIC else "fermion"

    def default_vertices(self):
        if self.manifold == pg.SPHERE:
            return [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        c, s = math.sqrt(3.0), math.sqrt(2.0)
        return [[1.0, 0.0, 0.0], [c, s, 0.0], [c, 0.0, s]]

    def vertices(self):
        loop = self.data.get("loop")
        if loop is None:
            return [np.array(v) for v in self.default_vertices()]
        if loop["kind"] != self.manifold:
            raise ConfigError(f"loop.kind: {self.kind} families live on the {self.manifold}")
        return [np.array(v, dtype=float) for v in loop["vertices"]]

    def base_loop(self):
        verts = self.vertices()
        loop = self.data.get("loop", {})
        per_edge = loop.get("steps_per_edge", max(1, math.ceil(self.steps / len(verts))))
        try:
            return verts, pg.polygon_loop(self.manifold, verts, per_edge)
        except PhaseBundleError as exc:
            raise ConfigError(f"loop.vertices: {exc}") from None

    def point(self):
        if "point" in self.data:
            return np.array(self.data["point"], dtype=float)
        return np.array([0.0, 0.0, 1.0]) if self.manifold == pg.SPHERE else np.array([1.0, 0.0, 0.0])


# -- tasks -------------------------------------------------------------------------------

def task_check(sc: Scenario):
    checks = []

    def add(name, value, tol):
        checks.append({"name": name, "value": float(value), "tolerance": tol, "ok": bool(value <= tol)})

    rng = np.random.default_rng(sc.seed)
    if sc.triple is not None:
        add("triple relations", sc.triple.relation_defect(), ls.EXACT_TOL)
        worst = 0.0
        for _ in range(100):
            xi, eta = _random_point(sc.manifold, rng), _random_point(sc.manifold, rng)
            worst = max(worst, ls.product_identity_defect(sc.triple, xi, eta))
        add("J_xi J_eta identity", worst, ls.EXACT_TOL)
        worst = 0.0
        for _ in range(20):
            J = ls.j_xi(sc.triple, _random_point(sc.manifold, rng))
            report = ls.validate(ls.CompatiblePair(sc.form, J))
            worst = max([worst] + [m for _, m in report])
        add("compatibility along the family", worst, ls.INPUT_TOL)
    J = ls.make_random(sc.form, sc.seed)
    report = ls.validate(ls.CompatiblePair(sc.form, J))
    add("random compatible structure", max([0.0] + [m for _, m in report]), ls.INPUT_TOL)
    partner = ls.derive_partner(sc.form, J)
    back = ls.derive_partner(partner, J)
    add("partner round trip", float(np.max(np.abs(back.components - sc.form.components))), ls.EXACT_TOL)
    ok = all(c["ok"] for c in checks)
    return {"task": "check", "ok": ok, "checks": checks}, (0 if ok else 3)


def _random_point(kind, rng):
    if kind == pg.SPHERE:
        v = rng.normal(size=3)
        return v / np.linalg.norm(v)
    v = rng.normal(size=2)
    return np.array([math.sqrt(1.0 + v @ v), v[0], v[1]])


def _vacuum_prediction(sc: Scenario, area: float) -> float:
    if not sc.metaplectic:
        return 0.0
    sign = -1.0 if sc.kind == ls.QUATERNIONIC else 1.0
    return sign * sc.n * area / 4


def task_holonomy(sc: Scenario):
    verts, base = sc.base_loop()
    area = pg.polygon_area(sc.manifold, verts)
    loop = base.to_structures(sc.triple)
    start = frame_transport.frame_at(loop.samples[0], sc.form)
    extrapolate = sc.knob("extrapolate") if "extrapolate" in sc.num else False
    V = frame_transport.loop_holonomy(loop, start, "V", extrapolate=extrapolate)
    records = []
    for k in sc.num.get("levels", DEFAULTS["levels"]):
        rec = frame_transport.fock_level_holonomy(V, k, sc.varying_statistics, sc.metaplectic)
        records.append(rec.to_json())
    for tag in sc.num.get("bundles", []):
        k = sc.num.get("k", 1) if tag in ("Sym^k", "Lambda^k") else None
        records.append(frame_transport.loop_holonomy(loop, start, tag, k=k, extrapolate=extrapolate).to_json())
    pred = _vacuum_prediction(sc, area)
    out = {
        "task": "holonomy",
        "kind": sc.kind,
        "half_dim": sc.n,
        "metaplectic": sc.metaplectic,
        "area": area,
        "steps": loop.steps,
        "predicted_vacuum_phase": {"re": math.cos(pred), "im": math.sin(pred)},
        "holonomies": records,
    }
    return out, 0


def task_curvature(sc: Scenario):
    xi = sc.point()
    tangents = sc.data.get("tangents")
    if tangents is None:
        tangents = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]] if sc.manifold == pg.SPHERE else [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    try:
        J = ls.j_xi(sc.triple, xi)
    except PhaseBundleError as exc:
        raise ConfigError(f"point: {exc}") from None
    A, B = (sc.triple.combine(np.array(t, dtype=float)) for t in tangents)
    try:
        sigma = pg.kaehler_form_value(J, A, B)
    except PhaseBundleError as exc:
        raise ConfigError(f"tangents: {exc}") from None
    scale = {"det": 1.0, "sqrt_det": 0.5, "inv_sqrt_det": -0.5}
    rows = []
    for tag in sc.num.get("bundles", ["det", "sqrt_det", "inv_sqrt_det"]):
        if tag not in scale:
            raise ConfigError(f"numerics.bundles: curvature estimates are available for line bundles only, not {tag}")
        est = frame_transport.plaquette_curvature(J, A, B, sc.knob("eps"), tag, form=sc.form)
        pred = -1j * sigma * scale[tag]
        rows.append({"bundle": tag, "curvature_re": est.real, "curvature_im": est.imag,
                     "predicted_re": pred.real, "predicted_im": pred.imag})
    return {"task": "curvature", "kaehler_form": sigma, "rows": rows}, 0


def _fock_space(sc: Scenario, J0):
    stat = sc.fixed_statistics
    try:
        if stat == "boson":
            return fock_spaces.BosonFock(sc.form, sc.knob("truncation"), J0)
        return fock_spaces.FermionFock(sc.form, J0)
    except PhaseBundleError as exc:
        raise ConfigError(f"space.statistics: {exc}") from None


def _levels(sc: Scenario, space):
    if "levels" in sc.num:
        return sc.num["levels"]
    if space.statistics == "fermion":
        return list(range(space.modes + 1))
    return list(range(max(1, space.truncation // 4) + 1))


def _fixed_path(sc: Scenario):
    """Structures at which the fixed-structure spectrum is sampled."""
    if sc.kind == "generic":
        if "loop" in sc.data:
            raise ConfigError("loop: generic spaces have no loop family")
        if "seed" in sc.data["space"]:
            return [ls.make_random(sc.form, sc.seed)]
        return [ls.reference_structure(sc.form)]
    if "loop" in sc.data or "point" not in sc.data:
        _, base = sc.base_loop()
        return list(base.to_structures(sc.triple).samples[:-1])
    try:
        return [ls.j_xi(sc.triple, sc.point())]
    except PhaseBundleError as exc:
        raise ConfigError(f"point: {exc}") from None


def task_spectrum(sc: Scenario):
    points = _fixed_path(sc)
    space = _fock_space(sc, points[0])
    samples = fock_spaces.spectral_frames(space, points, _levels(sc, space), sc.knob("gap_floor"))
    rows = fock_spaces.spectrum_rows(samples, space)
    return ("spectrum", ["sample_index", "level", "eigenvalue", "gap"], rows), 0


def task_evolve(sc: Scenario):
    _, base = sc.base_loop()
    loop = base.to_structures(sc.triple)
    space = _fock_space(sc, loop.samples[0])
    levels = sc.num.get("levels", DEFAULTS["levels"])
    frames = fock_spaces.spectral_frames(space, loop.samples[:1], levels, sc.knob("gap_floor"))[0].frames
    rows = []
    for T in sc.knob("T"):
        schedule = evolution.Schedule(base, float(T))
        sub = max(1, math.ceil(float(T) * sc.knob("substeps_per_time") / base.steps))
        ham = evolution.fock_hamiltonian(space, schedule, sc.triple)
        for k in levels:
            F = frames[k]
            result = evolution.evolve(schedule, F, ham, substeps=sub)
            split = evolution.adiabatic_split(result, F, space.level_energy(k))
            rows.append(evolution.evolution_rows(T, k, split))
    return ("evolve", ["T", "level", "dyn_phase_arg", "geom_phase_arg", "leakage"], rows), 0


def task_phases(sc: Scenario):
    fam = sc.data.get("family", {"radii": [0.25, 0.5, 0.75, 1.0]})
    count = fam.get("vertices", DEFAULTS["family_vertices"])
    per_edge = max(1, math.ceil(sc.steps / count))
    rows = []
    for r in fam["radii"]:
        center = fam.get("center", "north")
        verts = pg.circle_vertices(sc.manifold, float(r), count, center=center)
        area = pg.polygon_area(sc.manifold, verts)
        if sc.manifold == pg.SPHERE:
            area = area % (4 * math.pi)
        loop = pg.polygon_loop(sc.manifold, verts, per_edge).to_structures(sc.triple)
        start = frame_transport.frame_at(loop.samples[0], sc.form)
        V = frame_transport.loop_holonomy(loop, start, "V")
        vac = frame_transport.fock_level_holonomy(V, 0, sc.varying_statistics, sc.metaplectic)
        measured = float(np.angle(vac.phase))
        predicted = float(np.angle(np.exp(1j * _vacuum_prediction(sc, area))))
        diff = abs(float(np.angle(np.exp(1j * (measured - predicted)))))
        rows.append((area, measured, predicted, diff))
    return ("phases", ["omega", "measured_phase_arg", "predicted_phase_arg", "abs_difference"], rows), 0


TASK_FUNCS = {"check": task_check, "holonomy": task_holonomy, "curvature": task_curvature,
              "spectrum": task_spectrum, "evolve": task_evolve, "phases": task_phases}


# -- output ------------------------------------------------------------------------------

def _to_table(payload):
    if isinstance(payload, tuple):
        return payload
    return None


def render(payload, fmt: str) -> str:
    table = _to_table(payload)
    if fmt == "csv":
        if table is None:
            rows = payload.get("rows") or payload.get("checks") or []
            if not rows:
                raise ConfigError("output.format: this task has no tabular output; use json")
            header = list(rows[0])
            rows = [[r[h] for h in header] for r in rows]
        else:
            _, header, rows = table
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
        return buf.getvalue()
    if table is not None:
        name, header, rows = table
        payload = {"task": name, "rows": [dict(zip(header, row)) for row in rows]}
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phasebundle", description="Geometric phases of families of linear phase spaces.")
    p.add_argument("task", nargs="?", choices=TASKS)
    p.add_argument("--config", help="scenario JSON file")
    p.add_argument("--out", help="output path (default: stdout or output.path)")
    p.add_argument("--steps", type=int, help="total steps along loops")
    p.add_argument("--metaplectic", choices=("on", "off"), help="include half-form factors")
    p.add_argument("--seed", type=int, help="seed for random structures")
    p.add_argument("--show-defaults", action="store_true", help="print the table of numeric defaults and exit")
    return p


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    if args.show_defaults:
        stdout.write(json.dumps(DEFAULTS, indent=2, sort_keys=True) + "\n")
        return 0
    try:
        if args.task is None:
            raise ConfigError("task: missing (one of " + ", ".join(TASKS) + ")")
        if args.config is None:
            raise ConfigError("config: --config is required")
        data = load_config(args.config)
        meta = None if args.metaplectic is None else args.metaplectic == "on"
        sc = Scenario(data, steps=args.steps, metaplectic=meta, seed=args.seed)
        payload, code = TASK_FUNCS[args.task](sc)
        out_spec = data.get("output", {})
        text = render(payload, out_spec.get("format", DEFAULT_FORMAT[args.task]))
    except ConfigError as exc:
        stderr.write(f"invalid config: {exc}\n")
        return 2
    except NumericalFailure as exc:
        stderr.write(f"numerical failure: {exc}\n")
        return 3
    except PhaseBundleError as exc:
        stderr.write(f"invalid config: {type(exc).__name__}: {exc}\n")
        return 2
    path = args.out or data.get("output", {}).get("path")
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return code


def main() -> None:
    try:
        code = run()
    except BrokenPipeError:
        code = 0
    sys.exit(code)


if __name__ == "__main__":
    main()
