"""Plain-text and raw-binary file formats.

Every text format is line based: ``#`` starts a comment, records are a
leading keyword followed by ``key=value`` fields, and floats are written
with 17 significant digits so that write/read round-trips exactly.

Lesion table (``baseline.lesions`` / ``followup.lesions``)::

    timepoint baseline
    lesion id=0 x=1.5 y=2 z=3 volume=14.1 trust=0.9 appearance=0.5

Evolution graph (``*.graph``)::

    graph n0=2 n1=1
    edge i=0 j=0 mass=0.41
    lesion timepoint=baseline index=0 id=0 state=merging

Volume: ``<name>.hdr`` holds ``key = value`` lines (dims, spacing,
origin, dtype, components); ``<name>.raw`` is the little-endian payload,
x fastest, then y, then z, with vector components interleaved per voxel.
"""

from __future__ import annotations

import dataclasses
import os
from pathlib import Path
from typing import Optional

import numpy as np

from .core import BASELINE, FOLLOWUP, ConfigError, InvalidLesionError, LesionInstance, LesionSet, MatchConfig
from .graph import EvolutionGraph
from .volume import DeformationField, Volume3D

DTYPES = {"uint8": "<u1", "int16": "<i2", "int32": "<i4", "float32": "<f4", "float64": "<f8"}


class FormatError(InvalidLesionError):
    pass


def fmt(value: float) -> str:
    return format(float(value), ".17g")


def _write_text(path, lines):
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def _records(path):
    """Yield (line number, keyword, fields) for each non-empty line."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror or exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        fields = {}
        for token in rest:
            if "=" not in token:
                fields[token] = None
                continue
            key, value = token.split("=", 1)
            fields[key] = value
        yield lineno, head, fields


def _num(path, lineno, fields, key, cast=float, default=...):
    if key not in fields or fields[key] is None:
        if default is not ...:
            return default
        raise FormatError(f"{path}:{lineno}: missing field {key!r}")
    try:
        return cast(fields[key])
    except ValueError as exc:
        raise FormatError(f"{path}:{lineno}: bad value for {key!r}: {fields[key]!r}") from exc


# lesion tables


def write_lesions(path, lesions: LesionSet):
    lines = [f"timepoint {lesions.timepoint}"]
    for les in lesions:
        x, y, z = les.centroid
        line = f"lesion id={les.id} x={fmt(x)} y={fmt(y)} z={fmt(z)} volume={fmt(les.volume)}"
        if les.trust is not None:
            line += f" trust={fmt(les.trust)}"
        if les.appearance is not None:
            line += f" appearance={fmt(les.appearance)}"
        lines.append(line)
    _write_text(path, lines)


def read_lesions(path) -> LesionSet:
    timepoint = None
    lesions = []
    for lineno, head, fields in _records(path):
        if head == "timepoint":
            timepoint = next(iter(fields), None)
        elif head == "lesion":
            get = lambda key, cast=float, default=...: _num(path, lineno, fields, key, cast, default)  # noqa: E731
            try:
                lesions.append(
                    LesionInstance(
                        get("id", int),
                        (get("x"), get("y"), get("z")),
                        get("volume"),
                        get("trust", default=None),
                        get("appearance", default=None),
                    )
                )
            except InvalidLesionError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
        else:
            raise FormatError(f"{path}:{lineno}: unknown record {head!r}")
    if timepoint not in (BASELINE, FOLLOWUP):
        raise FormatError(f"{path}: missing or invalid 'timepoint' record")
    return LesionSet(timepoint, lesions)


# graphs


def write_graph(path, graph: EvolutionGraph, set0: Optional[LesionSet] = None, set1: Optional[LesionSet] = None):
    ids0 = set0.ids if set0 is not None else list(range(graph.n0))
    ids1 = set1.ids if set1 is not None else list(range(graph.n1))
    lines = [f"graph n0={graph.n0} n1={graph.n1}"]
    for i, j in graph.sorted_edges():
        w = graph.edge_weight(i, j)
        lines.append(f"edge i={i} j={j}" + ("" if w is None else f" mass={fmt(w)}"))
    for k, state in enumerate(graph.baseline_states):
        lines.append(f"lesion timepoint={BASELINE} index={k} id={ids0[k]} state={state}")
    for k, state in enumerate(graph.followup_states):
        lines.append(f"lesion timepoint={FOLLOWUP} index={k} id={ids1[k]} state={state}")
    _write_text(path, lines)


def read_graph(path) -> EvolutionGraph:
    n0 = n1 = None
    edges, weights = [], {}
    states = {BASELINE: {}, FOLLOWUP: {}}
    for lineno, head, fields in _records(path):
        if head == "graph":
            n0 = _num(path, lineno, fields, "n0", int)
            n1 = _num(path, lineno, fields, "n1", int)
        elif head == "edge":
            e = (_num(path, lineno, fields, "i", int), _num(path, lineno, fields, "j", int))
            edges.append(e)
            mass = _num(path, lineno, fields, "mass", float, None)
            if mass is not None:
                weights[e] = mass
        elif head == "lesion":
            tp = fields.get("timepoint")
            if tp not in states:
                raise FormatError(f"{path}:{lineno}: bad timepoint {tp!r}")
            states[tp][_num(path, lineno, fields, "index", int)] = fields.get("state")
        else:
            raise FormatError(f"{path}:{lineno}: unknown record {head!r}")
    if n0 is None:
        raise FormatError(f"{path}: missing 'graph' header")
    if sorted(states[BASELINE]) != list(range(n0)) or sorted(states[FOLLOWUP]) != list(range(n1)):
        raise FormatError(f"{path}: lesion records do not cover all {n0} + {n1} lesions")
    try:
        return EvolutionGraph(
            n0,
            n1,
            frozenset(edges),
            tuple(states[BASELINE][k] for k in range(n0)),
            tuple(states[FOLLOWUP][k] for k in range(n1)),
            tuple(sorted(weights.items())) if weights else None,
        )
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# matrices, plans, cost, prior


def _matrix_lines(name, m):
    m = np.atleast_2d(np.asarray(m, dtype=float))
    lines = [f"matrix name={name} rows={m.shape[0]} cols={m.shape[1]}"]
    lines += ["row " + " ".join(fmt(v) for v in row) for row in m]
    return lines


def read_matrices(path) -> dict:
    out = {}
    current = None
    for lineno, head, fields in _records(path):
        if head == "matrix":
            current = fields.get("name")
            out[current] = []
        elif head == "row":
            if current is None:
                raise FormatError(f"{path}:{lineno}: row before matrix header")
            out[current].append([float(v) for v in fields])
    return {k: np.array(v, dtype=float).reshape(len(v), -1) if v else np.zeros((0, 0)) for k, v in out.items()}


def write_plan(path, plan):
    lines = [
        f"plan iterations={plan.iterations} converged={int(plan.converged)} "
        f"final_residual={fmt(plan.final_residual)} objective={fmt(plan.objective)} "
        f"log_domain={int(plan.log_domain)}"
    ]
    _write_text(path, lines + _matrix_lines("gamma", plan.gamma))


def read_plan(path):
    from .uot import TransportPlan

    meta = next((f for _, h, f in _records(path) if h == "plan"), None)
    if meta is None:
        raise FormatError(f"{path}: missing 'plan' header")
    return TransportPlan(
        gamma=read_matrices(path)["gamma"],
        iterations=int(meta["iterations"]),
        converged=bool(int(meta["converged"])),
        final_residual=float(meta["final_residual"]),
        objective=float(meta["objective"]),
        log_domain=bool(int(meta["log_domain"])),
    )


def write_cost(path, cost):
    lines = []
    for name in ("c_geom", "tau", "s_bar", "combined"):
        lines += _matrix_lines(name, getattr(cost, name))
    _write_text(path, lines)


def write_prior(path, prior):
    rho = "nan" if prior.rho is None else fmt(prior.rho)
    _write_text(path, [f"prior rho={rho} lambda_eff={fmt(prior.lambda_eff)} mu_eff={fmt(prior.mu_eff)}"])


# key = value files (configs, reports, headers)


def read_keyvalue(path) -> dict:
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror or exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def write_keyvalue(path, items):
    lines = []
    for key, value in items:
        if isinstance(value, float):
            value = fmt(value)
        elif isinstance(value, (tuple, list)):
            value = " ".join(fmt(v) if isinstance(v, float) else str(v) for v in value)
        lines.append(f"{key} = {value}")
    _write_text(path, lines)


def parse_config_values(raw: dict, base: Optional[MatchConfig] = None):
    """Split raw strings into MatchConfig overrides and the remaining keys."""
    base = base or MatchConfig()
    types = {f.name: f.type for f in dataclasses.fields(MatchConfig)}
    match, rest = {}, {}
    for key, value in raw.items():
        if key in types:
            try:
                match[key] = int(value) if types[key] in ("int", int) else float(value)
            except ValueError as exc:
                raise ConfigError(f"config value for {key!r} is not a number: {value!r}") from exc
        else:
            rest[key] = value
    return base.replace(**match), rest


# volumes


def write_volume(stem, volume):
    stem = Path(stem)
    data = np.asarray(volume.data)
    components = 3 if isinstance(volume, DeformationField) else 1
    dtype = next((k for k, v in DTYPES.items() if np.dtype(v) == data.dtype.newbyteorder("<")), None)
    if dtype is None:
        data = data.astype("<f8")
        dtype = "float64"
    spatial = volume.dims
    write_keyvalue(
        stem.with_suffix(".hdr"),
        [
            ("dims", list(spatial)),
            ("spacing", [float(s) for s in volume.spacing]),
            ("origin", [float(o) for o in volume.origin]),
            ("dtype", dtype),
            ("components", components),
        ],
    )
    # x fastest: Fortran order over (x, y, z), components innermost
    if components == 1:
        payload = data.astype(DTYPES[dtype]).ravel(order="F")
    else:
        payload = np.moveaxis(data, -1, 0).astype(DTYPES[dtype]).ravel(order="F")
    stem.with_suffix(".raw").write_bytes(payload.tobytes())


def read_volume(stem):
    stem = Path(stem)
    hdr = read_keyvalue(stem.with_suffix(".hdr"))
    try:
        dims = tuple(int(v) for v in hdr["dims"].split())
        spacing = tuple(float(v) for v in hdr["spacing"].split())
        origin = tuple(float(v) for v in hdr.get("origin", "0 0 0").split())
        dtype = DTYPES[hdr["dtype"]]
        components = int(hdr.get("components", "1"))
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{stem}.hdr: bad or missing header field ({exc})") from exc
    try:
        raw = np.frombuffer(stem.with_suffix(".raw").read_bytes(), dtype=dtype)
    except OSError as exc:
        raise FormatError(f"cannot read {stem}.raw: {exc.strerror or exc}") from exc
    expected = int(np.prod(dims)) * components
    if raw.size != expected:
        raise FormatError(f"{stem}.raw holds {raw.size} values, header implies {expected}")
    if components == 1:
        return Volume3D(raw.reshape(dims, order="F"), spacing, origin)
    if components == 3:
        return DeformationField(np.moveaxis(raw.reshape((3,) + dims, order="F"), 0, -1), spacing, origin)
    raise FormatError(f"{stem}.hdr: unsupported component count {components}")


def volume_exists(stem) -> bool:
    stem = Path(stem)
    return stem.with_suffix(".hdr").exists() and stem.with_suffix(".raw").exists()


def ensure_dir(path) -> Path:
    path = Path(path)
    os.makedirs(path, exist_ok=True)
    return path


# case directories

CASE_FILES = {
    "baseline": "baseline.lesions",
    "followup": "followup.lesions",
    "reference": "reference.graph",
    "info": "case.info",
}
VOLUME_STEMS = ("mask0", "mask1", "ct0", "ct1_warped", "deformation")


@dataclasses.dataclass(frozen=True, eq=False)
class CaseBundle:
    case_id: str
    set0: LesionSet
    set1: LesionSet
    reference: Optional[EvolutionGraph] = None
    mask0: Optional[Volume3D] = None
    mask1: Optional[Volume3D] = None
    ct0: Optional[Volume3D] = None
    ct1_warped: Optional[Volume3D] = None
    deformation: Optional[DeformationField] = None


def write_case(path, bundle: CaseBundle):
    path = ensure_dir(path)
    write_keyvalue(path / CASE_FILES["info"], [("case_id", bundle.case_id)])
    write_lesions(path / CASE_FILES["baseline"], bundle.set0)
    write_lesions(path / CASE_FILES["followup"], bundle.set1)
    if bundle.reference is not None:
        write_graph(path / CASE_FILES["reference"], bundle.reference, bundle.set0, bundle.set1)
    for stem in VOLUME_STEMS:
        vol = getattr(bundle, stem)
        if vol is not None:
            write_volume(path / stem, vol)


def read_case(path, cfg: Optional[MatchConfig] = None) -> CaseBundle:
    """Load a case directory.

    Lesion tables may be omitted when both masks are present; they are then
    extracted from the volumes. When both are present the lesion counts
    must agree.
    """
    from .volume import extract_lesions

    path = Path(path)
    if not path.is_dir():
        raise FormatError(f"case directory not found: {path}")
    info = path / CASE_FILES["info"]
    case_id = read_keyvalue(info).get("case_id", path.name) if info.exists() else path.name
    vols = {stem: read_volume(path / stem) if volume_exists(path / stem) else None for stem in VOLUME_STEMS}
    if vols["deformation"] is not None and not isinstance(vols["deformation"], DeformationField):
        raise FormatError(f"{path}/deformation must have 3 components")
    for stem in ("mask0", "mask1", "ct0", "ct1_warped"):
        if vols[stem] is not None and not isinstance(vols[stem], Volume3D):
            raise FormatError(f"{path}/{stem} must be a scalar volume")

    tables = [path / CASE_FILES["baseline"], path / CASE_FILES["followup"]]
    have_masks = vols["mask0"] is not None and vols["mask1"] is not None
    if all(t.exists() for t in tables):
        set0, set1 = read_lesions(tables[0]), read_lesions(tables[1])
        if set0.timepoint != BASELINE or set1.timepoint != FOLLOWUP:
            raise FormatError(f"{path}: lesion tables have swapped timepoints")
        if have_masks:
            from .volume import label_components

            counts = (label_components(vols["mask0"])[1], label_components(vols["mask1"])[1])
            if counts != (len(set0), len(set1)):
                raise FormatError(
                    f"{path}: lesion tables list {len(set0)}/{len(set1)} lesions, masks hold {counts[0]}/{counts[1]}"
                )
    elif have_masks:
        set0, set1 = extract_lesions(
            vols["mask0"], vols["mask1"], cfg, vols["ct0"], vols["ct1_warped"], vols["deformation"]
        )
    else:
        missing = next(t for t in tables if not t.exists())
        raise FormatError(f"{path}: missing {missing.name} and no masks to derive it from")

    ref_path = path / CASE_FILES["reference"]
    reference = read_graph(ref_path) if ref_path.exists() else None
    if reference is not None and (reference.n0, reference.n1) != (len(set0), len(set1)):
        raise FormatError(f"{ref_path}: graph covers {reference.n0}/{reference.n1} lesions, tables {len(set0)}/{len(set1)}")
    return CaseBundle(case_id, set0, set1, reference, **vols)


def case_dirs(suite) -> list:
    """Case subdirectories of a suite, sorted by name."""
    suite = Path(suite)
    if not suite.is_dir():
        raise FormatError(f"suite directory not found: {suite}")
    found = sorted(p for p in suite.iterdir() if p.is_dir())
    if not found:
        raise FormatError(f"suite directory {suite} contains no cases")
    return found


# evaluation reports


def write_report(path, report):
    from .graph import STATES

    items = list(report.scalars().items())
    items += [(f"confusion.{s}", [int(v) for v in row]) for s, row in zip(STATES, report.state_confusion)]
    write_keyvalue(path, items)


def read_report(path):
    from .graph import STATES
    from .metrics import EvalReport

    kv = read_keyvalue(path)
    try:
        confusion = np.array([[int(v) for v in kv[f"confusion.{s}"].split()] for s in STATES], dtype=int)
        scalars = {k: float(kv[k]) for k in EvalReport.__dataclass_fields__ if k != "state_confusion"}
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: incomplete report ({exc})") from exc
    return EvalReport(state_confusion=confusion, **scalars)
