"""Scenario files: a line-oriented, sectioned text format.

Grammar (``#`` starts a comment, blank lines ignored)::

    [camera]                       # repeatable, one block per camera
    id = 1                         # 1-based, unique, contiguous 1..n
    position = 0 0 0               # camera in world [m]
    rotation = 0 0 0               # axis*angle [rad]
    focal_length = 0.03            # [m]
    visible = true                 # member of the viewing set
    min_depth = 1e-06              # optional, [m]
    initial_position = 0 0 1       # optional estimate in camera frame [m]
    initial_rotation = 0 0 0       # optional, axis*angle [rad]
    visible_schedule = 0 5 10 20   # optional start/stop pairs [s]

    [target]                       # one per camera that can see the target
    camera = 1
    position = 0.55 1.00 -1.91     # fictitious target in world [m]
    rotation = 0.30 0.19 0.21
    velocity = 0 0 0 0 0 0         # optional body twist (v [m/s], w [rad/s])

    [features]
    point = 0.1 0 0                # object frame [m], at least 4

    [graph]
    edge = 1 2

    [gains]
    k_e = 1
    k_s = 50

    [integration]
    dt = 0.001
    t_final = 20
    record_every = 10
    scheme = euler                 # euler | midpoint
    error_mode = visual            # visual | geometric

    [analysis]
    zeta_margin = 0.1
    epsilon = 0.1
    tail_fraction = 0.2
"""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .camera import CameraIntrinsics, FeatureModel
from .errors import DisconnectedGraphError, ScenarioParseError, ScenarioValidationError
from .graph import CommGraph, is_connected
from .observer import ERROR_MODES, SCHEMES, CameraNode, Gains, Network, ObserverState, TargetView
from .se3 import Pose, Twist, exp_so3

Vec3 = tuple[float, float, float]

DEFAULT_INITIAL_POSITION: Vec3 = (0.0, 0.0, 1.0)


@dataclass(frozen=True)
class CameraSpec:
    id: int
    position: Vec3
    rotation: Vec3
    focal_length: float
    visible: bool
    min_depth: float = 1e-6
    initial_position: Vec3 = DEFAULT_INITIAL_POSITION
    initial_rotation: Vec3 = (0.0, 0.0, 0.0)
    visible_schedule: tuple[float, ...] = ()


@dataclass(frozen=True)
class TargetSpec:
    camera: int
    position: Vec3
    rotation: Vec3
    velocity: tuple[float, ...] = (0.0,) * 6


@dataclass(frozen=True)
class IntegrationSpec:
    dt: float = 1e-3
    t_final: float = 20.0
    record_every: int = 10
    scheme: str = "euler"
    error_mode: str = "visual"


@dataclass(frozen=True)
class AnalysisSpec:
    zeta_margin: float = 0.1
    epsilon: float = 0.1
    tail_fraction: float = 0.2


@dataclass(frozen=True)
class Scenario:
    cameras: tuple[CameraSpec, ...]
    targets: tuple[TargetSpec, ...]
    features: tuple[Vec3, ...]
    edges: tuple[tuple[int, int], ...]  # 1-based
    k_e: float = 1.0
    k_s: float = 1.0
    integration: IntegrationSpec = field(default_factory=IntegrationSpec)
    analysis: AnalysisSpec = field(default_factory=AnalysisSpec)

    @property
    def n(self) -> int:
        return len(self.cameras)

    @property
    def gains(self) -> Gains:
        return Gains(self.k_e, self.k_s)

    def with_overrides(self, **kw) -> Scenario:
        """Replace gains or integration settings (``k_e``, ``k_s``, ``dt``, ``t_final``, ...)."""
        top = {k: kw.pop(k) for k in ("k_e", "k_s") if k in kw and kw[k] is not None}
        integ = {k: v for k, v in kw.items()
                 if v is not None and k in IntegrationSpec.__dataclass_fields__}
        ana = {k: v for k, v in kw.items()
               if v is not None and k in AnalysisSpec.__dataclass_fields__}
        s = dataclasses.replace(self, **top)
        if integ:
            s = dataclasses.replace(s, integration=dataclasses.replace(s.integration, **integ))
        if ana:
            s = dataclasses.replace(s, analysis=dataclasses.replace(s.analysis, **ana))
        return s

    def build_network(self) -> Network:
        tgt = {t.camera: t for t in self.targets}
        nodes = []
        targets = {}
        for k, c in enumerate(self.cameras):
            sched = tuple(zip(c.visible_schedule[0::2], c.visible_schedule[1::2]))
            nodes.append(CameraNode(
                id=c.id,
                g_wi=Pose(exp_so3(c.rotation), c.position),
                intrinsics=CameraIntrinsics(c.focal_length, c.min_depth),
                visible=c.visible,
                schedule=sched,
            ))
            if c.id in tgt:
                t = tgt[c.id]
                targets[k] = TargetView(Pose(exp_so3(t.rotation), t.position),
                                        Twist.from_vector(t.velocity))
        graph = CommGraph(self.n, [(a - 1, b - 1) for a, b in self.edges])
        return Network(tuple(nodes), graph, FeatureModel(np.array(self.features)), targets)

    def initial_state(self) -> ObserverState:
        return ObserverState.from_poses(
            [Pose(exp_so3(c.initial_rotation), c.initial_position) for c in self.cameras]
        )


# parsing

_SECTIONS = ("camera", "target", "features", "graph", "gains", "integration", "analysis")


def _num(tok: str, line: int, col: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ScenarioParseError(f"expected a number, got {tok!r}", line, col) from None
    if not math.isfinite(v):
        raise ScenarioParseError(f"non-finite number {tok!r}", line, col)
    return v


def _int(tok: str, line: int, col: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ScenarioParseError(f"expected an integer, got {tok!r}", line, col) from None


def _bool(tok: str, line: int, col: int) -> bool:
    low = tok.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ScenarioParseError(f"expected true/false, got {tok!r}", line, col)


def _vec(val: str, size: int | None, line: int, col: int) -> tuple[float, ...]:
    toks = list(re.finditer(r"\S+", val))
    if size is not None and len(toks) != size:
        raise ScenarioParseError(f"expected {size} numbers, got {len(toks)}", line, col)
    return tuple(_num(m.group(), line, col + m.start()) for m in toks)


_CAMERA_KEYS = {"id", "position", "rotation", "focal_length", "visible", "min_depth",
                "initial_position", "initial_rotation", "visible_schedule"}
_TARGET_KEYS = {"camera", "position", "rotation", "velocity"}


def parse_scenario(text: str) -> Scenario:
    blocks: list[tuple[str, int, list[tuple[str, str, int, int]]]] = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        stripped = line.strip()
        if not stripped:
            continue
        col0 = len(line) - len(line.lstrip()) + 1
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ScenarioParseError("unterminated section header", ln, col0)
            name = stripped[1:-1].strip()
            if name not in _SECTIONS:
                raise ScenarioParseError(f"unknown section [{name}]", ln, col0)
            blocks.append((name, ln, []))
            continue
        if "=" not in stripped:
            raise ScenarioParseError("expected 'key = value'", ln, col0)
        if not blocks:
            raise ScenarioParseError("key outside any section", ln, col0)
        key, _, val = line.partition("=")
        vcol = len(key) + 2 + (len(val) - len(val.lstrip()))
        key = key.strip()
        if not key:
            raise ScenarioParseError("empty key", ln, col0)
        blocks[-1][2].append((key, val.strip(), ln, vcol))
    if not blocks:
        raise ScenarioParseError("empty scenario: no sections found", 1, 1)

    cameras: list[tuple[CameraSpec, int]] = []
    targets: list[tuple[TargetSpec, int]] = []
    features: list[Vec3] = []
    edges: list[tuple[int, int]] = []
    gains: dict = {}
    integ: dict = {}
    ana: dict = {}
    seen_single: set[str] = set()

    for name, hdr_line, items in blocks:
        if name in ("gains", "integration", "analysis", "features", "graph"):
            if name in seen_single:
                raise ScenarioParseError(f"duplicate section [{name}]", hdr_line, 1)
            seen_single.add(name)
        keys_seen: dict[str, int] = {}
        for key, _, ln, col in items:
            if key in keys_seen and key not in ("point", "edge"):
                raise ScenarioParseError(f"duplicate key {key!r}", ln, col)
            keys_seen[key] = ln
        if name == "camera":
            d: dict = {}
            for key, val, ln, col in items:
                if key not in _CAMERA_KEYS:
                    raise ScenarioParseError(f"unknown camera key {key!r}", ln, 1)
                if key == "id":
                    d[key] = _int(val, ln, col)
                elif key in ("focal_length", "min_depth"):
                    d[key] = _num(val, ln, col)
                elif key == "visible":
                    d[key] = _bool(val, ln, col)
                elif key == "visible_schedule":
                    d[key] = _vec(val, None, ln, col)
                else:
                    d[key] = _vec(val, 3, ln, col)
            for req in ("id", "position", "rotation", "focal_length"):
                if req not in d:
                    raise ScenarioParseError(f"camera block missing {req!r}", hdr_line, 1)
            d.setdefault("visible", False)
            cameras.append((CameraSpec(**d), hdr_line))
        elif name == "target":
            d = {}
            for key, val, ln, col in items:
                if key not in _TARGET_KEYS:
                    raise ScenarioParseError(f"unknown target key {key!r}", ln, 1)
                if key == "camera":
                    d[key] = _int(val, ln, col)
                elif key == "velocity":
                    d[key] = _vec(val, 6, ln, col)
                else:
                    d[key] = _vec(val, 3, ln, col)
            for req in ("camera", "position", "rotation"):
                if req not in d:
                    raise ScenarioParseError(f"target block missing {req!r}", hdr_line, 1)
            targets.append((TargetSpec(**d), hdr_line))
        elif name == "features":
            for key, val, ln, col in items:
                if key != "point":
                    raise ScenarioParseError(f"unknown features key {key!r}", ln, 1)
                features.append(_vec(val, 3, ln, col))
        elif name == "graph":
            for key, val, ln, col in items:
                if key != "edge":
                    raise ScenarioParseError(f"unknown graph key {key!r}", ln, 1)
                toks = val.split()
                if len(toks) != 2:
                    raise ScenarioParseError("edge needs two node ids", ln, col)
                edges.append((_int(toks[0], ln, col), _int(toks[1], ln, col)))
        elif name == "gains":
            for key, val, ln, col in items:
                if key not in ("k_e", "k_s"):
                    raise ScenarioParseError(f"unknown gains key {key!r}", ln, 1)
                gains[key] = _num(val, ln, col)
        elif name == "integration":
            for key, val, ln, col in items:
                if key in ("dt", "t_final"):
                    integ[key] = _num(val, ln, col)
                elif key == "record_every":
                    integ[key] = _int(val, ln, col)
                elif key in ("scheme", "error_mode"):
                    integ[key] = val
                else:
                    raise ScenarioParseError(f"unknown integration key {key!r}", ln, 1)
        elif name == "analysis":
            for key, val, ln, col in items:
                if key not in AnalysisSpec.__dataclass_fields__:
                    raise ScenarioParseError(f"unknown analysis key {key!r}", ln, 1)
                ana[key] = _num(val, ln, col)

    scn = Scenario(
        cameras=tuple(c for c, _ in cameras),
        targets=tuple(t for t, _ in targets),
        features=tuple(features),
        edges=tuple(edges),
        integration=IntegrationSpec(**integ),
        analysis=AnalysisSpec(**ana),
        **gains,
    )
    validate(scn, cam_lines=[ln for _, ln in cameras], tgt_lines=[ln for _, ln in targets])
    return scn


def validate(s: Scenario, cam_lines=None, tgt_lines=None) -> None:
    """Check every scenario invariant; raise on the first violation."""
    cl = cam_lines or [None] * s.n
    tl = tgt_lines or [None] * len(s.targets)
    if s.n == 0:
        raise ScenarioValidationError("cameras", "at least one camera is required")
    ids = [c.id for c in s.cameras]
    if sorted(ids) != list(range(1, s.n + 1)):
        raise ScenarioValidationError("camera_ids", f"ids must be 1..{s.n} without gaps, got {ids}")
    if ids != sorted(ids):
        raise ScenarioValidationError("camera_ids", "camera blocks must appear in id order")
    for c, ln in zip(s.cameras, cl):
        if not c.focal_length > 0:
            raise ScenarioValidationError("focal_length", f"camera {c.id}: must be > 0", ln)
        if not c.min_depth > 0:
            raise ScenarioValidationError("min_depth", f"camera {c.id}: must be > 0", ln)
        sch = c.visible_schedule
        if len(sch) % 2 or any(b < a for a, b in zip(sch[0::2], sch[1::2])):
            raise ScenarioValidationError(
                "visible_schedule", f"camera {c.id}: needs ordered start/stop pairs", ln)
    tcams = [t.camera for t in s.targets]
    if len(set(tcams)) != len(tcams):
        raise ScenarioValidationError("targets", "more than one target for a camera")
    for t, ln in zip(s.targets, tl):
        if not 1 <= t.camera <= s.n:
            raise ScenarioValidationError("targets", f"target for unknown camera {t.camera}", ln)
    for c, ln in zip(s.cameras, cl):
        can_see = c.visible or bool(c.visible_schedule)
        if can_see and c.id not in tcams:
            raise ScenarioValidationError("targets", f"visible camera {c.id} has no target", ln)
        if not can_see and c.id in tcams:
            raise ScenarioValidationError("targets", f"non-visible camera {c.id} has a target", ln)
    if len(s.features) < 4:
        raise ScenarioValidationError("features", f"need at least 4 feature points, got {len(s.features)}")
    for a, b in s.edges:
        if a == b or not (1 <= a <= s.n and 1 <= b <= s.n):
            raise ScenarioValidationError("graph", f"invalid edge ({a}, {b})")
    graph = CommGraph(s.n, [(a - 1, b - 1) for a, b in s.edges])
    if not is_connected(graph):
        raise DisconnectedGraphError("communication graph is not connected")
    if not s.k_e > 0 or not s.k_s >= 0:
        raise ScenarioValidationError("gains", "need k_e > 0 and k_s >= 0")
    it = s.integration
    if not it.dt > 0 or it.t_final < 0 or it.record_every < 1:
        raise ScenarioValidationError("integration", "need dt > 0, t_final >= 0, record_every >= 1")
    if it.scheme not in SCHEMES:
        raise ScenarioValidationError("integration", f"scheme must be one of {SCHEMES}")
    if it.error_mode not in ERROR_MODES:
        raise ScenarioValidationError("integration", f"error_mode must be one of {ERROR_MODES}")
    an = s.analysis
    if not an.zeta_margin > 0 or not 0 < an.tail_fraction <= 1 or an.epsilon < 0:
        raise ScenarioValidationError(
            "analysis", "need zeta_margin > 0, 0 < tail_fraction <= 1, epsilon >= 0")


def load_scenario(source: Union[str, Path]) -> Scenario:
    """Load from a path, or parse ``source`` as scenario text."""
    if isinstance(source, Path):
        return parse_scenario(source.read_text())
    if source and "\n" not in source and Path(source).is_file():
        return parse_scenario(Path(source).read_text())
    return parse_scenario(source)


def _f(x: float) -> str:
    return repr(float(x))


def _v(xs) -> str:
    return " ".join(_f(x) for x in xs)


def serialize(s: Scenario) -> str:
    """Text form; ``parse_scenario(serialize(s)) == s`` for valid scenarios."""
    out: list[str] = []
    for c in s.cameras:
        out += ["[camera]", f"id = {c.id}", f"position = {_v(c.position)}",
                f"rotation = {_v(c.rotation)}", f"focal_length = {_f(c.focal_length)}",
                f"visible = {'true' if c.visible else 'false'}", f"min_depth = {_f(c.min_depth)}",
                f"initial_position = {_v(c.initial_position)}",
                f"initial_rotation = {_v(c.initial_rotation)}"]
        if c.visible_schedule:
            out.append(f"visible_schedule = {_v(c.visible_schedule)}")
        out.append("")
    for t in s.targets:
        out += ["[target]", f"camera = {t.camera}", f"position = {_v(t.position)}",
                f"rotation = {_v(t.rotation)}", f"velocity = {_v(t.velocity)}", ""]
    out.append("[features]")
    out += [f"point = {_v(p)}" for p in s.features]
    out += ["", "[graph]"]
    out += [f"edge = {a} {b}" for a, b in s.edges]
    it, an = s.integration, s.analysis
    out += ["", "[gains]", f"k_e = {_f(s.k_e)}", f"k_s = {_f(s.k_s)}", "",
            "[integration]", f"dt = {_f(it.dt)}", f"t_final = {_f(it.t_final)}",
            f"record_every = {it.record_every}", f"scheme = {it.scheme}",
            f"error_mode = {it.error_mode}", "",
            "[analysis]", f"zeta_margin = {_f(an.zeta_margin)}", f"epsilon = {_f(an.epsilon)}",
            f"tail_fraction = {_f(an.tail_fraction)}", ""]
    return "\n".join(out)


def bundled(name: str) -> Path:
    """Path of a scenario shipped with the package, e.g. ``bundled('five_camera.scn')``."""
    return Path(__file__).parent / "data" / name
