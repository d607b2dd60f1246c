"""
Run configuration: a YAML tree mapped onto dataclasses.

Unknown keys, wrong types and non-positive tolerances are rejected with
the dotted field path and, when loaded from a file, the line number.
"""

import logging
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Union, get_args, get_origin, get_type_hints

import yaml

from triplewave.errors import ConfigError

logger = logging.getLogger(__name__)

LineMap = Dict[str, int]

PIPELINES = ("rays", "flowout", "experiment", "norms")


@dataclass
class ScenarioSpec:
    id: str = "fig1-2d"
    params: Dict[str, Any] = field(default_factory=dict)


@dataclass
class GridSpec:
    lower: List[float] = field(default_factory=lambda: [-6.0, -6.0])
    upper: List[float] = field(default_factory=lambda: [6.0, 6.0])
    points: List[int] = field(default_factory=lambda: [769, 769])
    t_start: float = -1.5
    t_end: float = 1.0
    cfl: float = 0.4
    bc: str = "dirichlet"
    sponge_width: int = 20


@dataclass
class ProfileSpec:
    kind: str = "xplus"
    order: float = 4.0
    # None means four grid cells
    smoothing_eps: Optional[float] = None
    amplitude: float = 1.0
    width: float = 0.5


@dataclass
class NonlinearitySpec:
    coeffs: Dict[str, float] = field(default_factory=lambda: {"3": 1.0})
    cutoff_radius: float = 0.8
    # None means the scenario's interaction point
    cutoff_center: Optional[List[float]] = None
    t_on: float = -1.0
    t_full: float = -0.5
    # chi vanishes within this radius of the cutoff centre when > 0
    chi_hole_radius: float = 0.0
    forcing: bool = False


@dataclass
class GeometrySpec:
    gamma_count: int = 5
    gamma_sampling: str = "uniform"
    angular_res: int = 16
    nappe: str = "future"
    direction: int = 1
    s_max: float = 2.0
    s_samples: int = 101
    method: str = "DOP853"
    threads: int = 1
    speed_x3: Optional[float] = None
    speed_times: List[float] = field(default_factory=list)


@dataclass
class DetectorSpec:
    band: Optional[List[float]] = None
    kappa: float = 6.0
    rel_peak: float = 0.05
    r_min: float = 10.0
    mask_cells: float = 3.0
    tube_cells: float = 3.0
    coverage_min: float = 0.6
    transect_length: int = 512
    gap_tolerance: float = 0.75


@dataclass
class NormSpec:
    delta: float = 0.05
    m: float = -6.0
    r_values: List[float] = field(default_factory=lambda: [4.5, 5.0, 5.5, 6.0, 6.5])
    base_points: int = 1024
    refinements: int = 3
    kernel_cases: List[Dict[str, Any]] = field(default_factory=lambda: [
        {"n": 4, "k": [1.0, 1.0, 1.0], "s": 0.0},
        {"n": 4, "k": [0.5, 0.5, 0.5], "s": 0.0},
        {"n": 4, "k": [0.0, 0.0, 0.0], "s": 3.0},
    ])
    field_points: int = 64


@dataclass
class Tolerances:
    eikonal: float = 1e-10
    null: float = 1e-8
    caustic: float = 1e-6
    closed_form: float = 1e-8
    rtol: float = 1e-10
    atol: float = 1e-12


@dataclass
class RunConfig:
    """Resolved configuration of a triplewave run."""

    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    profiles: List[ProfileSpec] = field(default_factory=lambda: [ProfileSpec(), ProfileSpec(), ProfileSpec()])
    nonlinearity: NonlinearitySpec = field(default_factory=NonlinearitySpec)
    geometry: GeometrySpec = field(default_factory=GeometrySpec)
    detector: DetectorSpec = field(default_factory=DetectorSpec)
    norms: NormSpec = field(default_factory=NormSpec)
    tolerances: Tolerances = field(default_factory=Tolerances)
    pipelines: List[str] = field(default_factory=lambda: list(PIPELINES))
    output_dir: str = "out"
    seed: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]], lines: Optional[LineMap] = None) -> "RunConfig":
        config = _build(cls, data or {}, "", lines or {})
        config.validate(lines or {})
        return config

    def validate(self, lines: Optional[LineMap] = None) -> None:
        lines = lines or {}
        for f in fields(Tolerances):
            if getattr(self.tolerances, f.name) <= 0:
                path = f"tolerances.{f.name}"
                raise ConfigError("tolerances must be positive", field=path, line=lines.get(path))
        unknown = [p for p in self.pipelines if p not in PIPELINES]
        if unknown:
            raise ConfigError(f"unknown pipeline(s) {unknown}", field="pipelines", line=lines.get("pipelines"))
        g = self.grid
        if not (len(g.lower) == len(g.upper) == len(g.points)):
            raise ConfigError("grid lower, upper and points need the same length", field="grid",
                              line=lines.get("grid"))
        if g.cfl <= 0 or g.t_end <= g.t_start:
            raise ConfigError("grid needs cfl > 0 and t_end > t_start", field="grid", line=lines.get("grid"))
        if len(self.profiles) != 3:
            raise ConfigError("exactly three profiles are required", field="profiles", line=lines.get("profiles"))
        if self.geometry.gamma_count < 0 or self.geometry.s_max < 0:
            raise ConfigError("gamma_count and s_max must be non-negative", field="geometry",
                              line=lines.get("geometry"))
        if self.geometry.gamma_sampling not in ("uniform", "random"):
            raise ConfigError("gamma_sampling must be 'uniform' or 'random'", field="geometry.gamma_sampling",
                              line=lines.get("geometry.gamma_sampling"))


_SCALARS = {bool: "a boolean", float: "a number", int: "an integer", str: "a string"}


def _check_type(value: Any, hint: Any, path: str, lines: LineMap) -> Any:
    """Check a value against a field annotation; ints are accepted for floats."""
    line = lines.get(path)
    origin, args = get_origin(hint), get_args(hint)
    if origin is Union:
        options = [a for a in args if a is not type(None)]
        if value is None:
            if len(options) < len(args):
                return None
            raise ConfigError("a value is required", field=path, line=line)
        return _check_type(value, options[0], path, lines)
    if hint is Any:
        return value
    if value is None:
        raise ConfigError("a value is required", field=path, line=line)
    if origin in (list, List):
        if not isinstance(value, list):
            raise ConfigError(f"expected a list, got {value!r}", field=path, line=line)
        item = args[0] if args else Any
        return [_check_type(v, item, f"{path}.{i}", lines) for i, v in enumerate(value)]
    if origin in (dict, Dict):
        if not isinstance(value, dict):
            raise ConfigError(f"expected a mapping, got {value!r}", field=path, line=line)
        item = args[1] if len(args) == 2 else Any
        return {k: _check_type(v, item, f"{path}.{k}", lines) for k, v in value.items()}
    if hint in _SCALARS:
        ok = isinstance(value, hint) and (hint is bool or not isinstance(value, bool))
        if hint is float and isinstance(value, int) and not isinstance(value, bool):
            ok = True
        if not ok:
            raise ConfigError(f"expected {_SCALARS[hint]}, got {value!r}", field=path, line=line)
        return float(value) if hint is float else value
    return value


def _build(cls, data: Any, prefix: str, lines: LineMap):
    if not isinstance(data, dict):
        raise ConfigError("expected a mapping", field=prefix or "<root>", line=lines.get(prefix))
    hints = get_type_hints(cls)
    names = {f.name for f in fields(cls)}
    for key in data:
        if key not in names:
            path = f"{prefix}.{key}" if prefix else str(key)
            raise ConfigError(f"unknown key '{key}'", field=path, line=lines.get(path))
    kwargs = {}
    for f in fields(cls):
        if f.name not in data:
            continue
        path = f"{prefix}.{f.name}" if prefix else f.name
        value = data[f.name]
        hint = hints[f.name]
        if is_dataclass(hint):
            kwargs[f.name] = _build(hint, value, path, lines)
        elif f.name == "profiles" and cls is RunConfig:
            if not isinstance(value, list):
                raise ConfigError("expected a list of profiles", field=path, line=lines.get(path))
            kwargs[f.name] = [_build(ProfileSpec, v, f"{path}.{i}", lines) for i, v in enumerate(value)]
        else:
            kwargs[f.name] = _check_type(value, hint, path, lines)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e), field=prefix or "<root>", line=lines.get(prefix)) from e


def _line_map(node, prefix: str = "", out: Optional[LineMap] = None) -> LineMap:
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            path = f"{prefix}.{key_node.value}" if prefix else str(key_node.value)
            out[path] = key_node.start_mark.line + 1
            _line_map(value_node, path, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            path = f"{prefix}.{i}"
            out[path] = item.start_mark.line + 1
            _line_map(item, path, out)
    return out


def load_config(path: Union[str, Path, None]) -> RunConfig:
    """
    Load and validate a YAML run configuration; None gives the defaults.

    Raises:
        ConfigError: unreadable file, YAML syntax error or schema violation
    """
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    try:
        data = yaml.safe_load(text)
        node = yaml.compose(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(e, 'problem', e)}",
                          line=mark.line + 1 if mark is not None else None) from e
    lines = _line_map(node) if node is not None else {}
    config = RunConfig.from_dict(data, lines)
    logger.debug(f"Loaded config from {path}")
    return config


def dump_config(config: RunConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config.to_dict(), fh, default_flow_style=False, sort_keys=True)
    return path
