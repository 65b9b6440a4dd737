"""Scenario files (TOML) and solution records (JSON)."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .geometry import (Direction, GeometryError, Scenario, Terminal, WeightedUser,
                       build_grid_layout, wavelength_from_frequency)
from .maxmin import Solution, SolverOptions

BUNDLED_DIR = Path(__file__).parent / "scenarios"


class ConfigParseError(ValueError):
    pass


class ConfigValidationError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


SECTIONS = {
    "physics": {"frequency_hz", "wavelength_m", "tx_power"},
    "ris": {"rows", "cols", "spacing_m", "path_loss_mode"},
    "bs": {"theta_deg", "phi_deg", "distance_m"},
    "users": {"theta_deg", "phi_deg", "distance_m", "weight", "target_ratio"},
    "solver": {"tau", "rel_tau", "lambda0", "inner_max_iters", "inner_grad_tol",
               "outer_max_iters", "restarts", "seed"},
    "quantize": {"bits"},
}
SOLVER_INTS = {"inner_max_iters", "outer_max_iters", "restarts", "seed"}


@dataclass
class ScenarioConfig:
    """A loaded scenario file: physical scenario plus solver/quantizer settings."""

    scenario: Scenario
    weight_mode: str = "weight"
    user_values: list[float] = field(default_factory=list)
    frequency_hz: float | None = None
    spacing: float | str = "half_wavelength"
    solver: SolverOptions = field(default_factory=SolverOptions)
    quantize_bits: int | None = None

    def to_dict(self) -> dict:
        s = self.scenario
        physics = ({"frequency_hz": self.frequency_hz} if self.frequency_hz is not None
                   else {"wavelength_m": s.wavelength_m})
        physics["tx_power"] = s.tx_power
        users = []
        for u, v in zip(s.users, self.user_values):
            d = u.terminal.direction
            users.append({"theta_deg": d.theta_deg, "phi_deg": d.phi_deg,
                          "distance_m": u.terminal.distance_m, self.weight_mode: v})
        solver = {}
        for key in sorted(SECTIONS["solver"]):
            val = getattr(self.solver, key)
            if val is not None:
                solver[key] = val
        out = {
            "physics": physics,
            "ris": {"rows": s.ris.rows, "cols": s.ris.cols, "spacing_m": self.spacing,
                    "path_loss_mode": s.path_loss_mode},
            "bs": {"theta_deg": s.bs.direction.theta_deg, "phi_deg": s.bs.direction.phi_deg,
                   "distance_m": s.bs.distance_m},
            "users": users,
            "solver": solver,
        }
        if self.quantize_bits is not None:
            out["quantize"] = {"bits": self.quantize_bits}
        return out

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_dict())


def _num(section: dict, key: str, where: str, required=True, integer=False):
    if key not in section:
        if required:
            raise ConfigValidationError(f"{where}.{key}", "missing")
        return None
    v = section[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigValidationError(f"{where}.{key}", f"expected a number, got {v!r}")
    if integer and (not isinstance(v, int) and not float(v).is_integer()):
        raise ConfigValidationError(f"{where}.{key}", f"expected an integer, got {v!r}")
    return int(v) if integer else float(v)


def _terminal(sec: dict, where: str) -> Terminal:
    try:
        return Terminal(Direction(_num(sec, "theta_deg", where), _num(sec, "phi_deg", where)),
                        _num(sec, "distance_m", where))
    except GeometryError as exc:
        raise ConfigValidationError(where, str(exc)) from exc


def config_from_dict(doc: dict) -> ScenarioConfig:
    for name, sec in doc.items():
        if name not in SECTIONS:
            raise ConfigValidationError(name, "unknown section")
        entries = sec if isinstance(sec, list) else [sec]
        for entry in entries:
            if not isinstance(entry, dict):
                raise ConfigValidationError(name, "expected a table")
            extra = set(entry) - SECTIONS[name]
            if extra:
                raise ConfigValidationError(f"{name}.{sorted(extra)[0]}", "unknown key")
    for name in ("physics", "ris", "bs", "users"):
        if name not in doc:
            raise ConfigValidationError(name, "missing section")

    phys = doc["physics"]
    has_f, has_wl = "frequency_hz" in phys, "wavelength_m" in phys
    if has_f == has_wl:
        raise ConfigValidationError("physics", "give exactly one of frequency_hz or wavelength_m")
    frequency = _num(phys, "frequency_hz", "physics", required=False)
    if frequency is not None:
        if not frequency > 0:
            raise ConfigValidationError("physics.frequency_hz", "must be positive")
        wavelength = wavelength_from_frequency(frequency)
    else:
        wavelength = _num(phys, "wavelength_m", "physics")
        if not wavelength > 0:
            raise ConfigValidationError("physics.wavelength_m", "must be positive")
    tx_power = _num(phys, "tx_power", "physics", required=False)
    tx_power = 1.0 if tx_power is None else tx_power
    if not tx_power > 0:
        raise ConfigValidationError("physics.tx_power", "must be positive")

    ris = doc["ris"]
    rows = _num(ris, "rows", "ris", integer=True)
    cols = _num(ris, "cols", "ris", integer=True)
    spacing = ris.get("spacing_m", "half_wavelength")
    if spacing == "half_wavelength":
        spacing_m = wavelength / 2
    else:
        spacing = _num(ris, "spacing_m", "ris")
        spacing_m = spacing
    mode = ris.get("path_loss_mode", "as_written")
    if mode not in ("as_written", "standard"):
        raise ConfigValidationError("ris.path_loss_mode", f"unknown mode {mode!r}")
    try:
        layout = build_grid_layout(rows, cols, spacing_m)
    except GeometryError as exc:
        raise ConfigValidationError("ris", str(exc)) from exc

    bs = _terminal(doc["bs"], "bs")

    users_doc = doc["users"]
    if not isinstance(users_doc, list) or not users_doc:
        raise ConfigValidationError("users", "need at least one [[users]] entry")
    modes = set()
    for k, u in enumerate(users_doc):
        present = {"weight", "target_ratio"} & set(u)
        if len(present) != 1:
            raise ConfigValidationError(f"users[{k}]", "give exactly one of weight or target_ratio")
        modes |= present
    if len(modes) != 1:
        raise ConfigValidationError("users", "mix of weight and target_ratio across users")
    weight_mode = modes.pop()
    users, values = [], []
    for k, u in enumerate(users_doc):
        where = f"users[{k}]"
        v = _num(u, weight_mode, where)
        if not v > 0:
            raise ConfigValidationError(f"{where}.{weight_mode}", "must be positive")
        alpha = v if weight_mode == "weight" else 1.0 / v
        users.append(WeightedUser(_terminal(u, where), alpha))
        values.append(v)

    sol = doc.get("solver", {})
    kwargs = {}
    for key in SECTIONS["solver"]:
        if key in sol:
            kwargs[key] = _num(sol, key, "solver", integer=key in SOLVER_INTS)
    try:
        solver = SolverOptions(**kwargs)
    except ValueError as exc:
        raise ConfigValidationError("solver", str(exc)) from exc

    bits = None
    if "quantize" in doc:
        bits = _num(doc["quantize"], "bits", "quantize", integer=True)
        if not 1 <= bits <= 8:
            raise ConfigValidationError("quantize.bits", "must lie in [1, 8]")

    scenario = Scenario(wavelength, bs, tuple(users), layout, tx_power, mode)
    return ScenarioConfig(scenario, weight_mode, values, frequency, spacing, solver, bits)


def parse_config(text: str) -> ScenarioConfig:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigParseError(str(exc)) from exc
    return config_from_dict(doc)


def load_config(path) -> ScenarioConfig:
    return parse_config(Path(path).read_text())


def bundled_scenario(name: str) -> Path:
    path = BUNDLED_DIR / name
    if not path.suffix:
        path = path.with_suffix(".toml")
    return path


def solution_record(sol: Solution, extra: dict | None = None) -> dict:
    rec = sol.to_dict()
    if extra:
        rec.update(extra)
    return rec


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def dumps_record(rec: dict) -> str:
    return json.dumps(_jsonable(rec), indent=2) + "\n"


def write_record(rec: dict, path) -> None:
    Path(path).write_text(dumps_record(rec))


def read_record(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{path}: {exc}") from exc


def read_solution(path) -> Solution:
    rec = read_record(path)
    try:
        return Solution.from_dict(rec)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigValidationError(str(path), f"not a solution record ({exc})") from exc
