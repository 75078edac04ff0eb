"""Scenario, cell, traffic and message-catalog types, plus the YAML scenario loader.

A scenario file is a flat YAML mapping. Every key is optional; anything not
given falls back to the defaults below (5 MHz cell, one RAO every 5
subframes, 54 preambles, m = 9, ARP + data signaling, 100 byte reports).
Unknown keys are rejected.

Rates are stored per subframe (1 ms).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

CHANNELS = ("prach", "pdcch", "pdsch", "pusch")

# bandwidth (MHz) -> (resource blocks, CCEs per subframe at CFI=3, default RAO spacing)
BANDWIDTHS: dict[float, tuple[int, int, int]] = {
    1.4: (6, 6, 20),
    5.0: (25, 21, 5),
    10.0: (50, 43, 5),
    20.0: (100, 87, 5),
}

PDCCH_MODES = ("raw_cce", "format1_messages")
PUSCH_MODES = ("normalized", "verbatim")
SIGNALING_MODES = ("short", "full")

# PRACH occupies 6 uplink RBs in every RAO subframe.
PRACH_RBS = 6
# PDCCH format 1 (PDSCH scheduling) takes 2 CCEs.
CCES_PER_FORMAT1 = 2


class ScenarioError(ValueError):
    """Invalid scenario. ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ScenarioParseError(ScenarioError):
    pass


@dataclass(frozen=True)
class CellConfig:
    bandwidth_mhz: float = 5.0
    n_ulrb: int = 25
    n_dlrb: int = 25
    n_cce: int = 21
    pdcch_capacity_mode: str = "format1_messages"
    pusch_capacity_mode: str = "normalized"
    d: int = 54
    delta_rao: int = 5
    m: int = 9
    w_c: int = 20
    t_rar: int = 10
    t_crt: int = 40
    t_other: int = 40
    proc_enb: int = 3
    proc_ue: int = 3

    def validate(self) -> None:
        if self.bandwidth_mhz not in BANDWIDTHS:
            raise ScenarioError("bandwidth_mhz", f"must be one of {sorted(BANDWIDTHS)}")
        _, cce_cfi3, _ = BANDWIDTHS[self.bandwidth_mhz]
        if self.n_cce != cce_cfi3:
            raise ScenarioError(
                "n_cce", f"{self.bandwidth_mhz} MHz at CFI=3 has {cce_cfi3} CCEs, got {self.n_cce}"
            )
        for name in ("n_ulrb", "n_dlrb", "d", "w_c", "t_rar", "t_crt", "t_other"):
            if getattr(self, name) < 1:
                raise ScenarioError(name, "must be positive")
        for name in ("m", "proc_enb", "proc_ue"):
            if getattr(self, name) < 0:
                raise ScenarioError(name, "must be non-negative")
        if not 1 <= self.delta_rao <= 20:
            raise ScenarioError("delta_rao", f"must lie in [1, 20], got {self.delta_rao}")
        if self.t_rar > self.t_crt:
            raise ScenarioError("t_rar", "must not exceed t_crt")
        if self.pdcch_capacity_mode not in PDCCH_MODES:
            raise ScenarioError("pdcch_capacity_mode", f"must be one of {PDCCH_MODES}")
        if self.pusch_capacity_mode not in PUSCH_MODES:
            raise ScenarioError("pusch_capacity_mode", f"must be one of {PUSCH_MODES}")
        if pusch_capacity(self) <= 0:
            raise ScenarioError(
                "pusch_capacity_mode",
                f"{self.pusch_capacity_mode} PUSCH capacity is {pusch_capacity(self):g} RBs/subframe "
                f"for n_ulrb={self.n_ulrb}, delta_rao={self.delta_rao}",
            )


@dataclass(frozen=True)
class SignalingCatalog:
    b_rar: int = 8
    b_req: int = 7
    b_conn: int = 38
    b_comp: int = 20
    b_r_dl: int = 118
    b_r_ul: int = 10
    b_s_cmd: int = 11
    b_s_comp: int = 13
    b_rb: int = 36
    n_frag: int = 6
    mode: str = "short"

    def validate(self) -> None:
        for f in dataclasses.fields(self):
            if f.name != "mode" and getattr(self, f.name) < 1:
                raise ScenarioError(f.name, "must be positive")
        if self.mode not in SIGNALING_MODES:
            raise ScenarioError("signaling", f"must be one of {SIGNALING_MODES}")

    def rbs(self, nbytes: int | float) -> int:
        """Resource blocks needed for ``nbytes``."""
        return math.ceil(nbytes / self.b_rb)


@dataclass(frozen=True)
class TrafficConfig:
    lambda_i: float = 1.0
    b_data: int = 100
    n_devices: int | None = None
    report_interval_s: float | None = None

    @classmethod
    def from_devices(cls, n_devices: int, report_interval_s: float, b_data: int = 100) -> "TrafficConfig":
        return cls(
            lambda_i=n_devices / (report_interval_s * 1000.0),
            b_data=b_data,
            n_devices=n_devices,
            report_interval_s=report_interval_s,
        )

    @property
    def rate_per_s(self) -> float:
        return self.lambda_i * 1000.0

    def validate(self) -> None:
        if not self.lambda_i > 0:
            raise ScenarioError("lambda_i", "must be positive")
        if self.b_data < 1:
            raise ScenarioError("b_data", "must be positive")
        if (self.n_devices is None) != (self.report_interval_s is None):
            raise ScenarioError("n_devices", "n_devices and report_interval_s go together")
        if self.n_devices is not None:
            if self.n_devices < 1 or self.report_interval_s <= 0:
                raise ScenarioError("n_devices", "n_devices and report_interval_s must be positive")
            derived = self.n_devices / (self.report_interval_s * 1000.0)
            if not math.isclose(derived, self.lambda_i, rel_tol=1e-12):
                raise ScenarioError("lambda_i", f"inconsistent with n_devices/report_interval_s ({derived})")


@dataclass(frozen=True)
class ScenarioSpec:
    cell: CellConfig = field(default_factory=CellConfig)
    catalog: SignalingCatalog = field(default_factory=SignalingCatalog)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    limit_mask: frozenset[str] = frozenset(CHANNELS)
    scenario_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "limit_mask", frozenset(self.limit_mask))
        if not self.scenario_id:
            object.__setattr__(self, "scenario_id", default_scenario_id(self))

    def validate(self) -> "ScenarioSpec":
        self.cell.validate()
        self.catalog.validate()
        self.traffic.validate()
        if not self.limit_mask:
            raise ScenarioError("limit_mask", "at least one bottleneck must be enabled")
        unknown = self.limit_mask - set(CHANNELS)
        if unknown:
            raise ScenarioError("limit_mask", f"unknown channels {sorted(unknown)}")
        return self

    def limits(self, channel: str) -> bool:
        return channel in self.limit_mask

    def with_rate(self, lambda_i: float) -> "ScenarioSpec":
        """Same scenario at a different aggregate arrival rate (per subframe)."""
        traffic = TrafficConfig(lambda_i=lambda_i, b_data=self.traffic.b_data)
        return dataclasses.replace(self, traffic=traffic)


def default_scenario_id(spec: ScenarioSpec) -> str:
    bw = f"{spec.cell.bandwidth_mhz:g}MHz"
    mask = "" if spec.limit_mask == frozenset(CHANNELS) else "-" + "+".join(
        c for c in CHANNELS if c in spec.limit_mask
    )
    return f"{bw}-rao{spec.cell.delta_rao}-{spec.catalog.mode}-{spec.traffic.b_data}B{mask}"


def pdcch_capacity(cell: CellConfig) -> int:
    """PDCCH messages that fit in one subframe."""
    if cell.pdcch_capacity_mode == "format1_messages":
        return cell.n_cce // CCES_PER_FORMAT1
    return cell.n_cce


def pusch_capacity(cell: CellConfig) -> float:
    """Mean PUSCH RBs per subframe left after PRACH.

    ``verbatim`` subtracts 6 * 10 / delta_rao (6 RBs per RAO counted per
    frame); ``normalized`` subtracts the per-subframe average 6 / delta_rao,
    which is what the simulator reserves.
    """
    per_rao = PRACH_RBS * 10 if cell.pusch_capacity_mode == "verbatim" else PRACH_RBS
    return cell.n_ulrb - per_rao / cell.delta_rao


# ---------------------------------------------------------------------------
# file format

_CELL_KEYS = {f.name for f in dataclasses.fields(CellConfig)}
_CATALOG_KEYS = {f.name for f in dataclasses.fields(SignalingCatalog)} - {"mode"}
_TRAFFIC_KEYS = {"lambda_i", "rate_per_s", "b_data", "n_devices", "report_interval_s"}
KNOWN_KEYS = _CELL_KEYS | _CATALOG_KEYS | _TRAFFIC_KEYS | {"signaling", "limit_mask", "scenario_id"}

_INT_KEYS = (_CELL_KEYS - {"bandwidth_mhz", "pdcch_capacity_mode", "pusch_capacity_mode"}) | _CATALOG_KEYS | {
    "b_data",
    "n_devices",
}


def _as_int(key: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ScenarioError(key, f"expected an integer, got {value!r}")
    return int(value)


def _as_float(key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(key, f"expected a number, got {value!r}")
    return float(value)


def scenario_from_dict(raw: dict[str, Any]) -> ScenarioSpec:
    """Build and validate a scenario from a flat mapping of documented keys."""
    unknown = set(raw) - KNOWN_KEYS
    if unknown:
        raise ScenarioError(sorted(unknown)[0], "unknown key")
    vals: dict[str, Any] = {}
    for key, value in raw.items():
        if value is None:
            continue
        if key in _INT_KEYS:
            vals[key] = _as_int(key, value)
        elif key in ("bandwidth_mhz", "lambda_i", "rate_per_s", "report_interval_s"):
            vals[key] = _as_float(key, value)
        else:
            vals[key] = value

    bw = vals.get("bandwidth_mhz", 5.0)
    if bw not in BANDWIDTHS:
        raise ScenarioError("bandwidth_mhz", f"must be one of {sorted(BANDWIDTHS)}")
    n_rb, n_cce, rao = BANDWIDTHS[bw]
    cell_kw = {"bandwidth_mhz": bw, "n_ulrb": n_rb, "n_dlrb": n_rb, "n_cce": n_cce, "delta_rao": rao}
    cell_kw.update({k: vals[k] for k in _CELL_KEYS if k in vals})
    cell = CellConfig(**cell_kw)

    cat_kw = {k: vals[k] for k in _CATALOG_KEYS if k in vals}
    if "signaling" in vals:
        cat_kw["mode"] = vals["signaling"]
    catalog = SignalingCatalog(**cat_kw)

    rate_keys = [k for k in ("lambda_i", "rate_per_s", "n_devices") if k in vals]
    if len(rate_keys) > 1:
        raise ScenarioError(rate_keys[1], "give only one of lambda_i, rate_per_s, n_devices")
    b_data = vals.get("b_data", 100)
    if "n_devices" in vals:
        if "report_interval_s" not in vals:
            raise ScenarioError("report_interval_s", "required with n_devices")
        traffic = TrafficConfig.from_devices(vals["n_devices"], vals["report_interval_s"], b_data)
    else:
        if "report_interval_s" in vals:
            raise ScenarioError("report_interval_s", "only meaningful with n_devices")
        if "rate_per_s" in vals:
            lam = vals["rate_per_s"] / 1000.0
        else:
            lam = vals.get("lambda_i", 1.0)
        traffic = TrafficConfig(lambda_i=lam, b_data=b_data)

    mask = vals.get("limit_mask", list(CHANNELS))
    if isinstance(mask, str):
        mask = [m.strip() for m in mask.split(",") if m.strip()]
    if not isinstance(mask, (list, tuple)):
        raise ScenarioError("limit_mask", "expected a list of channel names")

    return ScenarioSpec(
        cell=cell,
        catalog=catalog,
        traffic=traffic,
        limit_mask=frozenset(mask),
        scenario_id=str(vals.get("scenario_id", "")),
    ).validate()


def scenario_to_dict(spec: ScenarioSpec) -> dict[str, Any]:
    """Flat mapping that :func:`scenario_from_dict` turns back into ``spec``."""
    out: dict[str, Any] = {"scenario_id": spec.scenario_id}
    out.update(dataclasses.asdict(spec.cell))
    cat = dataclasses.asdict(spec.catalog)
    out["signaling"] = cat.pop("mode")
    out.update(cat)
    t = spec.traffic
    out["b_data"] = t.b_data
    if t.n_devices is not None:
        out["n_devices"] = t.n_devices
        out["report_interval_s"] = t.report_interval_s
    else:
        out["lambda_i"] = t.lambda_i
    out["limit_mask"] = [c for c in CHANNELS if c in spec.limit_mask]
    return out


def load_scenario(path: str | Path) -> ScenarioSpec:
    text = Path(path).read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioParseError("<file>", f"cannot parse {path}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ScenarioParseError("<file>", f"{path} must hold a flat mapping of keys")
    return scenario_from_dict(raw)


def dump_scenario(spec: ScenarioSpec, path: str | Path | None = None) -> str:
    text = yaml.safe_dump(scenario_to_dict(spec), sort_keys=False)
    if path is not None:
        Path(path).write_text(text)
    return text
