"""Scenario manifests (JSON, ``"schema": 1``).

Relative paths resolve against the manifest's directory; a ``bundled:`` prefix
points into the package data (e.g. ``bundled:networks/feeder15.json``).
See README.md for the full key list.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .environment import MarketScenario
from .maddpg.train import Hyperparams
from .network import NetworkError, RadialNetwork, ViolationPrice, parse_network
from .pricing import PriceBounds, PriceBoundsError
from .profiles import (
    DEFAULT_START,
    ProfileError,
    ScenarioData,
    TimeSeries,
    align,
    load_profile_csv,
    synthesize_profiles,
    synthesize_wholesale_price,
)
from .prosumer import BatterySpec, ProsumerSpec

SCHEMA_VERSION = 1

# manifest key -> BatterySpec field
BATTERY_KEYS = {
    "usable_capacity": "capacity_kwh",
    "capacity_kwh": "capacity_kwh",
    "soc_min": "soc_min",
    "soc_max": "soc_max",
    "b_min": "b_min",
    "b_max": "b_max",
    "round_trip_efficiency": "round_trip_efficiency",
    "price_per_kwh": "price_per_kwh",
    "life_cycle": "life_cycles",
    "depth_of_discharge": "depth_of_discharge",
    "initial_soc": "initial_soc",
}


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class Manifest:
    scenario: MarketScenario
    hyperparams: Hyperparams
    seed: int
    eval_start: int
    eval_length: int
    source: Optional[Path] = None

    @property
    def dnt_enabled(self) -> bool:
        return self.scenario.dnt_enabled


def bundled_path(relative: str) -> Path:
    return Path(str(resources.files("gridtrade") / "data" / relative))


def _resolve(ref: str, base: Path) -> Path:
    if ref.startswith("bundled:"):
        path = bundled_path(ref[len("bundled:"):])
    else:
        path = Path(ref)
        if not path.is_absolute():
            path = base / path
    if not path.exists():
        raise ManifestError(f"referenced file does not exist: {path}")
    return path


def _series(spec: Any, kind: str, base: Path, start: datetime, step: int,
            synth_kind: Optional[str] = None, default_peak: float = 1.0) -> TimeSeries:
    if isinstance(spec, (int, float)):
        spec = {"constant": spec}
    if not isinstance(spec, dict):
        raise ManifestError(f"bad series spec {spec!r}")
    scale = float(spec.get("scale", 1.0))
    if "csv" in spec:
        ts = load_profile_csv(_resolve(spec["csv"], base), "power" if kind == "power" else "price")
    elif "values" in spec:
        ts = TimeSeries(start, spec["values"], step, kind)
    elif "synth" in spec:
        opts = dict(spec["synth"])
        seed = int(opts.pop("seed", 0))
        days = int(opts.pop("days", 1))
        if synth_kind == "price":
            ts = synthesize_wholesale_price(seed, days, start=start, step_minutes=step, **opts)
        elif synth_kind in ("load", "solar"):
            opts.setdefault("peak_kw", default_peak)
            if "daylight" in opts:
                opts["daylight"] = tuple(opts["daylight"])
            ts = synthesize_profiles(seed, days, synth_kind, start=start, step_minutes=step, **opts)
        else:
            raise ManifestError("synthetic series are only available for load, solar and wholesale")
    elif "constant" in spec:
        n = int(spec.get("length", 48))
        ts = TimeSeries(start, np.full(n, float(spec["constant"])), step, kind)
    else:
        raise ManifestError(f"series spec needs one of csv/values/synth/constant: {spec!r}")
    return ts.scaled(scale) if scale != 1.0 else ts


def _battery(doc: Optional[dict]) -> Optional[BatterySpec]:
    if doc is None:
        return None
    kwargs = {}
    for key, value in doc.items():
        if key not in BATTERY_KEYS:
            raise ManifestError(f"unknown battery key {key!r}")
        kwargs[BATTERY_KEYS[key]] = float(value)
    return BatterySpec(**kwargs)


def manifest_from_dict(doc: dict, base: Path = Path("."), source: Optional[Path] = None) -> Manifest:
    try:
        return _build(doc, base, source)
    except ManifestError:
        raise
    except (ProfileError, NetworkError, PriceBoundsError, KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"invalid manifest: {exc}") from exc


def _build(doc: dict, base: Path, source: Optional[Path]) -> Manifest:
    if doc.get("schema") != SCHEMA_VERSION:
        raise ManifestError(f"unsupported manifest schema {doc.get('schema')!r}")
    step = int(doc.get("step_minutes", 30))
    start = datetime.fromisoformat(doc["start"]) if "start" in doc else DEFAULT_START

    participants, loads, solar = [], [], []
    entries = doc.get("participants") or []
    if not entries:
        raise ManifestError("manifest lists no participants")
    for entry in entries:
        pv = float(entry.get("pv_capacity", 0.0))
        spec = ProsumerSpec(str(entry["id"]), int(entry["bus_id"]), _battery(entry.get("battery")), pv)
        participants.append(spec)
        loads.append(_series(entry["load"], "power", base, start, step, "load"))
        if "solar" in entry:
            solar.append(_series(entry["solar"], "power", base, start, step, "solar", pv))
        else:
            solar.append(TimeSeries(start, np.zeros(len(loads[-1])), step, "power"))

    prices = doc.get("prices", {})
    bounds = PriceBounds(float(prices.get("esp_import", 0.05)), float(prices.get("esp_export", 0.03)),
                         None if prices.get("compensation") is None else float(prices["compensation"]))
    wholesale = _series(doc.get("wholesale", {"constant": 0.05, "length": len(loads[0])}),
                        "price", base, start, step, "price")
    extra = {}
    fixed = doc.get("fixed_prices")
    if fixed is not None:
        extra["fixed_buy"] = _series(fixed["buy"], "price", base, start, step)
        extra["fixed_sell"] = _series(fixed["sell"], "price", base, start, step)
    data = align(ScenarioData(tuple(loads), tuple(solar), wholesale,
                              bounds.import_price, bounds.export_price, extra))
    horizon = doc.get("horizon_slots")
    if horizon is not None:
        if int(horizon) > data.horizon:
            raise ManifestError(f"horizon_slots {horizon} exceeds data length {data.horizon}")
        n = int(horizon)
        data = ScenarioData(tuple(s.truncate(n) for s in data.loads),
                            tuple(s.truncate(n) for s in data.solar), data.wholesale.truncate(n),
                            data.esp_import_price, data.esp_export_price,
                            {k: v.truncate(n) for k, v in data.extra.items()})

    network: Optional[RadialNetwork] = None
    if doc.get("network"):
        network = parse_network(_resolve(doc["network"], base))
    vp = doc.get("violation_price", {})
    penalty = None if vp is None else ViolationPrice(float(vp.get("line", 1.0)),
                                                     float(vp.get("voltage", 10.0)))
    fixed_prices = None
    if fixed is not None:
        fixed_prices = (data.extra["fixed_buy"].values, data.extra["fixed_sell"].values)
    scenario = MarketScenario(tuple(participants), data, bounds, network,
                              bool(doc.get("dnt_enabled", network is not None)), penalty,
                              fixed_prices)

    hp = Hyperparams.from_dict(doc.get("hyperparams", {}))
    ev = doc.get("evaluation", {})
    eval_start = int(ev.get("start_slot", 0))
    eval_length = int(ev.get("length", scenario.horizon - eval_start))
    if not (0 <= eval_start < scenario.horizon and 1 <= eval_length <= scenario.horizon - eval_start):
        raise ManifestError("evaluation window lies outside the horizon")
    return Manifest(scenario, hp, int(doc.get("seed", 0)), eval_start, eval_length, source)


def load_manifest(path) -> Manifest:
    path = Path(path)
    if path.as_posix().startswith("bundled:"):
        path = bundled_path(path.as_posix()[len("bundled:"):])
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})") from None
    return manifest_from_dict(doc, path.parent, path)
