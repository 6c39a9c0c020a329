"""Radial feeder model, LinDistFlow, and distribution locational marginal prices.

Voltages are tracked as squared magnitudes ``w = v**2`` in per unit, so the
LinDistFlow drop along a line is ``w_child = w_parent - 2 (r P + x Q) / K`` with
``K = 1000 * base_voltage_kv**2`` converting Ω·kW into per unit. Line losses
are ``r (P**2 + Q**2) / (K w_parent)`` kW, evaluated at the lossless operating
point and fed back once into the flows.

DLMPs are the nodal active-balance duals of a linear program that buys power
at the substation at the wholesale price subject to the linearized branch-flow
equations, line limits and the voltage band. Limits can be hard (violation
raises) or soft, priced through non-negative slack variables.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

MIN_VOLTAGE_PU = 0.5
SCHEMA_VERSION = 1


class NetworkError(ValueError):
    pass


class TopologyError(NetworkError):
    pass


class DivergenceError(RuntimeError):
    pass


class InfeasibilityError(RuntimeError):
    def __init__(self, message: str, constraint: str):
        super().__init__(message)
        self.constraint = constraint


@dataclass(frozen=True)
class Bus:
    id: int
    parent_id: Optional[int] = None
    r: float = 0.0
    x: float = 0.0
    line_limit: float = math.inf
    v_min: float = 0.95
    v_max: float = 1.05


@dataclass(frozen=True, eq=False)
class RadialNetwork:
    """Tree rooted at the substation bus 0.

    ``r``, ``x`` (Ω) and ``line_limit`` (kVA) describe the line feeding each
    bus from its parent. Buses are stored in breadth-first order so that every
    parent precedes its children and the substation sits at index 0.
    """

    buses: tuple[Bus, ...]
    base_voltage_kv: float = 0.4
    base_power_kva: float = 100.0
    load_power_factor: float = 0.95
    name: str = ""

    def __post_init__(self):
        buses = tuple(self.buses)
        ids = [b.id for b in buses]
        if len(set(ids)) != len(ids):
            raise TopologyError("duplicate bus ids")
        roots = [b for b in buses if b.parent_id is None]
        if len(roots) != 1:
            raise TopologyError(f"expected exactly one substation bus, found {len(roots)}")
        if roots[0].id != 0:
            raise TopologyError("substation bus must have id 0")
        by_id = {b.id: b for b in buses}
        children: dict[int, list[int]] = {i: [] for i in ids}
        for b in buses:
            if b.parent_id is None:
                continue
            if b.parent_id not in by_id:
                raise TopologyError(f"bus {b.id} references unknown parent {b.parent_id}")
            if b.parent_id == b.id:
                raise TopologyError(f"bus {b.id} is its own parent")
            children[b.parent_id].append(b.id)
            if b.r < 0 or b.x < 0:
                raise NetworkError(f"negative impedance on line into bus {b.id}")
            if not b.line_limit > 0:
                raise NetworkError(f"line limit into bus {b.id} must be positive")
        for b in buses:
            if not (0 < b.v_min < b.v_max):
                raise NetworkError(f"bad voltage band at bus {b.id}")
        order = [0]
        for i in order:
            order.extend(sorted(children[i]))
        if len(order) != len(buses):
            stray = sorted(set(ids) - set(order))
            raise TopologyError(f"buses {stray} are not connected to the substation (cycle)")
        if not (0 < self.load_power_factor <= 1):
            raise NetworkError("load_power_factor must be in (0, 1]")
        if self.base_voltage_kv <= 0:
            raise NetworkError("base_voltage_kv must be positive")
        object.__setattr__(self, "buses", tuple(by_id[i] for i in order))

        index = {bid: k for k, bid in enumerate(order)}
        n = len(order)
        parent = np.full(n, -1)
        for k, bid in enumerate(order[1:], start=1):
            parent[k] = index[by_id[bid].parent_id]
        # subtree[l, n] = 1 when bus n lies at or below bus l
        subtree = np.eye(n)
        for k in range(n - 1, 0, -1):
            subtree[parent[k]] += subtree[k]
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "subtree", subtree)

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def n_lines(self) -> int:
        return len(self.buses) - 1

    @property
    def bus_ids(self) -> list[int]:
        return [b.id for b in self.buses]

    def index_of(self, bus_id: int) -> int:
        try:
            return self._index[bus_id]
        except KeyError:
            raise NetworkError(f"unknown bus {bus_id}") from None

    def children(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.parent == k)

    @property
    def r(self) -> np.ndarray:
        return np.array([b.r for b in self.buses])

    @property
    def x(self) -> np.ndarray:
        return np.array([b.x for b in self.buses])

    @property
    def line_limit(self) -> np.ndarray:
        return np.array([b.line_limit for b in self.buses])

    @property
    def k_factor(self) -> float:
        return 1000.0 * self.base_voltage_kv ** 2

    @property
    def load_tan_phi(self) -> float:
        return math.tan(math.acos(self.load_power_factor))

    def lines(self) -> list[tuple[int, int]]:
        return [(self.buses[self.parent[k]].id, self.buses[k].id) for k in range(1, self.n_buses)]

    def scaled_impedance(self, factor: float) -> "RadialNetwork":
        buses = [
            Bus(b.id, b.parent_id, b.r * factor, b.x * factor, b.line_limit, b.v_min, b.v_max)
            for b in self.buses
        ]
        return RadialNetwork(tuple(buses), self.base_voltage_kv, self.base_power_kva,
                             self.load_power_factor, self.name)


@dataclass(frozen=True, eq=False)
class NetSnapshot:
    """Net bus injections for one slot, aligned with ``RadialNetwork.buses``.

    Active injections are kW (negative = consumption). Reactive injections in
    kvar default to the load power-factor rule applied to net consumption.
    The substation entry is ignored: the substation is the slack.
    """

    injections: np.ndarray
    wholesale_price: float
    reactive: Optional[np.ndarray] = None

    def __post_init__(self):
        p = np.asarray(self.injections, dtype=float)
        if not np.all(np.isfinite(p)):
            raise NetworkError("injections must be finite")
        object.__setattr__(self, "injections", p)
        if self.reactive is not None:
            object.__setattr__(self, "reactive", np.asarray(self.reactive, dtype=float))


def snapshot_from_mapping(
    net: RadialNetwork,
    active: Mapping[int, float],
    wholesale_price: float,
    reactive: Optional[Mapping[int, float]] = None,
) -> NetSnapshot:
    p = np.zeros(net.n_buses)
    for bus, val in active.items():
        p[net.index_of(bus)] += val
    q = None
    if reactive is not None:
        q = np.zeros(net.n_buses)
        for bus, val in reactive.items():
            q[net.index_of(bus)] += val
    return NetSnapshot(p, wholesale_price, q)


def _consumption(net: RadialNetwork, snap: NetSnapshot) -> tuple[np.ndarray, np.ndarray]:
    if snap.injections.shape != (net.n_buses,):
        raise NetworkError(f"expected {net.n_buses} injections, got {snap.injections.shape}")
    c = -snap.injections.copy()
    c[0] = 0.0
    if snap.reactive is None:
        qc = net.load_tan_phi * np.maximum(c, 0.0)
    else:
        if snap.reactive.shape != (net.n_buses,):
            raise NetworkError("reactive injections have the wrong shape")
        qc = -snap.reactive.copy()
    qc[0] = 0.0
    return c, qc


@dataclass(frozen=True, eq=False)
class FlowResult:
    """LinDistFlow solution. Line arrays are indexed by the receiving bus
    position (entry 0, the substation, is unused and zero)."""

    p_flow: np.ndarray
    q_flow: np.ndarray
    w: np.ndarray
    line_loss: np.ndarray
    p_import: float
    q_import: float
    consumption: np.ndarray
    reactive_consumption: np.ndarray

    @property
    def voltage(self) -> np.ndarray:
        return np.sqrt(self.w)

    @property
    def total_loss(self) -> float:
        return float(self.line_loss.sum())

    def loading(self, net: RadialNetwork) -> np.ndarray:
        """Apparent-power loading fraction per line (0 for unlimited lines)."""
        s = np.hypot(self.p_flow, self.q_flow)
        lim = net.line_limit
        out = np.zeros_like(s)
        finite = np.isfinite(lim)
        finite[0] = False
        out[finite] = s[finite] / lim[finite]
        return out


def _voltages(net: RadialNetwork, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    drop = 2.0 * (net.r * p + net.x * q) / net.k_factor
    drop[0] = 0.0
    return 1.0 - net.subtree.T @ drop


def solve_lindistflow(net: RadialNetwork, snap: NetSnapshot) -> FlowResult:
    c, qc = _consumption(net, snap)
    sub = net.subtree
    p0 = sub @ c
    q0 = sub @ qc
    w0 = _voltages(net, p0, q0)
    if np.min(w0) < MIN_VOLTAGE_PU ** 2:
        raise DivergenceError(f"voltage {math.sqrt(max(np.min(w0), 0)):.3f} pu below {MIN_VOLTAGE_PU}")
    loss = net.r * (p0 ** 2 + q0 ** 2) / (net.k_factor * w0[np.maximum(net.parent, 0)])
    loss[0] = 0.0
    p = sub @ (c + loss)
    w = _voltages(net, p, q0)
    if np.min(w) < MIN_VOLTAGE_PU ** 2:
        raise DivergenceError(f"voltage {math.sqrt(max(np.min(w), 0)):.3f} pu below {MIN_VOLTAGE_PU}")
    p_import = float(p[0])
    q_import = float(q0[0])
    p[0] = 0.0
    q0[0] = 0.0
    return FlowResult(p, q0, w, loss, p_import, q_import, c, qc)


@dataclass(frozen=True)
class ViolationPrice:
    """Penalty prices for soft limits: £/kWh per kW of line overload and
    £/h per unit of squared-voltage excursion."""

    line: float = 1.0
    voltage: float = 10.0


@dataclass(frozen=True)
class LossModel:
    """Affine line-loss model ``loss = a + b P + c Q`` per line."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    @classmethod
    def at(cls, net: RadialNetwork, flow: FlowResult) -> "LossModel":
        w_par = flow.w[np.maximum(net.parent, 0)]
        scale = net.r / (net.k_factor * w_par)
        scale[0] = 0.0
        p, q = flow.p_flow, flow.q_flow
        return cls(-scale * (p ** 2 + q ** 2), 2.0 * scale * p, 2.0 * scale * q)


@dataclass(frozen=True, eq=False)
class DlmpResult:
    dlmp: np.ndarray
    dnt: np.ndarray
    flow: FlowResult
    wholesale_price: float
    objective: float
    line_multiplier: np.ndarray
    voltage_multiplier: np.ndarray
    line_overload: float = 0.0
    voltage_excursion: float = 0.0
    bus_ids: list[int] = field(default_factory=list)

    @property
    def total_loss(self) -> float:
        return self.flow.total_loss

    @property
    def voltage(self) -> np.ndarray:
        return self.flow.voltage

    def dnt_at(self, bus_id: int) -> float:
        return float(self.dnt[self.bus_ids.index(bus_id)])


def _first_violation(net: RadialNetwork, flow: FlowResult) -> str:
    lim = net.line_limit
    for k in range(1, net.n_buses):
        if abs(flow.p_flow[k]) > lim[k]:
            a, b = net.lines()[k - 1]
            return f"line {a}-{b}: |P|={abs(flow.p_flow[k]):.4f} kW > limit {lim[k]}"
    for k, bus in enumerate(net.buses):
        v = math.sqrt(flow.w[k])
        if v < bus.v_min or v > bus.v_max:
            return f"bus {bus.id}: voltage {v:.4f} pu outside [{bus.v_min}, {bus.v_max}]"
    return "unknown constraint"


def build_dlmp_lp(net: RadialNetwork, flow: FlowResult, price: float,
                  penalty: Optional[ViolationPrice]):
    """Assemble the DLMP linear program in ``linprog`` form.

    Returns (c, A_eq, b_eq, A_ub, b_ub, bounds, layout) where ``layout`` maps
    block names to variable slices; the first ``n_buses`` equality rows are the
    nodal active balances.
    """
    n = net.n_buses
    L = n - 1
    lines = np.arange(1, n)
    r, xr = net.r, net.x
    kf = net.k_factor
    loss = LossModel.at(net, flow)
    c_load, qc = flow.consumption, flow.reactive_consumption

    # variable blocks: P, Q, w for buses 1..n-1, then p_import, q_import
    iP, iQ, iW = 0, L, 2 * L
    i_pimp, i_qimp = 3 * L, 3 * L + 1
    nv = 3 * L + 2
    col = lambda base, k: base + k - 1  # noqa: E731

    rows, cols, vals = [], [], []
    b_eq = np.zeros(2 * n + L)

    def put(row, c_, v):
        rows.append(row)
        cols.append(c_)
        vals.append(v)

    for k in range(n):
        if k == 0:
            put(0, i_pimp, 1.0)
            put(n, i_qimp, 1.0)
        else:
            put(k, col(iP, k), 1.0 - loss.b[k])
            put(k, col(iQ, k), -loss.c[k])
            put(n + k, col(iQ, k), 1.0)
        for ch in net.children(k):
            put(k, col(iP, ch), -1.0)
            put(n + k, col(iQ, ch), -1.0)
        b_eq[k] = c_load[k] + (loss.a[k] if k else 0.0)
        b_eq[n + k] = qc[k]
    for j, k in enumerate(lines):
        row = 2 * n + j
        put(row, col(iW, k), 1.0)
        par = net.parent[k]
        if par == 0:
            b_eq[row] = 1.0
        else:
            put(row, col(iW, par), -1.0)
        put(row, col(iP, k), 2.0 * r[k] / kf)
        put(row, col(iQ, k), 2.0 * xr[k] / kf)

    ub_rows: list[tuple[int, float]] = []
    ub_rhs: list[float] = []
    ub_kind: list[tuple[str, int]] = []
    lim = net.line_limit
    for k in lines:
        if math.isfinite(lim[k]):
            ub_rows.append((col(iP, k), 1.0)); ub_rhs.append(lim[k]); ub_kind.append(("line_up", k))
            ub_rows.append((col(iP, k), -1.0)); ub_rhs.append(lim[k]); ub_kind.append(("line_dn", k))
    for k in lines:
        bus = net.buses[k]
        ub_rows.append((col(iW, k), 1.0)); ub_rhs.append(bus.v_max ** 2); ub_kind.append(("v_up", k))
        ub_rows.append((col(iW, k), -1.0)); ub_rhs.append(-bus.v_min ** 2); ub_kind.append(("v_dn", k))

    n_ub = len(ub_rows)
    n_slack = n_ub if penalty is not None else 0
    total = nv + n_slack
    cost = np.zeros(total)
    cost[i_pimp] = price
    u_r, u_c, u_v = [], [], []
    for i, (cc, vv) in enumerate(ub_rows):
        u_r.append(i); u_c.append(cc); u_v.append(vv)
        if penalty is not None:
            u_r.append(i); u_c.append(nv + i); u_v.append(-1.0)
            cost[nv + i] = penalty.line if ub_kind[i][0].startswith("line") else penalty.voltage
    A_eq = sp.csr_matrix((vals, (rows, cols)), shape=(2 * n + L, total))
    A_ub = sp.csr_matrix((u_v, (u_r, u_c)), shape=(n_ub, total)) if n_ub else None
    bounds = [(None, None)] * nv + [(0, None)] * n_slack
    layout = {"P": slice(iP, iP + L), "Q": slice(iQ, iQ + L), "w": slice(iW, iW + L),
              "p_import": i_pimp, "slack": slice(nv, total), "ub_kind": ub_kind}
    return cost, A_eq, b_eq, A_ub, np.array(ub_rhs) if n_ub else None, bounds, layout


def compute_dlmp(net: RadialNetwork, snap: NetSnapshot,
                 penalty: Optional[ViolationPrice] = None) -> DlmpResult:
    """DLMPs and network tariffs for one slot.

    With ``penalty=None`` the limits are hard and a violated limit raises
    InfeasibilityError naming the constraint.
    """
    flow = solve_lindistflow(net, snap)
    price = float(snap.wholesale_price)
    cost, A_eq, b_eq, A_ub, b_ub, bounds, layout = build_dlmp_lp(net, flow, price, penalty)
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method="highs")
    if res.status == 2:
        what = _first_violation(net, flow)
        raise InfeasibilityError(f"no import level satisfies the network limits ({what})", what)
    if res.status != 0:
        raise RuntimeError(f"DLMP linear program failed: {res.message}")
    n = net.n_buses
    dlmp = np.array(res.eqlin.marginals[:n], dtype=float)
    dlmp[0] = price
    dnt = dlmp - price
    dnt[0] = 0.0
    line_mu = np.zeros(n)
    volt_nu = np.zeros(n)
    overload = excursion = 0.0
    if A_ub is not None:
        duals = -np.asarray(res.ineqlin.marginals)
        slack = res.x[layout["slack"]] if penalty is not None else np.zeros(len(duals))
        for i, (kind, k) in enumerate(layout["ub_kind"]):
            sign = 1.0 if kind.endswith("up") else -1.0
            if kind.startswith("line"):
                line_mu[k] += sign * duals[i]
                overload += slack[i]
            else:
                volt_nu[k] += sign * duals[i]
                excursion += slack[i]
    return DlmpResult(dlmp, dnt, flow, price, float(res.fun), line_mu, volt_nu,
                      float(overload), float(excursion), net.bus_ids)


def parse_network(path) -> RadialNetwork:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise NetworkError(f"{path}: invalid JSON ({exc})") from None
    return network_from_dict(doc, source=str(path))


def network_from_dict(doc: dict, source: str = "<dict>") -> RadialNetwork:
    if doc.get("schema") != SCHEMA_VERSION:
        raise NetworkError(f"{source}: unsupported schema {doc.get('schema')!r}")
    defaults = doc.get("defaults", {})
    buses = []
    for entry in doc.get("buses", []):
        limit = entry.get("line_limit", defaults.get("line_limit"))
        buses.append(Bus(
            id=int(entry["id"]),
            parent_id=None if entry.get("parent_id") is None else int(entry["parent_id"]),
            r=float(entry.get("r", 0.0)),
            x=float(entry.get("x", 0.0)),
            line_limit=math.inf if limit is None else float(limit),
            v_min=float(entry.get("v_min", defaults.get("v_min", 0.95))),
            v_max=float(entry.get("v_max", defaults.get("v_max", 1.05))),
        ))
    if not buses:
        raise NetworkError(f"{source}: no buses")
    return RadialNetwork(
        tuple(buses),
        base_voltage_kv=float(doc.get("base_voltage_kv", 0.4)),
        base_power_kva=float(doc.get("base_power_kva", 100.0)),
        load_power_factor=float(doc.get("load_power_factor", 0.95)),
        name=str(doc.get("name", "")),
    )


def write_dlmp_csv(results: Iterable[tuple[int, DlmpResult]], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["slot", "bus", "dlmp", "dnt", "voltage"])
    for slot, res in results:
        volts = res.voltage
        for k, bus in enumerate(res.bus_ids):
            writer.writerow([slot, bus, f"{res.dlmp[k]:.10f}", f"{res.dnt[k]:.10f}",
                             f"{volts[k]:.10f}"])


def read_injections_csv(path, net: RadialNetwork) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Read ``bus,p_kw[,q_kvar]`` rows into arrays aligned with the network."""
    p = np.zeros(net.n_buses)
    q = None
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header[:2] != ["bus", "p_kw"] or len(header) > 3 or (
            len(header) == 3 and header[2] != "q_kvar"
        ):
            raise NetworkError(f"{path}: expected header 'bus,p_kw[,q_kvar]', got {header}")
        if len(header) == 3:
            q = np.zeros(net.n_buses)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise NetworkError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                k = net.index_of(int(row[0]))
                p[k] += float(row[1])
                if q is not None:
                    q[k] += float(row[2])
            except ValueError as exc:
                raise NetworkError(f"{path}:{lineno}: {exc}") from None
    if not np.all(np.isfinite(p)) or (q is not None and not np.all(np.isfinite(q))):
        raise NetworkError(f"{path}: non-finite injection")
    return p, q


def injections_for(net: RadialNetwork, buses: Sequence[int], values: Sequence[float]) -> np.ndarray:
    p = np.zeros(net.n_buses)
    for bus, val in zip(buses, values):
        p[net.index_of(bus)] += val
    return p
