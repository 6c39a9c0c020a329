"""Brute-force reference for DLMPs, independent of the LP solver.

With the loss model frozen at the operating point, every flow and voltage of
the linearised OPF is fixed by the consumptions, so the objective can be
evaluated directly by walking the tree and differentiated numerically.
"""
import numpy as np

from gridtrade.network import LossModel, solve_lindistflow


def tree_walk(net, consumption, reactive, loss: LossModel):
    """Return P, Q, w, p_import solving the affine-loss branch-flow equations.

    Iterates ``P = subtree @ (c + a + b P + c_q Q)`` to machine precision;
    the map is a contraction because loss coefficients are tiny.
    """
    n = net.n_buses
    parent = net.parent
    order = list(range(n))  # breadth-first, root first
    Q = np.zeros(n)
    for k in reversed(order[1:]):
        Q[k] += reactive[k]
        Q[parent[k]] += Q[k] if parent[k] > 0 else 0.0
    P = np.zeros(n)
    for _ in range(200):
        new = np.zeros(n)
        for k in reversed(order[1:]):
            new[k] += consumption[k] + loss.a[k] + loss.b[k] * P[k] + loss.c[k] * Q[k]
            if parent[k] > 0:
                new[parent[k]] += new[k]
        if np.max(np.abs(new - P)) < 1e-15:
            P = new
            break
        P = new
    w = np.ones(n)
    for k in order[1:]:
        w[k] = w[parent[k]] - 2.0 * (net.r[k] * P[k] + net.x[k] * Q[k]) / net.k_factor
    top = [k for k in order[1:] if parent[k] == 0]
    p_import = consumption[0] + sum(P[k] for k in top)
    return P, Q, w, p_import


def objective(net, consumption, reactive, loss, price, penalty=None):
    P, Q, w, p_import = tree_walk(net, consumption, reactive, loss)
    total = price * p_import
    if penalty is not None:
        for k in range(1, net.n_buses):
            lim = net.line_limit[k]
            if np.isfinite(lim):
                total += penalty.line * max(0.0, abs(P[k]) - lim)
            bus = net.buses[k]
            total += penalty.voltage * (max(0.0, w[k] - bus.v_max ** 2) + max(0.0, bus.v_min ** 2 - w[k]))
    return total


def fd_dlmp(net, snap, penalty=None, eps=1e-4):
    """Central-difference DLMP at every bus, reactive demand held fixed."""
    flow = solve_lindistflow(net, snap)
    loss = LossModel.at(net, flow)
    c0 = flow.consumption.copy()
    q0 = flow.reactive_consumption.copy()
    out = np.zeros(net.n_buses)
    for k in range(net.n_buses):
        up, dn = c0.copy(), c0.copy()
        up[k] += eps
        dn[k] -= eps
        out[k] = (objective(net, up, q0, loss, snap.wholesale_price, penalty)
                  - objective(net, dn, q0, loss, snap.wholesale_price, penalty)) / (2 * eps)
    return out
