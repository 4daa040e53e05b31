"""Collapsed states written out term by term from the closed-form expressions.

Built only from statespace primitives so it stays independent of the
click machinery in ``qutritherald.protocol``.
"""

import math

from qutritherald.atom_cavity import ATOM_LEVELS, PHOTON_LEVELS
from qutritherald.statespace import Ket, Subsystem, tensor_all


def _subs(name):
    return (Subsystem(f"{name}:atom", ATOM_LEVELS), Subsystem(f"{name}:photon", PHOTON_LEVELS))


def ground(name, level):
    """Atom in ``level`` with its photon already detected."""
    return Ket.basis(_subs(name), {f"{name}:atom": level, f"{name}:photon": "consumed"})


def phi(name, lam_l, lam_r):
    omega = math.hypot(lam_l, lam_r)
    a, ph = _subs(name)
    return Ket.from_terms(
        (a, ph),
        [({a.name: "gl", ph.name: "V"}, lam_l / omega), ({a.name: "gr", ph.name: "H"}, lam_r / omega)],
    )


def collapse_chain(theta, lam_l, lam_r):
    """Unnormalized states after Da_F, Db_F, Da_S, Db_S."""
    c, s = math.cos(theta), math.sin(theta)
    c2 = math.cos(2 * theta)
    s2 = math.sin(2 * theta)
    om = math.hypot(lam_l, lam_r)
    r2 = math.sqrt(2.0)
    P = {n: phi(n, lam_l, lam_r) for n in ("A1", "A2", "B1", "B2")}

    def T(*kets):
        return tensor_all(list(kets))

    def sym(level, x, y):
        # |level>_x |phi>_y + |phi>_x |level>_y
        return T(ground(x, level), P[y]) + T(P[x], ground(y, level))

    def q(party, k):
        x, y = party + "1", party + "2"
        if k == 0:
            return T(ground(x, "gl"), ground(y, "gl"))
        if k == 2:
            return T(ground(x, "gr"), ground(y, "gr"))
        return (T(ground(x, "gl"), ground(y, "gr")) + T(ground(x, "gr"), ground(y, "gl"))) / r2

    phiA = T(P["A1"], P["A2"])
    phiB = T(P["B1"], P["B2"])

    s1 = (c * lam_l / om) * T(sym("gl", "A1", "A2"), phiB) + (s * lam_r / om) * T(phiA, sym("gr", "B1", "B2"))

    s2_ = (1 / om**2) * (
        r2 * c * s * lam_l * lam_r * T(q("A", 1), phiB)
        + c**2 * lam_l**2 * T(sym("gl", "A1", "A2"), sym("gl", "B1", "B2"))
        + s**2 * lam_r**2 * T(sym("gr", "A1", "A2"), sym("gr", "B1", "B2"))
        + r2 * s * c * lam_r * lam_l * T(phiA, q("B", 1))
    )

    s3 = (1 / om**3) * (
        2 * c**2 * s * lam_l**3 * T(q("A", 0), sym("gl", "B1", "B2"))
        - r2 * lam_l * lam_r**2 * s * c2 * T(q("A", 1), sym("gr", "B1", "B2"))
        - r2 * lam_r * lam_l**2 * c * c2 * T(sym("gl", "A1", "A2"), q("B", 1))
        - 2 * s**2 * c * lam_r**3 * T(sym("gr", "A1", "A2"), q("B", 2))
    )

    s4 = (1 / om**4) * (
        s2**2 * lam_l**4 * T(q("A", 0), q("B", 0))
        + s2**2 * lam_r**4 * T(q("A", 2), q("B", 2))
        + 2 * c2**2 * lam_l**2 * lam_r**2 * T(q("A", 1), q("B", 1))
    )
    return [s1, s2_, s3, s4]
