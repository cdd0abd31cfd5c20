"""Production backend: Tate pairing on a supersingular curve.

Curve: y^2 = x^3 + x over F_q with q = 3 mod 4, so the curve is
supersingular with #E(F_q) = q + 1 and embedding degree 2.  We work in the
prime-order-r subgroup, r = 2^159 + 2^107 + 1 (a Solinas trinomial, chosen
so the Miller loop has only two addition steps), with q + 1 = h * r for the
cofactor h.  q is 512 bits, giving roughly 80-bit security; fine for a
deployable reference, not for long-term secrets.

The symmetric pairing is e(P, Q) = tate(P, phi(Q)) with the distortion map
phi(x, y) = (-x, i*y) over F_{q^2} = F_q[i]/(i^2 + 1).  The Miller loop is
denominator-free: vertical-line factors land in F_q and are erased by the
final exponentiation, whose exponent (q^2 - 1)/r = (q - 1) * h has q - 1 as
a factor.

Source elements are affine points (x, y) as gmpy2 mpz pairs, None for the
point at infinity.  Target elements are F_{q^2} values as (a, b) pairs
meaning a + b*i.
"""

from __future__ import annotations

import random
from typing import Any, Optional, Tuple

from gmpy2 import invert, mpz

from agencid.pairing.base import (
    Backend,
    EngineConfig,
    GroupTag,
    PairingEngine,
    SourceElement,
    TargetElement,
    rand_below,
)

__all__ = [
    "COFACTOR_H",
    "FIELD_Q",
    "GENERATOR",
    "GT_GENERATOR",
    "SUBGROUP_R",
    "SupersingularEngine",
]

SUBGROUP_R = 2**159 + 2**107 + 1
COFACTOR_H = 9173994463960284009407307246722713807589154813570348936405191652878379992636624159111642953511581236854892
FIELD_Q = mpz(
    6703903964971298549787012499102923063739682910296196688861780721860882015036773488400937149083451713845094850479931361232331019993865023329650659616096363
)

# Deterministic derivation, re-checked in tests: BASE_POINT is the curve
# point with the smallest x whose y is even, GENERATOR = COFACTOR_H * BASE_POINT,
# GT_GENERATOR = e(GENERATOR, GENERATOR).
BASE_POINT = (
    mpz(2),
    mpz(
        399823819172629804511113584911983616321094913692020480083930798434610568827558627485286740935191453518528566139224896014733760507239581005897648759538308
    ),
)
GENERATOR = (
    mpz(
        6644988002216269820659985607500678227458255383376484991517530919915814565942073005161639729908239905702374639552821787870439299973048801065224878547966201
    ),
    mpz(
        1753516333099638409694056637529775097471302775466086464114895421023538571409989341872507173891030179085016583190196189378756348143569196174246426931438580
    ),
)
GT_GENERATOR = (
    mpz(
        3381962292235547561938056208145217515558213133722417231030911868495741546503029369516866302328339337265344374955484245809256338642817864896299892216330892
    ),
    mpz(
        3468341268280584631869524062138490151131446654645272175534494645678514075029949330245656998349409064254295900327161568670602695052906775311972280904378838
    ),
)

_Q = FIELD_Q
_FQ_BYTES = 64
_POINT_BYTES = 1 + _FQ_BYTES
_GT_BYTES = 2 * _FQ_BYTES
_ONE2 = (mpz(1), mpz(0))
# Miller loop bits of r, most significant first, leading 1 skipped.
_RBITS = bin(SUBGROUP_R)[3:]

Point = Optional[Tuple[mpz, mpz]]
Fq2 = Tuple[mpz, mpz]


# -- curve arithmetic ------------------------------------------------------


def ec_add(P: Point, Q: Point) -> Point:
    if P is None:
        return Q
    if Q is None:
        return P
    x1, y1 = P
    x2, y2 = Q
    if x1 == x2:
        if (y1 + y2) % _Q == 0:
            return None
        lam = (3 * x1 * x1 + 1) * invert(2 * y1, _Q) % _Q
    else:
        lam = (y2 - y1) * invert(x2 - x1, _Q) % _Q
    x3 = (lam * lam - x1 - x2) % _Q
    return (x3, (lam * (x1 - x3) - y1) % _Q)


def ec_neg(P: Point) -> Point:
    if P is None:
        return None
    return (P[0], -P[1] % _Q)


def ec_mul(k: int, P: Point) -> Point:
    out: Point = None
    acc = P
    while k:
        if k & 1:
            out = ec_add(out, acc)
        acc = ec_add(acc, acc)
        k >>= 1
    return out


def on_curve(x: mpz, y: mpz) -> bool:
    return (y * y - (x * x * x + x)) % _Q == 0


# -- F_{q^2} arithmetic ----------------------------------------------------


def f2_mul(u: Fq2, v: Fq2) -> Fq2:
    a, b = u
    c, d = v
    t1 = a * c
    t2 = b * d
    return ((t1 - t2) % _Q, ((a + b) * (c + d) - t1 - t2) % _Q)


def f2_sqr(u: Fq2) -> Fq2:
    a, b = u
    return ((a + b) * (a - b) % _Q, 2 * a * b % _Q)


def f2_inv(u: Fq2) -> Fq2:
    a, b = u
    n = invert(a * a + b * b, _Q)
    return (a * n % _Q, -b * n % _Q)


def f2_pow(u: Fq2, e: int) -> Fq2:
    if e == 0:
        return _ONE2
    out = _ONE2
    for bit in bin(e)[2:]:
        out = f2_sqr(out)
        if bit == "1":
            out = f2_mul(out, u)
    return out


# -- pairing ---------------------------------------------------------------


def tate_pairing(P: Point, Q: Point) -> Fq2:
    """e(P, Q) = reduced Tate pairing of P against phi(Q).

    Line functions are evaluated at phi(Q) = (-xq, i*yq): the line with
    slope lam through (xt, yt) gives (lam*(xq + xt) - yt) + i*yq.  With r
    odd, no intermediate T hits the point at infinity, and T == -P occurs
    only at the final addition, handled by the vertical-line skip.
    """
    if P is None or Q is None:
        return _ONE2
    xp, yp = P
    xq, yq = Q
    f = _ONE2
    T = P
    for bit in _RBITS:
        xt, yt = T
        lam = (3 * xt * xt + 1) * invert(2 * yt, _Q) % _Q
        f = f2_mul(f2_sqr(f), ((lam * (xq + xt) - yt) % _Q, yq))
        x3 = (lam * lam - 2 * xt) % _Q
        T = (x3, (lam * (xt - x3) - yt) % _Q)
        if bit == "1":
            xt, yt = T
            if xt == xp:
                # T == -P: chord is vertical, its value lies in F_q and the
                # final exponentiation removes it.
                T = ec_add(T, P)
                if T is None:
                    continue
            else:
                lam = (yp - yt) * invert(xp - xt, _Q) % _Q
                f = f2_mul(f, ((lam * (xq + xt) - yt) % _Q, yq))
                x3 = (lam * lam - xt - xp) % _Q
                T = (x3, (lam * (xt - x3) - yt) % _Q)
    # Final exponentiation by (q - 1) * h; z^(q-1) = conj(z)/z in F_{q^2}.
    a, b = f
    z = f2_mul((a, -b % _Q), f2_inv(f))
    return f2_pow(z, COFACTOR_H)


# -- engine ----------------------------------------------------------------


class SupersingularEngine(PairingEngine):
    """Pairing engine over the fixed curve above.

    Deserialization validates its input (curve membership, subgroup order,
    target-group order) without touching the operation counters; counters
    meter scheme algebra only.
    """

    def __init__(self, config: EngineConfig) -> None:
        if config.backend is not Backend.PRODUCTION:
            raise ValueError("SupersingularEngine requires the production backend config")
        super().__init__(config)

    @property
    def scalar_order(self) -> int:
        return SUBGROUP_R

    def generator(self, tag: GroupTag = GroupTag.BOTH) -> SourceElement:
        return SourceElement(self.backend, tag, GENERATOR)

    def identity(self, tag: GroupTag = GroupTag.BOTH) -> SourceElement:
        return SourceElement(self.backend, tag, None)

    def gt_identity(self) -> TargetElement:
        return TargetElement(self.backend, _ONE2)

    def random_gt(self, rng: random.Random) -> TargetElement:
        # GT_GENERATOR has prime order r, so a uniform exponent gives a
        # uniform element of the target subgroup.
        k = rand_below(rng, SUBGROUP_R)
        return TargetElement(self.backend, f2_pow(GT_GENERATOR, k))

    # -- serialization -----------------------------------------------------

    @property
    def source_size(self) -> int:
        return _POINT_BYTES

    @property
    def gt_size(self) -> int:
        return _GT_BYTES

    @property
    def scalar_size(self) -> int:
        return 20

    def serialize_source(self, x: SourceElement) -> bytes:
        P = x.data
        if P is None:
            return b"\x00" * _POINT_BYTES
        px, py = P
        flag = 0x02 | int(py & 1)
        return bytes([flag]) + int(px).to_bytes(_FQ_BYTES, "big")

    def deserialize_source(self, raw: bytes, tag: GroupTag = GroupTag.BOTH) -> SourceElement:
        if len(raw) != _POINT_BYTES:
            raise ValueError(f"point encoding must be {_POINT_BYTES} bytes")
        flag = raw[0]
        if flag == 0x00:
            if any(raw[1:]):
                raise ValueError("identity point encoding must be all zero")
            return SourceElement(self.backend, tag, None)
        if flag not in (0x02, 0x03):
            raise ValueError(f"bad point compression flag {flag:#x}")
        px = mpz(int.from_bytes(raw[1:], "big"))
        if px >= _Q:
            raise ValueError("point x coordinate out of field range")
        # q = 3 mod 4: sqrt by exponentiation, then verify.
        rhs = (px * px * px + px) % _Q
        py = pow(rhs, (_Q + 1) // 4, _Q)
        if py * py % _Q != rhs:
            raise ValueError("x coordinate is not on the curve")
        if int(py & 1) != (flag & 1):
            py = -py % _Q
        P = (px, mpz(py))
        if ec_mul(SUBGROUP_R, P) is not None:
            raise ValueError("point is outside the prime-order subgroup")
        return SourceElement(self.backend, tag, P)

    def serialize_gt(self, x: TargetElement) -> bytes:
        a, b = x.data
        return int(a).to_bytes(_FQ_BYTES, "big") + int(b).to_bytes(_FQ_BYTES, "big")

    def deserialize_gt(self, raw: bytes) -> TargetElement:
        if len(raw) != _GT_BYTES:
            raise ValueError(f"target element encoding must be {_GT_BYTES} bytes")
        a = mpz(int.from_bytes(raw[:_FQ_BYTES], "big"))
        b = mpz(int.from_bytes(raw[_FQ_BYTES:], "big"))
        if a >= _Q or b >= _Q:
            raise ValueError("target element coordinate out of field range")
        z = (a, b)
        if z == (0, 0) or f2_pow(z, SUBGROUP_R) != _ONE2:
            raise ValueError("element is outside the order-r target subgroup")
        return TargetElement(self.backend, z)

    # -- raw ops -----------------------------------------------------------

    def _add(self, x: Any, y: Any) -> Any:
        return ec_add(x, y)

    def _neg(self, x: Any) -> Any:
        return ec_neg(x)

    def _scalar_mul(self, k: int, x: Any) -> Any:
        return ec_mul(k, x)

    def _pair(self, a: Any, b: Any) -> Any:
        return tate_pairing(a, b)

    def _gt_combine(self, x: Any, y: Any) -> Any:
        return f2_mul(x, y)

    def _gt_uncombine(self, x: Any, y: Any) -> Any:
        return f2_mul(x, f2_inv(y))

    def _gt_scale(self, k: int, x: Any) -> Any:
        return f2_pow(x, k)
