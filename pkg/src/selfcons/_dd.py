"""Error-free float transforms (double-double building blocks).

Every helper works elementwise on both Python floats and numpy arrays.
A double-double value is an unevaluated pair (hi, lo) with hi + lo equal
to the represented number and |lo| <= ulp(hi)/2.
"""

from __future__ import annotations

# Dekker split factor for 53-bit significands: 2**27 + 1.
_SPLIT = 134217729.0


def two_sum(a, b):
    """Exact sum: returns (s, e) with s = fl(a+b) and s + e = a + b."""
    s = a + b
    bv = s - a
    return s, (a - (s - bv)) + (b - bv)


def two_prod(a, b):
    """Exact product: returns (p, e) with p = fl(a*b) and p + e = a * b."""
    p = a * b
    aa = _SPLIT * a
    ahi = aa - (aa - a)
    alo = a - ahi
    bb = _SPLIT * b
    bhi = bb - (bb - b)
    blo = b - bhi
    e = ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo
    return p, e


def dd_add(ah, al, bh, bl):
    """(ah, al) + (bh, bl), renormalized."""
    s, e = two_sum(ah, bh)
    e = e + al + bl
    return two_sum(s, e)


def dd_sub(ah, al, bh, bl):
    return dd_add(ah, al, -bh, -bl)


def dd_add_float(ah, al, b):
    s, e = two_sum(ah, b)
    return two_sum(s, e + al)


def dd_recip_int(d):
    """1/d for an exactly representable positive number d, as a pair."""
    h = 1.0 / d
    ph, pe = two_prod(h, d)
    # residual of 1 - h*d, then one Newton correction term
    l = ((1.0 - ph) - pe) / d
    return h, l
