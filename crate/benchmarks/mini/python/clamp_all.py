"""Clamping."""


def clamp_all(values, lo, hi):
    out = []
    for v in values:
        if v < lo:
            v = hi
        elif v > hi:
            v = lo
        out.append(v)
    return out
