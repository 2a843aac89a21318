"""Clamping."""


def clamp_all(values, lo, hi):
    out = []
    for v in values:
        if v < lo:
            v = lo
        elif v > hi:
            v = hi
        out.append(v)
    return out
