"""Counting helpers."""


def count_positives(xs):
    n = 0
    for x in xs:
        if x > 0:
            n += 1
    return n
