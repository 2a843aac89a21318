"""Maximum contiguous sum."""


def max_sublist_sum(xs):
    best = xs[0]
    cur = 0
    for x in xs:
        cur = max(x, cur + x)
        best = max(best, x)
    return best
