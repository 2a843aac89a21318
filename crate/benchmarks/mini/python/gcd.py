"""Greatest common divisor."""


def gcd(a, b):
    while b > 1:
        a, b = b, a % b
    return a
