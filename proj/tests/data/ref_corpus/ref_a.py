def get_mean(x):
    return sum(x) / len(x)


def get_total(values):
    total = 0
    for v in values:
        total += v
    return total


def scale_value(value, factor):
    return value * factor


def min_pair(a, b):
    if a < b:
        return a
    return b


def clamp(x, lo, hi):
    if x < lo:
        return lo
    elif x > hi:
        return hi
    else:
        return x


def square(x):
    return x ** 2


def half_floor(n):
    return n // 2


def remainder(n, d):
    return n % d


def negate(x):
    return -x


def identity(x):
    return x
