def make_point(x, y):
    return {'x': x, 'y': y}


def empty_containers():
    return [], {}, ()


def pair_list(a, b):
    return [a, b, [a, b]]


def swap(pair):
    a, b = pair
    return b, a


def scale_all(values, factor=2):
    out = []
    for v in values:
        out.append(v * factor)
    return out


def update_counts(counts, key):
    counts[key] = counts.get(key, 0) + 1
    return counts


def augmented_ops(x, y):
    x += y
    x -= 1
    x *= 2
    x /= 3
    x //= 2
    x %= 7
    x **= 2
    return x


def merge_pairs(keys, values):
    table = {}
    i = 0
    while i < len(keys):
        table[keys[i]] = values[i]
        i += 1
    return table


def constants():
    return [True, False, None, 1.5, 2e3, 'text']


def tuple_math(point):
    x, y = point
    return (x * x + y * y) ** 0.5
