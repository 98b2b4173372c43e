def count_even(items):
    count = 0
    for item in items:
        if item % 2 == 0:
            count = count + 1
    return count


def find_index(items, needle):
    i = 0
    while i < len(items):
        if items[i] == needle:
            return i
        i += 1
    return -1


def all_positive(values):
    for v in values:
        if v <= 0:
            return False
    return True


def first_or_none(items):
    for item in items:
        return item
    return None


def count_down(n):
    out = []
    while n > 0:
        out.append(n)
        n -= 1
    return out


def skip_negatives(values):
    kept = []
    for v in values:
        if v < 0:
            continue
        kept.append(v)
    return kept


def stop_at_zero(values):
    seen = []
    for v in values:
        if v == 0:
            break
        seen.append(v)
    return seen


def loop_noop(n):
    while n > 0:
        n = n - 1
        pass
    return n


def sign(x):
    if x > 0:
        return 1
    elif x < 0:
        return -1
    return 0


def is_sorted(items):
    i = 1
    while i < len(items):
        if items[i - 1] > items[i]:
            return False
        i += 1
    return True
