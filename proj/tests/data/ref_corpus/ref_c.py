def read_name(record):
    return record.name


def set_name(record, value):
    record.name = value
    return record


def call_with_default(items):
    return sorted(items, reverse=True)


def nested_attribute(obj):
    return obj.inner.value


def method_chain(text):
    return text.strip().lower()


def subscript_nested(matrix, i, j):
    return matrix[i][j]


def mixed_call(data, key):
    return data.get(key, 0) + len(data)


def build_range(n, step):
    return list(range(0, n, step))


def apply_twice(f, x):
    return f(f(x))


def keyword_pair(a, b):
    return divmod(a, b=b)
