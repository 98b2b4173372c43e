#!/usr/bin/env python3
"""Independent AST-walk oracle for the reference corpus.

Walks CPython's own ast for every function in a corpus directory and counts
nodes and leaves under the same tree conventions the C++ parser documents
(function-name leaf, operator leaves, attribute/keyword name leaves, empty
containers and empty parameter lists as leaves). The output is frozen into
tests/data/ref_corpus_counts.txt and compared against the C++ parser.

Usage: ast_counts.py <corpus_dir> > counts.txt
"""

import ast
import sys
from pathlib import Path


def count(node):
    """Returns (nodes, leaves) for one expression/statement node."""
    if isinstance(node, ast.FunctionDef):
        n, l = 2, 1  # FunctionDef + masked name leaf
        n2, l2 = count_arguments(node.args)
        n, l = n + n2, l + l2
        for stmt in node.body:
            n2, l2 = count(stmt)
            n, l = n + n2, l + l2
        return n, l
    if isinstance(node, ast.Return):
        if node.value is None:
            return 1, 1
        n, l = count(node.value)
        return n + 1, l
    if isinstance(node, ast.Assign):
        assert len(node.targets) == 1, "chained assignment not in the subset"
        n1, l1 = count(node.targets[0])
        n2, l2 = count(node.value)
        return n1 + n2 + 1, l1 + l2
    if isinstance(node, ast.AugAssign):
        n1, l1 = count(node.target)
        n2, l2 = count(node.value)
        return n1 + n2 + 2, l1 + l2 + 1  # + op leaf
    if isinstance(node, (ast.If, ast.While)):
        n, l = count(node.test)
        n += 1
        for stmt in node.body + node.orelse:
            n2, l2 = count(stmt)
            n, l = n + n2, l + l2
        return n, l
    if isinstance(node, ast.For):
        assert not node.orelse, "for/else not in the subset"
        n1, l1 = count(node.target)
        n2, l2 = count(node.iter)
        n, l = n1 + n2 + 1, l1 + l2
        for stmt in node.body:
            n2, l2 = count(stmt)
            n, l = n + n2, l + l2
        return n, l
    if isinstance(node, ast.Expr):
        n, l = count(node.value)
        return n + 1, l
    if isinstance(node, (ast.Pass, ast.Break, ast.Continue)):
        return 1, 1
    if isinstance(node, ast.BoolOp):
        n, l = 1 + (len(node.values) - 1), len(node.values) - 1
        for v in node.values:
            n2, l2 = count(v)
            n, l = n + n2, l + l2
        return n, l
    if isinstance(node, ast.UnaryOp):
        n, l = count(node.operand)
        return n + 2, l + 1
    if isinstance(node, ast.BinOp):
        n1, l1 = count(node.left)
        n2, l2 = count(node.right)
        return n1 + n2 + 2, l1 + l2 + 1
    if isinstance(node, ast.Compare):
        n, l = 1 + len(node.ops), len(node.ops)
        for v in [node.left] + node.comparators:
            n2, l2 = count(v)
            n, l = n + n2, l + l2
        return n, l
    if isinstance(node, ast.Call):
        n, l = count(node.func)
        n += 1
        for arg in node.args:
            n2, l2 = count(arg)
            n, l = n + n2, l + l2
        for kw in node.keywords:
            assert kw.arg is not None, "**kwargs not in the subset"
            n2, l2 = count(kw.value)
            n, l = n + n2 + 2, l + l2 + 1  # keyword node + key name leaf
        return n, l
    if isinstance(node, ast.Attribute):
        n, l = count(node.value)
        return n + 2, l + 1  # Attribute + attr name leaf
    if isinstance(node, ast.Subscript):
        n1, l1 = count(node.value)
        n2, l2 = count(node.slice)
        return n1 + n2 + 1, l1 + l2
    if isinstance(node, (ast.Name, ast.Constant)):
        return 1, 1
    if isinstance(node, (ast.List, ast.Tuple)):
        if not node.elts:
            return 1, 1  # bracket-text leaf
        n, l = 1, 0
        for e in node.elts:
            n2, l2 = count(e)
            n, l = n + n2, l + l2
        return n, l
    if isinstance(node, ast.Dict):
        if not node.keys:
            return 1, 1
        n, l = 1, 0
        for e in list(node.keys) + list(node.values):
            n2, l2 = count(e)
            n, l = n + n2, l + l2
        return n, l
    raise AssertionError(f"node type outside the subset: {type(node).__name__}")


def count_arguments(args):
    assert not args.posonlyargs and not args.kwonlyargs
    assert args.vararg is None and args.kwarg is None
    if not args.args and not args.defaults:
        return 1, 1  # "()" leaf
    n, l = 1, 0
    n += len(args.args)
    l += len(args.args)
    for d in args.defaults:
        n2, l2 = count(d)
        n, l = n + n2, l + l2
    return n, l


def main():
    corpus = Path(sys.argv[1])
    for path in sorted(corpus.glob("*.py")):
        tree = ast.parse(path.read_text())
        for item in tree.body:
            assert isinstance(item, ast.FunctionDef), "top level must be function defs"
            nodes, leaves = count(item)
            print(f"{path.name}:{item.name} {nodes} {leaves}")


if __name__ == "__main__":
    main()
