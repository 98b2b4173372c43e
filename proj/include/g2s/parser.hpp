#pragma once

#include <string>
#include <vector>

#include "g2s/ast.hpp"

namespace g2s {

// Recursive-descent parser for the Python function subset the datasets use:
// def / return / assign / augmented assign / if / elif / else / for / while /
// pass / break / continue, and expressions over names, numbers, strings,
// True/False/None, lists, tuples, dicts, calls with keyword arguments,
// attributes, subscripts, boolean and arithmetic operators, comparisons.
//
// Tree conventions, chosen so every leaf carries a non-empty attribute and
// children appear in source token order:
//   FunctionDef -> [Name(<MASK>), arguments, body...]
//   arguments   -> [arg..., each default following its arg]
//   Attribute   -> [value, Name(attr)]
//   keyword     -> [Name(key), value]
//   BinOp/UnaryOp/BoolOp/Compare interleave operator leaves (Add, Not, ...)
//   whose attribute is the operator token text.
//   Childless statements (pass, break, continue, bare return) carry their
//   keyword as the attribute; empty containers carry their bracket text.
//
// Throws ParseError for inputs outside the subset and ContractError for
// blank input.
FunctionAst parse_function(const std::string& source);

// Parses a file of top-level function definitions (blank lines and comments
// allowed between them). Throws ParseError on the first offending construct.
std::vector<FunctionAst> parse_module(const std::string& source);

// Every node type the parser can emit; the node-type vocabulary is built
// from this closed set.
const std::vector<std::string>& ast_node_types();

}  // namespace g2s
