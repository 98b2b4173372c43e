#include "g2s/parser.hpp"

#include <cctype>
#include <memory>
#include <utility>

#include "g2s/common.hpp"

namespace g2s {

namespace {

enum class Tok { kName, kNumber, kString, kOp, kNewline, kIndent, kDedent, kEnd };

struct Token {
  Tok kind;
  std::string text;
  int line = 0;
  int col = 0;
};

bool ident_start(char c) {
  return c == '_' || std::isalpha(static_cast<unsigned char>(c)) != 0;
}
bool ident_char(char c) {
  return c == '_' || std::isalnum(static_cast<unsigned char>(c)) != 0;
}

class Tokenizer {
 public:
  explicit Tokenizer(const std::string& src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    bool at_line_start = true;
    while (pos_ < src_.size()) {
      if (at_line_start && paren_depth_ == 0) {
        if (!handle_indentation(out)) break;  // end of input
        at_line_start = false;
        continue;
      }
      const char c = src_[pos_];
      if (c == '\n') {
        advance();
        if (paren_depth_ == 0) {
          out.push_back({Tok::kNewline, "", line_ - 1, col_});
          at_line_start = true;
        }
        continue;
      }
      if (c == ' ' || c == '\r') {
        advance();
        continue;
      }
      if (c == '\t') throw ParseError("tab characters are not supported", line_, col_);
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
        continue;
      }
      if (ident_start(c)) {
        out.push_back(lex_name());
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) != 0) {
        out.push_back(lex_number());
        continue;
      }
      if (c == '\'' || c == '"') {
        out.push_back(lex_string());
        continue;
      }
      out.push_back(lex_operator());
    }
    if (!out.empty() && out.back().kind != Tok::kNewline) {
      out.push_back({Tok::kNewline, "", line_, col_});
    }
    while (indents_.size() > 1) {
      indents_.pop_back();
      out.push_back({Tok::kDedent, "", line_, col_});
    }
    out.push_back({Tok::kEnd, "", line_, col_});
    return out;
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  // Measures leading spaces, skips blank and comment-only lines, and emits
  // INDENT/DEDENT tokens. Returns false when the input is exhausted.
  bool handle_indentation(std::vector<Token>& out) {
    while (true) {
      std::size_t scan = pos_;
      int spaces = 0;
      while (scan < src_.size() && src_[scan] == ' ') {
        ++scan;
        ++spaces;
      }
      if (scan < src_.size() && src_[scan] == '\t') {
        throw ParseError("tab characters are not supported", line_, spaces + 1);
      }
      if (scan >= src_.size()) {
        pos_ = scan;
        return false;
      }
      if (src_[scan] == '\n' || src_[scan] == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
        if (pos_ < src_.size()) advance();  // consume the newline
        if (pos_ >= src_.size()) return false;
        continue;
      }
      while (pos_ < scan) advance();
      if (spaces > indents_.back()) {
        indents_.push_back(spaces);
        out.push_back({Tok::kIndent, "", line_, col_});
      } else {
        while (spaces < indents_.back()) {
          indents_.pop_back();
          out.push_back({Tok::kDedent, "", line_, col_});
        }
        if (spaces != indents_.back()) {
          throw ParseError("inconsistent indentation", line_, col_);
        }
      }
      return true;
    }
  }

  Token lex_name() {
    const int line = line_;
    const int col = col_;
    std::string text;
    while (pos_ < src_.size() && ident_char(src_[pos_])) {
      text.push_back(src_[pos_]);
      advance();
    }
    return {Tok::kName, text, line, col};
  }

  Token lex_number() {
    const int line = line_;
    const int col = col_;
    std::string text;
    auto digits = [&] {
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        text.push_back(src_[pos_]);
        advance();
      }
    };
    digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      text.push_back('.');
      advance();
      digits();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      text.push_back(src_[pos_]);
      advance();
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) {
        text.push_back(src_[pos_]);
        advance();
      }
      digits();
    }
    return {Tok::kNumber, text, line, col};
  }

  Token lex_string() {
    const int line = line_;
    const int col = col_;
    const char quote = src_[pos_];
    std::string text;
    text.push_back(quote);
    advance();
    while (true) {
      if (pos_ >= src_.size() || src_[pos_] == '\n') {
        throw ParseError("unterminated string literal", line, col);
      }
      const char c = src_[pos_];
      text.push_back(c);
      advance();
      if (c == '\\') {
        if (pos_ >= src_.size()) throw ParseError("unterminated string literal", line, col);
        text.push_back(src_[pos_]);
        advance();
        continue;
      }
      if (c == quote) break;
    }
    return {Tok::kString, text, line, col};
  }

  Token lex_operator() {
    static const std::vector<std::string> ops = {
        "**=", "//=", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "%=", "**",
        "//", "(",  ")",  "[",  "]",  "{",  "}",  ",",  ":",  ".",  ";",  "+",
        "-",  "*",  "/",  "%",  "<",  ">",  "=",
    };
    const int line = line_;
    const int col = col_;
    for (const auto& op : ops) {
      if (src_.compare(pos_, op.size(), op) == 0) {
        for (std::size_t i = 0; i < op.size(); ++i) advance();
        if (op == "(" || op == "[" || op == "{") ++paren_depth_;
        if (op == ")" || op == "]" || op == "}") {
          if (paren_depth_ > 0) --paren_depth_;
        }
        return {Tok::kOp, op, line, col};
      }
    }
    throw ParseError(std::string("unexpected character '") + src_[pos_] + "'", line, col);
  }

  const std::string& src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  int paren_depth_ = 0;
  std::vector<int> indents_ = {0};
};

struct TreeNode {
  std::string type;
  std::string attr;
  std::vector<std::unique_ptr<TreeNode>> kids;
};

std::unique_ptr<TreeNode> make_node(std::string type, std::string attr = "") {
  auto n = std::make_unique<TreeNode>();
  n->type = std::move(type);
  n->attr = std::move(attr);
  return n;
}

std::unique_ptr<TreeNode> name_leaf(std::string id) { return make_node("Name", std::move(id)); }

const char* binop_type(const std::string& op) {
  if (op == "+") return "Add";
  if (op == "-") return "Sub";
  if (op == "*") return "Mult";
  if (op == "/") return "Div";
  if (op == "//") return "FloorDiv";
  if (op == "%") return "Mod";
  if (op == "**") return "Pow";
  return nullptr;
}

const char* augop_type(const std::string& op) {
  if (op == "+=") return "Add";
  if (op == "-=") return "Sub";
  if (op == "*=") return "Mult";
  if (op == "/=") return "Div";
  if (op == "//=") return "FloorDiv";
  if (op == "%=") return "Mod";
  if (op == "**=") return "Pow";
  return nullptr;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  std::vector<std::pair<std::unique_ptr<TreeNode>, std::string>> module() {
    std::vector<std::pair<std::unique_ptr<TreeNode>, std::string>> out;
    while (!at(Tok::kEnd)) {
      if (at(Tok::kNewline)) {
        next();
        continue;
      }
      out.push_back(function_def());
    }
    if (out.empty()) throw ContractError("parse: no function definition found");
    return out;
  }

  std::pair<std::unique_ptr<TreeNode>, std::string> function_def() {
    expect_keyword("def");
    const Token name_tok = expect(Tok::kName, "function name");
    auto fn = make_node("FunctionDef");
    fn->kids.push_back(name_leaf(kMaskToken));
    expect_op("(");
    auto params = parameters();
    if (params->kids.empty()) params->attr = "()";  // keep leaf attributes non-empty
    fn->kids.push_back(std::move(params));
    expect_op(")");
    expect_op(":");
    suite(fn->kids);
    return {std::move(fn), name_tok.text};
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    const std::size_t i = std::min(pos_ + ahead, toks_.size() - 1);
    return toks_[i];
  }
  const Token& next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }
  bool at(Tok kind) const { return peek().kind == kind; }
  bool at_op(const char* text) const {
    return peek().kind == Tok::kOp && peek().text == text;
  }
  bool at_keyword(const char* text) const {
    return peek().kind == Tok::kName && peek().text == text;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    const Token& t = peek();
    throw ParseError(msg + " near '" + (t.text.empty() ? "<newline>" : t.text) + "'", t.line,
                     t.col);
  }

  Token expect(Tok kind, const char* what) {
    if (!at(kind)) fail(std::string("expected ") + what);
    return next();
  }
  void expect_op(const char* text) {
    if (!at_op(text)) fail(std::string("expected '") + text + "'");
    next();
  }
  void expect_keyword(const char* text) {
    if (!at_keyword(text)) fail(std::string("expected '") + text + "'");
    next();
  }

  std::unique_ptr<TreeNode> parameters() {
    auto args = make_node("arguments");
    if (at_op(")")) return args;
    while (true) {
      const Token name = expect(Tok::kName, "parameter name");
      args->kids.push_back(make_node("arg", name.text));
      if (at_op("=")) {
        next();
        args->kids.push_back(expression());
      }
      if (at_op(",")) {
        next();
        continue;
      }
      break;
    }
    return args;
  }

  // Either an inline statement list or an indented block.
  void suite(std::vector<std::unique_ptr<TreeNode>>& out) {
    if (!at(Tok::kNewline)) {
      simple_statements(out);
      expect(Tok::kNewline, "end of line");
      return;
    }
    next();  // newline
    if (!at(Tok::kIndent)) fail("expected an indented block");
    next();
    while (!at(Tok::kDedent)) {
      if (at(Tok::kNewline)) {
        next();
        continue;
      }
      statement(out);
    }
    next();  // dedent
  }

  void statement(std::vector<std::unique_ptr<TreeNode>>& out) {
    if (at_keyword("if")) {
      out.push_back(if_statement());
      return;
    }
    if (at_keyword("for")) {
      out.push_back(for_statement());
      return;
    }
    if (at_keyword("while")) {
      out.push_back(while_statement());
      return;
    }
    if (at_keyword("def")) fail("nested function definitions are not supported");
    simple_statements(out);
    expect(Tok::kNewline, "end of line");
  }

  void simple_statements(std::vector<std::unique_ptr<TreeNode>>& out) {
    out.push_back(small_statement());
    while (at_op(";")) {
      next();
      if (at(Tok::kNewline)) break;
      out.push_back(small_statement());
    }
  }

  std::unique_ptr<TreeNode> small_statement() {
    if (at_keyword("return")) {
      next();
      if (at(Tok::kNewline) || at_op(";")) return make_node("Return", "return");
      auto ret = make_node("Return");
      ret->kids.push_back(expression_list());
      return ret;
    }
    if (at_keyword("pass")) {
      next();
      return make_node("Pass", "pass");
    }
    if (at_keyword("break")) {
      next();
      return make_node("Break", "break");
    }
    if (at_keyword("continue")) {
      next();
      return make_node("Continue", "continue");
    }
    auto first = expression_list();
    if (at_op("=")) {
      next();
      auto assign = make_node("Assign");
      assign->kids.push_back(std::move(first));
      assign->kids.push_back(expression_list());
      if (at_op("=")) fail("chained assignment is not supported");
      return assign;
    }
    if (peek().kind == Tok::kOp && augop_type(peek().text) != nullptr) {
      const Token op = next();
      auto aug = make_node("AugAssign");
      aug->kids.push_back(std::move(first));
      aug->kids.push_back(make_node(augop_type(op.text), op.text));
      aug->kids.push_back(expression_list());
      return aug;
    }
    auto expr = make_node("Expr");
    expr->kids.push_back(std::move(first));
    return expr;
  }

  // Consumes the leading 'if' or 'elif'; an elif chain nests as a child If.
  std::unique_ptr<TreeNode> if_statement() {
    next();
    auto node = make_node("If");
    node->kids.push_back(expression());
    expect_op(":");
    suite(node->kids);
    if (at_keyword("elif")) {
      node->kids.push_back(if_statement());
      return node;
    }
    if (at_keyword("else")) {
      next();
      expect_op(":");
      suite(node->kids);
    }
    return node;
  }

  std::unique_ptr<TreeNode> for_statement() {
    expect_keyword("for");
    auto node = make_node("For");
    node->kids.push_back(target_list());
    expect_keyword("in");
    node->kids.push_back(expression_list());
    expect_op(":");
    suite(node->kids);
    if (at_keyword("else")) fail("for/else is not supported");
    return node;
  }

  std::unique_ptr<TreeNode> while_statement() {
    expect_keyword("while");
    auto node = make_node("While");
    node->kids.push_back(expression());
    expect_op(":");
    suite(node->kids);
    if (at_keyword("else")) fail("while/else is not supported");
    return node;
  }

  std::unique_ptr<TreeNode> target_list() {
    auto first = primary();
    if (!at_op(",")) return first;
    auto tup = make_node("Tuple");
    tup->kids.push_back(std::move(first));
    while (at_op(",")) {
      next();
      tup->kids.push_back(primary());
    }
    return tup;
  }

  // expr ("," expr)* -> Tuple when more than one element.
  std::unique_ptr<TreeNode> expression_list() {
    auto first = expression();
    if (!at_op(",")) return first;
    auto tup = make_node("Tuple");
    tup->kids.push_back(std::move(first));
    while (at_op(",")) {
      next();
      if (at(Tok::kNewline) || at_op(")") || at_op("]") || at_op("}")) break;
      tup->kids.push_back(expression());
    }
    return tup;
  }

  std::unique_ptr<TreeNode> expression() { return or_expr(); }

  std::unique_ptr<TreeNode> or_expr() {
    auto left = and_expr();
    if (!at_keyword("or")) return left;
    auto node = make_node("BoolOp");
    node->kids.push_back(std::move(left));
    while (at_keyword("or")) {
      next();
      node->kids.push_back(make_node("Or", "or"));
      node->kids.push_back(and_expr());
    }
    return node;
  }

  std::unique_ptr<TreeNode> and_expr() {
    auto left = not_expr();
    if (!at_keyword("and")) return left;
    auto node = make_node("BoolOp");
    node->kids.push_back(std::move(left));
    while (at_keyword("and")) {
      next();
      node->kids.push_back(make_node("And", "and"));
      node->kids.push_back(not_expr());
    }
    return node;
  }

  std::unique_ptr<TreeNode> not_expr() {
    if (at_keyword("not")) {
      next();
      auto node = make_node("UnaryOp");
      node->kids.push_back(make_node("Not", "not"));
      node->kids.push_back(not_expr());
      return node;
    }
    return comparison();
  }

  std::unique_ptr<TreeNode> comparison() {
    auto left = arithmetic();
    bool any = false;
    auto node = make_node("Compare");
    while (true) {
      std::unique_ptr<TreeNode> op;
      if (at_op("<")) op = make_node("Lt", "<");
      else if (at_op(">")) op = make_node("Gt", ">");
      else if (at_op("<=")) op = make_node("LtE", "<=");
      else if (at_op(">=")) op = make_node("GtE", ">=");
      else if (at_op("==")) op = make_node("Eq", "==");
      else if (at_op("!=")) op = make_node("NotEq", "!=");
      else if (at_keyword("in")) op = make_node("In", "in");
      else if (at_keyword("not") && peek(1).kind == Tok::kName && peek(1).text == "in") {
        next();
        op = make_node("NotIn", "not in");
      } else if (at_keyword("is")) {
        if (peek(1).kind == Tok::kName && peek(1).text == "not") {
          next();
          op = make_node("IsNot", "is not");
        } else {
          op = make_node("Is", "is");
        }
      }
      if (op == nullptr) break;
      next();
      if (!any) {
        node->kids.push_back(std::move(left));
        any = true;
      }
      node->kids.push_back(std::move(op));
      node->kids.push_back(arithmetic());
    }
    return any ? std::move(node) : std::move(left);
  }

  std::unique_ptr<TreeNode> arithmetic() {
    auto left = term();
    while (at_op("+") || at_op("-")) {
      const Token op = next();
      auto node = make_node("BinOp");
      node->kids.push_back(std::move(left));
      node->kids.push_back(make_node(binop_type(op.text), op.text));
      node->kids.push_back(term());
      left = std::move(node);
    }
    return left;
  }

  std::unique_ptr<TreeNode> term() {
    auto left = factor();
    while (at_op("*") || at_op("/") || at_op("//") || at_op("%")) {
      const Token op = next();
      auto node = make_node("BinOp");
      node->kids.push_back(std::move(left));
      node->kids.push_back(make_node(binop_type(op.text), op.text));
      node->kids.push_back(factor());
      left = std::move(node);
    }
    return left;
  }

  std::unique_ptr<TreeNode> factor() {
    if (at_op("+") || at_op("-")) {
      const Token op = next();
      auto node = make_node("UnaryOp");
      node->kids.push_back(make_node(op.text == "+" ? "UAdd" : "USub", op.text));
      node->kids.push_back(factor());
      return node;
    }
    return power();
  }

  std::unique_ptr<TreeNode> power() {
    auto base = primary();
    if (at_op("**")) {
      next();
      auto node = make_node("BinOp");
      node->kids.push_back(std::move(base));
      node->kids.push_back(make_node("Pow", "**"));
      node->kids.push_back(factor());  // right associative
      return node;
    }
    return base;
  }

  std::unique_ptr<TreeNode> primary() {
    auto node = atom();
    while (true) {
      if (at_op("(")) {
        next();
        auto call = make_node("Call");
        call->kids.push_back(std::move(node));
        if (!at_op(")")) call_arguments(call->kids);
        expect_op(")");
        node = std::move(call);
        continue;
      }
      if (at_op("[")) {
        next();
        auto sub = make_node("Subscript");
        sub->kids.push_back(std::move(node));
        sub->kids.push_back(expression_list());
        expect_op("]");
        node = std::move(sub);
        continue;
      }
      if (at_op(".")) {
        next();
        const Token name = expect(Tok::kName, "attribute name");
        auto attr = make_node("Attribute");
        attr->kids.push_back(std::move(node));
        attr->kids.push_back(name_leaf(name.text));
        node = std::move(attr);
        continue;
      }
      break;
    }
    return node;
  }

  void call_arguments(std::vector<std::unique_ptr<TreeNode>>& out) {
    while (true) {
      if (peek().kind == Tok::kName && peek(1).kind == Tok::kOp && peek(1).text == "=") {
        const Token key = next();
        next();  // '='
        auto kw = make_node("keyword");
        kw->kids.push_back(name_leaf(key.text));
        kw->kids.push_back(expression());
        out.push_back(std::move(kw));
      } else {
        out.push_back(expression());
      }
      if (at_op(",")) {
        next();
        continue;
      }
      break;
    }
  }

  std::unique_ptr<TreeNode> atom() {
    if (at(Tok::kName)) {
      const Token t = next();
      if (t.text == "True" || t.text == "False" || t.text == "None") {
        return make_node("NameConstant", t.text);
      }
      if (t.text == "and" || t.text == "or" || t.text == "not" || t.text == "in" ||
          t.text == "is" || t.text == "def" || t.text == "return" || t.text == "if" ||
          t.text == "else" || t.text == "elif" || t.text == "for" || t.text == "while" ||
          t.text == "pass" || t.text == "break" || t.text == "continue") {
        throw ParseError("unexpected keyword '" + t.text + "'", t.line, t.col);
      }
      return name_leaf(t.text);
    }
    if (at(Tok::kNumber)) return make_node("Num", next().text);
    if (at(Tok::kString)) return make_node("Str", next().text);
    if (at_op("(")) {
      next();
      if (at_op(")")) {
        next();
        return make_node("Tuple", "()");
      }
      auto inner = expression_list();
      expect_op(")");
      return inner;
    }
    if (at_op("[")) {
      next();
      if (at_op("]")) {
        next();
        return make_node("List", "[]");
      }
      auto list = make_node("List");
      while (true) {
        list->kids.push_back(expression());
        if (at_op(",")) {
          next();
          if (at_op("]")) break;  // trailing comma
          continue;
        }
        break;
      }
      expect_op("]");
      return list;
    }
    if (at_op("{")) {
      next();
      if (at_op("}")) {
        next();
        return make_node("Dict", "{}");
      }
      auto dict = make_node("Dict");
      while (true) {
        dict->kids.push_back(expression());
        expect_op(":");
        dict->kids.push_back(expression());
        if (at_op(",")) {
          next();
          continue;
        }
        break;
      }
      expect_op("}");
      return dict;
    }
    fail("expected an expression");
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

void flatten(const TreeNode& node, std::int32_t depth, FunctionAst& out) {
  const auto id = static_cast<std::int32_t>(out.nodes.size());
  out.nodes.push_back({id, depth, node.type, node.kids.empty() ? node.attr : std::string()});
  if (node.kids.empty()) {
    out.leaf_ids.push_back(id);
    return;
  }
  for (const auto& kid : node.kids) {
    const auto child_id = static_cast<std::int32_t>(out.nodes.size());
    out.ast_edges.emplace_back(id, child_id);
    flatten(*kid, depth + 1, out);
  }
}

bool blank_input(const std::string& source) {
  for (char c : source) {
    if (c != ' ' && c != '\n' && c != '\r' && c != '\t') return false;
  }
  return true;
}

}  // namespace

FunctionAst parse_function(const std::string& source) {
  if (blank_input(source)) throw ContractError("parse_function: empty input");
  Tokenizer tokenizer(source);
  Parser parser(tokenizer.run());
  auto functions = parser.module();
  if (functions.size() != 1) {
    throw ParseError("expected exactly one function definition, found " +
                         std::to_string(functions.size()),
                     1, 1);
  }
  FunctionAst ast;
  ast.name = functions[0].second;
  flatten(*functions[0].first, 0, ast);
  return ast;
}

std::vector<FunctionAst> parse_module(const std::string& source) {
  if (blank_input(source)) throw ContractError("parse_module: empty input");
  Tokenizer tokenizer(source);
  Parser parser(tokenizer.run());
  std::vector<FunctionAst> out;
  for (auto& [tree, name] : parser.module()) {
    FunctionAst ast;
    ast.name = name;
    flatten(*tree, 0, ast);
    out.push_back(std::move(ast));
  }
  return out;
}

const std::vector<std::string>& ast_node_types() {
  static const std::vector<std::string> kTypes = {
      "FunctionDef", "arguments", "arg",        "Name",   "Return",  "Assign",
      "AugAssign",   "If",        "For",        "While",  "Expr",    "Pass",
      "Break",       "Continue",  "BoolOp",     "UnaryOp", "BinOp",  "Compare",
      "Call",        "keyword",   "Attribute",  "Subscript", "Num",  "Str",
      "NameConstant", "List",     "Tuple",      "Dict",   "Add",     "Sub",
      "Mult",        "Div",       "FloorDiv",   "Mod",    "Pow",     "UAdd",
      "USub",        "Not",       "And",        "Or",     "Eq",      "NotEq",
      "Lt",          "LtE",       "Gt",         "GtE",    "In",      "NotIn",
      "Is",          "IsNot",
  };
  return kTypes;
}

}  // namespace g2s
