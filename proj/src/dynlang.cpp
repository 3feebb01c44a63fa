#include "bganlab/dynlang.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <set>

#include "bganlab/error.hpp"

namespace bganlab::dynlang {

const char* to_string(BinOp op) {
  switch (op) {
    case BinOp::add: return "+";
    case BinOp::sub: return "-";
    case BinOp::mul: return "*";
    case BinOp::div: return "/";
    case BinOp::pow: return "^";
    case BinOp::gt: return ">";
    case BinOp::lt: return "<";
    case BinOp::ge: return ">=";
    case BinOp::le: return "<=";
  }
  return "?";
}

const char* to_string(Func f) { return f == Func::exp ? "exp" : "ln"; }

Expr Expr::number(double v) {
  Expr e;
  e.kind = ExprKind::num;
  e.value = v;
  return e;
}

Expr Expr::variable(std::string n) {
  Expr e;
  e.kind = ExprKind::var;
  e.name = std::move(n);
  return e;
}

Expr Expr::negate(Expr x) {
  Expr e;
  e.kind = ExprKind::unary;
  e.args.push_back(std::move(x));
  return e;
}

Expr Expr::binary(BinOp op, Expr l, Expr r) {
  Expr e;
  e.kind = ExprKind::binary;
  e.op = op;
  e.args.push_back(std::move(l));
  e.args.push_back(std::move(r));
  return e;
}

Expr Expr::call(Func f, Expr arg) {
  Expr e;
  e.kind = ExprKind::call;
  e.func = f;
  e.args.push_back(std::move(arg));
  return e;
}

// ---------------------------------------------------------------- lexer

namespace {

enum class Tok { ident, number, kw_if, kw_else, kw_emit, kw_exp, kw_ln, sym, end };

struct Token {
  Tok kind;
  std::string text;
  double value = 0.0;
  int line = 1, col = 1;
};

bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }
bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (i < src.size()) {
    const char c = src[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      advance(1);
      continue;
    }
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    Token t{Tok::sym, "", 0.0, line, col};
    if (is_ident_start(c)) {
      std::size_t j = i;
      while (j < src.size() && is_ident_char(src[j])) ++j;
      t.text = std::string(src.substr(i, j - i));
      t.kind = t.text == "if"     ? Tok::kw_if
               : t.text == "else" ? Tok::kw_else
               : t.text == "emit" ? Tok::kw_emit
               : t.text == "exp"  ? Tok::kw_exp
               : t.text == "ln"   ? Tok::kw_ln
                                  : Tok::ident;
      advance(j - i);
    } else if (is_digit(c)) {
      std::size_t j = i;
      while (j < src.size() && is_digit(src[j])) ++j;
      if (j < src.size() && src[j] == '.') {
        ++j;
        if (j >= src.size() || !is_digit(src[j])) throw ParseError("malformed number", line, col);
        while (j < src.size() && is_digit(src[j])) ++j;
      }
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
        if (k >= src.size() || !is_digit(src[k])) throw ParseError("malformed number", line, col);
        while (k < src.size() && is_digit(src[k])) ++k;
        j = k;
      }
      t.kind = Tok::number;
      t.text = std::string(src.substr(i, j - i));
      const auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.value);
      if (res.ec != std::errc() || !std::isfinite(t.value)) throw ParseError("number out of range", line, col);
      advance(j - i);
    } else {
      static constexpr std::string_view two[] = {">=", "<="};
      bool matched = false;
      for (auto op : two) {
        if (src.substr(i, 2) == op) {
          t.text = std::string(op);
          advance(2);
          matched = true;
          break;
        }
      }
      if (!matched) {
        if (std::string_view("=;(){}+-*/^<>").find(c) == std::string_view::npos)
          throw ParseError(std::string("unexpected character '") + c + "'", line, col);
        t.text = std::string(1, c);
        advance(1);
      }
    }
    out.push_back(std::move(t));
  }
  out.push_back({Tok::end, "", 0.0, line, col});
  return out;
}

// ---------------------------------------------------------------- parser

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  Program program() {
    Program p;
    p.body = stmts_until(Tok::end);
    return p;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  bool at_sym(std::string_view s) const { return peek().kind == Tok::sym && peek().text == s; }

  [[noreturn]] void fail(const std::string& what) const {
    const Token& t = peek();
    const std::string found = t.kind == Tok::end ? "end of input" : "'" + t.text + "'";
    throw ParseError("expected " + what + ", found " + found, t.line, t.col);
  }

  void expect_sym(std::string_view s) {
    if (!at_sym(s)) fail("'" + std::string(s) + "'");
    ++pos_;
  }

  std::vector<Stmt> stmts_until(Tok end_kind, std::string_view end_sym = {}) {
    std::vector<Stmt> out;
    auto at_end = [&] { return end_sym.empty() ? peek().kind == end_kind : at_sym(end_sym); };
    do {
      out.push_back(stmt());
    } while (!at_end() && peek().kind != Tok::end);
    if (!at_end()) fail("'" + std::string(end_sym) + "'");
    return out;
  }

  std::vector<Stmt> block() {
    expect_sym("{");
    auto body = stmts_until(Tok::sym, "}");
    expect_sym("}");
    return body;
  }

  Stmt stmt() {
    Stmt s;
    const Token& t = peek();
    if (t.kind == Tok::ident) {
      s.kind = StmtKind::assign;
      s.target = t.text;
      ++pos_;
      expect_sym("=");
      s.expr = expr();
      expect_sym(";");
    } else if (t.kind == Tok::kw_if) {
      s.kind = StmtKind::if_;
      ++pos_;
      expect_sym("(");
      s.expr = expr();
      expect_sym(")");
      s.then_body = block();
      if (peek().kind == Tok::kw_else) {
        ++pos_;
        s.else_body = block();
      }
    } else if (t.kind == Tok::kw_emit) {
      s.kind = StmtKind::emit;
      ++pos_;
      if (peek().kind != Tok::ident || peek().text != "spike") fail("'spike'");
      ++pos_;
      expect_sym(";");
    } else {
      fail("statement");
    }
    return s;
  }

  Expr expr() {
    Expr lhs = additive();
    for (;;) {
      std::optional<BinOp> op;
      if (at_sym(">")) op = BinOp::gt;
      else if (at_sym("<")) op = BinOp::lt;
      else if (at_sym(">=")) op = BinOp::ge;
      else if (at_sym("<=")) op = BinOp::le;
      if (!op) return lhs;
      ++pos_;
      lhs = Expr::binary(*op, std::move(lhs), additive());
    }
  }

  Expr additive() {
    Expr lhs = term();
    while (at_sym("+") || at_sym("-")) {
      const BinOp op = peek().text == "+" ? BinOp::add : BinOp::sub;
      ++pos_;
      lhs = Expr::binary(op, std::move(lhs), term());
    }
    return lhs;
  }

  Expr term() {
    Expr lhs = unary();
    while (at_sym("*") || at_sym("/")) {
      const BinOp op = peek().text == "*" ? BinOp::mul : BinOp::div;
      ++pos_;
      lhs = Expr::binary(op, std::move(lhs), unary());
    }
    return lhs;
  }

  Expr unary() {
    if (at_sym("-")) {
      ++pos_;
      return Expr::negate(unary());
    }
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (at_sym("^")) {
      ++pos_;
      return Expr::binary(BinOp::pow, std::move(base), unary());
    }
    return base;
  }

  Expr primary() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::number:
        ++pos_;
        return Expr::number(t.value);
      case Tok::ident:
        ++pos_;
        return Expr::variable(t.text);
      case Tok::kw_exp:
      case Tok::kw_ln: {
        const Func f = t.kind == Tok::kw_exp ? Func::exp : Func::ln;
        ++pos_;
        expect_sym("(");
        Expr arg = expr();
        expect_sym(")");
        return Expr::call(f, std::move(arg));
      }
      default:
        break;
    }
    if (at_sym("(")) {
      ++pos_;
      Expr e = expr();
      expect_sym(")");
      return e;
    }
    fail("expression");
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------- printer

// Binding strength used to decide parenthesization.
int prec(const Expr& e) {
  switch (e.kind) {
    case ExprKind::num:
    case ExprKind::var:
    case ExprKind::call:
      return 6;
    case ExprKind::unary:
      return 4;
    case ExprKind::binary:
      switch (e.op) {
        case BinOp::pow: return 5;
        case BinOp::mul:
        case BinOp::div: return 3;
        case BinOp::add:
        case BinOp::sub: return 2;
        default: return 1;
      }
  }
  return 0;
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void print_expr(const Expr& e, std::string& out) {
  auto wrapped = [&](const Expr& child, bool parens) {
    if (parens) out += '(';
    print_expr(child, out);
    if (parens) out += ')';
  };
  switch (e.kind) {
    case ExprKind::num:
      out += format_number(e.value);
      return;
    case ExprKind::var:
      out += e.name;
      return;
    case ExprKind::call:
      out += to_string(e.func);
      out += '(';
      print_expr(e.args[0], out);
      out += ')';
      return;
    case ExprKind::unary:
      out += '-';
      wrapped(e.args[0], prec(e.args[0]) < 4);
      return;
    case ExprKind::binary: {
      const int p = prec(e);
      if (e.op == BinOp::pow) {
        wrapped(e.args[0], prec(e.args[0]) < 6);
        out += '^';
        wrapped(e.args[1], prec(e.args[1]) < 4);
        return;
      }
      wrapped(e.args[0], prec(e.args[0]) < p);
      out += ' ';
      out += to_string(e.op);
      out += ' ';
      wrapped(e.args[1], prec(e.args[1]) <= p);
      return;
    }
  }
}

void print_stmts(const std::vector<Stmt>& body, int depth, std::string& out) {
  const std::string pad(2 * depth, ' ');
  for (const Stmt& s : body) {
    out += pad;
    switch (s.kind) {
      case StmtKind::assign:
        out += s.target + " = ";
        print_expr(s.expr, out);
        out += ";\n";
        break;
      case StmtKind::emit:
        out += "emit spike;\n";
        break;
      case StmtKind::if_:
        out += "if (";
        print_expr(s.expr, out);
        out += ") {\n";
        print_stmts(s.then_body, depth + 1, out);
        out += pad + "}";
        if (!s.else_body.empty()) {
          out += " else {\n";
          print_stmts(s.else_body, depth + 1, out);
          out += pad + "}";
        }
        out += '\n';
        break;
    }
  }
}

void collect_vars(const Expr& e, std::vector<std::string>& out) {
  if (e.kind == ExprKind::var) {
    out.push_back(e.name);
    return;
  }
  for (const Expr& a : e.args) collect_vars(a, out);
}

void count_expr(const Expr& e, std::array<std::size_t, 8>& h) {
  switch (e.kind) {
    case ExprKind::num: ++h[3]; break;
    case ExprKind::var: ++h[4]; break;
    case ExprKind::binary: ++h[5]; break;
    case ExprKind::unary: ++h[6]; break;
    case ExprKind::call: ++h[7]; break;
  }
  for (const Expr& a : e.args) count_expr(a, h);
}

void count_stmts(const std::vector<Stmt>& body, std::array<std::size_t, 8>& h) {
  for (const Stmt& s : body) {
    switch (s.kind) {
      case StmtKind::assign:
        ++h[0];
        count_expr(s.expr, h);
        break;
      case StmtKind::if_:
        ++h[1];
        count_expr(s.expr, h);
        count_stmts(s.then_body, h);
        count_stmts(s.else_body, h);
        break;
      case StmtKind::emit:
        ++h[2];
        break;
    }
  }
}

// ---------------------------------------------------------------- DFG

constexpr long kExternal = -1;

class DfgBuilder {
 public:
  Dfg run(const Program& p) {
    walk(p.body, env_);
    Dfg g;
    for (const auto& [src, dst] : edges_) g.edges.emplace_back(resolve(src), dst);
    g.nodes = std::move(sites_);
    for (const std::string& name : external_order_) g.nodes.push_back({DfgNodeKind::external, name, -1});
    std::sort(g.edges.begin(), g.edges.end());
    g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
    return g;
  }

 private:
  using Env = std::map<std::string, std::set<long>>;

  // Sources are site node indices (>= 0) or -(2 + external ordinal).
  std::size_t resolve(long src) const {
    if (src >= 0) return static_cast<std::size_t>(src);
    return sites_.size() + static_cast<std::size_t>(-(src + 2));
  }

  long external_id(const std::string& name) {
    auto it = external_index_.find(name);
    if (it == external_index_.end()) {
      it = external_index_.emplace(name, external_order_.size()).first;
      external_order_.push_back(name);
    }
    return -(2 + static_cast<long>(it->second));
  }

  void uses(const Expr& e, std::size_t site, const Env& env) {
    std::vector<std::string> vars;
    collect_vars(e, vars);
    for (const std::string& v : vars) {
      const auto it = env.find(v);
      if (it == env.end()) {
        edges_.insert({external_id(v), site});
        continue;
      }
      for (long d : it->second) edges_.insert({d == kExternal ? external_id(v) : d, site});
    }
  }

  void walk(const std::vector<Stmt>& body, Env& env) {
    for (const Stmt& s : body) {
      const long stmt_index = next_stmt_++;
      switch (s.kind) {
        case StmtKind::assign: {
          const std::size_t site = add_site(DfgNodeKind::definition, s.target, stmt_index);
          uses(s.expr, site, env);
          env[s.target] = {static_cast<long>(site)};
          break;
        }
        case StmtKind::emit:
          break;
        case StmtKind::if_: {
          const std::size_t site = add_site(DfgNodeKind::condition, "", stmt_index);
          uses(s.expr, site, env);
          Env then_env = env;
          Env else_env = env;
          walk(s.then_body, then_env);
          walk(s.else_body, else_env);
          Env joined;
          for (const Env* side : {&then_env, &else_env})
            for (const auto& [name, defs] : *side) joined[name].insert(defs.begin(), defs.end());
          for (auto& [name, defs] : joined)
            if (!then_env.count(name) || !else_env.count(name)) defs.insert(kExternal);
          env = std::move(joined);
          break;
        }
      }
    }
  }

  std::size_t add_site(DfgNodeKind kind, const std::string& name, long stmt_index) {
    sites_.push_back({kind, name, stmt_index});
    return sites_.size() - 1;
  }

  Env env_;
  std::vector<DfgNode> sites_;
  std::map<std::string, std::size_t> external_index_;
  std::vector<std::string> external_order_;
  std::set<std::pair<long, std::size_t>> edges_;
  long next_stmt_ = 0;
};

// ---------------------------------------------------------------- CFG

class CfgBuilder {
 public:
  Cfg run(const Program& p) {
    new_block();  // entry
    const std::size_t first = new_block();
    edge(0, first);
    const std::size_t last = walk(p.body, first);
    const std::size_t exit = new_block();
    edge(last, exit);
    Cfg g;
    g.blocks = std::move(blocks_);
    g.edges.assign(edges_.begin(), edges_.end());
    return g;
  }

 private:
  std::size_t new_block() {
    blocks_.emplace_back();
    return blocks_.size() - 1;
  }
  void edge(std::size_t a, std::size_t b) { edges_.insert({a, b}); }

  std::size_t walk(const std::vector<Stmt>& body, std::size_t cur) {
    for (const Stmt& s : body) {
      blocks_[cur].push_back(next_stmt_++);
      if (s.kind != StmtKind::if_) continue;
      const std::size_t then_b = new_block();
      edge(cur, then_b);
      const std::size_t then_end = walk(s.then_body, then_b);
      std::size_t else_end = cur;
      if (!s.else_body.empty()) {
        const std::size_t else_b = new_block();
        edge(cur, else_b);
        else_end = walk(s.else_body, else_b);
      }
      const std::size_t join = new_block();
      edge(then_end, join);
      edge(else_end, join);
      cur = join;
    }
    return cur;
  }

  std::vector<std::vector<std::size_t>> blocks_;
  std::set<std::pair<std::size_t, std::size_t>> edges_;
  std::size_t next_stmt_ = 0;
};

// ---------------------------------------------------------------- templates

// Shortest round-trip literal; negative values are written as a negation.
std::string lit(double v) {
  if (std::signbit(v) && v != 0.0) return "-" + format_number(-v);
  return format_number(v == 0.0 ? 0.0 : v);
}

}  // namespace

Program parse(std::string_view source) { return Parser(lex(source)).program(); }

std::string print(const Program& p) {
  std::string out;
  print_stmts(p.body, 0, out);
  return out;
}

std::string print(const Expr& e) {
  std::string out;
  print_expr(e, out);
  return out;
}

Dfg build_dfg(const Program& p) { return DfgBuilder().run(p); }

Cfg build_cfg(const Program& p) { return CfgBuilder().run(p); }

std::array<std::size_t, 8> ast_kind_histogram(const Program& p) {
  std::array<std::size_t, 8> h{};
  count_stmts(p.body, h);
  return h;
}

std::array<double, CodeSummary::kWidth> CodeSummary::as_vector() const {
  std::array<double, kWidth> v{};
  for (std::size_t i = 0; i < 8; ++i) v[i] = static_cast<double>(ast_kind_histogram[i]);
  v[8] = static_cast<double>(dfg_edge_count);
  v[9] = static_cast<double>(cfg_block_count);
  v[10] = static_cast<double>(cfg_edge_count);
  return v;
}

CodeSummary summarize(const Program& p, const Dfg& dfg, const Cfg& cfg) {
  CodeSummary s;
  s.ast_kind_histogram = ast_kind_histogram(p);
  s.dfg_edge_count = dfg.edges.size();
  s.cfg_block_count = cfg.blocks.size();
  s.cfg_edge_count = cfg.edges.size();
  return s;
}

DynProgram analyze(std::string_view source) {
  DynProgram d;
  d.source = std::string(source);
  d.ast = parse(source);
  d.dfg = build_dfg(d.ast);
  d.cfg = build_cfg(d.ast);
  d.summary = summarize(d.ast, d.dfg, d.cfg);
  return d;
}

const char* to_string(CodeKind k) {
  switch (k) {
    case CodeKind::hh: return "hh";
    case CodeKind::lif: return "lif";
    case CodeKind::synapse: return "synapse";
    case CodeKind::passive: return "passive";
  }
  return "?";
}

CodeKind code_kind_from_string(std::string_view s) {
  for (CodeKind k : {CodeKind::hh, CodeKind::lif, CodeKind::synapse, CodeKind::passive})
    if (s == to_string(k)) return k;
  throw ParamError("unknown code kind '" + std::string(s) + "'");
}

std::string emit_code(const dyn::HhParams& p) {
  p.validate();
  std::string s;
  s += "# hh membrane, one step of length dt\n";
  s += "am = 0.1 * (v + 40) / (1 - exp(-(v + 40) / 10));\n";
  s += "bm = 4 * exp(-(v + 65) / 18);\n";
  s += "ah = 0.07 * exp(-(v + 65) / 20);\n";
  s += "bh = 1 / (1 + exp(-(v + 35) / 10));\n";
  s += "an = 0.01 * (v + 55) / (1 - exp(-(v + 55) / 10));\n";
  s += "bn = 0.125 * exp(-(v + 65) / 80);\n";
  s += "m = m + dt * (am * (1 - m) - bm * m);\n";
  s += "h = h + dt * (ah * (1 - h) - bh * h);\n";
  s += "n = n + dt * (an * (1 - n) - bn * n);\n";
  s += "i_na = " + lit(p.gbar_na) + " * m^3 * h * (v - " + lit(p.e_na) + ");\n";
  s += "i_k = " + lit(p.gbar_k) + " * n^4 * (v - " + lit(p.e_k) + ");\n";
  s += "i_leak = " + lit(p.gbar_leak) + " * (v - " + lit(p.e_leak) + ");\n";
  s += "v = v + dt * (i_inj - i_na - i_k - i_leak) / " + lit(p.c_m) + ";\n";
  return s;
}

std::string emit_code(const dyn::LifParams& p) {
  p.validate();
  std::string s;
  s += "# lif membrane, exact update over dt\n";
  s += "v_inf = " + lit(p.e_leak) + " + i_inj / " + lit(p.gbar_leak) + ";\n";
  s += "v = v_inf + (v - v_inf) * exp(-dt / " + lit(p.tau_m()) + ");\n";
  s += "if (v > " + lit(p.v_thresh) + ") {\n";
  s += "  emit spike;\n";
  s += "  v = " + lit(p.v_reset) + ";\n";
  s += "}\n";
  return s;
}

std::string emit_code(const dyn::SynParams& p) {
  p.validate();
  std::string s;
  s += "# double-exponential synapse\n";
  s += "if (pre_spike > 0) {\n";
  s += "  a = a + 1;\n";
  s += "  b = b + 1;\n";
  s += "}\n";
  s += "g = " + lit(p.g_max) + " * w * (b - a);\n";
  s += "i_syn = g * (v_post - " + lit(p.e_syn) + ");\n";
  s += "a = a * exp(-dt / " + lit(p.tau_rise) + ");\n";
  s += "b = b * exp(-dt / " + lit(p.tau_decay) + ");\n";
  return s;
}

std::string emit_passive_code(const dyn::HhParams& p) {
  std::string s;
  s += "# passive compartment\n";
  s += "i_leak = " + lit(p.gbar_leak) + " * (v - " + lit(p.e_leak) + ");\n";
  s += "v = v + dt * (i_inj + i_axial - i_leak) / " + lit(p.c_m) + ";\n";
  return s;
}

}  // namespace bganlab::dynlang
