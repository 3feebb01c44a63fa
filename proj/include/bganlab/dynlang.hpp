#pragma once

// DynLang: a loop-free imperative language describing one integration step of
// a node's dynamics. Programs are generated from model parameters, parsed to
// an AST, and reduced to data-flow / control-flow graphs and a fixed-length
// summary used as node features.

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bganlab/dyn_core.hpp"

namespace bganlab::dynlang {

enum class ExprKind { num, var, unary, binary, call };
enum class BinOp { add, sub, mul, div, pow, gt, lt, ge, le };
enum class Func { exp, ln };

const char* to_string(BinOp op);
const char* to_string(Func f);

struct Expr {
  ExprKind kind = ExprKind::num;
  double value = 0.0;  // num; always >= 0 (negation is a unary node)
  std::string name;    // var
  BinOp op = BinOp::add;
  Func func = Func::exp;
  std::vector<Expr> args;  // unary: 1, binary: 2, call: 1

  static Expr number(double v);
  static Expr variable(std::string n);
  static Expr negate(Expr e);
  static Expr binary(BinOp op, Expr l, Expr r);
  static Expr call(Func f, Expr arg);

  bool operator==(const Expr&) const = default;
};

enum class StmtKind { assign, if_, emit };

struct Stmt {
  StmtKind kind = StmtKind::assign;
  std::string target;  // assign
  Expr expr;           // assign value, or if condition
  std::vector<Stmt> then_body;
  std::vector<Stmt> else_body;  // empty when there is no else branch

  bool operator==(const Stmt&) const = default;
};

struct Program {
  std::vector<Stmt> body;
  bool operator==(const Program&) const = default;
};

/// Throws ParseError with the 1-based position of the first offending token.
Program parse(std::string_view source);

/// Canonical source: one statement per line, two-space indentation, minimal
/// parentheses, numbers in shortest round-trip form.
std::string print(const Program& p);
std::string print(const Expr& e);

enum class DfgNodeKind { definition, condition, external };

struct DfgNode {
  DfgNodeKind kind;
  std::string name;  // defined variable, or external input name; empty for conditions
  long site = -1;    // preorder statement index; -1 for external inputs
};

/// Def-use graph. Statement sites (assignments and if conditions) in
/// preorder, then one external-input node per variable read before any
/// definition on some path. Edges (def -> using site) are deduplicated.
struct Dfg {
  std::vector<DfgNode> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // sorted
};

Dfg build_dfg(const Program& p);

/// Basic blocks hold preorder statement indices (an if contributes its
/// condition to the block that ends with it). Block 0 is the synthetic entry,
/// the last block the synthetic exit.
struct Cfg {
  std::vector<std::vector<std::size_t>> blocks;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // sorted

  std::size_t entry() const { return 0; }
  std::size_t exit() const { return blocks.size() - 1; }
};

Cfg build_cfg(const Program& p);

struct CodeSummary {
  /// Assign, If, Emit, Num, Var, Binary, Unary, Call.
  std::array<std::size_t, 8> ast_kind_histogram{};
  std::size_t dfg_edge_count = 0;
  std::size_t cfg_block_count = 0;
  std::size_t cfg_edge_count = 0;

  static constexpr std::size_t kWidth = 11;
  std::array<double, kWidth> as_vector() const;
  bool operator==(const CodeSummary&) const = default;
};

std::array<std::size_t, 8> ast_kind_histogram(const Program& p);

struct DynProgram {
  std::string source;
  Program ast;
  Dfg dfg;
  Cfg cfg;
  CodeSummary summary;
};

/// parse + build_dfg + build_cfg + summarize.
DynProgram analyze(std::string_view source);
CodeSummary summarize(const Program& p, const Dfg& dfg, const Cfg& cfg);

/// Node kinds with a code template.
enum class CodeKind { hh, lif, synapse, passive };

const char* to_string(CodeKind k);
/// Throws ParamError for an unknown name.
CodeKind code_kind_from_string(std::string_view s);

std::string emit_code(const dyn::HhParams& p);
std::string emit_code(const dyn::LifParams& p);
std::string emit_code(const dyn::SynParams& p);
/// Passive compartment (leak only, axial current as an input).
std::string emit_passive_code(const dyn::HhParams& p);

}  // namespace bganlab::dynlang
