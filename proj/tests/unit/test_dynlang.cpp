#include <gtest/gtest.h>

#include <regex>

#include "../support/dyn_gen.hpp"
#include "bganlab/dynlang.hpp"
#include "bganlab/error.hpp"

using namespace bganlab;
using namespace bganlab::dynlang;

namespace {

using Hist = std::array<std::size_t, 8>;

std::size_t edges_into(const Dfg& g, std::size_t target) {
  std::size_t n = 0;
  for (const auto& e : g.edges) n += e.second == target;
  return n;
}

bool has_edge(const Cfg& g, std::size_t a, std::size_t b) {
  return std::find(g.edges.begin(), g.edges.end(), std::make_pair(a, b)) != g.edges.end();
}

}  // namespace

TEST(Parse, Assignment) {
  const Program p = parse("v = v + 1;");
  Program expected;
  Stmt s;
  s.target = "v";
  s.expr = Expr::binary(BinOp::add, Expr::variable("v"), Expr::number(1));
  expected.body.push_back(s);
  EXPECT_EQ(p, expected);
}

TEST(Parse, IfWithoutElse) {
  const Program p = parse("if (v > th) { emit spike; v = vr; }");
  ASSERT_EQ(p.body.size(), 1u);
  EXPECT_EQ(p.body[0].kind, StmtKind::if_);
  ASSERT_EQ(p.body[0].then_body.size(), 2u);
  EXPECT_EQ(p.body[0].then_body[0].kind, StmtKind::emit);
  EXPECT_TRUE(p.body[0].else_body.empty());
}

TEST(Parse, Precedence) {
  EXPECT_EQ(parse("x = -a^b;").body[0].expr, Expr::negate(Expr::binary(BinOp::pow, Expr::variable("a"), Expr::variable("b"))));
  EXPECT_EQ(parse("x = a^-b;").body[0].expr, Expr::binary(BinOp::pow, Expr::variable("a"), Expr::negate(Expr::variable("b"))));
  EXPECT_EQ(parse("x = a^b^c;").body[0].expr,
            Expr::binary(BinOp::pow, Expr::variable("a"), Expr::binary(BinOp::pow, Expr::variable("b"), Expr::variable("c"))));
  EXPECT_EQ(parse("x = a - b - c;").body[0].expr,
            Expr::binary(BinOp::sub, Expr::binary(BinOp::sub, Expr::variable("a"), Expr::variable("b")), Expr::variable("c")));
  EXPECT_EQ(parse("x = a + b * c > d;").body[0].expr,
            Expr::binary(BinOp::gt,
                         Expr::binary(BinOp::add, Expr::variable("a"),
                                      Expr::binary(BinOp::mul, Expr::variable("b"), Expr::variable("c"))),
                         Expr::variable("d")));
  EXPECT_EQ(parse("x = 1.5e-3;").body[0].expr, Expr::number(1.5e-3));
}

TEST(Parse, SyntaxErrorsCarryPosition) {
  auto where = [](std::string_view src) {
    try {
      parse(src);
    } catch (const ParseError& e) {
      return std::make_pair(e.line(), e.column());
    }
    return std::make_pair(0, 0);
  };
  EXPECT_EQ(where("v = ;"), std::make_pair(1, 5));
  EXPECT_EQ(where("a = 1;\nif (a > 0) {\n}\n"), std::make_pair(3, 1));
  EXPECT_EQ(where("a = 1"), std::make_pair(1, 6));
  EXPECT_EQ(where(""), std::make_pair(1, 1));
  EXPECT_EQ(where("A = 1;"), std::make_pair(1, 1));
  EXPECT_EQ(where("x = exp 1;"), std::make_pair(1, 9));
  EXPECT_EQ(where("emit v;"), std::make_pair(1, 6));
  EXPECT_EQ(where("x = 1e999;"), std::make_pair(1, 5));
}

TEST(Parse, CommentsAndWhitespaceIgnored) {
  EXPECT_EQ(parse("# step\nv=v+1;   # inc\n"), parse("v = v + 1;"));
}

TEST(Print, RoundTripsHandCases) {
  for (const char* src : {"v = v + 1;", "if (v > th) { emit spike; v = vr; }",
                          "a = 1; if (x > 0) { a = 2; } else { a = -(3 - x); } b = a;",
                          "x = (a + b) * c / (d - -e) ^ 2;", "x = --a;", "x = (a > b) > c;", "x = a > (b > c);",
                          "x = (a ^ b) ^ c;", "x = exp(-(v + 40) / 10) - ln(2);"}) {
    const Program p = parse(src);
    EXPECT_EQ(parse(print(p)), p) << src;
    EXPECT_EQ(print(parse(print(p))), print(p));
  }
  EXPECT_EQ(print(parse("if (v>th){emit spike;v=vr;}else{v=v+1;}")),
            "if (v > th) {\n  emit spike;\n  v = vr;\n} else {\n  v = v + 1;\n}\n");
  EXPECT_EQ(print(parse("x = ((a)) + ((b * c));")), "x = a + b * c;\n");
}

TEST(Print, RoundTripsGeneratedPrograms) {
  Rng rng(2024);
  for (int i = 0; i < 300; ++i) {
    const Program p = testsupport::random_program(rng);
    const std::string src = print(p);
    ASSERT_EQ(parse(src), p) << src;
  }
}

TEST(Dfg, SingleDefUse) {
  const Dfg g = build_dfg(parse("a = 1; b = a;"));
  EXPECT_EQ(g.edges.size(), 1u);
  EXPECT_EQ(g.edges[0], std::make_pair(std::size_t{0}, std::size_t{1}));
}

TEST(Dfg, ExternalInputsOfOneStatement) {
  const Dfg g = build_dfg(parse("v = v + dt * (i - g * (v - e)) / c;"));
  std::size_t externals = 0, defs = 0;
  for (const auto& n : g.nodes) {
    externals += n.kind == DfgNodeKind::external;
    defs += n.kind == DfgNodeKind::definition;
  }
  EXPECT_EQ(externals, 6u);
  EXPECT_EQ(defs, 1u);
  EXPECT_EQ(g.edges.size(), 6u);
  EXPECT_EQ(edges_into(g, 0), 6u);
}

TEST(Dfg, BranchMergeReachingDefinitions) {
  const Dfg g = build_dfg(parse("a = 1; if (x > 0) { a = 2; } b = a;"));
  // sites: def a, cond, def a, def b; then external x
  ASSERT_EQ(g.nodes.size(), 5u);
  EXPECT_EQ(g.nodes[3].name, "b");
  EXPECT_EQ(edges_into(g, 3), 2u);
  EXPECT_EQ(edges_into(g, 1), 1u);
  EXPECT_EQ(g.nodes[4].kind, DfgNodeKind::external);
  EXPECT_EQ(g.edges.size(), 3u);
}

TEST(Dfg, DefinitionOnOnePathOnlyKeepsExternal) {
  const Dfg g = build_dfg(parse("if (x > 0) { a = 2; } else { b = 1; } c = a + b;"));
  // sites: cond(0) a(1) b(2) c(3); externals x, a, b
  ASSERT_EQ(g.nodes.size(), 7u);
  EXPECT_EQ(edges_into(g, 3), 4u);
}

TEST(Dfg, UsesInBothBranchesReachedByPriorDefinition) {
  const Dfg g = build_dfg(parse("a = 1; if (a > 0) { b = a; } else { b = a + 1; } c = b;"));
  // sites: a(0) cond(1) b(2) b(3) c(4)
  EXPECT_EQ(g.edges, (std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {0, 2}, {0, 3}, {2, 4}, {3, 4}}));
}

TEST(Cfg, StraightLine) {
  const Cfg g = build_cfg(parse("a = 1; b = a; c = b;"));
  EXPECT_EQ(g.blocks.size(), 3u);
  EXPECT_EQ(g.edges.size(), 2u);
  EXPECT_EQ(g.blocks[1].size(), 3u);
}

TEST(Cfg, IfElseWithTail) {
  const Cfg g = build_cfg(parse("a = 1; if (a > 0) { b = 1; } else { b = 2; } c = b;"));
  EXPECT_EQ(g.blocks.size(), 6u);
  EXPECT_EQ(g.edges.size(), 6u);
  // entry, cond, then, else, join, exit
  EXPECT_EQ(g.blocks[1], (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(g.blocks[4], (std::vector<std::size_t>{4}));
}

TEST(Cfg, IfWithoutElseFallsThroughToJoin) {
  const Cfg g = build_cfg(parse("a = 1; if (a > 0) { b = 1; } c = 2;"));
  EXPECT_EQ(g.blocks.size(), 5u);
  EXPECT_EQ(g.edges.size(), 5u);
  EXPECT_TRUE(has_edge(g, 1, 3));  // cond -> join
}

TEST(Cfg, NestedAndConsecutiveIfs) {
  const Cfg g = build_cfg(parse("if (a > 0) { if (b > 0) { c = 1; } } if (d > 0) { e = 1; } else { e = 2; }"));
  // entry, cond1, then1(cond2), then2, join2, join1(cond3), then3, else3, join3, exit
  EXPECT_EQ(g.blocks.size(), 10u);
  EXPECT_EQ(g.edges.size(), 12u);
}

TEST(Summary, MinimalProgram) {
  const DynProgram d = analyze("a = 1;");
  EXPECT_EQ(d.summary.ast_kind_histogram, (Hist{1, 0, 0, 1, 0, 0, 0, 0}));
  EXPECT_EQ(d.summary.dfg_edge_count, 0u);
  EXPECT_EQ(d.summary.cfg_block_count, 3u);
  EXPECT_EQ(d.summary.cfg_edge_count, 2u);
}

TEST(Summary, LifTemplateHandTrace) {
  const std::string src = emit_code(dyn::LifParams{});
  const DynProgram d = analyze(src);
  EXPECT_EQ(d.summary.ast_kind_histogram, (Hist{3, 1, 1, 5, 6, 7, 4, 1}));
  EXPECT_EQ(d.summary.dfg_edge_count, 5u);
  EXPECT_EQ(d.summary.cfg_block_count, 5u);
  EXPECT_EQ(d.summary.cfg_edge_count, 5u);
}

TEST(Summary, WhitespaceInsensitive) {
  const std::string src = emit_code(dyn::HhParams{});
  std::string squashed = std::regex_replace(src, std::regex("#[^\n]*"), "");
  squashed = std::regex_replace(squashed, std::regex("[ \n]+"), " ");
  EXPECT_EQ(analyze(src).summary, analyze(squashed).summary);
  EXPECT_EQ(analyze(src).summary, analyze(print(parse(src))).summary);
}

TEST(EmitCode, TemplatesAreDeterministicAndParse) {
  EXPECT_EQ(emit_code(dyn::LifParams{}), emit_code(dyn::LifParams{}));
  const auto lif = analyze(emit_code(dyn::LifParams{})).summary.ast_kind_histogram;
  EXPECT_EQ(lif[1], 1u);
  EXPECT_EQ(lif[2], 1u);
  EXPECT_GE(analyze(emit_code(dyn::HhParams{})).summary.ast_kind_histogram[7], 6u);
  EXPECT_NO_THROW(analyze(emit_code(dyn::SynParams{})));
  EXPECT_NO_THROW(analyze(emit_passive_code(dyn::HhParams{})));
  dyn::HhParams odd;
  odd.gbar_na = 123.456789;
  EXPECT_NE(emit_code(odd), emit_code(dyn::HhParams{}));
  EXPECT_THROW(code_kind_from_string("izhikevich"), ParamError);
  EXPECT_EQ(code_kind_from_string("synapse"), CodeKind::synapse);
}

TEST(Properties, CfgAndDfgShapeOnGeneratedPrograms) {
  Rng rng(7);
  for (int i = 0; i < 300; ++i) {
    const Program p = testsupport::random_program(rng);
    const Cfg c = build_cfg(p);
    EXPECT_GE(c.blocks.size(), 3u);
    EXPECT_GE(c.edges.size(), c.blocks.size() - 1);
    std::size_t into_entry = 0, out_of_exit = 0;
    for (const auto& [a, b] : c.edges) {
      into_entry += b == c.entry();
      out_of_exit += a == c.exit();
    }
    EXPECT_EQ(into_entry, 0u);
    EXPECT_EQ(out_of_exit, 0u);

    const Dfg d = build_dfg(p);
    for (const auto& [src, dst] : d.edges) {
      ASSERT_LT(src, d.nodes.size());
      ASSERT_LT(dst, d.nodes.size());
      ASSERT_NE(d.nodes[dst].kind, DfgNodeKind::external);
      // a definition can only reach a lexically later site
      if (d.nodes[src].kind != DfgNodeKind::external) ASSERT_LT(d.nodes[src].site, d.nodes[dst].site);
    }
  }
}
