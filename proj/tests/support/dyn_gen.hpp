#pragma once

// Random DynLang programs for round-trip properties.

#include <string>

#include "bganlab/dynlang.hpp"
#include "bganlab/rng.hpp"

namespace bganlab::testsupport {

inline dynlang::Expr random_expr(Rng& rng, int depth) {
  using dynlang::BinOp;
  using dynlang::Expr;
  static const char* const names[] = {"v", "m", "h", "dt", "i_inj", "g_1", "x", "_tmp"};
  const int pick = depth <= 0 ? static_cast<int>(rng.uniform_int(0, 1)) : static_cast<int>(rng.uniform_int(0, 5));
  switch (pick) {
    case 0: {
      const double choices[] = {0.0, 1.0, 2.5, 0.001, 1e-7, 123456.0, 3.14159, 6.02e23};
      return Expr::number(rng.bernoulli(0.5) ? choices[rng.uniform_int(0, 7)] : rng.uniform(0.0, 100.0));
    }
    case 1:
      return Expr::variable(names[rng.uniform_int(0, 7)]);
    case 2:
      return Expr::negate(random_expr(rng, depth - 1));
    case 3:
      return Expr::call(rng.bernoulli(0.5) ? dynlang::Func::exp : dynlang::Func::ln, random_expr(rng, depth - 1));
    default: {
      const auto op = static_cast<BinOp>(rng.uniform_int(0, 8));
      return Expr::binary(op, random_expr(rng, depth - 1), random_expr(rng, depth - 1));
    }
  }
}

inline std::vector<dynlang::Stmt> random_body(Rng& rng, int depth) {
  static const char* const targets[] = {"v", "m", "h", "x", "y", "w_2"};
  std::vector<dynlang::Stmt> body;
  const auto n = rng.uniform_int(1, 4);
  for (int k = 0; k < n; ++k) {
    dynlang::Stmt s;
    const double u = rng.uniform();
    if (depth > 0 && u < 0.2) {
      s.kind = dynlang::StmtKind::if_;
      s.expr = random_expr(rng, 2);
      s.then_body = random_body(rng, depth - 1);
      if (rng.bernoulli(0.5)) s.else_body = random_body(rng, depth - 1);
    } else if (u < 0.3) {
      s.kind = dynlang::StmtKind::emit;
    } else {
      s.kind = dynlang::StmtKind::assign;
      s.target = targets[rng.uniform_int(0, 5)];
      s.expr = random_expr(rng, 4);
    }
    body.push_back(std::move(s));
  }
  return body;
}

inline dynlang::Program random_program(Rng& rng) { return {random_body(rng, 2)}; }

}  // namespace bganlab::testsupport
