#include <doctest.h>

#include "cfa/fj_ast.hpp"

using namespace cfa;
using namespace cfa::fj;

namespace {

// The ANF split of `return f.foo(b.bar());` plus enough scaffolding to be a
// complete program.
const char* kAnfExample = R"(
class B extends Object {
  B() { super(); }
  B bar() { B r; r = this; return r; }
}
class F extends Object {
  F() { super(); }
  F foo(B b1) { F r; r = this; return r; }
}
main {
  B b; F f; B b1; F f1;
  b = new B();
  f = new F();
  b1 = b.bar();
  f1 = f.foo(b1);
  return f1;
}
)";

}  // namespace

TEST_CASE("the ANF example parses into labeled statements with succ") {
  auto p = parse_fj(kAnfExample);
  // main: 2 allocations + 2 invocations + the return = 5, bodies add 4.
  const MethodDecl& main = p->main();
  CHECK(main.last - main.entry + 1 == 5);
  // b1 = b.bar(); f1 = f.foo(b1); return f1; are the last three.
  const Stmt& call1 = p->stmt(main.entry + 2);
  REQUIRE(call1.kind == StmtKind::Assign);
  CHECK(call1.expr.kind == ExprKind::Invoke);
  CHECK(call1.expr.method == "bar");
  const Stmt& call2 = p->stmt(main.entry + 3);
  CHECK(call2.expr.method == "foo");
  CHECK(p->stmt(main.last).kind == StmtKind::Return);
  // succ is total on non-return labels and undefined on returns.
  for (Label l = 0; l < p->stmt_count(); ++l) {
    if (p->stmt(l).kind == StmtKind::Return)
      CHECK(!p->succ(l).has_value());
    else
      CHECK(p->succ(l).has_value());
  }
}

TEST_CASE("nested calls in argument position violate A-normal form") {
  CHECK_THROWS_WITH_AS(
      parse_fj(R"(
class B extends Object { B() { super(); } B bar() { return this; } }
class F extends Object { F() { super(); } F foo(B x) { F r; r = this; return r; } }
main { B b; F f; F r; b = new B(); f = new F(); r = f.foo(b.bar()); return r; }
)"),
      doctest::Contains("A-normal"), ParseError);
}

TEST_CASE("empty class with nullary constructor is valid") {
  auto p = parse_fj(R"(
class A extends Object { A() { super(); } }
main { A a; a = new A(); return a; }
)");
  auto a = p->class_named("A");
  REQUIRE(a.has_value());
  CHECK(p->field_vector(*a).empty());
  CHECK(p->cls(*a).ctor.params.empty());
}

TEST_CASE("constructor lookup: field vector and routing for ClosureXY") {
  auto p = parse_fj(R"(
class X extends Object { X() { super(); } }
class Y extends Object { Y() { super(); } }
class ClosureXY extends Object {
  X x; Y y;
  ClosureXY(X x, Y y) { super(); this.x = x; this.y = y; }
}
main { X a; Y b; ClosureXY c; a = new X(); b = new Y(); c = new ClosureXY(a, b); return c; }
)");
  auto cid = p->class_named("ClosureXY");
  REQUIRE(cid.has_value());
  const auto& fields = p->field_vector(*cid);
  REQUIRE(fields.size() == 2);
  CHECK(p->var_name(fields[0]) == "x");
  CHECK(p->var_name(fields[1]) == "y");
  // Field i receives constructor argument i here.
  CHECK(p->cls(*cid).ctor.field_source ==
        std::vector<std::size_t>{0, 1});
}

TEST_CASE("inherited fields come first and super args route to the parent") {
  // Oracle: by direct interpretation of the constructor assignments, the
  // two-level hierarchy routes px (param 0) to inherited x and pz (param 1)
  // to own z.
  auto p = parse_fj(R"(
class P extends Object {
  Object x;
  P(Object x) { super(); this.x = x; }
}
class C extends P {
  Object z;
  C(Object px, Object pz) { super(px); this.z = pz; }
}
main { Object o; C c; o = new Object(); c = new C(o, o); return c; }
)");
  auto cid = p->class_named("C");
  REQUIRE(cid.has_value());
  const auto& fields = p->field_vector(*cid);
  REQUIRE(fields.size() == 2);
  CHECK(p->var_name(fields[0]) == "x");
  CHECK(p->var_name(fields[1]) == "z");
  CHECK(p->cls(*cid).ctor.field_source == std::vector<std::size_t>{0, 1});
}

TEST_CASE("constructor validation errors") {
  // Assigning a non-own field.
  CHECK_THROWS_WITH_AS(parse_fj(R"(
class A extends Object { A(Object w) { super(); this.q = w; } }
main { A a; Object o; o = new Object(); a = new A(o); return a; }
)"),
                       doctest::Contains("non-own"), ParseError);
  // Missing an own-field assignment.
  CHECK_THROWS_WITH_AS(parse_fj(R"(
class A extends Object { Object f; A() { super(); } }
main { A a; a = new A(); return a; }
)"),
                       doctest::Contains("every own field"), ParseError);
  // super arity mismatch.
  CHECK_THROWS_WITH_AS(parse_fj(R"(
class P extends Object { Object x; P(Object x) { super(); this.x = x; } }
class C extends P { C() { super(); } }
main { C c; c = new C(); return c; }
)"),
                       doctest::Contains("arity"), ParseError);
  // Duplicate field across the chain.
  CHECK_THROWS_WITH_AS(parse_fj(R"(
class P extends Object { Object f; P(Object f) { super(); this.f = f; } }
class C extends P { Object f; C(Object a, Object f) { super(a); this.f = f; } }
main { C c; Object o; o = new Object(); c = new C(o, o); return c; }
)"),
                       doctest::Contains("duplicate field"), ParseError);
}

TEST_CASE("dispatch walks the inheritance chain") {
  auto p = parse_fj(R"(
class A extends Object {
  A() { super(); }
  A m() { return this; }
  A n() { return this; }
}
class B extends A {
  B() { super(); }
  A m() { return this; }
}
main { B b; A r; b = new B(); r = b.m(); return r; }
)");
  auto a = *p->class_named("A");
  auto b = *p->class_named("B");
  // Overriding subclass gets its own body.
  auto bm = p->dispatch(b, "m");
  REQUIRE(bm.has_value());
  CHECK(p->method(*bm).owner == b);
  // Non-overridden method resolves up the chain.
  auto bn = p->dispatch(b, "n");
  REQUIRE(bn.has_value());
  CHECK(p->method(*bn).owner == a);
  CHECK(!p->dispatch(b, "zap").has_value());
  CHECK(p->is_subclass(b, a));
  CHECK(!p->is_subclass(a, b));
}

TEST_CASE("declaration sugar and plain locals both work") {
  auto p = parse_fj(R"(
class A extends Object { A() { super(); } }
main {
  A plain;
  plain = new A();
  A sugar = new A();
  return sugar;
}
)");
  CHECK(p->main().locals.size() == 2);
}

TEST_CASE("structural parse errors") {
  CHECK_THROWS_WITH_AS(parse_fj("main { return x; }"),
                       doctest::Contains("undeclared"), ParseError);
  CHECK_THROWS_WITH_AS(parse_fj("main { Object x; x = new Zap(); return x; }"),
                       doctest::Contains("unknown class"), ParseError);
  CHECK_THROWS_WITH_AS(parse_fj(R"(
class A extends Object { A() { super(); } A m() { A r; r = this; } }
main { A a; a = new A(); return a; }
)"),
                       doctest::Contains("end with a return"), ParseError);
  CHECK_THROWS_WITH_AS(parse_fj(R"(
class A extends B { A() { super(); } }
main { A a; a = new A(); return a; }
)"),
                       doctest::Contains("unknown parent"), ParseError);
  CHECK_THROWS_WITH_AS(parse_fj("main { Object t; t = this; return t; }"),
                       doctest::Contains("not available in main"),
                       ParseError);
  CHECK_THROWS_WITH_AS(parse_fj(R"(
class A extends Object { A() { super(); } }
main { A a; a = new A(); return a; } class
)"),
                       doctest::Contains("trailing"), ParseError);
}
