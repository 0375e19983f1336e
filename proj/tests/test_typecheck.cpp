#include <catch2/catch_amalgamated.hpp>

#include "miso/compile.hpp"
#include "test_util.hpp"

using namespace miso;

namespace {

std::vector<std::string> errorsOf(const std::string& source) {
  CompileResult res = compile(source);
  std::vector<std::string> errors;
  for (const auto& d : res.diagnostics)
    if (d.severity == Severity::Error) errors.push_back(d.message);
  return errors;
}

bool hasErrorContaining(const std::string& source, const std::string& needle) {
  for (const auto& e : errorsOf(source))
    if (e.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("the full blend program type-checks with truncation warnings") {
  CompileResult res = compile(testutil::readFile(testutil::corpusPath("listing1.miso")));
  REQUIRE(res.ok);
  int warnings = 0;
  for (const auto& d : res.diagnostics) {
    CHECK(d.severity == Severity::Warning);
    CHECK(d.message.find("truncates") != std::string::npos);
    ++warnings;
  }
  CHECK(warnings == 3);  // r, g, b assignments are Float expressions into Int fields

  const CellDecl& blend = res.program.cells[0];
  for (const Stmt& s : blend.transition) {
    CHECK(s.kind == Stmt::Kind::Assign);
    CHECK(s.truncate);
    CHECK(s.value->type == ScalarType::Float);
  }
  CHECK(res.program.arrays[0].size == 60000);
  CHECK(res.program.arrays[1].size == 60000);
}

TEST_CASE("unknown identifier in a transition") {
  CHECK(hasErrorContaining("cell A { var x:Int = 0; transition { x = y; } }\na = new A(1)",
                           "unknown identifier 'y'"));
}

TEST_CASE("array size must be at least one") {
  CHECK(hasErrorContaining("cell B { var x:Int = 0; }\nb = new B(0)", "size must be >= 1"));
  CHECK(hasErrorContaining("cell B { var x:Int = 0; }\nb = new B(3-5)", "size must be >= 1"));
  CHECK_FALSE(hasErrorContaining("cell B { var x:Int = 0; }\nb = new B(1)", "size"));
}

TEST_CASE("array sizes fold as constant integer expressions") {
  Program p = testutil::compileOrThrow("cell A {}\nx = new A(300*200)\ny = new A(6/4)");
  CHECK(p.arrays[0].size == 60000);
  CHECK(p.arrays[1].size == 1);  // Int division truncates toward zero
  CHECK(hasErrorContaining("cell A {}\nx = new A(1/0)", "division by zero"));
  CHECK(hasErrorContaining("cell A {}\nx = new A(this.pos)", "constant"));
  CHECK(hasErrorContaining("cell A {}\nx = new A(1.5)", "integer constant"));
}

TEST_CASE("duplicate names are rejected") {
  CHECK(hasErrorContaining("cell A {}\ncell A {}\nx = new A(1)", "duplicate cell type 'A'"));
  CHECK(hasErrorContaining("cell A { var x:Int = 0; var x:Int = 1; }\na = new A(1)",
                           "duplicate field 'x'"));
  CHECK(hasErrorContaining("cell A {}\nx = new A(1)\nx = new A(2)",
                           "duplicate array name 'x'"));
}

TEST_CASE("each field is assigned at most once per transition") {
  CHECK(hasErrorContaining(
      "cell A { var x:Int = 0; transition { x = 1; x = 2; } }\na = new A(1)",
      "assigned more than once"));
}

TEST_CASE("array reads are resolved against declared arrays and fields") {
  CHECK(hasErrorContaining(
      "cell A { var x:Int = 0; transition { x = nowhere(this.pos).x; } }\na = new A(1)",
      "unknown array 'nowhere'"));
  CHECK(hasErrorContaining(
      "cell A { var x:Int = 0; transition { x = a(this.pos).nope; } }\na = new A(1)",
      "unknown field 'nope' on array 'a'"));
  CHECK(hasErrorContaining("cell B { var x:Int = 0; }\nb = new NoSuch(1)",
                           "unknown cell type 'NoSuch'"));
}

TEST_CASE("array indices must be Int") {
  CHECK(hasErrorContaining(
      "cell A { var x:Int = 0; transition { x = a(.5).x; } }\na = new A(1)",
      "array index must be Int"));
  CHECK_FALSE(hasErrorContaining(
      "cell A { var x:Int = 0; transition { x = a(this.pos).x; } }\na = new A(1)", "index"));
}

TEST_CASE("locals must be declared before use") {
  CHECK(hasErrorContaining(
      "cell A { var x:Int = 0; transition { x = t; var t:Int = 1; } }\na = new A(1)",
      "read before its declaration"));
  CHECK(hasErrorContaining(
      "cell A { var x:Int = 0; transition { t = 1; var t:Int = 1; } }\na = new A(1)",
      "before its declaration"));
  CHECK(hasErrorContaining(
      "cell A { transition { var t:Int = 1; var t:Int = 2; } }\na = new A(1)",
      "duplicate local variable 't'"));
}

TEST_CASE("field initializers may use literals, arithmetic and this.pos only") {
  CHECK(hasErrorContaining("cell A { var x:Int = 0; var y:Int = x; }\na = new A(1)",
                           "initializer"));
  CHECK(hasErrorContaining("cell A { var y:Int = a(0).y; }\na = new A(1)", "initializer"));
  CompileResult ok = compile("cell A { var y:Int = (this.pos + 1) * -2; }\na = new A(4)");
  CHECK(ok.ok);
  CHECK(hasErrorContaining("cell A { var y:Int = 1/0; }\na = new A(1)", "division by zero"));
}

TEST_CASE("promotion rules annotate every expression") {
  Program p = testutil::compileOrThrow(
      "cell A { var i:Int = 0; var f:Float = 0;\n"
      "  transition { var t:Float = i + i; f = i * f; i = i / 2; } }\n"
      "a = new A(1)");
  const auto& stmts = p.cells[0].transition;
  CHECK(stmts[0].value->type == ScalarType::Int);    // Int + Int
  CHECK_FALSE(stmts[0].truncate);                    // widening into a Float local
  CHECK(stmts[1].value->type == ScalarType::Float);  // Int * Float
  CHECK_FALSE(stmts[1].truncate);
  CHECK(stmts[2].value->type == ScalarType::Int);    // Int / Int
  CHECK_FALSE(stmts[2].truncate);
}

TEST_CASE("Float into Int targets is accepted and flagged as truncating") {
  CompileResult res = compile(
      "cell A { var i:Int = 0; transition { i = .5 * i; } }\na = new A(1)");
  REQUIRE(res.ok);
  REQUIRE(res.diagnostics.size() == 1);
  CHECK(res.diagnostics[0].severity == Severity::Warning);
  CHECK(res.program.cells[0].transition[0].truncate);

  CompileResult init = compile("cell A { var i:Int = .5; }\na = new A(1)");
  REQUIRE(init.ok);
  REQUIRE(init.diagnostics.size() == 1);
  CHECK(init.program.cells[0].fields[0].initTruncates);
}

TEST_CASE("local assignment re-tags statements and resolves slots") {
  Program p = testutil::compileOrThrow(
      "cell A { var x:Int = 0;\n"
      "  transition { var t:Int = 1; t = t + 1; x = t; } }\n"
      "a = new A(1)");
  const auto& stmts = p.cells[0].transition;
  CHECK(stmts[0].kind == Stmt::Kind::LocalDecl);
  CHECK(stmts[1].kind == Stmt::Kind::LocalAssign);
  CHECK(stmts[1].slot == stmts[0].slot);
  CHECK(stmts[2].kind == Stmt::Kind::Assign);
  CHECK(p.cells[0].localCount == 1);
}

TEST_CASE("diagnostics point at a participating token") {
  CompileResult res = compile("cell A { var x:Int = 0; transition { x = y; } }\na = new A(1)");
  REQUIRE_FALSE(res.ok);
  REQUIRE(res.diagnostics.size() == 1);
  CHECK(res.diagnostics[0].line == 1);
  CHECK(res.diagnostics[0].col == 42);  // the 'y'
}

TEST_CASE("identical source always yields an identical typed program") {
  std::string source = testutil::readFile(testutil::corpusPath("blend8.miso"));
  Program a = testutil::compileOrThrow(source);
  Program b = testutil::compileOrThrow(source);
  CHECK(structurallyEqual(a, b));
  CHECK(printProgram(a) == printProgram(b));
}
