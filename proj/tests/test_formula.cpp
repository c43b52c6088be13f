#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "varex/formula.hpp"

using namespace varex;

namespace {

// Truth-table oracle: evaluates a formula on every assignment of a small
// option set, independent of the BDD path.
std::vector<bool> truthTable(const FormulaContext& ctx, Formula f) {
  size_t n = ctx.options().size();
  std::vector<bool> rows;
  for (uint64_t m = 0; m < (uint64_t(1) << n); ++m) {
    std::vector<char> bits(n);
    for (size_t i = 0; i < n; ++i) bits[i] = (m >> i) & 1;
    rows.push_back(ctx.evaluate(f, ConfigAssignment(&ctx, bits)));
  }
  return rows;
}

// Builds a random formula and, in parallel, its truth table computed directly
// from the connectives.
struct RandomFormula {
  Formula f;
  std::vector<bool> table;
};

RandomFormula randomFormula(const FormulaContext& ctx, std::mt19937& rng,
                            int depth) {
  size_t n = ctx.options().size();
  uint64_t rows = uint64_t(1) << n;
  std::uniform_int_distribution<int> kind(0, depth <= 0 ? 1 : 4);
  switch (kind(rng)) {
    case 0: {
      std::uniform_int_distribution<int> v(0, int(n - 1));
      int var = v(rng);
      std::vector<bool> t(rows);
      for (uint64_t m = 0; m < rows; ++m) t[m] = (m >> var) & 1;
      return {ctx.option(uint32_t(var)), t};
    }
    case 1: {
      std::uniform_int_distribution<int> b(0, 1);
      bool tru = b(rng);
      return {tru ? ctx.verum() : ctx.falsum(),
              std::vector<bool>(rows, tru)};
    }
    case 2: {
      auto a = randomFormula(ctx, rng, depth - 1);
      for (auto&& x : a.table) x = !x;
      return {ctx.neg(a.f), a.table};
    }
    case 3: {
      auto a = randomFormula(ctx, rng, depth - 1);
      auto b = randomFormula(ctx, rng, depth - 1);
      std::vector<bool> t(rows);
      for (uint64_t m = 0; m < rows; ++m) t[m] = a.table[m] && b.table[m];
      return {ctx.conj(a.f, b.f), t};
    }
    default: {
      auto a = randomFormula(ctx, rng, depth - 1);
      auto b = randomFormula(ctx, rng, depth - 1);
      std::vector<bool> t(rows);
      for (uint64_t m = 0; m < rows; ++m) t[m] = a.table[m] || b.table[m];
      return {ctx.disj(a.f, b.f), t};
    }
  }
}

}  // namespace

TEST_CASE("option atoms are idempotent and canonical") {
  FormulaContext ctx({"A", "B"});
  CHECK(ctx.option("A") == ctx.option("A"));
  CHECK(ctx.option("A") != ctx.option("B"));
  CHECK(ctx.conj(ctx.option("A"), ctx.neg(ctx.option("A"))).isContradiction());
  CHECK(ctx.disj(ctx.option("A"), ctx.neg(ctx.option("A"))).isTautology());
  CHECK_THROWS_AS(ctx.option("C"), VarexError);
}

TEST_CASE("connective identities") {
  FormulaContext ctx({"FAHRENHEIT", "M"});
  Formula f = ctx.option("FAHRENHEIT");
  Formula m = ctx.option("M");
  CHECK(ctx.conj(ctx.verum(), f) == f);
  CHECK(ctx.disj(ctx.falsum(), ctx.conj(f, m)) == ctx.conj(f, m));
  // (!F & M) | (F & M) == M
  Formula joined =
      ctx.disj(ctx.conj(ctx.neg(f), m), ctx.conj(f, m));
  CHECK(joined == m);
}

TEST_CASE("satisfiability on the running example") {
  FormulaContext ctx({"a", "b", "c"});
  Formula f = ctx.conj(ctx.disj(ctx.option("a"), ctx.option("b")),
                       ctx.neg(ctx.option("c")));
  CHECK(f.isSatisfiable());
  CHECK(!f.isContradiction());
  CHECK(ctx.falsum().isContradiction());
  CHECK(ctx.evaluate(f, ConfigAssignment(&ctx, {1, 0, 0})));
  CHECK(!ctx.evaluate(f, ConfigAssignment(&ctx, {0, 0, 0})));
}

TEST_CASE("canonicity matches a truth-table oracle on random formulas") {
  FormulaContext ctx({"p", "q", "r", "s", "t"});
  std::mt19937 rng(7);
  for (int iter = 0; iter < 300; ++iter) {
    auto a = randomFormula(ctx, rng, 4);
    auto b = randomFormula(ctx, rng, 4);
    CHECK(truthTable(ctx, a.f) == a.table);
    bool semanticallyEqual = a.table == b.table;
    CHECK(semanticallyEqual == (a.f == b.f));
    // De Morgan
    Formula left = ctx.neg(ctx.conj(a.f, b.f));
    Formula right = ctx.disj(ctx.neg(a.f), ctx.neg(b.f));
    CHECK(left == right);
    // satisfiability agrees with the table
    bool anyRow = false;
    for (bool row : a.table) anyRow = anyRow || row;
    CHECK(a.f.isSatisfiable() == anyRow);
  }
}

TEST_CASE("enumerateConfigs exhaustive cases") {
  FormulaContext ctx({"x", "y", "z"});
  auto all = enumerateConfigs(ctx, ctx.verum(), 4096, 1);
  CHECK(all.size() == 8);

  FormulaContext ctx2({"a", "b"});
  // a -> b
  Formula model = ctx2.disj(ctx2.neg(ctx2.option("a")), ctx2.option("b"));
  auto some = enumerateConfigs(ctx2, model, 4096, 1);
  REQUIRE(some.size() == 3);
  for (const auto& cfg : some) CHECK(ctx2.evaluate(model, cfg));

  auto none = enumerateConfigs(ctx2, ctx2.falsum(), 4096, 1);
  CHECK(none.empty());
}

TEST_CASE("enumerateConfigs samples distinct valid configs beyond the cap") {
  std::vector<std::string> names;
  for (int i = 0; i < 25; ++i) names.push_back("o" + std::to_string(i));
  FormulaContext ctx(names);
  // model: o0 | o1  (keeps most of the space valid)
  Formula model = ctx.disj(ctx.option("o0"), ctx.option("o1"));
  auto sample = enumerateConfigs(ctx, model, 1000, 42);
  REQUIRE(sample.size() == 1000);
  std::set<std::string> distinct;
  for (const auto& cfg : sample) {
    CHECK(ctx.evaluate(model, cfg));
    distinct.insert(cfg.toString());
  }
  CHECK(distinct.size() == 1000);
  // deterministic under the same seed
  auto again = enumerateConfigs(ctx, model, 1000, 42);
  bool same = true;
  for (size_t i = 0; i < sample.size(); ++i)
    same = same && (sample[i] == again[i]);
  CHECK(same);
}

TEST_CASE("render and parse round-trip") {
  FormulaContext ctx({"SMILEY", "WEATHER", "FAHRENHEIT"});
  Formula f = ctx.conj(ctx.disj(ctx.option("SMILEY"), ctx.option("WEATHER")),
                       ctx.neg(ctx.option("FAHRENHEIT")));
  CHECK(ctx.parseFormula(ctx.render(f)) == f);
  CHECK(ctx.render(ctx.verum()) == "True");
  CHECK(ctx.render(ctx.falsum()) == "False");
  CHECK(ctx.render(ctx.option("SMILEY")) == "SMILEY");
  CHECK(ctx.render(ctx.neg(ctx.option("SMILEY"))) == "!SMILEY");
  CHECK_THROWS_AS(ctx.parseFormula("NOPE & SMILEY"), VarexError);
  CHECK_THROWS_AS(ctx.parseFormula("SMILEY &"), VarexError);
}

TEST_CASE("evaluate requires a total assignment over the same context") {
  FormulaContext ctx({"a", "b"});
  FormulaContext other({"a", "b"});
  Formula f = ctx.option("a");
  CHECK_THROWS(ctx.evaluate(f, ConfigAssignment(&ctx, {1})));
  CHECK_THROWS(ctx.evaluate(f, ConfigAssignment(&other, {1, 0})));
}
