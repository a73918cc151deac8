// SPDX-License-Identifier: Apache-2.0
#include "ssc/predicate.hpp"

#include <doctest.h>

using namespace ssc;

TEST_SUITE("predicate") {
    TEST_CASE("parse") {
        auto p = Predicate::parse("decision == approve");
        REQUIRE(p);
        CHECK(p->variable == "decision");
        CHECK(p->op == CompareOp::Eq);
        CHECK(p->literal == "approve");
        CHECK(Predicate::parse("n>=10")->op == CompareOp::Ge);
        CHECK_FALSE(Predicate::parse("== x"));
        CHECK_FALSE(Predicate::parse("a = b"));
        CHECK_FALSE(Predicate::parse("a =="));
    }

    TEST_CASE("numeric when both sides are decimals, lexicographic otherwise") {
        CHECK(Predicate::parse("n < 10")->evaluate("9"));
        CHECK_FALSE(Predicate::parse("n < 10")->evaluate("10.0"));
        CHECK(Predicate::parse("n == 1.50")->evaluate("1.5"));
        CHECK(Predicate::parse("s < b")->evaluate("a"));
        CHECK(Predicate::parse("s != yes")->evaluate("no"));
        CHECK(Predicate::parse("s > 10")->evaluate("9x"));
    }

    TEST_CASE("decimals") {
        CHECK(parse_decimal("-3.25") == -3.25);
        CHECK_FALSE(parse_decimal("1e3"));
        CHECK_FALSE(parse_decimal("."));
        CHECK_FALSE(parse_decimal(""));
    }

    TEST_CASE("templates") {
        std::string missing;
        CHECK(render_template("a ${x} b ${y}", {{"x", "1"}, {"y", "2"}}) == "a 1 b 2");
        CHECK_FALSE(render_template("${z}", {}, &missing));
        CHECK(missing == "z");
        CHECK(render_template("no vars", {}) == "no vars");
        CHECK(template_variables("${a}-${b}-${a}") == std::vector<std::string>{"a", "b", "a"});
    }
}
