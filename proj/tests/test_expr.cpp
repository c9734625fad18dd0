#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kah/expr.hpp"
#include "kah/gen.hpp"

#include <random>

using namespace kah;

namespace {
TheoryConfig mono() { return TheoryConfig::monoid({"a", "b", "c", "y"}); }
}

TEST_CASE("substitution under binders follows the displayed equations") {
    TheoryConfig th = mono();
    ExprPtr e = parse_expr("mu x. 1 + a.x", th);

    SUBCASE("leaf replacement under a binder") {
        ExprPtr got = substitute(e, Subst::of_var(th.var_id("a"), parse_expr("b", th)));
        CHECK(alpha_eq(got, parse_expr("mu x. 1 + b.x", th)));
    }
    SUBCASE("the binder shadows its own recursion variable") {
        ExprPtr idmu = mk_mu("x", mk_rec("x"));
        ExprPtr got = substitute(idmu, Subst::of_rec("x", parse_expr("b", th)));
        CHECK(alpha_eq(got, idmu));
    }
    SUBCASE("variables outside the domain are untouched") {
        ExprPtr y = parse_expr("y", th);
        ExprPtr got = substitute(y, Subst::of_var(th.var_id("a"), parse_expr("b", th)));
        CHECK(alpha_eq(got, y));
    }
}

TEST_CASE("unfold") {
    TheoryConfig th = mono();
    ExprPtr st = parse_expr("a*", th);
    CHECK(alpha_eq(unfold(st), parse_expr("1 + a.(a*)", th)));

    ExprPtr idmu = mk_mu("x", mk_rec("x"));
    CHECK(alpha_eq(unfold(idmu), idmu));

    Signature sig;
    SymId f = sig.add("f", 2);
    SymId c = sig.add("c", 0);
    (void)f;
    (void)c;
    TheoryConfig tf = TheoryConfig::free(sig, {});
    ExprPtr m = parse_expr("mu x. c + f(x,x)", tf);
    CHECK(alpha_eq(unfold(m), parse_expr("c + f(mu x. c + f(x,x), mu x. c + f(x,x))", tf)));

    CHECK_THROWS_AS((void)unfold(parse_expr("a", th)), UsageError);
}

TEST_CASE("star and parstar sugar") {
    TheoryConfig th = mono();
    ExprPtr s = star(parse_expr("a", th), th);
    CHECK(alpha_eq(s, mk_mu("q", mk_plus(mk_one(th), mk_dot(th, parse_expr("a", th), mk_rec("q"))))));
    CHECK_THROWS_AS((void)parstar(parse_expr("a", th), th), TheoryError);

    TheoryConfig bi = TheoryConfig::bimonoid({"a"});
    ExprPtr p = parstar(parse_expr("a", bi), bi);
    StarShape shape = match_star(p, bi);
    CHECK(shape.matches);
    CHECK(shape.parallel);
}

TEST_CASE("fragment membership") {
    TheoryConfig th = mono();
    CHECK(fragment_member(parse_expr("a*", th), Fragment::KleeneStar, th));
    CHECK(fragment_member(parse_expr("a.(b + c)", th), Fragment::FixpointFree, th));
    CHECK(!fragment_member(parse_expr("a*", th), Fragment::FixpointFree, th));
    CHECK(!fragment_member(mk_mu("x", mk_plus(parse_expr("a", th),
                                              mk_dot(th, mk_rec("x"), mk_rec("x")))),
                           Fragment::KleeneStar, th));

    Signature sig;
    sig.add("f", 2);
    sig.add("c", 0);
    TheoryConfig tf = TheoryConfig::free(sig, {});
    CHECK(fragment_member(parse_expr("mu x. c + f(x,x)", tf), Fragment::Full, tf));
    CHECK(!fragment_member(parse_expr("mu x. c + f(x,x)", tf), Fragment::KleeneStar, tf));

    TheoryConfig bi = TheoryConfig::bimonoid({"a", "b"});
    CHECK(fragment_member(parse_expr("a^|| . b*", bi), Fragment::BiKleene, bi));
    CHECK(!fragment_member(parse_expr("a^||", bi), Fragment::KleeneStar, bi));
}

TEST_CASE("parse/print round-trip on random expressions") {
    std::mt19937_64 rng(99);
    Signature sig;
    sig.add("f", 2);
    sig.add("g", 3);
    sig.add("c", 0);
    std::vector<std::pair<TheoryConfig, Fragment>> cases = {
        {mono(), Fragment::KleeneStar},
        {TheoryConfig::commutative_monoid({"a", "b"}), Fragment::KleeneStar},
        {TheoryConfig::bimonoid({"a", "b"}), Fragment::BiKleene},
        {TheoryConfig::free(sig, {"x", "y"}), Fragment::Full},
        {mono(), Fragment::Full},
    };
    for (auto& [th, frag] : cases) {
        for (int i = 0; i < 120; ++i) {
            ExprPtr e = random_expr(th, frag, rng, 2 + i % 14);
            std::string s = expr_to_string(e, th);
            ExprPtr back = parse_expr(s, th);
            INFO(s);
            CHECK(alpha_eq(e, back));
        }
    }
}

TEST_CASE("parse errors carry positions") {
    TheoryConfig th = mono();
    CHECK_THROWS_AS((void)parse_expr("a +", th), ParseError);
    CHECK_THROWS_AS((void)parse_expr("f(a)", th), ParseError);
    CHECK_THROWS_AS((void)parse_expr("mu x 1", th), ParseError);
    try {
        (void)parse_expr("a + \n  %", th);
        CHECK(false);
    } catch (const ParseError& pe) {
        CHECK(pe.line == 2);
    }
}

TEST_CASE("alpha-equivalence identifies renamed binders") {
    TheoryConfig th = mono();
    ExprPtr e1 = mk_mu("x", mk_plus(mk_one(th), mk_dot(th, mk_var(0), mk_rec("x"))));
    ExprPtr e2 = mk_mu("z", mk_plus(mk_one(th), mk_dot(th, mk_var(0), mk_rec("z"))));
    CHECK(alpha_eq(e1, e2));
    ExprPtr e3 = mk_mu("z", mk_plus(mk_one(th), mk_dot(th, mk_var(1), mk_rec("z"))));
    CHECK(!alpha_eq(e1, e3));
    // nested binders with shadowing
    ExprPtr n1 = mk_mu("x", mk_mu("x", mk_rec("x")));
    ExprPtr n2 = mk_mu("a", mk_mu("b", mk_rec("b")));
    ExprPtr n3 = mk_mu("a", mk_mu("b", mk_rec("a")));
    CHECK(alpha_eq(n1, n2));
    CHECK(!alpha_eq(n1, n3));
}

TEST_CASE("substitution composition commutes on disjoint domains") {
    std::mt19937_64 rng(5);
    TheoryConfig th = mono();
    for (int i = 0; i < 100; ++i) {
        ExprPtr e = random_expr(th, Fragment::Full, rng, 10);
        ExprPtr f1 = random_expr(th, Fragment::KleeneStar, rng, 4);
        ExprPtr f2 = random_expr(th, Fragment::KleeneStar, rng, 4);
        // domains {a}, {b}; f1/f2 must avoid the other domain variable to
        // keep the composition honest
        Subst s1 = Subst::of_var(0, substitute(f1, Subst::of_var(1, mk_one(th))));
        Subst s2 = Subst::of_var(1, substitute(f2, Subst::of_var(0, mk_one(th))));
        ExprPtr ab = substitute(substitute(e, s1), s2);
        ExprPtr ba = substitute(substitute(e, s2), s1);
        CHECK(alpha_eq(ab, ba));
    }
}

TEST_CASE("fragment closure properties hold generatively") {
    std::mt19937_64 rng(17);
    TheoryConfig bi = TheoryConfig::bimonoid({"a", "b"});
    for (Fragment frag : {Fragment::KleeneStar, Fragment::BiKleene}) {
        for (int i = 0; i < 60; ++i) {
            ExprPtr e = random_expr(bi, frag, rng, 10);
            REQUIRE(fragment_member(e, frag, bi));
            // subexpressions stay in the fragment
            std::function<void(const ExprPtr&)> sub = [&](const ExprPtr& u) {
                if (is_closed(u))
                    CHECK(fragment_member(u, frag, bi));
                for (const ExprPtr& k : u->kids)
                    sub(k);
            };
            sub(e);
            // closed under + and the operations
            ExprPtr f = random_expr(bi, frag, rng, 6);
            CHECK(fragment_member(mk_plus(e, f), frag, bi));
            CHECK(fragment_member(mk_dot(bi, e, f), frag, bi));
            // X-substitutions into the fragment stay inside
            ExprPtr g = substitute(e, Subst::of_var(0, f));
            CHECK(fragment_member(g, frag, bi));
            // fixpoint bodies: star(e) in fragment, unfolding stays inside
            ExprPtr st = star(e, bi);
            CHECK(fragment_member(st, frag, bi));
            CHECK(fragment_member(unfold(st), frag, bi));
        }
    }
}
